#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "extra_lab/error.hpp"
#include "extra_lab/linalg.hpp"
#include "extra_lab/mixing.hpp"
#include "extra_lab/objectives.hpp"
#include "extra_lab/record.hpp"

namespace extra_lab {

/// || (I - (1/m) 1 1^T (x) I_n) x ||: distance of x from its block average.
inline double consensus_error(const StackedPoint& x) {
  if (x.agents() == 0) return 0.0;
  const Vector mean = x.average();
  return (x.as_columns().colwise() - mean).norm();
}

/// || (1/m) (1 1^T (x) I_n) grad F(x) ||; every block of the stacked vector is
/// the mean local gradient, so this is sqrt(m) * ||mean_i grad f_i(x_i)||.
inline double avg_gradient_norm(const ObjectiveSet& obj, const StackedPoint& x) {
  const StackedPoint g = stacked_gradient(obj, x);
  return std::sqrt(static_cast<double>(x.agents())) * g.average().norm();
}

/// Distance from x to the nearest consensual point 1 (x) t, t in targets.
inline double distance_to_consensual(const StackedPoint& x, std::span<const Vector> targets) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vector& t : targets) best = std::min(best, (x.as_columns().colwise() - t).norm());
  return best;
}

inline MetricSample measure(const ObjectiveSet& obj, std::size_t k, const StackedPoint& x) {
  return {k, consensus_error(x), avg_gradient_norm(obj, x), stacked_value(obj, x), std::nullopt};
}

namespace detail {

inline void check_bound_inputs(double lambda1_P, double lipschitz) {
  require(lambda1_P >= 0.0 && lambda1_P < 1.0, ErrorKind::parameter,
          "lambda_1(P) must lie in [0, 1), got " + std::to_string(lambda1_P));
  require(lipschitz > 0.0, ErrorKind::parameter, "L_F must be positive, got " + std::to_string(lipschitz));
}

}  // namespace detail

/// (1 - lambda_1(P)^2) / (6 L^4 + 6 L^3 + 48 L + 1), as written.
inline double step_bound_thm1(double lambda1_P, double lipschitz) {
  detail::check_bound_inputs(lambda1_P, lipschitz);
  const double l = lipschitz;
  return (1.0 - lambda1_P * lambda1_P) / (6.0 * l * l * l * l + 6.0 * l * l * l + 48.0 * l + 1.0);
}

/// min(step_bound_thm1, lambda_min(V) / L).
inline double step_bound_thm2(double lambda1_P, double lipschitz, double lambda_min_V) {
  detail::check_bound_inputs(lambda1_P, lipschitz);
  require(lambda_min_V > 0.0, ErrorKind::parameter,
          "lambda_min(V) must be positive, got " + std::to_string(lambda_min_V));
  return std::min(step_bound_thm1(lambda1_P, lipschitz), lambda_min_V / lipschitz);
}

struct ClassifyTolerances {
  double consensus = 1e-6;
  double grad = 1e-6;
  double eig = 1e-8;
};

/// Consensus first, then the summed gradient, then the sign of
/// lambda_min(sum_i Hessian f_i(x_i)). Eigenvalues within +-eig count as
/// positive semidefinite.
inline StationarityVerdict classify_point(const ObjectiveSet& obj, const StackedPoint& x, ClassifyTolerances tol = {}) {
  require(tol.consensus > 0.0 && tol.grad > 0.0 && tol.eig > 0.0, ErrorKind::parameter,
          "classification tolerances must be positive");
  obj.check_shape(x);
  StationarityVerdict v;
  v.consensus_residual = consensus_error(x);
  Vector summed = Vector::Zero(obj.dim());
  for (std::size_t i = 0; i < obj.agents(); ++i) summed += obj.local(i).gradient(x.block(i));
  v.summed_gradient_norm = summed.norm();
  if (v.consensus_residual > tol.consensus) {
    v.label = Stationarity::nonconsensual;
    return v;
  }
  if (v.summed_gradient_norm > tol.grad) {
    v.label = Stationarity::consensual_nonstationary;
    return v;
  }
  Matrix hessian = Matrix::Zero(obj.dim(), obj.dim());
  for (std::size_t i = 0; i < obj.agents(); ++i) hessian += obj.local(i).hessian(x.block(i));
  v.summed_hessian_lambda_min = lambda_min_symmetric(0.5 * (hessian + hessian.transpose()));
  v.label = *v.summed_hessian_lambda_min >= -tol.eig ? Stationarity::consensual_second_order
                                                      : Stationarity::consensual_strict_saddle;
  return v;
}

inline Matrix kron_identity(const Matrix& a, std::size_t n) {
  const auto d = static_cast<Eigen::Index>(n);
  Matrix out = Matrix::Zero(a.rows() * d, a.cols() * d);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) out.block(i * d, j * d, d, d) = a(i, j) * Matrix::Identity(d, d);
  return out;
}

/// The Jacobi-form map T(x, y) = (W x + y - a grad F(x), (W - V) x + y).
inline std::pair<StackedPoint, StackedPoint> t_map(const ObjectiveSet& obj, const StackedPoint& x,
                                                   const StackedPoint& y, double alpha, const MixingPair& pair) {
  obj.check_shape(x);
  obj.check_shape(y);
  StackedPoint wx(x.agents(), x.dim()), vx(x.agents(), x.dim());
  wx.as_columns() = x.as_columns() * pair.W().transpose();
  vx.as_columns() = x.as_columns() * pair.V().transpose();
  StackedPoint nx(x.agents(), x.dim(), wx.data() + y.data() - alpha * stacked_gradient(obj, x).data());
  StackedPoint ny(x.agents(), x.dim(), wx.data() - vx.data() + y.data());
  return {std::move(nx), std::move(ny)};
}

/// Jacobian of the Jacobi-form map T(x, y) = (W x + y - a grad F(x), (W - V) x + y):
///   [[W - a Hess F(x), I], [W - V, I]]. It does not depend on y.
inline Matrix t_map_jacobian(const ObjectiveSet& obj, const StackedPoint& x, double alpha, const MixingPair& pair) {
  obj.check_shape(x);
  require(pair.agents() == obj.agents(), ErrorKind::shape, "mixing pair and objective set disagree on agent count");
  const std::size_t n = obj.dim();
  const auto mn = static_cast<Eigen::Index>(obj.agents() * n);
  const Matrix w_hat = kron_identity(pair.W(), n);
  const Matrix v_hat = kron_identity(pair.V(), n);
  Matrix dt(2 * mn, 2 * mn);
  dt.topLeftCorner(mn, mn) = w_hat - alpha * stacked_hessian(obj, x);
  dt.topRightCorner(mn, mn) = Matrix::Identity(mn, mn);
  dt.bottomLeftCorner(mn, mn) = w_hat - v_hat;
  dt.bottomRightCorner(mn, mn) = Matrix::Identity(mn, mn);
  return dt;
}

struct InvertibilityCertificate {
  double det = 0.0;
  double scale = 0.0;  // product of row norms (Hadamard bound on |det|)
  bool invertible = false;
};

/// det(DT) reduces by a Schur complement to det(V_hat - a Hess F(x)).
inline InvertibilityCertificate lemma4_certificate(const ObjectiveSet& obj, const StackedPoint& x, double alpha,
                                                   const MixingPair& pair) {
  require(alpha > 0.0, ErrorKind::parameter, "step size must be positive");
  obj.check_shape(x);
  const Matrix reduced = kron_identity(pair.V(), obj.dim()) - alpha * stacked_hessian(obj, x);
  InvertibilityCertificate cert;
  cert.det = reduced.partialPivLu().determinant();
  cert.scale = 1.0;
  for (Eigen::Index r = 0; r < reduced.rows(); ++r) cert.scale *= reduced.row(r).norm();
  cert.invertible = std::abs(cert.det) > 1e-12 * cert.scale;
  return cert;
}

struct CesaroFit {
  bool partial_sums_bounded = false;
  /// Least-squares slope of log(S_k / k) against log k over the second half;
  /// -infinity when the metric is identically zero there.
  double loglog_slope = 0.0;
};

struct CesaroReport {
  CesaroFit consensus;
  CesaroFit gradient;
};

/// Plateau and running-average slope of a nonnegative (already squared)
/// metric series, term k at position k-1.
inline CesaroFit cesaro_fit(std::span<const double> squared) {
  require(squared.size() >= 50, ErrorKind::parameter,
          "Cesaro analysis needs at least 50 samples, got " + std::to_string(squared.size()));
  const std::size_t total = squared.size();
  std::vector<double> partial(total);
  double running = 0.0;
  for (std::size_t i = 0; i < total; ++i) partial[i] = running += squared[i];

  CesaroFit fit;
  const double s_final = partial[total - 1];
  const double s_half = partial[total / 2 - 1];
  fit.partial_sums_bounded = s_final == 0.0 || (s_final - s_half) < 0.05 * s_final;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t used = 0;
  for (std::size_t i = total / 2; i < total; ++i) {
    const double k = static_cast<double>(i + 1);
    if (partial[i] <= 0.0) continue;
    const double lx = std::log(k);
    const double ly = std::log(partial[i] / k);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++used;
  }
  if (used < 2) {
    fit.loglog_slope = -std::numeric_limits<double>::infinity();
    return fit;
  }
  const double nu = static_cast<double>(used);
  fit.loglog_slope = (nu * sxy - sx * sy) / (nu * sxx - sx * sx);
  return fit;
}

inline CesaroReport cesaro_rates(std::span<const MetricSample> series) {
  std::vector<double> consensus, gradient;
  consensus.reserve(series.size());
  gradient.reserve(series.size());
  for (const MetricSample& s : series) {
    consensus.push_back(s.consensus_error * s.consensus_error);
    gradient.push_back(s.avg_grad_norm * s.avg_grad_norm);
  }
  return {cesaro_fit(consensus), cesaro_fit(gradient)};
}

}  // namespace extra_lab
