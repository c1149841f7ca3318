#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "extra_lab/error.hpp"
#include "extra_lab/linalg.hpp"
#include "extra_lab/rng.hpp"

namespace extra_lab {

/// A point of (R^n)^m: block i (length n, contiguous) is agent i's copy.
class StackedPoint {
 public:
  StackedPoint() = default;
  StackedPoint(std::size_t agents, std::size_t dim) : data_(Vector::Zero(agents * dim)), m_(agents), n_(dim) {}
  StackedPoint(std::size_t agents, std::size_t dim, Vector data) : data_(std::move(data)), m_(agents), n_(dim) {
    require(static_cast<std::size_t>(data_.size()) == m_ * n_, ErrorKind::shape,
            "stacked point of length " + std::to_string(data_.size()) + " does not match m*n = " +
                std::to_string(m_ * n_));
  }

  /// Every agent holds the same copy x.
  static StackedPoint consensual(std::size_t agents, const Vector& x) {
    return StackedPoint(agents, static_cast<std::size_t>(x.size()), x.replicate(static_cast<Eigen::Index>(agents), 1));
  }

  std::size_t agents() const { return m_; }
  std::size_t dim() const { return n_; }
  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  auto block(std::size_t i) const { return data_.segment(static_cast<Eigen::Index>(i * n_), static_cast<Eigen::Index>(n_)); }
  auto block(std::size_t i) { return data_.segment(static_cast<Eigen::Index>(i * n_), static_cast<Eigen::Index>(n_)); }

  /// Column i of the n x m view is block i.
  Eigen::Map<const Matrix> as_columns() const {
    return {data_.data(), static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(m_)};
  }
  Eigen::Map<Matrix> as_columns() { return {data_.data(), static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(m_)}; }

  Vector average() const { return as_columns().rowwise().mean(); }

 private:
  Vector data_;
  std::size_t m_ = 0;
  std::size_t n_ = 0;
};

/// One agent's smooth local function f_i : R^n -> R.
class LocalObjective {
 public:
  virtual ~LocalObjective() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual Matrix hessian(const Vector& x) const = 0;
  /// Bound on the gradient's Lipschitz constant over the ball of the given
  /// radius around the origin. Globally Lipschitz objectives ignore radius.
  virtual double lipschitz(double radius) const = 0;
};

/// f(x) = 1/2 x^T A x + b^T x + c, A symmetric.
class QuadraticObjective final : public LocalObjective {
 public:
  QuadraticObjective(Matrix a, Vector b, double c = 0.0) : a_(std::move(a)), b_(std::move(b)), c_(c) {
    detail::require_square(a_, "quadratic matrix A");
    require(a_.rows() == b_.size(), ErrorKind::shape, "quadratic A and b disagree on dimension");
    require((a_ - a_.transpose()).cwiseAbs().maxCoeff() <= 1e-12, ErrorKind::symmetry, "quadratic A must be symmetric");
  }

  std::size_t dim() const override { return static_cast<std::size_t>(b_.size()); }
  double value(const Vector& x) const override { return 0.5 * x.dot(a_ * x) + b_.dot(x) + c_; }
  Vector gradient(const Vector& x) const override { return a_ * x + b_; }
  Matrix hessian(const Vector&) const override { return a_; }
  double lipschitz(double) const override { return symmetric_norm(a_); }

  const Matrix& A() const { return a_; }
  const Vector& b() const { return b_; }

 private:
  Matrix a_;
  Vector b_;
  double c_;
};

namespace detail {

// ln(1 + e^t) without overflow.
inline double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

inline double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Spectral norm of [[a, b], [b, d]].
inline double sym2_norm(double a, double b, double d) {
  const double mid = 0.5 * (a + d);
  const double rad = std::hypot(0.5 * (a - d), b);
  return std::max(std::abs(mid + rad), std::abs(mid - rad));
}

}  // namespace detail

/// Scalar bilinear logistic loss of one sample, coordinates (x, X):
///   L(x, X) = (1/m) ln(1 + exp(-zeta x X xi)) + eta/(2m) (x^2 + X^2).
/// Only the product c = zeta * xi enters the loss.
class BilinearLogisticObjective final : public LocalObjective {
 public:
  BilinearLogisticObjective(double label, double feature, double eta, std::size_t agents)
      : label_(label), feature_(feature), eta_(eta), inv_m_(1.0 / static_cast<double>(agents)) {
    require(eta > 0.0, ErrorKind::parameter, "bilinear logistic needs eta > 0 (coercivity), got " + std::to_string(eta));
    require(label == 1.0 || label == -1.0, ErrorKind::parameter, "labels must be +1 or -1");
  }

  std::size_t dim() const override { return 2; }

  double value(const Vector& p) const override {
    const double s = coupling() * p(0) * p(1);
    return inv_m_ * detail::softplus(-s) + 0.5 * eta_ * inv_m_ * p.squaredNorm();
  }

  Vector gradient(const Vector& p) const override {
    const double c = coupling();
    const double outer = -detail::sigmoid(-c * p(0) * p(1));  // d/ds ln(1 + e^-s)
    Vector g(2);
    g(0) = inv_m_ * (outer * c * p(1) + eta_ * p(0));
    g(1) = inv_m_ * (outer * c * p(0) + eta_ * p(1));
    return g;
  }

  Matrix hessian(const Vector& p) const override {
    Matrix h(2, 2);
    const auto [uu, uv, vv] = hessian_entries(p(0), p(1));
    h << uu, uv, uv, vv;
    return h;
  }

  /// 1.5 x the largest Hessian norm sampled on a polar grid over the ball:
  /// rings at absolute spacing kRingSpacing and kAngles directions. Ring
  /// radii do not depend on the ball radius, so samples are nested and the
  /// estimate is nondecreasing in radius.
  double lipschitz(double radius) const override {
    double worst = 0.0;
    const auto rings = static_cast<std::size_t>(std::floor(radius / kRingSpacing + 1e-9));
    for (std::size_t ring = 0; ring <= rings; ++ring) {
      const double r = static_cast<double>(ring) * kRingSpacing;
      for (int a = 0; a < kAngles; ++a) {
        const double phi = 2.0 * std::numbers::pi * a / kAngles;
        const auto [uu, uv, vv] = hessian_entries(r * std::cos(phi), r * std::sin(phi));
        worst = std::max(worst, detail::sym2_norm(uu, uv, vv));
        if (ring == 0) break;
      }
    }
    return kInflation * worst;
  }

  double label() const { return label_; }
  double feature() const { return feature_; }
  double coupling() const { return label_ * feature_; }

  static constexpr double kRingSpacing = 0.01;
  static constexpr int kAngles = 128;
  static constexpr double kInflation = 1.5;

 private:
  struct Entries {
    double uu, uv, vv;
  };

  Entries hessian_entries(double u, double v) const {
    const double c = coupling();
    const double s = c * u * v;
    const double outer = -detail::sigmoid(-s);
    const double curvature = detail::sigmoid(s) * detail::sigmoid(-s);
    return {inv_m_ * (curvature * c * c * v * v + eta_), inv_m_ * (curvature * c * c * u * v + outer * c),
            inv_m_ * (curvature * c * c * u * u + eta_)};
  }

  double label_;
  double feature_;
  double eta_;
  double inv_m_;
};

/// Identical-copy nonconvex objective with a strict saddle at the origin:
///   f(x) = (1/m) (x_1^4 / 4 - x_1^2 / 2 + sum_{j>=2} x_j^2 / 2),
/// minimizers at x_1 = +-1, rest 0.
class IdenticalQuarticObjective final : public LocalObjective {
 public:
  IdenticalQuarticObjective(std::size_t dim, std::size_t agents)
      : n_(dim), inv_m_(1.0 / static_cast<double>(agents)) {
    require(dim >= 1, ErrorKind::parameter, "identical quartic needs dimension >= 1");
  }

  std::size_t dim() const override { return n_; }

  double value(const Vector& x) const override {
    const double x1 = x(0);
    return inv_m_ * (0.25 * x1 * x1 * x1 * x1 - 0.5 * x1 * x1 + 0.5 * x.tail(n_ - 1).squaredNorm());
  }

  Vector gradient(const Vector& x) const override {
    Vector g = inv_m_ * x;
    g(0) = inv_m_ * (x(0) * x(0) * x(0) - x(0));
    return g;
  }

  Matrix hessian(const Vector& x) const override {
    Matrix h = inv_m_ * Matrix::Identity(n_, n_);
    h(0, 0) = inv_m_ * (3.0 * x(0) * x(0) - 1.0);
    return h;
  }

  // Exact supremum of the Hessian norm over the ball.
  double lipschitz(double radius) const override { return inv_m_ * std::max(1.0, 3.0 * radius * radius - 1.0); }

 private:
  std::size_t n_;
  double inv_m_;
};

struct BilinearLogisticData {
  std::vector<double> labels;    // zeta^(i) in {-1, +1}
  std::vector<double> features;  // xi^(i)
  double eta = 0.0;
  std::uint64_t seed = 0;
};

/// m local objectives sharing a dimension n. Immutable; evaluation is pure.
class ObjectiveSet {
 public:
  ObjectiveSet(std::string kind, std::vector<std::shared_ptr<const LocalObjective>> locals)
      : kind_(std::move(kind)), locals_(std::move(locals)) {
    require(!locals_.empty(), ErrorKind::invalid_size, "objective set needs at least one agent");
    n_ = locals_.front()->dim();
    for (const auto& f : locals_)
      require(f->dim() == n_, ErrorKind::shape, "all local objectives must share one dimension");
  }

  const std::string& kind() const { return kind_; }
  std::size_t agents() const { return locals_.size(); }
  std::size_t dim() const { return n_; }
  const LocalObjective& local(std::size_t i) const { return *locals_.at(i); }

  void set_dataset(BilinearLogisticData data) { dataset_ = std::move(data); }
  const std::optional<BilinearLogisticData>& dataset() const { return dataset_; }

  void check_shape(const StackedPoint& x) const {
    require(x.agents() == agents() && x.dim() == n_, ErrorKind::shape,
            "stacked point is " + std::to_string(x.agents()) + "x" + std::to_string(x.dim()) +
                " but the objective set is " + std::to_string(agents()) + "x" + std::to_string(n_));
  }

  /// Sum of the local objectives at one common point (the global f).
  double aggregate_value(const Vector& x) const {
    double total = 0.0;
    for (const auto& f : locals_) total += f->value(x);
    return total;
  }
  Vector aggregate_gradient(const Vector& x) const {
    Vector g = Vector::Zero(n_);
    for (const auto& f : locals_) g += f->gradient(x);
    return g;
  }
  Matrix aggregate_hessian(const Vector& x) const {
    Matrix h = Matrix::Zero(n_, n_);
    for (const auto& f : locals_) h += f->hessian(x);
    return h;
  }

 private:
  std::string kind_;
  std::vector<std::shared_ptr<const LocalObjective>> locals_;
  std::size_t n_ = 0;
  std::optional<BilinearLogisticData> dataset_;
};

/// F(x) = sum_i f_i(x_i).
inline double stacked_value(const ObjectiveSet& obj, const StackedPoint& x) {
  obj.check_shape(x);
  double total = 0.0;
  for (std::size_t i = 0; i < obj.agents(); ++i) total += obj.local(i).value(x.block(i));
  return total;
}

inline StackedPoint stacked_gradient(const ObjectiveSet& obj, const StackedPoint& x) {
  obj.check_shape(x);
  StackedPoint g(obj.agents(), obj.dim());
  for (std::size_t i = 0; i < obj.agents(); ++i) g.block(i) = obj.local(i).gradient(x.block(i));
  return g;
}

/// Block-diagonal mn x mn Hessian of F.
inline Matrix stacked_hessian(const ObjectiveSet& obj, const StackedPoint& x) {
  obj.check_shape(x);
  const auto n = static_cast<Eigen::Index>(obj.dim());
  const auto m = static_cast<Eigen::Index>(obj.agents());
  Matrix h = Matrix::Zero(m * n, m * n);
  for (Eigen::Index i = 0; i < m; ++i)
    h.block(i * n, i * n, n, n) = obj.local(static_cast<std::size_t>(i)).hessian(x.block(static_cast<std::size_t>(i)));
  return h;
}

/// L_F = max_i L_{f_i}.
inline double lipschitz_bound(const ObjectiveSet& obj, double radius) {
  require(radius > 0.0, ErrorKind::parameter, "Lipschitz radius must be positive, got " + std::to_string(radius));
  double worst = 0.0;
  for (std::size_t i = 0; i < obj.agents(); ++i) worst = std::max(worst, obj.local(i).lipschitz(radius));
  return worst;
}

/// Agent i draws (zeta, xi) from substream i of the dataset seed:
/// zeta = +-1 from one 32-bit word, xi ~ N(zeta, 1) by Box-Muller.
inline ObjectiveSet generate_bilinear_logistic(std::size_t m, double eta, std::uint64_t seed) {
  require(m >= 1, ErrorKind::invalid_size, "bilinear logistic needs m >= 1");
  require(eta > 0.0, ErrorKind::parameter, "bilinear logistic needs eta > 0 (coercivity), got " + std::to_string(eta));
  BilinearLogisticData data;
  data.eta = eta;
  data.seed = seed;
  std::vector<std::shared_ptr<const LocalObjective>> locals;
  for (std::size_t i = 0; i < m; ++i) {
    PhiloxStream stream(seed, static_cast<std::uint32_t>(i), RngDomain::dataset);
    const double label = stream.sign();
    const double feature = stream.gaussian(label, 1.0);
    data.labels.push_back(label);
    data.features.push_back(feature);
    locals.push_back(std::make_shared<BilinearLogisticObjective>(label, feature, eta, m));
  }
  ObjectiveSet set("bilinear_logistic", std::move(locals));
  set.set_dataset(std::move(data));
  return set;
}

inline ObjectiveSet make_quadratics(std::vector<Matrix> a, std::vector<Vector> b, std::vector<double> c = {}) {
  require(a.size() == b.size(), ErrorKind::shape, "quadratic objective needs one b per A");
  require(c.empty() || c.size() == a.size(), ErrorKind::shape, "quadratic objective needs one constant per A");
  std::vector<std::shared_ptr<const LocalObjective>> locals;
  for (std::size_t i = 0; i < a.size(); ++i)
    locals.push_back(std::make_shared<QuadraticObjective>(std::move(a[i]), std::move(b[i]), c.empty() ? 0.0 : c[i]));
  return ObjectiveSet("quadratic", std::move(locals));
}

/// Random symmetric quadratics: A_i = G G^T / n + shift I (shift may make
/// A_i indefinite), b_i ~ N(0, 1). Agent i uses substream i.
inline ObjectiveSet random_quadratics(std::size_t m, std::size_t n, std::uint64_t seed, double shift = 0.1) {
  std::vector<Matrix> a;
  std::vector<Vector> b;
  for (std::size_t i = 0; i < m; ++i) {
    PhiloxStream stream(seed, static_cast<std::uint32_t>(i), RngDomain::dataset);
    Matrix g(n, n);
    for (Eigen::Index c = 0; c < g.cols(); ++c)
      for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = stream.gaussian();
    Matrix ai = g * g.transpose() / static_cast<double>(n) + shift * Matrix::Identity(n, n);
    ai = 0.5 * (ai + ai.transpose());
    Vector bi(n);
    for (Eigen::Index r = 0; r < bi.size(); ++r) bi(r) = stream.gaussian();
    a.push_back(std::move(ai));
    b.push_back(std::move(bi));
  }
  return make_quadratics(std::move(a), std::move(b));
}

inline ObjectiveSet make_identical_quartic(std::size_t m, std::size_t n) {
  require(m >= 1, ErrorKind::invalid_size, "identical quartic needs m >= 1");
  auto shared = std::make_shared<const IdenticalQuarticObjective>(n, m);
  return ObjectiveSet("identical_quartic", std::vector<std::shared_ptr<const LocalObjective>>(m, shared));
}

}  // namespace extra_lab
