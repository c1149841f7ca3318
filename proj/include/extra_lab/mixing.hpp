#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "extra_lab/error.hpp"
#include "extra_lab/graph.hpp"
#include "extra_lab/linalg.hpp"

namespace extra_lab {

namespace tol {
inline constexpr double symmetry = 1e-12;
inline constexpr double row_sum = 1e-12;
inline constexpr double unit_eigenvalue = 1e-9;
inline constexpr double consensus_alignment = 1e-6;
}  // namespace tol

struct SpectralFacts {
  Vector w_eigenvalues;  // descending
  double lambda1_P = 0.0;
  double lambda_min_V = 0.0;
};

/// Validated (W, V = theta I + (1-theta) W) pair over a fixed graph. Only
/// make_mixing_pair constructs one, so every instance satisfies the
/// mixing-matrix conditions and lambda_1(P) < 1.
class MixingPair {
 public:
  const Matrix& W() const { return w_; }
  const Matrix& V() const { return v_; }
  double theta() const { return theta_; }
  std::size_t agents() const { return static_cast<std::size_t>(w_.rows()); }
  const SpectralFacts& spectral() const { return spectral_; }

 private:
  friend MixingPair make_mixing_pair(const Matrix& W, double theta, const NetworkGraph& g);
  MixingPair() = default;

  Matrix w_;
  Matrix v_;
  double theta_ = 0.0;
  SpectralFacts spectral_;
};

/// Metropolis rule: W_ij = 1 / (1 + max(deg_i, deg_j)) on edges, diagonal
/// fills the row to 1.
inline Matrix metropolis_weights(const NetworkGraph& g) {
  require(is_connected(g), ErrorKind::connectivity, "Metropolis weights need a connected graph");
  const std::size_t m = g.agents();
  Matrix w = Matrix::Zero(m, m);
  for (const auto& [i, j] : g.edges()) {
    const double weight = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(i), g.degree(j))));
    w(i, j) = weight;
    w(j, i) = weight;
  }
  for (std::size_t i = 0; i < m; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return w;
}

/// beta I + (1 - beta) W.
inline Matrix lazify(const Matrix& W, double beta) {
  require(beta >= 0.0 && beta < 1.0, ErrorKind::parameter,
          "lazify beta must lie in [0, 1), got " + std::to_string(beta));
  detail::require_square(W, "W");
  if (beta == 0.0) return W;
  return beta * Matrix::Identity(W.rows(), W.cols()) + (1.0 - beta) * W;
}

/// The 2m x 2m matrix [[W - J, I], [W - V, I - J]] with J = (1/m) 1 1^T.
inline Matrix build_P(const Matrix& W, const Matrix& V) {
  const Eigen::Index m = W.rows();
  const Matrix averaging = Matrix::Constant(m, m, 1.0 / static_cast<double>(m));
  const Matrix identity = Matrix::Identity(m, m);
  Matrix p(2 * m, 2 * m);
  p.topLeftCorner(m, m) = W - averaging;
  p.topRightCorner(m, m) = identity;
  p.bottomLeftCorner(m, m) = W - V;
  p.bottomRightCorner(m, m) = identity - averaging;
  return p;
}

inline Matrix build_P(const MixingPair& pair) { return build_P(pair.W(), pair.V()); }

inline MixingPair make_mixing_pair(const Matrix& W, double theta, const NetworkGraph& g) {
  require(theta > 0.0 && theta <= 0.5, ErrorKind::parameter,
          "theta must lie in (0, 1/2], got " + std::to_string(theta));
  detail::require_square(W, "W");
  detail::require_finite(W, "W");
  const std::size_t m = g.agents();
  require(static_cast<std::size_t>(W.rows()) == m, ErrorKind::shape,
          "W is " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()) + " but the graph has " +
              std::to_string(m) + " agents");

  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      require(std::abs(W(i, j) - W(j, i)) <= tol::symmetry, ErrorKind::symmetry,
              "W(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") != W(" + std::to_string(j + 1) +
                  "," + std::to_string(i + 1) + ")");
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      require(i == j || W(i, j) == 0.0 || g.has_edge(i, j), ErrorKind::sparsity,
              "W(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") is nonzero on a non-edge");

  for (std::size_t i = 0; i < m; ++i)
    require(std::abs(W.row(i).sum() - 1.0) <= tol::row_sum, ErrorKind::spectral,
            "row " + std::to_string(i + 1) + " of W sums to " + std::to_string(W.row(i).sum()) +
                "; W 1 = 1 is required for null{I - W} = span{1}");

  MixingPair pair;
  pair.w_ = W;
  pair.theta_ = theta;

  // -I < W <= I with null{I - W} = span{1}.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(W);
  require(eig.info() == Eigen::Success, ErrorKind::no_convergence, "symmetric eigensolver failed on W");
  const Vector ascending = eig.eigenvalues();
  const Vector descending = ascending.reverse();
  require(descending(0) <= 1.0 + tol::unit_eigenvalue, ErrorKind::spectral,
          "W has an eigenvalue above 1 (" + std::to_string(descending(0)) + "); W <= I fails");
  require(descending(m - 1) > -1.0 + tol::unit_eigenvalue, ErrorKind::spectral,
          "W has an eigenvalue <= -1 (" + std::to_string(descending(m - 1)) + "); -I < W fails");
  require(std::abs(descending(0) - 1.0) <= tol::unit_eigenvalue, ErrorKind::spectral,
          "largest eigenvalue of W is " + std::to_string(descending(0)) + ", not 1; null{I - W} = span{1} fails");
  require(m == 1 || descending(1) <= 1.0 - tol::unit_eigenvalue, ErrorKind::spectral,
          "eigenvalue 1 of W is repeated; null{I - W} = span{1} fails");
  const Vector top = eig.eigenvectors().col(m - 1);
  const double alignment = std::abs(top.sum()) / std::sqrt(static_cast<double>(m));
  require(alignment > 1.0 - tol::consensus_alignment, ErrorKind::spectral,
          "eigenvector of eigenvalue 1 is not the consensus direction; null{I - W} = span{1} fails");

  pair.v_ = theta * Matrix::Identity(m, m) + (1.0 - theta) * W;
  // V's spectrum is the affine image of W's.
  const double lambda_min_v = theta + (1.0 - theta) * descending(m - 1);
  require(lambda_min_v > 0.0, ErrorKind::positivity,
          "lambda_min(V) = " + std::to_string(lambda_min_v) + " is not positive");

  pair.spectral_.w_eigenvalues = descending;
  pair.spectral_.lambda_min_V = lambda_min_v;
  pair.spectral_.lambda1_P = spectral_radius(build_P(pair.w_, pair.v_));
  require(pair.spectral_.lambda1_P < 1.0, ErrorKind::spectral,
          "lambda_1(P) = " + std::to_string(pair.spectral_.lambda1_P) + " is not below 1");
  return pair;
}

}  // namespace extra_lab
