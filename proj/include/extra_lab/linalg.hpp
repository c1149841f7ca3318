#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "extra_lab/error.hpp"

namespace extra_lab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline void require_square(const Matrix& a, const char* what) {
  require(a.rows() == a.cols(), ErrorKind::shape,
          std::string(what) + " must be square, got " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

inline void require_finite(const Matrix& a, const char* what) {
  require(a.allFinite(), ErrorKind::parameter, std::string(what) + " has non-finite entries");
}

}  // namespace detail

/// Largest eigenvalue magnitude of a general real matrix (Hessenberg
/// reduction + shifted QR).
inline double spectral_radius(const Matrix& a) {
  detail::require_square(a, "spectral_radius input");
  detail::require_finite(a, "spectral_radius input");
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  require(solver.info() == Eigen::Success, ErrorKind::no_convergence,
          "nonsymmetric eigensolver did not converge on a " + std::to_string(a.rows()) + "x" +
              std::to_string(a.cols()) + " matrix");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Eigenvalues of a symmetric matrix, sorted descending.
inline Vector symmetric_eigenvalues(const Matrix& a) {
  detail::require_square(a, "symmetric eigensolver input");
  detail::require_finite(a, "symmetric eigensolver input");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
  require(solver.info() == Eigen::Success, ErrorKind::no_convergence, "symmetric eigensolver did not converge");
  return solver.eigenvalues().reverse();
}

inline double lambda_min_symmetric(const Matrix& a) { return symmetric_eigenvalues(a).minCoeff(); }

/// Spectral norm of a symmetric matrix.
inline double symmetric_norm(const Matrix& a) { return symmetric_eigenvalues(a).cwiseAbs().maxCoeff(); }

}  // namespace extra_lab
