#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace extra_lab {

enum class ErrorKind {
  invalid_size,
  invalid_degree,
  handshake_parity,
  connectivity,
  parameter,
  shape,
  symmetry,
  sparsity,
  spectral,
  positivity,
  no_convergence,
  divergence,
  protocol,
  config,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_size: return "invalid-size";
    case ErrorKind::invalid_degree: return "invalid-degree";
    case ErrorKind::handshake_parity: return "handshake-parity";
    case ErrorKind::connectivity: return "connectivity";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::shape: return "shape";
    case ErrorKind::symmetry: return "symmetry";
    case ErrorKind::sparsity: return "sparsity";
    case ErrorKind::spectral: return "spectral";
    case ErrorKind::positivity: return "positivity";
    case ErrorKind::no_convergence: return "no-convergence";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

// Every failure raised by the library is a LabError; callers dispatch on kind().
class LabError : public std::runtime_error {
 public:
  LabError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DivergenceError : public LabError {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : LabError(ErrorKind::divergence, what + " at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw LabError(kind, what); }

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace extra_lab
