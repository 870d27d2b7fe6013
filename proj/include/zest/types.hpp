#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace zest {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Lagged state handed to drift and variance functions. One element for the
/// diffusion model, q elements (X_{i-1}, ..., X_{i-q}) for the series model.
using State = std::span<const double>;

enum class ErrorKind {
  InvalidArgument,
  Ellipticity,
  DescriptorMismatch,
  Explosion,
  NonConvergence,
  SingularMatrix,
  GridTooNarrow,
  NonFinite,
  Config,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Ellipticity: return "ellipticity";
    case ErrorKind::DescriptorMismatch: return "descriptor-mismatch";
    case ErrorKind::Explosion: return "explosion";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::SingularMatrix: return "singular-matrix";
    case ErrorKind::GridTooNarrow: return "grid-too-narrow";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// splitmix64 finalizer; used to derive independent per-replication seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(base) ^ a) ^ b);
}

}  // namespace zest
