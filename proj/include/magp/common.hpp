#ifndef MAGP_COMMON_HPP
#define MAGP_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace magp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Raised when a caller violates a documented precondition (dimension
/// mismatch, empty data, out-of-range parameter).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration could not be validated (bad TR parameters, infeasible
/// initial center, unknown plant name, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulated plant or nominal model failed to produce a value (Newton
/// divergence, negative concentrations, ...).
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

/// Derive an independent 64-bit seed from a base seed and a tag sequence
/// (splitmix64 mixing), so sub-streams never share state.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0x2545f4914f6cdd1dULL));
}

/// Standard normal draw via Box-Muller on the raw engine output, so the
/// sequence is identical across standard-library implementations.
inline double standard_normal(Rng& rng) {
  constexpr double two_pi = 6.283185307179586476925;
  auto unit = [&rng]() { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  const double a = unit();
  const double b = unit();
  return std::sqrt(-2.0 * std::log(a)) * std::cos(two_pi * b);
}

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace magp

#endif  // MAGP_COMMON_HPP
