#ifndef MAGP_GP_HPP
#define MAGP_GP_HPP

#include "magp/common.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace magp::gp {

enum class KernelKind { squared_exponential, matern_3_2 };

const char* to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

/// Stationary kernel with magnitude σn and one lengthscale ℓᵢ per input;
/// the scaling matrix is Λ = diag(1/ℓᵢ²).
struct KernelSpec {
  KernelKind kind = KernelKind::squared_exponential;
  double magnitude = 1.0;
  Vector lengthscales;

  void validate() const;
};

double kernel_eval(const KernelSpec& spec, const Vector& u, const Vector& v);

/// ∂k(u,v)/∂u.
Vector kernel_gradient(const KernelSpec& spec, const Vector& u, const Vector& v);

struct GPHyperparameters {
  double mean_offset = 0.0;
  KernelSpec kernel;
  double noise_std = 0.0;
  bool noise_fixed = false;
};

/// Kernel matrix could not be factorized, or no likelihood start produced a
/// finite value. Carries the hyperparameters that were last tried.
class FitFailure : public std::runtime_error {
 public:
  FitFailure(const std::string& what, GPHyperparameters hyper)
      : std::runtime_error(what), hyper_(std::move(hyper)) {}
  const GPHyperparameters& hyperparameters() const { return hyper_; }

 private:
  GPHyperparameters hyper_;
};

/// ½ ln|K| + ½ (y − 1c)ᵀ K⁻¹ (y − 1c) with K = k(U,U) + σν² I (+ jitter).
/// Rows of `inputs` are the training points.
double neg_log_marginal_likelihood(const GPHyperparameters& hyper, const Matrix& inputs,
                                   const Vector& targets);

struct FitOptions {
  KernelKind kernel = KernelKind::squared_exponential;
  bool noise_fixed = false;
  double fixed_noise_std = 0.0;
  int starts = 10;
  std::uint64_t seed = 0;
  int max_iterations = 100;
  /// Hyperparameters from the previous fit of the same function.
  std::optional<GPHyperparameters> warm_start;
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct PredictionWithGradient {
  double mean = 0.0;
  double variance = 0.0;
  Vector mean_gradient;
  Vector variance_gradient;
};

/// Trained GP surrogate; immutable once built.
class GPModel {
 public:
  /// Factorizes the kernel matrix for fixed hyperparameters.
  static GPModel condition(GPHyperparameters hyper, Matrix inputs, Vector targets);

  Prediction posterior(const Vector& u) const;
  Vector posterior_mean_gradient(const Vector& u) const;
  PredictionWithGradient posterior_with_gradients(const Vector& u) const;

  const GPHyperparameters& hyperparameters() const { return hyper_; }
  const Matrix& inputs() const { return inputs_; }
  const Vector& targets() const { return targets_; }
  const Vector& alpha() const { return alpha_; }
  double jitter() const { return jitter_; }
  Eigen::Index dimension() const { return inputs_.cols(); }
  Eigen::Index size() const { return inputs_.rows(); }

 private:
  GPModel() = default;
  Vector cross_covariance(const Vector& u) const;

  GPHyperparameters hyper_;
  Matrix inputs_;
  Vector targets_;
  Matrix factor_;  // lower Cholesky factor of K(U) + jitter
  Vector alpha_;   // K⁻¹ (y − 1c)
  double jitter_ = 0.0;
};

/// Maximum-likelihood fit over (σn, σν, ℓ) in log space with the constant
/// mean profiled out; multistart from the warm start plus Latin-hypercube
/// points in the bounded log box.
GPModel fit(const Matrix& inputs, const Vector& targets, const FitOptions& options);

}  // namespace magp::gp

#endif  // MAGP_GP_HPP
