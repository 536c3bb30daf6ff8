#ifndef MAGP_ACQUISITION_HPP
#define MAGP_ACQUISITION_HPP

#include "magp/gp.hpp"

#include <optional>
#include <string>

namespace magp::acquisition {

enum class Kind { mean_only, lcb, ei };
enum class IncumbentRule { min_observation, min_posterior_mean_at_observed };

const char* to_string(Kind kind);
const char* to_string(IncumbentRule rule);
Kind kind_from_string(const std::string& name);
IncumbentRule incumbent_rule_from_string(const std::string& name);

struct AcquisitionSpec {
  Kind kind = Kind::ei;
  double beta = 2.0;  // LCB only
  /// EI only; when unset the rule follows the cost GP's noise level.
  std::optional<IncumbentRule> incumbent_rule;

  void validate() const;
};

/// Below this predictive standard deviation EI takes its deterministic limit.
inline constexpr double sigma_epsilon = 1e-12;

double normal_pdf(double z);
double normal_cdf(double z);

/// mean − β·std
double lcb(double mean, double std, double beta);

/// Expected improvement for minimization, negated so that smaller is better:
/// −(f_L − μ)Φ(z) − σφ(z) with z = (f_L − μ)/σ.
double ei(double mean, double std, double incumbent);

/// ∂ei/∂μ and ∂ei/∂σ.
struct EIPartials {
  double value;
  double d_mean;
  double d_std;
};
EIPartials ei_with_partials(double mean, double std, double incumbent);

/// Default incumbent rule: smoothed (posterior mean) when the cost GP carries
/// a positive noise level, raw minimum otherwise.
IncumbentRule default_incumbent_rule(const gp::GPModel& cost_gp);

/// Best value f_L among observations. `observed(i)` was measured at row i of
/// `inputs`; with the posterior-mean rule the predictor evaluated there is
/// `offsets(i)` + GP mean (offsets may be empty, meaning zero), which is how a
/// nominal model enters the modified cost.
double incumbent(const Vector& observed, const Matrix& inputs, const gp::GPModel& gp, IncumbentRule rule,
                 const Vector& offsets = Vector());

}  // namespace magp::acquisition

#endif  // MAGP_ACQUISITION_HPP
