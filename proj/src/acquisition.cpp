#include "magp/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace magp::acquisition {

const char* to_string(Kind kind) {
  switch (kind) {
    case Kind::mean_only: return "none";
    case Kind::lcb: return "lcb";
    case Kind::ei: return "ei";
  }
  return "unknown";
}

const char* to_string(IncumbentRule rule) {
  return rule == IncumbentRule::min_observation ? "min_observation" : "min_posterior_mean_at_observed";
}

Kind kind_from_string(const std::string& name) {
  if (name == "none" || name == "mean_only" || name == "mean") return Kind::mean_only;
  if (name == "lcb") return Kind::lcb;
  if (name == "ei") return Kind::ei;
  throw ContractViolation("unknown acquisition kind '" + name + "'");
}

IncumbentRule incumbent_rule_from_string(const std::string& name) {
  if (name == "min_observation") return IncumbentRule::min_observation;
  if (name == "min_posterior_mean_at_observed") return IncumbentRule::min_posterior_mean_at_observed;
  throw ContractViolation("unknown incumbent rule '" + name + "'");
}

void AcquisitionSpec::validate() const {
  require(beta >= 0.0 && std::isfinite(beta), "acquisition: beta must be nonnegative");
}

double normal_pdf(double z) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

double normal_cdf(double z) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  return 0.5 * std::erfc(-z * inv_sqrt2);
}

double lcb(double mean, double std, double beta) { return mean - beta * std; }

EIPartials ei_with_partials(double mean, double std, double incumbent) {
  const double gap = incumbent - mean;
  if (std <= sigma_epsilon) return {-std::max(gap, 0.0), gap > 0.0 ? 1.0 : 0.0, 0.0};
  const double z = gap / std;
  const double cdf = normal_cdf(z);
  const double pdf = normal_pdf(z);
  return {std::min(0.0, -gap * cdf - std * pdf), cdf, -pdf};
}

double ei(double mean, double std, double incumbent) { return ei_with_partials(mean, std, incumbent).value; }

IncumbentRule default_incumbent_rule(const gp::GPModel& cost_gp) {
  return cost_gp.hyperparameters().noise_std > 0.0 ? IncumbentRule::min_posterior_mean_at_observed
                                                   : IncumbentRule::min_observation;
}

double incumbent(const Vector& observed, const Matrix& inputs, const gp::GPModel& gp, IncumbentRule rule,
                 const Vector& offsets) {
  require(observed.size() >= 1, "incumbent: no observations");
  if (rule == IncumbentRule::min_observation) return observed.minCoeff();
  require(inputs.rows() == observed.size(), "incumbent: inputs/observations size mismatch");
  require(offsets.size() == 0 || offsets.size() == observed.size(), "incumbent: offsets size mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const double offset = offsets.size() > 0 ? offsets(i) : 0.0;
    best = std::min(best, offset + gp.posterior(inputs.row(i).transpose()).mean);
  }
  return best;
}

}  // namespace magp::acquisition
