#ifndef MAGP_TESTS_PROPERTY_CHECKS_HPP
#define MAGP_TESTS_PROPERTY_CHECKS_HPP

#include <string>

namespace magp::checks {

struct CheckResult {
  bool ok = false;
  std::string detail;
};

// Each check is self-contained and seeded.
CheckResult gp_noiseless_interpolation();
CheckResult gp_variance_bounds();
CheckResult gp_mean_gradient_fd();
CheckResult acquisition_bounds();
CheckResult trust_region_transitions();
CheckResult rk4_order();
CheckResult full_linearity_decay();

}  // namespace magp::checks

#endif  // MAGP_TESTS_PROPERTY_CHECKS_HPP
