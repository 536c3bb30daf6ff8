#include "property_checks.hpp"

#include "doctest.h"

using namespace magp::checks;

namespace {

void expect(const CheckResult& r) {
  INFO(r.detail);
  CHECK(r.ok);
}

}  // namespace

TEST_SUITE("properties") {

TEST_CASE("gp noiseless interpolation") { expect(gp_noiseless_interpolation()); }
TEST_CASE("gp variance bounds") { expect(gp_variance_bounds()); }
TEST_CASE("gp mean gradient") { expect(gp_mean_gradient_fd()); }
TEST_CASE("acquisition bounds") { expect(acquisition_bounds()); }
TEST_CASE("trust-region transitions") { expect(trust_region_transitions()); }
TEST_CASE("rk4 order") { expect(rk4_order()); }
TEST_CASE("full-linearity decay") { expect(full_linearity_decay()); }

}
