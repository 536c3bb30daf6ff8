#include "magp/harness.hpp"
#include "magp/plants.hpp"

#include "doctest.h"

#include <cmath>

using namespace magp;
using namespace magp::plants;

namespace {

// Central-difference Jacobian with a relative step.
Matrix fd_jacobian(const ProcessFunctions& f, const Vector& u) {
  const Vector g0 = f.evaluate(u);
  Matrix J(g0.size(), u.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(u(j)));
    Vector a = u, b = u;
    a(j) += h;
    b(j) -= h;
    J.col(j) = (f.evaluate(a) - f.evaluate(b)) / (2.0 * h);
  }
  return J;
}

double max_rel(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_SUITE("plants") {

TEST_CASE("quadratic plant and nominal values") {
  const auto plant = quadratic_plant();
  const auto nominal = quadratic_nominal();
  const Vector z = plant->evaluate(Vector::Zero(2));
  CHECK(z(0) == 0.0);
  CHECK(z(1) == 1.0);
  const Vector g = plant->evaluate((Vector(2) << 0.368, -0.393).finished());
  CHECK(g(0) == doctest::Approx(0.145).epsilon(0.005 / 0.145));
  CHECK(std::abs(g(1)) <= 2e-3);
  const Vector n = nominal->evaluate(Vector::Ones(2));
  CHECK(n(0) == 2.0);
  CHECK(n(1) == 1.0);
  CHECK(plant->noise_std()(0) == doctest::Approx(std::sqrt(1e-3)));
}

TEST_CASE("quadratic jacobian") {
  const auto plant = quadratic_plant();
  const Vector u = (Vector(2) << 0.7, -0.2).finished();
  Matrix J;
  plant->evaluate(u, &J);
  CHECK(max_rel(J, fd_jacobian(*plant, u)) <= 1e-7);
}

TEST_CASE("williams-otto steady states close the mass balance") {
  const auto& c = WilliamsOttoConstants::defaults();
  for (auto kin : {WilliamsOttoKinetics::three_reaction_plant, WilliamsOttoKinetics::two_reaction_model}) {
    for (double fb : {4.0, 5.3, 7.0}) {
      for (double tr : {70.0, 85.0, 100.0}) {
        const WilliamsOttoSteadyState s = williams_otto_steady_state(kin, fb, tr, c);
        CHECK(s.mass_fractions.sum() == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(s.residual.cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(s.mass_fractions.minCoeff() >= 0.0);
        if (kin == WilliamsOttoKinetics::two_reaction_model) CHECK(s.mass_fractions(2) == 0.0);
      }
    }
  }
}

TEST_CASE("williams-otto jacobians") {
  const auto plant = williams_otto_plant();
  const auto nominal = williams_otto_nominal();
  const Vector u = (Vector(2) << 4.8, 82.0).finished();
  Matrix J;
  plant->evaluate(u, &J);
  CHECK(max_rel(J, fd_jacobian(*plant, u)) <= 1e-6);
  nominal->evaluate(u, &J);
  CHECK(max_rel(J, fd_jacobian(*nominal, u)) <= 1e-6);
}

TEST_CASE("williams-otto plant optimum is reproducible") {
  const CaseStudy cs = make_case_study("williams-otto");
  const nlp::NLPResult a = harness::plant_optimum(cs, 20, 1);
  const nlp::NLPResult b = harness::plant_optimum(cs, 20, 2);
  REQUIRE(a.status == nlp::NLPStatus::success);
  CHECK(a.objective_value == doctest::Approx(b.objective_value).epsilon(1e-6));
  // Both constraints active at the optimum.
  const Vector g = cs.plant->evaluate(a.minimizer);
  CHECK(std::abs(g(1)) <= 1e-5);
  CHECK(std::abs(g(2)) <= 1e-5);
}

TEST_CASE("photobioreactor without growth integrates the feed exactly") {
  PhotobioreactorConstants c = PhotobioreactorConstants::defaults();
  c.u_m = c.k_m = c.u_d = c.k_d = 0.0;
  Vector u(12);
  u.head(6).setConstant(200.0);
  u.tail(6).setConstant(10.0);
  const auto controls = ControlParameterization::from_inputs(u, 6);
  const auto states = pbr_simulate(controls, PbrKinetics::plant, c);
  REQUIRE(states.size() == 7);
  CHECK(states.back().nitrate == doctest::Approx(150.0 + 2400.0).epsilon(1e-12));
  CHECK(states.back().biomass == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(states.back().product == 0.0);
  const Vector g = pbr_functions_from_states(states);
  CHECK(g.size() == 14);
  CHECK(g(12) > 0.0);  // C_N(T) ≤ 800 violated at the last stage
  CHECK(g(13) == doctest::Approx(2400.0).epsilon(1e-12));
}

TEST_CASE("photobioreactor agrees with a fine integration") {
  const auto& c = PhotobioreactorConstants::defaults();
  Vector u(12);
  u << 300, 250, 200, 180, 160, 150, 20, 10, 5, 15, 0, 0;
  const auto controls = ControlParameterization::from_inputs(u, 6);
  for (auto kin : {PbrKinetics::plant, PbrKinetics::nominal}) {
    const auto coarse = pbr_simulate(controls, kin, c, 25);
    const auto fine = pbr_simulate(controls, kin, c, 1000);
    // Error relative to each state's peak, since nitrate is driven to near zero.
    double peak[3] = {0.0, 0.0, 0.0}, err[3] = {0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < coarse.size(); ++j) {
      const double a[3] = {coarse[j].biomass, coarse[j].nitrate, coarse[j].product};
      const double b[3] = {fine[j].biomass, fine[j].nitrate, fine[j].product};
      for (int s = 0; s < 3; ++s) {
        peak[s] = std::max(peak[s], std::abs(b[s]));
        err[s] = std::max(err[s], std::abs(a[s] - b[s]));
      }
    }
    for (int s = 0; s < 3; ++s) CHECK(err[s] <= 1e-5 * peak[s]);
  }
}

TEST_CASE("photobioreactor without feed keeps the terminal nitrate low") {
  const PhotobioreactorFunctions plant(PbrKinetics::plant, 6, PhotobioreactorConstants::defaults());
  Vector u(12);
  u.head(6).setConstant(120.0);
  u.tail(6).setZero();
  const Vector g = plant.evaluate(u);
  CHECK(g(13) < 0.0);
}

TEST_CASE("photobioreactor layout") {
  const CaseStudy cs = make_case_study("pbr");
  CHECK(cs.plant->info().n_u() == 12);
  CHECK(cs.plant->info().n_g() == 13);
  CHECK(cs.unrelaxable.size() == 13);
  CHECK(cs.kernel == gp::KernelKind::matern_3_2);
  CHECK(cs.plant->info().function_names.size() == 14);
  const CaseStudy small = make_case_study("pbr", {3});
  CHECK(small.plant->info().n_u() == 6);
  CHECK(small.plant->info().n_g() == 7);
}

TEST_CASE("photobioreactor jacobians") {
  const PhotobioreactorFunctions plant(PbrKinetics::plant, 3, PhotobioreactorConstants::defaults());
  const PhotobioreactorNominal nominal(3, PhotobioreactorConstants::defaults());
  Vector u(6);
  u << 350, 220, 170, 25, 12, 30;
  Matrix J;
  plant.evaluate(u, &J);
  CHECK(max_rel(J, fd_jacobian(plant, u)) <= 1e-6);
  nominal.evaluate(u, &J);
  CHECK(max_rel(J, fd_jacobian(nominal, u)) <= 1e-6);
}

TEST_CASE("photobioreactor noise enters through the states") {
  const PhotobioreactorFunctions plant(PbrKinetics::plant, 3, PhotobioreactorConstants::defaults());
  Vector u(6);
  u << 400, 400, 400, 20, 20, 20;
  const Vector truth = plant.evaluate(u);
  Rng rng(12);
  Vector mean = Vector::Zero(truth.size());
  Vector sq = Vector::Zero(truth.size());
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const Vector d = plant.measure(u, rng) - truth;
    mean += d;
    sq += d.cwiseProduct(d);
  }
  mean /= n;
  const Vector sd = (sq / n).cwiseSqrt();
  const Vector expected = plant.noise_std();
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    CHECK(std::abs(mean(i)) <= 5.0 * expected(i) / std::sqrt(double(n)));
    CHECK(sd(i) == doctest::Approx(expected(i)).epsilon(0.06));
  }
}

TEST_CASE("oracle counts evaluations and reproduces its noise stream") {
  PlantOracle a(quadratic_plant(), 5);
  PlantOracle b(quadratic_plant(), 5);
  const Vector u = Vector::Constant(2, 0.3);
  const Vector ma = a.measure(u);
  CHECK(ma == b.measure(u));
  a.measure(u);
  CHECK(a.evaluations() == 2);
  CHECK(a.truth(u) == quadratic_plant()->evaluate(u));
  CHECK(a.evaluations() == 2);
}

TEST_CASE("zero model") {
  const ZeroModel z(quadratic_plant()->info());
  Matrix J;
  CHECK(z.evaluate(Vector::Ones(2), &J).isZero());
  CHECK(J.rows() == 2);
  CHECK(J.isZero());
  CHECK(z.is_zero());
}

TEST_CASE("constants parser") {
  const auto m = parse_constants("# header\n a = 1.5  # note\n\nb=2e-3\n");
  CHECK(m.size() == 2);
  CHECK(m.at("a") == 1.5);
  CHECK(m.at("b") == 2e-3);
  CHECK_THROWS(WilliamsOttoConstants::from_text("feed_rate_A = 1\n"));
}

TEST_CASE("unknown case study") {
  CHECK_THROWS_AS(make_case_study("distillation"), ConfigError);
}

}
