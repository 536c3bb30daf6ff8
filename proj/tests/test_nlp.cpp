#include "magp/nlp.hpp"
#include "magp/qp.hpp"

#include "doctest.h"

#include <cmath>
#include <limits>

using namespace magp;
using namespace magp::nlp;

namespace {

NLPProblem box(double lo, double hi) {
  NLPProblem p;
  p.lower = Vector::Constant(2, lo);
  p.upper = Vector::Constant(2, hi);
  return p;
}

SmoothFunction sum_of_squares() {
  return [](const Vector& x, Vector* g) {
    if (g) *g = 2.0 * x;
    return x.squaredNorm();
  };
}

// 1 − u₁ + u₂²
SmoothFunction quadratic_model_constraint() {
  return [](const Vector& x, Vector* g) {
    if (g) *g = (Vector(2) << -1.0, 2.0 * x(1)).finished();
    return 1.0 - x(0) + x(1) * x(1);
  };
}

}  // namespace

TEST_SUITE("nlp") {

TEST_CASE("qp with one active row") {
  // min ½‖x‖² s.t. 1 − x₁ ≤ 0: KKT gives x = (1, 0), multiplier 1.
  const Matrix H = Matrix::Identity(2, 2);
  const Vector g = Vector::Zero(2);
  Matrix A(1, 2);
  A << -1.0, 0.0;
  const Vector b = Vector::Constant(1, -1.0);
  const qp::QPResult r = qp::solve_dense(H, g, A, b);
  REQUIRE(r.status == qp::QPStatus::optimal);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(r.x(1)) <= 1e-12);
  CHECK(r.multipliers(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("qp detects inconsistent rows") {
  Matrix A(2, 1);
  A << 1.0, -1.0;
  const Vector b = (Vector(2) << -1.0, -1.0).finished();  // x ≤ −1 and x ≥ 1
  const qp::QPResult r = qp::solve_dense(Matrix::Identity(1, 1), Vector::Zero(1), A, b);
  CHECK(r.status == qp::QPStatus::infeasible);
}

TEST_CASE("qp matches a brute-force active-set enumeration") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix M(3, 3);
    for (int i = 0; i < 9; ++i) M.data()[i] = standard_normal(rng);
    const Matrix H = M * M.transpose() + Matrix::Identity(3, 3);
    Vector g(3);
    for (int i = 0; i < 3; ++i) g(i) = standard_normal(rng);
    Matrix A(4, 3);
    Vector b(4);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 3; ++j) A(i, j) = standard_normal(rng);
      b(i) = 0.5 + uniform01(rng);  // x = 0 is strictly feasible
    }
    // Enumerate every active set, keep the feasible KKT point with λ ≥ 0.
    double best = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < 16; ++mask) {
      std::vector<int> act;
      for (int i = 0; i < 4; ++i)
        if (mask & (1 << i)) act.push_back(i);
      if (act.size() > 3) continue;
      const int m = static_cast<int>(act.size());
      Matrix K = Matrix::Zero(3 + m, 3 + m);
      Vector rhs = Vector::Zero(3 + m);
      K.topLeftCorner(3, 3) = H;
      rhs.head(3) = -g;
      for (int a = 0; a < m; ++a) {
        K.block(0, 3 + a, 3, 1) = A.row(act[a]).transpose();
        K.block(3 + a, 0, 1, 3) = A.row(act[a]);
        rhs(3 + a) = b(act[a]);
      }
      const Vector sol = K.fullPivLu().solve(rhs);
      const Vector x = sol.head(3);
      if ((A * x - b).maxCoeff() > 1e-9 || (m > 0 && sol.tail(m).minCoeff() < -1e-9)) continue;
      best = std::min(best, 0.5 * x.dot(H * x) + g.dot(x));
    }
    const qp::QPResult r = qp::solve_dense(H, g, A, b);
    REQUIRE(r.status == qp::QPStatus::optimal);
    CHECK(0.5 * r.x.dot(H * r.x) + g.dot(r.x) == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("unconstrained bowl") {
  NLPProblem p = box(-1.0, 1.0);
  p.objective = sum_of_squares();
  const NLPResult r = solve(p, 5, 1);
  REQUIRE(r.status == NLPStatus::success);
  CHECK(r.minimizer.norm() <= 1e-6);
  CHECK(std::abs(r.objective_value) <= 1e-6);
}

TEST_CASE("ball-active linear objective") {
  NLPProblem p = box(-1.0, 1.0);
  p.objective = [](const Vector& x, Vector* g) {
    if (g) *g = (Vector(2) << 1.0, 0.0).finished();
    return x(0);
  };
  p.ball = Ball{Vector::Zero(2), 0.5};
  const NLPResult r = solve(p, 5, 2);
  REQUIRE(r.status == NLPStatus::success);
  CHECK(r.minimizer(0) == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(std::abs(r.minimizer(1)) <= 1e-4);
}

TEST_CASE("constrained bowl against a grid oracle") {
  NLPProblem p = box(-2.0, 2.0);
  p.objective = sum_of_squares();
  p.constraints.push_back(quadratic_model_constraint());

  // Dense grid, then two refinements around the best feasible node.
  Vector best(2);
  double best_f = std::numeric_limits<double>::infinity();
  double lo0 = -2.0, lo1 = -2.0, span = 4.0;
  for (int level = 0; level < 3; ++level) {
    const int n = 201;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        const double x0 = lo0 + span * a / (n - 1), x1 = lo1 + span * b / (n - 1);
        if (1.0 - x0 + x1 * x1 > 0.0) continue;
        const double f = x0 * x0 + x1 * x1;
        if (f < best_f) {
          best_f = f;
          best << x0, x1;
        }
      }
    }
    span /= 50.0;
    lo0 = best(0) - span / 2;
    lo1 = best(1) - span / 2;
  }
  CHECK(best(0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(std::abs(best(1)) <= 1e-3);

  const NLPResult r = solve(p, 10, 3);
  REQUIRE(r.status == NLPStatus::success);
  CHECK(r.minimizer(0) == doctest::Approx(best(0)).epsilon(1e-4));
  CHECK(std::abs(r.minimizer(1) - best(1)) <= 1e-3);
  CHECK(r.objective_value == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("infeasible constraint is reported with its violation") {
  NLPProblem p = box(-1.0, 1.0);
  p.objective = sum_of_squares();
  p.constraints.push_back([](const Vector& x, Vector* g) {
    if (g) *g = (Vector(2) << -1.0, 0.0).finished();
    return 3.0 - x(0);
  });
  const NLPResult f = find_feasible(p, 5, 4);
  CHECK(f.status == NLPStatus::infeasible);
  CHECK(f.max_constraint_violation >= 2.0 - 1e-9);
  const NLPResult s = solve(p, 5, 4);
  CHECK(s.status == NLPStatus::infeasible);
  CHECK(s.max_constraint_violation >= 2.0 - 1e-9);
}

TEST_CASE("feasibility search succeeds on a half box") {
  NLPProblem p = box(-1.0, 1.0);
  p.objective = sum_of_squares();
  p.constraints.push_back([](const Vector& x, Vector* g) {
    if (g) *g = (Vector(2) << 1.0, 0.0).finished();
    return x(0);
  });
  const NLPResult r = find_feasible(p, 5, 5);
  REQUIRE(r.status == NLPStatus::success);
  CHECK(r.minimizer(0) <= 1e-8);
}

TEST_CASE("model constraint intersects the ball around the starting point") {
  // Grid oracle: some point of the disc has 1 − u₁ + u₂² ≤ 0.
  bool any = false;
  for (int a = 0; a <= 100 && !any; ++a)
    for (int b = 0; b <= 100 && !any; ++b) {
      const double x0 = 0.5 + 2.0 * a / 100.0, x1 = -1.0 + 2.0 * b / 100.0;
      if (std::hypot(x0 - 1.5, x1) <= 1.0 && 1.0 - x0 + x1 * x1 <= 0.0) any = true;
    }
  REQUIRE(any);

  NLPProblem p = box(-2.0, 2.0);
  p.objective = sum_of_squares();
  p.constraints.push_back(quadratic_model_constraint());
  p.ball = Ball{(Vector(2) << 1.5, 0.0).finished(), 1.0};
  const NLPResult r = find_feasible(p, 5, 6);
  CHECK(r.status == NLPStatus::success);
  CHECK(max_violation(p, r.minimizer) <= 1e-6);
}

TEST_CASE("projection lands in the box and the ball") {
  NLPProblem p = box(0.0, 1.0);
  p.objective = sum_of_squares();
  p.ball = Ball{(Vector(2) << 0.9, 0.9).finished(), 0.2};
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Vector x = (Vector(2) << -1.0 + 3.0 * uniform01(rng), -1.0 + 3.0 * uniform01(rng)).finished();
    const Vector y = project_to_domain(p, x);
    CHECK(y.minCoeff() >= 0.0);
    CHECK(y.maxCoeff() <= 1.0);
    CHECK((y - p.ball->center).norm() <= 0.2 + 1e-12);
  }
  for (const Vector& s : sample_starts(p, 50, rng)) {
    CHECK((s - p.ball->center).norm() <= 0.2 + 1e-12);
    CHECK(s.maxCoeff() <= 1.0);
  }
}

TEST_CASE("finite-difference wrapper") {
  const SmoothFunction f = finite_difference([](const Vector& x) { return std::sin(x(0)) * x(1); });
  Vector g;
  const Vector x = (Vector(2) << 0.3, 2.0).finished();
  f(x, &g);
  CHECK(g(0) == doctest::Approx(std::cos(0.3) * 2.0).epsilon(1e-7));
  CHECK(g(1) == doctest::Approx(std::sin(0.3)).epsilon(1e-7));
}

TEST_CASE("malformed problems are rejected") {
  NLPProblem p = box(1.0, -1.0);
  p.objective = sum_of_squares();
  CHECK_THROWS_AS(p.validate(), ContractViolation);
}

}
