#include "magp/nlp.hpp"

#include "magp/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace magp::nlp {

namespace {

struct Evaluation {
  double f = 0.0;
  Vector gf;
  Vector c;  // constraint values; the ball row (if any) comes last
  Matrix J;
};

class LocalSolver {
 public:
  LocalSolver(const NLPProblem& problem, const SolverOptions& options)
      : problem_(problem), options_(options), n_(problem.dimension()) {
    nc_ = static_cast<Eigen::Index>(problem.constraints.size()) + (problem.ball ? 1 : 0);
  }

  Evaluation evaluate(const Vector& x, bool with_gradients) const {
    Evaluation ev;
    ev.c.resize(nc_);
    Vector grad(n_);
    if (with_gradients) {
      ev.gf.resize(n_);
      ev.J.resize(nc_, n_);
      ev.f = problem_.objective(x, &ev.gf);
    } else {
      ev.f = problem_.objective(x, nullptr);
    }
    for (std::size_t i = 0; i < problem_.constraints.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      if (with_gradients) {
        ev.c(row) = problem_.constraints[i](x, &grad);
        ev.J.row(row) = grad.transpose();
      } else {
        ev.c(row) = problem_.constraints[i](x, nullptr);
      }
    }
    if (problem_.ball) {
      // (‖x−c‖² − r²)/(2r): unit slope at the sphere.
      const Vector diff = x - problem_.ball->center;
      const double r = problem_.ball->radius;
      ev.c(nc_ - 1) = (diff.squaredNorm() - r * r) / (2.0 * r);
      if (with_gradients) ev.J.row(nc_ - 1) = (diff / r).transpose();
    }
    return ev;
  }

  static double violation_sum(const Vector& c) { return c.cwiseMax(0.0).sum(); }

  double merit(const Evaluation& ev, double penalty) const {
    return ev.f + penalty * violation_sum(ev.c);
  }

  LocalResult run(const Vector& x0) {
    LocalResult out;
    Vector x = project_to_domain(problem_, x0);
    Evaluation ev = evaluate(x, true);
    if (!std::isfinite(ev.f) || !ev.gf.allFinite()) throw OracleError("nlp: non-finite objective at start");
    Matrix B = Matrix::Identity(n_, n_);
    double penalty = 1.0;
    bool just_reset = false;
    int it = 0;
    for (; it < options_.max_iterations; ++it) {
      Vector d;
      Vector lambda;
      if (!subproblem(x, ev, B, d, lambda)) break;

      const double lam_max = lambda.size() > 0 ? lambda.maxCoeff() : 0.0;
      if (penalty < 1.1 * lam_max) penalty = 1.5 * lam_max + 1e-8;

      const double step_norm = d.lpNorm<Eigen::Infinity>();
      const double viol = ev.c.size() > 0 ? std::max(0.0, ev.c.maxCoeff()) : 0.0;
      if (step_norm <= options_.step_tolerance * (1.0 + x.lpNorm<Eigen::Infinity>())) {
        out.converged = viol <= options_.feasibility_tolerance;
        break;
      }

      const double phi0 = merit(ev, penalty);
      Vector linearized = ev.c;
      if (nc_ > 0) linearized += ev.J * d;
      const double directional =
          ev.gf.dot(d) + penalty * (violation_sum(linearized) - violation_sum(ev.c));
      if (!(directional < 0.0)) {
        if (viol <= options_.feasibility_tolerance && step_norm < 1e-7) {
          out.converged = true;
          break;
        }
        if (just_reset) break;
        B.setIdentity();
        just_reset = true;
        continue;
      }

      double alpha = 1.0;
      Vector x_trial;
      Evaluation trial;
      bool accepted = false;
      while (alpha > 1e-12) {
        x_trial = x + alpha * d;
        trial = evaluate(x_trial, false);
        if (std::isfinite(trial.f) && trial.c.allFinite() &&
            merit(trial, penalty) <= phi0 + 1e-4 * alpha * directional) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        if (just_reset) break;
        B.setIdentity();
        just_reset = true;
        continue;
      }
      just_reset = false;

      Evaluation next = evaluate(x_trial, true);
      if (!std::isfinite(next.f) || !next.gf.allFinite()) break;
      const Vector s = x_trial - x;
      Vector grad_l_old = ev.gf;
      Vector grad_l_new = next.gf;
      if (nc_ > 0) {
        grad_l_old += ev.J.transpose() * lambda;
        grad_l_new += next.J.transpose() * lambda;
      }
      bfgs_update(B, s, grad_l_new - grad_l_old);

      const double phi_new = merit(next, penalty);
      x = x_trial;
      ev = std::move(next);
      const double viol_new = ev.c.size() > 0 ? std::max(0.0, ev.c.maxCoeff()) : 0.0;
      if (s.lpNorm<Eigen::Infinity>() <= options_.step_tolerance * (1.0 + x.lpNorm<Eigen::Infinity>()) &&
          viol_new <= options_.feasibility_tolerance) {
        out.converged = true;
        ++it;
        break;
      }
      if (std::abs(phi0 - phi_new) <= 1e-15 * (1.0 + std::abs(phi0)) &&
          viol_new <= options_.feasibility_tolerance) {
        out.converged = true;
        ++it;
        break;
      }
    }
    out.x = project_to_domain(problem_, x);
    Evaluation final_ev = evaluate(out.x, false);
    out.objective = final_ev.f;
    out.violation = max_violation(problem_, out.x);
    out.iterations = it;
    return out;
  }

 private:
  // QP in the step d. Returns false when no usable step could be computed.
  bool subproblem(const Vector& x, const Evaluation& ev, const Matrix& B, Vector& d,
                  Vector& lambda) const {
    const Eigen::Index rows = nc_ + 2 * n_;
    Matrix A = Matrix::Zero(rows, n_);
    Vector b(rows);
    if (nc_ > 0) {
      A.topRows(nc_) = ev.J;
      b.head(nc_) = -ev.c;
    }
    A.block(nc_, 0, n_, n_) = Matrix::Identity(n_, n_);
    b.segment(nc_, n_) = problem_.upper - x;
    A.block(nc_ + n_, 0, n_, n_) = -Matrix::Identity(n_, n_);
    b.segment(nc_ + n_, n_) = x - problem_.lower;

    qp::QPResult qp = qp::solve_dense(B, ev.gf, A, b);
    if (qp.status == qp::QPStatus::optimal) {
      d = qp.x;
      lambda = qp.multipliers.head(nc_);
      return d.allFinite();
    }
    if (nc_ == 0) return false;

    // Elastic mode: a shared slack t ≥ 0 relaxes every nonlinear row.
    const Eigen::Index m = n_ + 1;
    Matrix H = Matrix::Identity(m, m);
    H.topLeftCorner(n_, n_) = B;
    Vector g(m);
    const double weight = 1e3 * (1.0 + ev.gf.lpNorm<Eigen::Infinity>());
    g.head(n_) = ev.gf;
    g(n_) = weight;
    Matrix Ae = Matrix::Zero(rows + 1, m);
    Vector be(rows + 1);
    Ae.topLeftCorner(rows, n_) = A;
    Ae.block(0, n_, nc_, 1).setConstant(-1.0);
    be.head(rows) = b;
    Ae(rows, n_) = -1.0;
    be(rows) = 0.0;
    qp = qp::solve_dense(H, g, Ae, be);
    if (qp.status != qp::QPStatus::optimal) return false;
    d = qp.x.head(n_);
    lambda = qp.multipliers.head(nc_);
    return d.allFinite();
  }

  static void bfgs_update(Matrix& B, const Vector& s, Vector y) {
    const Vector Bs = B * s;
    const double sBs = s.dot(Bs);
    if (!(sBs > 1e-300)) return;
    double sy = s.dot(y);
    if (sy < 0.2 * sBs) {
      const double theta = 0.8 * sBs / (sBs - sy);
      y = theta * y + (1.0 - theta) * Bs;
      sy = s.dot(y);
    }
    if (!(sy > 1e-300)) return;
    B += (y * y.transpose()) / sy - (Bs * Bs.transpose()) / sBs;
    B = 0.5 * (B + B.transpose());
  }

  const NLPProblem& problem_;
  SolverOptions options_;
  Eigen::Index n_;
  Eigen::Index nc_;
};

}  // namespace

const char* to_string(NLPStatus status) {
  switch (status) {
    case NLPStatus::success: return "success";
    case NLPStatus::infeasible: return "infeasible";
    case NLPStatus::all_starts_failed: return "all_starts_failed";
  }
  return "unknown";
}

SmoothFunction finite_difference(std::function<double(const Vector&)> f, double step) {
  return [f = std::move(f), step](const Vector& x, Vector* gradient) {
    const double value = f(x);
    if (gradient != nullptr) {
      gradient->resize(x.size());
      Vector probe = x;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe(i) = x(i) + step;
        const double up = f(probe);
        probe(i) = x(i) - step;
        const double down = f(probe);
        probe(i) = x(i);
        (*gradient)(i) = (up - down) / (2.0 * step);
      }
    }
    return value;
  };
}

void NLPProblem::validate() const {
  require(static_cast<bool>(objective), "nlp: objective missing");
  require(lower.size() == upper.size() && lower.size() > 0, "nlp: box dimension mismatch");
  require((lower.array() <= upper.array()).all(), "nlp: lower bound exceeds upper bound");
  for (const auto& c : constraints) require(static_cast<bool>(c), "nlp: empty constraint callable");
  if (ball) {
    require(ball->center.size() == lower.size(), "nlp: ball center dimension mismatch");
    require(ball->radius > 0.0, "nlp: ball radius must be positive");
  }
}

Vector project_to_domain(const NLPProblem& problem, const Vector& x) {
  Vector y = x.cwiseMax(problem.lower).cwiseMin(problem.upper);
  if (problem.ball) {
    const Vector diff = y - problem.ball->center;
    const double dist = diff.norm();
    if (dist > problem.ball->radius) {
      y = problem.ball->center + diff * (problem.ball->radius / dist);
      y = y.cwiseMax(problem.lower).cwiseMin(problem.upper);
    }
  }
  return y;
}

double max_violation(const NLPProblem& problem, const Vector& x) {
  double worst = 0.0;
  for (const auto& c : problem.constraints) worst = std::max(worst, c(x, nullptr));
  return worst;
}

std::vector<Vector> sample_starts(const NLPProblem& problem, int count, Rng& rng) {
  const Eigen::Index n = problem.dimension();
  std::vector<Vector> points;
  points.reserve(static_cast<std::size_t>(std::max(count, 0)));
  auto uniform_in = [&](const Vector& lo, const Vector& hi) {
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = lo(i) + uniform01(rng) * (hi(i) - lo(i));
    return x;
  };
  for (int s = 0; s < count; ++s) {
    if (!problem.ball) {
      points.push_back(uniform_in(problem.lower, problem.upper));
      continue;
    }
    const Vector& c = problem.ball->center;
    const double r = problem.ball->radius;
    const Vector lo = problem.lower.array().max(c.array() - r).matrix();
    const Vector hi = problem.upper.array().min(c.array() + r).matrix();
    bool found = false;
    if ((lo.array() <= hi.array()).all()) {
      for (int proposal = 0; proposal < 1000; ++proposal) {
        Vector x = uniform_in(lo, hi);
        if ((x - c).norm() <= r) {
          points.push_back(std::move(x));
          found = true;
          break;
        }
      }
    }
    if (!found) points.push_back(project_to_domain(problem, uniform_in(problem.lower, problem.upper)));
  }
  return points;
}

LocalResult minimize_local(const NLPProblem& problem, const Vector& x0, const SolverOptions& options) {
  problem.validate();
  require(x0.size() == problem.dimension(), "nlp: start point dimension mismatch");
  LocalSolver solver(problem, options);
  return solver.run(x0);
}

NLPResult solve(const NLPProblem& problem, int starts, std::uint64_t seed, const SolverOptions& options) {
  problem.validate();
  require(starts >= 1, "nlp: at least one start is required");
  Rng rng(seed);
  std::vector<Vector> points;
  if (problem.ball) points.push_back(project_to_domain(problem, problem.ball->center));
  for (auto& p : sample_starts(problem, starts, rng)) points.push_back(std::move(p));

  NLPResult result;
  result.starts_attempted = static_cast<int>(points.size());
  bool any_ran = false;
  bool any_feasible = false;
  double best_violation = std::numeric_limits<double>::infinity();
  LocalSolver solver(problem, options);
  for (const auto& start : points) {
    LocalResult local;
    try {
      local = solver.run(start);
    } catch (const std::exception&) {
      continue;
    }
    if (!std::isfinite(local.objective) || !local.x.allFinite()) continue;
    any_ran = true;
    const bool feasible = local.violation <= options.feasibility_tolerance;
    if (feasible && (!any_feasible || local.objective < result.objective_value)) {
      any_feasible = true;
      result.minimizer = local.x;
      result.objective_value = local.objective;
      result.max_constraint_violation = local.violation;
    } else if (!any_feasible && local.violation < best_violation) {
      best_violation = local.violation;
      result.minimizer = local.x;
      result.objective_value = local.objective;
      result.max_constraint_violation = local.violation;
    }
  }
  if (any_feasible) {
    result.status = NLPStatus::success;
    return result;
  }
  if (!any_ran) {
    result.status = NLPStatus::all_starts_failed;
    return result;
  }

  NLPResult feasible = find_feasible(problem, starts, derive_seed(seed, 0xfea5), options);
  feasible.starts_attempted += result.starts_attempted;
  if (feasible.status != NLPStatus::success) return feasible;
  try {
    const LocalResult polished = solver.run(feasible.minimizer);
    if (std::isfinite(polished.objective) && polished.violation <= options.feasibility_tolerance) {
      feasible.minimizer = polished.x;
      feasible.objective_value = polished.objective;
      feasible.max_constraint_violation = polished.violation;
    }
  } catch (const std::exception&) {
  }
  return feasible;
}

NLPResult find_feasible(const NLPProblem& problem, int starts, std::uint64_t seed,
                        const SolverOptions& options) {
  problem.validate();
  require(starts >= 1, "nlp: at least one start is required");
  Rng rng(seed);
  std::vector<Vector> points;
  if (problem.ball) points.push_back(project_to_domain(problem, problem.ball->center));
  for (auto& p : sample_starts(problem, starts, rng)) points.push_back(std::move(p));

  NLPResult result;
  result.starts_attempted = static_cast<int>(points.size());
  auto finish = [&](const Vector& x) {
    result.minimizer = x;
    result.max_constraint_violation = max_violation(problem, x);
    result.objective_value = problem.objective(x, nullptr);
    result.status = result.max_constraint_violation <= options.feasibility_tolerance ? NLPStatus::success
                                                                                       : NLPStatus::infeasible;
  };
  if (problem.constraints.empty()) {
    finish(points.front());
    return result;
  }

  double start_violation = 0.0;
  for (const auto& p : points) start_violation = std::max(start_violation, max_violation(problem, p));
  for (const auto& p : points) {
    if (max_violation(problem, p) <= options.feasibility_tolerance) {
      finish(p);
      return result;
    }
  }

  // Epigraph form over (x, s): min s  s.t.  gᵢ(x) − s ≤ 0, 0 ≤ s ≤ s_max.
  const Eigen::Index n = problem.dimension();
  NLPProblem aug;
  aug.lower.resize(n + 1);
  aug.upper.resize(n + 1);
  aug.lower << problem.lower, 0.0;
  aug.upper << problem.upper, 10.0 * start_violation + 1.0;
  aug.objective = [n](const Vector& z, Vector* g) {
    if (g) {
      g->setZero(n + 1);
      (*g)(n) = 1.0;
    }
    return z(n);
  };
  for (const auto& c : problem.constraints) {
    aug.constraints.push_back([c, n](const Vector& z, Vector* g) {
      Vector gx;
      const double v = c(z.head(n), g ? &gx : nullptr);
      if (g) {
        g->resize(n + 1);
        g->head(n) = gx;
        (*g)(n) = -1.0;
      }
      return v - z(n);
    });
  }
  if (problem.ball) {
    const Ball ball = *problem.ball;
    aug.constraints.push_back([ball, n](const Vector& z, Vector* g) {
      const Vector diff = z.head(n) - ball.center;
      if (g) {
        g->setZero(n + 1);
        g->head(n) = diff / ball.radius;
      }
      return (diff.squaredNorm() - ball.radius * ball.radius) / (2.0 * ball.radius);
    });
  }

  Vector best_x = points.front();
  double best = std::numeric_limits<double>::infinity();
  LocalSolver solver(aug, options);
  for (const auto& p : points) {
    Vector z(n + 1);
    z << p, max_violation(problem, p) + 1e-3;
    Vector x;
    try {
      x = project_to_domain(problem, solver.run(z).x.head(n));
    } catch (const std::exception&) {
      continue;
    }
    const double v = max_violation(problem, x);
    if (v < best) {
      best = v;
      best_x = x;
    }
    if (best <= options.feasibility_tolerance) break;
  }
  finish(best_x);
  return result;
}

}  // namespace magp::nlp
