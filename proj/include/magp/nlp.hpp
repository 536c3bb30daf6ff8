#ifndef MAGP_NLP_HPP
#define MAGP_NLP_HPP

#include "magp/common.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace magp::nlp {

/// Smooth scalar function. When `gradient` is non-null the callee must fill
/// it with the analytic gradient at `x`.
using SmoothFunction = std::function<double(const Vector& x, Vector* gradient)>;

/// Wraps a value-only function with central finite differences.
SmoothFunction finite_difference(std::function<double(const Vector&)> f, double step = 1e-6);

struct Ball {
  Vector center;
  double radius = 0.0;
};

/// min objective(x)  s.t.  constraints[i](x) ≤ 0,  lower ≤ x ≤ upper,
/// and ‖x − ball.center‖₂ ≤ ball.radius when a ball is present.
struct NLPProblem {
  SmoothFunction objective;
  std::vector<SmoothFunction> constraints;
  Vector lower;
  Vector upper;
  std::optional<Ball> ball;
  /// Set by callers that supplied finite-difference gradients; surfaced in
  /// run records.
  bool finite_difference_gradients = false;

  Eigen::Index dimension() const { return lower.size(); }
  void validate() const;
};

enum class NLPStatus { success, infeasible, all_starts_failed };

const char* to_string(NLPStatus status);

struct NLPResult {
  Vector minimizer;
  double objective_value = 0.0;
  NLPStatus status = NLPStatus::all_starts_failed;
  double max_constraint_violation = 0.0;
  int starts_attempted = 0;
};

struct SolverOptions {
  double feasibility_tolerance = 1e-6;
  int max_iterations = 150;
  double step_tolerance = 1e-10;
};

struct LocalResult {
  Vector x;
  double objective = 0.0;
  double violation = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Clip to the box, then pull radially toward the ball center. The center is
/// assumed to lie in the box, so the result lies in box ∩ ball.
Vector project_to_domain(const NLPProblem& problem, const Vector& x);

/// Largest positive part among constraint values (ball and box excluded).
double max_violation(const NLPProblem& problem, const Vector& x);

/// Uniform rejection sampling in box ∩ ball (1000 proposals per point, then
/// projection of a box sample onto the ball).
std::vector<Vector> sample_starts(const NLPProblem& problem, int count, Rng& rng);

/// SQP with damped-BFGS Hessian, dense dual active-set QP subproblems
/// (elastic mode when the linearization is inconsistent) and an ℓ₁ merit
/// line search.
LocalResult minimize_local(const NLPProblem& problem, const Vector& x0,
                           const SolverOptions& options = {});

/// Multistart local minimization: the ball center (if any) plus `starts`
/// sampled points. Falls back to find_feasible when no start ends feasible.
NLPResult solve(const NLPProblem& problem, int starts, std::uint64_t seed,
                const SolverOptions& options = {});

/// Minimizes max(0, maxᵢ gᵢ(x)) over box ∩ ball.
NLPResult find_feasible(const NLPProblem& problem, int starts, std::uint64_t seed,
                        const SolverOptions& options = {});

}  // namespace magp::nlp

#endif  // MAGP_NLP_HPP
