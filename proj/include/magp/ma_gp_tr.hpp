#ifndef MAGP_MA_GP_TR_HPP
#define MAGP_MA_GP_TR_HPP

#include "magp/acquisition.hpp"
#include "magp/gp.hpp"
#include "magp/nlp.hpp"
#include "magp/plants.hpp"

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace magp::rto {

struct TrustRegionParams {
  double eta1 = 0.2;
  double eta2 = 0.8;
  double gamma_red = 0.8;
  double gamma_inc = 1.2;
  double delta0 = 0.2;
  double delta_max = 0.7;
  double criticality_mu = std::numeric_limits<double>::infinity();
  double infeasible_shrink = 0.8;

  /// Throws ConfigError when an ordering constraint is violated.
  void validate() const;
};

struct TrustRegionState {
  Vector center;  // scaled
  double radius = 0.0;
  int iteration = 0;
};

/// Affine map between the input box and the unit box.
class Scaling {
 public:
  Scaling() = default;
  Scaling(Vector lower, Vector upper);

  Vector to_unit(const Vector& u) const;
  Vector from_unit(const Vector& x) const;
  /// du/dx, i.e. upper − lower.
  const Vector& span() const { return span_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Eigen::Index dimension() const { return lower_.size(); }

 private:
  Vector lower_;
  Vector upper_;
  Vector span_;
};

enum class Retention { keep_all, most_recent, nearest_neighbors };

const char* to_string(Retention retention);
Retention retention_from_string(const std::string& name);

struct RetentionPolicy {
  Retention kind = Retention::keep_all;
  int capacity = 0;  // most_recent / nearest_neighbors only
};

/// Scaled inputs with the measured plant values and nominal-model values at
/// each of them; the mismatch of function i is plant(:,i) − nominal(:,i).
/// Every point is kept; the retention policy selects the training subset.
class MismatchDataset {
 public:
  MismatchDataset(Eigen::Index n_u, Eigen::Index n_functions, RetentionPolicy retention = {},
                  double duplicate_radius = 1e-4);

  /// Returns false (and stores nothing) when `x` lies within the duplicate
  /// radius of a stored point.
  bool append(const Vector& x, const Vector& plant, const Vector& nominal);

  Eigen::Index size() const { return inputs_.rows(); }
  Eigen::Index n_functions() const { return plant_.cols(); }
  const Matrix& inputs() const { return inputs_; }
  const Matrix& plant() const { return plant_; }
  const Matrix& nominal() const { return nominal_; }
  Vector mismatch(Eigen::Index function) const;

  /// Indices of the training subset under the retention policy.
  std::vector<Eigen::Index> retained(const Vector& center) const;

  const RetentionPolicy& retention() const { return retention_; }
  double duplicate_radius() const { return duplicate_radius_; }

 private:
  Matrix inputs_;
  Matrix plant_;
  Matrix nominal_;
  RetentionPolicy retention_;
  double duplicate_radius_;
};

struct SurrogateOptions {
  gp::KernelKind kernel = gp::KernelKind::squared_exponential;
  /// Fix each GP's noise level to the plant's true measurement noise.
  bool noise_known = false;
  int fit_starts = 10;
};

/// One GP per function, fitted to the retained mismatch data.
struct Surrogates {
  std::vector<gp::GPModel> models;
  std::vector<Eigen::Index> training_rows;
};

struct ProblemBinding {
  std::shared_ptr<plants::PlantOracle> plant;
  std::shared_ptr<const plants::NominalModel> nominal;
  std::vector<int> unrelaxable;  // indices in 1..n_g
  acquisition::AcquisitionSpec acquisition;
  Scaling scaling;

  Eigen::Index n_u() const { return scaling.dimension(); }
  Eigen::Index n_g() const { return plant->plant().info().n_g(); }
  void validate() const;
};

struct RTOOptions {
  TrustRegionParams trust_region;
  SurrogateOptions surrogates;
  RetentionPolicy retention;
  double duplicate_radius = 1e-4;
  int subproblem_starts = 20;
  nlp::SolverOptions solver;
};

/// Nominal function values and Jacobian (w.r.t. scaled inputs) at scaled x.
struct NominalEvaluation {
  Vector values;
  Matrix jacobian;
};
NominalEvaluation evaluate_nominal(const plants::NominalModel& nominal, const Scaling& scaling,
                                   const Vector& x);

/// Modified function i = nominal_i + μ_i at scaled x, with its gradient.
struct ModifiedValue {
  double value = 0.0;
  Vector gradient;
  double std = 0.0;  // GP predictive std (cost function only)
  Vector std_gradient;
};

Surrogates fit_surrogates(const MismatchDataset& data, const Vector& center, const SurrogateOptions& options,
                          const Vector& noise_std, const Surrogates* previous, std::uint64_t seed);

/// Radius after the optional criticality check: shrunk once by γ_red when
/// Δ > μ‖∇_red(G₀ + μ_δG₀)(x)‖, where the reduced gradient is the projection
/// onto the nullspace of the active modified-constraint gradients.
struct CriticalityResult {
  double radius = 0.0;
  bool triggered = false;
  double reduced_gradient_norm = 0.0;
};
CriticalityResult criticality_step(const TrustRegionState& state, const TrustRegionParams& params,
                                   const Vector& cost_gradient, const std::vector<Vector>& active_gradients);

/// Projection ZZᵀg of the gradient onto the nullspace of the active
/// gradients, Z an orthonormal basis from QR (zero when they span the whole
/// space).
Vector reduced_gradient(const Vector& gradient, const std::vector<Vector>& active_gradients);

constexpr double active_tolerance = 1e-6;

/// ρ = (plant_prev − plant_new) / (model_prev − model_new), or 0 when the
/// predicted reduction is below 1e-12 in magnitude.
double merit_ratio(double plant_cost_prev, double plant_cost_new, double model_cost_prev,
                   double model_cost_new, bool* degenerate = nullptr);

enum class Decision { expand, accept, shrink };

enum class RejectReason { none, low_merit, model_infeasible, plant_infeasible };
const char* to_string(RejectReason reason);

/// Radius update for a feasible trial step.
double radius_update(const TrustRegionParams& params, double radius, double rho, double step_norm,
                     Decision* decision = nullptr);

struct Transition {
  double radius = 0.0;
  bool accepted = false;
  RejectReason reason = RejectReason::none;
};
/// Backtracking on an infeasible subproblem or plant
/// measurement, otherwise the merit-based update. `rho` is ignored on the
/// infeasible branches. The returned radius never exceeds delta_max.
Transition trust_region_transition(const TrustRegionParams& params, double radius, bool model_feasible,
                                   bool plant_feasible, double rho, double step_norm);

struct SubproblemResult {
  nlp::NLPStatus status = nlp::NLPStatus::all_starts_failed;
  Vector step;        // scaled
  Vector trial;       // scaled, x + step
  double acquisition_value = 0.0;
  double incumbent = 0.0;
  double modified_cost_center = 0.0;
  double modified_cost_trial = 0.0;
  double max_violation = 0.0;
};

SubproblemResult solve_subproblem(const TrustRegionState& state, const Surrogates& surrogates,
                                  const MismatchDataset& data, const ProblemBinding& binding,
                                  const RTOOptions& options, std::uint64_t seed);


struct IterationRecord {
  int k = 0;
  Vector center;              // uᵏ, unscaled
  double radius = 0.0;        // Δᵏ at the start of the iteration
  double radius_used = 0.0;   // after the criticality check
  double radius_next = 0.0;
  bool criticality_triggered = false;
  Vector step;                // dᵏ⁺¹, scaled
  Vector trial;               // uᵏ + dᵏ⁺¹, unscaled
  std::optional<double> rho;
  bool accepted = false;
  RejectReason reason = RejectReason::none;
  Vector measured;            // noisy plant values at the trial point
  Vector truth_trial;         // noiseless plant values at the trial point
  Vector truth_center;        // noiseless plant values at uᵏ
  double acquisition_value = 0.0;
  double incumbent = 0.0;
  nlp::NLPStatus subproblem_status = nlp::NLPStatus::success;
  bool appended = false;
  std::vector<gp::GPHyperparameters> hyperparameters;  // used in this iteration's subproblem
};

struct RTORunRecord {
  std::uint64_t seed = 0;
  Matrix initial_design;    // unscaled, one row per point
  Matrix initial_measured;  // noisy plant values, one row per point
  std::vector<IterationRecord> iterations;
  Vector final_center;      // unscaled
  double final_radius = 0.0;
  Vector final_truth;       // noiseless plant values at the final center
  int plant_evaluations = 0;
  bool aborted = false;
  std::string abort_reason;
  std::vector<gp::GPHyperparameters> final_hyperparameters;
};

/// Center plus ±Δ⁰/2 perturbations along every scaled axis, clipped to the
/// unit box; returned in unscaled units.
Matrix default_initial_design(const Vector& center, const Scaling& scaling, double delta0);

/// Mutable state of one RTO run between iterations.
struct RunState {
  TrustRegionState tr;
  MismatchDataset data;
  Surrogates surrogates;
  double center_cost = 0.0;  // measured plant cost stored for the current center
  std::uint64_t seed = 0;
};

/// One full iteration; mutates `run` and returns the audit entry.
IterationRecord rto_step(RunState& run, const ProblemBinding& binding, const RTOOptions& options);

/// Measures the design, fits the initial GPs and runs `budget` iterations.
/// The first design row is the initial center. Throws ConfigError when that
/// center violates an unrelaxable plant constraint (checked noiselessly).
RTORunRecord run(const ProblemBinding& binding, const RTOOptions& options, const Matrix& initial_design,
                 int budget, std::uint64_t seed);

// ------------------------------------------------------ classical MA filter

struct Modifiers {
  Vector epsilon;  // zeroth order, one per function
  Matrix lambda;   // first order, (n_g + 1) × n_u
};

/// εᵢ ← (1−η)εᵢ + η(Gᵖᵢ − Gᵢ), λᵢ ← (1−η)λᵢ + η(∇Gᵖᵢ − ∇Gᵢ).
Modifiers classical_ma_step(const Modifiers& modifiers, const Vector& plant_values, const Matrix& plant_gradients,
                            const Vector& model_values, const Matrix& model_gradients, double eta);

struct ClassicalMARecord {
  std::vector<Vector> iterates;  // unscaled
  std::vector<Vector> truth;     // noiseless plant values at each iterate
  std::vector<Modifiers> modifiers;
  int plant_evaluations = 0;
};

/// Baseline MA with filtered modifiers and plant gradients from central
/// differences on the noisy oracle (2·n_u extra evaluations per iteration).
ClassicalMARecord run_classical_ma(plants::PlantOracle& plant, const plants::NominalModel& nominal,
                                   const Vector& u0, int iterations, double eta, double fd_step,
                                   std::uint64_t seed);

}  // namespace magp::rto

#endif  // MAGP_MA_GP_TR_HPP
