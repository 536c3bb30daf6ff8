#include "magp/ma_gp_tr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace magp::rto {

void TrustRegionParams::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("trust region: " + what); };
  if (!(eta1 > 0.0 && eta1 < eta2 && eta2 < 1.0)) fail("need 0 < eta1 < eta2 < 1");
  if (!(gamma_red > 0.0 && gamma_red < 1.0 && gamma_inc > 1.0 && std::isfinite(gamma_inc)))
    fail("need 0 < gamma_red < 1 < gamma_inc");
  if (!(delta0 > 0.0 && delta0 < delta_max && std::isfinite(delta_max))) fail("need 0 < delta0 < delta_max");
  if (!(criticality_mu > 0.0)) fail("criticality_mu must be positive (or infinite)");
  if (!(infeasible_shrink >= gamma_red && infeasible_shrink <= 1.0))
    fail("infeasible_shrink must lie in [gamma_red, 1]");
}

Scaling::Scaling(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  require(lower_.size() == upper_.size() && lower_.size() > 0, "scaling: bound size mismatch");
  require((upper_.array() > lower_.array()).all(), "scaling: every upper bound must exceed its lower bound");
  span_ = upper_ - lower_;
}

Vector Scaling::to_unit(const Vector& u) const {
  require(u.size() == lower_.size(), "scaling: dimension mismatch");
  return ((u - lower_).array() / span_.array()).matrix();
}

Vector Scaling::from_unit(const Vector& x) const {
  require(x.size() == lower_.size(), "scaling: dimension mismatch");
  return lower_ + (x.array() * span_.array()).matrix();
}

const char* to_string(Retention retention) {
  switch (retention) {
    case Retention::keep_all: return "keep_all";
    case Retention::most_recent: return "most_recent";
    case Retention::nearest_neighbors: return "nearest_neighbors";
  }
  return "?";
}

Retention retention_from_string(const std::string& name) {
  if (name == "keep_all") return Retention::keep_all;
  if (name == "most_recent") return Retention::most_recent;
  if (name == "nearest_neighbors") return Retention::nearest_neighbors;
  throw ContractViolation("unknown retention policy '" + name + "'");
}

// ------------------------------------------------------------------ dataset

MismatchDataset::MismatchDataset(Eigen::Index n_u, Eigen::Index n_functions, RetentionPolicy retention,
                                 double duplicate_radius)
    : inputs_(0, n_u), plant_(0, n_functions), nominal_(0, n_functions), retention_(retention),
      duplicate_radius_(duplicate_radius) {
  require(n_u >= 1 && n_functions >= 1, "dataset: empty layout");
  require(duplicate_radius >= 0.0, "dataset: duplicate radius must be nonnegative");
  require(retention.kind == Retention::keep_all || retention.capacity >= 2,
          "dataset: retention capacity must be at least 2");
}

bool MismatchDataset::append(const Vector& x, const Vector& plant, const Vector& nominal) {
  require(x.size() == inputs_.cols(), "dataset: input dimension mismatch");
  require(plant.size() == plant_.cols() && nominal.size() == nominal_.cols(), "dataset: function count mismatch");
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
    if ((inputs_.row(i).transpose() - x).norm() < duplicate_radius_) return false;
  }
  const Eigen::Index n = inputs_.rows();
  inputs_.conservativeResize(n + 1, Eigen::NoChange);
  plant_.conservativeResize(n + 1, Eigen::NoChange);
  nominal_.conservativeResize(n + 1, Eigen::NoChange);
  inputs_.row(n) = x.transpose();
  plant_.row(n) = plant.transpose();
  nominal_.row(n) = nominal.transpose();
  return true;
}

Vector MismatchDataset::mismatch(Eigen::Index function) const { return plant_.col(function) - nominal_.col(function); }

std::vector<Eigen::Index> MismatchDataset::retained(const Vector& center) const {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(size()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  const auto cap = static_cast<std::size_t>(retention_.capacity);
  if (retention_.kind == Retention::keep_all || rows.size() <= cap) return rows;
  if (retention_.kind == Retention::most_recent) {
    return std::vector<Eigen::Index>(rows.end() - static_cast<std::ptrdiff_t>(cap), rows.end());
  }
  std::vector<double> dist(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) dist[i] = (inputs_.row(rows[i]).transpose() - center).norm();
  std::stable_sort(rows.begin(), rows.end(), [&](Eigen::Index a, Eigen::Index b) {
    return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
  });
  rows.resize(cap);
  std::sort(rows.begin(), rows.end());
  return rows;
}

// --------------------------------------------------------------- surrogates

NominalEvaluation evaluate_nominal(const plants::NominalModel& nominal, const Scaling& scaling, const Vector& x) {
  NominalEvaluation out;
  Matrix jac;
  out.values = nominal.evaluate(scaling.from_unit(x), &jac);
  out.jacobian = jac * scaling.span().asDiagonal();
  return out;
}

Surrogates fit_surrogates(const MismatchDataset& data, const Vector& center, const SurrogateOptions& options,
                          const Vector& noise_std, const Surrogates* previous, std::uint64_t seed) {
  Surrogates out;
  out.training_rows = data.retained(center);
  const auto n = static_cast<Eigen::Index>(out.training_rows.size());
  Matrix inputs(n, data.inputs().cols());
  for (Eigen::Index r = 0; r < n; ++r) inputs.row(r) = data.inputs().row(out.training_rows[static_cast<std::size_t>(r)]);
  for (Eigen::Index i = 0; i < data.n_functions(); ++i) {
    const Vector all = data.mismatch(i);
    Vector y(n);
    for (Eigen::Index r = 0; r < n; ++r) y(r) = all(out.training_rows[static_cast<std::size_t>(r)]);
    gp::FitOptions fo;
    fo.kernel = options.kernel;
    fo.noise_fixed = options.noise_known;
    fo.fixed_noise_std = options.noise_known ? noise_std(i) : 0.0;
    fo.starts = options.fit_starts;
    fo.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    if (previous && static_cast<std::size_t>(i) < previous->models.size()) {
      fo.warm_start = previous->models[static_cast<std::size_t>(i)].hyperparameters();
    }
    out.models.push_back(gp::fit(inputs, y, fo));
  }
  return out;
}

namespace {

// Modified functions nominal + GP mean at scaled inputs. The nominal model is
// cached for the most recent point because the objective and every
// constraint are evaluated at the same iterate in turn.
class ModifiedModel {
 public:
  ModifiedModel(const Surrogates& surrogates, const ProblemBinding& binding)
      : surrogates_(surrogates), binding_(binding) {}

  const NominalEvaluation& nominal(const Vector& x) {
    if (!cached_ || x.size() != cache_x_.size() || x != cache_x_) {
      cache_ = evaluate_nominal(*binding_.nominal, binding_.scaling, x);
      cache_x_ = x;
      cached_ = true;
    }
    return cache_;
  }

  double value(Eigen::Index i, const Vector& x, Vector* gradient) {
    const NominalEvaluation& nom = nominal(x);
    const gp::GPModel& model = surrogates_.models[static_cast<std::size_t>(i)];
    if (!gradient) return nom.values(i) + model.posterior(x).mean;
    const gp::PredictionWithGradient p = model.posterior_with_gradients(x);
    *gradient = nom.jacobian.row(i).transpose() + p.mean_gradient;
    return nom.values(i) + p.mean;
  }

  ModifiedValue cost(const Vector& x) {
    const NominalEvaluation& nom = nominal(x);
    const gp::PredictionWithGradient p = surrogates_.models.front().posterior_with_gradients(x);
    ModifiedValue out;
    out.value = nom.values(0) + p.mean;
    out.gradient = nom.jacobian.row(0).transpose() + p.mean_gradient;
    out.std = std::sqrt(std::max(p.variance, 0.0));
    if (out.std > acquisition::sigma_epsilon) {
      out.std_gradient = p.variance_gradient / (2.0 * out.std);
    } else {
      out.std_gradient = Vector::Zero(x.size());
    }
    return out;
  }

 private:
  const Surrogates& surrogates_;
  const ProblemBinding& binding_;
  bool cached_ = false;
  Vector cache_x_;
  NominalEvaluation cache_;
};

double acquisition_value(const acquisition::AcquisitionSpec& spec, const ModifiedValue& m, double incumbent,
                         Vector* gradient) {
  switch (spec.kind) {
    case acquisition::Kind::mean_only:
      if (gradient) *gradient = m.gradient;
      return m.value;
    case acquisition::Kind::lcb:
      if (gradient) *gradient = m.gradient - spec.beta * m.std_gradient;
      return acquisition::lcb(m.value, m.std, spec.beta);
    case acquisition::Kind::ei: {
      const acquisition::EIPartials p = acquisition::ei_with_partials(m.value, m.std, incumbent);
      if (gradient) *gradient = p.d_mean * m.gradient + p.d_std * m.std_gradient;
      return p.value;
    }
  }
  return m.value;
}

// Incumbent over training points whose measured constraints are all
// satisfied; every training point counts when none is.
double compute_incumbent(const Surrogates& surrogates, const MismatchDataset& data,
                         const acquisition::AcquisitionSpec& spec) {
  const gp::GPModel& cost_gp = surrogates.models.front();
  const auto rule = spec.incumbent_rule.value_or(acquisition::default_incumbent_rule(cost_gp));
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r : surrogates.training_rows) {
    const auto cons = data.plant().row(r).tail(data.n_functions() - 1);
    if (cons.size() == 0 || cons.maxCoeff() <= 0.0) rows.push_back(r);
  }
  if (rows.empty()) rows = surrogates.training_rows;
  const auto n = static_cast<Eigen::Index>(rows.size());
  Vector observed(n);
  Vector offsets(n);
  Matrix inputs(n, data.inputs().cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index r = rows[static_cast<std::size_t>(j)];
    observed(j) = data.plant()(r, 0);
    offsets(j) = data.nominal()(r, 0);
    inputs.row(j) = data.inputs().row(r);
  }
  return acquisition::incumbent(observed, inputs, cost_gp, rule, offsets);
}

}  // namespace

Vector reduced_gradient(const Vector& gradient, const std::vector<Vector>& active_gradients) {
  const Eigen::Index n = gradient.size();
  if (active_gradients.empty()) return gradient;
  Matrix a(n, static_cast<Eigen::Index>(active_gradients.size()));
  for (std::size_t j = 0; j < active_gradients.size(); ++j) {
    require(active_gradients[j].size() == n, "reduced gradient: dimension mismatch");
    a.col(static_cast<Eigen::Index>(j)) = active_gradients[j];
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  if (rank >= n) return Vector::Zero(n);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix z = q.rightCols(n - rank);
  return z * (z.transpose() * gradient);
}

CriticalityResult criticality_step(const TrustRegionState& state, const TrustRegionParams& params,
                                   const Vector& cost_gradient, const std::vector<Vector>& active_gradients) {
  CriticalityResult out;
  out.radius = state.radius;
  if (!std::isfinite(params.criticality_mu)) return out;
  const Vector red = reduced_gradient(cost_gradient, active_gradients);
  out.reduced_gradient_norm = red.norm();
  if (state.radius > params.criticality_mu * out.reduced_gradient_norm) {
    out.radius = params.gamma_red * state.radius;
    out.triggered = true;
  }
  return out;
}

double merit_ratio(double plant_cost_prev, double plant_cost_new, double model_cost_prev, double model_cost_new,
                   bool* degenerate) {
  const double predicted = model_cost_prev - model_cost_new;
  const bool tiny = std::abs(predicted) < 1e-12;
  if (degenerate) *degenerate = tiny;
  if (tiny) return 0.0;
  return (plant_cost_prev - plant_cost_new) / predicted;
}

double radius_update(const TrustRegionParams& params, double radius, double rho, double step_norm,
                     Decision* decision) {
  const bool full_step = std::abs(step_norm - radius) <= 1e-6 * radius;
  Decision d = Decision::accept;
  double next = radius;
  if (rho > params.eta2 && full_step) {
    d = Decision::expand;
    next = std::min(params.gamma_inc * radius, params.delta_max);
  } else if (rho < params.eta1) {
    d = Decision::shrink;
    next = params.gamma_red * radius;
  }
  if (decision) *decision = d;
  return next;
}

Transition trust_region_transition(const TrustRegionParams& params, double radius, bool model_feasible,
                                   bool plant_feasible, double rho, double step_norm) {
  Transition t;
  if (!model_feasible || !plant_feasible) {
    t.reason = model_feasible ? RejectReason::plant_infeasible : RejectReason::model_infeasible;
    t.radius = params.infeasible_shrink * radius;
  } else {
    Decision decision;
    t.radius = radius_update(params, radius, rho, step_norm, &decision);
    t.accepted = decision != Decision::shrink;
    if (!t.accepted) t.reason = RejectReason::low_merit;
  }
  t.radius = std::min(t.radius, params.delta_max);
  return t;
}

void ProblemBinding::validate() const {
  require(plant != nullptr && nominal != nullptr, "binding: plant and nominal model are required");
  const auto& pi = plant->plant().info();
  const auto& ni = nominal->info();
  if (pi.n_u() != ni.n_u() || pi.n_g() != ni.n_g()) throw ConfigError("plant and nominal model disagree on layout");
  if (scaling.dimension() != pi.n_u()) throw ConfigError("scaling dimension does not match the plant inputs");
  for (int i : unrelaxable) {
    if (i < 1 || i > pi.n_g()) throw ConfigError("unrelaxable constraint index out of range");
  }
  acquisition.validate();
}

SubproblemResult solve_subproblem(const TrustRegionState& state, const Surrogates& surrogates,
                                  const MismatchDataset& data, const ProblemBinding& binding,
                                  const RTOOptions& options, std::uint64_t seed) {
  const Eigen::Index n = binding.n_u();
  auto model = std::make_shared<ModifiedModel>(surrogates, binding);
  SubproblemResult out;
  out.incumbent = binding.acquisition.kind == acquisition::Kind::ei
                      ? compute_incumbent(surrogates, data, binding.acquisition)
                      : 0.0;

  nlp::NLPProblem problem;
  problem.lower = Vector::Zero(n);
  problem.upper = Vector::Ones(n);
  problem.ball = nlp::Ball{state.center, state.radius};
  const auto spec = binding.acquisition;
  const double f_l = out.incumbent;
  problem.objective = [model, spec, f_l](const Vector& x, Vector* g) {
    if (spec.kind == acquisition::Kind::mean_only) return model->value(0, x, g);
    return acquisition_value(spec, model->cost(x), f_l, g);
  };
  for (Eigen::Index i = 1; i <= binding.n_g(); ++i) {
    problem.constraints.push_back([model, i](const Vector& x, Vector* g) { return model->value(i, x, g); });
  }

  const nlp::NLPResult r = nlp::solve(problem, options.subproblem_starts, seed, options.solver);
  out.status = r.status;
  out.max_violation = r.max_constraint_violation;
  if (r.minimizer.size() == n && r.minimizer.allFinite()) {
    out.trial = nlp::project_to_domain(problem, r.minimizer);
  } else {
    out.trial = state.center;
  }
  out.step = out.trial - state.center;
  out.acquisition_value = problem.objective(out.trial, nullptr);
  out.modified_cost_center = model->value(0, state.center, nullptr);
  out.modified_cost_trial = model->value(0, out.trial, nullptr);
  return out;
}

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::none: return "none";
    case RejectReason::low_merit: return "low_merit";
    case RejectReason::model_infeasible: return "model_infeasible";
    case RejectReason::plant_infeasible: return "plant_infeasible";
  }
  return "?";
}

Matrix default_initial_design(const Vector& center, const Scaling& scaling, double delta0) {
  const Eigen::Index n = center.size();
  const Vector x0 = scaling.to_unit(center);
  Matrix design(2 * n + 1, n);
  design.row(0) = center.transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int sign = 0; sign < 2; ++sign) {
      Vector x = x0;
      x(j) += (sign == 0 ? 0.5 : -0.5) * delta0;
      x = x.cwiseMax(0.0).cwiseMin(1.0);
      design.row(1 + 2 * j + sign) = scaling.from_unit(x).transpose();
    }
  }
  return design;
}

IterationRecord rto_step(RunState& run, const ProblemBinding& binding, const RTOOptions& options) {
  const TrustRegionParams& params = options.trust_region;
  const int k = run.tr.iteration;
  IterationRecord rec;
  rec.k = k;
  rec.center = binding.scaling.from_unit(run.tr.center);
  rec.radius = run.tr.radius;
  rec.truth_center = binding.plant->truth(rec.center);
  for (const auto& m : run.surrogates.models) rec.hyperparameters.push_back(m.hyperparameters());

  // Criticality check.
  TrustRegionState working = run.tr;
  if (std::isfinite(params.criticality_mu)) {
    ModifiedModel model(run.surrogates, binding);
    Vector cost_gradient;
    model.value(0, run.tr.center, &cost_gradient);
    std::vector<Vector> active;
    for (Eigen::Index i = 1; i <= binding.n_g(); ++i) {
      Vector g;
      if (model.value(i, run.tr.center, &g) >= -active_tolerance) active.push_back(g);
    }
    const CriticalityResult c = criticality_step(run.tr, params, cost_gradient, active);
    working.radius = c.radius;
    rec.criticality_triggered = c.triggered;
  }
  rec.radius_used = working.radius;

  // Modified subproblem.
  const SubproblemResult sub = solve_subproblem(working, run.surrogates, run.data, binding, options,
                                                derive_seed(run.seed, 2, static_cast<std::uint64_t>(k)));
  rec.subproblem_status = sub.status;
  rec.step = sub.step;
  rec.acquisition_value = sub.acquisition_value;
  rec.incumbent = sub.incumbent;

  // One plant evaluation batch.
  rec.trial = binding.scaling.from_unit(sub.trial);
  rec.measured = binding.plant->measure(rec.trial);
  rec.truth_trial = binding.plant->truth(rec.trial);

  // Feasibility, merit ratio and radius update.
  bool plant_feasible = true;
  for (int i : binding.unrelaxable) plant_feasible = plant_feasible && !(rec.measured(i) > 0.0);
  const bool model_feasible = sub.status == nlp::NLPStatus::success;
  double rho = 0.0;
  if (model_feasible && plant_feasible) {
    rho = merit_ratio(run.center_cost, rec.measured(0), sub.modified_cost_center, sub.modified_cost_trial);
    rec.rho = rho;
  }
  const Transition t =
      trust_region_transition(params, working.radius, model_feasible, plant_feasible, rho, sub.step.norm());
  rec.accepted = t.accepted;
  rec.reason = t.reason;
  if (rec.accepted) {
    run.tr.center = sub.trial;
    run.center_cost = rec.measured(0);
  }
  run.tr.radius = t.radius;
  rec.radius_next = run.tr.radius;

  // Dataset and GP refresh, whatever the outcome.
  const NominalEvaluation nom = evaluate_nominal(*binding.nominal, binding.scaling, sub.trial);
  rec.appended = run.data.append(sub.trial, rec.measured, nom.values);
  run.surrogates = fit_surrogates(run.data, run.tr.center, options.surrogates, binding.plant->plant().noise_std(),
                                  &run.surrogates, derive_seed(run.seed, 3, static_cast<std::uint64_t>(k + 1)));
  ++run.tr.iteration;
  return rec;
}

RTORunRecord run(const ProblemBinding& binding, const RTOOptions& options, const Matrix& initial_design,
                 int budget, std::uint64_t seed) {
  binding.validate();
  options.trust_region.validate();
  require(budget >= 0, "run: budget must be nonnegative");
  require(initial_design.rows() >= 1 && initial_design.cols() == binding.n_u(),
          "run: initial design must hold at least the center");

  RTORunRecord record;
  record.seed = seed;
  record.initial_design = initial_design;
  const Vector center_u = initial_design.row(0).transpose();
  const Vector center_truth = binding.plant->truth(center_u);
  for (int i : binding.unrelaxable) {
    if (center_truth(i) > 0.0) {
      std::ostringstream msg;
      msg << "initial center violates unrelaxable constraint " << i << " (value " << center_truth(i) << ")";
      throw ConfigError(msg.str());
    }
  }

  const Eigen::Index nf = binding.n_g() + 1;
  RunState state{TrustRegionState{binding.scaling.to_unit(center_u), options.trust_region.delta0, 0},
                 MismatchDataset(binding.n_u(), nf, options.retention, options.duplicate_radius), Surrogates{}, 0.0,
                 seed};
  record.initial_measured.resize(initial_design.rows(), nf);
  for (Eigen::Index r = 0; r < initial_design.rows(); ++r) {
    const Vector u = initial_design.row(r).transpose();
    const Vector measured = binding.plant->measure(u);
    record.initial_measured.row(r) = measured.transpose();
    const Vector x = binding.scaling.to_unit(u);
    state.data.append(x, measured, evaluate_nominal(*binding.nominal, binding.scaling, x).values);
  }
  state.center_cost = record.initial_measured(0, 0);

  try {
    state.surrogates = fit_surrogates(state.data, state.tr.center, options.surrogates,
                                      binding.plant->plant().noise_std(), nullptr, derive_seed(seed, 3, 0));
    for (int k = 0; k < budget; ++k) record.iterations.push_back(rto_step(state, binding, options));
  } catch (const gp::FitFailure& e) {
    record.aborted = true;
    record.abort_reason = std::string("GP fit failure: ") + e.what();
  } catch (const OracleError& e) {
    record.aborted = true;
    record.abort_reason = std::string("oracle failure: ") + e.what();
  }
  record.final_center = binding.scaling.from_unit(state.tr.center);
  record.final_radius = state.tr.radius;
  record.final_truth = binding.plant->truth(record.final_center);
  record.plant_evaluations = binding.plant->evaluations();
  for (const auto& m : state.surrogates.models) record.final_hyperparameters.push_back(m.hyperparameters());
  return record;
}

}  // namespace magp::rto
