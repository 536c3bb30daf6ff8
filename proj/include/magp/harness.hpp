#ifndef MAGP_HARNESS_HPP
#define MAGP_HARNESS_HPP

#include "magp/ma_gp_tr.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace magp::harness {

struct ExperimentConfig {
  std::string plant = "quadratic";
  acquisition::AcquisitionSpec acquisition;
  bool noise_known = false;
  bool prior_model = true;
  rto::TrustRegionParams trust_region;
  std::optional<double> infeasible_shrink;  // plant default when unset
  rto::RetentionPolicy retention;
  double duplicate_radius = 1e-4;
  std::optional<gp::KernelKind> kernel;     // plant default when unset
  int budget = 20;
  int ensemble_size = 30;
  std::uint64_t base_seed = 1;
  std::string output_dir = "results";
  int pbr_stages = 6;
  int subproblem_starts = 20;
  int fit_starts = 10;
  int threads = 0;  // 0: one per hardware thread
  std::optional<Vector> initial_point;  // unscaled; plant default when unset
  double percentile = 95.0;
  /// Absolute slack on the noiseless constraints when deciding whether an
  /// iterate counts as feasible in the envelopes.
  double envelope_tolerance = 0.0;
  bool write_files = true;

  /// Throws ConfigError on an unknown key, a wrong type or an invalid value.
  static ExperimentConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
  void validate() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Desk-scale photobioreactor profile: 3 stages, M = 3, K = 25.
void apply_quick_profile(ExperimentConfig& config);

/// Plant, nominal model (or the zero model), noise stream and TR settings
/// for one ensemble member.
struct RunSetup {
  rto::ProblemBinding binding;
  rto::RTOOptions options;
  Matrix initial_design;
};
RunSetup make_run_setup(const ExperimentConfig& config, std::uint64_t seed);

struct RunSummary {
  std::uint64_t seed = 0;
  bool aborted = false;
  std::string abort_reason;
  /// Noiseless plant values at u⁰ … u^K, one row per iterate.
  Matrix center_truth;
  Vector initial_costs;  // measured cost at each initial design point
  int infeasible_trials = 0;
  int plant_evaluations = 0;
};

struct EnsembleSummary {
  ExperimentConfig config;
  std::vector<RunSummary> runs;
  /// Percentile of the noiseless cost over feasible iterates, per iteration;
  /// empty where no run is feasible.
  std::vector<std::optional<double>> envelope;
  std::vector<int> n_feasible;
  std::vector<std::string> failures;
};

/// Nearest-rank percentile: the ⌈p/100·N⌉-th smallest value (the smallest
/// for p = 0).
double percentile_nearest_rank(std::vector<double> values, double p);

/// Feasible iff every noiseless constraint is ≤ tolerance.
bool feasible(const Vector& truth, double tolerance);

/// Lowest noiseless cost among feasible iterates u⁰ … u^k, if any.
std::optional<double> best_feasible_cost(const RunSummary& run, int k, double tolerance);

RunSummary summarize_run(const rto::RTORunRecord& record);
std::vector<std::optional<double>> envelope(const std::vector<RunSummary>& runs, int budget, double p,
                                            double tolerance, std::vector<int>* n_feasible = nullptr);

/// M seeded runs sharing one initial design; writes run_<seed>.json,
/// run_<seed>.csv, ensemble.csv and summary.json when config.write_files.
EnsembleSummary run_experiment(const ExperimentConfig& config);

std::string run_record_json(const rto::RTORunRecord& record, const ExperimentConfig& config);
std::string run_record_csv(const rto::RTORunRecord& record);

/// Axes: "acquisition" (none, lcb, ei), "noise_known" (false, true),
/// "prior_model" (true, false). Output directories are nested under the base
/// directory, one per combination.
std::vector<ExperimentConfig> ablation_matrix(const ExperimentConfig& base, const std::vector<std::string>& axes);

struct AblationEntry {
  std::string label;
  std::optional<double> terminal_percentile;
  int failed_runs = 0;
};
/// Runs every combination and ranks them by terminal percentile cost;
/// writes ablation.csv in the base directory.
std::vector<AblationEntry> run_ablation(const ExperimentConfig& base, const std::vector<std::string>& axes);

/// Rebuilds ensemble.csv and summary.json from the run_<seed>.json files of
/// a directory.
EnsembleSummary summarize_directory(const std::filesystem::path& dir);

/// Noiseless plant cost and constraints on a resolution × resolution grid
/// over the input box (two-input plants only), as CSV.
std::string dense_grid_csv(const std::string& plant, int resolution);

/// Multistart NLP on the noiseless plant.
nlp::NLPResult plant_optimum(const plants::CaseStudy& study, int starts, std::uint64_t seed);

}  // namespace magp::harness

#endif  // MAGP_HARNESS_HPP
