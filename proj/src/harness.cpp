#include "magp/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

namespace magp::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(15) << v;
  return os.str();
}

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
  return a;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].is_null() ? NAN : j[i].get<double>();
  return v;
}

json to_json(const gp::GPHyperparameters& h) {
  return json{{"mean_offset", h.mean_offset},
              {"kernel_kind", gp::to_string(h.kernel.kind)},
              {"magnitude", h.kernel.magnitude},
              {"lengthscales", to_json(h.kernel.lengthscales)},
              {"noise_std", h.noise_std},
              {"noise_fixed", h.noise_fixed}};
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["plant"] = c.plant;
  j["acquisition"] = acquisition::to_string(c.acquisition.kind);
  j["beta"] = c.acquisition.beta;
  j["incumbent_rule"] =
      c.acquisition.incumbent_rule ? json(acquisition::to_string(*c.acquisition.incumbent_rule)) : json(nullptr);
  j["noise_known"] = c.noise_known;
  j["prior_model"] = c.prior_model;
  j["eta1"] = c.trust_region.eta1;
  j["eta2"] = c.trust_region.eta2;
  j["gamma_red"] = c.trust_region.gamma_red;
  j["gamma_inc"] = c.trust_region.gamma_inc;
  j["delta0"] = c.trust_region.delta0;
  j["delta_max"] = c.trust_region.delta_max;
  j["criticality_mu"] =
      std::isfinite(c.trust_region.criticality_mu) ? json(c.trust_region.criticality_mu) : json(nullptr);
  j["infeasible_shrink"] = c.infeasible_shrink ? json(*c.infeasible_shrink) : json(nullptr);
  j["retention"] = rto::to_string(c.retention.kind);
  j["retention_capacity"] = c.retention.capacity;
  j["duplicate_radius"] = c.duplicate_radius;
  j["kernel"] = c.kernel ? json(gp::to_string(*c.kernel)) : json(nullptr);
  j["budget"] = c.budget;
  j["ensemble_size"] = c.ensemble_size;
  j["base_seed"] = c.base_seed;
  j["output_dir"] = c.output_dir;
  j["pbr_stages"] = c.pbr_stages;
  j["subproblem_starts"] = c.subproblem_starts;
  j["fit_starts"] = c.fit_starts;
  j["threads"] = c.threads;
  j["initial_point"] = c.initial_point ? to_json(*c.initial_point) : json(nullptr);
  j["percentile"] = c.percentile;
  j["envelope_tolerance"] = c.envelope_tolerance;
  j["write_files"] = c.write_files;
  return j;
}

template <class T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: key '" + key + "' has the wrong type");
  }
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "plant") c.plant = get_as<std::string>(v, key);
      else if (key == "acquisition") c.acquisition.kind = acquisition::kind_from_string(get_as<std::string>(v, key));
      else if (key == "beta") c.acquisition.beta = get_as<double>(v, key);
      else if (key == "incumbent_rule") {
        if (v.is_null()) c.acquisition.incumbent_rule.reset();
        else c.acquisition.incumbent_rule = acquisition::incumbent_rule_from_string(get_as<std::string>(v, key));
      }
      else if (key == "noise_known") c.noise_known = get_as<bool>(v, key);
      else if (key == "prior_model") c.prior_model = get_as<bool>(v, key);
      else if (key == "eta1") c.trust_region.eta1 = get_as<double>(v, key);
      else if (key == "eta2") c.trust_region.eta2 = get_as<double>(v, key);
      else if (key == "gamma_red") c.trust_region.gamma_red = get_as<double>(v, key);
      else if (key == "gamma_inc") c.trust_region.gamma_inc = get_as<double>(v, key);
      else if (key == "delta0") c.trust_region.delta0 = get_as<double>(v, key);
      else if (key == "delta_max") c.trust_region.delta_max = get_as<double>(v, key);
      else if (key == "criticality_mu") {
        c.trust_region.criticality_mu =
            v.is_null() ? std::numeric_limits<double>::infinity() : get_as<double>(v, key);
      }
      else if (key == "infeasible_shrink") {
        if (v.is_null()) c.infeasible_shrink.reset();
        else c.infeasible_shrink = get_as<double>(v, key);
      }
      else if (key == "retention") c.retention.kind = rto::retention_from_string(get_as<std::string>(v, key));
      else if (key == "retention_capacity") c.retention.capacity = get_as<int>(v, key);
      else if (key == "duplicate_radius") c.duplicate_radius = get_as<double>(v, key);
      else if (key == "kernel") {
        if (v.is_null()) c.kernel.reset();
        else c.kernel = gp::kernel_kind_from_string(get_as<std::string>(v, key));
      }
      else if (key == "budget") c.budget = get_as<int>(v, key);
      else if (key == "ensemble_size") c.ensemble_size = get_as<int>(v, key);
      else if (key == "base_seed") c.base_seed = get_as<std::uint64_t>(v, key);
      else if (key == "output_dir") c.output_dir = get_as<std::string>(v, key);
      else if (key == "pbr_stages") c.pbr_stages = get_as<int>(v, key);
      else if (key == "subproblem_starts") c.subproblem_starts = get_as<int>(v, key);
      else if (key == "fit_starts") c.fit_starts = get_as<int>(v, key);
      else if (key == "threads") c.threads = get_as<int>(v, key);
      else if (key == "initial_point") {
        if (v.is_null()) c.initial_point.reset();
        else c.initial_point = vector_from_json(get_as<std::vector<double>>(v, key));
      }
      else if (key == "percentile") c.percentile = get_as<double>(v, key);
      else if (key == "envelope_tolerance") c.envelope_tolerance = get_as<double>(v, key);
      else if (key == "write_files") c.write_files = get_as<bool>(v, key);
      else throw ConfigError("config: unknown key '" + key + "'");
    } catch (const ContractViolation& e) {
      throw ConfigError("config: key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string ensemble_csv(const EnsembleSummary& s) {
  std::ostringstream os;
  os << "iteration,percentile_cost,n_feasible\n";
  for (std::size_t k = 0; k < s.envelope.size(); ++k) {
    os << k << ',' << (s.envelope[k] ? fmt(*s.envelope[k]) : "") << ',' << s.n_feasible[k] << '\n';
  }
  return os.str();
}

std::string summary_json(const EnsembleSummary& s) {
  json j;
  j["config"] = config_json(s.config);
  j["percentile"] = s.config.percentile;
  json env = json::array();
  for (const auto& e : s.envelope) env.push_back(e ? json(*e) : json(nullptr));
  j["envelope"] = env;
  j["n_feasible"] = s.n_feasible;
  json runs = json::array();
  std::vector<std::uint64_t> missing;
  for (const auto& r : s.runs) {
    const int last = static_cast<int>(r.center_truth.rows()) - 1;
    const auto best = best_feasible_cost(r, last, s.config.envelope_tolerance);
    json rj{{"seed", r.seed},
            {"aborted", r.aborted},
            {"abort_reason", r.abort_reason},
            {"iterations_completed", last},
            {"final_cost", last >= 0 ? json(r.center_truth(last, 0)) : json(nullptr)},
            {"best_feasible_cost", best ? json(*best) : json(nullptr)},
            {"initial_costs", to_json(r.initial_costs)},
            {"infeasible_trials", r.infeasible_trials},
            {"plant_evaluations", r.plant_evaluations}};
    runs.push_back(rj);
    if (r.aborted) missing.push_back(r.seed);
  }
  j["runs"] = runs;
  j["aborted_runs"] = missing;
  j["failures"] = s.failures;
  return j.dump(2) + "\n";
}

void write_ensemble_files(const EnsembleSummary& s) {
  const fs::path dir(s.config.output_dir);
  fs::create_directories(dir);
  write_text(dir / "ensemble.csv", ensemble_csv(s));
  write_text(dir / "summary.json", summary_json(s));
}

const std::vector<std::string> known_plants = {"quadratic", "williams-otto", "pbr"};

}  // namespace

// ------------------------------------------------------------------- config

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

std::string ExperimentConfig::to_json_text() const { return config_json(*this).dump(2) + "\n"; }

void ExperimentConfig::validate() const {
  if (std::find(known_plants.begin(), known_plants.end(), plant) == known_plants.end())
    throw ConfigError("config: unknown plant '" + plant + "'");
  try {
    acquisition.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  rto::TrustRegionParams tr = trust_region;
  tr.infeasible_shrink = infeasible_shrink.value_or(tr.gamma_red);
  tr.validate();
  if (budget < 0) throw ConfigError("config: budget must be nonnegative");
  if (ensemble_size < 1) throw ConfigError("config: ensemble_size must be at least 1");
  if (pbr_stages < 1 || pbr_stages > 12) throw ConfigError("config: pbr_stages must lie in 1..12");
  if (subproblem_starts < 1 || fit_starts < 1) throw ConfigError("config: start counts must be positive");
  if (threads < 0) throw ConfigError("config: threads must be nonnegative");
  if (!(percentile >= 0.0 && percentile <= 100.0)) throw ConfigError("config: percentile must lie in [0, 100]");
  if (!(duplicate_radius >= 0.0)) throw ConfigError("config: duplicate_radius must be nonnegative");
  if (!(envelope_tolerance >= 0.0)) throw ConfigError("config: envelope_tolerance must be nonnegative");
  if (retention.kind != rto::Retention::keep_all && retention.capacity < 2)
    throw ConfigError("config: retention_capacity must be at least 2");
  if (output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ExperimentConfig::from_json_text(ss.str());
}

void apply_quick_profile(ExperimentConfig& config) {
  config.pbr_stages = 3;
  config.ensemble_size = 3;
  config.budget = 25;
}

RunSetup make_run_setup(const ExperimentConfig& config, std::uint64_t seed) {
  const plants::CaseStudy cs = plants::make_case_study(config.plant, {config.pbr_stages});
  const auto& info = cs.plant->info();
  RunSetup s;
  s.binding.plant = std::make_shared<plants::PlantOracle>(cs.plant, derive_seed(seed, 1));
  s.binding.nominal = config.prior_model ? cs.nominal
                                         : std::shared_ptr<const plants::NominalModel>(
                                               std::make_shared<plants::ZeroModel>(info));
  s.binding.unrelaxable = cs.unrelaxable;
  s.binding.acquisition = config.acquisition;
  s.binding.scaling = rto::Scaling(info.lower, info.upper);

  s.options.trust_region = config.trust_region;
  s.options.trust_region.infeasible_shrink = config.infeasible_shrink.value_or(cs.infeasible_shrink);
  s.options.surrogates.kernel = config.kernel.value_or(cs.kernel);
  s.options.surrogates.noise_known = config.noise_known;
  s.options.surrogates.fit_starts = config.fit_starts;
  s.options.retention = config.retention;
  s.options.duplicate_radius = config.duplicate_radius;
  s.options.subproblem_starts = config.subproblem_starts;

  const Vector center = config.initial_point.value_or(cs.initial_point);
  if (center.size() != info.n_u()) throw ConfigError("config: initial_point has the wrong dimension");
  if ((center.array() < info.lower.array()).any() || (center.array() > info.upper.array()).any())
    throw ConfigError("config: initial_point lies outside the input box");
  s.initial_design = rto::default_initial_design(center, s.binding.scaling, s.options.trust_region.delta0);
  return s;
}

// ---------------------------------------------------------------- summaries

double percentile_nearest_rank(std::vector<double> values, double p) {
  require(!values.empty(), "percentile of an empty set");
  require(p >= 0.0 && p <= 100.0, "percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

bool feasible(const Vector& truth, double tolerance) {
  for (Eigen::Index i = 1; i < truth.size(); ++i) {
    if (!(truth(i) <= tolerance)) return false;
  }
  return std::isfinite(truth(0));
}

std::optional<double> best_feasible_cost(const RunSummary& run, int k, double tolerance) {
  std::optional<double> best;
  const int last = std::min<int>(k, static_cast<int>(run.center_truth.rows()) - 1);
  for (int j = 0; j <= last; ++j) {
    const Vector t = run.center_truth.row(j).transpose();
    if (feasible(t, tolerance) && (!best || t(0) < *best)) best = t(0);
  }
  return best;
}

RunSummary summarize_run(const rto::RTORunRecord& record) {
  RunSummary s;
  s.seed = record.seed;
  s.aborted = record.aborted;
  s.abort_reason = record.abort_reason;
  const auto n = static_cast<Eigen::Index>(record.iterations.size());
  s.center_truth.resize(n + 1, record.final_truth.size());
  for (Eigen::Index k = 0; k < n; ++k) s.center_truth.row(k) = record.iterations[static_cast<std::size_t>(k)].truth_center.transpose();
  s.center_truth.row(n) = record.final_truth.transpose();
  s.initial_costs = record.initial_measured.col(0);
  for (const auto& it : record.iterations) {
    if (it.reason == rto::RejectReason::plant_infeasible) ++s.infeasible_trials;
  }
  s.plant_evaluations = record.plant_evaluations;
  return s;
}

std::vector<std::optional<double>> envelope(const std::vector<RunSummary>& runs, int budget, double p,
                                            double tolerance, std::vector<int>* n_feasible) {
  std::vector<std::optional<double>> out;
  if (n_feasible) n_feasible->clear();
  for (int k = 0; k <= budget; ++k) {
    std::vector<double> costs;
    for (const auto& r : runs) {
      if (k >= r.center_truth.rows()) continue;
      const Vector t = r.center_truth.row(k).transpose();
      if (feasible(t, tolerance)) costs.push_back(t(0));
    }
    if (n_feasible) n_feasible->push_back(static_cast<int>(costs.size()));
    out.push_back(costs.empty() ? std::nullopt : std::optional<double>(percentile_nearest_rank(costs, p)));
  }
  return out;
}

// ------------------------------------------------------------------ records

std::string run_record_json(const rto::RTORunRecord& r, const ExperimentConfig& config) {
  json j;
  j["seed"] = r.seed;
  j["config"] = config_json(config);
  j["gradient_source"] = "analytic";
  j["initial_design"] = to_json(r.initial_design);
  j["initial_measured"] = to_json(r.initial_measured);
  json its = json::array();
  for (const auto& it : r.iterations) {
    json hyper = json::array();
    for (const auto& h : it.hyperparameters) hyper.push_back(to_json(h));
    its.push_back(json{{"k", it.k},
                       {"center", to_json(it.center)},
                       {"radius", it.radius},
                       {"radius_used", it.radius_used},
                       {"radius_next", it.radius_next},
                       {"criticality_triggered", it.criticality_triggered},
                       {"step", to_json(it.step)},
                       {"trial", to_json(it.trial)},
                       {"rho", it.rho ? json(*it.rho) : json(nullptr)},
                       {"accepted", it.accepted},
                       {"rejected_reason", rto::to_string(it.reason)},
                       {"measured", to_json(it.measured)},
                       {"truth_trial", to_json(it.truth_trial)},
                       {"truth_center", to_json(it.truth_center)},
                       {"acquisition_value", it.acquisition_value},
                       {"incumbent", it.incumbent},
                       {"subproblem_status", nlp::to_string(it.subproblem_status)},
                       {"appended", it.appended},
                       {"gp_hyperparameters", hyper}});
  }
  j["iterations"] = its;
  json final_hyper = json::array();
  for (const auto& h : r.final_hyperparameters) final_hyper.push_back(to_json(h));
  j["final"] = json{{"center", to_json(r.final_center)},
                    {"radius", r.final_radius},
                    {"truth", to_json(r.final_truth)},
                    {"gp_hyperparameters", final_hyper}};
  j["plant_evaluations"] = r.plant_evaluations;
  j["aborted"] = r.aborted;
  j["abort_reason"] = r.abort_reason;
  return j.dump(2) + "\n";
}

std::string run_record_csv(const rto::RTORunRecord& r) {
  const Eigen::Index nu = r.initial_design.cols();
  const Eigen::Index nf = r.final_truth.size();
  std::ostringstream os;
  os << "k";
  for (Eigen::Index i = 1; i <= nu; ++i) os << ",u_" << i;
  os << ",delta,rho,accepted,reason";
  for (Eigen::Index i = 0; i < nf; ++i) os << ",Gp_" << i;
  os << ",acq_value";
  for (Eigen::Index i = 1; i <= nu; ++i) os << ",trial_" << i;
  os << ",true_cost,criticality\n";
  for (const auto& it : r.iterations) {
    os << it.k;
    for (Eigen::Index i = 0; i < nu; ++i) os << ',' << fmt(it.center(i));
    os << ',' << fmt(it.radius) << ',' << (it.rho ? fmt(*it.rho) : "") << ',' << (it.accepted ? 1 : 0) << ','
       << rto::to_string(it.reason);
    for (Eigen::Index i = 0; i < nf; ++i) os << ',' << fmt(it.measured(i));
    os << ',' << fmt(it.acquisition_value);
    for (Eigen::Index i = 0; i < nu; ++i) os << ',' << fmt(it.trial(i));
    os << ',' << fmt(it.truth_center(0)) << ',' << (it.criticality_triggered ? 1 : 0) << '\n';
  }
  return os.str();
}

// --------------------------------------------------------------- ensembles

EnsembleSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  const int m = config.ensemble_size;
  // Surface configuration problems (bad initial point, ...) before any work.
  make_run_setup(config, config.base_seed);

  std::vector<std::optional<rto::RTORunRecord>> records(static_cast<std::size_t>(m));
  std::vector<std::string> errors(static_cast<std::size_t>(m));
  std::vector<std::exception_ptr> config_errors(static_cast<std::size_t>(m));
  if (config.write_files) fs::create_directories(config.output_dir);

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next++; i < m; i = next++) {
      const auto idx = static_cast<std::size_t>(i);
      const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(i);
      try {
        RunSetup setup = make_run_setup(config, seed);
        records[idx] = rto::run(setup.binding, setup.options, setup.initial_design, config.budget, seed);
        if (config.write_files) {
          const fs::path dir(config.output_dir);
          write_text(dir / ("run_" + std::to_string(seed) + ".json"), run_record_json(*records[idx], config));
          write_text(dir / ("run_" + std::to_string(seed) + ".csv"), run_record_csv(*records[idx]));
        }
      } catch (const ConfigError&) {
        config_errors[idx] = std::current_exception();
      } catch (const std::exception& e) {
        errors[idx] = "seed " + std::to_string(seed) + ": " + e.what();
      }
    }
  };
  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, m);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : config_errors) {
    if (e) std::rethrow_exception(e);
  }

  EnsembleSummary s;
  s.config = config;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i]) {
      s.runs.push_back(summarize_run(*records[i]));
      if (records[i]->aborted) {
        s.failures.push_back("seed " + std::to_string(records[i]->seed) + ": " + records[i]->abort_reason);
      }
    } else {
      s.failures.push_back(errors[i]);
    }
  }
  s.envelope = envelope(s.runs, config.budget, config.percentile, config.envelope_tolerance, &s.n_feasible);
  if (config.write_files) write_ensemble_files(s);
  return s;
}

std::vector<ExperimentConfig> ablation_matrix(const ExperimentConfig& base, const std::vector<std::string>& axes) {
  std::vector<std::pair<ExperimentConfig, std::string>> configs{{base, ""}};
  for (const auto& axis : axes) {
    std::vector<std::pair<ExperimentConfig, std::string>> next;
    for (const auto& [c, label] : configs) {
      const std::string sep = label.empty() ? "" : "__";
      if (axis == "acquisition") {
        for (auto kind : {acquisition::Kind::mean_only, acquisition::Kind::lcb, acquisition::Kind::ei}) {
          ExperimentConfig v = c;
          v.acquisition.kind = kind;
          next.emplace_back(v, label + sep + "acq-" + acquisition::to_string(kind));
        }
      } else if (axis == "noise_known") {
        for (bool known : {false, true}) {
          ExperimentConfig v = c;
          v.noise_known = known;
          next.emplace_back(v, label + sep + (known ? "noise-known" : "noise-unknown"));
        }
      } else if (axis == "prior_model") {
        for (bool prior : {true, false}) {
          ExperimentConfig v = c;
          v.prior_model = prior;
          next.emplace_back(v, label + sep + (prior ? "prior" : "model-free"));
        }
      } else {
        throw ConfigError("ablation: unknown axis '" + axis + "' (expected acquisition, noise_known, prior_model)");
      }
    }
    configs = std::move(next);
  }
  std::vector<ExperimentConfig> out;
  for (auto& [c, label] : configs) {
    if (!label.empty()) c.output_dir = (fs::path(base.output_dir) / label).string();
    out.push_back(c);
  }
  return out;
}

std::vector<AblationEntry> run_ablation(const ExperimentConfig& base, const std::vector<std::string>& axes) {
  const auto configs = ablation_matrix(base, axes);
  std::vector<AblationEntry> entries;
  for (const auto& c : configs) {
    const EnsembleSummary s = run_experiment(c);
    AblationEntry e;
    e.label = fs::path(c.output_dir).filename().string();
    e.terminal_percentile = s.envelope.empty() ? std::nullopt : s.envelope.back();
    e.failed_runs = static_cast<int>(s.failures.size());
    entries.push_back(e);
  }
  std::stable_sort(entries.begin(), entries.end(), [](const AblationEntry& a, const AblationEntry& b) {
    if (a.terminal_percentile && b.terminal_percentile) return *a.terminal_percentile < *b.terminal_percentile;
    return a.terminal_percentile.has_value() && !b.terminal_percentile.has_value();
  });
  if (base.write_files) {
    std::ostringstream os;
    os << "rank,label,terminal_percentile_cost,failed_runs\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
      os << i + 1 << ',' << entries[i].label << ','
         << (entries[i].terminal_percentile ? fmt(*entries[i].terminal_percentile) : "") << ','
         << entries[i].failed_runs << '\n';
    }
    fs::create_directories(base.output_dir);
    write_text(fs::path(base.output_dir) / "ablation.csv", os.str());
  }
  return entries;
}

EnsembleSummary summarize_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("summarize: not a directory: " + dir.string());
  const std::regex pattern("run_([0-9]+)\\.json");
  std::vector<std::pair<std::uint64_t, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) files.emplace_back(std::stoull(m[1].str()), entry.path());
  }
  if (files.empty()) throw ConfigError("summarize: no run_<seed>.json files in " + dir.string());
  std::sort(files.begin(), files.end());

  EnsembleSummary s;
  bool have_config = false;
  for (const auto& [seed, path] : files) {
    std::ifstream in(path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      s.failures.push_back(path.filename().string() + ": " + e.what());
      continue;
    }
    if (!have_config) {
      s.config = config_from_json(j.at("config"));
      s.config.output_dir = dir.string();
      have_config = true;
    }
    RunSummary r;
    r.seed = seed;
    r.aborted = j.at("aborted").get<bool>();
    r.abort_reason = j.at("abort_reason").get<std::string>();
    const auto& its = j.at("iterations");
    const Vector final_truth = vector_from_json(j.at("final").at("truth"));
    r.center_truth.resize(static_cast<Eigen::Index>(its.size()) + 1, final_truth.size());
    for (std::size_t k = 0; k < its.size(); ++k) {
      r.center_truth.row(static_cast<Eigen::Index>(k)) = vector_from_json(its[k].at("truth_center")).transpose();
      if (its[k].at("rejected_reason").get<std::string>() == "plant_infeasible") ++r.infeasible_trials;
    }
    r.center_truth.row(static_cast<Eigen::Index>(its.size())) = final_truth.transpose();
    const auto& measured = j.at("initial_measured");
    r.initial_costs.resize(static_cast<Eigen::Index>(measured.size()));
    for (std::size_t i = 0; i < measured.size(); ++i) r.initial_costs(static_cast<Eigen::Index>(i)) = measured[i][0].get<double>();
    r.plant_evaluations = j.at("plant_evaluations").get<int>();
    if (r.aborted) s.failures.push_back("seed " + std::to_string(seed) + ": " + r.abort_reason);
    s.runs.push_back(std::move(r));
  }
  if (!have_config) throw ConfigError("summarize: no readable run records in " + dir.string());
  s.envelope = envelope(s.runs, s.config.budget, s.config.percentile, s.config.envelope_tolerance, &s.n_feasible);
  write_ensemble_files(s);
  return s;
}

// --------------------------------------------------------------- utilities

std::string dense_grid_csv(const std::string& plant, int resolution) {
  if (resolution < 2) throw ConfigError("grid: resolution must be at least 2");
  const plants::CaseStudy cs = plants::make_case_study(plant);
  const auto& info = cs.plant->info();
  if (info.n_u() != 2) throw ConfigError("grid: only two-input plants can be gridded");
  std::ostringstream os;
  os << "u_1,u_2";
  for (Eigen::Index i = 0; i <= info.n_g(); ++i) os << ",G_" << i;
  os << '\n';
  for (int a = 0; a < resolution; ++a) {
    for (int b = 0; b < resolution; ++b) {
      Vector u(2);
      u(0) = info.lower(0) + (info.upper(0) - info.lower(0)) * a / (resolution - 1);
      u(1) = info.lower(1) + (info.upper(1) - info.lower(1)) * b / (resolution - 1);
      Vector g;
      try {
        g = cs.plant->evaluate(u);
      } catch (const OracleError&) {
        g = Vector::Constant(info.n_g() + 1, NAN);
      }
      os << fmt(u(0)) << ',' << fmt(u(1));
      for (Eigen::Index i = 0; i < g.size(); ++i) os << ',' << fmt(g(i));
      os << '\n';
    }
  }
  return os.str();
}

nlp::NLPResult plant_optimum(const plants::CaseStudy& study, int starts, std::uint64_t seed) {
  const auto& info = study.plant->info();
  const rto::Scaling scaling(info.lower, info.upper);
  struct Cache {
    Vector x;
    Vector values;
    Matrix jacobian;
  };
  auto cache = std::make_shared<Cache>();
  auto plant = study.plant;
  auto eval = [cache, plant, scaling](Eigen::Index i, const Vector& x, Vector* g) {
    if (cache->x.size() != x.size() || cache->x != x) {
      Matrix jac;
      cache->values = plant->evaluate(scaling.from_unit(x), &jac);
      cache->jacobian = jac * scaling.span().asDiagonal();
      cache->x = x;
    }
    if (g) *g = cache->jacobian.row(i).transpose();
    return cache->values(i);
  };
  nlp::NLPProblem problem;
  problem.lower = Vector::Zero(info.n_u());
  problem.upper = Vector::Ones(info.n_u());
  problem.objective = [eval](const Vector& x, Vector* g) { return eval(0, x, g); };
  for (Eigen::Index i = 1; i <= info.n_g(); ++i) {
    problem.constraints.push_back([eval, i](const Vector& x, Vector* g) { return eval(i, x, g); });
  }
  nlp::NLPResult r = nlp::solve(problem, starts, seed);
  r.minimizer = scaling.from_unit(r.minimizer);
  return r;
}

}  // namespace magp::harness
