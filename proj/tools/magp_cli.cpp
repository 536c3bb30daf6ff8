#include "magp/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

constexpr int exit_config_error = 2;
constexpr int exit_run_failure = 3;

void print_summary(const magp::harness::EnsembleSummary& s) {
  std::cout << "plant " << s.config.plant << ", acquisition " << magp::acquisition::to_string(s.config.acquisition.kind)
            << ", " << s.runs.size() << " runs, output " << s.config.output_dir << "\n";
  std::cout << "iteration  p" << s.config.percentile << "_cost  n_feasible\n";
  for (std::size_t k = 0; k < s.envelope.size(); ++k) {
    std::cout << std::setw(9) << k << "  " << std::setw(12);
    if (s.envelope[k]) {
      std::cout << std::setprecision(6) << *s.envelope[k];
    } else {
      std::cout << "-";
    }
    std::cout << "  " << s.n_feasible[k] << "\n";
  }
  for (const auto& f : s.failures) std::cerr << "run failure: " << f << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modifier-adaptation RTO with GP surrogates, trust region and acquisition functions"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_override;
  bool quick = false;
  auto* run = app.add_subcommand("run", "Run a seeded ensemble from a JSON config");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("-o,--output", output_override, "Override output_dir");
  run->add_flag("--quick", quick, "Desk-scale photobioreactor profile (3 stages, M=3, K=25)");

  std::vector<std::string> axes;
  auto* ablate = app.add_subcommand("ablate", "Run the Cartesian product of ablation axes");
  ablate->add_option("config", config_path, "Base config file")->required();
  ablate->add_option("--axes", axes, "acquisition, noise_known, prior_model")->delimiter(',');
  ablate->add_option("-o,--output", output_override, "Override output_dir");
  ablate->add_flag("--quick", quick, "Desk-scale photobioreactor profile");

  std::string dir;
  auto* summarize = app.add_subcommand("summarize", "Rebuild ensemble.csv and summary.json from run records");
  summarize->add_option("dir", dir, "Directory with run_<seed>.json files")->required();

  std::string plant;
  int resolution = 101;
  std::string grid_out;
  auto* grid = app.add_subcommand("grid", "Dense noiseless grid of a two-input plant, as CSV");
  grid->add_option("plant", plant, "quadratic or williams-otto")->required();
  grid->add_option("-n,--resolution", resolution, "Points per axis");
  grid->add_option("-o,--output", grid_out, "Output file (stdout when omitted)");

  int stages = 6;
  int starts = 50;
  std::uint64_t seed = 1;
  auto* optimum = app.add_subcommand("optimum", "Multistart NLP on the noiseless plant");
  optimum->add_option("plant", plant, "quadratic, williams-otto or pbr")->required();
  optimum->add_option("--stages", stages, "Photobioreactor stages");
  optimum->add_option("--starts", starts, "Random starts");
  optimum->add_option("--seed", seed, "Start sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config_error;
  }

  try {
    if (*run || *ablate) {
      auto config = magp::harness::load_config(config_path);
      if (quick) magp::harness::apply_quick_profile(config);
      if (!output_override.empty()) config.output_dir = output_override;
      if (*run) {
        const auto summary = magp::harness::run_experiment(config);
        print_summary(summary);
        return summary.failures.empty() ? 0 : exit_run_failure;
      }
      const auto entries = magp::harness::run_ablation(config, axes);
      int failed = 0;
      std::cout << "rank  terminal_cost  failed  label\n";
      for (std::size_t i = 0; i < entries.size(); ++i) {
        std::cout << std::setw(4) << i + 1 << "  " << std::setw(13);
        if (entries[i].terminal_percentile) {
          std::cout << std::setprecision(6) << *entries[i].terminal_percentile;
        } else {
          std::cout << "-";
        }
        std::cout << "  " << std::setw(6) << entries[i].failed_runs << "  " << entries[i].label << "\n";
        failed += entries[i].failed_runs;
      }
      return failed == 0 ? 0 : exit_run_failure;
    }
    if (*summarize) {
      const auto summary = magp::harness::summarize_directory(dir);
      print_summary(summary);
      return summary.failures.empty() ? 0 : exit_run_failure;
    }
    if (*grid) {
      const std::string csv = magp::harness::dense_grid_csv(plant, resolution);
      if (grid_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream(grid_out) << csv;
      }
      return 0;
    }
    if (*optimum) {
      const auto study = magp::plants::make_case_study(plant, {stages});
      const auto r = magp::harness::plant_optimum(study, starts, seed);
      std::cout << std::setprecision(10) << "status " << magp::nlp::to_string(r.status) << "\ncost " << r.objective_value
                << "\nviolation " << r.max_constraint_violation << "\ninputs";
      for (Eigen::Index i = 0; i < r.minimizer.size(); ++i) std::cout << ' ' << r.minimizer(i);
      std::cout << "\nvalues";
      const magp::Vector g = study.plant->evaluate(r.minimizer);
      for (Eigen::Index i = 0; i < g.size(); ++i) std::cout << ' ' << g(i);
      std::cout << "\n";
      return r.status == magp::nlp::NLPStatus::success ? 0 : exit_run_failure;
    }
  } catch (const magp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_run_failure;
  }
  return 0;
}
