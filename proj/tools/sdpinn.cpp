// Command-line front end: run, report and sweep experiments.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sdpinn/errors.hpp"
#include "sdpinn/experiment.hpp"

namespace {

void print_rows(const sdpinn::ExperimentResult& r) {
  std::cout << "results in " << r.directory.string() << "\n";
  for (const auto& row : r.rows) {
    std::cout << "  " << row.method << " seed " << row.seed << ": L2 " << row.error;
    if (row.lambda) std::cout << ", lambda " << *row.lambda;
    if (row.status != "ok") std::cout << " [" << row.status << "]";
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetry-decomposed physics-informed networks"};
  app.require_subcommand(1);

  int workers = 1;
  std::uint64_t seed_offset = 0;
  std::string output;
  bool quiet = false;
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--workers", workers, "Concurrent training sessions")->check(CLI::PositiveNumber);
    sub->add_option("--seed-offset", seed_offset, "Added to every configured seed");
    sub->add_option("-o,--output", output, "Output directory (overrides the config)");
    sub->add_flag("-q,--quiet", quiet, "No progress lines");
  };

  std::string config_path;
  auto* run = app.add_subcommand("run", "Train every method and seed of a config");
  run->add_option("config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  add_run_flags(run);

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Aggregate summary.csv files into report.csv");
  report->add_option("dir", report_dir, "Experiment or sweep directory")->required()->check(CLI::ExistingDirectory);

  std::string param = "b";
  std::vector<double> values;
  auto* sw = app.add_subcommand("sweep", "Repeat a config over parameter values");
  sw->add_option("config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  sw->add_option("--param", param, "Parameter to vary")->check(CLI::IsMember({"b"}));
  sw->add_option("--values", values, "Values of the parameter")->required()->expected(1, -1);
  add_run_flags(sw);

  auto* show = app.add_subcommand("config", "Print a config with every default filled in");
  show->add_option("config", config_path, "JSON config")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    sdpinn::RunOptions opts;
    opts.workers = workers;
    opts.seed_offset = seed_offset;
    if (!output.empty()) opts.output_dir = output;
    if (!quiet) opts.log = &std::cerr;

    if (*run) {
      const auto cfg = sdpinn::ExperimentConfig::load(config_path);
      const auto result = sdpinn::run_experiment(cfg, opts);
      print_rows(result);
      sdpinn::print_report(std::cout, sdpinn::emit_report(result.directory));
    } else if (*report) {
      sdpinn::print_report(std::cout, sdpinn::emit_report(report_dir));
    } else if (*sw) {
      const auto cfg = sdpinn::ExperimentConfig::load(config_path);
      const auto dir = sdpinn::sweep(cfg, param, values, opts);
      std::cout << "sweep in " << dir.string() << "\n";
      sdpinn::print_report(std::cout, sdpinn::emit_report(dir));
    } else if (*show) {
      std::cout << sdpinn::ExperimentConfig::load(config_path).dump();
    }
  } catch (const sdpinn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
