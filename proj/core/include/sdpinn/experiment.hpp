#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdpinn/training.hpp"

namespace sdpinn {

/// A batch of runs: one problem, several methods, several seeds. Parsed from a
/// JSON document; see README for the schema and defaults.
struct ExperimentConfig {
  std::string problem = "kdv";
  double b = 20.0;
  std::vector<Method> methods;
  std::vector<double> thresholds;
  int grid_nx = 400;
  int grid_nt = 200;
  int condition_nx = 400;
  int condition_nt = 200;
  std::vector<std::uint64_t> seeds;
  std::vector<SubdomainConfig> subdomains = {SubdomainConfig{}};
  /// Network and data settings of pinn and inverse_pinn; defaults to subdomains[0].
  std::optional<SubdomainConfig> whole_domain;
  double lambda_init = 0.0;
  double label_eps = 0.05;
  int label_kmax = 20;
  int target_subdomain = 0;
  int report_every = 100;
  bool write_grids = true;
  bool export_points = false;
  std::string output_dir = "run";

  /// Throws ConfigError with the offending field path.
  static ExperimentConfig parse(std::string_view json_text);
  static ExperimentConfig load(const std::filesystem::path& file);
  /// Fully resolved JSON with every field spelled out.
  std::string dump() const;
  void validate() const;

  ProblemSpec make_problem() const;
  const SubdomainConfig& whole_domain_config() const;
  TrainingConfig training_config(Method m, std::uint64_t seed) const;
};

struct RunOptions {
  int workers = 1;
  std::uint64_t seed_offset = 0;
  /// Overrides the config's output directory when set.
  std::optional<std::filesystem::path> output_dir;
  /// Progress lines go here when non-null.
  std::ostream* log = nullptr;
};

/// Root for relative output directories: $SDPINN_OUTPUT_ROOT, else "runs".
std::filesystem::path default_output_root();

struct SummaryRow {
  std::string problem;
  double b = 0.0;
  std::string method;
  std::uint64_t seed = 0;
  std::string status = "ok";
  double error = 0.0;
  std::vector<std::optional<double>> sub_errors;
  std::optional<double> lambda;
  std::optional<double> lambda_rel_error;
  int iterations = 0;
};

/// Writes the summary header for `subdomains` per-band error columns.
void write_summary_header(std::ostream& os, std::size_t subdomains);
void write_summary_row(std::ostream& os, const SummaryRow& row);
/// Throws ConfigError on a malformed file.
std::vector<SummaryRow> read_summary(const std::filesystem::path& file);

struct ExperimentResult {
  std::filesystem::path directory;
  std::vector<SummaryRow> rows;
};

/// Runs every (method, seed) pair, dispatching independent sessions to a pool
/// of `workers` threads, and writes artifacts under the output directory.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options);

struct ReportGroup {
  std::string problem;
  double b = 0.0;
  std::string method;
  std::vector<SummaryRow> rows;  // sorted by seed
  SummaryRow mean, median;
};

/// Aggregates summary.csv of `dir` (and of its immediate sub-directories for
/// sweeps) into per-method mean and median rows, writes report.csv and
/// returns the groups sorted by (problem, b, method). Throws ConfigError when
/// no summary rows exist.
std::vector<ReportGroup> emit_report(const std::filesystem::path& dir);
/// Plain-text table of the report.
void print_report(std::ostream& os, const std::vector<ReportGroup>& groups);

/// Runs the experiment once per value of `param` (currently "b"), each in
/// <output>/<param>_<value>, and writes sweep.csv at the top level.
std::filesystem::path sweep(const ExperimentConfig& config, const std::string& param,
                            const std::vector<double>& values, const RunOptions& options);

}  // namespace sdpinn
