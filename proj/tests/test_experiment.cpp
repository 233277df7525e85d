#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sdpinn/csv.hpp"
#include "sdpinn/errors.hpp"
#include "sdpinn/experiment.hpp"

using namespace sdpinn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sdpinn_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text) {
  try {
    ExperimentConfig::parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kTiny = R"({
  "problem": {"name": "kdv", "b": 20},
  "methods": ["sdpinn", "pinn", "inverse"],
  "thresholds": [-0.5],
  "seeds": [3, 4],
  "grid": {"n_x": 40, "n_t": 20},
  "conditions": {"n_x": 100, "n_t": 50},
  "subdomains": {"layers": [2, 6, 6, 1], "n_u": 30, "n_f": 60, "n_interface": 11, "n_p": 40,
                 "optimizer": {"max_iters": 8}},
  "write_grids": false
})";

SummaryRow row(const std::string& method, std::uint64_t seed, double err) {
  SummaryRow r;
  r.problem = "kdv";
  r.b = 20;
  r.method = method;
  r.seed = seed;
  r.error = err;
  r.sub_errors = {err / 2, std::nullopt};
  r.iterations = static_cast<int>(seed) * 10;
  return r;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("defaults and round trip") {
    const ExperimentConfig c = ExperimentConfig::parse(kTiny);
    CHECK(c.methods.size() == 3);
    CHECK(c.subdomains.size() == 1);
    CHECK(c.subdomains[0].n_f == 60);
    CHECK(c.subdomains[0].optim.memory == 10);
    CHECK(c.subdomains[0].weights.w_u == 1.0);
    CHECK(c.label_eps == 0.05);
    const ExperimentConfig again = ExperimentConfig::parse(c.dump());
    CHECK(again.dump() == c.dump());
    CHECK(again.whole_domain.has_value());
  }

  TEST_CASE("validation errors name the field") {
    CHECK(config_error(R"({"methods": ["pinn"], "seeds": []})").find("seeds") != std::string::npos);
    CHECK(config_error(R"({"methods": ["pinn"], "seeds": [1], "colour": 3})").find("colour") != std::string::npos);
    CHECK(config_error(R"({"methods": ["pinn"], "seeds": [1], "subdomains": {"n_f": "many"}})")
              .find("subdomains.n_f") != std::string::npos);
    CHECK(config_error(R"({"methods": ["pinn"], "seeds": [1], "subdomains": [{"optimizer": {"c1": 2}}]})")
              .find("subdomains[0].optimizer") != std::string::npos);
    CHECK(config_error(R"({"methods": ["magic"], "seeds": [1]})").find("methods") != std::string::npos);
    CHECK(config_error(R"({"methods": ["sdpinn"], "seeds": [1], "thresholds": [9]})").find("thresholds") !=
          std::string::npos);
    CHECK(config_error(R"({"methods": ["sdpinn"], "seeds": [-1]})").find("seeds") != std::string::npos);
    CHECK(config_error(R"({"methods": ["pinn"], "seeds": [1], "problem": {"name": "heat"}})")
              .find("problem.name") != std::string::npos);
    CHECK(config_error(R"({"methods": ["sdpinn"], "seeds": [1], "thresholds": [-0.5],
                           "subdomains": [{}, {}, {}]})") != "");
    CHECK(config_error("{not json") != "");
  }

  TEST_CASE("summary CSV round trip") {
    const fs::path dir = scratch("summary");
    fs::create_directories(dir);
    {
      std::ofstream os(dir / "summary.csv");
      write_summary_header(os, 2);
      SummaryRow r = row("inverse", 1, 0.125);
      r.lambda = 0.95;
      r.lambda_rel_error = 0.05;
      r.status = "failed: x, y";
      write_summary_row(os, r);
    }
    const auto rows = read_summary(dir / "summary.csv");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].error == 0.125);
    CHECK(rows[0].sub_errors[0] == 0.0625);
    CHECK_FALSE(rows[0].sub_errors[1].has_value());
    CHECK(rows[0].lambda == 0.95);
    CHECK(rows[0].status == "failed: x; y");
    CHECK(rows[0].iterations == 10);
  }

  TEST_CASE("report means and medians") {
    const fs::path dir = scratch("report");
    fs::create_directories(dir);
    const double errs[] = {0.011, 0.009, 0.013, 0.010, 0.02};
    {
      std::ofstream os(dir / "summary.csv");
      write_summary_header(os, 2);
      for (int s = 5; s >= 1; --s) write_summary_row(os, row("sdpinn", static_cast<std::uint64_t>(s), errs[s - 1]));
      write_summary_row(os, row("pinn", 1, 0.7));
    }
    const auto groups = emit_report(dir);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].method == "pinn");
    CHECK(groups[0].mean.error == 0.7);
    CHECK(groups[0].median.error == 0.7);
    const ReportGroup& sd = groups[1];
    REQUIRE(sd.rows.size() == 5);
    CHECK(sd.rows.front().seed == 1);
    CHECK(sd.mean.error == doctest::Approx((0.011 + 0.009 + 0.013 + 0.010 + 0.02) / 5).epsilon(1e-15));
    CHECK(sd.median.error == 0.011);
    CHECK(*sd.mean.sub_errors[0] == doctest::Approx(sd.mean.error / 2).epsilon(1e-15));
    CHECK_FALSE(sd.mean.sub_errors[1].has_value());
    CHECK(sd.mean.iterations == 30);
    const std::string rep = slurp(dir / "report.csv");
    CHECK(rep.find("kdv,20,sdpinn,mean,mean,") != std::string::npos);
    CHECK(rep.find("kdv,20,sdpinn,median,median,0.010999999999999999") != std::string::npos);
    std::ostringstream table;
    print_report(table, groups);
    CHECK(table.str().find("sdpinn") != std::string::npos);

    CHECK_THROWS_AS(emit_report(scratch("empty")), ConfigError);
  }

  TEST_CASE("inverse rows carry lambda columns") {
    const fs::path dir = scratch("inverse");
    fs::create_directories(dir);
    {
      std::ofstream os(dir / "summary.csv");
      write_summary_header(os, 2);
      for (int s = 1; s <= 3; ++s) {
        SummaryRow r = row("inverse", static_cast<std::uint64_t>(s), 0.01 * s);
        r.lambda = 1.0 - 0.01 * s;
        r.lambda_rel_error = 0.01 * s;
        write_summary_row(os, r);
      }
    }
    const auto g = emit_report(dir);
    REQUIRE(g.size() == 1);
    CHECK(*g[0].median.lambda_rel_error == doctest::Approx(0.02));
    CHECK(*g[0].mean.lambda == doctest::Approx(0.98));
  }

  TEST_CASE("runs are reproducible and independent of the worker count") {
    ExperimentConfig c = ExperimentConfig::parse(kTiny);
    RunOptions serial;
    serial.output_dir = scratch("serial");
    RunOptions pool = serial;
    pool.workers = 4;
    pool.output_dir = scratch("pool");
    const ExperimentResult a = run_experiment(c, serial);
    const ExperimentResult b = run_experiment(c, pool);
    REQUIRE(a.rows.size() == 6);
    CHECK(slurp(*serial.output_dir / "summary.csv") == slurp(*pool.output_dir / "summary.csv"));
    CHECK(fs::exists(*serial.output_dir / "sdpinn" / "seed_3" / "params_sd2.txt"));
    CHECK(fs::exists(*serial.output_dir / "pinn" / "seed_4" / "trace.csv"));
    CHECK(fs::exists(*serial.output_dir / "config.resolved.json"));
    CHECK_FALSE(fs::exists(*serial.output_dir / "pinn" / "seed_4" / "grid.csv"));
    for (const auto& r : a.rows) {
      CHECK(r.status == "ok");
      CHECK(std::isfinite(r.error));
      CHECK(r.sub_errors.size() == 2);
      if (r.method == "inverse") {
        CHECK(r.lambda.has_value());
        CHECK_FALSE(r.sub_errors[1].has_value());
      }
    }
    // The resolved config replays to the same numbers.
    ExperimentConfig replay = ExperimentConfig::load(*serial.output_dir / "config.resolved.json");
    RunOptions again;
    again.output_dir = scratch("replay");
    run_experiment(replay, again);
    CHECK(slurp(*serial.output_dir / "summary.csv") == slurp(*again.output_dir / "summary.csv"));

    RunOptions shifted = serial;
    shifted.seed_offset = 10;
    shifted.output_dir = scratch("shifted");
    const auto s = run_experiment(c, shifted);
    CHECK(s.rows[0].seed == 13);
  }

  TEST_CASE("sweep over b") {
    ExperimentConfig c = ExperimentConfig::parse(kTiny);
    c.methods = {Method::pinn};
    c.seeds = {1};
    RunOptions o;
    o.output_dir = scratch("sweep");
    const fs::path dir = sweep(c, "b", {1.0, 2.5}, o);
    CHECK(fs::exists(dir / "b_1" / "summary.csv"));
    CHECK(fs::exists(dir / "b_2.5" / "summary.csv"));
    const auto rows = read_summary(dir / "sweep.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].b == 2.5);
    CHECK(emit_report(dir).size() == 2);
    CHECK_THROWS_AS(sweep(c, "seed", {1.0}, o), ConfigError);
  }

  TEST_CASE("output root from the environment") {
    ::setenv("SDPINN_OUTPUT_ROOT", "/tmp/somewhere", 1);
    CHECK(default_output_root() == fs::path("/tmp/somewhere"));
    ::unsetenv("SDPINN_OUTPUT_ROOT");
    CHECK(default_output_root() == fs::path("runs"));
  }
}
