#include "sdpinn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sdpinn/csv.hpp"
#include "sdpinn/errors.hpp"

namespace sdpinn {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Typed access to one JSON object that rejects unknown keys and reports the
// full path of a bad field.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(at(key) + ": " + msg);
  }

  std::string at(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "must be finite");
    return d;
  }

  int integer(const std::string& key, int def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    const auto i = v.get<long long>();
    if (i < INT32_MIN || i > INT32_MAX) fail(key, "out of range");
    return static_cast<int>(i);
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(it.key(), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void wrap(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

OptimConfig parse_optim(const json& j, const std::string& path) {
  Fields f(j, path);
  OptimConfig o;
  o.memory = f.integer("memory", o.memory);
  o.max_iters = f.integer("max_iters", o.max_iters);
  o.grad_tol = f.number("grad_tol", o.grad_tol);
  o.loss_tol = f.number("loss_tol", o.loss_tol);
  o.c1 = f.number("c1", o.c1);
  o.c2 = f.number("c2", o.c2);
  o.max_line_search_evals = f.integer("max_line_search_evals", o.max_line_search_evals);
  f.finish();
  wrap(path, [&] { o.validate(); });
  return o;
}

LossWeights parse_weights(const json& j, const std::string& path) {
  Fields f(j, path);
  LossWeights w;
  w.w_u = f.number("w_u", w.w_u);
  w.w_f = f.number("w_f", w.w_f);
  w.w_g = f.number("w_g", w.w_g);
  w.w_I = f.number("w_I", w.w_I);
  w.w_p = f.number("w_p", w.w_p);
  f.finish();
  wrap(path, [&] { w.validate(); });
  return w;
}

SubdomainConfig parse_subdomain(const json& j, const std::string& path) {
  Fields f(j, path);
  SubdomainConfig s;
  if (f.has("layers")) {
    const json& l = f.raw("layers");
    if (!l.is_array()) f.fail("layers", "expected an array of widths");
    s.layers.clear();
    for (const auto& w : l) {
      if (!w.is_number_integer()) f.fail("layers", "widths must be integers");
      s.layers.push_back(w.get<int>());
    }
    wrap(f.at("layers"), [&] { const Architecture shape(s.layers); (void)shape; });
  }
  s.n_u = f.integer("n_u", s.n_u);
  s.n_f = f.integer("n_f", s.n_f);
  s.n_g = f.integer("n_g", s.n_g);
  s.n_interface = f.integer("n_interface", s.n_interface);
  s.n_p = f.integer("n_p", s.n_p);
  if (f.has("optimizer")) s.optim = parse_optim(f.raw("optimizer"), f.at("optimizer"));
  if (f.has("weights")) s.weights = parse_weights(f.raw("weights"), f.at("weights"));
  f.finish();
  return s;
}

json optim_json(const OptimConfig& o) {
  return json{{"memory", o.memory},     {"max_iters", o.max_iters}, {"grad_tol", o.grad_tol},
              {"loss_tol", o.loss_tol}, {"c1", o.c1},               {"c2", o.c2},
              {"max_line_search_evals", o.max_line_search_evals}};
}

json subdomain_json(const SubdomainConfig& s) {
  const LossWeights& w = s.weights;
  return json{{"layers", s.layers},
              {"n_u", s.n_u},
              {"n_f", s.n_f},
              {"n_g", s.n_g},
              {"n_interface", s.n_interface},
              {"n_p", s.n_p},
              {"optimizer", optim_json(s.optim)},
              {"weights", json{{"w_u", w.w_u}, {"w_f", w.w_f}, {"w_g", w.w_g}, {"w_I", w.w_I},
                               {"w_p", w.w_p}}}};
}

std::string clean_status(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string opt_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::optional<double> parse_cell(const std::string& s, const std::string& where) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ConfigError(where + ": bad number '" + s + "'");
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Fields f(root, "");
  ExperimentConfig c;

  if (f.has("problem")) {
    Fields p(f.raw("problem"), "problem");
    c.problem = p.string("name", c.problem);
    c.b = p.number("b", c.b);
    p.finish();
  }
  if (f.has("methods")) {
    const json& m = f.raw("methods");
    if (!m.is_array()) f.fail("methods", "expected an array of method names");
    for (const auto& v : m) {
      if (!v.is_string()) f.fail("methods", "method names must be strings");
      wrap("methods", [&] { c.methods.push_back(parse_method(v.get<std::string>())); });
    }
  }
  if (f.has("thresholds")) {
    const json& t = f.raw("thresholds");
    if (!t.is_array()) f.fail("thresholds", "expected an array of numbers");
    for (const auto& v : t) {
      if (!v.is_number()) f.fail("thresholds", "thresholds must be numbers");
      c.thresholds.push_back(v.get<double>());
    }
  }
  if (f.has("grid")) {
    Fields g(f.raw("grid"), "grid");
    c.grid_nx = g.integer("n_x", c.grid_nx);
    c.grid_nt = g.integer("n_t", c.grid_nt);
    g.finish();
  }
  if (f.has("conditions")) {
    Fields g(f.raw("conditions"), "conditions");
    c.condition_nx = g.integer("n_x", c.condition_nx);
    c.condition_nt = g.integer("n_t", c.condition_nt);
    g.finish();
  }
  if (f.has("seeds")) {
    const json& s = f.raw("seeds");
    if (!s.is_array()) f.fail("seeds", "expected an array of non-negative integers");
    for (const auto& v : s) {
      if (!v.is_number_unsigned()) f.fail("seeds", "seeds must be non-negative integers");
      c.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  if (f.has("subdomains")) {
    const json& s = f.raw("subdomains");
    c.subdomains.clear();
    if (s.is_array()) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        c.subdomains.push_back(parse_subdomain(s[i], "subdomains[" + std::to_string(i) + "]"));
      }
    } else {
      c.subdomains.push_back(parse_subdomain(s, "subdomains"));
    }
  }
  if (f.has("whole_domain")) c.whole_domain = parse_subdomain(f.raw("whole_domain"), "whole_domain");
  if (f.has("inverse")) {
    Fields inv(f.raw("inverse"), "inverse");
    c.lambda_init = inv.number("lambda_init", c.lambda_init);
    c.label_eps = inv.number("label_eps", c.label_eps);
    c.label_kmax = inv.integer("label_kmax", c.label_kmax);
    c.target_subdomain = inv.integer("target_subdomain", c.target_subdomain);
    inv.finish();
  }
  c.report_every = f.integer("report_every", c.report_every);
  c.write_grids = f.boolean("write_grids", c.write_grids);
  c.export_points = f.boolean("export_points", c.export_points);
  c.output_dir = f.string("output_dir", c.output_dir);
  f.finish();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot read config " + file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::dump() const {
  json j;
  j["problem"] = json{{"name", problem}, {"b", b}};
  json m = json::array();
  for (Method x : methods) m.push_back(to_string(x));
  j["methods"] = m;
  j["thresholds"] = thresholds;
  j["grid"] = json{{"n_x", grid_nx}, {"n_t", grid_nt}};
  j["conditions"] = json{{"n_x", condition_nx}, {"n_t", condition_nt}};
  j["seeds"] = seeds;
  json subs = json::array();
  for (const auto& s : subdomains) subs.push_back(subdomain_json(s));
  j["subdomains"] = subs;
  j["whole_domain"] = subdomain_json(whole_domain_config());
  j["inverse"] = json{{"lambda_init", lambda_init},
                      {"label_eps", label_eps},
                      {"label_kmax", label_kmax},
                      {"target_subdomain", target_subdomain}};
  j["report_every"] = report_every;
  j["write_grids"] = write_grids;
  j["export_points"] = export_points;
  j["output_dir"] = output_dir;
  return j.dump(2) + "\n";
}

void ExperimentConfig::validate() const {
  wrap("problem.name", [&] { parse_problem_kind(problem); });
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (methods.empty()) throw ConfigError("methods: at least one method is required");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (methods[i] == methods[k]) throw ConfigError("methods: duplicate method " + std::string(to_string(methods[i])));
    }
  }
  if (grid_nx < 2 || grid_nt < 2) throw ConfigError("grid: n_x and n_t must be >= 2");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  const ProblemSpec p = make_problem();
  const Partition part = [&] {
    try {
      return partition(p.rect, p.group, thresholds);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("thresholds: ") + e.what());
    }
  }();
  for (Method m : methods) {
    const std::string where = std::string("method ") + to_string(m);
    if (m == Method::pinn || m == Method::inverse_pinn) {
      wrap("whole_domain", [&] { whole_domain_config().validate(m); });
    }
    wrap(where, [&] { training_config(m, seeds.front()).validate(part.size()); });
  }
}

ProblemSpec ExperimentConfig::make_problem() const { return sdpinn::make_problem(problem, b); }

const SubdomainConfig& ExperimentConfig::whole_domain_config() const {
  return whole_domain ? *whole_domain : subdomains.front();
}

TrainingConfig ExperimentConfig::training_config(Method m, std::uint64_t seed) const {
  TrainingConfig t;
  t.method = m;
  t.subdomains = subdomains;
  if (m == Method::pinn || m == Method::inverse_pinn) t.subdomains = {whole_domain_config()};
  t.condition_nx = condition_nx;
  t.condition_nt = condition_nt;
  t.seed = seed;
  t.lambda_init = lambda_init;
  t.label_eps = label_eps;
  t.label_kmax = label_kmax;
  t.target_subdomain = target_subdomain;
  t.report_every = report_every;
  return t;
}

fs::path default_output_root() {
  if (const char* env = std::getenv("SDPINN_OUTPUT_ROOT"); env != nullptr && *env != '\0') {
    return fs::path(env);
  }
  return fs::path("runs");
}

// ---------------------------------------------------------------------------
// Summary CSV

void write_summary_header(std::ostream& os, std::size_t subdomains) {
  os << "problem,b,method,seed,status,error";
  for (std::size_t i = 1; i <= subdomains; ++i) os << ",error_" << i;
  os << ",lambda,lambda_rel_error,iterations\n";
}

void write_summary_row(std::ostream& os, const SummaryRow& r) {
  os << r.problem << ',' << format_double(r.b) << ',' << r.method << ',' << r.seed << ','
     << clean_status(r.status) << ',' << format_double(r.error);
  for (const auto& e : r.sub_errors) os << ',' << opt_cell(e);
  os << ',' << opt_cell(r.lambda) << ',' << opt_cell(r.lambda_rel_error) << ',' << r.iterations
     << '\n';
}

std::vector<SummaryRow> read_summary(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot read " + file.string());
  std::string line;
  if (!std::getline(is, line)) throw ConfigError(file.string() + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 9 || header[0] != "problem" || header[5] != "error") {
    throw ConfigError(file.string() + ": not a summary file");
  }
  const std::size_t n_sub = header.size() - 9;
  std::vector<SummaryRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    const std::string where = file.string() + ":" + std::to_string(lineno);
    if (c.size() != header.size()) throw ConfigError(where + ": wrong column count");
    SummaryRow r;
    r.problem = c[0];
    r.b = parse_cell(c[1], where).value_or(0.0);
    r.method = c[2];
    try {
      r.seed = std::stoull(c[3]);
    } catch (const std::logic_error&) {
      throw ConfigError(where + ": bad seed");
    }
    r.status = c[4];
    r.error = parse_cell(c[5], where).value_or(std::nan(""));
    for (std::size_t i = 0; i < n_sub; ++i) r.sub_errors.push_back(parse_cell(c[6 + i], where));
    r.lambda = parse_cell(c[6 + n_sub], where);
    r.lambda_rel_error = parse_cell(c[7 + n_sub], where);
    r.iterations = static_cast<int>(parse_cell(c[8 + n_sub], where).value_or(0.0));
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Running

namespace {

struct RunSpec {
  Method method;
  std::uint64_t seed;
  fs::path dir;
};

struct Task {
  std::size_t run;
  int subdomain;  // -1: the whole run is one session
};

struct RunState {
  std::vector<SessionResult> sessions;
  std::vector<double> seconds;
  std::optional<InverseState> inverse;
  std::string error;
  std::mutex mutex;
};

void write_session_files(const fs::path& dir, const SessionResult& s, const std::string& tag,
                         std::span<const double> aux) {
  {
    auto os = open_out(dir / ("trace" + tag + ".csv"));
    s.trace.write_csv(os);
  }
  {
    auto os = open_out(dir / ("losses" + tag + ".csv"));
    s.reports.write_csv(os);
  }
  auto os = open_out(dir / ("params" + tag + ".txt"));
  write_checkpoint(os, s.arch, s.params, aux);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  if (options.workers < 1) throw ConfigError("workers must be >= 1");
  const ProblemSpec problem = config.make_problem();
  const Partition part = partition(problem.rect, problem.group, config.thresholds);
  const Partition whole = partition(problem.rect, problem.group, {});

  fs::path out = options.output_dir ? *options.output_dir : fs::path(config.output_dir);
  if (!options.output_dir && out.is_relative()) out = default_output_root() / out;
  fs::create_directories(out);
  {
    auto os = open_out(out / "config.resolved.json");
    os << config.dump();
  }

  std::vector<RunSpec> runs;
  for (Method m : config.methods) {
    for (std::uint64_t s : config.seeds) {
      const std::uint64_t seed = s + options.seed_offset;
      runs.push_back({m, seed, out / to_string(m) / ("seed_" + std::to_string(seed))});
    }
  }
  std::vector<RunState> states(runs.size());
  std::vector<Task> tasks;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (is_decomposed(runs[r].method)) {
      states[r].sessions.resize(part.size());
      states[r].seconds.resize(part.size());
      for (std::size_t p = 0; p < part.size(); ++p) tasks.push_back({r, static_cast<int>(p)});
    } else {
      tasks.push_back({r, -1});
    }
  }

  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (options.log == nullptr) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    *options.log << msg << std::endl;
  };

  auto execute = [&](const Task& task) {
    const RunSpec& run = runs[task.run];
    RunState& st = states[task.run];
    const TrainingConfig tc = config.training_config(run.method, run.seed);
    std::string label = std::string(to_string(run.method)) + " seed " + std::to_string(run.seed);
    if (task.subdomain >= 0) label += " sub-domain " + std::to_string(task.subdomain + 1);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      switch (run.method) {
        case Method::pinn: {
          SessionResult s = train_subdomain(problem, whole, 0, tc);
          std::lock_guard<std::mutex> lock(st.mutex);
          st.sessions = {std::move(s)};
          break;
        }
        case Method::sdpinn:
        case Method::sdpinn_isc: {
          SessionResult s = train_subdomain(problem, part, task.subdomain, tc);
          std::lock_guard<std::mutex> lock(st.mutex);
          st.sessions[static_cast<std::size_t>(task.subdomain)] = std::move(s);
          break;
        }
        case Method::xpinn: {
          auto s = train_xpinn(problem, part, tc);
          std::lock_guard<std::mutex> lock(st.mutex);
          st.sessions = std::move(s);
          break;
        }
        case Method::inverse:
        case Method::inverse_pinn: {
          InverseResult r = train_inverse(problem, part, tc);
          std::lock_guard<std::mutex> lock(st.mutex);
          st.inverse = r.state;
          st.sessions = {std::move(r.session)};
          break;
        }
      }
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(st.mutex);
      if (st.error.empty()) st.error = e.what();
      log(label + ": error: " + e.what());
      return;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    {
      std::lock_guard<std::mutex> lock(st.mutex);
      if (task.subdomain >= 0) {
        st.seconds[static_cast<std::size_t>(task.subdomain)] = secs;
      } else {
        st.seconds.assign(st.sessions.size(), secs);
      }
    }
    std::ostringstream msg;
    msg << label << ": done in " << std::fixed << std::setprecision(1) << secs << " s";
    log(msg.str());
  };

  if (options.workers == 1 || tasks.size() == 1) {
    for (const Task& t : tasks) execute(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int n = std::min<int>(options.workers, static_cast<int>(tasks.size()));
    for (int w = 0; w < n; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) execute(tasks[i]);
      });
    }
    for (auto& th : pool) th.join();
  }

  // Merge in a fixed order, independent of scheduling.
  ExperimentResult result;
  result.directory = out;
  auto timing = open_out(out / "timing.csv");
  timing << "method,seed,subdomain,seconds,iterations\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const RunSpec& run = runs[r];
    RunState& st = states[r];
    SummaryRow row;
    row.problem = problem.name();
    row.b = problem.kind == ProblemKind::kdv ? problem.amplitude : 0.0;
    row.method = to_string(run.method);
    row.seed = run.seed;
    row.sub_errors.assign(part.size(), std::nullopt);
    if (!st.error.empty()) {
      row.status = "error: " + st.error;
      row.error = std::nan("");
      result.rows.push_back(std::move(row));
      continue;
    }
    fs::create_directories(run.dir);
    std::vector<TrainedNetwork> nets;
    std::vector<std::string> failures;
    for (std::size_t i = 0; i < st.sessions.size(); ++i) {
      const SessionResult& s = st.sessions[i];
      nets.push_back({s.arch, s.params});
      if (s.failed) failures.push_back(s.failure);
      const std::string tag = st.sessions.size() == 1 ? "" : "_sd" + std::to_string(i + 1);
      std::vector<double> aux;
      if (s.lambda) aux.push_back(*s.lambda);
      write_session_files(run.dir, s, tag, aux);
      timing << row.method << ',' << run.seed << ',' << (st.sessions.size() == 1 ? 0 : i + 1) << ','
             << format_double(st.seconds[i]) << ',' << s.trace.iterations() << '\n';
      row.iterations = std::max(row.iterations, s.trace.iterations());
    }
    if (!failures.empty()) row.status = "failed: " + failures.front();

    const SolutionGrid grid = stitch(nets, part, problem, config.grid_nx, config.grid_nt);
    if (is_inverse(run.method)) {
      const int target = config.target_subdomain;
      row.error = l2_relative_error(grid, target);
      row.sub_errors[static_cast<std::size_t>(target)] = row.error;
      row.lambda = st.inverse->lambda;
      row.lambda_rel_error = st.inverse->relative_error();
    } else {
      row.error = l2_relative_error(grid);
      for (std::size_t p = 0; p < part.size(); ++p) {
        row.sub_errors[p] = l2_relative_error(grid, static_cast<int>(p));
      }
    }
    if (config.write_grids) {
      auto os = open_out(run.dir / "grid.csv");
      grid.write_csv(os);
    }
    if (config.export_points) {
      const TrainingConfig tc = config.training_config(run.method, run.seed);
      std::vector<PointRecord> recs;
      const bool single = run.method == Method::pinn || run.method == Method::inverse_pinn;
      const Partition& pp = single ? whole : part;
      const std::size_t first = run.method == Method::inverse ? static_cast<std::size_t>(config.target_subdomain) : 0;
      const std::size_t last = run.method == Method::inverse ? first + 1 : pp.size();
      for (std::size_t p = first; p < last; ++p) {
        const SubdomainData d = prepare_subdomain_data(problem, pp, static_cast<int>(p),
                                                       tc.for_subdomain(p), tc);
        const int idx = static_cast<int>(p) + 1;
        for (const auto& q : d.conditions) recs.push_back({q.x, q.t, q.u, "condition", idx});
        for (const auto& q : d.interface) recs.push_back({q.x, q.t, q.u, "interface", idx});
        for (const auto& q : d.collocation) {
          recs.push_back({q.x, q.t, exact_solution(problem, q.x, q.t), "collocation", idx});
        }
      }
      if (is_inverse(run.method)) {
        const int target = config.target_subdomain;
        for (const auto& q : interior_labels_for(problem, part, target,
                                                 tc.for_subdomain(static_cast<std::size_t>(target)), tc)) {
          recs.push_back({q.x, q.t, q.u, "interior_label", target + 1});
        }
      }
      auto os = open_out(run.dir / "points.csv");
      write_point_records(os, recs);
    }
    result.rows.push_back(std::move(row));
  }

  auto summary = open_out(out / "summary.csv");
  write_summary_header(summary, part.size());
  for (const auto& row : result.rows) write_summary_row(summary, row);
  return result;
}

// ---------------------------------------------------------------------------
// Reports

std::vector<ReportGroup> emit_report(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::exists(dir / "summary.csv")) files.push_back(dir / "summary.csv");
  if (fs::is_directory(dir)) {
    std::vector<fs::path> subs;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_directory() && fs::exists(e.path() / "summary.csv")) subs.push_back(e.path() / "summary.csv");
    }
    std::sort(subs.begin(), subs.end());
    files.insert(files.end(), subs.begin(), subs.end());
  }
  std::vector<SummaryRow> rows;
  for (const auto& f : files) {
    auto r = read_summary(f);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (rows.empty()) throw ConfigError("no summary rows under " + dir.string());

  std::map<std::tuple<std::string, double, std::string>, std::vector<SummaryRow>> by_key;
  for (auto& r : rows) by_key[{r.problem, r.b, r.method}].push_back(std::move(r));

  std::vector<ReportGroup> groups;
  std::size_t n_sub = 0;
  for (auto& [key, list] : by_key) {
    ReportGroup g;
    std::tie(g.problem, g.b, g.method) = key;
    std::stable_sort(list.begin(), list.end(),
                     [](const SummaryRow& a, const SummaryRow& b) { return a.seed < b.seed; });
    g.rows = std::move(list);
    std::size_t subs = 0;
    for (const auto& r : g.rows) subs = std::max(subs, r.sub_errors.size());
    n_sub = std::max(n_sub, subs);

    auto aggregate = [&](auto get, auto reduce) -> std::optional<double> {
      std::vector<double> v;
      for (const auto& r : g.rows) {
        const std::optional<double> x = get(r);
        if (x && std::isfinite(*x)) v.push_back(*x);
      }
      if (v.empty()) return std::nullopt;
      return reduce(v);
    };
    auto fill = [&](SummaryRow& out, auto reduce, const char* label) {
      out.problem = g.problem;
      out.b = g.b;
      out.method = g.method;
      out.status = label;
      out.error = aggregate([](const SummaryRow& r) { return std::optional<double>(r.error); }, reduce)
                      .value_or(std::nan(""));
      out.sub_errors.assign(subs, std::nullopt);
      for (std::size_t i = 0; i < subs; ++i) {
        out.sub_errors[i] = aggregate(
            [i](const SummaryRow& r) {
              return i < r.sub_errors.size() ? r.sub_errors[i] : std::nullopt;
            },
            reduce);
      }
      out.lambda = aggregate([](const SummaryRow& r) { return r.lambda; }, reduce);
      out.lambda_rel_error = aggregate([](const SummaryRow& r) { return r.lambda_rel_error; }, reduce);
      std::vector<double> its;
      for (const auto& r : g.rows) its.push_back(r.iterations);
      out.iterations = static_cast<int>(std::lround(reduce(its)));
    };
    fill(g.mean, mean_of, "mean");
    fill(g.median, median_of, "median");
    groups.push_back(std::move(g));
  }

  auto os = open_out(dir / "report.csv");
  os << "problem,b,method,seed,status,error";
  for (std::size_t i = 1; i <= n_sub; ++i) os << ",error_" << i;
  os << ",lambda,lambda_rel_error,iterations\n";
  auto line = [&](const SummaryRow& r, const std::string& seed) {
    os << r.problem << ',' << format_double(r.b) << ',' << r.method << ',' << seed << ','
       << clean_status(r.status) << ',' << format_double(r.error);
    for (std::size_t i = 0; i < n_sub; ++i) {
      os << ',' << (i < r.sub_errors.size() ? opt_cell(r.sub_errors[i]) : std::string());
    }
    os << ',' << opt_cell(r.lambda) << ',' << opt_cell(r.lambda_rel_error) << ',' << r.iterations
       << '\n';
  };
  for (const auto& g : groups) {
    for (const auto& r : g.rows) line(r, std::to_string(r.seed));
    line(g.mean, "mean");
    line(g.median, "median");
  }
  return groups;
}

void print_report(std::ostream& os, const std::vector<ReportGroup>& groups) {
  auto sci = [](const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return std::string("-");
    std::ostringstream s;
    s << std::scientific << std::setprecision(4) << *v;
    return s.str();
  };
  os << std::left << std::setw(6) << "problem" << ' ' << std::setw(6) << "b" << ' ' << std::setw(13)
     << "method" << ' ' << std::setw(5) << "runs" << ' ' << std::setw(12) << "error mean" << ' '
     << std::setw(12) << "error median" << ' ' << "per sub-domain means / λ rel. error\n";
  for (const auto& g : groups) {
    std::ostringstream b;
    b << g.b;
    os << std::left << std::setw(7) << g.problem << std::setw(7) << b.str() << std::setw(14)
       << g.method << std::setw(6) << g.rows.size() << std::setw(13) << sci(g.mean.error)
       << std::setw(13) << sci(g.median.error);
    for (std::size_t i = 0; i < g.mean.sub_errors.size(); ++i) {
      os << " e" << i + 1 << '=' << sci(g.mean.sub_errors[i]);
    }
    if (g.mean.lambda_rel_error) {
      os << " λ=" << sci(g.mean.lambda) << " rel=" << sci(g.mean.lambda_rel_error)
         << " (median " << sci(g.median.lambda_rel_error) << ")";
    }
    os << '\n';
  }
}

fs::path sweep(const ExperimentConfig& config, const std::string& param,
               const std::vector<double>& values, const RunOptions& options) {
  if (param != "b") throw ConfigError("sweep: unsupported parameter '" + param + "' (only b)");
  if (values.empty()) throw ConfigError("sweep: no values given");
  fs::path out = options.output_dir ? *options.output_dir : fs::path(config.output_dir);
  if (!options.output_dir && out.is_relative()) out = default_output_root() / out;
  fs::create_directories(out);
  std::vector<SummaryRow> all;
  for (double v : values) {
    ExperimentConfig c = config;
    c.b = v;
    RunOptions o = options;
    std::ostringstream name;
    name << param << '_' << v;
    o.output_dir = out / name.str();
    auto r = run_experiment(c, o);
    all.insert(all.end(), r.rows.begin(), r.rows.end());
  }
  std::size_t n_sub = 0;
  for (const auto& r : all) n_sub = std::max(n_sub, r.sub_errors.size());
  auto os = open_out(out / "sweep.csv");
  write_summary_header(os, n_sub);
  for (auto r : all) {
    r.sub_errors.resize(n_sub);
    write_summary_row(os, r);
  }
  return out;
}

}  // namespace sdpinn
