#include "sdpinn/training.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "sdpinn/csv.hpp"
#include "sdpinn/errors.hpp"

namespace sdpinn {

namespace {

// Stream tags for mix_seed.
enum : std::uint64_t {
  kTagInit = 1,
  kTagConditions = 2,
  kTagCollocation = 3,
  kTagIsc = 4,
  kTagInterior = 5,
};

constexpr const char* kMseU = "MSE_u";
constexpr const char* kMseF = "MSE_f";
constexpr const char* kMseG = "MSE_g";
constexpr const char* kMseR = "MSE_R";
constexpr const char* kMseUAvg = "MSE_u_avg";
constexpr const char* kMseP = "MSE_p";

std::vector<Point> positions(std::span<const LabeledPoint> pts) {
  std::vector<Point> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back({p.x, p.t});
  return out;
}

// Adds c * (partials of the residual) into slot i of a full-order adjoint batch.
void add_residual_adjoint(JetBatch& adj, Eigen::Index i, double c, const ResidualLinearization& r) {
  adj.u[i] += c * r.d_u;
  adj.u_t[i] += c * r.d_ut;
  adj.u_x[i] += c * r.d_ux;
  adj.u_xx[i] += c * r.d_uxx;
  adj.u_xxx[i] += c * r.d_uxxx;
}

// Mean squared misfit of a value batch against labels; accumulates the adjoint.
double misfit_term(const JetBatch& jet, const std::vector<double>& labels, double weight,
                   JetBatch& adj) {
  const Eigen::Index n = jet.size();
  if (n == 0) return 0.0;
  double sum = 0.0;
  const double c = 2.0 * weight / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = jet.u[i] - labels[static_cast<std::size_t>(i)];
    sum += r * r;
    adj.u[i] += c * r;
  }
  return sum / static_cast<double>(n);
}

double pde_term(ProblemKind kind, const JetBatch& jet, const std::vector<double>& mu,
                double lambda, double weight, JetBatch& adj, double& d_lambda) {
  const Eigen::Index n = jet.size();
  if (n == 0) return 0.0;
  double sum = 0.0;
  const double c = 2.0 * weight / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ResidualLinearization r =
        linearize_residual(kind, jet.at(i), mu[static_cast<std::size_t>(i)], lambda);
    sum += r.f * r.f;
    add_residual_adjoint(adj, i, c * r.f, r);
    d_lambda += c * r.f * r.d_lambda;
  }
  return sum / static_cast<double>(n);
}

std::vector<double> forcing_at(const ProblemSpec& problem, std::span<const Point> pts) {
  std::vector<double> mu;
  mu.reserve(pts.size());
  for (const Point& p : pts) mu.push_back(forcing(problem, p.x, p.t));
  return mu;
}

void check_count(int value, int min, const std::string& name) {
  if (value < min) throw ConfigError(name + " must be >= " + std::to_string(min));
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::pinn: return "pinn";
    case Method::xpinn: return "xpinn";
    case Method::sdpinn: return "sdpinn";
    case Method::sdpinn_isc: return "sdpinn_isc";
    case Method::inverse: return "inverse";
    case Method::inverse_pinn: return "inverse_pinn";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::pinn, Method::xpinn, Method::sdpinn, Method::sdpinn_isc,
                   Method::inverse, Method::inverse_pinn}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

bool is_inverse(Method m) { return m == Method::inverse || m == Method::inverse_pinn; }

bool is_decomposed(Method m) { return m == Method::sdpinn || m == Method::sdpinn_isc; }

void LossWeights::validate() const {
  for (double w : {w_u, w_f, w_g, w_I, w_p}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and >= 0");
  }
}

void SubdomainConfig::validate(Method m) const {
  const Architecture shape(layers);  // throws on a bad shape
  (void)shape;
  check_count(n_u, 1, "n_u");
  check_count(n_f, 1, "n_f");
  check_count(n_g, 0, "n_g");
  check_count(n_interface, 2, "n_interface");
  if (is_inverse(m)) check_count(n_p, 1, "n_p");
  optim.validate();
  weights.validate();
}

const SubdomainConfig& TrainingConfig::for_subdomain(std::size_t i) const {
  return subdomains.size() == 1 ? subdomains.front() : subdomains.at(i);
}

void TrainingConfig::validate(std::size_t subdomain_count) const {
  if (subdomains.empty()) throw ConfigError("at least one sub-domain config is required");
  if (subdomains.size() != 1 && subdomains.size() != subdomain_count) {
    throw ConfigError("expected 1 or " + std::to_string(subdomain_count) +
                      " sub-domain configs, got " + std::to_string(subdomains.size()));
  }
  for (const auto& sc : subdomains) sc.validate(method);
  check_count(condition_nx, 2, "condition_nx");
  check_count(condition_nt, 2, "condition_nt");
  check_count(report_every, 1, "report_every");
  if (!std::isfinite(lambda_init)) throw ConfigError("lambda_init must be finite");
  if (is_inverse(method)) {
    if (target_subdomain < 0 || static_cast<std::size_t>(target_subdomain) >= subdomain_count) {
      throw ConfigError("target_subdomain out of range");
    }
    check_count(label_kmax, 1, "label_kmax");
    if (!std::isfinite(label_eps) || label_eps == 0.0) throw ConfigError("label_eps must be nonzero");
  }
}

LossReport LossReport::from_terms(const TermList& terms, const LossWeights& w) {
  LossReport r;
  for (const auto& [name, v] : terms) {
    if (name == kMseU) r.mse_u = v;
    else if (name == kMseF) r.mse_f = v;
    else if (name == kMseG) r.mse_g = v;
    else if (name == kMseR) r.mse_r = v;
    else if (name == kMseUAvg) r.mse_u_avg = v;
    else if (name == kMseP) r.mse_p = v;
  }
  r.total = w.w_u * r.mse_u.value_or(0.0) + w.w_f * r.mse_f.value_or(0.0) +
            w.w_g * r.mse_g.value_or(0.0) + w.w_I * r.mse_r.value_or(0.0) +
            w.w_I * r.mse_u_avg.value_or(0.0) + w.w_p * r.mse_p.value_or(0.0);
  return r;
}

void ReportHistory::write_csv(std::ostream& os) const {
  os << "iteration,total,MSE_u,MSE_f,MSE_g,MSE_R,MSE_u_avg,MSE_p\n";
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& [it, r] : rows) {
    os << it << ',' << format_double(r.total) << ',' << cell(r.mse_u) << ',' << cell(r.mse_f) << ','
       << cell(r.mse_g) << ',' << cell(r.mse_r) << ',' << cell(r.mse_u_avg) << ','
       << cell(r.mse_p) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Data

SubdomainData prepare_subdomain_data(const ProblemSpec& problem, const Partition& part,
                                     int subdomain, const SubdomainConfig& sc,
                                     const TrainingConfig& config) {
  const SubDomain& sd = part.subdomains().at(static_cast<std::size_t>(subdomain));
  const auto idx = static_cast<std::uint64_t>(subdomain);
  SubdomainData data;
  data.subdomain = subdomain;
  data.arch = Architecture(sc.layers, InputScaling::to_unit_box(sd.bounds.x_min, sd.bounds.x_max,
                                                                sd.bounds.t_min, sd.bounds.t_max));

  std::vector<ConditionPoint> grid =
      discretize_conditions(problem, part, sd, config.condition_nx, config.condition_nt);
  Rng cond_rng(mix_seed(config.seed, idx, kTagConditions));
  cond_rng.shuffle(grid);
  const std::size_t n_u = std::min(grid.size(), static_cast<std::size_t>(sc.n_u));
  for (std::size_t i = 0; i < n_u; ++i) data.conditions.push_back({grid[i].x, grid[i].t, grid[i].u});

  const Method m = config.method;
  if (m == Method::sdpinn || m == Method::sdpinn_isc || m == Method::inverse) {
    for (const ConditionSegment& seg : sd.segments) {
      if (seg.kind != SegmentKind::interface) continue;
      auto pts = interface_points(part.group(), problem, seg.level, part.rect(), sc.n_interface - 1);
      data.interface.insert(data.interface.end(), pts.begin(), pts.end());
    }
  }
  if (data.conditions.empty() && data.interface.empty()) {
    throw ConfigError("sub-domain " + std::to_string(subdomain) + " has no labeled points");
  }

  data.collocation =
      sample_collocation_lhs(part, sd, sc.n_f, mix_seed(config.seed, idx, kTagCollocation));
  if (m == Method::sdpinn_isc && sc.n_g > 0 && sc.n_g != sc.n_f) {
    data.isc = sample_collocation_lhs(part, sd, sc.n_g, mix_seed(config.seed, idx, kTagIsc));
  }
  return data;
}

std::vector<LabeledPoint> generate_interior_labels(const SymmetryGroup& group,
                                                   std::span<const ConditionPoint> seeds,
                                                   double eps, int k_max, const Partition& part,
                                                   const SubDomain& sd) {
  group.check_parameter(eps);
  if (k_max < 1) throw ConfigError("label_kmax must be >= 1");
  std::vector<LabeledPoint> out;
  for (const ConditionPoint& s : seeds) {
    for (double e : {eps, group.inverse(eps)}) {
      for (int k = 1; k <= k_max; ++k) {
        const LabeledPoint q = apply_group(group, {s.x, s.t, s.u}, e, k);
        if (part.contains(sd, q.x, q.t)) out.push_back(q);
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const LabeledPoint& a, const LabeledPoint& b) {
    return a.x != b.x ? a.x < b.x : a.t < b.t;
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const LabeledPoint& a, const LabeledPoint& b) {
                          return a.x == b.x && a.t == b.t;
                        }),
            out.end());
  if (out.empty()) {
    throw ConfigError("sub-domain " + std::to_string(sd.index) + ": no interior labels generated");
  }
  return out;
}

std::vector<LabeledPoint> interior_labels_for(const ProblemSpec& problem, const Partition& part,
                                              int subdomain, const SubdomainConfig& sc,
                                              const TrainingConfig& config) {
  const SubDomain& sd = part.subdomains().at(static_cast<std::size_t>(subdomain));
  const auto seeds =
      discretize_conditions(problem, part, sd, config.condition_nx, config.condition_nt);
  std::vector<LabeledPoint> all =
      generate_interior_labels(part.group(), seeds, config.label_eps, config.label_kmax, part, sd);
  Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(subdomain), kTagInterior));
  rng.shuffle(all);
  if (all.size() > static_cast<std::size_t>(sc.n_p)) all.resize(static_cast<std::size_t>(sc.n_p));
  return all;
}

// ---------------------------------------------------------------------------
// Objectives

SubdomainLoss::SubdomainLoss(const ProblemSpec& problem, const SubdomainData& data, Method method,
                             const LossWeights& weights, double fixed_lambda)
    : problem_(problem),
      data_(data),
      w_(weights),
      use_isc_(method == Method::sdpinn_isc),
      train_lambda_(is_inverse(method)),
      fixed_lambda_(fixed_lambda) {
  for (const auto& p : data.conditions) labels_.push_back(p.u);
  for (const auto& p : data.interface) labels_.push_back(p.u);
  mu_ = forcing_at(problem, data.collocation);
  for (const auto& p : data.interior) interior_labels_.push_back(p.u);
  if (train_lambda_ && data.interior.empty()) throw ConfigError("MSE_p needs interior labels");
}

std::vector<BatchSpec> SubdomainLoss::batches() const {
  std::vector<BatchSpec> b;
  std::vector<Point> labeled = positions(data_.conditions);
  const auto iface = positions(data_.interface);
  labeled.insert(labeled.end(), iface.begin(), iface.end());
  b.push_back({0, std::move(labeled), JetOrder::value});
  b.push_back({0, data_.collocation, JetOrder::full});
  if (use_isc_ && !data_.isc.empty()) b.push_back({0, data_.isc, JetOrder::full});
  if (train_lambda_) b.push_back({0, positions(data_.interior), JetOrder::value});
  return b;
}

double SubdomainLoss::evaluate(std::span<const JetBatch> jets, std::span<const double> aux,
                               std::span<JetBatch> adjoints, std::span<double> aux_grad,
                               TermList* terms) const {
  const double lambda = train_lambda_ ? aux[0] : fixed_lambda_;
  double d_lambda = 0.0;
  const double mse_u = misfit_term(jets[0], labels_, w_.w_u, adjoints[0]);
  const double mse_f = pde_term(problem_.kind, jets[1], mu_, lambda, w_.w_f, adjoints[1], d_lambda);
  double total = w_.w_u * mse_u + w_.w_f * mse_f;
  if (terms) {
    terms->emplace_back(kMseU, mse_u);
    terms->emplace_back(kMseF, mse_f);
  }
  std::size_t next = 2;
  if (use_isc_) {
    const bool separate = !data_.isc.empty();
    const std::size_t b = separate ? next++ : 1;
    const std::vector<Point>& pts = separate ? data_.isc : data_.collocation;
    const JetBatch& jet = jets[b];
    JetBatch& adj = adjoints[b];
    const Eigen::Index n = jet.size();
    double sum = 0.0;
    const double c = 2.0 * w_.w_g / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Point& p = pts[static_cast<std::size_t>(i)];
      const IscLinearization g = isc_linearize(problem_.group, jet.at(i), p.x, p.t);
      sum += g.g * g.g;
      adj.u[i] += c * g.g * g.d_u;
      adj.u_x[i] += c * g.g * g.d_ux;
      adj.u_t[i] += c * g.g * g.d_ut;
    }
    const double mse_g = sum / static_cast<double>(n);
    total += w_.w_g * mse_g;
    if (terms) terms->emplace_back(kMseG, mse_g);
  }
  if (train_lambda_) {
    const std::size_t b = next++;
    const double mse_p = misfit_term(jets[b], interior_labels_, w_.w_p, adjoints[b]);
    total += w_.w_p * mse_p;
    if (terms) terms->emplace_back(kMseP, mse_p);
    aux_grad[0] += d_lambda;
  }
  return total;
}

XpinnLoss::XpinnLoss(const ProblemSpec& problem, std::vector<SubdomainData> data,
                     std::vector<Interface> interfaces, const LossWeights& weights)
    : problem_(problem), data_(std::move(data)), interfaces_(std::move(interfaces)), w_(weights) {
  for (const auto& d : data_) {
    std::vector<double> l;
    for (const auto& p : d.conditions) l.push_back(p.u);
    labels_.push_back(std::move(l));
    mu_.push_back(forcing_at(problem, d.collocation));
  }
  for (const auto& f : interfaces_) {
    if (f.lower < 0 || f.upper < 0 || static_cast<std::size_t>(std::max(f.lower, f.upper)) >= data_.size()) {
      throw ConfigError("interface refers to a missing sub-domain");
    }
    interface_mu_.push_back(forcing_at(problem, f.points));
  }
}

std::vector<BatchSpec> XpinnLoss::batches() const {
  std::vector<BatchSpec> b;
  for (std::size_t p = 0; p < data_.size(); ++p) {
    b.push_back({p, positions(data_[p].conditions), JetOrder::value});
    b.push_back({p, data_[p].collocation, JetOrder::full});
  }
  for (const auto& f : interfaces_) {
    b.push_back({static_cast<std::size_t>(f.lower), f.points, JetOrder::full});
    b.push_back({static_cast<std::size_t>(f.upper), f.points, JetOrder::full});
  }
  return b;
}

double XpinnLoss::evaluate(std::span<const JetBatch> jets, std::span<const double>,
                           std::span<JetBatch> adjoints, std::span<double>, TermList* terms) const {
  const double lambda = problem_.lambda;
  double unused = 0.0;
  double mse_u = 0.0, mse_f = 0.0, mse_r = 0.0, mse_avg = 0.0;
  const std::size_t np = data_.size();
  for (std::size_t p = 0; p < np; ++p) {
    mse_u += misfit_term(jets[2 * p], labels_[p], w_.w_u, adjoints[2 * p]);
    mse_f += pde_term(problem_.kind, jets[2 * p + 1], mu_[p], lambda, w_.w_f, adjoints[2 * p + 1],
                      unused);
  }
  // Each interface enters the loss of both neighbours: MSE_R twice, and one
  // average-misfit term per side.
  for (std::size_t k = 0; k < interfaces_.size(); ++k) {
    const JetBatch& a = jets[2 * np + 2 * k];
    const JetBatch& b = jets[2 * np + 2 * k + 1];
    JetBatch& adj_a = adjoints[2 * np + 2 * k];
    JetBatch& adj_b = adjoints[2 * np + 2 * k + 1];
    const Eigen::Index n = a.size();
    if (n == 0) continue;
    const double inv_n = 1.0 / static_cast<double>(n);
    double sum_r = 0.0, sum_avg = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = interface_mu_[k][static_cast<std::size_t>(i)];
      const ResidualLinearization ra = linearize_residual(problem_.kind, a.at(i), mu, lambda);
      const ResidualLinearization rb = linearize_residual(problem_.kind, b.at(i), mu, lambda);
      const double dr = ra.f - rb.f;
      sum_r += dr * dr;
      const double c_r = w_.w_I * 4.0 * dr * inv_n;  // d(2·MSE_R)/d(f_a)
      add_residual_adjoint(adj_a, i, c_r, ra);
      add_residual_adjoint(adj_b, i, -c_r, rb);
      const double half = 0.5 * (a.u[i] - b.u[i]);
      sum_avg += half * half;
      const double c_avg = w_.w_I * 2.0 * half * inv_n;  // d(avg_a + avg_b)/d(u_a)
      adj_a.u[i] += c_avg;
      adj_b.u[i] -= c_avg;
    }
    mse_r += 2.0 * sum_r * inv_n;
    mse_avg += 2.0 * sum_avg * inv_n;
  }
  if (terms) {
    terms->emplace_back(kMseU, mse_u);
    terms->emplace_back(kMseF, mse_f);
    if (!interfaces_.empty()) {
      terms->emplace_back(kMseR, mse_r);
      terms->emplace_back(kMseUAvg, mse_avg);
    }
  }
  return w_.w_u * mse_u + w_.w_f * mse_f + w_.w_I * mse_r + w_.w_I * mse_avg;
}

// ---------------------------------------------------------------------------
// Sessions

namespace {

struct Optimized {
  ParameterVector x;
  OptTrace trace;
  ReportHistory reports;
  LossReport final_report;
  bool failed = false;
  std::string failure;
};

Optimized optimize(GradientEvaluator& eval, ParameterVector init, const OptimConfig& optim,
                   int report_every, const LossWeights& weights) {
  Optimized out;
  auto report = [&](const ParameterVector& x) {
    TermList terms;
    eval.loss(x, &terms);
    return LossReport::from_terms(terms, weights);
  };
  try {
    out.reports.rows.emplace_back(0, report(init));
    Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return eval(x, g); };
    IterationCallback cb = [&](int it, const Eigen::VectorXd& x, double) {
      if (it % report_every == 0) out.reports.rows.emplace_back(it, report(x));
    };
    MinimizeResult r = minimize(f, init, optim, cb);
    out.x = std::move(r.x);
    out.trace = std::move(r.trace);
    out.final_report = report(out.x);
    if (out.reports.rows.back().first != out.trace.iterations()) {
      out.reports.rows.emplace_back(out.trace.iterations(), out.final_report);
    }
  } catch (const NumericalFailure& e) {
    out.failed = true;
    out.failure = e.what();
    out.x = std::move(init);
  }
  return out;
}

SessionResult run_single(const ProblemSpec& problem, SubdomainData data, Method method,
                         const SubdomainConfig& sc, const TrainingConfig& config,
                         std::uint64_t init_stream) {
  SubdomainLoss objective(problem, data, method, sc.weights, problem.lambda);
  ModelLayout layout({data.arch}, objective.trains_lambda() ? 1 : 0);
  GradientEvaluator eval(layout, objective.batches(), objective);

  ParameterVector init(static_cast<Eigen::Index>(layout.total_size()));
  init.head(static_cast<Eigen::Index>(data.arch.parameter_count())) =
      init_xavier(data.arch, mix_seed(config.seed, init_stream, kTagInit));
  if (objective.trains_lambda()) init[init.size() - 1] = config.lambda_init;

  Optimized opt = optimize(eval, std::move(init), sc.optim, config.report_every, sc.weights);
  SessionResult res;
  res.subdomain = data.subdomain;
  res.arch = data.arch;
  res.params = opt.x.head(static_cast<Eigen::Index>(data.arch.parameter_count()));
  if (objective.trains_lambda()) res.lambda = opt.x[opt.x.size() - 1];
  res.trace = std::move(opt.trace);
  res.reports = std::move(opt.reports);
  res.final_report = opt.final_report;
  res.interface_labels = data.interface;
  res.failed = opt.failed;
  res.failure = std::move(opt.failure);
  return res;
}

}  // namespace

SessionResult train_subdomain(const ProblemSpec& problem, const Partition& part, int subdomain,
                              const TrainingConfig& config) {
  if (config.method == Method::xpinn || is_inverse(config.method)) {
    throw ConfigError(std::string("train_subdomain does not run method ") + to_string(config.method));
  }
  config.validate(part.size());
  if (subdomain < 0 || static_cast<std::size_t>(subdomain) >= part.size()) {
    throw ConfigError("sub-domain index out of range");
  }
  const SubdomainConfig& sc = config.for_subdomain(static_cast<std::size_t>(subdomain));
  return run_single(problem, prepare_subdomain_data(problem, part, subdomain, sc, config),
                    config.method, sc, config, static_cast<std::uint64_t>(subdomain));
}

double InverseState::relative_error() const {
  return std::abs(lambda - true_lambda) / std::abs(true_lambda);
}

InverseResult train_inverse(const ProblemSpec& problem, const Partition& part,
                            const TrainingConfig& config) {
  if (!is_inverse(config.method)) throw ConfigError("train_inverse needs an inverse method");
  config.validate(part.size());
  const int target = config.target_subdomain;
  const SubdomainConfig& sc = config.for_subdomain(static_cast<std::size_t>(target));
  SubdomainData data;
  if (config.method == Method::inverse) {
    data = prepare_subdomain_data(problem, part, target, sc, config);
  } else {
    const Partition whole = partition(part.rect(), part.group(), {});
    data = prepare_subdomain_data(problem, whole, 0, sc, config);
  }
  data.interior = interior_labels_for(problem, part, target, sc, config);
  InverseResult out;
  out.session = run_single(problem, std::move(data), config.method, sc, config,
                           static_cast<std::uint64_t>(target));
  out.state.true_lambda = problem.lambda;
  out.state.lambda = out.session.lambda.value_or(config.lambda_init);
  return out;
}

std::vector<SessionResult> train_xpinn(const ProblemSpec& problem, const Partition& part,
                                       const TrainingConfig& config) {
  if (config.method != Method::xpinn) throw ConfigError("train_xpinn needs method xpinn");
  config.validate(part.size());
  const SubdomainConfig& first = config.for_subdomain(0);
  for (std::size_t p = 1; p < part.size(); ++p) {
    const SubdomainConfig& sc = config.for_subdomain(p);
    if (!(sc.weights == first.weights)) {
      throw ConfigError("xpinn needs the same loss weights in every sub-domain");
    }
  }

  std::vector<SubdomainData> data;
  std::vector<Architecture> archs;
  for (std::size_t p = 0; p < part.size(); ++p) {
    data.push_back(prepare_subdomain_data(problem, part, static_cast<int>(p),
                                          config.for_subdomain(p), config));
    archs.push_back(data.back().arch);
  }
  std::vector<XpinnLoss::Interface> interfaces;
  for (std::size_t k = 0; k < part.levels().size(); ++k) {
    XpinnLoss::Interface f;
    f.lower = static_cast<int>(k);
    f.upper = static_cast<int>(k + 1);
    const int n = config.for_subdomain(k).n_interface;
    for (const auto& q : interface_points(part.group(), problem, part.levels()[k], part.rect(), n - 1)) {
      f.points.push_back({q.x, q.t});
    }
    interfaces.push_back(std::move(f));
  }

  XpinnLoss objective(problem, data, interfaces, first.weights);
  ModelLayout layout(archs, 0);
  GradientEvaluator eval(layout, objective.batches(), objective);
  ParameterVector init(static_cast<Eigen::Index>(layout.total_size()));
  for (std::size_t p = 0; p < part.size(); ++p) {
    init.segment(static_cast<Eigen::Index>(layout.offset(p)),
                 static_cast<Eigen::Index>(archs[p].parameter_count())) =
        init_xavier(archs[p], mix_seed(config.seed, p, kTagInit));
  }
  Optimized opt = optimize(eval, std::move(init), first.optim, config.report_every, first.weights);

  std::vector<SessionResult> out;
  for (std::size_t p = 0; p < part.size(); ++p) {
    SessionResult r;
    r.subdomain = static_cast<int>(p);
    r.arch = archs[p];
    r.params = opt.x.segment(static_cast<Eigen::Index>(layout.offset(p)),
                             static_cast<Eigen::Index>(archs[p].parameter_count()));
    r.trace = opt.trace;
    r.reports = opt.reports;
    r.final_report = opt.final_report;
    for (const ConditionSegment& seg : part[p].segments) {
      if (seg.kind != SegmentKind::interface) continue;
      auto pts = interface_points(part.group(), problem, seg.level, part.rect(),
                                  config.for_subdomain(p).n_interface - 1);
      r.interface_labels.insert(r.interface_labels.end(), pts.begin(), pts.end());
    }
    r.failed = opt.failed;
    r.failure = opt.failure;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

SolutionGrid stitch(std::span<const TrainedNetwork> networks, const Partition& part,
                    const ProblemSpec& problem, int n_x, int n_t) {
  if (n_x < 2 || n_t < 2) throw ConfigError("solution grid needs at least 2 points per axis");
  if (networks.size() != part.size() && networks.size() != 1) {
    throw ConfigError("stitch needs one network per sub-domain");
  }
  const DomainRect& r = part.rect();
  SolutionGrid g;
  g.n_x = n_x;
  g.n_t = n_t;
  for (int i = 0; i < n_x; ++i) g.x.push_back(r.x_min + (r.x_max - r.x_min) * i / (n_x - 1));
  for (int j = 0; j < n_t; ++j) g.t.push_back(r.t_min + (r.t_max - r.t_min) * j / (n_t - 1));
  const std::size_t total = static_cast<std::size_t>(n_x) * n_t;
  g.pred.resize(static_cast<Eigen::Index>(total));
  g.exact.resize(static_cast<Eigen::Index>(total));
  g.subdomain.resize(total);
  std::vector<std::vector<Point>> pts(part.size());
  std::vector<std::vector<std::size_t>> where(part.size());
  for (int j = 0; j < n_t; ++j) {
    for (int i = 0; i < n_x; ++i) {
      const std::size_t k = g.index(i, j);
      const Point p{g.x[static_cast<std::size_t>(i)], g.t[static_cast<std::size_t>(j)]};
      const int s = classify(p, part);
      g.subdomain[k] = s;
      g.exact[static_cast<Eigen::Index>(k)] = exact_solution(problem, p.x, p.t);
      pts[static_cast<std::size_t>(s)].push_back(p);
      where[static_cast<std::size_t>(s)].push_back(k);
    }
  }
  for (std::size_t s = 0; s < part.size(); ++s) {
    if (pts[s].empty()) continue;
    const TrainedNetwork& net = networks.size() == 1 ? networks[0] : networks[s];
    const Eigen::ArrayXd u = evaluate_values(net.params, net.arch, pts[s]);
    for (std::size_t q = 0; q < where[s].size(); ++q) {
      g.pred[static_cast<Eigen::Index>(where[s][q])] = u[static_cast<Eigen::Index>(q)];
    }
  }
  return g;
}

void SolutionGrid::write_csv(std::ostream& os) const {
  os << "x,t,pred,exact,abs_err,subdomain\n";
  for (int j = 0; j < n_t; ++j) {
    for (int i = 0; i < n_x; ++i) {
      const std::size_t k = index(i, j);
      const double p = pred[static_cast<Eigen::Index>(k)];
      const double e = exact[static_cast<Eigen::Index>(k)];
      os << format_double(x[static_cast<std::size_t>(i)]) << ','
         << format_double(t[static_cast<std::size_t>(j)]) << ',' << format_double(p) << ','
         << format_double(e) << ',' << format_double(std::abs(p - e)) << ',' << subdomain[k]
         << '\n';
    }
  }
}

double l2_relative_error(const SolutionGrid& grid, std::optional<int> subdomain) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < grid.subdomain.size(); ++k) {
    if (subdomain && grid.subdomain[k] != *subdomain) continue;
    const double e = grid.exact[static_cast<Eigen::Index>(k)];
    const double d = grid.pred[static_cast<Eigen::Index>(k)] - e;
    num += d * d;
    den += e * e;
  }
  if (den == 0.0) throw DomainError("L2 relative error is undefined for a zero exact solution");
  return std::sqrt(num / den);
}

double interface_discontinuity(const TrainedNetwork& a, const TrainedNetwork& b,
                               const SymmetryGroup& group, const DomainRect& rect, double level,
                               int n_probes) {
  if (n_probes < 2) throw ConfigError("interface_discontinuity needs at least 2 probes");
  const LevelSetSpan span = level_set_span(group, rect, level);
  const double eps = group.from_canonical(span.canonical_span / (n_probes - 1));
  std::vector<Point> pts;
  for (const auto& q : orbit(group, {span.seed.x, span.seed.t, 0.0}, eps, n_probes - 1)) {
    pts.push_back({q.x, q.t});
  }
  const Eigen::ArrayXd ua = evaluate_values(a.params, a.arch, pts);
  const Eigen::ArrayXd ub = evaluate_values(b.params, b.arch, pts);
  return (ua - ub).abs().maxCoeff();
}

double rms_misfit(const TrainedNetwork& net, std::span<const LabeledPoint> labels) {
  if (labels.empty()) return 0.0;
  const Eigen::ArrayXd u = evaluate_values(net.params, net.arch, positions(labels));
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double d = u[static_cast<Eigen::Index>(i)] - labels[i].u;
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(labels.size()));
}

// ---------------------------------------------------------------------------
// Checkpoints

void write_checkpoint(std::ostream& os, const Architecture& arch, const ParameterVector& params,
                      std::span<const double> aux) {
  check_parameter_count(arch, static_cast<std::size_t>(params.size()));
  os << "sdpinn-checkpoint 1\n";
  os << "widths " << arch.widths.size();
  for (int w : arch.widths) os << ' ' << w;
  os << "\nscaling " << format_double(arch.input.x_center) << ' ' << format_double(arch.input.x_scale)
     << ' ' << format_double(arch.input.t_center) << ' ' << format_double(arch.input.t_scale)
     << "\naux " << aux.size();
  for (double v : aux) os << ' ' << format_double(v);
  os << "\nparams " << params.size() << '\n';
  for (Eigen::Index i = 0; i < params.size(); ++i) os << format_double(params[i]) << '\n';
}

Checkpoint read_checkpoint(std::istream& is) {
  auto expect = [&](const std::string& word) {
    std::string got;
    if (!(is >> got) || got != word) throw ConfigError("checkpoint: expected '" + word + "'");
  };
  auto number = [&]() {
    std::string tok;
    if (!(is >> tok)) throw ConfigError("checkpoint: truncated file");
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw ConfigError("checkpoint: bad number '" + tok + "'");
      return v;
    } catch (const std::logic_error&) {
      throw ConfigError("checkpoint: bad number '" + tok + "'");
    }
  };
  auto count = [&]() {
    const double v = number();
    if (v < 0 || v != std::floor(v) || v > 1e9) throw ConfigError("checkpoint: bad count");
    return static_cast<std::size_t>(v);
  };
  expect("sdpinn-checkpoint");
  if (count() != 1) throw ConfigError("checkpoint: unsupported version");
  expect("widths");
  std::vector<int> widths(count());
  for (int& w : widths) w = static_cast<int>(count());
  expect("scaling");
  InputScaling s;
  s.x_center = number();
  s.x_scale = number();
  s.t_center = number();
  s.t_scale = number();
  Checkpoint cp;
  cp.arch = Architecture(widths, s);
  expect("aux");
  cp.aux.resize(count());
  for (double& v : cp.aux) v = number();
  expect("params");
  const std::size_t n = count();
  check_parameter_count(cp.arch, n);
  cp.params.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) cp.params[static_cast<Eigen::Index>(i)] = number();
  return cp;
}

}  // namespace sdpinn
