#include <cmath>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "sdpinn/errors.hpp"
#include "sdpinn/training.hpp"

using namespace sdpinn;

namespace {

JetBatch exact_batch(const ProblemSpec& p, const std::vector<Point>& pts) {
  JetBatch b;
  const auto n = static_cast<Eigen::Index>(pts.size());
  b.u.resize(n);
  b.u_t.resize(n);
  b.u_x.resize(n);
  b.u_xx.resize(n);
  b.u_xxx.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Jet j = exact_jet(p, pts[static_cast<std::size_t>(i)].x, pts[static_cast<std::size_t>(i)].t);
    b.u[i] = j.u;
    b.u_t[i] = j.u_t;
    b.u_x[i] = j.u_x;
    b.u_xx[i] = j.u_xx;
    b.u_xxx[i] = j.u_xxx;
  }
  return b;
}

JetBatch value_batch(std::initializer_list<double> u) {
  JetBatch b;
  b.order = JetOrder::value;
  b.u = Eigen::Map<const Eigen::ArrayXd>(u.begin(), static_cast<Eigen::Index>(u.size()));
  return b;
}

// Evaluates an objective on externally supplied jets.
double eval_terms(const JetObjective& obj, const std::vector<JetBatch>& jets, std::vector<double> aux,
                  TermList& terms) {
  std::vector<JetBatch> adj;
  for (const auto& j : jets) adj.push_back(JetBatch::zeros_like(j));
  std::vector<double> aux_grad(aux.size(), 0.0);
  return obj.evaluate(jets, aux, adj, aux_grad, &terms);
}

double term(const TermList& terms, const std::string& name) {
  for (const auto& [n, v] : terms) {
    if (n == name) return v;
  }
  FAIL("missing term " << name);
  return 0.0;
}

TrainingConfig small_config(Method m, int iters, std::uint64_t seed = 1) {
  TrainingConfig c;
  c.method = m;
  c.seed = seed;
  SubdomainConfig sc;
  sc.layers = {2, 8, 8, 1};
  sc.n_u = 40;
  sc.n_f = 100;
  sc.n_interface = 21;
  sc.n_p = 50;
  sc.optim.max_iters = iters;
  c.subdomains = {sc};
  c.report_every = 5;
  return c;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("method names") {
    for (Method m : {Method::pinn, Method::xpinn, Method::sdpinn, Method::sdpinn_isc, Method::inverse,
                     Method::inverse_pinn}) {
      CHECK(parse_method(to_string(m)) == m);
    }
    CHECK_THROWS_AS(parse_method("sdpinn-isc2"), ConfigError);
    CHECK(is_decomposed(Method::sdpinn));
    CHECK_FALSE(is_decomposed(Method::xpinn));
    CHECK(is_inverse(Method::inverse_pinn));
  }

  TEST_CASE("config validation") {
    LossWeights w;
    w.w_g = -1.0;
    CHECK_THROWS_AS(w.validate(), ConfigError);
    TrainingConfig c = small_config(Method::sdpinn, 1);
    c.subdomains[0].n_f = 0;
    CHECK_THROWS_AS(c.validate(2), ConfigError);
    c = small_config(Method::sdpinn, 1);
    c.subdomains.push_back(c.subdomains[0]);
    CHECK_NOTHROW(c.validate(2));
    CHECK_THROWS_AS(c.validate(3), ConfigError);
    c = small_config(Method::inverse, 1);
    c.target_subdomain = 2;
    CHECK_THROWS_AS(c.validate(2), ConfigError);
  }

  TEST_CASE("sub-domain loss terms on exact data") {
    const ProblemSpec p = kdv_problem(20.0);
    SubdomainData d;
    d.arch = Architecture({2, 3, 1});
    d.conditions = {{0.1, 0.0, exact_solution(p, 0.1, 0.0)}, {1.0, 0.4, exact_solution(p, 1.0, 0.4)}};
    d.interface = {{0.5, 0.5, exact_solution(p, 0.5, 0.5)}};
    d.collocation = {{0.2, 0.3}, {-0.7, 0.9}, {0.9, 0.05}};
    SubdomainLoss loss(p, d, Method::sdpinn_isc, LossWeights{}, 1.0);
    const auto specs = loss.batches();
    REQUIRE(specs.size() == 2);
    CHECK(specs[0].points.size() == 3);
    std::vector<JetBatch> jets = {
        value_batch({d.conditions[0].u, d.conditions[1].u, d.interface[0].u}),
        exact_batch(p, d.collocation)};
    TermList terms;
    const double total = eval_terms(loss, jets, {}, terms);
    CHECK(term(terms, "MSE_u") == 0.0);
    CHECK(term(terms, "MSE_f") < 1e-8);
    CHECK(term(terms, "MSE_g") < 1e-10);
    CHECK(total < 1e-8);

    jets[0].u[2] += 3.0;
    terms.clear();
    eval_terms(loss, jets, {}, terms);
    CHECK(term(terms, "MSE_u") == doctest::Approx(3.0));  // 9 / 3 points
  }

  TEST_CASE("weighted total equals the sum of reported terms") {
    const ProblemSpec p = kdv_problem(5.0);
    const Partition part = partition(p.rect, p.group, {-0.5});
    TrainingConfig cfg = small_config(Method::sdpinn_isc, 0);
    cfg.subdomains[0].weights = {0.3, 1.7, 2.5, 1.0, 1.0};
    const SubdomainData d = prepare_subdomain_data(p, part, 1, cfg.subdomains[0], cfg);
    SubdomainLoss loss(p, d, Method::sdpinn_isc, cfg.subdomains[0].weights, 1.0);
    GradientEvaluator eval(ModelLayout({d.arch}, 0), loss.batches(), loss);
    TermList terms;
    const double total = eval.loss(init_xavier(d.arch, 4), &terms);
    const LossReport r = LossReport::from_terms(terms, cfg.subdomains[0].weights);
    CHECK(std::abs(r.total - total) <= 1e-14 * total);
    CHECK(r.mse_g.has_value());
    CHECK_FALSE(r.mse_r.has_value());
  }

  TEST_CASE("xpinn interface terms") {
    const ProblemSpec p = kdv_problem(20.0);
    std::vector<SubdomainData> data(2);
    for (auto& d : data) d.arch = Architecture({2, 3, 1});
    const Point ip{0.0, 0.25};
    XpinnLoss fwd(p, data, {{0, 1, {ip}}}, LossWeights{});
    XpinnLoss rev(p, data, {{1, 0, {ip}}}, LossWeights{});
    REQUIRE(fwd.batches().size() == 6);

    JetBatch a = exact_batch(p, {ip}), b = exact_batch(p, {ip});
    a.u[0] = 1.0;
    b.u[0] = 3.0;
    b.u_xxx[0] += 0.5;
    JetBatch empty_v = value_batch({}), empty_f = exact_batch(p, {});
    TermList t1, t2;
    const double l1 = eval_terms(fwd, {empty_v, empty_f, empty_v, empty_f, a, b}, {}, t1);
    const double l2 = eval_terms(rev, {empty_v, empty_f, empty_v, empty_f, b, a}, {}, t2);
    // u_avg = 2: each side contributes (1 - 2)² = (3 - 2)² = 1.
    CHECK(term(t1, "MSE_u_avg") == 2.0);
    CHECK(term(t1, "MSE_R") == term(t2, "MSE_R"));
    CHECK(term(t1, "MSE_u_avg") == term(t2, "MSE_u_avg"));
    CHECK(l1 == l2);
  }

  TEST_CASE("single-band xpinn and sdpinn reduce to pinn") {
    const ProblemSpec p = kdv_problem(5.0);
    const Partition whole = partition(p.rect, p.group, {});
    const SessionResult pinn = train_subdomain(p, whole, 0, small_config(Method::pinn, 5));
    const auto x = train_xpinn(p, whole, small_config(Method::xpinn, 5));
    const SessionResult sd = train_subdomain(p, whole, 0, small_config(Method::sdpinn, 5));
    REQUIRE(x.size() == 1);
    CHECK(x[0].params == pinn.params);
    CHECK(sd.params == pinn.params);
    CHECK(sd.final_report.mse_u == pinn.final_report.mse_u);
    CHECK(sd.final_report.mse_f == pinn.final_report.mse_f);
    CHECK_FALSE(x[0].final_report.mse_r.has_value());
  }

  TEST_CASE("sessions are deterministic and order independent") {
    const ProblemSpec p = kdv_problem(20.0);
    const Partition part = partition(p.rect, p.group, {-0.5});
    const TrainingConfig c = small_config(Method::sdpinn, 10, 42);
    const SessionResult a0 = train_subdomain(p, part, 0, c);
    const SessionResult a1 = train_subdomain(p, part, 1, c);
    SessionResult b0, b1;
    std::thread th([&] { b1 = train_subdomain(p, part, 1, c); });
    b0 = train_subdomain(p, part, 0, c);
    th.join();
    CHECK(a0.params == b0.params);
    CHECK(a1.params == b1.params);
    CHECK(a0.trace.records.size() == b0.trace.records.size());
    CHECK(a0.params != a1.params);
    CHECK(a0.interface_labels.size() == 21);
  }

  TEST_CASE("zero iterations return the initial network") {
    const ProblemSpec p = kdv_problem(20.0);
    const Partition part = partition(p.rect, p.group, {-0.5});
    const TrainingConfig c = small_config(Method::sdpinn, 0);
    const SessionResult r = train_subdomain(p, part, 0, c);
    CHECK(r.trace.iterations() == 0);
    CHECK(r.params == init_xavier(r.arch, mix_seed(1, 0, 1)));
    const TrainedNetwork nets[] = {{r.arch, r.params}, {r.arch, r.params}};
    const double e = l2_relative_error(stitch(nets, part, p, 50, 25));
    CHECK(e > 0.5);
    CHECK(e < 5.0);
  }

  TEST_CASE("interior labels from orbits") {
    const ProblemSpec p = kdv_problem(5.0);
    const Partition part = partition(p.rect, p.group, {-0.5});
    const ConditionPoint fwd[] = {{0.0, 0.0, exact_solution(p, 0.0, 0.0), SegmentKind::initial}};
    auto labels = generate_interior_labels(p.group, fwd, 0.1, 2, part, part[0]);
    bool found = false;
    for (const auto& q : labels) {
      found |= std::abs(q.x - 0.4) < 1e-12 && std::abs(q.t - 0.2) < 1e-12;
    }
    CHECK(found);

    const ConditionPoint bwd[] = {{1.0, 0.5, exact_solution(p, 1.0, 0.5), SegmentKind::boundary}};
    labels = generate_interior_labels(p.group, bwd, 0.1, 3, part, part[0]);
    found = false;
    for (const auto& q : labels) {
      found |= std::abs(q.x - 0.4) < 1e-12 && std::abs(q.t - 0.2) < 1e-12;
      CHECK(std::abs(q.u - exact_solution(p, q.x, q.t)) < 1e-10);
    }
    CHECK(found);

    // A seed whose orbit leaves the band immediately.
    const ConditionPoint out[] = {{-1.0, 1.0, 0.0, SegmentKind::boundary}};
    CHECK_THROWS_AS(generate_interior_labels(p.group, out, 0.1, 2, part, part[0]), ConfigError);

    TrainingConfig c = small_config(Method::inverse, 0);
    c.subdomains[0].n_p = 600;
    const auto sld = interior_labels_for(p, part, 0, c.subdomains[0], c);
    CHECK(sld.size() == 600);
    for (const auto& q : sld) {
      CHECK(part.contains(0, q.x, q.t));
      CHECK(std::abs(q.u - exact_solution(p, q.x, q.t)) < 1e-10);
    }
  }

  TEST_CASE("inverse with lambda fixed at its true value") {
    const ProblemSpec p = kdv_problem(5.0);
    const Partition part = partition(p.rect, p.group, {-0.5});
    TrainingConfig c = small_config(Method::inverse, 0);
    c.lambda_init = 1.0;
    const InverseResult r = train_inverse(p, part, c);
    CHECK(r.state.lambda == 1.0);
    CHECK(r.state.relative_error() == 0.0);

    SubdomainData d = prepare_subdomain_data(p, part, 0, c.subdomains[0], c);
    d.interior = interior_labels_for(p, part, 0, c.subdomains[0], c);
    SubdomainLoss inv(p, d, Method::inverse, LossWeights{}, 1.0);
    SubdomainLoss fwd(p, d, Method::sdpinn, LossWeights{}, 1.0);
    const ParameterVector w = init_xavier(d.arch, 3);
    ParameterVector wl(w.size() + 1);
    wl << w, 1.0;
    GradientEvaluator ei(ModelLayout({d.arch}, 1), inv.batches(), inv);
    GradientEvaluator ef(ModelLayout({d.arch}, 0), fwd.batches(), fwd);
    TermList ti, tf;
    ei.loss(wl, &ti);
    ef.loss(w, &tf);
    CHECK(term(ti, "MSE_f") == term(tf, "MSE_f"));
    CHECK(term(ti, "MSE_p") > 0.0);
  }

  TEST_CASE("stitching") {
    const ProblemSpec p = kdv_problem(20.0);
    const Partition part = partition(p.rect, p.group, {-0.5});
    const Architecture a({2, 6, 1}, InputScaling::to_unit_box(-1, 1, 0, 1));
    const ParameterVector w = init_xavier(a, 2);
    const TrainedNetwork one[] = {{a, w}};
    const SolutionGrid g = stitch(one, part, p, 400, 200);
    REQUIRE(g.pred.size() == 80000);
    int c0 = 0, c1 = 0;
    for (int j = 0; j < 200; j += 7) {
      for (int i = 0; i < 400; i += 13) {
        CHECK(g.pred[static_cast<Eigen::Index>(g.index(i, j))] ==
              doctest::Approx(forward(w, a, g.x[static_cast<std::size_t>(i)],
                                      g.t[static_cast<std::size_t>(j)]))
                  .epsilon(1e-14));
      }
    }
    for (int s : g.subdomain) (s == 0 ? c0 : c1)++;
    CHECK(c0 + c1 == 80000);
    CHECK(c0 > 0);
    CHECK(g.exact[0] == exact_solution(p, -1.0, 0.0));

    const TrainedNetwork two[] = {{a, w}, {a, w}};
    const SolutionGrid g2 = stitch(two, part, p, 400, 200);
    CHECK((g2.pred - g.pred).abs().maxCoeff() == 0.0);
    CHECK(interface_discontinuity(two[0], two[1], p.group, p.rect, -0.5, 50) == 0.0);

    ParameterVector shifted = w;
    shifted[shifted.size() - 1] += 0.25;
    const TrainedNetwork b{a, shifted};
    CHECK(interface_discontinuity(two[0], b, p.group, p.rect, -0.5, 50) == doctest::Approx(0.25).epsilon(1e-12));
  }

  TEST_CASE("relative L2 error") {
    const ProblemSpec p = kdv_problem(20.0);
    const Partition part = partition(p.rect, p.group, {-0.5});
    const Architecture a({2, 3, 1});
    const TrainedNetwork one[] = {{a, ParameterVector::Zero(13)}};
    SolutionGrid g = stitch(one, part, p, 400, 200);
    CHECK(l2_relative_error(g) == 1.0);
    g.pred = g.exact;
    CHECK(l2_relative_error(g) == 0.0);
    g.pred = 1.1 * g.exact;
    CHECK(l2_relative_error(g) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(l2_relative_error(g, 1) == doctest::Approx(0.1).epsilon(1e-14));
    const double c = 0.3;
    g.pred = g.exact + c;
    double norm = 0.0;
    for (double e : g.exact) norm += e * e;
    CHECK(l2_relative_error(g) == doctest::Approx(c * std::sqrt(80000.0) / std::sqrt(norm)).epsilon(1e-12));
    g.exact.setZero();
    CHECK_THROWS_AS(l2_relative_error(g), DomainError);
  }

  TEST_CASE("checkpoint round trip") {
    const Architecture a({2, 5, 4, 1}, InputScaling::to_unit_box(-0.5, 1.0, 0.0, 0.75));
    const ParameterVector w = init_xavier(a, 8);
    std::stringstream ss;
    const double aux[] = {0.987654321};
    write_checkpoint(ss, a, w, aux);
    const Checkpoint cp = read_checkpoint(ss);
    CHECK(cp.arch == a);
    CHECK(cp.params == w);
    REQUIRE(cp.aux.size() == 1);
    CHECK(cp.aux[0] == aux[0]);

    std::istringstream bad("sdpinn-checkpoint 1\nwidths 3 2 4 1\nscaling 0 1 0 1\naux 0\nparams 5\n1\n2\n");
    CHECK_THROWS_AS(read_checkpoint(bad), ConfigError);
    std::istringstream junk("hello");
    CHECK_THROWS_AS(read_checkpoint(junk), ConfigError);
  }

  TEST_CASE("loss history and grid CSV headers") {
    std::ostringstream os;
    ReportHistory h;
    LossReport r;
    r.mse_u = 0.5;
    r.total = 0.5;
    h.rows.emplace_back(3, r);
    h.write_csv(os);
    CHECK(os.str() == "iteration,total,MSE_u,MSE_f,MSE_g,MSE_R,MSE_u_avg,MSE_p\n3,0.5,0.5,,,,,\n");
  }
}
