#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "sdpinn/errors.hpp"
#include "sdpinn/geometry.hpp"
#include "sdpinn/jet.hpp"
#include "sdpinn/problems.hpp"
#include "sdpinn/training.hpp"
#include "support.hpp"

using namespace sdpinn;

namespace {

void check_close(const Jet& a, const Jet& b, double tol) {
  CHECK(test::rel_err(a.u, b.u) < tol);
  CHECK(test::rel_err(a.u_t, b.u_t) < tol);
  CHECK(test::rel_err(a.u_x, b.u_x) < tol);
  CHECK(test::rel_err(a.u_xx, b.u_xx) < tol);
  CHECK(test::rel_err(a.u_xxx, b.u_xxx) < tol);
}

// ½‖aux‖² or a constant, ignoring the network batch entirely.
class AuxObjective : public JetObjective {
 public:
  explicit AuxObjective(bool constant) : constant_(constant) {}
  double evaluate(std::span<const JetBatch>, std::span<const double> aux, std::span<JetBatch>,
                  std::span<double> aux_grad, TermList* terms) const override {
    if (constant_) return 3.5;
    double s = 0.0;
    for (std::size_t i = 0; i < aux.size(); ++i) {
      s += 0.5 * aux[i] * aux[i];
      aux_grad[i] += aux[i];
    }
    if (terms) terms->emplace_back("half_norm", s);
    return s;
  }

 private:
  bool constant_;
};

class NanObjective : public JetObjective {
 public:
  double evaluate(std::span<const JetBatch>, std::span<const double>, std::span<JetBatch>,
                  std::span<double>, TermList* terms) const override {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (terms) terms->emplace_back("MSE_f", nan);
    return nan;
  }
};

}  // namespace

TEST_SUITE("jet") {
  TEST_CASE("tanh network jet at the origin") {
    const Jet j = jet_eval(test::tanh_params(), test::tanh_arch(), 0.0, 0.0);
    CHECK(j.u == 0.0);
    CHECK(j.u_t == 0.0);
    CHECK(j.u_x == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(j.u_xx) < 1e-15);
    CHECK(j.u_xxx == doctest::Approx(-2.0).epsilon(1e-15));
  }

  TEST_CASE("tanh network against closed-form derivatives away from 0") {
    const double x = 0.37, th = std::tanh(x), s2 = 1.0 - th * th;
    const Jet j = jet_eval(test::tanh_params(), test::tanh_arch(), x, 0.9);
    CHECK(j.u == doctest::Approx(th).epsilon(1e-15));
    CHECK(j.u_x == doctest::Approx(s2).epsilon(1e-14));
    CHECK(j.u_xx == doctest::Approx(-2.0 * th * s2).epsilon(1e-14));
    CHECK(j.u_xxx == doctest::Approx(-2.0 * s2 * (1.0 - 3.0 * th * th)).epsilon(1e-14));
    CHECK(j.u_t == 0.0);
  }

  TEST_CASE("zero network") {
    const Architecture a({2, 40, 40, 40, 40, 1});
    const ParameterVector z = ParameterVector::Zero(5081);
    const Jet j = jet_eval(z, a, 0.4, 0.1);
    CHECK(j.u == 0.0);
    CHECK(j.u_t == 0.0);
    CHECK(j.u_x == 0.0);
    CHECK(j.u_xx == 0.0);
    CHECK(j.u_xxx == 0.0);
    const Jet f = fd_oracle(z, a, 0.4, 0.1, 1e-4);
    CHECK(f.u == 0.0);
    CHECK(f.u_xxx == 0.0);
  }

  TEST_CASE("fd oracle on the tanh network") {
    const Jet f = fd_oracle(test::tanh_params(), test::tanh_arch(), 0.0, 0.0, 1e-4);
    CHECK(std::abs(f.u_xxx + 2.0) < 1e-6);
    CHECK(std::abs(f.u_x - 1.0) < 1e-8);
  }

  TEST_CASE("errors") {
    const Architecture a({2, 3, 1});
    CHECK_THROWS_AS(jet_eval(ParameterVector::Zero(4), a, 0.0, 0.0), ConfigError);
    CHECK_THROWS_AS(jet_eval(ParameterVector::Zero(13), a, std::nan(""), 0.0), DomainError);
    CHECK_THROWS_AS(jet_eval(ParameterVector::Zero(13), a, 0.0, INFINITY), DomainError);
  }

  TEST_CASE("jets of random networks match finite differences") {
    const Architecture a({2, 40, 40, 40, 40, 1});
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int k = 0; k < 20; ++k) {
      const ParameterVector p = init_xavier(a, 100 + k);
      const double x = d(gen), t = d(gen);
      check_close(jet_eval(p, a, x, t), fd_oracle(p, a, x, t, 1e-4), 1e-5);
    }
  }

  TEST_CASE("network independent of t has u_t exactly 0") {
    const Architecture a({2, 6, 6, 1});
    ParameterVector p = init_xavier(a, 9);
    for (int r = 0; r < 6; ++r) p[2 * r + 1] = 0.0;  // t-column of the first weight matrix
    const Jet j = jet_eval(p, a, 0.2, 0.8);
    CHECK(j.u_t == 0.0);
  }

  TEST_CASE("doubling the output layer doubles the jet") {
    const Architecture a({2, 8, 8, 1});
    ParameterVector p = init_xavier(a, 2);
    p[static_cast<Eigen::Index>(a.bias_offset(2))] = 0.3;
    ParameterVector q = p;
    const auto off = static_cast<Eigen::Index>(a.weight_offset(2));
    q.segment(off, 9) *= 2.0;
    const Jet j1 = jet_eval(p, a, 0.1, 0.6), j2 = jet_eval(q, a, 0.1, 0.6);
    CHECK(j2.u == doctest::Approx(2 * j1.u).epsilon(1e-14));
    CHECK(j2.u_t == doctest::Approx(2 * j1.u_t).epsilon(1e-14));
    CHECK(j2.u_x == doctest::Approx(2 * j1.u_x).epsilon(1e-14));
    CHECK(j2.u_xx == doctest::Approx(2 * j1.u_xx).epsilon(1e-14));
    CHECK(j2.u_xxx == doctest::Approx(2 * j1.u_xxx).epsilon(1e-14));
  }

  TEST_CASE("batched evaluation matches pointwise jets") {
    const Architecture a({2, 7, 5, 1}, InputScaling::to_unit_box(-1, 1, 0, 1));
    const ParameterVector p = init_xavier(a, 4);
    NetworkTape tape(a);
    std::vector<Point> pts = {{0.1, 0.2}, {-0.7, 0.9}, {0.5, 0.0}};
    std::vector<double> flat(p.data(), p.data() + p.size());
    const JetBatch& b = tape.forward(flat, pts, JetOrder::full);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Jet j = jet_eval(p, a, pts[i].x, pts[i].t);
      CHECK(b.u[static_cast<Eigen::Index>(i)] == doctest::Approx(j.u).epsilon(1e-14));
      CHECK(b.u_xxx[static_cast<Eigen::Index>(i)] == doctest::Approx(j.u_xxx).epsilon(1e-13));
    }
    const Eigen::ArrayXd v = evaluate_values(p, a, pts);
    CHECK(v[1] == doctest::Approx(b.u[1]).epsilon(1e-14));
  }

  TEST_CASE("quadratic objective on auxiliary parameters") {
    const Architecture a({2, 3, 1});
    ModelLayout layout({a}, 4);
    AuxObjective half(false);
    ParameterVector p = ParameterVector::Random(static_cast<Eigen::Index>(layout.total_size()));
    const LossGradient lg = loss_gradient(layout, p, {{0, {{0.0, 0.5}}, JetOrder::value}}, half);
    CHECK(lg.gradient.size() == p.size());
    CHECK(lg.gradient.head(13).isZero(0.0));
    CHECK((lg.gradient.tail(4) - p.tail(4)).norm() == 0.0);
    CHECK(lg.loss == doctest::Approx(0.5 * p.tail(4).squaredNorm()));
  }

  TEST_CASE("constant objective has zero gradient") {
    const Architecture a({2, 3, 1});
    ModelLayout layout({a}, 0);
    AuxObjective c(true);
    const LossGradient lg =
        loss_gradient(layout, init_xavier(a, 1), {{0, {{0.1, 0.5}}, JetOrder::full}}, c);
    CHECK(lg.loss == 3.5);
    CHECK(lg.gradient.isZero(0.0));
  }

  TEST_CASE("non-finite loss names the term") {
    const Architecture a({2, 3, 1});
    ModelLayout layout({a}, 0);
    NanObjective bad;
    try {
      loss_gradient(layout, init_xavier(a, 1), {{0, {{0.1, 0.5}}, JetOrder::value}}, bad);
      FAIL("expected NumericalFailure");
    } catch (const NumericalFailure& e) {
      CHECK(e.term() == "MSE_f");
    }
  }

  TEST_CASE("PINN loss gradient matches directional finite differences") {
    const ProblemSpec kdv = kdv_problem(5.0);
    const Partition part = partition(kdv.rect, kdv.group, {});
    TrainingConfig cfg;
    cfg.method = Method::pinn;
    SubdomainConfig sc;
    sc.n_u = 10;
    sc.n_f = 10;
    cfg.subdomains = {sc};
    const SubdomainData data = prepare_subdomain_data(kdv, part, 0, sc, cfg);
    SubdomainLoss loss(kdv, data, Method::pinn, sc.weights, 1.0);
    ModelLayout layout({data.arch}, 0);
    GradientEvaluator eval(layout, loss.batches(), loss);
    const ParameterVector p = init_xavier(data.arch, 21);
    const LossGradient lg = eval.evaluate(p);
    CHECK(lg.loss == doctest::Approx(eval.loss(p)).epsilon(1e-15));
    std::mt19937_64 gen(3);
    std::normal_distribution<double> n01;
    for (int k = 0; k < 20; ++k) {
      ParameterVector d(p.size());
      for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = n01(gen);
      d.normalize();
      // Fourth-order stencil; a second-order one at small h is roundoff-bound here.
      const double h = 1e-4;
      const double fd = (-eval.loss(p + 2 * h * d) + 8 * eval.loss(p + h * d) -
                         8 * eval.loss(p - h * d) + eval.loss(p - 2 * h * d)) /
                        (12 * h);
      CHECK(test::rel_err(lg.gradient.dot(d), fd, 1e-3) < 1e-4);
    }
  }
}
