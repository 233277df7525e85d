#include <cmath>
#include <random>

#include "doctest.h"
#include "sdpinn/errors.hpp"
#include "sdpinn/problems.hpp"
#include "sdpinn/symmetry.hpp"

using namespace sdpinn;

namespace {

void check_point(const LabeledPoint& p, double x, double t, double u, double tol) {
  CHECK(std::abs(p.x - x) <= tol);
  CHECK(std::abs(p.t - t) <= tol);
  CHECK(std::abs(p.u - u) <= tol);
}

}  // namespace

TEST_SUITE("symmetry") {
  TEST_CASE("translation group applied three times") {
    const auto g = kdv_group();
    check_point(apply_group(g, {-0.5, 0.0, -19.75}, 0.1, 3), 0.1, 0.3, -19.75, 1e-15);
  }

  TEST_CASE("scaling group applied once") {
    const auto g = nvf_group();
    check_point(apply_group(g, {0.5, 0.5, 4.6580}, 1.1, 1), 0.605, 0.55, 5.12380, 1e-12);
  }

  TEST_CASE("k = 0 is the identity") {
    const LabeledPoint p{0.3, 0.7, -2.5};
    for (const auto& g : {kdv_group(), nvf_group()}) {
      const LabeledPoint q = apply_group(g, p, 1.3, 0);
      CHECK(q.x == p.x);
      CHECK(q.t == p.t);
      CHECK(q.u == p.u);
    }
  }

  TEST_CASE("invalid parameters") {
    CHECK_THROWS_AS(apply_group(nvf_group(), {0.5, 0.5, 1.0}, 0.0, 1), DomainError);
    CHECK_THROWS_AS(apply_group(nvf_group(), {0.5, 0.5, 1.0}, -1.0, 1), DomainError);
    CHECK_THROWS_AS(apply_group(kdv_group(), {0.5, 0.5, 1.0}, 0.1, -1), DomainError);
    CHECK_NOTHROW(apply_group(kdv_group(), {0.5, 0.5, 1.0}, -0.1, 2));
  }

  TEST_CASE("invariant values") {
    const InvariantPair k = invariant_values(kdv_group(), {0.1, 0.3, 7.0});
    CHECK(k.i1 == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(k.i2 == 7.0);
    const InvariantPair n = invariant_values(nvf_group(), {0.605, 0.55, 5.1238});
    CHECK(n.i1 == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(n.i2 == doctest::Approx(9.316).epsilon(1e-12));
    CHECK_THROWS_AS(invariant_values(nvf_group(), {0.5, 0.0, 1.0}), DomainError);
  }

  TEST_CASE("orbits") {
    const auto k = orbit(kdv_group(), {-0.5, 0.0, -19.75}, 0.25, 3);
    REQUIRE(k.size() == 4);
    const double xs[] = {-0.5, 0.0, 0.5, 1.0}, ts[] = {0.0, 0.25, 0.5, 0.75};
    for (int i = 0; i < 4; ++i) check_point(k[static_cast<std::size_t>(i)], xs[i], ts[i], -19.75, 1e-15);

    const auto one = orbit(kdv_group(), {0.2, 0.1, 3.0}, 0.5, 0);
    REQUIRE(one.size() == 1);
    check_point(one[0], 0.2, 0.1, 3.0, 0.0);

    const auto n = orbit(nvf_group(), {0.5, 0.5, 4.6580}, std::pow(2.0, 0.25), 4);
    REQUIRE(n.size() == 5);
    CHECK(n.back().t == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(n.back().x == doctest::Approx(2.0).epsilon(1e-14));
  }

  TEST_CASE("group law, invariance along orbits, infinitesimals") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> ux(-1.0, 1.0), ut(0.5, 1.0), uu(-5.0, 5.0);
    for (const auto& g : {kdv_group(), nvf_group()}) {
      const bool scaling = g.law() == GroupLaw::multiplicative;
      std::uniform_real_distribution<double> ue(scaling ? 0.5 : -0.5, scaling ? 1.5 : 0.5);
      for (int i = 0; i < 200; ++i) {
        const LabeledPoint p{ux(gen), ut(gen), uu(gen)};
        const double e1 = ue(gen), e2 = ue(gen);
        const LabeledPoint a = g.act(g.act(p, e1), e2), b = g.act(p, g.compose(e1, e2));
        CHECK(std::abs(a.x - b.x) < 1e-12);
        CHECK(std::abs(a.t - b.t) < 1e-12);
        CHECK(std::abs(a.u - b.u) < 1e-12);

        const InvariantPair i0 = invariant_values(g, p), i1 = invariant_values(g, apply_group(g, p, e1, 3));
        CHECK(std::abs(i0.i1 - i1.i1) <= 1e-12 * std::max(1.0, std::abs(i0.i1)));
        CHECK(std::abs(i0.i2 - i1.i2) <= 1e-12 * std::max(1.0, std::abs(i0.i2)));

        const double d = 1e-6;
        const LabeledPoint q = g.act(p, g.identity() + d);
        const Infinitesimals inf = g.infinitesimals(p);
        CHECK(std::abs((q.x - p.x) / d - inf.xi) <= 1e-5 * std::max(1.0, std::abs(inf.xi)));
        CHECK(std::abs((q.t - p.t) / d - inf.tau) <= 1e-5 * std::max(1.0, std::abs(inf.tau)));
        CHECK(std::abs((q.u - p.u) / d - inf.eta) <= 1e-5 * std::max(1.0, std::abs(inf.eta)));
      }
    }
  }

  TEST_CASE("canonical coordinates") {
    const auto n = nvf_group();
    CHECK(n.to_canonical(1.0) == 0.0);
    CHECK(n.from_canonical(n.to_canonical(1.7)) == doctest::Approx(1.7).epsilon(1e-15));
    CHECK(n.inverse(4.0) == 0.25);
    const auto k = kdv_group();
    CHECK(k.to_canonical(-0.3) == -0.3);
    CHECK(k.inverse(0.3) == -0.3);
    CHECK(k.power(0.25, 4) == 1.0);
    CHECK(n.power(2.0, 3) == 8.0);
  }

  TEST_CASE("ISC residual") {
    Jet zero;
    CHECK(isc_residual(kdv_group(), zero, 0.3, 0.4) == 0.0);
    CHECK(isc_residual(nvf_group(), zero, 0.3, 0.6) == 0.0);

    Jet j;
    j.u = 2.0;
    j.u_t = 3.0;
    j.u_x = 5.0;
    CHECK(isc_residual(kdv_group(), j, 0.3, 0.4) == 3.0 + 2.0 * 5.0);
    CHECK(isc_residual(nvf_group(), j, 0.2, 0.6) == doctest::Approx(0.6 * 3.0 + 0.4 * 5.0 - 2.0));

    const IscLinearization lin = isc_linearize(nvf_group(), j, 0.2, 0.6);
    CHECK(lin.d_u == -1.0);
    CHECK(lin.d_ux == doctest::Approx(0.4));
    CHECK(lin.d_ut == doctest::Approx(0.6));
  }

  TEST_CASE("exact solutions satisfy their invariant surface condition") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> ux(-1.0, 1.0), ut(0.0, 1.0), un(0.5, 1.0);
    const ProblemSpec k = kdv_problem(20.0), n = nvf_problem();
    for (int i = 0; i < 500; ++i) {
      const double x = ux(gen), t = ut(gen), tn = un(gen);
      CHECK(std::abs(isc_residual(k.group, exact_jet(k, x, t), x, t)) < 1e-10);
      CHECK(std::abs(isc_residual(n.group, exact_jet(n, x, tn), x, tn)) < 1e-10);
    }
  }
}
