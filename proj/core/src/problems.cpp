#include "sdpinn/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sdpinn/errors.hpp"

namespace sdpinn {

namespace {

constexpr double kPi = std::numbers::pi;

void check_finite(double x, double t) {
  if (!std::isfinite(x) || !std::isfinite(t)) throw DomainError("non-finite coordinate");
}

// F(ξ) = 20 sech ξ + ξ² and its first three derivatives.
struct Profile {
  double f0, f1, f2, f3;
};

Profile nvf_profile(double xi) {
  const double sech = 1.0 / std::cosh(xi);
  const double th = std::tanh(xi);
  const double s2 = sech * sech;
  return {20.0 * sech + xi * xi, -20.0 * sech * th + 2.0 * xi, 20.0 * sech * (th * th - s2) + 2.0,
          20.0 * sech * th * (5.0 * s2 - th * th)};
}

void check_nvf_time(double t) {
  if (t == 0.0) throw DomainError("nvf solution is undefined at t = 0");
}

}  // namespace

const char* to_string(ProblemKind kind) {
  return kind == ProblemKind::kdv ? "kdv" : "nvf";
}

ProblemKind parse_problem_kind(const std::string& name) {
  if (name == "kdv") return ProblemKind::kdv;
  if (name == "nvf") return ProblemKind::nvf;
  throw ConfigError("unknown problem '" + name + "' (expected kdv or nvf)");
}

ProblemSpec kdv_problem(double b) {
  if (!std::isfinite(b)) throw ConfigError("kdv amplitude b must be finite");
  return ProblemSpec{ProblemKind::kdv, DomainRect{-1.0, 1.0, 0.0, 1.0}, b, kdv_group(), 1.0};
}

ProblemSpec nvf_problem() {
  return ProblemSpec{ProblemKind::nvf, DomainRect{-1.0, 1.0, 0.5, 1.0}, 0.0, nvf_group(), 1.0};
}

ProblemSpec make_problem(const std::string& name, double b) {
  return parse_problem_kind(name) == ProblemKind::kdv ? kdv_problem(b) : nvf_problem();
}

double exact_solution(const ProblemSpec& p, double x, double t) {
  check_finite(x, t);
  if (p.kind == ProblemKind::kdv) {
    const double s = x - 2.0 * t;
    return s * s + p.amplitude * std::sin(kPi * s);
  }
  check_nvf_time(t);
  const double xi = x / (t * t);
  return t * (20.0 / std::cosh(xi) + xi * xi);
}

Jet exact_jet(const ProblemSpec& p, double x, double t) {
  check_finite(x, t);
  Jet j;
  if (p.kind == ProblemKind::kdv) {
    const double b = p.amplitude;
    const double s = x - 2.0 * t;
    const double sn = std::sin(kPi * s);
    const double cs = std::cos(kPi * s);
    j.u = s * s + b * sn;
    j.u_x = 2.0 * s + b * kPi * cs;
    j.u_xx = 2.0 - b * kPi * kPi * sn;
    j.u_xxx = -b * kPi * kPi * kPi * cs;
    j.u_t = -2.0 * j.u_x;
    return j;
  }
  check_nvf_time(t);
  const double t2 = t * t;
  const double xi = x / t2;
  const Profile f = nvf_profile(xi);
  j.u = t * f.f0;
  j.u_x = f.f1 / t;
  j.u_xx = f.f2 / (t2 * t);
  j.u_xxx = f.f3 / (t2 * t2 * t);
  j.u_t = f.f0 - 2.0 * xi * f.f1;
  return j;
}

double forcing(const ProblemSpec& p, double x, double t) {
  const Jet j = exact_jet(p, x, t);
  if (p.kind == ProblemKind::kdv) return (j.u - 2.0) * j.u_x + j.u_xxx;
  return j.u_t + j.u * j.u_x - 3.0 * j.u * j.u * j.u_x * j.u_x - j.u * j.u * j.u * j.u_xx;
}

ResidualLinearization linearize_residual(ProblemKind kind, const Jet& j, double mu,
                                         double lambda) {
  ResidualLinearization r;
  r.d_ut = 1.0;
  r.d_lambda = j.u * j.u_x;
  if (kind == ProblemKind::kdv) {
    r.f = j.u_t + lambda * j.u * j.u_x + j.u_xxx - mu;
    r.d_u = lambda * j.u_x;
    r.d_ux = lambda * j.u;
    r.d_uxxx = 1.0;
    return r;
  }
  const double u2 = j.u * j.u;
  r.f = j.u_t + lambda * j.u * j.u_x - 3.0 * u2 * j.u_x * j.u_x - u2 * j.u * j.u_xx - mu;
  r.d_u = lambda * j.u_x - 6.0 * j.u * j.u_x * j.u_x - 3.0 * u2 * j.u_xx;
  r.d_ux = lambda * j.u - 6.0 * u2 * j.u_x;
  r.d_uxx = -u2 * j.u;
  return r;
}

double pde_residual(const ProblemSpec& p, const Jet& jet, double x, double t, double lambda) {
  return linearize_residual(p.kind, jet, forcing(p, x, t), lambda).f;
}

MappingCheck verify_solution_mapping(const SymmetryGroup& group, const ProblemSpec& p,
                                     std::span<const Point> samples, double eps) {
  MappingCheck out;
  for (const Point& s : samples) {
    const LabeledPoint image = group.act({s.x, s.t, exact_solution(p, s.x, s.t)}, eps);
    if (!p.rect.contains(image.x, image.t)) {
      ++out.skipped;
      continue;
    }
    out.max_mismatch = std::max(out.max_mismatch, std::abs(image.u - exact_solution(p, image.x, image.t)));
    ++out.checked;
  }
  return out;
}

}  // namespace sdpinn
