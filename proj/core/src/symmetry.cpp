#include "sdpinn/symmetry.hpp"

#include <cmath>
#include <string>

#include "sdpinn/errors.hpp"

namespace sdpinn {

SymmetryGroup::SymmetryGroup(std::string name, GroupLaw law, Action action,
                             InfinitesimalFn infinitesimals, InvariantFn invariants)
    : name_(std::move(name)),
      law_(law),
      action_(std::move(action)),
      infinitesimals_(std::move(infinitesimals)),
      invariants_(std::move(invariants)) {}

void SymmetryGroup::check_parameter(double eps) const {
  if (!std::isfinite(eps)) throw DomainError(name_ + ": group parameter must be finite");
  if (law_ == GroupLaw::multiplicative && !(eps > 0.0)) {
    throw DomainError(name_ + ": scaling parameter must be > 0, got " + std::to_string(eps));
  }
}

double SymmetryGroup::power(double eps, int k) const {
  if (law_ == GroupLaw::additive) return k * eps;
  return std::pow(eps, k);
}

double SymmetryGroup::to_canonical(double eps) const {
  check_parameter(eps);
  return law_ == GroupLaw::additive ? eps : std::log(eps);
}

double SymmetryGroup::from_canonical(double s) const {
  return law_ == GroupLaw::additive ? s : std::exp(s);
}

LabeledPoint SymmetryGroup::act(const LabeledPoint& p, double eps) const {
  check_parameter(eps);
  return action_(p, eps);
}

SymmetryGroup kdv_group() {
  return SymmetryGroup(
      "G_kdv", GroupLaw::additive,
      [](const LabeledPoint& p, double eps) {
        return LabeledPoint{p.x + 2.0 * eps, p.t + eps, p.u};
      },
      [](const LabeledPoint&) { return Infinitesimals{2.0, 1.0, 0.0, 0.0, 0.0, 0.0}; },
      [](const LabeledPoint& p) { return InvariantPair{p.x - 2.0 * p.t, p.u}; });
}

SymmetryGroup nvf_group() {
  return SymmetryGroup(
      "G_nvf", GroupLaw::multiplicative,
      [](const LabeledPoint& p, double eps) {
        return LabeledPoint{eps * eps * p.x, eps * p.t, eps * p.u};
      },
      [](const LabeledPoint& p) { return Infinitesimals{2.0 * p.x, p.t, p.u, 0.0, 0.0, 1.0}; },
      [](const LabeledPoint& p) {
        if (p.t == 0.0) throw DomainError("G_nvf invariants are undefined at t = 0");
        return InvariantPair{p.x / (p.t * p.t), p.u / p.t};
      });
}

LabeledPoint apply_group(const SymmetryGroup& group, const LabeledPoint& p, double eps, int k) {
  group.check_parameter(eps);
  if (k < 0) throw DomainError("repetition count must be >= 0");
  if (k == 0) return p;
  return group.act(p, group.power(eps, k));
}

InvariantPair invariant_values(const SymmetryGroup& group, const LabeledPoint& p) {
  return group.invariants(p);
}

std::vector<LabeledPoint> orbit(const SymmetryGroup& group, const LabeledPoint& seed, double eps,
                                int k_max) {
  if (k_max < 0) throw DomainError("orbit length must be >= 0");
  group.check_parameter(eps);
  std::vector<LabeledPoint> pts;
  pts.reserve(static_cast<std::size_t>(k_max) + 1);
  for (int k = 0; k <= k_max; ++k) pts.push_back(apply_group(group, seed, eps, k));
  return pts;
}

IscLinearization isc_linearize(const SymmetryGroup& group, const Jet& jet, double x, double t) {
  const Infinitesimals inf = group.infinitesimals({x, t, jet.u});
  IscLinearization lin;
  lin.g = inf.xi * jet.u_x + inf.tau * jet.u_t - inf.eta;
  lin.d_ux = inf.xi;
  lin.d_ut = inf.tau;
  lin.d_u = inf.xi_u * jet.u_x + inf.tau_u * jet.u_t - inf.eta_u;
  return lin;
}

double isc_residual(const SymmetryGroup& group, const Jet& jet, double x, double t) {
  return isc_linearize(group, jet, x, t).g;
}

}  // namespace sdpinn
