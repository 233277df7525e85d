#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sdpinn/jet.hpp"
#include "sdpinn/types.hpp"

namespace sdpinn {

/// How group parameters compose: ε1 + ε2 (identity 0) or ε1·ε2 (identity 1, ε > 0).
enum class GroupLaw { additive, multiplicative };

/// Generators (ξ, τ, η) at a point, with their u-derivatives so that losses
/// built on the invariant surface condition can be differentiated.
struct Infinitesimals {
  double xi = 0.0;
  double tau = 0.0;
  double eta = 0.0;
  double xi_u = 0.0;
  double tau_u = 0.0;
  double eta_u = 0.0;
};

struct InvariantPair {
  double i1 = 0.0;
  double i2 = 0.0;
};

/// One-parameter point symmetry acting on (x, t, u). The (x, t) part of the
/// action and the first invariant must not depend on u: level sets of the
/// first invariant are the dividing lines.
class SymmetryGroup {
 public:
  using Action = std::function<LabeledPoint(const LabeledPoint&, double eps)>;
  using InfinitesimalFn = std::function<Infinitesimals(const LabeledPoint&)>;
  using InvariantFn = std::function<InvariantPair(const LabeledPoint&)>;

  SymmetryGroup(std::string name, GroupLaw law, Action action, InfinitesimalFn infinitesimals,
                InvariantFn invariants);

  const std::string& name() const { return name_; }
  GroupLaw law() const { return law_; }
  double identity() const { return law_ == GroupLaw::additive ? 0.0 : 1.0; }

  /// Throws DomainError when eps is not a valid parameter.
  void check_parameter(double eps) const;
  double compose(double a, double b) const { return law_ == GroupLaw::additive ? a + b : a * b; }
  double inverse(double eps) const { return law_ == GroupLaw::additive ? -eps : 1.0 / eps; }
  /// The parameter of k repeated actions: k·ε or ε^k.
  double power(double eps, int k) const;

  /// Additive coordinate on the group: ε itself, or log ε.
  double to_canonical(double eps) const;
  double from_canonical(double s) const;

  LabeledPoint act(const LabeledPoint& p, double eps) const;
  Infinitesimals infinitesimals(const LabeledPoint& p) const { return infinitesimals_(p); }
  InvariantPair invariants(const LabeledPoint& p) const { return invariants_(p); }
  /// First invariant of a space-time point.
  double level(double x, double t) const { return invariants_({x, t, 0.0}).i1; }

 private:
  std::string name_;
  GroupLaw law_;
  Action action_;
  InfinitesimalFn infinitesimals_;
  InvariantFn invariants_;
};

/// Space-time translation along x - 2t: (x + 2ε, t + ε, u).
SymmetryGroup kdv_group();

/// Scaling (ε²x, εt, εu) with ε > 0.
SymmetryGroup nvf_group();

/// The action applied k times, as a single action with the composed parameter.
/// Throws DomainError for an invalid ε or k < 0.
LabeledPoint apply_group(const SymmetryGroup& group, const LabeledPoint& p, double eps, int k);

/// Throws DomainError where the invariants are undefined (t = 0 for the scaling group).
InvariantPair invariant_values(const SymmetryGroup& group, const LabeledPoint& p);

/// [apply_group(seed, eps, k) for k = 0..k_max].
std::vector<LabeledPoint> orbit(const SymmetryGroup& group, const LabeledPoint& seed, double eps,
                                int k_max);

/// g = ξ u_x + τ u_t - η evaluated at (x, t, jet.u), and its partials.
struct IscLinearization {
  double g = 0.0;
  double d_u = 0.0;
  double d_ux = 0.0;
  double d_ut = 0.0;
};

double isc_residual(const SymmetryGroup& group, const Jet& jet, double x, double t);
IscLinearization isc_linearize(const SymmetryGroup& group, const Jet& jet, double x, double t);

}  // namespace sdpinn
