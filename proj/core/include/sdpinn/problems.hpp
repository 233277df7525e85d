#pragma once

#include <span>
#include <string>

#include "sdpinn/jet.hpp"
#include "sdpinn/symmetry.hpp"
#include "sdpinn/types.hpp"

namespace sdpinn {

enum class ProblemKind {
  kdv,  // u_t + λ u u_x + u_xxx = μ,  u = (x-2t)² + b sin(π(x-2t))
  nvf,  // u_t + λ u u_x - (u³ u_x)_x = μ,  u = t (20 sech(x/t²) + (x/t²)²)
};

const char* to_string(ProblemKind kind);
/// Throws ConfigError for an unknown name.
ProblemKind parse_problem_kind(const std::string& name);

struct ProblemSpec {
  ProblemKind kind = ProblemKind::kdv;
  DomainRect rect;
  double amplitude = 0.0;  // b, KdV only
  SymmetryGroup group;
  double lambda = 1.0;  // true coefficient of u u_x

  std::string name() const { return to_string(kind); }
};

/// KdV on [-1, 1] x [0, 1] with amplitude b.
ProblemSpec kdv_problem(double b);
/// Nonlinear viscous fluid on [-1, 1] x [0.5, 1].
ProblemSpec nvf_problem();
/// Dispatch by name ("kdv" or "nvf"); b is ignored for nvf.
ProblemSpec make_problem(const std::string& name, double b);

/// Throws DomainError at t = 0 for nvf or for non-finite input.
double exact_solution(const ProblemSpec& p, double x, double t);
/// Closed-form derivatives of the exact solution.
Jet exact_jet(const ProblemSpec& p, double x, double t);
/// Right-hand side μ obtained by substituting the exact solution with λ = 1.
double forcing(const ProblemSpec& p, double x, double t);

/// f and its partials with respect to each jet entry and λ, given μ.
struct ResidualLinearization {
  double f = 0.0;
  double d_u = 0.0;
  double d_ut = 0.0;
  double d_ux = 0.0;
  double d_uxx = 0.0;
  double d_uxxx = 0.0;
  double d_lambda = 0.0;
};

ResidualLinearization linearize_residual(ProblemKind kind, const Jet& jet, double mu,
                                         double lambda);

/// PDE residual of `jet` at (x, t) with coefficient λ.
double pde_residual(const ProblemSpec& p, const Jet& jet, double x, double t, double lambda);

struct MappingCheck {
  double max_mismatch = 0.0;
  int checked = 0;
  int skipped = 0;  // images that left the rectangle
};

/// Transports (x, t, u_exact) by the group and compares with u_exact at the image.
MappingCheck verify_solution_mapping(const SymmetryGroup& group, const ProblemSpec& p,
                                     std::span<const Point> samples, double eps);

}  // namespace sdpinn
