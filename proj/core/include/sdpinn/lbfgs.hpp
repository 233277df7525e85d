#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sdpinn {

struct OptimConfig {
  int memory = 10;
  int max_iters = 20000;
  double grad_tol = 1e-9;   // on the infinity norm of the gradient
  double loss_tol = 1e-12;  // on (f_prev - f) / max(|f_prev|, |f|)
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search_evals = 30;

  /// Throws ConfigError unless 0 < c1 < c2 < 1, memory >= 1, tolerances > 0.
  void validate() const;
};

enum class Termination {
  gradient_tolerance,
  loss_tolerance,
  max_iterations,
  line_search_failure,
};

const char* to_string(Termination t);

struct IterationRecord {
  int iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

/// Record 0 is the starting point; every later record is an accepted step.
struct OptTrace {
  std::vector<IterationRecord> records;
  Termination reason = Termination::max_iterations;
  int evaluations = 0;
  int direction_resets = 0;
  int skipped_updates = 0;

  int iterations() const { return records.empty() ? 0 : records.back().iteration; }
  /// CSV with header iteration,loss,grad_norm,step.
  void write_csv(std::ostream& os) const;
};

/// Returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Called after every accepted iteration with the new iterate.
using IterationCallback = std::function<void(int iteration, const Eigen::VectorXd& x, double f)>;

struct MinimizeResult {
  Eigen::VectorXd x;
  double loss = 0.0;
  OptTrace trace;
};

/// Limited-memory BFGS with a strong-Wolfe line search. Throws
/// NumericalFailure if the objective is not finite at `init`.
MinimizeResult minimize(const Objective& objective, Eigen::VectorXd init,
                        const OptimConfig& config, const IterationCallback& on_iteration = {});

enum class LineSearchStatus {
  converged,       // strong Wolfe conditions hold at `step`
  max_step,        // step bound reached while still descending
  max_evaluations, // zoom budget exhausted
  not_descent,     // phi'(0) >= 0
};

struct LineSearchResult {
  LineSearchStatus status = LineSearchStatus::converged;
  double step = 0.0;
  double value = 0.0;
  double slope = 0.0;
  int evaluations = 0;
  /// Best step seen that satisfies the sufficient-decrease condition
  /// (0 if none); populated on every outcome.
  double armijo_step = 0.0;
  double armijo_value = 0.0;

  bool ok() const { return status == LineSearchStatus::converged; }
};

/// phi(alpha) and phi'(alpha) along a search direction.
using LineFunction = std::function<std::pair<double, double>(double alpha)>;

/// Bracketing-and-zoom search for a step satisfying the strong Wolfe
/// conditions with cubic interpolation inside the bracket.
LineSearchResult wolfe_line_search(const LineFunction& phi, double phi0, double dphi0, double c1,
                                   double c2, double initial_step = 1.0, double max_step = 1e10,
                                   int max_evaluations = 30);

}  // namespace sdpinn
