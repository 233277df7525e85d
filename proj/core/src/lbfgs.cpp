#include "sdpinn/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>

#include "sdpinn/csv.hpp"
#include "sdpinn/errors.hpp"

namespace sdpinn {

void OptimConfig::validate() const {
  if (memory < 1) throw ConfigError("optimizer.memory must be >= 1");
  if (max_iters < 0) throw ConfigError("optimizer.max_iters must be >= 0");
  if (!(grad_tol > 0.0)) throw ConfigError("optimizer.grad_tol must be > 0");
  if (!(loss_tol > 0.0)) throw ConfigError("optimizer.loss_tol must be > 0");
  if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) {
    throw ConfigError("optimizer line-search constants need 0 < c1 < c2 < 1");
  }
  if (max_line_search_evals < 1) throw ConfigError("optimizer.max_line_search_evals must be >= 1");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::gradient_tolerance: return "gradient_tolerance";
    case Termination::loss_tolerance: return "loss_tolerance";
    case Termination::max_iterations: return "max_iterations";
    case Termination::line_search_failure: return "line_search_failure";
  }
  return "unknown";
}

void OptTrace::write_csv(std::ostream& os) const {
  os << "iteration,loss,grad_norm,step\n";
  for (const auto& r : records) {
    os << r.iteration << ',' << format_double(r.loss) << ',' << format_double(r.grad_norm) << ','
       << format_double(r.step) << '\n';
  }
}

namespace {

// Minimizer of the cubic matching (a, fa, da) and (b, fb, db); NaN if undefined.
double cubic_minimizer(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double denom = db - da + 2.0 * d2;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return b - (b - a) * (db + d2 - d1) / denom;
}

}  // namespace

LineSearchResult wolfe_line_search(const LineFunction& phi, double phi0, double dphi0, double c1,
                                   double c2, double initial_step, double max_step,
                                   int max_evaluations) {
  LineSearchResult r;
  if (!(dphi0 < 0.0)) {
    r.status = LineSearchStatus::not_descent;
    return r;
  }
  double best = phi0;
  auto sufficient = [&](double a, double f) { return f <= phi0 + c1 * a * dphi0; };
  auto evaluate = [&](double a) {
    auto [f, d] = phi(a);
    ++r.evaluations;
    if (std::isfinite(f) && sufficient(a, f) && f < best) {
      best = f;
      r.armijo_step = a;
      r.armijo_value = f;
    }
    return std::pair{f, d};
  };
  auto accept = [&](LineSearchStatus status, double a, double f, double d) {
    r.status = status;
    r.step = a;
    r.value = f;
    r.slope = d;
    return r;
  };

  auto zoom = [&](double lo, double f_lo, double d_lo, double hi, double f_hi, double d_hi) {
    while (r.evaluations < max_evaluations) {
      const double width = std::abs(hi - lo);
      if (width <= 1e-16 * std::max(1.0, std::abs(lo))) break;
      const double left = std::min(lo, hi);
      const double right = std::max(lo, hi);
      double a = std::numeric_limits<double>::quiet_NaN();
      if (std::isfinite(f_hi) && std::isfinite(d_hi)) a = cubic_minimizer(lo, f_lo, d_lo, hi, f_hi, d_hi);
      if (!(a >= left + 0.1 * width && a <= right - 0.1 * width)) a = 0.5 * (lo + hi);
      auto [f, d] = evaluate(a);
      if (!std::isfinite(f) || !std::isfinite(d) || !sufficient(a, f) || f >= f_lo) {
        hi = a;
        f_hi = f;
        d_hi = d;
      } else {
        if (std::abs(d) <= -c2 * dphi0) return accept(LineSearchStatus::converged, a, f, d);
        if (d * (hi - lo) >= 0.0) {
          hi = lo;
          f_hi = f_lo;
          d_hi = d_lo;
        }
        lo = a;
        f_lo = f;
        d_lo = d;
      }
    }
    return accept(LineSearchStatus::max_evaluations, lo, f_lo, d_lo);
  };

  double a_prev = 0.0, f_prev = phi0, d_prev = dphi0;
  double a = std::min(initial_step, max_step);
  while (r.evaluations < max_evaluations) {
    auto [f, d] = evaluate(a);
    if (!std::isfinite(f) || !std::isfinite(d) || !sufficient(a, f) ||
        (r.evaluations > 1 && f >= f_prev)) {
      return zoom(a_prev, f_prev, d_prev, a, f, d);
    }
    if (std::abs(d) <= -c2 * dphi0) return accept(LineSearchStatus::converged, a, f, d);
    if (d >= 0.0) return zoom(a, f, d, a_prev, f_prev, d_prev);
    if (a >= max_step) return accept(LineSearchStatus::max_step, a, f, d);
    a_prev = a;
    f_prev = f;
    d_prev = d;
    a = std::min(2.0 * a, max_step);
  }
  return accept(LineSearchStatus::max_evaluations, a_prev, f_prev, d_prev);
}

namespace {

struct CurvaturePair {
  Eigen::VectorXd s, y;
  double rho;
};

Eigen::VectorXd two_loop_direction(const std::deque<CurvaturePair>& mem, const Eigen::VectorXd& g) {
  Eigen::VectorXd q = g;
  std::vector<double> alpha(mem.size());
  for (std::size_t k = mem.size(); k-- > 0;) {
    alpha[k] = mem[k].rho * mem[k].s.dot(q);
    q -= alpha[k] * mem[k].y;
  }
  if (!mem.empty()) {
    const auto& last = mem.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t k = 0; k < mem.size(); ++k) {
    const double beta = mem[k].rho * mem[k].y.dot(q);
    q += (alpha[k] - beta) * mem[k].s;
  }
  return -q;
}

struct Candidate {
  double step;
  double f;
  Eigen::VectorXd g;
};

}  // namespace

MinimizeResult minimize(const Objective& objective, Eigen::VectorXd init, const OptimConfig& config,
                        const IterationCallback& on_iteration) {
  config.validate();
  MinimizeResult result;
  OptTrace& trace = result.trace;
  Eigen::VectorXd x = std::move(init);
  Eigen::VectorXd g(x.size());
  double f = objective(x, g);
  trace.evaluations = 1;
  if (!std::isfinite(f) || !g.allFinite()) throw NumericalFailure("initial objective");
  trace.records.push_back({0, f, g.lpNorm<Eigen::Infinity>(), 0.0});

  auto finish = [&](Termination reason) {
    trace.reason = reason;
    result.x = x;
    result.loss = f;
    return result;
  };
  if (g.lpNorm<Eigen::Infinity>() <= config.grad_tol) return finish(Termination::gradient_tolerance);

  std::deque<CurvaturePair> memory;
  std::vector<Candidate> candidates;
  Eigen::VectorXd trial(x.size());
  int iter = 0;
  while (true) {
    if (iter >= config.max_iters) return finish(Termination::max_iterations);

    Eigen::VectorXd d = two_loop_direction(memory, g);
    double slope = g.dot(d);
    if (!(slope < 0.0) || !d.allFinite()) {
      memory.clear();
      ++trace.direction_resets;
      d = -g;
      slope = -g.squaredNorm();
    }
    const double initial_step = memory.empty() ? std::min(1.0, 1.0 / d.norm()) : 1.0;

    candidates.clear();
    auto line = [&](double a) -> std::pair<double, double> {
      trial = x + a * d;
      Eigen::VectorXd gt(x.size());
      double ft;
      try {
        ft = objective(trial, gt);
      } catch (const NumericalFailure&) {
        return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::quiet_NaN()};
      }
      if (!gt.allFinite()) {
        return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::quiet_NaN()};
      }
      const double dt = gt.dot(d);
      candidates.push_back({a, ft, std::move(gt)});
      return {ft, dt};
    };
    const LineSearchResult ls = wolfe_line_search(line, f, slope, config.c1, config.c2,
                                                  initial_step, 1e10, config.max_line_search_evals);
    trace.evaluations += ls.evaluations;

    double step = 0.0;
    if (ls.ok()) {
      step = ls.step;
    } else if (ls.armijo_step > 0.0) {
      step = ls.armijo_step;
    } else {
      if (memory.empty()) return finish(Termination::line_search_failure);
      memory.clear();
      ++trace.direction_resets;
      continue;
    }
    const auto it = std::find_if(candidates.begin(), candidates.end(),
                                 [&](const Candidate& c) { return c.step == step; });
    if (it == candidates.end() || !(it->f < f || (it->f == f && step > 0.0))) {
      if (memory.empty()) return finish(Termination::line_search_failure);
      memory.clear();
      ++trace.direction_resets;
      continue;
    }

    Eigen::VectorXd s = step * d;
    Eigen::VectorXd y = it->g - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      memory.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(memory.size()) > config.memory) memory.pop_front();
    } else {
      ++trace.skipped_updates;
    }

    const double f_prev = f;
    x += step * d;
    f = it->f;
    g = std::move(it->g);
    ++iter;
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    trace.records.push_back({iter, f, gnorm, step});
    if (on_iteration) on_iteration(iter, x, f);

    if (gnorm <= config.grad_tol) return finish(Termination::gradient_tolerance);
    const double scale = std::max(std::abs(f_prev), std::abs(f));
    if (f_prev - f <= config.loss_tol * scale) return finish(Termination::loss_tolerance);
  }
}

}  // namespace sdpinn
