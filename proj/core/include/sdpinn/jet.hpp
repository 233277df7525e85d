#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdpinn/mlp.hpp"
#include "sdpinn/types.hpp"

namespace sdpinn {

/// Network output and its input derivatives at one point.
struct Jet {
  double u = 0.0;
  double u_t = 0.0;
  double u_x = 0.0;
  double u_xx = 0.0;
  double u_xxx = 0.0;
};

enum class JetOrder {
  value,  // u only
  full,   // u, u_t, u_x, u_xx, u_xxx
};

/// Structure-of-arrays jets for a batch of points. For JetOrder::value only
/// `u` is populated; the derivative arrays are empty.
struct JetBatch {
  JetOrder order = JetOrder::full;
  Eigen::ArrayXd u, u_t, u_x, u_xx, u_xxx;

  Eigen::Index size() const { return u.size(); }
  Jet at(Eigen::Index i) const;
  /// Zero-filled batch with the same shape as `like`.
  static JetBatch zeros_like(const JetBatch& like);
  void set_zero();
};

/// Forward pass that keeps every layer's Taylor coefficients so that adjoints
/// of the output jets can be pulled back onto the parameters.
///
/// Each hidden unit carries the truncated Taylor expansion in x to third order
/// (stored as derivatives) plus a first-order dual part in t. Columns of the
/// per-layer matrices are blocked by component: [u | d/dx | d2/dx2 | d3/dx3 | d/dt].
class NetworkTape {
 public:
  explicit NetworkTape(Architecture arch);

  const Architecture& architecture() const { return arch_; }

  /// Evaluates the batch. `params` must outlive the subsequent backward() call.
  const JetBatch& forward(std::span<const double> params, std::span<const Point> points,
                          JetOrder order);

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output jets).
  void backward(const JetBatch& adjoint, std::span<double> grad);

  const JetBatch& output() const { return out_; }

 private:
  Architecture arch_;
  std::span<const double> params_;
  Eigen::Index n_points_ = 0;
  int components_ = 0;
  std::vector<Eigen::MatrixXd> acts_;  // acts_[0] = scaled inputs; acts_[l] = output of layer l
  std::vector<Eigen::MatrixXd> pre_;   // pre-activations of hidden layers
  Eigen::MatrixXd delta_, delta_prev_;
  JetBatch out_;
};

/// Exact jet of the network at (x, t). Throws ConfigError on a parameter
/// length mismatch and DomainError on non-finite input.
Jet jet_eval(const ParameterVector& params, const Architecture& arch, double x, double t);

/// Network values at many points.
Eigen::ArrayXd evaluate_values(const ParameterVector& params, const Architecture& arch,
                               std::span<const Point> points);

/// Central finite differences of the network (5-point stencil for u_xxx),
/// evaluated in quad precision so that only truncation error remains.
Jet fd_oracle(const ParameterVector& params, const Architecture& arch, double x, double t,
              double h);

/// Several networks plus trailing auxiliary scalars packed into one vector.
class ModelLayout {
 public:
  ModelLayout(std::vector<Architecture> networks, std::size_t aux_count);

  std::size_t network_count() const { return networks_.size(); }
  const Architecture& network(std::size_t i) const { return networks_[i]; }
  std::size_t offset(std::size_t i) const { return offsets_[i]; }
  std::size_t aux_offset() const { return offsets_.back(); }
  std::size_t aux_count() const { return aux_count_; }
  std::size_t total_size() const { return offsets_.back() + aux_count_; }

 private:
  std::vector<Architecture> networks_;
  std::vector<std::size_t> offsets_;
  std::size_t aux_count_;
};

/// A set of points evaluated by one network.
struct BatchSpec {
  std::size_t network = 0;
  std::vector<Point> points;
  JetOrder order = JetOrder::full;
};

/// Named contribution to a loss, for diagnostics.
using TermList = std::vector<std::pair<std::string, double>>;

/// A scalar loss built from batched jets and auxiliary parameters.
class JetObjective {
 public:
  virtual ~JetObjective() = default;

  /// `jets[i]` belongs to batch i. Implementations add d(loss)/d(jets[i]) into
  /// `adjoints[i]` (pre-zeroed, same shape) and d(loss)/d(aux) into `aux_grad`
  /// (pre-zeroed), and may append unweighted named terms to `terms`.
  virtual double evaluate(std::span<const JetBatch> jets, std::span<const double> aux,
                          std::span<JetBatch> adjoints, std::span<double> aux_grad,
                          TermList* terms) const = 0;
};

struct LossGradient {
  double loss = 0.0;
  ParameterVector gradient;
};

/// Reusable evaluator of (loss, gradient) that keeps its tapes between calls.
/// Throws NumericalFailure naming the term when the loss or gradient is not finite.
class GradientEvaluator {
 public:
  GradientEvaluator(ModelLayout layout, std::vector<BatchSpec> batches,
                    const JetObjective& objective);

  double operator()(const ParameterVector& params, ParameterVector& grad);
  LossGradient evaluate(const ParameterVector& params);
  /// Loss only, skipping the backward sweep.
  double loss(const ParameterVector& params, TermList* terms = nullptr);

  const ModelLayout& layout() const { return layout_; }

 private:
  ModelLayout layout_;
  std::vector<BatchSpec> batches_;
  const JetObjective& objective_;
  std::vector<NetworkTape> tapes_;
  std::vector<JetBatch> jets_;
  std::vector<JetBatch> adjoints_;
  std::vector<double> aux_scratch_;
  TermList terms_;
};

LossGradient loss_gradient(const ModelLayout& layout, const ParameterVector& params,
                           std::vector<BatchSpec> batches, const JetObjective& objective);

}  // namespace sdpinn
