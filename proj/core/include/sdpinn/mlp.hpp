#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace sdpinn {

/// Flattened trainable values, layer by layer: weights row-major, then
/// biases. Inverse problems append the PDE coefficient after the last layer.
using ParameterVector = Eigen::VectorXd;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Fixed affine map applied to (x, t) before the first layer:
/// (x - x_center) * x_scale, (t - t_center) * t_scale.
struct InputScaling {
  double x_center = 0.0;
  double x_scale = 1.0;
  double t_center = 0.0;
  double t_scale = 1.0;

  /// Maps [x_lo, x_hi] x [t_lo, t_hi] onto [-1, 1]^2.
  static InputScaling to_unit_box(double x_lo, double x_hi, double t_lo, double t_hi);

  bool operator==(const InputScaling&) const = default;
};

/// Fully connected tanh network with two inputs (x, t) and one linear output.
struct Architecture {
  std::vector<int> widths;
  InputScaling input;

  Architecture() = default;
  /// Throws ConfigError unless widths = {2, h1, ..., hk, 1} with k >= 1 and all h >= 1.
  explicit Architecture(std::vector<int> layer_widths, InputScaling scaling = {});

  /// Number of affine layers.
  int depth() const { return static_cast<int>(widths.size()) - 1; }
  std::size_t parameter_count() const;
  /// Offset of layer l's weights (l in [0, depth)); biases follow the weights.
  std::size_t weight_offset(int layer) const;
  std::size_t bias_offset(int layer) const;

  bool operator==(const Architecture&) const = default;
};

struct LayerParams {
  Eigen::MatrixXd weight;  // n_out x n_in
  Eigen::VectorXd bias;    // n_out
};

std::vector<LayerParams> unflatten(const Architecture& arch, const ParameterVector& params);
ParameterVector flatten(const Architecture& arch, const std::vector<LayerParams>& layers);

/// Glorot-uniform weights with bound sqrt(6 / (n_in + n_out)), zero biases.
ParameterVector init_xavier(const Architecture& arch, std::uint64_t seed);

/// Network value at (x, t). Throws ConfigError on a length mismatch.
double forward(const ParameterVector& params, const Architecture& arch, double x, double t);

/// Throws ConfigError if `count` differs from arch.parameter_count().
void check_parameter_count(const Architecture& arch, std::size_t count);

}  // namespace sdpinn
