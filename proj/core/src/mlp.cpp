#include "sdpinn/mlp.hpp"

#include <cmath>
#include <string>

#include "sdpinn/errors.hpp"
#include "sdpinn/types.hpp"

namespace sdpinn {

InputScaling InputScaling::to_unit_box(double x_lo, double x_hi, double t_lo, double t_hi) {
  if (!(x_hi > x_lo) || !(t_hi > t_lo)) {
    throw ConfigError("input scaling needs a box with positive extent");
  }
  return InputScaling{0.5 * (x_lo + x_hi), 2.0 / (x_hi - x_lo), 0.5 * (t_lo + t_hi),
                      2.0 / (t_hi - t_lo)};
}

Architecture::Architecture(std::vector<int> layer_widths, InputScaling scaling)
    : widths(std::move(layer_widths)), input(scaling) {
  if (widths.size() < 3) {
    throw ConfigError("architecture needs at least one hidden layer");
  }
  if (widths.front() != 2) throw ConfigError("architecture input width must be 2 (x, t)");
  if (widths.back() != 1) throw ConfigError("architecture output width must be 1");
  for (int w : widths) {
    if (w < 1) throw ConfigError("layer widths must be >= 1");
  }
  if (!(input.x_scale != 0.0 && input.t_scale != 0.0 && std::isfinite(input.x_scale) &&
        std::isfinite(input.t_scale) && std::isfinite(input.x_center) &&
        std::isfinite(input.t_center))) {
    throw ConfigError("input scaling must be finite and nonzero");
  }
}

std::size_t Architecture::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < depth(); ++l) {
    n += static_cast<std::size_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  }
  return n;
}

std::size_t Architecture::weight_offset(int layer) const {
  std::size_t n = 0;
  for (int l = 0; l < layer; ++l) {
    n += static_cast<std::size_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  }
  return n;
}

std::size_t Architecture::bias_offset(int layer) const {
  return weight_offset(layer) + static_cast<std::size_t>(widths[layer]) * widths[layer + 1];
}

void check_parameter_count(const Architecture& arch, std::size_t count) {
  if (count != arch.parameter_count()) {
    throw ConfigError("parameter length " + std::to_string(count) + " does not match architecture (" +
                      std::to_string(arch.parameter_count()) + ")");
  }
}

std::vector<LayerParams> unflatten(const Architecture& arch, const ParameterVector& params) {
  check_parameter_count(arch, static_cast<std::size_t>(params.size()));
  std::vector<LayerParams> layers;
  layers.reserve(arch.depth());
  for (int l = 0; l < arch.depth(); ++l) {
    const int n_in = arch.widths[l];
    const int n_out = arch.widths[l + 1];
    LayerParams lp;
    lp.weight = Eigen::Map<const RowMatrix>(params.data() + arch.weight_offset(l), n_out, n_in);
    lp.bias = Eigen::Map<const Eigen::VectorXd>(params.data() + arch.bias_offset(l), n_out);
    layers.push_back(std::move(lp));
  }
  return layers;
}

ParameterVector flatten(const Architecture& arch, const std::vector<LayerParams>& layers) {
  if (static_cast<int>(layers.size()) != arch.depth()) {
    throw ConfigError("layer count does not match architecture");
  }
  ParameterVector params(static_cast<Eigen::Index>(arch.parameter_count()));
  for (int l = 0; l < arch.depth(); ++l) {
    const int n_in = arch.widths[l];
    const int n_out = arch.widths[l + 1];
    if (layers[l].weight.rows() != n_out || layers[l].weight.cols() != n_in ||
        layers[l].bias.size() != n_out) {
      throw ConfigError("layer " + std::to_string(l) + " has the wrong shape");
    }
    Eigen::Map<RowMatrix>(params.data() + arch.weight_offset(l), n_out, n_in) = layers[l].weight;
    Eigen::Map<Eigen::VectorXd>(params.data() + arch.bias_offset(l), n_out) = layers[l].bias;
  }
  return params;
}

ParameterVector init_xavier(const Architecture& arch, std::uint64_t seed) {
  Rng rng(seed);
  ParameterVector params = ParameterVector::Zero(static_cast<Eigen::Index>(arch.parameter_count()));
  for (int l = 0; l < arch.depth(); ++l) {
    const int n_in = arch.widths[l];
    const int n_out = arch.widths[l + 1];
    const double bound = std::sqrt(6.0 / (n_in + n_out));
    double* w = params.data() + arch.weight_offset(l);
    for (int i = 0; i < n_in * n_out; ++i) w[i] = rng.uniform(-bound, bound);
  }
  return params;
}

double forward(const ParameterVector& params, const Architecture& arch, double x, double t) {
  check_parameter_count(arch, static_cast<std::size_t>(params.size()));
  std::vector<double> act = {(x - arch.input.x_center) * arch.input.x_scale,
                             (t - arch.input.t_center) * arch.input.t_scale};
  std::vector<double> next;
  for (int l = 0; l < arch.depth(); ++l) {
    const int n_in = arch.widths[l];
    const int n_out = arch.widths[l + 1];
    const double* w = params.data() + arch.weight_offset(l);
    const double* b = params.data() + arch.bias_offset(l);
    next.assign(n_out, 0.0);
    for (int o = 0; o < n_out; ++o) {
      double z = b[o];
      for (int i = 0; i < n_in; ++i) z += w[o * n_in + i] * act[i];
      next[o] = (l + 1 < arch.depth()) ? std::tanh(z) : z;
    }
    act.swap(next);
  }
  return act[0];
}

}  // namespace sdpinn
