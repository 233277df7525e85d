#pragma once

#include "sdpinn/mlp.hpp"

namespace sdpinn::test {

// u(x, t) = tanh(x): one hidden unit, unit weights, zero biases.
inline Architecture tanh_arch() { return Architecture({2, 1, 1}); }

inline ParameterVector tanh_params() {
  ParameterVector p(5);
  p << 1.0, 0.0, 0.0, 1.0, 0.0;
  return p;
}

inline double rel_err(double a, double b, double floor = 1e-2) {
  const double scale = std::abs(b);
  return scale < floor ? std::abs(a - b) : std::abs(a - b) / scale;
}

}  // namespace sdpinn::test
