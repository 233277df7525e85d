#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace sdpinn {

/// A space-time location.
struct Point {
  double x = 0.0;
  double t = 0.0;
};

/// A space-time location with a solution value attached.
struct LabeledPoint {
  double x = 0.0;
  double t = 0.0;
  double u = 0.0;
};

/// Space-time rectangle [x_min, x_max] x [t_min, t_max].
struct DomainRect {
  double x_min = 0.0;
  double x_max = 1.0;
  double t_min = 0.0;
  double t_max = 1.0;

  /// Throws ConfigError unless both extents are positive and finite.
  void validate() const;
  /// Closed-rectangle membership.
  bool contains(double x, double t) const {
    return x >= x_min && x <= x_max && t >= t_min && t <= t_max;
  }
  bool operator==(const DomainRect&) const = default;
};

/// Seedable generator whose output sequence is fixed by the C++ standard
/// (std::mt19937_64), with hand-rolled distributions so that draws are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling removes modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return r % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; derives independent stream seeds from (seed, tags).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  auto step = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return step(step(step(seed) ^ a) ^ b);
}

}  // namespace sdpinn
