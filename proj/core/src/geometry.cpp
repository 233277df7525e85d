#include "sdpinn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "sdpinn/csv.hpp"
#include "sdpinn/errors.hpp"

namespace sdpinn {

void DomainRect::validate() const {
  if (!(std::isfinite(x_min) && std::isfinite(x_max) && std::isfinite(t_min) &&
        std::isfinite(t_max))) {
    throw ConfigError("domain bounds must be finite");
  }
  if (!(x_min < x_max)) throw ConfigError("domain needs x_min < x_max");
  if (!(t_min < t_max)) throw ConfigError("domain needs t_min < t_max");
}

const char* to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::initial: return "initial";
    case SegmentKind::boundary: return "boundary";
    case SegmentKind::interface: return "interface";
  }
  return "unknown";
}

bool Partition::contains(const SubDomain& sd, double x, double t) const {
  if (!rect_.contains(x, t)) return false;
  const double i1 = group_.level(x, t);
  return i1 >= sd.c_lo && i1 <= sd.c_hi;
}

namespace {

constexpr int kEdgeSamples = 4000;
constexpr int kBoxCells = 200;

struct Edge {
  SegmentKind kind;
  Point from, to;
  Point at(double s) const { return {from.x + s * (to.x - from.x), from.t + s * (to.t - from.t)}; }
};

// Initial edge first, then the two boundary edges.
std::vector<Edge> condition_edges(const DomainRect& r) {
  return {{SegmentKind::initial, {r.x_min, r.t_min}, {r.x_max, r.t_min}},
          {SegmentKind::boundary, {r.x_min, r.t_min}, {r.x_min, r.t_max}},
          {SegmentKind::boundary, {r.x_max, r.t_min}, {r.x_max, r.t_max}}};
}

std::string level_name(double level) {
  return "threshold " + format_double(level);
}

// Parameters s in [0, 1] where the level set crosses the edge.
std::vector<double> edge_roots(const SymmetryGroup& g, const Edge& e, double level) {
  auto h = [&](double s) {
    const Point p = e.at(s);
    return g.level(p.x, p.t) - level;
  };
  std::vector<double> roots;
  double s_prev = 0.0;
  double h_prev = h(0.0);
  if (h_prev == 0.0) roots.push_back(0.0);
  for (int i = 1; i <= kEdgeSamples; ++i) {
    const double s = static_cast<double>(i) / kEdgeSamples;
    const double hs = h(s);
    if (hs == 0.0) {
      roots.push_back(s);
    } else if (h_prev != 0.0 && (h_prev < 0.0) != (hs < 0.0)) {
      double lo = s_prev, hi = s;
      for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if ((h(mid) < 0.0) == (h_prev < 0.0)) lo = mid; else hi = mid;
      }
      roots.push_back(std::abs(h(lo)) <= std::abs(h(hi)) ? lo : hi);
    }
    s_prev = s;
    h_prev = hs;
  }
  return roots;
}

// Largest canonical distance along `dir` that keeps the orbit of `seed` in rect.
double exit_distance(const SymmetryGroup& g, const DomainRect& rect, const Point& seed, double dir) {
  auto inside = [&](double s) {
    const LabeledPoint q = g.act({seed.x, seed.t, 0.0}, g.from_canonical(dir * s));
    return rect.contains(q.x, q.t);
  };
  double lo = 0.0;
  double hi = 1e-9;
  if (!inside(hi)) return 0.0;
  while (inside(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e8) throw GeometryError("orbit does not leave the domain");
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (inside(mid)) lo = mid; else hi = mid;
  }
  return lo;
}

std::pair<double, double> level_range(const SymmetryGroup& g, const DomainRect& r) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i <= kBoxCells; ++i) {
    for (int j = 0; j <= kBoxCells; ++j) {
      const double x = r.x_min + (r.x_max - r.x_min) * i / kBoxCells;
      const double t = r.t_min + (r.t_max - r.t_min) * j / kBoxCells;
      const double v = g.level(x, t);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return {lo, hi};
}

}  // namespace

LevelSetSpan level_set_span(const SymmetryGroup& group, const DomainRect& rect, double level) {
  rect.validate();
  bool found = false;
  Point seed;
  for (const Edge& e : condition_edges(rect)) {
    for (double s : edge_roots(group, e, level)) {
      const Point p = e.at(s);
      if (!found || p.t < seed.t || (p.t == seed.t && p.x < seed.x)) seed = p;
      found = true;
    }
  }
  if (!found) {
    const auto [lo, hi] = level_range(group, rect);
    if (level < lo || level > hi) {
      throw ConfigError(level_name(level) + ": level set does not meet the domain");
    }
    throw ConfigError(level_name(level) + ": level set has no seed on the initial or boundary edges");
  }
  const double forward = exit_distance(group, rect, seed, 1.0);
  const double backward = exit_distance(group, rect, seed, -1.0);
  const double span = forward >= backward ? forward : -backward;
  if (span == 0.0) {
    throw ConfigError(level_name(level) + ": level set meets the domain in a single point");
  }
  const LabeledPoint q = group.act({seed.x, seed.t, 0.0}, group.from_canonical(span));
  return LevelSetSpan{seed, {q.x, q.t}, span};
}

std::vector<LabeledPoint> interface_points(const SymmetryGroup& group, const ProblemSpec& problem,
                                           double level, const DomainRect& rect, int n) {
  if (n < 1) throw ConfigError("interface orbit needs at least one step");
  const LevelSetSpan span = level_set_span(group, rect, level);
  const double eps = group.from_canonical(span.canonical_span / n);
  const LabeledPoint seed{span.seed.x, span.seed.t,
                          exact_solution(problem, span.seed.x, span.seed.t)};
  std::vector<LabeledPoint> pts = orbit(group, seed, eps, n);
  // Repeated composition drifts by a few ulps past the far edge.
  for (LabeledPoint& q : pts) {
    q.x = std::clamp(q.x, rect.x_min, rect.x_max);
    q.t = std::clamp(q.t, rect.t_min, rect.t_max);
  }
  return pts;
}

Partition partition(const DomainRect& rect, const SymmetryGroup& group,
                    std::vector<double> thresholds) {
  rect.validate();
  for (double c : thresholds) {
    if (!std::isfinite(c)) throw ConfigError("partition thresholds must be finite");
  }
  const bool decreasing = std::is_sorted(thresholds.begin(), thresholds.end(), std::greater<>());
  const bool increasing = std::is_sorted(thresholds.begin(), thresholds.end());
  if (!decreasing && !increasing) throw ConfigError("partition thresholds must be monotone");
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  if (std::adjacent_find(thresholds.begin(), thresholds.end()) != thresholds.end()) {
    throw ConfigError("partition thresholds must be distinct");
  }

  std::vector<LevelSetSpan> spans;
  for (double c : thresholds) spans.push_back(level_set_span(group, rect, c));

  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t n = thresholds.size();
  std::vector<SubDomain> subs(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    subs[j].index = static_cast<int>(j);
    subs[j].rect = rect;
    subs[j].c_hi = j == 0 ? inf : thresholds[j - 1];
    subs[j].c_lo = j == n ? -inf : thresholds[j];
  }
  Partition part(rect, group, thresholds, subs);

  for (std::size_t j = 0; j <= n; ++j) {
    SubDomain& sd = subs[j];
    auto in = [&](const Point& p) { return part.contains(sd, p.x, p.t); };

    for (const Edge& e : condition_edges(rect)) {
      int first = -1, last = -1;
      for (int i = 0; i <= kEdgeSamples; ++i) {
        if (in(e.at(static_cast<double>(i) / kEdgeSamples))) {
          if (first < 0) first = i;
          last = i;
        }
      }
      if (first < 0) continue;
      // Refine each end towards its outside neighbour.
      auto refine = [&](int inside_i, int outside_i) {
        double a = static_cast<double>(inside_i) / kEdgeSamples;
        double b = static_cast<double>(outside_i) / kEdgeSamples;
        for (int it = 0; it < 100; ++it) {
          const double mid = 0.5 * (a + b);
          if (mid == a || mid == b) break;
          if (in(e.at(mid))) a = mid; else b = mid;
        }
        return e.at(a);
      };
      ConditionSegment seg;
      seg.kind = e.kind;
      seg.a = first > 0 ? refine(first, first - 1) : e.at(0.0);
      seg.b = last < kEdgeSamples ? refine(last, last + 1) : e.at(1.0);
      sd.segments.push_back(seg);
    }
    auto add_interface = [&](std::size_t k) {
      ConditionSegment seg;
      seg.kind = SegmentKind::interface;
      seg.a = spans[k].seed;
      seg.b = spans[k].exit;
      seg.level = thresholds[k];
      seg.count = kDefaultInterfacePoints;
      sd.segments.push_back(seg);
    };
    if (j > 0) add_interface(j - 1);
    if (j < n) add_interface(j);

    double x_lo = inf, x_hi = -inf, t_lo = inf, t_hi = -inf;
    auto extend = [&](double x, double t) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      t_lo = std::min(t_lo, t);
      t_hi = std::max(t_hi, t);
    };
    const double dx = (rect.x_max - rect.x_min) / kBoxCells;
    const double dt = (rect.t_max - rect.t_min) / kBoxCells;
    for (int i = 0; i <= kBoxCells; ++i) {
      for (int k = 0; k <= kBoxCells; ++k) {
        const double x = rect.x_min + dx * i;
        const double t = rect.t_min + dt * k;
        if (in({x, t})) extend(x, t);
      }
    }
    for (const ConditionSegment& seg : sd.segments) {
      extend(seg.a.x, seg.a.t);
      extend(seg.b.x, seg.b.t);
    }
    if (x_lo > x_hi) {
      sd.bounds = rect;
    } else {
      sd.bounds = DomainRect{std::max(rect.x_min, x_lo - dx), std::min(rect.x_max, x_hi + dx),
                             std::max(rect.t_min, t_lo - dt), std::min(rect.t_max, t_hi + dt)};
    }
  }
  return Partition(rect, group, std::move(thresholds), std::move(subs));
}

int classify(const Point& p, const Partition& part) {
  if (!part.rect().contains(p.x, p.t)) {
    throw DomainError("point (" + format_double(p.x) + ", " + format_double(p.t) +
                      ") lies outside the domain");
  }
  const double i1 = part.group().level(p.x, p.t);
  const auto& levels = part.levels();
  for (std::size_t j = 0; j < levels.size(); ++j) {
    if (i1 >= levels[j]) return static_cast<int>(j);
  }
  return static_cast<int>(levels.size());
}

std::vector<Point> sample_collocation_lhs(const Partition& part, const SubDomain& sd, int n,
                                          std::uint64_t seed) {
  if (n < 1) throw ConfigError("collocation count must be >= 1");
  Rng rng(seed);
  const DomainRect& box = sd.bounds;
  std::vector<Point> accepted;
  accepted.reserve(static_cast<std::size_t>(n));
  std::vector<int> perm_x(static_cast<std::size_t>(n)), perm_t(static_cast<std::size_t>(n));
  long long draws = 0;
  while (static_cast<int>(accepted.size()) < n) {
    std::iota(perm_x.begin(), perm_x.end(), 0);
    std::iota(perm_t.begin(), perm_t.end(), 0);
    rng.shuffle(perm_x);
    rng.shuffle(perm_t);
    for (int i = 0; i < n; ++i) {
      const double x = box.x_min + (box.x_max - box.x_min) * (perm_x[i] + rng.uniform()) / n;
      const double t = box.t_min + (box.t_max - box.t_min) * (perm_t[i] + rng.uniform()) / n;
      if (static_cast<int>(accepted.size()) < n && part.contains(sd, x, t)) {
        accepted.push_back({x, t});
      }
    }
    draws += n;
    if (draws >= 1000000 && static_cast<double>(accepted.size()) < 1e-3 * static_cast<double>(draws)) {
      throw GeometryError("sub-domain " + std::to_string(sd.index) +
                          ": collocation acceptance rate below 1e-3");
    }
  }
  return accepted;
}

std::vector<ConditionPoint> discretize_conditions(const ProblemSpec& problem,
                                                  const Partition& part, const SubDomain& sd,
                                                  int n_x, int n_t) {
  if (n_x < 2 || n_t < 2) throw ConfigError("condition grid needs N_x, N_t >= 2");
  const DomainRect& r = part.rect();
  std::vector<ConditionPoint> out;
  auto add = [&](double x, double t, SegmentKind kind) {
    if (part.contains(sd, x, t)) out.push_back({x, t, exact_solution(problem, x, t), kind});
  };
  for (int i = 0; i < n_x; ++i) {
    add(r.x_min + (r.x_max - r.x_min) * i / (n_x - 1), r.t_min, SegmentKind::initial);
  }
  for (double x : {r.x_min, r.x_max}) {
    for (int j = 0; j < n_t; ++j) {
      add(x, r.t_min + (r.t_max - r.t_min) * j / (n_t - 1), SegmentKind::boundary);
    }
  }
  return out;
}

void write_point_records(std::ostream& os, std::span<const PointRecord> rows) {
  os << "x,t,u,kind,subdomain\n";
  for (const PointRecord& r : rows) {
    os << format_double(r.x) << ',' << format_double(r.t) << ',' << format_double(r.u) << ','
       << r.kind << ',' << r.subdomain << '\n';
  }
}

}  // namespace sdpinn
