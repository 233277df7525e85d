#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sdpinn/problems.hpp"
#include "sdpinn/symmetry.hpp"
#include "sdpinn/types.hpp"

namespace sdpinn {

enum class SegmentKind { initial, boundary, interface };

const char* to_string(SegmentKind kind);

/// A straight edge piece or an interface curve on the closure of a sub-domain.
/// For interfaces `a` is the orbit seed and `b` the exit point; `level` is the
/// first-invariant value of the dividing line.
struct ConditionSegment {
  SegmentKind kind = SegmentKind::initial;
  Point a, b;
  double level = 0.0;
  int count = 0;
};

/// Band c_lo <= I1 <= c_hi of the rectangle (either bound may be infinite).
struct SubDomain {
  int index = 0;
  DomainRect rect;
  double c_lo = 0.0;
  double c_hi = 0.0;
  DomainRect bounds;  // bounding box of the band inside rect
  std::vector<ConditionSegment> segments;
};

/// Sub-domains ordered by band, highest I1 first.
class Partition {
 public:
  Partition(DomainRect rect, SymmetryGroup group, std::vector<double> levels,
            std::vector<SubDomain> subdomains)
      : rect_(rect), group_(std::move(group)), levels_(std::move(levels)),
        subdomains_(std::move(subdomains)) {}

  const DomainRect& rect() const { return rect_; }
  const SymmetryGroup& group() const { return group_; }
  /// Dividing levels, strictly decreasing.
  const std::vector<double>& levels() const { return levels_; }
  const std::vector<SubDomain>& subdomains() const { return subdomains_; }
  const SubDomain& operator[](std::size_t i) const { return subdomains_[i]; }
  std::size_t size() const { return subdomains_.size(); }

  /// Closure membership: inside rect and c_lo <= I1 <= c_hi.
  bool contains(const SubDomain& sd, double x, double t) const;
  bool contains(std::size_t i, double x, double t) const { return contains(subdomains_[i], x, t); }

 private:
  DomainRect rect_;
  SymmetryGroup group_;
  std::vector<double> levels_;
  std::vector<SubDomain> subdomains_;
};

/// Default number of labeled points per dividing line.
inline constexpr int kDefaultInterfacePoints = 101;

/// Splits rect along the level sets I1 = C. Thresholds may be given in either
/// strictly monotone order. Throws ConfigError naming a threshold whose level
/// set misses the rectangle or has no seed on the initial or boundary edges.
Partition partition(const DomainRect& rect, const SymmetryGroup& group,
                    std::vector<double> thresholds);

/// Index of the band holding (x, t); points on a dividing line go to the band
/// with larger I1. Throws DomainError outside rect.
int classify(const Point& p, const Partition& part);

/// n Latin-hypercube points over the sub-domain's bounding box, keeping those
/// inside the band and refilling until n are accepted. Throws GeometryError
/// if the acceptance rate falls below 1e-3 after 1e6 draws.
std::vector<Point> sample_collocation_lhs(const Partition& part, const SubDomain& sd, int n,
                                          std::uint64_t seed);

struct ConditionPoint {
  double x = 0.0;
  double t = 0.0;
  double u = 0.0;
  SegmentKind kind = SegmentKind::initial;
};

/// Equidistant grid points on the initial edge (n_x) and the two boundary
/// edges (n_t each) that lie in the sub-domain, labeled with the exact solution.
std::vector<ConditionPoint> discretize_conditions(const ProblemSpec& problem,
                                                  const Partition& part, const SubDomain& sd,
                                                  int n_x, int n_t);

/// Where the level set I1 = C enters the rectangle through the initial or a
/// boundary edge, and the group parameter that carries it to the exit point.
struct LevelSetSpan {
  Point seed;
  Point exit;
  double canonical_span = 0.0;  // signed, in the group's additive coordinate
};

LevelSetSpan level_set_span(const SymmetryGroup& group, const DomainRect& rect, double level);

/// n + 1 points of the orbit through the seed spanning the level set inside
/// rect, labeled by transporting the seed's exact value with the group.
std::vector<LabeledPoint> interface_points(const SymmetryGroup& group, const ProblemSpec& problem,
                                           double level, const DomainRect& rect, int n);

/// One row of a point-set export.
struct PointRecord {
  double x = 0.0;
  double t = 0.0;
  double u = 0.0;
  std::string kind;
  int subdomain = 0;
};

/// CSV with header x,t,u,kind,subdomain.
void write_point_records(std::ostream& os, std::span<const PointRecord> rows);

}  // namespace sdpinn
