#include "polymean/samples.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "polymean/transport.hpp"

namespace polymean {

namespace {

void require_compatible(const Sample& x, const Sample& y) {
  if (!(x.space() == y.space()))
    throw TypeError("samples live in different spaces: " + x.space().name() + " vs " +
                    y.space().name());
  if (x.size() != y.size())
    throw DimensionError("samples have different sizes: " + std::to_string(x.size()) +
                         " vs " + std::to_string(y.size()));
}

void require_p(double p) {
  if (!(p >= 1.0)) throw ConfigError("the exponent p must be >= 1");
}

CostMatrix powered_cost(const Sample& x, const Sample& y, double p) {
  const int n = static_cast<int>(x.size());
  CostMatrix c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      c(i, j) = std::pow(distance(x.space(), x.points()[i], y.points()[j]), p);
  return c;
}

}  // namespace

Sample::Sample(SpaceDescriptor space, std::vector<SpacePoint> points)
    : space_(space), points_(std::move(points)) {
  if (points_.empty()) throw DimensionError("a sample needs at least one point");
  for (const auto& pt : points_) check_point(space_, pt);
  std::sort(points_.begin(), points_.end(),
            [&](const SpacePoint& a, const SpacePoint& b) { return point_less(space_, a, b); });
}

Partition::Partition(std::vector<int> p) : parts(std::move(p)) {
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i] < 1) throw DimensionError("partition parts must be positive");
    if (i > 0 && parts[i] > parts[i - 1])
      throw DimensionError("partition parts must be non-increasing");
  }
}

int Partition::n() const { return std::accumulate(parts.begin(), parts.end(), 0); }

double config_distance(const Configuration& x, const Configuration& y, double p) {
  require_p(p);
  if (!(x.space == y.space)) throw TypeError("configurations live in different spaces");
  if (x.size() != y.size())
    throw DimensionError("configurations have different sizes: " + std::to_string(x.size()) +
                         " vs " + std::to_string(y.size()));
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    sum += std::pow(distance(x.space, x.points[i], y.points[i]), p);
  return std::pow(sum / n, 1.0 / p);
}

SampleDistanceResult sample_distance(const Sample& x, const Sample& y, double p) {
  require_p(p);
  require_compatible(x, y);
  const auto assignment = solve_assignment(powered_cost(x, y, p));
  SampleDistanceResult result;
  result.matching = assignment.perm;
  result.distance = std::pow(assignment.cost / static_cast<double>(x.size()), 1.0 / p);
  return result;
}

SampleGeodesic::SampleGeodesic(const Sample& start, const Sample& end, double p)
    : start_(start), end_(end), p_(p) {
  require_p(p);
  require_compatible(start, end);
  const auto res = sample_distance(start, end, p);
  matching_ = res.matching;
  length_ = res.distance;
  // Validate every component geodesic up front so non-uniqueness surfaces at
  // construction, not at some later evaluation.
  for (std::size_t i = 0; i < start_.size(); ++i)
    (void)geodesic_point(start_.space(), start_.points()[i], end_.points()[matching_[i]], 0.5);
}

Configuration SampleGeodesic::lift_at(double t) const {
  Configuration c{start_.space(), {}};
  c.points.reserve(start_.size());
  for (std::size_t i = 0; i < start_.size(); ++i)
    c.points.push_back(
        geodesic_point(start_.space(), start_.points()[i], end_.points()[matching_[i]], t));
  return c;
}

SampleGeodesic sample_geodesic(const Sample& x, const Sample& y, double p) {
  return SampleGeodesic(x, y, p);
}

std::vector<std::vector<int>> coincidence_classes(const SpaceDescriptor& space,
                                                  std::span<const SpacePoint> points,
                                                  double tol) {
  const int n = static_cast<int>(points.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  auto unite = [&](int a, int b) {
    const int ra = find(a), rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  };

  // Windowed scan over the canonical order: the per-space gap below is a
  // lower bound on the distance that is monotone along the order, so the
  // inner loop can stop at the first gap beyond tol. The circle seam and
  // cross-leg spider pairs violate the bound and are completed afterwards.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return point_less(space, points[a], points[b]); });
  auto gap = [&](const SpacePoint& a, const SpacePoint& b) {
    if (space.kind == SpaceKind::Spider && a.leg != b.leg)
      return std::numeric_limits<double>::infinity();
    return b.coords[0] - a.coords[0];
  };
  for (int a = 0; a < n; ++a) {
    const int i = order[a];
    for (int b = a + 1; b < n; ++b) {
      const int j = order[b];
      if (gap(points[i], points[j]) > tol) break;
      if (distance(space, points[i], points[j]) <= tol) unite(i, j);
    }
  }
  if (space.kind == SpaceKind::Circle && tol > 0.0) {
    std::vector<int> low, high;
    for (int i = 0; i < n; ++i) {
      if (points[i].coords[0] <= tol) low.push_back(i);
      if (points[i].coords[0] >= kTwoPi - tol) high.push_back(i);
    }
    for (int i : low)
      for (int j : high)
        if (distance(space, points[i], points[j]) <= tol) unite(i, j);
  }
  if (space.kind == SpaceKind::Spider) {
    // Cross-leg pairs satisfy d = r_a + r_b; every such pair links through
    // the smallest-radius point, so one sweep suffices.
    int arg_min = -1;
    for (int i = 0; i < n; ++i)
      if (points[i].coords[0] <= tol &&
          (arg_min < 0 || points[i].coords[0] < points[arg_min].coords[0]))
        arg_min = i;
    if (arg_min >= 0) {
      const double rmin = points[arg_min].coords[0];
      for (int i = 0; i < n; ++i)
        if (points[i].coords[0] + rmin <= tol) unite(i, arg_min);
    }
  }

  std::vector<std::vector<int>> classes;
  std::vector<int> class_of(n, -1);
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (class_of[r] < 0) {
      class_of[r] = static_cast<int>(classes.size());
      classes.emplace_back();
    }
    classes[class_of[r]].push_back(i);
  }
  return classes;
}

Partition orbit_type(const Sample& x, double tol) {
  if (tol < 0.0) throw ConfigError("orbit type tolerance must be >= 0");
  const auto classes = coincidence_classes(x.space(), x.points(), tol);
  std::vector<int> sizes;
  sizes.reserve(classes.size());
  for (const auto& c : classes) sizes.push_back(static_cast<int>(c.size()));
  std::sort(sizes.begin(), sizes.end(), std::greater<int>());
  return Partition(std::move(sizes));
}

int skeleton_index(const Sample& x, double tol) {
  return orbit_type(x, tol).length();
}

namespace {

// Can the multiset `parts` be split into groups with the prescribed sums?
// Depth-first fill of the bins in order, always placing the largest remaining
// part; identical bin states are skipped.
bool can_group(std::vector<int>& parts, std::vector<int>& bins) {
  if (parts.empty())
    return std::all_of(bins.begin(), bins.end(), [](int b) { return b == 0; });
  const int part = parts.back();
  parts.pop_back();
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (bins[i] < part) continue;
    if (i > 0 && bins[i] == bins[i - 1]) continue;  // symmetric choice
    bins[i] -= part;
    if (can_group(parts, bins)) {
      bins[i] += part;
      parts.push_back(part);
      return true;
    }
    bins[i] += part;
  }
  parts.push_back(part);
  return false;
}

}  // namespace

bool subpartition_leq(const Partition& a, const Partition& b) {
  if (a.n() != b.n())
    throw DimensionError("partitions of different integers are incomparable");
  if (b.length() < a.length()) return false;
  std::vector<int> parts = b.parts;
  std::reverse(parts.begin(), parts.end());  // ascending, so back() is largest
  std::vector<int> bins = a.parts;
  return can_group(parts, bins);
}

std::vector<Partition> enumerate_partitions(int n) {
  if (n < 1) throw ConfigError("partitions are defined for n >= 1");
  std::vector<Partition> out;
  std::vector<int> current;
  // Parts chosen largest-first, capped by the previous part: this emits the
  // partitions in lexicographically decreasing order.
  auto recurse = [&](auto&& self, int remaining, int cap) -> void {
    if (remaining == 0) {
      out.push_back(Partition(current));
      return;
    }
    for (int part = std::min(cap, remaining); part >= 1; --part) {
      current.push_back(part);
      self(self, remaining - part, part);
      current.pop_back();
    }
  };
  recurse(recurse, n, n);
  return out;
}

bool isotropy_contained_in(const SpaceDescriptor& space, const Configuration& interior,
                           const Configuration& endpoint, double tol) {
  const auto inner = coincidence_classes(space, interior.points, tol);
  const auto outer = coincidence_classes(space, endpoint.points, tol);
  std::vector<int> outer_class(endpoint.size(), -1);
  for (std::size_t c = 0; c < outer.size(); ++c)
    for (int idx : outer[c]) outer_class[idx] = static_cast<int>(c);
  for (const auto& cls : inner) {
    for (std::size_t k = 1; k < cls.size(); ++k)
      if (outer_class[cls[k]] != outer_class[cls[0]]) return false;
  }
  return true;
}

bool isotropy_interior_check(const SampleGeodesic& g, std::span<const double> t_values,
                             double tol) {
  const Configuration start = g.lift_at(0.0);
  const Configuration end = g.lift_at(1.0);
  for (double t : t_values) {
    const Configuration c = g.lift_at(t);
    if (!isotropy_contained_in(g.start().space(), c, start, tol)) return false;
    if (!isotropy_contained_in(g.start().space(), c, end, tol)) return false;
  }
  return true;
}

}  // namespace polymean
