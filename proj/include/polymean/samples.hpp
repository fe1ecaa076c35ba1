#pragma once

#include <span>
#include <vector>

#include "polymean/spaces.hpp"

namespace polymean {

// Ordered n-tuple of points of one space: an element of the configuration
// space M^n.
struct Configuration {
  SpaceDescriptor space;
  std::vector<SpacePoint> points;

  std::size_t size() const { return points.size(); }
};

// Unordered n-tuple: an element of the quotient M^n/S_n, stored as the
// canonical (sorted) representative so that equality and hashing of orbits
// are plain value comparisons.
class Sample {
 public:
  Sample(SpaceDescriptor space, std::vector<SpacePoint> points);
  explicit Sample(const Configuration& config) : Sample(config.space, config.points) {}

  const SpaceDescriptor& space() const { return space_; }
  const std::vector<SpacePoint>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  Configuration configuration() const { return {space_, points_}; }

  friend bool operator==(const Sample& a, const Sample& b) {
    return a.space_ == b.space_ && a.points_ == b.points_;
  }

 private:
  SpaceDescriptor space_;
  std::vector<SpacePoint> points_;
};

// Non-increasing integer partition of n: the orbit type of a sample.
struct Partition {
  std::vector<int> parts;  // k_1 >= ... >= k_q >= 1

  explicit Partition(std::vector<int> p = {});
  int n() const;
  int length() const { return static_cast<int>(parts.size()); }

  friend bool operator==(const Partition&, const Partition&) = default;
};

// L^p product metric d_p(x, y) = ((1/n) sum d(x_i, y_i)^p)^(1/p).
double config_distance(const Configuration& x, const Configuration& y, double p);

struct SampleDistanceResult {
  double distance = 0.0;
  std::vector<int> matching;  // x_i is matched to y.points()[matching[i]]
};

// Quotient metric: min over permutations of config_distance, computed exactly
// by optimal assignment on the powered-distance cost matrix.
SampleDistanceResult sample_distance(const Sample& x, const Sample& y, double p);

// Constant-speed geodesic between samples together with its horizontal lift:
// per-index component geodesics joining x_i to y_{matching[i]} for an optimal
// matching. Construction validates that every component geodesic is unique.
class SampleGeodesic {
 public:
  SampleGeodesic(const Sample& start, const Sample& end, double p);

  Configuration lift_at(double t) const;  // ordered lift
  Sample at(double t) const { return Sample(lift_at(t)); }

  const Sample& start() const { return start_; }
  const Sample& end() const { return end_; }
  const std::vector<int>& matching() const { return matching_; }
  double length() const { return length_; }
  double p() const { return p_; }

 private:
  Sample start_, end_;
  std::vector<int> matching_;
  double p_;
  double length_;
};

SampleGeodesic sample_geodesic(const Sample& x, const Sample& y, double p);

// Index sets of points lying within tol of each other (single linkage);
// classes are ordered by smallest member.
std::vector<std::vector<int>> coincidence_classes(const SpaceDescriptor& space,
                                                  std::span<const SpacePoint> points,
                                                  double tol);

// Multiplicities of coinciding points, sorted non-increasingly. tol = 0 gives
// exact coincidence classes; positive tol merges by single linkage (floating
// point geodesics land near strata, not on them).
Partition orbit_type(const Sample& x, double tol = 0.0);

// Number q of distinct points: the smallest skeleton containing the sample.
int skeleton_index(const Sample& x, double tol = 0.0);

// True iff a <= b in the refinement half-order, i.e. b sub-partitions a
// (grouping parts of b can produce a). Exact search over groupings.
bool subpartition_leq(const Partition& a, const Partition& b);

// All partitions of n in lexicographically decreasing order.
std::vector<Partition> enumerate_partitions(int n);

// True iff coincidence classes of `interior` are each contained in a class of
// `endpoint` (the interior isotropy group is a subgroup of the endpoint one).
bool isotropy_contained_in(const SpaceDescriptor& space, const Configuration& interior,
                           const Configuration& endpoint, double tol);

// Checks interior regularity of a geodesic: at every t the lift's isotropy
// group must be contained in both endpoint isotropy groups.
bool isotropy_interior_check(const SampleGeodesic& g, std::span<const double> t_values,
                             double tol);

}  // namespace polymean
