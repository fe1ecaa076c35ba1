#pragma once

#include <vector>

#include "polymean/samples.hpp"
#include "polymean/spaces.hpp"
#include "polymean/transport.hpp"

namespace polymean {

// Finitely supported probability measure: atoms with positive weights that
// sum to 1 within 1e-12. Atoms need not be distinct on construction;
// normalized() merges coincident atoms and restores the canonical order.
class AtomicMeasure {
 public:
  AtomicMeasure(SpaceDescriptor space, std::vector<SpacePoint> atoms,
                std::vector<double> weights);

  static AtomicMeasure dirac(const SpaceDescriptor& space, const SpacePoint& atom);

  const SpaceDescriptor& space() const { return space_; }
  const std::vector<SpacePoint>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  int size() const { return static_cast<int>(atoms_.size()); }

  // Merges atoms at distance <= tol (single linkage, canonically smallest
  // representative), drops zero-weight atoms, sorts canonically.
  AtomicMeasure normalized(double tol = kGeometricTol) const;

 private:
  SpaceDescriptor space_;
  std::vector<SpacePoint> atoms_;
  std::vector<double> weights_;
};

// Empirical law of a sample: (1/n) sum of Diracs, coincident atoms merged, so
// every weight is an exact integer multiple of 1/n.
AtomicMeasure empirical_measure(const Sample& x);

// Wasserstein-p distance via exact balanced transport on powered distances.
double wasserstein_distance(const AtomicMeasure& P, const AtomicMeasure& Q, double p);

// Optimal coupling together with the distance.
struct WassersteinResult {
  TransportPlan plan;
  double distance = 0.0;
};
WassersteinResult wasserstein_coupling(const AtomicMeasure& P, const AtomicMeasure& Q, double p);

// Stratum data of a measure: number of distinct atoms after tol-merging, the
// sorted weight partition, and whether the measure is regular (distinct atoms,
// strictly positive weights).
struct MeasureStratum {
  int q = 0;
  std::vector<double> weight_partition;  // non-increasing, sums to 1
  bool regular = false;
};
MeasureStratum measure_stratum(const AtomicMeasure& P, double tol = kGeometricTol);

// Displacement interpolation restricted to atomic measures: pushes each
// transport-plan cell along the component geodesic.
AtomicMeasure measure_geodesic(const AtomicMeasure& P, const AtomicMeasure& Q, double p,
                               double t);

}  // namespace polymean
