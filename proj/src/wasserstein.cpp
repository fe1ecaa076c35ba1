#include "polymean/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace polymean {

namespace {

void require_same_space(const AtomicMeasure& P, const AtomicMeasure& Q) {
  if (!(P.space() == Q.space()))
    throw TypeError("measures live in different spaces: " + P.space().name() + " vs " +
                    Q.space().name());
}

CostMatrix powered_cost(const AtomicMeasure& P, const AtomicMeasure& Q, double p) {
  CostMatrix c(P.size(), Q.size());
  for (int i = 0; i < P.size(); ++i)
    for (int j = 0; j < Q.size(); ++j)
      c(i, j) = std::pow(distance(P.space(), P.atoms()[i], Q.atoms()[j]), p);
  return c;
}

}  // namespace

AtomicMeasure::AtomicMeasure(SpaceDescriptor space, std::vector<SpacePoint> atoms,
                             std::vector<double> weights)
    : space_(space), atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (atoms_.empty()) throw DimensionError("a measure needs at least one atom");
  if (atoms_.size() != weights_.size())
    throw DimensionError("atom and weight counts differ");
  for (const auto& a : atoms_) check_point(space_, a);
  double sum = 0.0;
  for (double w : weights_) {
    if (w <= 0.0) throw MassError("weights must be positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kStructuralTol)
    throw MassError("weights sum to " + std::to_string(sum) + ", expected 1");
  // Keep atoms canonically sorted, carrying weights along.
  std::vector<int> order(atoms_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return point_less(space_, atoms_[a], atoms_[b]);
  });
  std::vector<SpacePoint> sorted_atoms;
  std::vector<double> sorted_weights;
  sorted_atoms.reserve(atoms_.size());
  sorted_weights.reserve(atoms_.size());
  for (int i : order) {
    sorted_atoms.push_back(std::move(atoms_[i]));
    sorted_weights.push_back(weights_[i]);
  }
  atoms_ = std::move(sorted_atoms);
  weights_ = std::move(sorted_weights);
}

AtomicMeasure AtomicMeasure::dirac(const SpaceDescriptor& space, const SpacePoint& atom) {
  return AtomicMeasure(space, {atom}, {1.0});
}

AtomicMeasure AtomicMeasure::normalized(double tol) const {
  const auto classes = coincidence_classes(space_, atoms_, tol);
  std::vector<SpacePoint> atoms;
  std::vector<double> weights;
  atoms.reserve(classes.size());
  for (const auto& cls : classes) {
    int rep = cls[0];
    double w = 0.0;
    for (int idx : cls) {
      w += weights_[idx];
      if (point_less(space_, atoms_[idx], atoms_[rep])) rep = idx;
    }
    if (w <= 0.0) continue;
    atoms.push_back(atoms_[rep]);
    weights.push_back(w);
  }
  return AtomicMeasure(space_, std::move(atoms), std::move(weights));
}

AtomicMeasure empirical_measure(const Sample& x) {
  const double n = static_cast<double>(x.size());
  std::vector<SpacePoint> atoms;
  std::vector<double> weights;
  // Points are canonically sorted, so equal points are adjacent; counting
  // runs keeps each weight an exact multiple of 1/n.
  std::size_t i = 0;
  while (i < x.size()) {
    std::size_t j = i;
    while (j < x.size() && x.points()[j] == x.points()[i]) ++j;
    atoms.push_back(x.points()[i]);
    weights.push_back(static_cast<double>(j - i) / n);
    i = j;
  }
  return AtomicMeasure(x.space(), std::move(atoms), std::move(weights));
}

WassersteinResult wasserstein_coupling(const AtomicMeasure& P, const AtomicMeasure& Q,
                                       double p) {
  if (!(p >= 1.0)) throw ConfigError("the exponent p must be >= 1");
  require_same_space(P, Q);
  const auto transport = solve_transport(P.weights(), Q.weights(), powered_cost(P, Q, p));
  return {transport.plan, std::pow(transport.cost, 1.0 / p)};
}

double wasserstein_distance(const AtomicMeasure& P, const AtomicMeasure& Q, double p) {
  return wasserstein_coupling(P, Q, p).distance;
}

MeasureStratum measure_stratum(const AtomicMeasure& P, double tol) {
  const AtomicMeasure N = P.normalized(tol);
  MeasureStratum s;
  s.q = N.size();
  s.weight_partition = N.weights();
  std::sort(s.weight_partition.begin(), s.weight_partition.end(), std::greater<double>());
  bool positive = true;
  for (double w : s.weight_partition) positive = positive && w > 0.0;
  s.regular = positive && N.size() == P.size();
  return s;
}

AtomicMeasure measure_geodesic(const AtomicMeasure& P, const AtomicMeasure& Q, double p,
                               double t) {
  const auto coupling = wasserstein_coupling(P, Q, p);
  std::vector<SpacePoint> atoms;
  std::vector<double> weights;
  for (int i = 0; i < P.size(); ++i) {
    for (int j = 0; j < Q.size(); ++j) {
      const double mass = coupling.plan(i, j);
      if (mass <= 0.0) continue;
      atoms.push_back(geodesic_point(P.space(), P.atoms()[i], Q.atoms()[j], t));
      weights.push_back(mass);
    }
  }
  return AtomicMeasure(P.space(), std::move(atoms), std::move(weights)).normalized(0.0);
}

}  // namespace polymean
