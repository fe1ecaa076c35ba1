#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "polymean/samples.hpp"
#include "polymean/wasserstein.hpp"

namespace polymean {

struct SolverOptions {
  int restarts = 16;
  int max_iterations = 200;
  double rel_tolerance = 1e-9;
  double merge_tolerance = 1e-9;
  std::uint64_t seed = 0;
};

// Outcome of a mean computation. `objective` is the attained value of the
// minimized metric functional, reported on the distance scale, i.e.
// (sum_i w_i d(x_i, .)^p)^(1/p). `converged` means the winning run's last
// relative objective change was within rel_tolerance.
template <class Minimizer>
struct MeanResult {
  Minimizer minimizer;
  double objective = 0.0;
  int iterations = 0;
  int restarts_used = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // winning run, one entry per iteration
};

// Weighted Fréchet p-mean of an atomic measure: local minimizer of
// F(y) = sum_i w_i d(x_i, y)^p. Closed form where available (euclidean p=2,
// spider), Weiszfeld for euclidean p=1, tangent-space descent with step
// halving and multi-start elsewhere. `init` optionally seeds the first
// restart.
MeanResult<SpacePoint> frechet_mean(const AtomicMeasure& P, double p,
                                    const SolverOptions& opts,
                                    const SpacePoint* init = nullptr);

double frechet_objective(const AtomicMeasure& P, const SpacePoint& y, double p);

// Metric projection of P onto the q-skeleton: Lloyd-style alternation of
// nearest-center assignment (ties to the lowest center index) and per-cluster
// Fréchet means, best of opts.restarts restarts. Empty clusters drop their
// center; the result may have fewer than q atoms.
MeanResult<AtomicMeasure> q_mean(const AtomicMeasure& P, int q, double p,
                                 const SolverOptions& opts);

// Same alternation started from the given centers (single run, no restarts).
// Used by the experiment harness as a measurable selection near a target.
MeanResult<AtomicMeasure> q_mean_from(const AtomicMeasure& P,
                                      const std::vector<SpacePoint>& init_centers, double p,
                                      const SolverOptions& opts);

// Projection of a sample onto the closure of the kbar-stratum: alternates
// capacitated assignment (cluster j receives exactly kbar[j] points) with
// per-cluster Fréchet means; returns the sample with k_i copies of center i.
MeanResult<Sample> kbar_mean(const Sample& x, const Partition& kbar, double p,
                             const SolverOptions& opts);

// Unweighted q-mean: centers minimizing sum_i w_i min_j d(x_i, z_j)^p.
// Same Lloyd alternation; centers closer than merge_tolerance are merged, so
// the result may have fewer than q points.
MeanResult<std::vector<SpacePoint>> unweighted_q_mean(const AtomicMeasure& P, int q,
                                                      double p, const SolverOptions& opts);

MeanResult<std::vector<SpacePoint>> unweighted_q_mean_from(
    const AtomicMeasure& P, const std::vector<SpacePoint>& init_centers, double p,
    const SolverOptions& opts);

// Projection of a measure onto the closure of the wbar-stratum (prescribed
// target weights): alternates an optimal transport coupling with per-center
// Fréchet means of the incoming mass.
MeanResult<AtomicMeasure> wbar_mean(const AtomicMeasure& P,
                                    const std::vector<double>& wbar, double p,
                                    const SolverOptions& opts);

// Exhaustive oracle: enumerates all set partitions of the atoms into at most
// q blocks and solves each block's Fréchet mean by closed form or fine 1D
// search. Guarded to small instances (atoms <= 10, q <= 4).
struct BruteForceResult {
  double objective = 0.0;
  std::vector<std::vector<int>> clusters;  // indices into the input atoms/points
  std::vector<SpacePoint> centers;
};
BruteForceResult brute_force_q_mean(const Sample& x, int q, double p);
BruteForceResult brute_force_q_mean(const AtomicMeasure& P, int q, double p);

// Clusters of x induced by the optimal capacitated matching onto the distinct
// points of a polymean y; each paired center is the Fréchet mean of its
// cluster within the solver tolerance.
std::vector<std::pair<Sample, SpacePoint>> cluster_decomposition(const Sample& x,
                                                                 const Sample& y, double p,
                                                                 const SolverOptions& opts);

}  // namespace polymean
