#pragma once

#include <span>
#include <vector>

#include "polymean/errors.hpp"

namespace polymean {

// Dense non-negative cost matrix (row-major). Entries are typically powered
// distances d(x_i, y_j)^p.
struct CostMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  CostMatrix() = default;
  CostMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
};

struct AssignmentResult {
  std::vector<int> perm;  // row i is matched to column perm[i]
  double cost = 0.0;      // sum_i C(i, perm[i]), accumulated in row order
};

// Exact linear assignment via shortest augmenting paths with potentials
// (Jonker-Volgenant style, O(n^3)). Throws DimensionError on non-square input.
AssignmentResult solve_assignment(const CostMatrix& cost);

// Coupling between two weight vectors; row sums equal the source weights and
// column sums the target weights within 1e-10.
struct TransportPlan {
  int rows = 0;
  int cols = 0;
  std::vector<double> mass;  // row-major

  double operator()(int i, int j) const { return mass[static_cast<std::size_t>(i) * cols + j]; }
};

struct TransportResult {
  TransportPlan plan;
  double cost = 0.0;
};

// Balanced optimal transport on the dense bipartite graph, solved exactly by
// the transportation simplex with a deterministic (Bland) pivoting order.
// Weights must each sum to 1 within 1e-12; throws MassError otherwise.
TransportResult solve_transport(std::span<const double> source_weights,
                                std::span<const double> target_weights,
                                const CostMatrix& cost);

struct CapacitatedResult {
  std::vector<int> assignment;  // source index -> cluster index
  double cost = 0.0;            // sum_i C(i, assignment[i]) in row order
};

// Assigns each of the n sources to one of q clusters so that cluster j
// receives exactly capacities[j] sources, minimizing total cost. Solved as a
// transportation problem with unit supplies; integral marginals keep the
// basic flows integral, so the optimum is a genuine assignment.
CapacitatedResult solve_capacitated_assignment(const CostMatrix& cost,
                                               std::span<const int> capacities);

}  // namespace polymean
