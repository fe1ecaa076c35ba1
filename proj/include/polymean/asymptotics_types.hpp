#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "polymean/means.hpp"
#include "polymean/samples.hpp"
#include "polymean/spaces.hpp"

namespace polymean {

// Configuration of one seeded Monte-Carlo experiment. `experiment` selects
// the harness: consistency, error_bound, rate, clt, exchangeable_clt,
// stickiness.
struct ExperimentConfig {
  std::string experiment;
  SpaceDescriptor space;
  DistributionSpec population;
  double p = 2.0;
  int q = 1;
  std::optional<Partition> kbar;  // alternative projection target
  std::vector<int> sample_sizes;
  int replicates = 1;
  std::uint64_t seed = 0;
  SolverOptions solver;
  int threads = 1;

  // Harness-specific knobs (defaults are fine for the common cases).
  int reference_size = 200000;   // draws used for population targets
  double fd_step_rel = 1e-5;     // Hessian finite-difference step, relative
  std::vector<double> epsilon_grid;  // stickiness: mass shifts toward leg 1
};

// One Monte-Carlo trial. Wall time stays out of the CSV so that re-running
// with a different thread count reproduces the file byte for byte; it is
// aggregated into the summary metadata instead.
struct TrialRecord {
  int n = 0;
  int replicate = 0;
  double objective = 0.0;
  double distance_to_target = 0.0;
  std::vector<std::pair<std::string, double>> extras;  // same keys per experiment
  std::string minimizer;  // compact representation, no commas
  double wall_ms = 0.0;
};

}  // namespace polymean
