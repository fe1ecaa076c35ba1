#pragma once

#include <string>
#include <vector>

#include "polymean/asymptotics_types.hpp"
#include "polymean/serialization.hpp"

namespace polymean {

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<TrialRecord> trials;  // ordered by (sample-size index, replicate)
  json summary;                     // fits, covariances, p-values; config echo
};

// Dispatches on cfg.experiment. Deterministic for a fixed config: identical
// seeds give identical trials regardless of the thread count.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// The primary output: one trial per row, '.' decimal, 17 significant digits.
std::string trials_to_csv(const ExperimentResult& result);

// Writes trials.csv and summary.json into out_dir (created if missing).
void write_experiment_outputs(const ExperimentResult& result, const std::string& out_dir);

}  // namespace polymean
