#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "polymean/asymptotics_types.hpp"
#include "polymean/means.hpp"
#include "polymean/samples.hpp"
#include "polymean/spaces.hpp"
#include "polymean/wasserstein.hpp"

namespace polymean {

inline constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

// Locale-independent float formatting with 17 significant digits: parses back
// to the identical double.
std::string format_double(double v);

json space_to_json(const SpaceDescriptor& space);
SpaceDescriptor space_from_json(const json& j);

// Points depend on the space: arrays for euclidean/sphere coordinates, a bare
// angle for the circle, {"leg": l, "radius": r} for the spider.
json point_to_json(const SpaceDescriptor& space, const SpacePoint& p);
SpacePoint point_from_json(const SpaceDescriptor& space, const json& j);

json sample_to_json(const Sample& x);
Sample sample_from_json(const json& j);  // canonical order applied on load

json measure_to_json(const AtomicMeasure& P);
AtomicMeasure measure_from_json(const json& j);  // weights validated on load

json law_to_json(const SpaceDescriptor& space, const DistributionSpec& law);
DistributionSpec law_from_json(const SpaceDescriptor& space, const json& j);

json solver_options_to_json(const SolverOptions& opts);
SolverOptions solver_options_from_json(const json& j);

json experiment_config_to_json(const ExperimentConfig& cfg);

// Collects every schema violation instead of stopping at the first.
std::vector<std::string> validate_experiment_config(const json& j);

// Throws ConfigError carrying the full violation list.
ExperimentConfig experiment_config_from_json(const json& j);

json load_json_file(const std::string& path);  // IoError / ConfigError

}  // namespace polymean
