#include "polymean/serialization.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace polymean {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

json space_to_json(const SpaceDescriptor& space) {
  switch (space.kind) {
    case SpaceKind::Euclidean: return {{"kind", "euclidean"}, {"dim", space.dim}};
    case SpaceKind::Sphere: return {{"kind", "sphere"}, {"dim", space.dim}};
    case SpaceKind::Circle: return {{"kind", "circle"}};
    case SpaceKind::Spider: return {{"kind", "spider"}, {"legs", space.dim}};
  }
  return {};
}

SpaceDescriptor space_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw ConfigError("space descriptor needs a string field 'kind'");
  const std::string kind = j.at("kind");
  if (kind == "euclidean") {
    if (!j.contains("dim")) throw ConfigError("euclidean space needs 'dim'");
    return SpaceDescriptor::euclidean(j.at("dim").get<int>());
  }
  if (kind == "sphere") {
    if (!j.contains("dim")) throw ConfigError("sphere space needs 'dim'");
    return SpaceDescriptor::sphere(j.at("dim").get<int>());
  }
  if (kind == "circle") return SpaceDescriptor::circle();
  if (kind == "spider") {
    if (!j.contains("legs")) throw ConfigError("spider space needs 'legs'");
    return SpaceDescriptor::spider(j.at("legs").get<int>());
  }
  throw ConfigError("unknown space kind '" + kind + "'");
}

json point_to_json(const SpaceDescriptor& space, const SpacePoint& p) {
  switch (space.kind) {
    case SpaceKind::Euclidean:
    case SpaceKind::Sphere:
      return json(p.coords);
    case SpaceKind::Circle:
      return json(p.coords[0]);
    case SpaceKind::Spider:
      return {{"leg", p.leg}, {"radius", p.coords[0]}};
  }
  return {};
}

SpacePoint point_from_json(const SpaceDescriptor& space, const json& j) {
  switch (space.kind) {
    case SpaceKind::Euclidean: {
      if (!j.is_array()) throw ConfigError("euclidean point must be an array");
      auto coords = j.get<std::vector<double>>();
      SpacePoint p = euclidean_point(std::move(coords));
      check_point(space, p);
      return p;
    }
    case SpaceKind::Sphere: {
      if (!j.is_array()) throw ConfigError("sphere point must be an array");
      SpacePoint p{j.get<std::vector<double>>(), 0};
      check_point(space, p);
      return p;
    }
    case SpaceKind::Circle:
      if (!j.is_number()) throw ConfigError("circle point must be an angle");
      return circle_point(j.get<double>());
    case SpaceKind::Spider: {
      if (!j.is_object() || !j.contains("leg") || !j.contains("radius"))
        throw ConfigError("spider point must be {leg, radius}");
      SpacePoint p = spider_point(j.at("leg").get<int>(), j.at("radius").get<double>());
      check_point(space, p);
      return p;
    }
  }
  throw ConfigError("unknown space kind");
}

json sample_to_json(const Sample& x) {
  json points = json::array();
  for (const auto& p : x.points()) points.push_back(point_to_json(x.space(), p));
  return {{"schema_version", kSchemaVersion}, {"space", space_to_json(x.space())},
          {"points", points}};
}

Sample sample_from_json(const json& j) {
  if (!j.is_object() || !j.contains("space") || !j.contains("points"))
    throw ConfigError("sample JSON needs 'space' and 'points'");
  const SpaceDescriptor space = space_from_json(j.at("space"));
  if (!j.at("points").is_array() || j.at("points").empty())
    throw ConfigError("sample needs a non-empty 'points' array");
  std::vector<SpacePoint> points;
  for (const auto& pj : j.at("points")) points.push_back(point_from_json(space, pj));
  return Sample(space, std::move(points));
}

json measure_to_json(const AtomicMeasure& P) {
  json atoms = json::array();
  for (const auto& a : P.atoms()) atoms.push_back(point_to_json(P.space(), a));
  return {{"schema_version", kSchemaVersion},
          {"space", space_to_json(P.space())},
          {"atoms", atoms},
          {"weights", P.weights()}};
}

AtomicMeasure measure_from_json(const json& j) {
  if (!j.is_object() || !j.contains("space") || !j.contains("atoms") || !j.contains("weights"))
    throw ConfigError("measure JSON needs 'space', 'atoms' and 'weights'");
  const SpaceDescriptor space = space_from_json(j.at("space"));
  std::vector<SpacePoint> atoms;
  for (const auto& aj : j.at("atoms")) atoms.push_back(point_from_json(space, aj));
  const auto weights = j.at("weights").get<std::vector<double>>();
  return AtomicMeasure(space, std::move(atoms), weights);
}

json law_to_json(const SpaceDescriptor& space, const DistributionSpec& law) {
  using Law = DistributionSpec::Law;
  json j;
  switch (law.law) {
    case Law::Atomic: {
      j["law"] = "atomic";
      json atoms = json::array();
      for (const auto& a : law.atoms) atoms.push_back(point_to_json(space, a));
      j["atoms"] = atoms;
      j["weights"] = law.weights;
      break;
    }
    case Law::Gaussian:
      j["law"] = "gaussian";
      j["mean"] = point_to_json(space, law.center);
      j["sigma"] = law.sigma.size() == 1 ? json(law.sigma[0]) : json(law.sigma);
      break;
    case Law::UniformBall:
      j["law"] = "uniform_ball";
      j["center"] = point_to_json(space, law.center);
      j["radius"] = law.radius;
      break;
    case Law::SphereWrappedGaussian:
      j["law"] = "wrapped_gaussian";
      j["pole"] = point_to_json(space, law.center);
      j["sigma"] = law.sigma[0];
      break;
    case Law::SphereUniform:
    case Law::CircleUniform:
      j["law"] = "uniform";
      break;
    case Law::CircleWrappedGaussian:
      j["law"] = "wrapped_gaussian";
      j["mean"] = law.center.coords[0];
      j["sigma"] = law.sigma[0];
      break;
    case Law::CircleUniformArc:
      j["law"] = "uniform_arc";
      j["center"] = law.center.coords[0];
      j["half_width"] = law.radius;
      break;
    case Law::SpiderMixture: {
      j["law"] = "spider_mixture";
      j["leg_weights"] = law.leg_weights;
      json radial = json::array();
      for (const auto& r : law.radial) {
        if (r.kind == DistributionSpec::RadialLaw::Kind::Dirac)
          radial.push_back({{"kind", "dirac"}, {"radius", r.a}});
        else
          radial.push_back({{"kind", "uniform"}, {"min", r.a}, {"max", r.b}});
      }
      j["radial"] = radial;
      break;
    }
    case Law::Mixture: {
      j["law"] = "mixture";
      j["weights"] = law.component_weights;
      json comps = json::array();
      for (const auto& c : law.components) comps.push_back(law_to_json(space, c));
      j["components"] = comps;
      break;
    }
  }
  return j;
}

DistributionSpec law_from_json(const SpaceDescriptor& space, const json& j) {
  using Law = DistributionSpec::Law;
  if (!j.is_object() || !j.contains("law") || !j.at("law").is_string())
    throw ConfigError("law JSON needs a string field 'law'");
  const std::string name = j.at("law");
  DistributionSpec law;
  if (name == "atomic") {
    law.law = Law::Atomic;
    if (!j.contains("atoms") || !j.contains("weights"))
      throw ConfigError("atomic law needs 'atoms' and 'weights'");
    for (const auto& aj : j.at("atoms")) law.atoms.push_back(point_from_json(space, aj));
    law.weights = j.at("weights").get<std::vector<double>>();
  } else if (name == "gaussian") {
    law.law = Law::Gaussian;
    if (!j.contains("mean") || !j.contains("sigma"))
      throw ConfigError("gaussian law needs 'mean' and 'sigma'");
    law.center = point_from_json(space, j.at("mean"));
    if (j.at("sigma").is_array())
      law.sigma = j.at("sigma").get<std::vector<double>>();
    else
      law.sigma = {j.at("sigma").get<double>()};
  } else if (name == "uniform_ball") {
    law.law = Law::UniformBall;
    if (!j.contains("center") || !j.contains("radius"))
      throw ConfigError("uniform_ball law needs 'center' and 'radius'");
    law.center = point_from_json(space, j.at("center"));
    law.radius = j.at("radius").get<double>();
  } else if (name == "wrapped_gaussian") {
    if (space.kind == SpaceKind::Sphere) {
      law.law = Law::SphereWrappedGaussian;
      if (!j.contains("pole") || !j.contains("sigma"))
        throw ConfigError("wrapped_gaussian on the sphere needs 'pole' and 'sigma'");
      law.center = point_from_json(space, j.at("pole"));
      law.sigma = {j.at("sigma").get<double>()};
    } else {
      law.law = Law::CircleWrappedGaussian;
      if (!j.contains("mean") || !j.contains("sigma"))
        throw ConfigError("wrapped_gaussian on the circle needs 'mean' and 'sigma'");
      law.center = circle_point(j.at("mean").get<double>());
      law.sigma = {j.at("sigma").get<double>()};
    }
  } else if (name == "uniform") {
    law.law = space.kind == SpaceKind::Sphere ? Law::SphereUniform : Law::CircleUniform;
  } else if (name == "uniform_arc") {
    law.law = Law::CircleUniformArc;
    if (!j.contains("center") || !j.contains("half_width"))
      throw ConfigError("uniform_arc law needs 'center' and 'half_width'");
    law.center = circle_point(j.at("center").get<double>());
    law.radius = j.at("half_width").get<double>();
  } else if (name == "spider_mixture") {
    law.law = Law::SpiderMixture;
    if (!j.contains("leg_weights") || !j.contains("radial"))
      throw ConfigError("spider_mixture law needs 'leg_weights' and 'radial'");
    law.leg_weights = j.at("leg_weights").get<std::vector<double>>();
    for (const auto& rj : j.at("radial")) {
      DistributionSpec::RadialLaw r;
      const std::string kind = rj.value("kind", "dirac");
      if (kind == "dirac") {
        r.kind = DistributionSpec::RadialLaw::Kind::Dirac;
        r.a = rj.value("radius", 1.0);
      } else if (kind == "uniform") {
        r.kind = DistributionSpec::RadialLaw::Kind::Uniform;
        r.a = rj.value("min", 0.0);
        r.b = rj.value("max", 1.0);
      } else {
        throw ConfigError("unknown radial law kind '" + kind + "'");
      }
      law.radial.push_back(r);
    }
  } else if (name == "mixture") {
    law.law = Law::Mixture;
    if (!j.contains("weights") || !j.contains("components"))
      throw ConfigError("mixture law needs 'weights' and 'components'");
    law.component_weights = j.at("weights").get<std::vector<double>>();
    for (const auto& cj : j.at("components"))
      law.components.push_back(law_from_json(space, cj));
  } else {
    throw ConfigError("unknown law '" + name + "'");
  }
  check_law(space, law);
  return law;
}

json solver_options_to_json(const SolverOptions& opts) {
  return {{"restarts", opts.restarts},
          {"max_iterations", opts.max_iterations},
          {"rel_tolerance", opts.rel_tolerance},
          {"merge_tolerance", opts.merge_tolerance},
          {"seed", opts.seed}};
}

SolverOptions solver_options_from_json(const json& j) {
  SolverOptions opts;
  if (!j.is_object()) throw ConfigError("solver options must be an object");
  opts.restarts = j.value("restarts", opts.restarts);
  opts.max_iterations = j.value("max_iterations", opts.max_iterations);
  opts.rel_tolerance = j.value("rel_tolerance", opts.rel_tolerance);
  opts.merge_tolerance = j.value("merge_tolerance", opts.merge_tolerance);
  opts.seed = j.value("seed", opts.seed);
  if (opts.restarts < 1 || opts.max_iterations < 1 || opts.rel_tolerance <= 0.0 ||
      opts.merge_tolerance < 0.0)
    throw ConfigError("solver options must be positive");
  return opts;
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
  json j{{"schema_version", kSchemaVersion},
         {"experiment", cfg.experiment},
         {"space", space_to_json(cfg.space)},
         {"population", law_to_json(cfg.space, cfg.population)},
         {"p", cfg.p},
         {"q", cfg.q},
         {"sample_sizes", cfg.sample_sizes},
         {"replicates", cfg.replicates},
         {"seed", cfg.seed},
         {"solver", solver_options_to_json(cfg.solver)},
         {"threads", cfg.threads},
         {"reference_size", cfg.reference_size},
         {"fd_step_rel", cfg.fd_step_rel}};
  if (cfg.kbar) j["kbar"] = cfg.kbar->parts;
  if (!cfg.epsilon_grid.empty()) j["epsilon_grid"] = cfg.epsilon_grid;
  return j;
}

std::vector<std::string> validate_experiment_config(const json& j) {
  std::vector<std::string> errors;
  if (!j.is_object()) {
    errors.push_back("config must be a JSON object");
    return errors;
  }
  static const std::vector<std::string> kExperiments = {
      "consistency", "error_bound", "rate", "clt", "exchangeable_clt", "stickiness"};

  if (!j.contains("experiment") || !j.at("experiment").is_string()) {
    errors.push_back("experiment: required string field");
  } else {
    const std::string e = j.at("experiment");
    if (std::find(kExperiments.begin(), kExperiments.end(), e) == kExperiments.end())
      errors.push_back("experiment: unknown experiment '" + e + "'");
  }

  SpaceDescriptor space;
  bool have_space = false;
  if (!j.contains("space")) {
    errors.push_back("space: required field");
  } else {
    try {
      space = space_from_json(j.at("space"));
      have_space = true;
    } catch (const Error& e) {
      errors.push_back(std::string("space: ") + e.what());
    }
  }

  if (!j.contains("population")) {
    errors.push_back("population: required field");
  } else if (have_space) {
    try {
      (void)law_from_json(space, j.at("population"));
    } catch (const Error& e) {
      errors.push_back(std::string("population: ") + e.what());
    }
  }

  if (j.contains("p")) {
    if (!j.at("p").is_number() || j.at("p").get<double>() < 1.0)
      errors.push_back("p: must be a number >= 1");
  }
  if (j.contains("q")) {
    if (!j.at("q").is_number_integer() || j.at("q").get<int>() < 1)
      errors.push_back("q: must be a positive integer");
  }
  if (j.contains("kbar")) {
    try {
      Partition(j.at("kbar").get<std::vector<int>>());
    } catch (const std::exception& e) {
      errors.push_back(std::string("kbar: ") + e.what());
    }
  }

  if (!j.contains("sample_sizes") || !j.at("sample_sizes").is_array() ||
      j.at("sample_sizes").empty()) {
    errors.push_back("sample_sizes: required non-empty array");
  } else {
    int prev = 0;
    for (const auto& v : j.at("sample_sizes")) {
      if (!v.is_number_integer() || v.get<int>() < 1) {
        errors.push_back("sample_sizes: entries must be positive integers");
        break;
      }
      if (v.get<int>() <= prev) {
        errors.push_back("sample_sizes: entries must be strictly increasing");
        break;
      }
      prev = v.get<int>();
    }
  }

  if (!j.contains("replicates")) {
    errors.push_back("replicates: required field");
  } else if (!j.at("replicates").is_number_integer() || j.at("replicates").get<int>() < 1) {
    errors.push_back("replicates: must be a positive integer");
  }

  if (!j.contains("seed")) {
    errors.push_back("seed: required field");
  } else if (!j.at("seed").is_number()) {
    errors.push_back("seed: must be a number");
  }

  if (j.contains("solver")) {
    try {
      (void)solver_options_from_json(j.at("solver"));
    } catch (const Error& e) {
      errors.push_back(std::string("solver: ") + e.what());
    }
  }
  if (j.contains("threads") &&
      (!j.at("threads").is_number_integer() || j.at("threads").get<int>() < 0))
    errors.push_back("threads: must be a non-negative integer");
  if (j.contains("reference_size") && (!j.at("reference_size").is_number_integer() ||
                                       j.at("reference_size").get<int>() < 100))
    errors.push_back("reference_size: must be an integer >= 100");
  if (j.contains("fd_step_rel") &&
      (!j.at("fd_step_rel").is_number() || j.at("fd_step_rel").get<double>() <= 0.0))
    errors.push_back("fd_step_rel: must be a positive number");
  if (j.contains("epsilon_grid")) {
    if (!j.at("epsilon_grid").is_array())
      errors.push_back("epsilon_grid: must be an array of numbers");
  }
  return errors;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  const auto errors = validate_experiment_config(j);
  if (!errors.empty()) {
    std::string joined = "invalid experiment config:";
    for (const auto& e : errors) joined += "\n  - " + e;
    throw ConfigError(joined);
  }
  ExperimentConfig cfg;
  cfg.experiment = j.at("experiment");
  cfg.space = space_from_json(j.at("space"));
  cfg.population = law_from_json(cfg.space, j.at("population"));
  cfg.p = j.value("p", 2.0);
  cfg.q = j.value("q", 1);
  if (j.contains("kbar")) cfg.kbar = Partition(j.at("kbar").get<std::vector<int>>());
  cfg.sample_sizes = j.at("sample_sizes").get<std::vector<int>>();
  cfg.replicates = j.at("replicates").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("solver")) cfg.solver = solver_options_from_json(j.at("solver"));
  cfg.solver.seed = cfg.seed;
  cfg.threads = j.value("threads", 1);
  cfg.reference_size = j.value("reference_size", cfg.reference_size);
  cfg.fd_step_rel = j.value("fd_step_rel", cfg.fd_step_rel);
  if (j.contains("epsilon_grid"))
    cfg.epsilon_grid = j.at("epsilon_grid").get<std::vector<double>>();
  return cfg;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  return j;
}

}  // namespace polymean
