#include "polymean/asymptotics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>

#include "polymean/stats.hpp"

namespace polymean {

namespace {

using clock_type = std::chrono::steady_clock;

double elapsed_ms(clock_type::time_point start) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - start).count();
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= count) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Compact comma-free representations for the CSV minimizer column.
std::string point_repr(const SpaceDescriptor& space, const SpacePoint& p) {
  switch (space.kind) {
    case SpaceKind::Euclidean:
    case SpaceKind::Sphere: {
      std::string s;
      for (std::size_t i = 0; i < p.coords.size(); ++i) {
        if (i) s += ';';
        s += format_double(p.coords[i]);
      }
      return s;
    }
    case SpaceKind::Circle:
      return format_double(p.coords[0]);
    case SpaceKind::Spider:
      return std::to_string(p.leg) + ":" + format_double(p.coords[0]);
  }
  return {};
}

std::string measure_repr(const AtomicMeasure& P) {
  std::string s;
  for (int i = 0; i < P.size(); ++i) {
    if (i) s += '|';
    s += format_double(P.weights()[i]) + "@" + point_repr(P.space(), P.atoms()[i]);
  }
  return s;
}

std::string centers_repr(const SpaceDescriptor& space, const std::vector<SpacePoint>& cs) {
  std::string s;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (i) s += '|';
    s += point_repr(space, cs[i]);
  }
  return s;
}

Sample draw_sample(const SpaceDescriptor& space, const DistributionSpec& law, int n, Rng rng) {
  std::vector<SpacePoint> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) pts.push_back(sample_point(space, law, rng));
  return Sample(space, std::move(pts));
}

// Stream tags keep the independent random streams of one experiment apart.
constexpr std::uint64_t kTrialTag = 0xA11CE;
constexpr std::uint64_t kReferenceTag = 0x5EED;
constexpr std::uint64_t kSolverTag = 0x50F7;
constexpr std::uint64_t kProbeTag = 0xBEA3;
constexpr std::uint64_t kComponentTag = 0xC0;

AtomicMeasure reference_measure(const ExperimentConfig& cfg) {
  if (cfg.population.law == DistributionSpec::Law::Atomic)
    return AtomicMeasure(cfg.space, cfg.population.atoms, cfg.population.weights)
        .normalized(0.0);
  const Sample s =
      draw_sample(cfg.space, cfg.population, cfg.reference_size,
                  Rng(cfg.seed).stream(kReferenceTag));
  return empirical_measure(s);
}

bool oracle_supported(const SpaceDescriptor& space, double p) {
  switch (space.kind) {
    case SpaceKind::Euclidean:
      return p == 2.0 || space.dim == 1;
    case SpaceKind::Circle:
    case SpaceKind::Spider:
      return true;
    case SpaceKind::Sphere:
      return false;
  }
  return false;
}

struct PopulationTarget {
  AtomicMeasure reference;          // population itself, or a reference empirical law
  std::vector<AtomicMeasure> qmeans;  // distinct population q-means found
  double objective = 0.0;
  bool exact = false;
};

// Population q-means: exact brute force on small atomic populations, else the
// best of a generous multistart. Near-optimal runs that sit at distinct
// minimizers are all reported, which is how non-uniqueness is detected.
PopulationTarget population_q_means(const ExperimentConfig& cfg) {
  PopulationTarget target{reference_measure(cfg), {}, 0.0, false};
  const AtomicMeasure& ref = target.reference;

  SolverOptions opts = cfg.solver;
  opts.seed = Rng(cfg.seed).stream(kSolverTag, 0).next_u64();
  opts.restarts = std::max(opts.restarts, 16);

  std::vector<std::pair<AtomicMeasure, double>> candidates;  // (minimizer, objective)
  double best = std::numeric_limits<double>::infinity();

  if (cfg.population.law == DistributionSpec::Law::Atomic && ref.size() <= 10 &&
      cfg.q <= 4 && oracle_supported(cfg.space, cfg.p)) {
    const auto bf = brute_force_q_mean(ref, cfg.q, cfg.p);
    std::vector<SpacePoint> atoms;
    std::vector<double> weights;
    for (std::size_t b = 0; b < bf.clusters.size(); ++b) {
      double w = 0.0;
      for (int i : bf.clusters[b]) w += ref.weights()[i];
      if (w <= 0.0) continue;
      atoms.push_back(bf.centers[b]);
      weights.push_back(w);
    }
    candidates.emplace_back(AtomicMeasure(cfg.space, atoms, weights).normalized(0.0),
                            bf.objective);
    best = bf.objective;
    target.exact = true;
  }

  // Multistart around the projection; all restart minimizers participate so
  // that distinct optima surface.
  for (int r = 0; r < opts.restarts; ++r) {
    SolverOptions one = opts;
    one.restarts = 1;
    one.seed = Rng(opts.seed).stream(static_cast<std::uint64_t>(r), 0x9A).next_u64();
    auto res = q_mean(ref, cfg.q, cfg.p, one);
    best = std::min(best, res.objective);
    candidates.emplace_back(std::move(res.minimizer), res.objective);
  }

  const double obj_slack = std::max(1e-9, 1e-7 * (1.0 + best));
  const double dist_slack = 1e-4 * (1.0 + best);
  for (const auto& [cand, obj] : candidates) {
    if (obj > best + obj_slack) continue;
    bool duplicate = false;
    for (const auto& kept : target.qmeans)
      if (wasserstein_distance(kept, cand, cfg.p) <= dist_slack) {
        duplicate = true;
        break;
      }
    if (!duplicate) target.qmeans.push_back(cand);
  }
  target.objective = best;
  return target;
}

json per_n_table(const std::vector<int>& sizes,
                 const std::vector<std::vector<double>>& per_n_values,
                 const std::function<json(const std::vector<double>&)>& reduce) {
  json rows = json::array();
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    json row = reduce(per_n_values[i]);
    row["n"] = sizes[i];
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// consistency
// ---------------------------------------------------------------------------

ExperimentResult run_consistency(const ExperimentConfig& cfg) {
  ExperimentResult result;
  result.config = cfg;
  const auto target = population_q_means(cfg);
  const bool use_wbar = cfg.kbar.has_value();
  std::vector<double> wbar;
  if (use_wbar) {
    const double n = static_cast<double>(cfg.kbar->n());
    for (int part : cfg.kbar->parts) wbar.push_back(part / n);
  }

  const int reps = cfg.replicates;
  result.trials.assign(cfg.sample_sizes.size() * reps, {});
  parallel_for(static_cast<int>(result.trials.size()), cfg.threads, [&](int idx) {
    const auto t0 = clock_type::now();
    const int size_idx = idx / reps;
    const int r = idx % reps;
    const int n = cfg.sample_sizes[size_idx];
    Rng rng = Rng(cfg.seed).stream(static_cast<std::uint64_t>(n), r, kTrialTag);
    const Sample s = draw_sample(cfg.space, cfg.population, n, rng);
    const AtomicMeasure P_n = empirical_measure(s);
    SolverOptions opts = cfg.solver;
    opts.seed = Rng(cfg.seed).stream(static_cast<std::uint64_t>(n), r, kSolverTag).next_u64();
    MeanResult<AtomicMeasure> res =
        use_wbar ? wbar_mean(P_n, wbar, cfg.p, opts) : q_mean(P_n, cfg.q, cfg.p, opts);
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& mu : target.qmeans)
      dist = std::min(dist, wasserstein_distance(res.minimizer, mu, cfg.p));
    TrialRecord& trial = result.trials[idx];
    trial.n = n;
    trial.replicate = r;
    trial.objective = res.objective;
    trial.distance_to_target = dist;
    trial.minimizer = measure_repr(res.minimizer);
    trial.wall_ms = elapsed_ms(t0);
  });

  // Per-n distance table with a monotone-trend summary over the maxima.
  std::vector<std::vector<double>> dists(cfg.sample_sizes.size());
  for (std::size_t i = 0; i < cfg.sample_sizes.size(); ++i)
    for (int r = 0; r < reps; ++r)
      dists[i].push_back(result.trials[i * reps + r].distance_to_target);

  std::vector<double> maxima, medians;
  for (auto& v : dists) {
    maxima.push_back(*std::max_element(v.begin(), v.end()));
    medians.push_back(quantile(v, 0.5));
  }
  int decreases = 0;
  for (std::size_t i = 1; i < maxima.size(); ++i)
    if (maxima[i] < maxima[i - 1]) ++decreases;

  json summary;
  summary["table"] = per_n_table(cfg.sample_sizes, dists, [](const std::vector<double>& v) {
    return json{{"max_distance", *std::max_element(v.begin(), v.end())},
                {"median_distance", quantile(v, 0.5)},
                {"mean_distance", std::accumulate(v.begin(), v.end(), 0.0) / v.size()}};
  });
  summary["monotone_decrease_fraction"] =
      maxima.size() > 1 ? static_cast<double>(decreases) / (maxima.size() - 1) : 1.0;
  if (cfg.sample_sizes.size() >= 2) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < medians.size(); ++i)
      if (medians[i] > 0.0) {
        lx.push_back(std::log(static_cast<double>(cfg.sample_sizes[i])));
        ly.push_back(std::log(medians[i]));
      }
    if (lx.size() >= 2) summary["median_loglog_slope"] = least_squares_slope(lx, ly);
  }
  summary["population"] = {{"count", target.qmeans.size()},
                           {"objective", target.objective},
                           {"exact", target.exact}};
  json reprs = json::array();
  for (const auto& mu : target.qmeans) reprs.push_back(measure_repr(mu));
  summary["population"]["qmeans"] = reprs;
  result.summary = std::move(summary);
  return result;
}

// ---------------------------------------------------------------------------
// error bound
// ---------------------------------------------------------------------------

ExperimentResult run_error_bound(const ExperimentConfig& cfg) {
  if (cfg.population.law != DistributionSpec::Law::Atomic)
    throw ConfigError("error_bound requires an atomic population");
  ExperimentResult result;
  result.config = cfg;
  const auto target = population_q_means(cfg);
  const AtomicMeasure& P = target.reference;
  const AtomicMeasure& Q0 = target.qmeans.front();
  const double d0 = wasserstein_distance(P, Q0, cfg.p);

  const int reps = cfg.replicates;
  result.trials.assign(cfg.sample_sizes.size() * reps, {});
  parallel_for(static_cast<int>(result.trials.size()), cfg.threads, [&](int idx) {
    const auto t0 = clock_type::now();
    const int size_idx = idx / reps;
    const int r = idx % reps;
    const int n = cfg.sample_sizes[size_idx];
    Rng rng = Rng(cfg.seed).stream(static_cast<std::uint64_t>(n), r, kTrialTag);
    const Sample s = draw_sample(cfg.space, cfg.population, n, rng);
    const AtomicMeasure P_n = empirical_measure(s);
    SolverOptions opts = cfg.solver;
    opts.seed = Rng(cfg.seed).stream(static_cast<std::uint64_t>(n), r, kSolverTag).next_u64();
    const auto res = q_mean(P_n, cfg.q, cfg.p, opts);
    const double lhs = wasserstein_distance(P, res.minimizer, cfg.p) - d0;
    const double rhs = wasserstein_distance(P_n, P, cfg.p);
    TrialRecord& trial = result.trials[idx];
    trial.n = n;
    trial.replicate = r;
    trial.objective = res.objective;
    trial.distance_to_target = wasserstein_distance(res.minimizer, Q0, cfg.p);
    trial.extras = {{"lhs", lhs}, {"rhs", rhs}, {"residual", lhs - rhs}};
    trial.minimizer = measure_repr(res.minimizer);
    trial.wall_ms = elapsed_ms(t0);
  });

  const double rate = -1.0 / (2.0 * cfg.p);
  std::vector<std::vector<double>> residuals(cfg.sample_sizes.size());
  for (std::size_t i = 0; i < cfg.sample_sizes.size(); ++i)
    for (int r = 0; r < reps; ++r)
      residuals[i].push_back(result.trials[i * reps + r].extras[2].second);

  // C fitted on the smallest n; coverage then counted over every cell.
  std::vector<double> scaled_first;
  for (double res : residuals[0])
    scaled_first.push_back(res * std::pow(static_cast<double>(cfg.sample_sizes[0]), -rate));
  const double fitted_c = std::max(0.0, 1.25 * quantile(scaled_first, 0.95));
  long covered = 0, total = 0;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const double bound = fitted_c * std::pow(static_cast<double>(cfg.sample_sizes[i]), rate);
    for (double res : residuals[i]) {
      covered += res <= bound + 1e-12 ? 1 : 0;
      ++total;
    }
  }

  json summary;
  summary["table"] =
      per_n_table(cfg.sample_sizes, residuals, [](const std::vector<double>& v) {
        return json{{"residual_median", quantile(v, 0.5)},
                    {"residual_q95", quantile(v, 0.95)}};
      });
  summary["fitted_c"] = fitted_c;
  summary["rate_exponent"] = rate;
  summary["coverage"] = static_cast<double>(covered) / static_cast<double>(total);
  {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < residuals.size(); ++i) {
      const double q95 = quantile(residuals[i], 0.95);
      if (q95 > 1e-12) {
        lx.push_back(std::log(static_cast<double>(cfg.sample_sizes[i])));
        ly.push_back(std::log(q95));
      }
    }
    if (lx.size() >= 2) summary["residual_q95_slope"] = least_squares_slope(lx, ly);
  }
  summary["population"] = {{"objective", d0}, {"qmean", measure_repr(Q0)},
                           {"exact", target.exact}};
  result.summary = std::move(summary);
  return result;
}

// ---------------------------------------------------------------------------
// rate
// ---------------------------------------------------------------------------

// Coercivity probe: along random perturbation rays of Q0 inside the skeleton,
// fit log(objective excess) against log(distance from Q0).
json coercivity_probe(const ExperimentConfig& cfg, const AtomicMeasure& reference,
                      const AtomicMeasure& Q0) {
  // A large continuous reference makes every probe evaluation an LP; cap it.
  AtomicMeasure probe_ref = reference;
  if (cfg.population.law != DistributionSpec::Law::Atomic &&
      reference.size() > 20000) {
    const Sample s = draw_sample(cfg.space, cfg.population, 20000,
                                 Rng(cfg.seed).stream(kProbeTag, 1));
    probe_ref = empirical_measure(s);
  }
  const double base = wasserstein_distance(probe_ref, Q0, cfg.p);
  const double scale = std::max(1e-3, 0.5 * base);

  std::vector<double> alphas;
  json rays = json::array();
  for (int ray = 0; ray < 8; ++ray) {
    Rng rng = Rng(cfg.seed).stream(kProbeTag, ray, 2);
    // One random unit perturbation direction per atom of Q0.
    std::vector<std::vector<double>> dirs;
    std::vector<int> legs;
    for (int a = 0; a < Q0.size(); ++a) {
      if (cfg.space.riemannian()) {
        std::vector<double> d(cfg.space.tangent_dim());
        double n2 = 0.0;
        for (auto& x : d) {
          x = rng.gaussian();
          n2 += x * x;
        }
        for (auto& x : d) x /= std::sqrt(std::max(n2, 1e-30));
        dirs.push_back(std::move(d));
        legs.push_back(0);
      } else {
        // Spider: radial bump; atoms at the center move out a random leg.
        const int leg = Q0.atoms()[a].leg > 0 ? Q0.atoms()[a].leg
                                              : 1 + static_cast<int>(rng.index(cfg.space.dim));
        dirs.push_back({rng.gaussian() >= 0.0 ? 1.0 : -1.0});
        legs.push_back(leg);
      }
    }
    std::vector<double> lx, ly;
    for (int step = 0; step < 8; ++step) {
      const double s = scale * std::pow(0.5, step);
      std::vector<SpacePoint> atoms;
      for (int a = 0; a < Q0.size(); ++a) {
        if (cfg.space.riemannian()) {
          const auto basis = tangent_basis(cfg.space, Q0.atoms()[a]);
          TangentVector v{Q0.atoms()[a],
                          std::vector<double>(cfg.space.point_size(), 0.0)};
          for (int b = 0; b < cfg.space.tangent_dim(); ++b)
            for (int kC = 0; kC < cfg.space.point_size(); ++kC)
              v.components[kC] += s * dirs[a][b] * basis[b][kC];
          atoms.push_back(exp_map(cfg.space, v));
        } else {
          const double r0 = Q0.atoms()[a].coords[0];
          const double r = std::max(0.0, r0 + s * dirs[a][0]);
          atoms.push_back(spider_point(r > 0.0 ? legs[a] : 0, r));
        }
      }
      AtomicMeasure Qs = AtomicMeasure(cfg.space, atoms, Q0.weights()).normalized(0.0);
      const double excess = wasserstein_distance(probe_ref, Qs, cfg.p) - base;
      const double dist = wasserstein_distance(Qs, Q0, cfg.p);
      if (excess > 1e-12 && dist > 1e-12) {
        lx.push_back(std::log(dist));
        ly.push_back(std::log(excess));
      }
    }
    if (lx.size() >= 3) {
      const double alpha = least_squares_slope(lx, ly);
      alphas.push_back(alpha);
      rays.push_back({{"ray", ray}, {"alpha", alpha}, {"points", lx.size()}});
    } else {
      rays.push_back({{"ray", ray}, {"alpha", nullptr}, {"points", lx.size()}});
    }
  }
  json out;
  out["rays"] = rays;
  if (!alphas.empty()) out["alpha"] = quantile(alphas, 0.5);
  out["base_objective"] = base;
  return out;
}

ExperimentResult run_rate(const ExperimentConfig& cfg) {
  ExperimentResult result;
  result.config = cfg;
  const auto target = population_q_means(cfg);
  if (target.qmeans.size() > 1) {
    std::string diag = "population q-mean is not unique; found " +
                       std::to_string(target.qmeans.size()) + " minimizers:";
    for (const auto& mu : target.qmeans) diag += " [" + measure_repr(mu) + "]";
    throw ExperimentAbortError(diag);
  }
  const AtomicMeasure& Q0 = target.qmeans.front();

  const int reps = cfg.replicates;
  result.trials.assign(cfg.sample_sizes.size() * reps, {});
  parallel_for(static_cast<int>(result.trials.size()), cfg.threads, [&](int idx) {
    const auto t0 = clock_type::now();
    const int size_idx = idx / reps;
    const int r = idx % reps;
    const int n = cfg.sample_sizes[size_idx];
    Rng rng = Rng(cfg.seed).stream(static_cast<std::uint64_t>(n), r, kTrialTag);
    const Sample s = draw_sample(cfg.space, cfg.population, n, rng);
    const AtomicMeasure P_n = empirical_measure(s);
    SolverOptions opts = cfg.solver;
    opts.seed = Rng(cfg.seed).stream(static_cast<std::uint64_t>(n), r, kSolverTag).next_u64();
    const auto res = q_mean(P_n, cfg.q, cfg.p, opts);
    TrialRecord& trial = result.trials[idx];
    trial.n = n;
    trial.replicate = r;
    trial.objective = res.objective;
    trial.distance_to_target = wasserstein_distance(res.minimizer, Q0, cfg.p);
    trial.minimizer = measure_repr(res.minimizer);
    trial.wall_ms = elapsed_ms(t0);
  });

  std::vector<std::vector<double>> dists(cfg.sample_sizes.size());
  for (std::size_t i = 0; i < cfg.sample_sizes.size(); ++i)
    for (int r = 0; r < reps; ++r)
      dists[i].push_back(result.trials[i * reps + r].distance_to_target);

  json summary;
  summary["table"] = per_n_table(cfg.sample_sizes, dists, [](const std::vector<double>& v) {
    double zeros = 0.0;
    for (double d : v) zeros += d == 0.0 ? 1.0 : 0.0;
    return json{{"median_distance", quantile(v, 0.5)},
                {"zero_fraction", zeros / v.size()}};
  });
  {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < dists.size(); ++i) {
      const double med = quantile(dists[i], 0.5);
      if (med > 0.0) {
        lx.push_back(std::log(static_cast<double>(cfg.sample_sizes[i])));
        ly.push_back(std::log(med));
      }
    }
    if (lx.size() >= 2) summary["rate_slope"] = least_squares_slope(lx, ly);
  }
  summary["coercivity"] = coercivity_probe(cfg, target.reference, Q0);
  summary["population"] = {{"objective", target.objective},
                           {"qmean", measure_repr(Q0)},
                           {"exact", target.exact}};
  result.summary = std::move(summary);
  return result;
}

// ---------------------------------------------------------------------------
// CLT machinery
// ---------------------------------------------------------------------------

struct CltFrame {
  std::vector<SpacePoint> centers;                  // population target z0
  std::vector<std::vector<std::vector<double>>> bases;  // per center
  int tdim = 0;
  int dim_total = 0;
};

// Gradient of min_j d(x, z_j)^p in the product chart at z0; returns false for
// draws where the gradient is undefined (ties, cut loci, singular atoms).
bool gradient_at(const ExperimentConfig& cfg, const CltFrame& frame, const SpacePoint& x,
                 Eigen::VectorXd& out) {
  const int q = static_cast<int>(frame.centers.size());
  double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
  int arg = -1;
  for (int j = 0; j < q; ++j) {
    const double d = distance(cfg.space, x, frame.centers[j]);
    if (d < d1) {
      d2 = d1;
      d1 = d;
      arg = j;
    } else if (d < d2) {
      d2 = d;
    }
  }
  if (q > 1 && d2 - d1 <= 1e-12 * (1.0 + d1)) return false;  // tie (medial axis)
  if (cfg.p < 2.0 && d1 <= 1e-12) return false;              // singular atom
  if (cfg.space.kind == SpaceKind::Sphere && d1 >= kPi - 1e-6) return false;  // cut locus
  if (cfg.space.kind == SpaceKind::Circle && d1 >= kPi - 1e-9) return false;

  out = Eigen::VectorXd::Zero(frame.dim_total);
  if (d1 <= 1e-15) return true;  // zero gradient for p >= 2
  const TangentVector lg = log_map(cfg.space, frame.centers[arg], x);
  const double scale = -cfg.p * std::pow(d1, cfg.p - 2.0);
  for (int b = 0; b < frame.tdim; ++b) {
    double coord = 0.0;
    for (std::size_t kC = 0; kC < lg.components.size(); ++kC)
      coord += lg.components[kC] * frame.bases[arg][b][kC];
    out[arg * frame.tdim + b] = scale * coord;
  }
  return true;
}

SpacePoint move_center(const ExperimentConfig& cfg, const CltFrame& frame, int center,
                       const Eigen::VectorXd& tangent_coords, double h) {
  TangentVector v{frame.centers[center], std::vector<double>(cfg.space.point_size(), 0.0)};
  for (int b = 0; b < frame.tdim; ++b)
    for (int kC = 0; kC < cfg.space.point_size(); ++kC)
      v.components[kC] += h * tangent_coords[b] * frame.bases[center][b][kC];
  return exp_map(cfg.space, v);
}

ExperimentResult run_clt_impl(const ExperimentConfig& cfg, bool exchangeable) {
  if (!cfg.space.riemannian())
    throw ConfigError("the CLT experiment requires a Riemannian space");
  if (exchangeable && cfg.population.law != DistributionSpec::Law::Mixture)
    throw ConfigError("exchangeable_clt requires a mixture population");

  ExperimentResult result;
  result.config = cfg;

  // Population unweighted q-mean from the reference law.
  const AtomicMeasure reference = reference_measure(cfg);
  SolverOptions popopts = cfg.solver;
  popopts.seed = Rng(cfg.seed).stream(kSolverTag, 7).next_u64();
  popopts.restarts = std::max(popopts.restarts, 8);
  auto pop = unweighted_q_mean(reference, cfg.q, cfg.p, popopts);
  {
    SolverOptions polish = popopts;
    polish.rel_tolerance = std::min(popopts.rel_tolerance, 1e-13);
    polish.max_iterations = popopts.max_iterations * 4;
    pop = unweighted_q_mean_from(reference, pop.minimizer, cfg.p, polish);
  }
  if (static_cast<int>(pop.minimizer.size()) != cfg.q)
    throw ExperimentAbortError("population unweighted q-mean collapsed to fewer than q centers");

  CltFrame frame;
  frame.centers = pop.minimizer;
  frame.tdim = cfg.space.tangent_dim();
  frame.dim_total = cfg.q * frame.tdim;
  for (const auto& c : frame.centers) frame.bases.push_back(tangent_basis(cfg.space, c));

  // Cov(X) over the reference sample, with undefined-gradient draws rejected.
  std::vector<Eigen::VectorXd> gradients;
  long rejected_reference = 0;
  gradients.reserve(reference.size());
  Eigen::VectorXd g;
  for (int i = 0; i < reference.size(); ++i) {
    if (gradient_at(cfg, frame, reference.atoms()[i], g))
      gradients.push_back(g);
    else
      ++rejected_reference;
  }
  const double reject_fraction =
      static_cast<double>(rejected_reference) / static_cast<double>(reference.size());
  if (reject_fraction >= 1e-3)
    throw ExperimentAbortError("undefined-gradient draws exceed 0.1%: fraction " +
                               std::to_string(reject_fraction));
  const Eigen::MatrixXd cov_x = sample_covariance(gradients);

  // Condition check for the exchangeable extension: per-component gradient
  // means must vanish within Monte-Carlo noise.
  json component_check = json::array();
  if (exchangeable) {
    const auto& mixture = cfg.population;
    for (std::size_t c = 0; c < mixture.components.size(); ++c) {
      const int n_c = std::max(10000, cfg.reference_size / 4);
      const Sample s = draw_sample(cfg.space, mixture.components[c], n_c,
                                   Rng(cfg.seed).stream(kComponentTag, c));
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(frame.dim_total);
      Eigen::VectorXd var = Eigen::VectorXd::Zero(frame.dim_total);
      long used = 0;
      for (const auto& x : s.points()) {
        if (!gradient_at(cfg, frame, x, g)) continue;
        mean += g;
        var += g.cwiseProduct(g);
        ++used;
      }
      mean /= static_cast<double>(used);
      var = var / static_cast<double>(used) - mean.cwiseProduct(mean);
      bool ok = true;
      for (int kC = 0; kC < frame.dim_total; ++kC) {
        const double noise = std::sqrt(std::max(var[kC], 1e-30) / used);
        if (std::abs(mean[kC]) > 6.0 * noise) ok = false;
      }
      component_check.push_back({{"component", c},
                                 {"gradient_mean_norm", mean.norm()},
                                 {"ok", ok}});
      if (!ok)
        throw ExperimentAbortError(
            "exchangeable condition violated: component " + std::to_string(c) +
            " has non-vanishing gradient mean " + std::to_string(mean.norm()));
    }
  }

  // Expected Hessian via central finite differences of the reference-averaged
  // objective, in the product normal chart at z0.
  const double step_scale =
      cfg.space.kind == SpaceKind::Euclidean
          ? 1.0 + std::sqrt(std::max(0.0, cov_x.trace()))
          : kPi;
  const double h = cfg.fd_step_rel * step_scale;
  auto averaged_objective = [&](const std::vector<SpacePoint>& centers) {
    double s = 0.0;
    for (int i = 0; i < reference.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers)
        best = std::min(best, distance(cfg.space, reference.atoms()[i], c));
      s += reference.weights()[i] * std::pow(best, cfg.p);
    }
    return s;
  };
  auto displaced = [&](const Eigen::VectorXd& delta) {
    std::vector<SpacePoint> centers = frame.centers;
    for (int j = 0; j < cfg.q; ++j) {
      Eigen::VectorXd local = delta.segment(j * frame.tdim, frame.tdim);
      if (local.norm() > 0.0) centers[j] = move_center(cfg, frame, j, local, 1.0);
    }
    return centers;
  };
  Eigen::MatrixXd hessian(frame.dim_total, frame.dim_total);
  const double g0 = averaged_objective(frame.centers);
  for (int a = 0; a < frame.dim_total; ++a) {
    Eigen::VectorXd ea = Eigen::VectorXd::Zero(frame.dim_total);
    ea[a] = h;
    const double gp = averaged_objective(displaced(ea));
    const double gm = averaged_objective(displaced(-ea));
    hessian(a, a) = (gp - 2.0 * g0 + gm) / (h * h);
    for (int b = a + 1; b < frame.dim_total; ++b) {
      Eigen::VectorXd eb = Eigen::VectorXd::Zero(frame.dim_total);
      eb[b] = h;
      const double gpp = averaged_objective(displaced(ea + eb));
      const double gpm = averaged_objective(displaced(ea - eb));
      const double gmp = averaged_objective(displaced(-ea + eb));
      const double gmm = averaged_objective(displaced(-ea - eb));
      hessian(a, b) = hessian(b, a) = (gpp - gpm - gmp + gmm) / (4.0 * h * h);
    }
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(hessian);
  if (!lu.isInvertible())
    throw ExperimentAbortError("expected Hessian is singular at the population q-mean");
  const Eigen::MatrixXd h_inv = lu.inverse();
  const Eigen::MatrixXd predicted = h_inv * cov_x * h_inv;

  // Replicates: per-n chart coordinates sqrt(n) log_{z0}(z_n).
  const int reps = cfg.replicates;
  result.trials.assign(cfg.sample_sizes.size() * reps, {});
  std::vector<Eigen::VectorXd> coords(result.trials.size(),
                                      Eigen::VectorXd::Zero(frame.dim_total));
  std::vector<char> ok_flags(result.trials.size(), 0);
  std::vector<int> components(result.trials.size(), 0);

  parallel_for(static_cast<int>(result.trials.size()), cfg.threads, [&](int idx) {
    const auto t0 = clock_type::now();
    const int size_idx = idx / reps;
    const int r = idx % reps;
    const int n = cfg.sample_sizes[size_idx];
    Rng rng = Rng(cfg.seed).stream(static_cast<std::uint64_t>(n), r, kTrialTag);
    Sample s = [&] {
      if (!exchangeable) return draw_sample(cfg.space, cfg.population, n, rng);
      // Conditionally i.i.d.: one latent component per replicate.
      const std::size_t c = rng.categorical(cfg.population.component_weights);
      components[idx] = static_cast<int>(c);
      return draw_sample(cfg.space, cfg.population.components[c], n, rng);
    }();
    const AtomicMeasure P_n = empirical_measure(s);
    SolverOptions opts = cfg.solver;
    opts.seed = Rng(cfg.seed).stream(static_cast<std::uint64_t>(n), r, kSolverTag).next_u64();
    const auto res = unweighted_q_mean_from(P_n, frame.centers, cfg.p, opts);

    TrialRecord& trial = result.trials[idx];
    trial.n = n;
    trial.replicate = r;
    trial.objective = res.objective;
    trial.minimizer = centers_repr(cfg.space, res.minimizer);
    bool ok = static_cast<int>(res.minimizer.size()) == cfg.q;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(frame.dim_total);
    double dist_p = 0.0;
    if (ok) {
      // Match the replicate's centers to z0.
      CostMatrix match_cost(cfg.q, cfg.q);
      for (int a = 0; a < cfg.q; ++a)
        for (int b = 0; b < cfg.q; ++b) {
          const double d = distance(cfg.space, frame.centers[a], res.minimizer[b]);
          match_cost(a, b) = d * d;
        }
      const auto match = solve_assignment(match_cost);
      try {
        for (int j = 0; j < cfg.q; ++j) {
          const SpacePoint& zj = res.minimizer[match.perm[j]];
          const TangentVector lg = log_map(cfg.space, frame.centers[j], zj);
          for (int b = 0; b < frame.tdim; ++b) {
            double coord = 0.0;
            for (std::size_t kC = 0; kC < lg.components.size(); ++kC)
              coord += lg.components[kC] * frame.bases[j][b][kC];
            u[j * frame.tdim + b] = std::sqrt(static_cast<double>(n)) * coord;
          }
          dist_p += std::pow(distance(cfg.space, frame.centers[j], zj), cfg.p);
        }
      } catch (const CutLocusError&) {
        ok = false;
      }
    }
    trial.distance_to_target = ok ? std::pow(dist_p / cfg.q, 1.0 / cfg.p) : -1.0;
    trial.extras.reserve(frame.dim_total + 2);
    for (int kC = 0; kC < frame.dim_total; ++kC)
      trial.extras.emplace_back("u" + std::to_string(kC), ok ? u[kC] : 0.0);
    trial.extras.emplace_back("accepted", ok ? 1.0 : 0.0);
    trial.extras.emplace_back("component", static_cast<double>(components[idx]));
    coords[idx] = u;
    ok_flags[idx] = ok ? 1 : 0;
    trial.wall_ms = elapsed_ms(t0);
  });

  json per_n = json::array();
  Eigen::MatrixXd empirical_max_n;
  std::vector<Eigen::VectorXd> max_n_rows;
  for (std::size_t i = 0; i < cfg.sample_sizes.size(); ++i) {
    std::vector<Eigen::VectorXd> rows;
    for (int r = 0; r < reps; ++r)
      if (ok_flags[i * reps + r]) rows.push_back(coords[i * reps + r]);
    json entry{{"n", cfg.sample_sizes[i]}, {"accepted", rows.size()}};
    if (rows.size() >= 2) {
      const Eigen::MatrixXd emp = sample_covariance(rows);
      entry["empirical_covariance"] = json::array();
      for (int a = 0; a < emp.rows(); ++a) {
        json row = json::array();
        for (int b = 0; b < emp.cols(); ++b) row.push_back(emp(a, b));
        entry["empirical_covariance"].push_back(row);
      }
      entry["frobenius_rel_error"] = frobenius_relative_error(emp, predicted);
      if (i + 1 == cfg.sample_sizes.size()) {
        empirical_max_n = emp;
        max_n_rows = rows;
      }
    }
    per_n.push_back(entry);
  }

  auto matrix_json = [](const Eigen::MatrixXd& m) {
    json out = json::array();
    for (int a = 0; a < m.rows(); ++a) {
      json row = json::array();
      for (int b = 0; b < m.cols(); ++b) row.push_back(m(a, b));
      out.push_back(row);
    }
    return out;
  };

  json summary;
  summary["z0"] = centers_repr(cfg.space, frame.centers);
  summary["hessian"] = matrix_json(hessian);
  summary["cov_gradient"] = matrix_json(cov_x);
  summary["predicted_covariance"] = matrix_json(predicted);
  summary["per_n"] = per_n;
  summary["reference_rejected_fraction"] = reject_fraction;
  if (empirical_max_n.size() > 0) {
    summary["empirical_covariance"] = matrix_json(empirical_max_n);
    summary["frobenius_rel_error"] = frobenius_relative_error(empirical_max_n, predicted);
  }
  if (max_n_rows.size() >= static_cast<std::size_t>(frame.dim_total) + 2) {
    const auto mardia = mardia_test(max_n_rows);
    summary["mardia"] = {{"skewness", mardia.skewness},
                         {"kurtosis", mardia.kurtosis},
                         {"skewness_p", mardia.skewness_p},
                         {"kurtosis_p", mardia.kurtosis_p}};
  }
  if (exchangeable) {
    summary["component_check"] = component_check;
    // Per-component covariances at the largest n must agree.
    const std::size_t last = cfg.sample_sizes.size() - 1;
    json per_component = json::array();
    double max_mismatch = 0.0;
    for (std::size_t c = 0; c < cfg.population.components.size(); ++c) {
      std::vector<Eigen::VectorXd> rows;
      for (int r = 0; r < reps; ++r) {
        const std::size_t idx = last * reps + r;
        if (ok_flags[idx] && components[idx] == static_cast<int>(c))
          rows.push_back(coords[idx]);
      }
      json entry{{"component", c}, {"replicates", rows.size()}};
      if (rows.size() >= 8 && empirical_max_n.size() > 0) {
        const Eigen::MatrixXd emp = sample_covariance(rows);
        entry["covariance"] = matrix_json(emp);
        const double mismatch = frobenius_relative_error(emp, empirical_max_n);
        entry["mismatch_vs_pooled"] = mismatch;
        max_mismatch = std::max(max_mismatch, mismatch);
      }
      per_component.push_back(entry);
    }
    summary["per_component"] = per_component;
    summary["max_component_mismatch"] = max_mismatch;
  }
  result.summary = std::move(summary);
  return result;
}

// ---------------------------------------------------------------------------
// stickiness
// ---------------------------------------------------------------------------

ExperimentResult run_stickiness(const ExperimentConfig& cfg) {
  if (cfg.space.kind != SpaceKind::Spider)
    throw ConfigError("stickiness requires a spider space");
  if (cfg.population.law != DistributionSpec::Law::SpiderMixture)
    throw ConfigError("stickiness requires a spider_mixture population");
  for (const auto& r : cfg.population.radial)
    if (r.kind != DistributionSpec::RadialLaw::Kind::Dirac)
      throw ConfigError("stickiness requires Dirac radial laws (point masses per leg)");

  const int legs = cfg.space.dim;
  const std::vector<double>& base = cfg.population.leg_weights;
  std::vector<double> radii;
  for (const auto& r : cfg.population.radial) radii.push_back(r.a);
  std::vector<double> eps_grid = cfg.epsilon_grid;
  if (eps_grid.empty()) eps_grid = {0.0};

  auto shifted_weights = [&](double eps) {
    std::vector<double> w = base;
    w[0] += eps;
    for (int l = 1; l < legs; ++l) w[l] -= eps / (legs - 1);
    for (double v : w)
      if (v < -1e-12)
        throw ConfigError("epsilon " + std::to_string(eps) + " drives a leg weight negative");
    for (double& v : w) v = std::max(0.0, v);
    return w;
  };

  // Population law and its exact mean per epsilon, plus the 1D oracle data:
  // the one-sided derivative at the center along leg 1 and the golden-section
  // minimizer of the population objective on leg 1.
  struct EpsInfo {
    DistributionSpec law;
    AtomicMeasure population;
    SpacePoint mean;
    double center_derivative_leg1 = 0.0;
    double oracle_radius_leg1 = 0.0;
    bool oracle_center = true;
  };
  std::vector<EpsInfo> infos;
  for (double eps : eps_grid) {
    const auto w = shifted_weights(eps);
    DistributionSpec law = cfg.population;
    law.leg_weights = w;
    std::vector<SpacePoint> atoms;
    std::vector<double> weights;
    for (int l = 0; l < legs; ++l) {
      if (w[l] <= 0.0) continue;
      atoms.push_back(spider_point(l + 1, radii[l]));
      weights.push_back(w[l]);
    }
    AtomicMeasure population =
        AtomicMeasure(cfg.space, std::move(atoms), std::move(weights)).normalized(0.0);
    SolverOptions opts = cfg.solver;
    const auto mean = frechet_mean(population, cfg.p, opts);

    // One-sided derivative at the center along leg 1 of sum w_i d(., x_i)^p.
    double deriv = 0.0;
    for (int l = 0; l < legs; ++l) {
      if (w[l] <= 0.0 || radii[l] <= 0.0) continue;
      const double term = w[l] * cfg.p * std::pow(radii[l], cfg.p - 1.0);
      deriv += l == 0 ? -term : term;
    }
    // Independent fine search of the population objective along leg 1.
    auto pop_cost = [&](double r) {
      return std::pow(frechet_objective(population, spider_point(r > 0.0 ? 1 : 0, r), cfg.p),
                      cfg.p);
    };
    double best_r = 0.0, best_v = pop_cost(0.0);
    const double rmax = radii[0] > 0.0 ? radii[0] : 1.0;
    const int grid = 4096;
    for (int gidx = 1; gidx <= grid; ++gidx) {
      const double r = rmax * gidx / grid;
      const double v = pop_cost(r);
      if (v < best_v) {
        best_v = v;
        best_r = r;
      }
    }
    EpsInfo info{std::move(law), std::move(population), mean.minimizer, deriv, best_r,
                 best_r == 0.0};
    infos.push_back(std::move(info));
  }

  const int reps = cfg.replicates;
  const std::size_t cells = eps_grid.size() * cfg.sample_sizes.size();
  ExperimentResult result;
  result.config = cfg;
  result.trials.assign(cells * reps, {});

  parallel_for(static_cast<int>(result.trials.size()), cfg.threads, [&](int idx) {
    const auto t0 = clock_type::now();
    const int per_eps = static_cast<int>(cfg.sample_sizes.size()) * reps;
    const int eps_idx = idx / per_eps;
    const int size_idx = (idx % per_eps) / reps;
    const int r = idx % reps;
    const int n = cfg.sample_sizes[size_idx];
    const EpsInfo& info = infos[eps_idx];
    Rng rng = Rng(cfg.seed)
                  .stream(static_cast<std::uint64_t>(eps_idx), 0, 0xE5)
                  .stream(static_cast<std::uint64_t>(n), r, kTrialTag);
    const Sample s = draw_sample(cfg.space, info.law, n, rng);
    const AtomicMeasure P_n = empirical_measure(s);
    SolverOptions opts = cfg.solver;
    const auto mean = frechet_mean(P_n, cfg.p, opts);
    const bool at_center = mean.minimizer.leg == 0 && mean.minimizer.coords[0] <= 1e-9;

    TrialRecord& trial = result.trials[idx];
    trial.n = n;
    trial.replicate = r;
    trial.objective = mean.objective;
    trial.distance_to_target = distance(cfg.space, mean.minimizer, info.mean);
    trial.extras = {{"epsilon", eps_grid[eps_idx]},
                    {"at_center", at_center ? 1.0 : 0.0},
                    {"mean_leg", static_cast<double>(mean.minimizer.leg)},
                    {"mean_radius", mean.minimizer.coords[0]}};
    trial.minimizer = point_repr(cfg.space, mean.minimizer);
    trial.wall_ms = elapsed_ms(t0);
  });

  json table = json::array();
  for (std::size_t e = 0; e < eps_grid.size(); ++e) {
    for (std::size_t i = 0; i < cfg.sample_sizes.size(); ++i) {
      long center_count = 0, leg1_count = 0;
      double leg1_radius_sum = 0.0;
      for (int r = 0; r < reps; ++r) {
        const auto& trial =
            result.trials[(e * cfg.sample_sizes.size() + i) * reps + r];
        if (trial.extras[1].second > 0.5) ++center_count;
        if (trial.extras[2].second == 1.0) {
          ++leg1_count;
          leg1_radius_sum += trial.extras[3].second;
        }
      }
      json row{{"epsilon", eps_grid[e]},
               {"n", cfg.sample_sizes[i]},
               {"center_fraction", static_cast<double>(center_count) / reps},
               {"leg1_fraction", static_cast<double>(leg1_count) / reps},
               {"population_center_derivative_leg1", infos[e].center_derivative_leg1},
               {"oracle_population_radius_leg1", infos[e].oracle_radius_leg1},
               {"oracle_population_at_center", infos[e].oracle_center},
               {"population_mean", point_repr(cfg.space, infos[e].mean)}};
      if (leg1_count > 0) row["leg1_mean_radius"] = leg1_radius_sum / leg1_count;
      table.push_back(row);
    }
  }
  json summary;
  summary["table"] = table;
  // Analytic threshold: first epsilon where the center derivative along leg 1
  // turns negative, refined by bisection on the closed-form derivative.
  {
    auto deriv_at = [&](double eps) {
      const auto w = shifted_weights(eps);
      double d = 0.0;
      for (int l = 0; l < legs; ++l) {
        if (w[l] <= 0.0 || radii[l] <= 0.0) continue;
        const double term = w[l] * cfg.p * std::pow(radii[l], cfg.p - 1.0);
        d += l == 0 ? -term : term;
      }
      return d;
    };
    double lo = 0.0, hi = -1.0;
    const double cap = 1.0 - base[0];
    if (deriv_at(0.0) > 0.0) {
      for (double eps = 0.0; eps <= cap; eps += cap / 512.0)
        if (deriv_at(eps) <= 0.0) {
          hi = eps;
          break;
        }
      if (hi >= 0.0) {
        lo = std::max(0.0, hi - cap / 512.0);
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (lo + hi);
          (deriv_at(mid) > 0.0 ? lo : hi) = mid;
        }
        summary["analytic_threshold_epsilon"] = 0.5 * (lo + hi);
      }
    } else {
      summary["analytic_threshold_epsilon"] = 0.0;
    }
  }
  result.summary = std::move(summary);
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto start = clock_type::now();
  ExperimentResult result;
  if (cfg.experiment == "consistency") {
    result = run_consistency(cfg);
  } else if (cfg.experiment == "error_bound") {
    result = run_error_bound(cfg);
  } else if (cfg.experiment == "rate") {
    result = run_rate(cfg);
  } else if (cfg.experiment == "clt") {
    result = run_clt_impl(cfg, false);
  } else if (cfg.experiment == "exchangeable_clt") {
    result = run_clt_impl(cfg, true);
  } else if (cfg.experiment == "stickiness") {
    result = run_stickiness(cfg);
  } else {
    throw ConfigError("unknown experiment '" + cfg.experiment + "'");
  }
  // Full config echo for reproducibility; timings live in metadata only.
  result.summary["config"] = experiment_config_to_json(cfg);
  double total_trial_ms = 0.0;
  for (const auto& trial : result.trials) total_trial_ms += trial.wall_ms;
  result.summary["metadata"] = {{"wall_ms", elapsed_ms(start)},
                                {"trial_wall_ms_total", total_trial_ms}};
  return result;
}

std::string trials_to_csv(const ExperimentResult& result) {
  std::string out = "n,replicate,objective,distance_to_target";
  if (!result.trials.empty())
    for (const auto& extra : result.trials.front().extras) out += "," + extra.first;
  out += ",minimizer\n";
  for (const auto& trial : result.trials) {
    out += std::to_string(trial.n);
    out += ",";
    out += std::to_string(trial.replicate);
    out += ",";
    out += format_double(trial.objective);
    out += ",";
    out += format_double(trial.distance_to_target);
    for (const auto& extra : trial.extras) {
      out += ",";
      out += format_double(extra.second);
    }
    out += ",";
    out += trial.minimizer;
    out += "\n";
  }
  return out;
}

void write_experiment_outputs(const ExperimentResult& result, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "'");
  {
    std::ofstream csv(out_dir + "/trials.csv", std::ios::binary);
    if (!csv) throw IoError("cannot write '" + out_dir + "/trials.csv'");
    csv << trials_to_csv(result);
  }
  {
    std::ofstream summary(out_dir + "/summary.json", std::ios::binary);
    if (!summary) throw IoError("cannot write '" + out_dir + "/summary.json'");
    summary << result.summary.dump(2) << "\n";
  }
}

}  // namespace polymean
