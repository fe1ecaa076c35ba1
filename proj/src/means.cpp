#include "polymean/means.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "polymean/rng.hpp"
#include "polymean/transport.hpp"

namespace polymean {

namespace {

constexpr double kAtomSnap = 1e-12;   // iterate-at-atom detection (p=1 singularity)
constexpr double kTiny = 1e-300;

double powd(double base, double p) { return std::pow(base, p); }

void require_p(double p) {
  if (!(p >= 1.0)) throw ConfigError("the exponent p must be >= 1");
}

double objective_power(const AtomicMeasure& P, const SpacePoint& y, double p) {
  double s = 0.0;
  for (int i = 0; i < P.size(); ++i)
    s += P.weights()[i] * powd(distance(P.space(), P.atoms()[i], y), p);
  return s;
}

bool rel_converged(double prev, double cur, double tol) {
  return std::abs(prev - cur) <= tol * std::max(prev, 1e-15);
}

// ---------------------------------------------------------------------------
// Closed forms and 1D solvers
// ---------------------------------------------------------------------------

SpacePoint euclidean_weighted_mean(const AtomicMeasure& P) {
  const int d = P.space().dim;
  std::vector<double> c(d, 0.0);
  for (int i = 0; i < P.size(); ++i)
    for (int k = 0; k < d; ++k) c[k] += P.weights()[i] * P.atoms()[i].coords[k];
  return euclidean_point(std::move(c));
}

// Golden-section minimizer of a unimodal function on [lo, hi].
template <class F>
double golden_section(F&& f, double lo, double hi) {
  constexpr double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-13 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

// Exact spider Fréchet mean: per-leg 1D convex minimization plus an explicit
// one-sided derivative test at the center, so a sticky mean is reported as
// the exact center rather than a radius epsilon away.
MeanResult<SpacePoint> spider_mean(const AtomicMeasure& P, double p) {
  const int legs = P.space().dim;
  std::vector<double> powered_on(legs + 1, 0.0);  // sum_{on leg} w r^{p-1}, index by leg
  std::vector<double> rmax(legs + 1, 0.0);
  double powered_all = 0.0;
  double center_mass = 0.0;
  for (int i = 0; i < P.size(); ++i) {
    const double r = P.atoms()[i].coords[0];
    const int leg = P.atoms()[i].leg;
    const double w = P.weights()[i];
    if (r == 0.0) {
      center_mass += w;
      continue;
    }
    const double t = w * powd(r, p - 1.0);
    powered_on[leg] += t;
    powered_all += t;
    rmax[leg] = std::max(rmax[leg], r);
  }

  const SpacePoint center = spider_point(0, 0.0);
  double best_obj = objective_power(P, center, p);
  SpacePoint best = center;

  for (int leg = 1; leg <= legs; ++leg) {
    // One-sided derivative of the objective at the center along this leg.
    double deriv = p * (powered_all - 2.0 * powered_on[leg]);
    if (p == 1.0) deriv += center_mass;
    if (deriv >= 0.0 || rmax[leg] == 0.0) continue;
    double r_star;
    if (p == 2.0) {
      double on = 0.0, off = 0.0;
      for (int i = 0; i < P.size(); ++i) {
        const double r = P.atoms()[i].coords[0];
        if (P.atoms()[i].leg == leg)
          on += P.weights()[i] * r;
        else
          off += P.weights()[i] * r;
      }
      r_star = std::max(0.0, on - off);
    } else {
      auto f = [&](double r) { return objective_power(P, spider_point(leg, r), p); };
      r_star = golden_section(f, 0.0, rmax[leg]);
    }
    const SpacePoint cand = spider_point(leg, r_star);
    const double obj = objective_power(P, cand, p);
    if (obj < best_obj) {
      best_obj = obj;
      best = cand;
    }
  }

  MeanResult<SpacePoint> result;
  result.minimizer = best;
  result.objective = powd(best_obj, 1.0 / p);
  result.iterations = 1;
  result.restarts_used = 1;
  result.converged = true;
  result.objective_trace = {result.objective};
  return result;
}

// Weiszfeld iteration with the Vardi-Zhang adjustment when an iterate lands
// on an atom.
struct RunOutcome {
  SpacePoint y;
  double objective_p = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

RunOutcome weiszfeld(const AtomicMeasure& P, const SpacePoint& y0, const SolverOptions& opts) {
  const int d = P.space().dim;
  RunOutcome run;
  run.y = y0;
  run.objective_p = objective_power(P, run.y, 1.0);
  run.trace.push_back(run.objective_p);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    run.iterations = it;
    int at_atom = -1;
    for (int i = 0; i < P.size(); ++i)
      if (distance(P.space(), P.atoms()[i], run.y) <= kAtomSnap) {
        at_atom = i;
        break;
      }
    SpacePoint next = run.y;
    if (at_atom >= 0) {
      std::vector<double> r(d, 0.0);
      double inv_sum = 0.0;
      for (int i = 0; i < P.size(); ++i) {
        if (i == at_atom) continue;
        const double di = distance(P.space(), P.atoms()[i], run.y);
        if (di <= kAtomSnap) continue;  // duplicate atom, zero direction
        for (int k = 0; k < d; ++k)
          r[k] += P.weights()[i] * (P.atoms()[i].coords[k] - run.y.coords[k]) / di;
        inv_sum += P.weights()[i] / di;
      }
      double rnorm = 0.0;
      for (double v : r) rnorm += v * v;
      rnorm = std::sqrt(rnorm);
      if (rnorm <= P.weights()[at_atom] + 1e-15) {
        run.converged = true;  // subgradient condition holds at the atom
        break;
      }
      const double step = (rnorm - P.weights()[at_atom]) / std::max(inv_sum, kTiny);
      for (int k = 0; k < d; ++k) next.coords[k] = run.y.coords[k] + step * r[k] / rnorm;
    } else {
      std::vector<double> num(d, 0.0);
      double den = 0.0;
      for (int i = 0; i < P.size(); ++i) {
        const double di = distance(P.space(), P.atoms()[i], run.y);
        const double wi = P.weights()[i] / di;
        for (int k = 0; k < d; ++k) num[k] += wi * P.atoms()[i].coords[k];
        den += wi;
      }
      for (int k = 0; k < d; ++k) next.coords[k] = num[k] / den;
    }
    const double obj = objective_power(P, next, 1.0);
    const bool done = rel_converged(run.objective_p, obj, opts.rel_tolerance);
    if (obj <= run.objective_p) {
      run.y = next;
      run.objective_p = obj;
    }
    run.trace.push_back(run.objective_p);
    if (done) {
      run.converged = true;
      break;
    }
  }
  return run;
}

// Tangent-space descent with step halving; works on any Riemannian space of
// the zoo. Gradient of sum w_i d_i^p is -p sum w_i d_i^{p-2} log_y(x_i).
RunOutcome tangent_descent(const AtomicMeasure& P, double p, const SpacePoint& y0,
                           const SolverOptions& opts) {
  const SpaceDescriptor& space = P.space();
  RunOutcome run;
  run.y = y0;
  run.objective_p = objective_power(P, run.y, p);
  run.trace.push_back(run.objective_p);
  const int ambient = space.point_size();
  for (int it = 1; it <= opts.max_iterations; ++it) {
    run.iterations = it;
    std::vector<double> dir(ambient, 0.0);
    double near_mass = 0.0;
    for (int i = 0; i < P.size(); ++i) {
      const double di = distance(space, P.atoms()[i], run.y);
      if (di <= kAtomSnap) {
        near_mass += P.weights()[i];
        continue;
      }
      const TangentVector lg = log_map(space, run.y, P.atoms()[i]);
      const double scale = P.weights()[i] * powd(di, p - 2.0);
      for (int k = 0; k < ambient; ++k) dir[k] += scale * lg.components[k];
    }
    double dn = 0.0;
    for (double v : dir) dn += v * v;
    dn = std::sqrt(dn);
    if (p == 1.0 && dn <= near_mass + 1e-15) {
      run.converged = true;  // subgradient condition at a coincident atom
      break;
    }
    if (dn <= 1e-15) {
      run.converged = true;
      break;
    }
    double step = 1.0;
    bool improved = false;
    double obj = run.objective_p;
    SpacePoint cand = run.y;
    for (int halving = 0; halving < 50; ++halving) {
      TangentVector v{run.y, dir};
      for (double& x : v.components) x *= step;
      cand = exp_map(space, v);
      obj = objective_power(P, cand, p);
      if (obj < run.objective_p) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      run.converged = true;  // stationary at float precision
      break;
    }
    const bool done = rel_converged(run.objective_p, obj, opts.rel_tolerance);
    run.y = cand;
    run.objective_p = obj;
    run.trace.push_back(run.objective_p);
    if (done) {
      run.converged = true;
      break;
    }
  }
  return run;
}

RunOutcome run_frechet_once(const AtomicMeasure& P, double p, const SpacePoint& y0,
                            const SolverOptions& opts) {
  const SpaceKind kind = P.space().kind;
  if (kind == SpaceKind::Euclidean && p == 1.0) return weiszfeld(P, y0, opts);
  return tangent_descent(P, p, y0, opts);
}

}  // namespace

double frechet_objective(const AtomicMeasure& P, const SpacePoint& y, double p) {
  require_p(p);
  return powd(objective_power(P, y, p), 1.0 / p);
}

MeanResult<SpacePoint> frechet_mean(const AtomicMeasure& P, double p,
                                    const SolverOptions& opts, const SpacePoint* init) {
  require_p(p);
  MeanResult<SpacePoint> result;

  if (P.space().kind == SpaceKind::Spider) return spider_mean(P, p);

  if (P.space().kind == SpaceKind::Euclidean && p == 2.0) {
    result.minimizer = euclidean_weighted_mean(P);
    result.objective = frechet_objective(P, result.minimizer, p);
    result.iterations = 1;
    result.restarts_used = 1;
    result.converged = true;
    result.objective_trace = {result.objective};
    return result;
  }

  const int restarts = std::max(1, opts.restarts);
  Rng root(opts.seed);
  RunOutcome best;
  bool have_best = false;
  int used = 0;
  for (int r = 0; r < restarts; ++r) {
    Rng rng = root.stream(static_cast<std::uint64_t>(r), 0xF2);
    SpacePoint y0;
    if (r == 0 && init != nullptr) {
      y0 = *init;
    } else {
      y0 = P.atoms()[rng.index(static_cast<std::size_t>(P.size()))];
    }
    RunOutcome run = run_frechet_once(P, p, y0, opts);
    ++used;
    if (!have_best || run.objective_p < best.objective_p) {
      best = std::move(run);
      have_best = true;
    }
    // Closed-form-free solvers on a single atom are exact already.
    if (P.size() == 1) break;
  }
  result.minimizer = best.y;
  result.objective = powd(best.objective_p, 1.0 / p);
  result.iterations = best.iterations;
  result.restarts_used = used;
  result.converged = best.converged;
  result.objective_trace.reserve(best.trace.size());
  for (double v : best.trace) result.objective_trace.push_back(powd(v, 1.0 / p));
  return result;
}

namespace {

// ---------------------------------------------------------------------------
// Lloyd alternation shared by the polymean solvers
// ---------------------------------------------------------------------------

SolverOptions inner_options(const SolverOptions& opts) {
  SolverOptions inner = opts;
  inner.restarts = 1;  // seeded at the current center, see the monotone guard
  return inner;
}

double cluster_cost(const AtomicMeasure& P, const std::vector<int>& members,
                    const SpacePoint& center, double p) {
  double s = 0.0;
  for (int i : members) s += P.weights()[i] * powd(distance(P.space(), P.atoms()[i], center), p);
  return s;
}

AtomicMeasure sub_measure(const AtomicMeasure& P, const std::vector<int>& members) {
  std::vector<SpacePoint> atoms;
  std::vector<double> weights;
  double total = 0.0;
  for (int i : members) total += P.weights()[i];
  for (int i : members) {
    atoms.push_back(P.atoms()[i]);
    weights.push_back(P.weights()[i] / total);
  }
  return AtomicMeasure(P.space(), std::move(atoms), std::move(weights));
}

struct LloydRun {
  std::vector<SpacePoint> centers;
  std::vector<double> masses;
  std::vector<int> assign;
  double objective_p = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // root scale
};

// Nearest-center Lloyd iteration; ties go to the lowest center index, empty
// clusters drop their center. The per-cluster update keeps the old center
// when the inner solver fails to improve on it, so the objective trace is
// non-increasing by construction.
LloydRun lloyd_nearest(const AtomicMeasure& P, std::vector<SpacePoint> centers, double p,
                       const SolverOptions& opts) {
  const SolverOptions inner = inner_options(opts);
  LloydRun run;
  run.centers = std::move(centers);

  auto objective_of = [&](const std::vector<SpacePoint>& cs) {
    double s = 0.0;
    for (int i = 0; i < P.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : cs) best = std::min(best, distance(P.space(), P.atoms()[i], c));
      s += P.weights()[i] * powd(best, p);
    }
    return s;
  };

  run.objective_p = objective_of(run.centers);
  run.trace.push_back(powd(run.objective_p, 1.0 / p));

  for (int it = 1; it <= opts.max_iterations; ++it) {
    run.iterations = it;
    // Assignment step.
    std::vector<std::vector<int>> clusters(run.centers.size());
    run.assign.assign(P.size(), 0);
    for (int i = 0; i < P.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t j = 0; j < run.centers.size(); ++j) {
        const double d = distance(P.space(), P.atoms()[i], run.centers[j]);
        if (d < best) {
          best = d;
          arg = static_cast<int>(j);
        }
      }
      run.assign[i] = arg;
      clusters[arg].push_back(i);
    }
    // Drop empty clusters (the skeleton is closed under losing atoms).
    std::vector<SpacePoint> kept;
    std::vector<std::vector<int>> kept_clusters;
    for (std::size_t j = 0; j < run.centers.size(); ++j) {
      if (clusters[j].empty()) continue;
      kept.push_back(run.centers[j]);
      kept_clusters.push_back(std::move(clusters[j]));
    }
    run.centers = std::move(kept);
    // Update step with the monotone guard.
    for (std::size_t j = 0; j < run.centers.size(); ++j) {
      const AtomicMeasure sub = sub_measure(P, kept_clusters[j]);
      const auto cand = frechet_mean(sub, p, inner, &run.centers[j]);
      if (cluster_cost(P, kept_clusters[j], cand.minimizer, p) <=
          cluster_cost(P, kept_clusters[j], run.centers[j], p))
        run.centers[j] = cand.minimizer;
    }
    const double obj = objective_of(run.centers);
    const double prev = run.objective_p;
    run.objective_p = obj;
    run.trace.push_back(powd(obj, 1.0 / p));
    if (rel_converged(powd(prev, 1.0 / p), powd(obj, 1.0 / p), opts.rel_tolerance)) {
      run.converged = true;
      break;
    }
  }

  // Final assignment and masses for the returned centers.
  std::vector<double> masses(run.centers.size(), 0.0);
  run.assign.assign(P.size(), 0);
  for (int i = 0; i < P.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t j = 0; j < run.centers.size(); ++j) {
      const double d = distance(P.space(), P.atoms()[i], run.centers[j]);
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    run.assign[i] = arg;
    masses[arg] += P.weights()[i];
  }
  run.masses = std::move(masses);
  return run;
}

std::vector<SpacePoint> random_distinct_atoms(const AtomicMeasure& P, int q, Rng& rng) {
  std::vector<int> idx(P.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (int j = 0; j < q; ++j) {
    const std::size_t pick = j + rng.index(idx.size() - j);
    std::swap(idx[j], idx[pick]);
  }
  std::vector<SpacePoint> centers;
  centers.reserve(q);
  for (int j = 0; j < q; ++j) centers.push_back(P.atoms()[idx[j]]);
  return centers;
}

MeanResult<AtomicMeasure> finish_q_mean(const AtomicMeasure& P, LloydRun best, int used,
                                        double p) {
  MeanResult<AtomicMeasure> result{
      AtomicMeasure(P.space(), best.centers, best.masses).normalized(0.0),
      powd(best.objective_p, 1.0 / p),
      best.iterations,
      used,
      best.converged,
      best.trace};
  return result;
}

}  // namespace

MeanResult<AtomicMeasure> q_mean(const AtomicMeasure& P_in, int q, double p,
                                 const SolverOptions& opts) {
  require_p(p);
  if (q < 1) throw ConfigError("q must be >= 1");
  const AtomicMeasure P = P_in.normalized(opts.merge_tolerance);
  if (q >= P.size()) {
    // P lies in its own skeleton.
    MeanResult<AtomicMeasure> result{P, 0.0, 0, 0, true, {0.0}};
    return result;
  }
  if (q == 1) {
    // 1-means are Fréchet means of the whole measure.
    const auto fm = frechet_mean(P, p, opts);
    return MeanResult<AtomicMeasure>{AtomicMeasure::dirac(P.space(), fm.minimizer),
                                     fm.objective,
                                     fm.iterations,
                                     fm.restarts_used,
                                     fm.converged,
                                     fm.objective_trace};
  }
  Rng root(opts.seed);
  const int restarts = std::max(1, opts.restarts);
  LloydRun best;
  bool have_best = false;
  for (int r = 0; r < restarts; ++r) {
    Rng rng = root.stream(static_cast<std::uint64_t>(r), 0x71);
    LloydRun run = lloyd_nearest(P, random_distinct_atoms(P, q, rng), p, opts);
    if (!have_best || run.objective_p < best.objective_p) {
      best = std::move(run);
      have_best = true;
    }
  }
  return finish_q_mean(P, std::move(best), restarts, p);
}

MeanResult<AtomicMeasure> q_mean_from(const AtomicMeasure& P_in,
                                      const std::vector<SpacePoint>& init_centers, double p,
                                      const SolverOptions& opts) {
  require_p(p);
  const AtomicMeasure P = P_in.normalized(opts.merge_tolerance);
  LloydRun run = lloyd_nearest(P, init_centers, p, opts);
  return finish_q_mean(P, std::move(run), 1, p);
}

MeanResult<std::vector<SpacePoint>> unweighted_q_mean(const AtomicMeasure& P, int q, double p,
                                                      const SolverOptions& opts) {
  const auto weighted = q_mean(P, q, p, opts);
  MeanResult<std::vector<SpacePoint>> result;
  // Centers closer than merge_tolerance collapse; the q-mean result is
  // already exact-merged, re-merge at the solver tolerance.
  AtomicMeasure merged = weighted.minimizer.normalized(opts.merge_tolerance);
  result.minimizer = merged.atoms();
  result.objective = weighted.objective;
  result.iterations = weighted.iterations;
  result.restarts_used = weighted.restarts_used;
  result.converged = weighted.converged;
  result.objective_trace = weighted.objective_trace;
  return result;
}

MeanResult<std::vector<SpacePoint>> unweighted_q_mean_from(
    const AtomicMeasure& P, const std::vector<SpacePoint>& init_centers, double p,
    const SolverOptions& opts) {
  const auto weighted = q_mean_from(P, init_centers, p, opts);
  MeanResult<std::vector<SpacePoint>> result;
  AtomicMeasure merged = weighted.minimizer.normalized(opts.merge_tolerance);
  result.minimizer = merged.atoms();
  result.objective = weighted.objective;
  result.iterations = weighted.iterations;
  result.restarts_used = weighted.restarts_used;
  result.converged = weighted.converged;
  result.objective_trace = weighted.objective_trace;
  return result;
}

MeanResult<Sample> kbar_mean(const Sample& x, const Partition& kbar, double p,
                             const SolverOptions& opts) {
  require_p(p);
  const int n = static_cast<int>(x.size());
  if (kbar.n() != n)
    throw DimensionError("partition sums to " + std::to_string(kbar.n()) +
                         " but the sample has " + std::to_string(n) + " points");
  const int q = kbar.length();
  const SolverOptions inner = inner_options(opts);
  const AtomicMeasure P = empirical_measure(x);

  struct KbarRun {
    std::vector<SpacePoint> centers;
    std::vector<int> assign;
    double objective_p = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;
  };

  auto assignment_cost = [&](const std::vector<SpacePoint>& centers) {
    CostMatrix cost(n, q);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < q; ++j)
        cost(i, j) = powd(distance(x.space(), x.points()[i], centers[j]), p);
    return solve_capacitated_assignment(cost, kbar.parts);
  };

  Rng root(opts.seed);
  const int restarts = std::max(1, opts.restarts);
  KbarRun best;
  bool have_best = false;
  for (int r = 0; r < restarts; ++r) {
    Rng rng = root.stream(static_cast<std::uint64_t>(r), 0x6B);
    KbarRun run;
    {
      std::vector<int> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      for (int j = 0; j < q; ++j) {
        const std::size_t pick = j + rng.index(idx.size() - j);
        std::swap(idx[j], idx[pick]);
      }
      for (int j = 0; j < q; ++j) run.centers.push_back(x.points()[idx[j]]);
    }
    auto cap = assignment_cost(run.centers);
    run.assign = cap.assignment;
    run.objective_p = cap.cost / n;
    run.trace.push_back(powd(run.objective_p, 1.0 / p));
    for (int it = 1; it <= opts.max_iterations; ++it) {
      run.iterations = it;
      std::vector<std::vector<int>> clusters(q);
      for (int i = 0; i < n; ++i) clusters[run.assign[i]].push_back(i);
      for (int j = 0; j < q; ++j) {
        // capacities are >= 1, clusters are never empty
        const AtomicMeasure sub = sub_measure(P, clusters[j]);
        const auto cand = frechet_mean(sub, p, inner, &run.centers[j]);
        if (cluster_cost(P, clusters[j], cand.minimizer, p) <=
            cluster_cost(P, clusters[j], run.centers[j], p))
          run.centers[j] = cand.minimizer;
      }
      cap = assignment_cost(run.centers);
      run.assign = cap.assignment;
      const double prev = run.objective_p;
      run.objective_p = cap.cost / n;
      run.trace.push_back(powd(run.objective_p, 1.0 / p));
      if (rel_converged(powd(prev, 1.0 / p), powd(run.objective_p, 1.0 / p),
                        opts.rel_tolerance)) {
        run.converged = true;
        break;
      }
    }
    if (!have_best || run.objective_p < best.objective_p) {
      best = std::move(run);
      have_best = true;
    }
  }

  std::vector<SpacePoint> points;
  points.reserve(n);
  for (int j = 0; j < q; ++j)
    for (int c = 0; c < kbar.parts[j]; ++c) points.push_back(best.centers[j]);
  MeanResult<Sample> result{Sample(x.space(), std::move(points)),
                            powd(best.objective_p, 1.0 / p),
                            best.iterations,
                            restarts,
                            best.converged,
                            best.trace};
  return result;
}

MeanResult<AtomicMeasure> wbar_mean(const AtomicMeasure& P_in,
                                    const std::vector<double>& wbar, double p,
                                    const SolverOptions& opts) {
  require_p(p);
  double sum = 0.0;
  for (double w : wbar) {
    if (w < 0.0) throw MassError("wbar weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kStructuralTol) throw MassError("wbar weights must sum to 1");
  const int q = static_cast<int>(wbar.size());
  const AtomicMeasure P = P_in.normalized(opts.merge_tolerance);
  const SolverOptions inner = inner_options(opts);

  auto coupling_of = [&](const std::vector<SpacePoint>& centers) {
    CostMatrix cost(P.size(), q);
    for (int i = 0; i < P.size(); ++i)
      for (int j = 0; j < q; ++j)
        cost(i, j) = powd(distance(P.space(), P.atoms()[i], centers[j]), p);
    return solve_transport(P.weights(), wbar, cost);
  };

  Rng root(opts.seed);
  const int restarts = std::max(1, opts.restarts);
  LloydRun best;
  bool have_best = false;
  for (int r = 0; r < restarts; ++r) {
    Rng rng = root.stream(static_cast<std::uint64_t>(r), 0x77);
    LloydRun run;
    run.centers = random_distinct_atoms(P, std::min(q, P.size()), rng);
    while (static_cast<int>(run.centers.size()) < q)
      run.centers.push_back(P.atoms()[rng.index(static_cast<std::size_t>(P.size()))]);
    auto tr = coupling_of(run.centers);
    run.objective_p = tr.cost;
    run.trace.push_back(powd(run.objective_p, 1.0 / p));
    for (int it = 1; it <= opts.max_iterations; ++it) {
      run.iterations = it;
      for (int j = 0; j < q; ++j) {
        std::vector<int> members;
        std::vector<double> masses;
        for (int i = 0; i < P.size(); ++i)
          if (tr.plan(i, j) > 0.0) {
            members.push_back(i);
            masses.push_back(tr.plan(i, j));
          }
        if (members.empty()) continue;  // zero-weight center keeps its place
        double total = std::accumulate(masses.begin(), masses.end(), 0.0);
        std::vector<SpacePoint> atoms;
        for (int i : members) atoms.push_back(P.atoms()[i]);
        for (double& m : masses) m /= total;
        const AtomicMeasure sub(P.space(), atoms, masses);
        const auto cand = frechet_mean(sub, p, inner, &run.centers[j]);
        double old_cost = 0.0, new_cost = 0.0;
        for (std::size_t k = 0; k < members.size(); ++k) {
          const double m = tr.plan(members[k], j);
          old_cost += m * powd(distance(P.space(), P.atoms()[members[k]], run.centers[j]), p);
          new_cost += m * powd(distance(P.space(), P.atoms()[members[k]], cand.minimizer), p);
        }
        if (new_cost <= old_cost) run.centers[j] = cand.minimizer;
      }
      tr = coupling_of(run.centers);
      const double prev = run.objective_p;
      run.objective_p = tr.cost;
      run.trace.push_back(powd(run.objective_p, 1.0 / p));
      if (rel_converged(powd(prev, 1.0 / p), powd(run.objective_p, 1.0 / p),
                        opts.rel_tolerance)) {
        run.converged = true;
        break;
      }
    }
    if (!have_best || run.objective_p < best.objective_p) {
      best = std::move(run);
      have_best = true;
    }
  }

  std::vector<SpacePoint> atoms;
  std::vector<double> weights;
  for (int j = 0; j < q; ++j) {
    if (wbar[j] <= 0.0) continue;  // closure: zero-weight centers vanish
    atoms.push_back(best.centers[j]);
    weights.push_back(wbar[j]);
  }
  MeanResult<AtomicMeasure> result{
      AtomicMeasure(P.space(), std::move(atoms), std::move(weights)).normalized(0.0),
      powd(best.objective_p, 1.0 / p),
      best.iterations,
      restarts,
      best.converged,
      best.trace};
  return result;
}

namespace {

// Block Fréchet mean for the brute-force oracle: closed forms or plain 1D
// searches only, independent of the production solvers' logic.
SpacePoint oracle_block_mean(const SpaceDescriptor& space,
                             const std::vector<SpacePoint>& atoms,
                             const std::vector<double>& weights, double p) {
  auto block_cost = [&](const SpacePoint& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i)
      s += weights[i] * powd(distance(space, atoms[i], y), p);
    return s;
  };
  switch (space.kind) {
    case SpaceKind::Euclidean: {
      if (p == 2.0) {
        std::vector<double> c(space.dim, 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i) total += weights[i];
        for (std::size_t i = 0; i < atoms.size(); ++i)
          for (int k = 0; k < space.dim; ++k)
            c[k] += weights[i] / total * atoms[i].coords[k];
        return euclidean_point(std::move(c));
      }
      if (space.dim == 1) {
        if (p == 1.0) {
          // lower weighted median
          std::vector<int> order(atoms.size());
          std::iota(order.begin(), order.end(), 0);
          std::sort(order.begin(), order.end(), [&](int a, int b) {
            return atoms[a].coords[0] < atoms[b].coords[0];
          });
          double total = 0.0;
          for (double w : weights) total += w;
          double acc = 0.0;
          for (int i : order) {
            acc += weights[i];
            if (acc >= total / 2.0) return atoms[i];
          }
          return atoms[order.back()];
        }
        double lo = atoms[0].coords[0], hi = atoms[0].coords[0];
        for (const auto& a : atoms) {
          lo = std::min(lo, a.coords[0]);
          hi = std::max(hi, a.coords[0]);
        }
        const double r =
            golden_section([&](double v) { return block_cost(euclidean_point({v})); }, lo, hi);
        return euclidean_point({r});
      }
      throw ConfigError("brute-force oracle supports euclidean blocks only for p=2 or dim=1");
    }
    case SpaceKind::Circle: {
      // coarse scan + local refinement
      const int grid = 720;
      double best_a = 0.0, best_v = std::numeric_limits<double>::infinity();
      for (int g = 0; g < grid; ++g) {
        const double a = kTwoPi * g / grid;
        const double v = block_cost(circle_point(a));
        if (v < best_v) {
          best_v = v;
          best_a = a;
        }
      }
      const double window = kTwoPi / grid;
      const double refined = golden_section(
          [&](double a) { return block_cost(circle_point(wrap_angle(a))); }, best_a - window,
          best_a + window);
      return circle_point(refined);
    }
    case SpaceKind::Spider: {
      SpacePoint best = spider_point(0, 0.0);
      double best_v = block_cost(best);
      for (int leg = 1; leg <= space.dim; ++leg) {
        double rmax = 0.0;
        for (const auto& a : atoms)
          if (a.leg == leg) rmax = std::max(rmax, a.coords[0]);
        if (rmax == 0.0) continue;
        const double r = golden_section(
            [&](double v) { return block_cost(spider_point(leg, v)); }, 0.0, rmax);
        const SpacePoint cand = spider_point(leg, r);
        const double v = block_cost(cand);
        if (v < best_v) {
          best_v = v;
          best = cand;
        }
      }
      return best;
    }
    case SpaceKind::Sphere:
      throw ConfigError("brute-force oracle does not support sphere blocks");
  }
  throw ConfigError("unsupported space for the brute-force oracle");
}

BruteForceResult brute_force_impl(const SpaceDescriptor& space,
                                  const std::vector<SpacePoint>& atoms,
                                  const std::vector<double>& weights, int q, double p) {
  const int n = static_cast<int>(atoms.size());
  if (n > 10 || q > 4 || q < 1)
    throw ConfigError("brute-force oracle is limited to n <= 10 and q <= 4");

  BruteForceResult best;
  best.objective = std::numeric_limits<double>::infinity();
  // Enumerate set partitions via restricted growth strings with at most q
  // labels.
  std::vector<int> label(n, 0);
  auto evaluate = [&]() {
    int blocks = 0;
    for (int i = 0; i < n; ++i) blocks = std::max(blocks, label[i] + 1);
    std::vector<std::vector<int>> clusters(blocks);
    for (int i = 0; i < n; ++i) clusters[label[i]].push_back(i);
    double cost = 0.0;
    std::vector<SpacePoint> centers;
    for (const auto& cl : clusters) {
      std::vector<SpacePoint> sub_atoms;
      std::vector<double> sub_weights;
      for (int i : cl) {
        sub_atoms.push_back(atoms[i]);
        sub_weights.push_back(weights[i]);
      }
      const SpacePoint c = oracle_block_mean(space, sub_atoms, sub_weights, p);
      centers.push_back(c);
      for (int i : cl) cost += weights[i] * powd(distance(space, atoms[i], c), p);
    }
    if (cost < best.objective) {
      best.objective = cost;
      best.clusters = clusters;
      best.centers = centers;
    }
  };
  auto recurse = [&](auto&& self, int i, int max_label) -> void {
    if (i == n) {
      evaluate();
      return;
    }
    for (int l = 0; l <= std::min(max_label + 1, q - 1); ++l) {
      label[i] = l;
      self(self, i + 1, std::max(max_label, l));
    }
  };
  recurse(recurse, 0, -1);
  best.objective = powd(best.objective, 1.0 / p);
  return best;
}

}  // namespace

BruteForceResult brute_force_q_mean(const Sample& x, int q, double p) {
  require_p(p);
  std::vector<double> weights(x.size(), 1.0 / static_cast<double>(x.size()));
  return brute_force_impl(x.space(), x.points(), weights, q, p);
}

BruteForceResult brute_force_q_mean(const AtomicMeasure& P, int q, double p) {
  require_p(p);
  return brute_force_impl(P.space(), P.atoms(), P.weights(), q, p);
}

std::vector<std::pair<Sample, SpacePoint>> cluster_decomposition(const Sample& x,
                                                                 const Sample& y, double p,
                                                                 const SolverOptions& opts) {
  require_p(p);
  if (x.size() != y.size())
    throw DimensionError("sample and polymean have different sizes");
  // Distinct values of y with multiplicities; points are canonically sorted,
  // so runs of equal points are adjacent.
  std::vector<SpacePoint> centers;
  std::vector<int> capacities;
  std::size_t i = 0;
  while (i < y.size()) {
    std::size_t j = i;
    while (j < y.size() && y.points()[j] == y.points()[i]) ++j;
    centers.push_back(y.points()[i]);
    capacities.push_back(static_cast<int>(j - i));
    i = j;
  }
  const int n = static_cast<int>(x.size());
  const int q = static_cast<int>(centers.size());
  CostMatrix cost(n, q);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < q; ++b)
      cost(a, b) = powd(distance(x.space(), x.points()[a], centers[b]), p);
  const auto cap = solve_capacitated_assignment(cost, capacities);

  std::vector<std::pair<Sample, SpacePoint>> out;
  for (int b = 0; b < q; ++b) {
    std::vector<SpacePoint> members;
    for (int a = 0; a < n; ++a)
      if (cap.assignment[a] == b) members.push_back(x.points()[a]);
    out.emplace_back(Sample(x.space(), std::move(members)), centers[b]);
  }
  return out;
}

}  // namespace polymean
