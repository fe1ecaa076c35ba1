#include "polymean/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace polymean {

namespace {

// Antipodal detection threshold on the sphere: slerp and log are
// ill-conditioned when the angle approaches pi, so the error is raised a
// little earlier than exact antipodality.
constexpr double kSphereAntipodalSlack = 1e-7;
constexpr double kCircleAntipodalSlack = 1e-12;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

void require_same_kind(const SpaceDescriptor& space, const SpacePoint& p) {
  check_point(space, p);
}

}  // namespace

SpaceDescriptor SpaceDescriptor::euclidean(int dim) {
  if (dim < 1) throw ConfigError("Euclidean dimension must be >= 1");
  return {SpaceKind::Euclidean, dim};
}

SpaceDescriptor SpaceDescriptor::sphere(int dim) {
  if (dim < 1) throw ConfigError("Sphere dimension must be >= 1");
  return {SpaceKind::Sphere, dim};
}

SpaceDescriptor SpaceDescriptor::circle() { return {SpaceKind::Circle, 0}; }

SpaceDescriptor SpaceDescriptor::spider(int num_legs) {
  if (num_legs < 3) throw ConfigError("Spider needs at least 3 legs");
  return {SpaceKind::Spider, num_legs};
}

int SpaceDescriptor::point_size() const {
  switch (kind) {
    case SpaceKind::Euclidean: return dim;
    case SpaceKind::Sphere: return dim + 1;
    case SpaceKind::Circle: return 1;
    case SpaceKind::Spider: return 1;
  }
  return 0;
}

int SpaceDescriptor::tangent_dim() const {
  switch (kind) {
    case SpaceKind::Euclidean: return dim;
    case SpaceKind::Sphere: return dim;
    case SpaceKind::Circle: return 1;
    case SpaceKind::Spider:
      throw UnsupportedOperationError("the spider is not Riemannian");
  }
  return 0;
}

std::string SpaceDescriptor::name() const {
  switch (kind) {
    case SpaceKind::Euclidean: return "euclidean(" + std::to_string(dim) + ")";
    case SpaceKind::Sphere: return "sphere(" + std::to_string(dim) + ")";
    case SpaceKind::Circle: return "circle";
    case SpaceKind::Spider: return "spider(" + std::to_string(dim) + ")";
  }
  return "?";
}

double wrap_angle(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;  // fmod rounding at the seam
  return w;
}

SpacePoint euclidean_point(std::vector<double> coords) {
  return SpacePoint{std::move(coords), 0};
}

SpacePoint sphere_point(std::vector<double> coords) {
  const double n = norm(coords);
  if (std::abs(n - 1.0) > kStructuralTol)
    throw TypeError("sphere point must have unit norm (got " + std::to_string(n) + ")");
  return SpacePoint{std::move(coords), 0};
}

SpacePoint circle_point(double angle) { return SpacePoint{{wrap_angle(angle)}, 0}; }

SpacePoint spider_point(int leg, double radius) {
  if (radius < 0.0) throw TypeError("spider radius must be non-negative");
  if (radius == 0.0) return SpacePoint{{0.0}, 0};
  if (leg < 1) throw TypeError("spider leg index must be >= 1 for positive radius");
  return SpacePoint{{radius}, leg};
}

double tangent_norm(const TangentVector& v) { return norm(v.components); }

void check_point(const SpaceDescriptor& space, const SpacePoint& p) {
  if (static_cast<int>(p.coords.size()) != space.point_size())
    throw TypeError("point has " + std::to_string(p.coords.size()) +
                    " coordinates, expected " + std::to_string(space.point_size()) +
                    " for " + space.name());
  switch (space.kind) {
    case SpaceKind::Euclidean:
      break;
    case SpaceKind::Sphere: {
      const double n = norm(p.coords);
      if (std::abs(n - 1.0) > kStructuralTol)
        throw TypeError("sphere point norm " + std::to_string(n) + " is not 1");
      break;
    }
    case SpaceKind::Circle:
      if (p.coords[0] < 0.0 || p.coords[0] >= kTwoPi)
        throw TypeError("circle angle out of [0, 2pi)");
      break;
    case SpaceKind::Spider: {
      const double r = p.coords[0];
      if (r < 0.0) throw TypeError("spider radius is negative");
      if (r == 0.0 && p.leg != 0) throw TypeError("spider center must have leg 0");
      if (r > 0.0 && (p.leg < 1 || p.leg > space.dim))
        throw TypeError("spider leg index out of range");
      break;
    }
  }
}

int compare_points(const SpaceDescriptor& space, const SpacePoint& a, const SpacePoint& b) {
  if (space.kind == SpaceKind::Spider) {
    if (a.leg != b.leg) return a.leg < b.leg ? -1 : 1;
  }
  for (std::size_t i = 0; i < a.coords.size(); ++i) {
    if (a.coords[i] != b.coords[i]) return a.coords[i] < b.coords[i] ? -1 : 1;
  }
  return 0;
}

bool point_less(const SpaceDescriptor& space, const SpacePoint& a, const SpacePoint& b) {
  return compare_points(space, a, b) < 0;
}

double distance(const SpaceDescriptor& space, const SpacePoint& a, const SpacePoint& b) {
  require_same_kind(space, a);
  require_same_kind(space, b);
  switch (space.kind) {
    case SpaceKind::Euclidean: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.coords.size(); ++i) {
        const double d = a.coords[i] - b.coords[i];
        s += d * d;
      }
      return std::sqrt(s);
    }
    case SpaceKind::Sphere: {
      const double c = std::clamp(dot(a.coords, b.coords), -1.0, 1.0);
      return std::acos(c);
    }
    case SpaceKind::Circle: {
      const double d = std::abs(a.coords[0] - b.coords[0]);
      return std::min(d, kTwoPi - d);
    }
    case SpaceKind::Spider: {
      if (a.leg == b.leg) return std::abs(a.coords[0] - b.coords[0]);
      return a.coords[0] + b.coords[0];
    }
  }
  return 0.0;
}

SpacePoint geodesic_point(const SpaceDescriptor& space, const SpacePoint& a,
                          const SpacePoint& b, double t) {
  require_same_kind(space, a);
  require_same_kind(space, b);
  switch (space.kind) {
    case SpaceKind::Euclidean: {
      std::vector<double> c(a.coords.size());
      for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = a.coords[i] + t * (b.coords[i] - a.coords[i]);
      return SpacePoint{std::move(c), 0};
    }
    case SpaceKind::Sphere: {
      const double cosang = std::clamp(dot(a.coords, b.coords), -1.0, 1.0);
      const double ang = std::acos(cosang);
      if (ang >= kPi - kSphereAntipodalSlack)
        throw NonUniqueGeodesicError("antipodal sphere points have no unique geodesic");
      if (ang < 1e-15) return a;
      const double s = std::sin(ang);
      const double wa = std::sin((1.0 - t) * ang) / s;
      const double wb = std::sin(t * ang) / s;
      std::vector<double> c(a.coords.size());
      for (std::size_t i = 0; i < c.size(); ++i) c[i] = wa * a.coords[i] + wb * b.coords[i];
      const double n = norm(c);
      for (double& x : c) x /= n;
      return SpacePoint{std::move(c), 0};
    }
    case SpaceKind::Circle: {
      const double delta = std::remainder(b.coords[0] - a.coords[0], kTwoPi);
      if (std::abs(delta) >= kPi - kCircleAntipodalSlack)
        throw NonUniqueGeodesicError("antipodal circle points have no unique geodesic");
      return circle_point(a.coords[0] + t * delta);
    }
    case SpaceKind::Spider: {
      const double ra = a.coords[0], rb = b.coords[0];
      if (a.leg == b.leg) return spider_point(a.leg, ra + t * (rb - ra));
      const double s = t * (ra + rb);
      if (s <= ra) return spider_point(a.leg, ra - s);
      return spider_point(b.leg, s - ra);
    }
  }
  return a;
}

TangentVector log_map(const SpaceDescriptor& space, const SpacePoint& base,
                      const SpacePoint& target) {
  require_same_kind(space, base);
  require_same_kind(space, target);
  switch (space.kind) {
    case SpaceKind::Euclidean: {
      std::vector<double> v(base.coords.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = target.coords[i] - base.coords[i];
      return TangentVector{base, std::move(v)};
    }
    case SpaceKind::Sphere: {
      const double cosang = std::clamp(dot(base.coords, target.coords), -1.0, 1.0);
      const double ang = std::acos(cosang);
      if (ang >= kPi - kSphereAntipodalSlack)
        throw CutLocusError("log map undefined for antipodal sphere points");
      std::vector<double> u(base.coords.size());
      for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = target.coords[i] - cosang * base.coords[i];
      const double un = norm(u);
      if (un < 1e-15) return TangentVector{base, std::vector<double>(u.size(), 0.0)};
      for (double& x : u) x *= ang / un;
      return TangentVector{base, std::move(u)};
    }
    case SpaceKind::Circle: {
      const double delta = std::remainder(target.coords[0] - base.coords[0], kTwoPi);
      if (std::abs(delta) >= kPi - kCircleAntipodalSlack)
        throw CutLocusError("log map undefined for antipodal circle points");
      return TangentVector{base, {delta}};
    }
    case SpaceKind::Spider:
      throw UnsupportedOperationError("log map is undefined on the spider");
  }
  return TangentVector{base, {}};
}

SpacePoint exp_map(const SpaceDescriptor& space, const TangentVector& v) {
  require_same_kind(space, v.base);
  switch (space.kind) {
    case SpaceKind::Euclidean: {
      std::vector<double> c(v.base.coords.size());
      for (std::size_t i = 0; i < c.size(); ++i) c[i] = v.base.coords[i] + v.components[i];
      return SpacePoint{std::move(c), 0};
    }
    case SpaceKind::Sphere: {
      const double n = norm(v.components);
      if (n < 1e-15) return v.base;
      std::vector<double> c(v.base.coords.size());
      const double cn = std::cos(n), sn = std::sin(n) / n;
      for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = cn * v.base.coords[i] + sn * v.components[i];
      const double cnorm = norm(c);
      for (double& x : c) x /= cnorm;
      return SpacePoint{std::move(c), 0};
    }
    case SpaceKind::Circle:
      return circle_point(v.base.coords[0] + v.components[0]);
    case SpaceKind::Spider:
      throw UnsupportedOperationError("exp map is undefined on the spider");
  }
  return v.base;
}

std::vector<std::vector<double>> tangent_basis(const SpaceDescriptor& space,
                                               const SpacePoint& base) {
  require_same_kind(space, base);
  switch (space.kind) {
    case SpaceKind::Euclidean: {
      std::vector<std::vector<double>> basis(space.dim, std::vector<double>(space.dim, 0.0));
      for (int i = 0; i < space.dim; ++i) basis[i][i] = 1.0;
      return basis;
    }
    case SpaceKind::Circle:
      return {{1.0}};
    case SpaceKind::Sphere: {
      // Householder reflection H mapping e0 to +-base; columns 1..m-1 of H
      // form a deterministic orthonormal basis of the orthogonal complement.
      const int m = space.dim + 1;
      const std::vector<double>& b = base.coords;
      const double sign = b[0] >= 0.0 ? 1.0 : -1.0;
      std::vector<double> w(b.begin(), b.end());
      w[0] += sign;  // w = b + sign * e0, |b| = 1
      const double wn2 = dot(w, w);
      std::vector<std::vector<double>> basis;
      basis.reserve(space.dim);
      for (int j = 1; j < m; ++j) {
        std::vector<double> col(m, 0.0);
        col[j] = 1.0;
        const double f = 2.0 * w[j] / wn2;
        for (int i = 0; i < m; ++i) col[i] -= f * w[i];
        basis.push_back(std::move(col));
      }
      return basis;
    }
    case SpaceKind::Spider:
      throw UnsupportedOperationError("the spider has no tangent spaces");
  }
  return {};
}

void check_law(const SpaceDescriptor& space, const DistributionSpec& law) {
  using Law = DistributionSpec::Law;
  auto fail = [&](const std::string& m) { throw ConfigError(m + " (space " + space.name() + ")"); };
  switch (law.law) {
    case Law::Atomic: {
      if (law.atoms.empty() || law.atoms.size() != law.weights.size())
        fail("atomic law needs matching atoms and weights");
      double s = 0.0;
      for (double w : law.weights) {
        if (w < 0.0) fail("atomic law weights must be non-negative");
        s += w;
      }
      if (std::abs(s - 1.0) > kStructuralTol) fail("atomic law weights must sum to 1");
      for (const auto& a : law.atoms) check_point(space, a);
      break;
    }
    case Law::Gaussian:
    case Law::UniformBall:
      if (space.kind != SpaceKind::Euclidean) fail("law requires a Euclidean space");
      check_point(space, law.center);
      if (law.law == Law::Gaussian) {
        if (law.sigma.empty() ||
            (law.sigma.size() != 1 && static_cast<int>(law.sigma.size()) != space.dim))
          fail("gaussian sigma must be scalar or one entry per axis");
        for (double s : law.sigma)
          if (s <= 0.0) fail("gaussian sigma must be positive");
      } else if (law.radius <= 0.0) {
        fail("uniform ball radius must be positive");
      }
      break;
    case Law::SphereWrappedGaussian:
      if (space.kind != SpaceKind::Sphere) fail("law requires a sphere");
      check_point(space, law.center);
      if (law.sigma.size() != 1 || law.sigma[0] <= 0.0) fail("wrapped gaussian needs scalar sigma > 0");
      break;
    case Law::SphereUniform:
      if (space.kind != SpaceKind::Sphere) fail("law requires a sphere");
      break;
    case Law::CircleWrappedGaussian:
      if (space.kind != SpaceKind::Circle) fail("law requires the circle");
      if (law.sigma.size() != 1 || law.sigma[0] <= 0.0) fail("wrapped gaussian needs scalar sigma > 0");
      break;
    case Law::CircleUniform:
      if (space.kind != SpaceKind::Circle) fail("law requires the circle");
      break;
    case Law::CircleUniformArc:
      if (space.kind != SpaceKind::Circle) fail("law requires the circle");
      if (law.radius <= 0.0 || law.radius > kPi) fail("arc half-width must be in (0, pi]");
      break;
    case Law::SpiderMixture: {
      if (space.kind != SpaceKind::Spider) fail("law requires a spider");
      if (static_cast<int>(law.leg_weights.size()) != space.dim)
        fail("need one leg weight per leg");
      double s = 0.0;
      for (double w : law.leg_weights) {
        if (w < 0.0) fail("leg weights must be non-negative");
        s += w;
      }
      if (std::abs(s - 1.0) > kStructuralTol) fail("leg weights must sum to 1");
      if (law.radial.size() != law.leg_weights.size()) fail("need one radial law per leg");
      for (const auto& r : law.radial) {
        if (r.kind == DistributionSpec::RadialLaw::Kind::Dirac) {
          if (r.a < 0.0) fail("dirac radius must be non-negative");
        } else if (r.a < 0.0 || r.b < r.a) {
          fail("uniform radial law needs 0 <= min <= max");
        }
      }
      break;
    }
    case Law::Mixture: {
      if (law.components.empty() || law.components.size() != law.component_weights.size())
        fail("mixture needs matching components and weights");
      double s = 0.0;
      for (double w : law.component_weights) {
        if (w < 0.0) fail("mixture weights must be non-negative");
        s += w;
      }
      if (std::abs(s - 1.0) > kStructuralTol) fail("mixture weights must sum to 1");
      for (const auto& c : law.components) check_law(space, c);
      break;
    }
  }
}

SpacePoint sample_point(const SpaceDescriptor& space, const DistributionSpec& law, Rng& rng) {
  using Law = DistributionSpec::Law;
  switch (law.law) {
    case Law::Atomic:
      return law.atoms[rng.categorical(law.weights)];
    case Law::Gaussian: {
      std::vector<double> c(space.dim);
      for (int i = 0; i < space.dim; ++i) {
        const double s = law.sigma.size() == 1 ? law.sigma[0] : law.sigma[i];
        c[i] = law.center.coords[i] + s * rng.gaussian();
      }
      return SpacePoint{std::move(c), 0};
    }
    case Law::UniformBall: {
      std::vector<double> dir(space.dim);
      double n2 = 0.0;
      for (int i = 0; i < space.dim; ++i) {
        dir[i] = rng.gaussian();
        n2 += dir[i] * dir[i];
      }
      const double n = std::sqrt(n2);
      const double r = law.radius * std::pow(rng.uniform(), 1.0 / space.dim);
      std::vector<double> c(space.dim);
      for (int i = 0; i < space.dim; ++i)
        c[i] = law.center.coords[i] + (n > 0.0 ? r * dir[i] / n : 0.0);
      return SpacePoint{std::move(c), 0};
    }
    case Law::SphereWrappedGaussian: {
      const auto basis = tangent_basis(space, law.center);
      std::vector<double> v(space.dim + 1, 0.0);
      for (int i = 0; i < space.dim; ++i) {
        const double g = law.sigma[0] * rng.gaussian();
        for (int k = 0; k <= space.dim; ++k) v[k] += g * basis[i][k];
      }
      return exp_map(space, TangentVector{law.center, std::move(v)});
    }
    case Law::SphereUniform: {
      std::vector<double> c(space.dim + 1);
      double n = 0.0;
      do {
        n = 0.0;
        for (auto& x : c) {
          x = rng.gaussian();
          n += x * x;
        }
      } while (n < 1e-30);
      n = std::sqrt(n);
      for (auto& x : c) x /= n;
      return SpacePoint{std::move(c), 0};
    }
    case Law::CircleWrappedGaussian:
      return circle_point(law.center.coords[0] + law.sigma[0] * rng.gaussian());
    case Law::CircleUniform:
      return circle_point(rng.uniform(0.0, kTwoPi));
    case Law::CircleUniformArc:
      return circle_point(law.center.coords[0] + rng.uniform(-law.radius, law.radius));
    case Law::SpiderMixture: {
      const std::size_t leg = rng.categorical(law.leg_weights);
      const auto& rl = law.radial[leg];
      double r = rl.kind == DistributionSpec::RadialLaw::Kind::Dirac
                     ? rl.a
                     : rng.uniform(rl.a, rl.b);
      return spider_point(static_cast<int>(leg) + 1, r);
    }
    case Law::Mixture: {
      const std::size_t c = rng.categorical(law.component_weights);
      return sample_point(space, law.components[c], rng);
    }
  }
  throw ConfigError("unknown law");
}

}  // namespace polymean
