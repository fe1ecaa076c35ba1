#pragma once

#include <string>
#include <vector>

#include "polymean/errors.hpp"
#include "polymean/rng.hpp"

namespace polymean {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Module-level tolerances. Structural checks (point validity, weight sums)
// use kStructuralTol; geometric contracts (geodesic speed, log/exp inversion)
// use kGeometricTol. Overridable where an operation takes an explicit tol.
inline constexpr double kStructuralTol = 1e-12;
inline constexpr double kGeometricTol = 1e-9;

enum class SpaceKind { Euclidean, Sphere, Circle, Spider };

// Descriptor of one of the supported base path-metric spaces:
//   Euclidean(dim)   flat R^dim, dim >= 1
//   Sphere(dim)      unit sphere S^dim embedded in R^{dim+1}, dim >= 1
//   Circle           angles in [0, 2pi) with arc-length distance
//   Spider(legs)     open book of `legs` >= 3 half-lines glued at a center
struct SpaceDescriptor {
  SpaceKind kind = SpaceKind::Euclidean;
  int dim = 1;  // Euclidean/Sphere dimension or Spider leg count; 0 for Circle

  static SpaceDescriptor euclidean(int dim);
  static SpaceDescriptor sphere(int dim);
  static SpaceDescriptor circle();
  static SpaceDescriptor spider(int num_legs);

  int point_size() const;   // number of coordinates carried by a SpacePoint
  int tangent_dim() const;  // Riemannian spaces only
  bool riemannian() const { return kind != SpaceKind::Spider; }
  std::string name() const;

  friend bool operator==(const SpaceDescriptor&, const SpaceDescriptor&) = default;
};

// A point of a base space. Interpretation depends on the space kind:
//   Euclidean  coords = cartesian coordinates (dim entries)
//   Sphere     coords = unit vector in R^{dim+1} (norm 1 within 1e-12)
//   Circle     coords = {angle in [0, 2pi)}
//   Spider     coords = {radius >= 0}, leg = 1-based leg index; the center is
//              canonically (leg 0, radius 0)
struct SpacePoint {
  std::vector<double> coords;
  int leg = 0;

  friend bool operator==(const SpacePoint&, const SpacePoint&) = default;
};

SpacePoint euclidean_point(std::vector<double> coords);
SpacePoint sphere_point(std::vector<double> coords);  // validates unit norm
SpacePoint circle_point(double angle);                // wraps into [0, 2pi)
SpacePoint spider_point(int leg, double radius);      // radius 0 -> center

// Tangent vector at `base`, components in ambient coordinates (sphere),
// the angular line (circle), or cartesian coordinates (euclidean).
struct TangentVector {
  SpacePoint base;
  std::vector<double> components;
};

double tangent_norm(const TangentVector& v);

// Validates that p is a well-formed point of `space`; throws TypeError.
void check_point(const SpaceDescriptor& space, const SpacePoint& p);

// Space-specific total order used for canonical sample representatives:
// lexicographic on coordinates, (leg, radius) for the spider.
// Returns <0, 0, >0.
int compare_points(const SpaceDescriptor& space, const SpacePoint& a, const SpacePoint& b);
bool point_less(const SpaceDescriptor& space, const SpacePoint& a, const SpacePoint& b);

// Geodesic distance. Symmetric, zero iff a == b.
double distance(const SpaceDescriptor& space, const SpacePoint& a, const SpacePoint& b);

// Point c(t) on a constant-speed minimizing geodesic with c(0)=a, c(1)=b.
// Throws NonUniqueGeodesicError for antipodal sphere/circle pairs.
SpacePoint geodesic_point(const SpaceDescriptor& space, const SpacePoint& a,
                          const SpacePoint& b, double t);

// Riemannian log map; throws UnsupportedOperationError on the spider and
// CutLocusError for antipodal pairs.
TangentVector log_map(const SpaceDescriptor& space, const SpacePoint& base,
                      const SpacePoint& target);

// Riemannian exponential map (inverse of log_map away from the cut locus).
SpacePoint exp_map(const SpaceDescriptor& space, const TangentVector& v);

// Deterministic orthonormal basis of the tangent space at `base`, each entry
// given in the same component convention as TangentVector.
std::vector<std::vector<double>> tangent_basis(const SpaceDescriptor& space,
                                               const SpacePoint& base);

// Sampling laws for the supported spaces. A single struct with a law tag
// keeps the JSON schema flat; check_law validates the law/space pairing.
struct DistributionSpec {
  enum class Law {
    Atomic,                // any space: atoms + weights
    Gaussian,              // euclidean: mean + sigma (isotropic or per-axis)
    UniformBall,           // euclidean: center + radius
    SphereWrappedGaussian, // sphere: pole + sigma, via the exponential map
    SphereUniform,         // sphere
    CircleWrappedGaussian, // circle: mean angle + sigma
    CircleUniform,         // circle
    CircleUniformArc,      // circle: center angle + half_width
    SpiderMixture,         // spider: leg weights + per-leg radial law
    Mixture,               // any space: convex combination of sub-laws
  };

  struct RadialLaw {
    enum class Kind { Dirac, Uniform };
    Kind kind = Kind::Dirac;
    double a = 1.0;  // Dirac radius, or lower bound
    double b = 1.0;  // upper bound (Uniform)
  };

  Law law = Law::Atomic;
  std::vector<SpacePoint> atoms;
  std::vector<double> weights;
  SpacePoint center;           // mean / pole / ball or arc center
  std::vector<double> sigma;   // size 1 = isotropic
  double radius = 0.0;         // ball radius or arc half-width
  std::vector<double> leg_weights;
  std::vector<RadialLaw> radial;
  std::vector<double> component_weights;
  std::vector<DistributionSpec> components;
};

// Throws ConfigError if the law does not fit the space.
void check_law(const SpaceDescriptor& space, const DistributionSpec& law);

// One draw from `law`. Deterministic given the rng state; successive calls
// with the same rng give independent draws.
SpacePoint sample_point(const SpaceDescriptor& space, const DistributionSpec& law, Rng& rng);

double wrap_angle(double a);  // into [0, 2pi)

}  // namespace polymean
