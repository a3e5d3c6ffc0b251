#pragma once

#include <numbers>
#include <variant>
#include <vector>

#include "geoq/vec3.hpp"

namespace geoq {

inline constexpr double kPi = std::numbers::pi;

/// Circle on the unit sphere: all points at polar angle `rho` from `axis`.
/// rho lies in (0, pi/2]; rho = pi/2 is a great circle.
struct SphericalCircle {
    UnitVec3 axis;
    double rho = kPi / 2;

    bool is_great() const;
    /// Euclidean radius of the circle's plane section.
    double euclidean_radius() const { return std::sin(rho); }
    double length() const { return 2.0 * kPi * std::sin(rho); }
    /// Point at angle t around the axis, measured in frame_with_axis(axis).
    UnitVec3 point_at(double t) const;
};

/// Spiral with latitude proportional to longitude in a frame whose south pole is the
/// accessing node:  p(theta) = frame(cos(theta + theta0) cos phi, sin(theta + theta0) cos phi, sin phi),
/// phi = a * theta, phi in [phi_min, phi_max].
struct SphericalSpiral {
    Frame frame;
    double a = 0.2;
    double theta0 = 0.0;
    double phi_min = -kPi / 2;
    double phi_max = kPi / 2;

    UnitVec3 point_at_phi(double phi) const;
    UnitVec3 point_at_theta(double theta) const { return point_at_phi(a * theta); }
    /// |dp/dtheta|.
    double speed(double theta) const;
    /// Latitude spacing between consecutive loops.
    double loop_spacing() const { return 2.0 * a * kPi; }
    UnitVec3 start() const { return point_at_phi(phi_min); }
    UnitVec3 end() const { return point_at_phi(phi_max); }
};

using SphericalCurve = std::variant<SphericalCircle, SphericalSpiral>;

/// Ordered samples along a curve. Closed curves repeat their first point last.
struct GeodesicPolyline {
    std::vector<UnitVec3> points;
    double step = 0.0;

    bool closed() const { return points.size() > 1 && points.front() == points.back(); }
    /// Sum of geodesic distances between consecutive samples.
    double length() const;
};

UnitVec3 antipode(const UnitVec3& p);

/// Angle between p and q in [0, pi].
double geodesic_distance(const UnitVec3& p, const UnitVec3& q);

/// Throws DegenerateInput when p and q are within 1e-9 of coincident or antipodal.
SphericalCircle great_circle_through(const UnitVec3& p, const UnitVec3& q);

/// Circle of geodesic radius rho about center. Radii in (pi/2, pi) are accepted and
/// folded onto the antipodal center with radius pi - rho, which is the same point set.
/// Throws OutOfRange outside (0, pi).
SphericalCircle circle_with_radius(const UnitVec3& center, double rho);

/// Circle about `axis` through `through`. Throws DegenerateInput when through ~ +-axis.
SphericalCircle latitude_circle(const UnitVec3& axis, const UnitVec3& through);

enum class SpiralSweep {
    /// [-pi/2, pi/2], extended to [-pi/2, 3pi/2] when a >= 0.5 so the curve passes over
    /// the far pole and sweeps back down to the node.
    Auto,
    /// Always [-pi/2, pi/2].
    Hemispheric,
};

/// Spiral from `node` to its antipode. Throws OutOfRange for a <= 0 or theta0 outside [0, 2pi).
SphericalSpiral spiral_for(const UnitVec3& node, double a, double theta0, SpiralSweep sweep = SpiralSweep::Auto);

/// Arc length of a curve; closed form for circles, adaptive quadrature for spirals.
double curve_length(const SphericalCurve& curve);

/// Samples with consecutive geodesic spacing <= step. Throws OutOfRange for step <= 0.
GeodesicPolyline sample(const SphericalCurve& curve, double step);

inline constexpr double kDefaultStep = kPi / 2000;
inline constexpr double kDefaultMergeTol = kPi / 1000;

struct Intersections {
    int count = 0;
    std::vector<UnitVec3> points;
};

/// Transversal crossings of two sampled polylines; crossings closer than merge_tol are
/// merged. Tangencies with no sign change are not counted.
Intersections count_intersections(const GeodesicPolyline& a, const GeodesicPolyline& b, double merge_tol);

/// Samples both curves at `step` and counts crossings. merge_tol must be in [0, 2 * step].
Intersections count_intersections(const SphericalCurve& c1, const SphericalCurve& c2,
                                  double step = kDefaultStep, double merge_tol = kDefaultMergeTol);

}  // namespace geoq
