#pragma once

#include <cmath>

#include "geoq/errors.hpp"

namespace geoq {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    constexpr Vec3& operator*=(double s) {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }
    constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

/// Signed volume a . (b x c).
constexpr double triple(const Vec3& a, const Vec3& b, const Vec3& c) { return dot(cross(a, b), c); }

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

/// Point on the unit sphere. Construction normalizes; the zero vector is rejected.
class UnitVec3 {
public:
    /// Defaults to the north pole.
    constexpr UnitVec3() = default;

    explicit UnitVec3(const Vec3& v) : v_(normalized(v)) {}
    UnitVec3(double x, double y, double z) : UnitVec3(Vec3{x, y, z}) {}

    /// Wraps an already unit-length vector without renormalizing.
    static constexpr UnitVec3 from_unit(const Vec3& v) {
        UnitVec3 u;
        u.v_ = v;
        return u;
    }

    /// Spherical polar coordinates: polar angle from +z and longitude.
    static UnitVec3 from_polar(double polar, double longitude) {
        const double s = std::sin(polar);
        return from_unit({s * std::cos(longitude), s * std::sin(longitude), std::cos(polar)});
    }

    constexpr double x() const { return v_.x; }
    constexpr double y() const { return v_.y; }
    constexpr double z() const { return v_.z; }
    constexpr const Vec3& vec() const { return v_; }
    constexpr operator const Vec3&() const { return v_; }  // NOLINT(google-explicit-constructor)

    constexpr UnitVec3 operator-() const { return from_unit(-v_); }
    constexpr bool operator==(const UnitVec3&) const = default;

private:
    static Vec3 normalized(const Vec3& v) {
        const double n = norm(v);
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw DegenerateInput("cannot normalize a zero or non-finite vector");
        }
        return v / n;
    }

    Vec3 v_{0.0, 0.0, 1.0};
};

/// Reflection through the equator plane (z -> -z).
constexpr UnitVec3 reflect_z(const UnitVec3& p) { return UnitVec3::from_unit({p.x(), p.y(), -p.z()}); }

/// Orthonormal frame; columns e1, e2, e3 are the local x, y, z axes in world coordinates.
struct Frame {
    Vec3 e1{1.0, 0.0, 0.0};
    Vec3 e2{0.0, 1.0, 0.0};
    Vec3 e3{0.0, 0.0, 1.0};

    constexpr Vec3 to_world(const Vec3& local) const { return e1 * local.x + e2 * local.y + e3 * local.z; }
    constexpr Vec3 to_local(const Vec3& world) const { return {dot(e1, world), dot(e2, world), dot(e3, world)}; }
};

/// Right-handed frame whose third axis is `axis`. The choice is deterministic and
/// reduces to the identity for axis = +z.
Frame frame_with_axis(const UnitVec3& axis);

}  // namespace geoq
