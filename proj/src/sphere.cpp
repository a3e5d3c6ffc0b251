#include "geoq/sphere.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace geoq {

namespace {

constexpr double kCoincidentTol = 1e-9;

}  // namespace

Frame frame_with_axis(const UnitVec3& axis) {
    const Vec3 e3 = axis.vec();
    const Vec3 helper = std::abs(e3.y) < 0.9 ? Vec3{0.0, 1.0, 0.0} : Vec3{0.0, 0.0, 1.0};
    const Vec3 c = cross(helper, e3);
    const Vec3 e1 = c / norm(c);
    return {e1, cross(e3, e1), e3};
}

bool SphericalCircle::is_great() const { return std::abs(rho - kPi / 2) < 1e-12; }

UnitVec3 SphericalCircle::point_at(double t) const {
    const Frame f = frame_with_axis(axis);
    const double s = std::sin(rho);
    return UnitVec3(f.to_world({s * std::cos(t), s * std::sin(t), std::cos(rho)}));
}

UnitVec3 SphericalSpiral::point_at_phi(double phi) const {
    const double theta = phi / a;
    const double c = std::cos(phi);
    return UnitVec3(frame.to_world({std::cos(theta + theta0) * c, std::sin(theta + theta0) * c, std::sin(phi)}));
}

double SphericalSpiral::speed(double theta) const {
    const double c = std::cos(a * theta);
    return std::sqrt(c * c + a * a);
}

double GeodesicPolyline::length() const {
    double total = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        total += geodesic_distance(points[i - 1], points[i]);
    }
    return total;
}

UnitVec3 antipode(const UnitVec3& p) { return -p; }

double geodesic_distance(const UnitVec3& p, const UnitVec3& q) {
    // acos is ill-conditioned near 0 and pi; atan2 of |p x q| and p.q is not.
    return std::atan2(norm(cross(p, q)), dot(p, q));
}

SphericalCircle great_circle_through(const UnitVec3& p, const UnitVec3& q) {
    const Vec3 n = cross(p, q);
    if (norm(n) < kCoincidentTol) {
        throw DegenerateInput("great circle through coincident or antipodal points is not unique");
    }
    return {UnitVec3(n), kPi / 2};
}

SphericalCircle circle_with_radius(const UnitVec3& center, double rho) {
    if (!(rho > 0.0) || !(rho < kPi)) {
        throw OutOfRange("circle radius must lie in (0, pi), got " + std::to_string(rho));
    }
    if (rho > kPi / 2) {
        return {-center, kPi - rho};
    }
    return {center, rho};
}

SphericalCircle latitude_circle(const UnitVec3& axis, const UnitVec3& through) {
    if (norm(cross(axis, through)) < kCoincidentTol) {
        throw DegenerateInput("latitude circle through a pole of its axis is a point");
    }
    const double polar = geodesic_distance(axis, through);
    if (polar > kPi / 2) {
        return {-axis, kPi - polar};
    }
    return {axis, polar};
}

SphericalSpiral spiral_for(const UnitVec3& node, double a, double theta0, SpiralSweep sweep) {
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw OutOfRange("spiral pitch must be positive, got " + std::to_string(a));
    }
    if (!(theta0 >= 0.0) || !(theta0 < 2.0 * kPi)) {
        throw OutOfRange("spiral phase must lie in [0, 2pi), got " + std::to_string(theta0));
    }
    SphericalSpiral s;
    s.frame = frame_with_axis(-node);
    s.a = a;
    s.theta0 = theta0;
    s.phi_min = -kPi / 2;
    s.phi_max = (sweep == SpiralSweep::Auto && a >= 0.5) ? 3.0 * kPi / 2 : kPi / 2;
    return s;
}

double curve_length(const SphericalCurve& curve) {
    if (const auto* c = std::get_if<SphericalCircle>(&curve)) {
        return c->length();
    }
    const auto& s = std::get<SphericalSpiral>(curve);
    auto speed = [&s](double theta) { return s.speed(theta); };
    // Integrate loop by loop so each sub-interval is smooth and short.
    const double lo = s.phi_min / s.a;
    const double hi = s.phi_max / s.a;
    const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / kPi)));
    double total = 0.0;
    for (int i = 0; i < pieces; ++i) {
        const double t0 = lo + (hi - lo) * i / pieces;
        const double t1 = lo + (hi - lo) * (i + 1) / pieces;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(speed, t0, t1, 10, 1e-12);
    }
    return total;
}

namespace {

GeodesicPolyline sample_circle(const SphericalCircle& c, double step) {
    const Frame f = frame_with_axis(c.axis);
    const double s = std::sin(c.rho);
    const double h = std::cos(c.rho);
    const auto n = static_cast<std::size_t>(std::max(3.0, std::ceil(c.length() / step)));
    GeodesicPolyline poly;
    poly.step = step;
    poly.points.reserve(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
        poly.points.emplace_back(f.to_world({s * std::cos(t), s * std::sin(t), h}));
    }
    poly.points.push_back(poly.points.front());
    return poly;
}

GeodesicPolyline sample_spiral(const SphericalSpiral& sp, double step) {
    const double lo = sp.phi_min / sp.a;
    const double hi = sp.phi_max / sp.a;
    const double peak = std::sqrt(1.0 + sp.a * sp.a);
    GeodesicPolyline poly;
    poly.step = step;
    poly.points.reserve(static_cast<std::size_t>((hi - lo) * peak / step) + 2);
    poly.points.push_back(sp.point_at_phi(sp.phi_min));
    double theta = lo;
    double v = sp.speed(theta);
    while (theta < hi) {
        // Speed is monotone between its extrema at phi = k*pi/2, so the larger endpoint
        // speed bounds it unless the step straddles a maximum at phi = k*pi.
        const double d0 = step / v;
        const double v1 = sp.speed(theta + d0);
        const double phi0 = sp.a * theta;
        const double phi1 = sp.a * (theta + d0);
        const bool straddles = std::floor(phi0 / kPi) != std::floor(phi1 / kPi);
        const double vmax = straddles ? peak : std::max(v, v1);
        double next = theta + step / vmax;
        if (next > hi - 1e-12 * (hi - lo)) {
            next = hi;
        }
        if (next == hi) {
            poly.points.push_back(sp.point_at_phi(sp.phi_max));
        } else {
            const double phi = sp.a * next;
            const double c = std::cos(phi);
            poly.points.push_back(UnitVec3::from_unit(
                sp.frame.to_world({std::cos(next + sp.theta0) * c, std::sin(next + sp.theta0) * c, std::sin(phi)})));
        }
        theta = next;
        v = sp.speed(theta);
    }
    return poly;
}

// Uniform grid hash over R^3 for short segments.
class SegmentGrid {
public:
    explicit SegmentGrid(double cell) : inv_cell_(1.0 / cell) {}

    template <typename Fn>
    void for_cells(const Vec3& p, const Vec3& q, Fn&& fn) const {
        const auto lo = cell_of({std::min(p.x, q.x), std::min(p.y, q.y), std::min(p.z, q.z)});
        const auto hi = cell_of({std::max(p.x, q.x), std::max(p.y, q.y), std::max(p.z, q.z)});
        for (std::int64_t i = lo[0]; i <= hi[0]; ++i) {
            for (std::int64_t j = lo[1]; j <= hi[1]; ++j) {
                for (std::int64_t k = lo[2]; k <= hi[2]; ++k) {
                    fn(key(i, j, k));
                }
            }
        }
    }

    void insert(const Vec3& p, const Vec3& q, int segment) {
        for_cells(p, q, [&](std::uint64_t k) { cells_[k].push_back(segment); });
    }

    const std::vector<int>* find(std::uint64_t k) const {
        auto it = cells_.find(k);
        return it == cells_.end() ? nullptr : &it->second;
    }

private:
    std::array<std::int64_t, 3> cell_of(const Vec3& v) const {
        return {static_cast<std::int64_t>(std::floor(v.x * inv_cell_)),
                static_cast<std::int64_t>(std::floor(v.y * inv_cell_)),
                static_cast<std::int64_t>(std::floor(v.z * inv_cell_))};
    }
    static std::uint64_t key(std::int64_t i, std::int64_t j, std::int64_t k) {
        constexpr std::int64_t off = 1 << 20;
        return (static_cast<std::uint64_t>(i + off) << 42) | (static_cast<std::uint64_t>(j + off) << 21) |
               static_cast<std::uint64_t>(k + off);
    }

    double inv_cell_;
    std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

// Half-open side test: points exactly on the plane count as positive, so a sample lying
// on the other curve is counted by exactly one of its two segments.
bool side(const Vec3& n, const Vec3& p) { return dot(n, p) >= 0.0; }

bool segments_cross(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1, Vec3& where) {
    const Vec3 np = cross(p0, p1);
    const Vec3 nq = cross(q0, q1);
    if (side(np, q0) == side(np, q1) || side(nq, p0) == side(nq, p1)) {
        return false;
    }
    Vec3 x = cross(np, nq);
    const double len = norm(x);
    if (!(len > 0.0)) {
        return false;
    }
    x = x / len;
    if (dot(x, p0 + p1) < 0.0) {
        x = -x;
    }
    // Both short arcs must lie on the same side of the sphere as the crossing point.
    if (dot(x, q0 + q1) <= 0.0) {
        return false;
    }
    where = x;
    return true;
}

}  // namespace

GeodesicPolyline sample(const SphericalCurve& curve, double step) {
    if (!(step > 0.0)) {
        throw OutOfRange("sampling step must be positive");
    }
    return std::visit(
        [step](const auto& c) -> GeodesicPolyline {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, SphericalCircle>) {
                return sample_circle(c, step);
            } else {
                return sample_spiral(c, step);
            }
        },
        curve);
}

Intersections count_intersections(const GeodesicPolyline& a, const GeodesicPolyline& b, double merge_tol) {
    Intersections out;
    if (a.points.size() < 2 || b.points.size() < 2) {
        return out;
    }
    // Hash the shorter polyline; segments of the longer one outside its bounding box
    // are rejected before any lookup.
    const bool swap = a.points.size() > b.points.size();
    const auto& small = swap ? b.points : a.points;
    const auto& big = swap ? a.points : b.points;

    double longest = 0.0;
    for (const auto* pts : {&big, &small}) {
        for (std::size_t i = 1; i < pts->size(); ++i) {
            longest = std::max(longest, norm((*pts)[i].vec() - (*pts)[i - 1].vec()));
        }
    }
    Vec3 lo{1e9, 1e9, 1e9};
    Vec3 hi{-1e9, -1e9, -1e9};
    SegmentGrid grid(std::max(4.0 * longest, 1e-6));
    for (std::size_t i = 1; i < small.size(); ++i) {
        grid.insert(small[i - 1], small[i], static_cast<int>(i - 1));
        const Vec3& p = small[i];
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const Vec3& first = small.front();
    lo = {std::min(lo.x, first.x) - longest, std::min(lo.y, first.y) - longest, std::min(lo.z, first.z) - longest};
    hi = {std::max(hi.x, first.x) + longest, std::max(hi.y, first.y) + longest, std::max(hi.z, first.z) + longest};
    auto disjoint = [&lo, &hi](const Vec3& p, const Vec3& q) {
        return std::max(p.x, q.x) < lo.x || std::max(p.y, q.y) < lo.y || std::max(p.z, q.z) < lo.z ||
               std::min(p.x, q.x) > hi.x || std::min(p.y, q.y) > hi.y || std::min(p.z, q.z) > hi.z;
    };

    std::vector<Vec3> crossings;
    std::vector<int> candidates;
    for (std::size_t j = 1; j < big.size(); ++j) {
        const Vec3& q0 = big[j - 1];
        const Vec3& q1 = big[j];
        if (disjoint(q0, q1)) {
            continue;
        }
        candidates.clear();
        grid.for_cells(q0, q1, [&](std::uint64_t k) {
            if (const auto* segs = grid.find(k)) {
                candidates.insert(candidates.end(), segs->begin(), segs->end());
            }
        });
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        for (int i : candidates) {
            Vec3 where;
            if (segments_cross(small[i], small[i + 1], q0, q1, where)) {
                crossings.push_back(where);
            }
        }
    }

    // Merge crossing clusters (union-find; crossing counts are small).
    std::vector<int> parent(crossings.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&parent](int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    for (std::size_t i = 0; i < crossings.size(); ++i) {
        for (std::size_t j = i + 1; j < crossings.size(); ++j) {
            const double d = geodesic_distance(UnitVec3::from_unit(crossings[i]), UnitVec3::from_unit(crossings[j]));
            if (d < merge_tol) {
                parent[find(static_cast<int>(i))] = find(static_cast<int>(j));
            }
        }
    }
    std::vector<Vec3> sums(crossings.size());
    std::vector<bool> root(crossings.size(), false);
    for (std::size_t i = 0; i < crossings.size(); ++i) {
        const int r = find(static_cast<int>(i));
        sums[r] += crossings[i];
        root[r] = true;
    }
    for (std::size_t i = 0; i < crossings.size(); ++i) {
        if (root[i]) {
            out.points.emplace_back(sums[i]);
        }
    }
    out.count = static_cast<int>(out.points.size());
    return out;
}

Intersections count_intersections(const SphericalCurve& c1, const SphericalCurve& c2, double step, double merge_tol) {
    if (!(merge_tol >= 0.0) || merge_tol > 2.0 * step) {
        throw OutOfRange("merge tolerance must lie in [0, 2 * step]");
    }
    return count_intersections(sample(c1, step), sample(c2, step), merge_tol);
}

}  // namespace geoq
