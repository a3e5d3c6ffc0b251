#include "geoq/quorum.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "geoq/errors.hpp"
#include "geoq/random.hpp"

namespace geoq {
namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

UnitVec3 random_point(std::mt19937_64& rng) {
    const double z = 1.0 - 2.0 * unit_interval(rng);
    const double lon = 2.0 * kPi * unit_interval(rng);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return UnitVec3::from_unit({r * std::cos(lon), r * std::sin(lon), z});
}

SphericalCurve geo_write(const QuorumSystem& s, const UnitVec3& writer, double u) {
    const Frame f = frame_with_axis(writer);
    const double angle = 2.0 * kPi * u;
    const Vec3 center = std::cos(s.R_W) * writer.vec() +
                        std::sin(s.R_W) * (std::cos(angle) * f.e1 + std::sin(angle) * f.e2);
    return circle_with_radius(UnitVec3(center), s.R_W);
}

SphericalCurve geo_read(const QuorumSystem& s, const UnitVec3& reader, double u) {
    return spiral_for(reader, s.a, std::min(2.0 * kPi * u, std::nextafter(2.0 * kPi, 0.0)));
}

}  // namespace

int QuorumSystem::k() const { return static_cast<int>(std::floor(R_W / (a * kPi) + 1e-9)); }

void QuorumSystem::validate() const {
    if (kind != Kind::GeoQuorum) {
        return;
    }
    if (!(R_W > 0.0) || !(R_W < kPi)) {
        throw ConfigError("R_W must lie in (0, pi)");
    }
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw ConfigError("spiral pitch a must be positive");
    }
    if (k() < 1) {
        throw ConfigError("R_W must be at least a*pi so that floor(R_W / (a pi)) >= 1");
    }
}

std::string QuorumSystem::name() const { return std::string(kind_name(kind)); }

Kind parse_kind(std::string_view text) {
    const std::string t = lower(text);
    if (t == "qg") {
        return Kind::QG;
    }
    if (t == "qgm") {
        return Kind::QGm;
    }
    if (t == "ql") {
        return Kind::QL;
    }
    if (t == "qld") {
        return Kind::QLd;
    }
    if (t == "geoquorum") {
        return Kind::GeoQuorum;
    }
    throw ConfigError("unknown quorum system kind '" + std::string(text) + "'");
}

std::string_view kind_name(Kind kind) {
    switch (kind) {
        case Kind::QG:
            return "QG";
        case Kind::QGm:
            return "QGm";
        case Kind::QL:
            return "QL";
        case Kind::QLd:
            return "QLd";
        case Kind::GeoQuorum:
            return "GeoQuorum";
    }
    return "?";
}

UnitVec3 hash_location(std::string_view data_id, std::uint64_t seed, const std::optional<UnitVec3>& override_point) {
    if (override_point) {
        return *override_point;
    }
    char seed_bytes[8];
    for (int i = 0; i < 8; ++i) {
        seed_bytes[i] = static_cast<char>(seed >> (8 * i));
    }
    const std::uint64_t h = fnv1a64(std::string_view(seed_bytes, 8), fnv1a64(data_id));
    const std::uint64_t b1 = splitmix64(h);
    const std::uint64_t b2 = splitmix64(b1);
    const double z = 1.0 - 2.0 * unit_interval(b1);
    const double lon = 2.0 * kPi * unit_interval(b2);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return UnitVec3::from_unit({r * std::cos(lon), r * std::sin(lon), z});
}

bool is_mixed(const QuorumSystem& system, Role role) {
    switch (system.kind) {
        case Kind::QG:
            return role == Role::Read;
        case Kind::QGm:
        case Kind::GeoQuorum:
            return true;
        case Kind::QL:
        case Kind::QLd:
            return false;
    }
    return false;
}

bool roles_swapped(const QuorumSystem& system, double write_rate, double read_rate) {
    return system.kind == Kind::GeoQuorum && system.dual && write_rate <= read_rate;
}

SphericalCircle great_circle_at(const UnitVec3& p, double u) {
    const Frame f = frame_with_axis(p);
    // Axes a half-turn apart give the same circle, so u covers [0, pi).
    const double angle = kPi * u;
    return {UnitVec3::from_unit(std::cos(angle) * f.e1 + std::sin(angle) * f.e2), kPi / 2};
}

SphericalCurve write_quorum(const QuorumSystem& system, const UnitVec3& writer, const DataType& data, double u) {
    switch (system.kind) {
        case Kind::QG:
        case Kind::QL:
            return great_circle_through(writer, data.hash_point);
        case Kind::QGm:
            return great_circle_at(writer, u);
        case Kind::QLd:
            return latitude_circle(data.hash_point, writer);
        case Kind::GeoQuorum:
            return geo_write(system, writer, u);
    }
    throw Error("unreachable quorum kind");
}

SphericalCurve read_quorum(const QuorumSystem& system, const UnitVec3& reader, const DataType& data, double u) {
    switch (system.kind) {
        case Kind::QG:
        case Kind::QGm:
            return great_circle_at(reader, u);
        case Kind::QL:
            return latitude_circle(data.hash_point, reader);
        case Kind::QLd:
            return great_circle_through(reader, data.hash_point);
        case Kind::GeoQuorum:
            return geo_read(system, reader, u);
    }
    throw Error("unreachable quorum kind");
}

SphericalCurve write_quorum(const QuorumSystem& system, const UnitVec3& writer, const DataType& data,
                            std::mt19937_64& rng) {
    return write_quorum(system, writer, data, is_mixed(system, Role::Write) ? unit_interval(rng) : 0.0);
}

SphericalCurve read_quorum(const QuorumSystem& system, const UnitVec3& reader, const DataType& data,
                           std::mt19937_64& rng) {
    return read_quorum(system, reader, data, is_mixed(system, Role::Read) ? unit_interval(rng) : 0.0);
}

int geometric_robustness(const QuorumSystem& system, const DataType& data, int trials, std::mt19937_64& rng,
                         double step) {
    if (trials < 1) {
        throw OutOfRange("robustness needs at least one trial");
    }
    int best = std::numeric_limits<int>::max();
    for (int t = 0; t < trials; ++t) {
        const UnitVec3 w = random_point(rng);
        const UnitVec3 r = random_point(rng);
        const SphericalCurve wq = write_quorum(system, w, data, rng);
        const SphericalCurve rq = read_quorum(system, r, data, rng);
        best = std::min(best, count_intersections(wq, rq, step, 2.0 * step).count);
    }
    return best;
}

}  // namespace geoq
