#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "geoq/sphere.hpp"
#include "geoq/vec3.hpp"

namespace geoq {

enum class Kind { QG, QGm, QL, QLd, GeoQuorum };

struct QuorumSystem {
    Kind kind = Kind::GeoQuorum;
    /// Write-circle radius; GeoQuorum only.
    double R_W = 0.2 * kPi;
    /// Spiral pitch; GeoQuorum only.
    double a = 0.2;
    /// GeoQuorum only: swap the curve families when writes are not more frequent than reads.
    bool dual = false;

    /// Robustness target floor(R_W / (a pi)), with a small allowance for R_W = k a pi
    /// computed in floating point.
    int k() const;
    /// Throws ConfigError for parameters outside their domain.
    void validate() const;
    std::string name() const;
};

/// Parses "QG", "QGm", "QL", "QLd" or "GeoQuorum" (case-insensitive). Throws ConfigError.
Kind parse_kind(std::string_view text);
std::string_view kind_name(Kind kind);

struct DataType {
    std::string id;
    UnitVec3 hash_point;
    std::vector<int> contributors;
    std::vector<int> queriers;
};

/// Deterministic, approximately uniform point for a data id: FNV-1a digest of the id and
/// seed, mixed with splitmix64 into two variates and mapped area-preservingly.
UnitVec3 hash_location(std::string_view data_id, std::uint64_t seed,
                       const std::optional<UnitVec3>& override_point = std::nullopt);

enum class Role { Write, Read };

/// True when the chosen role's curve is a curve family chosen at random.
bool is_mixed(const QuorumSystem& system, Role role);

/// Whether the dual design is in effect for the given aggregate rates.
bool roles_swapped(const QuorumSystem& system, double write_rate, double read_rate);

/// Quorum curve for an access. Mixed strategies are parameterized by one variate
/// u in [0, 1), which the curve family maps uniformly (circle orientation, write-circle
/// center angle, spiral phase). Pure strategies ignore u.
///
/// Throws DegenerateInput when a hash-based curve is undefined because the accessor
/// coincides with the hash point or its antipode.
SphericalCurve write_quorum(const QuorumSystem& system, const UnitVec3& writer, const DataType& data, double u);
SphericalCurve read_quorum(const QuorumSystem& system, const UnitVec3& reader, const DataType& data, double u);

SphericalCurve write_quorum(const QuorumSystem& system, const UnitVec3& writer, const DataType& data,
                            std::mt19937_64& rng);
SphericalCurve read_quorum(const QuorumSystem& system, const UnitVec3& reader, const DataType& data,
                           std::mt19937_64& rng);

/// Great circle through p whose orientation is set by u in [0, 1).
SphericalCircle great_circle_at(const UnitVec3& p, double u);

/// Smallest crossing count over random (writer, reader, variate) draws with writers and
/// readers uniform on the sphere.
int geometric_robustness(const QuorumSystem& system, const DataType& data, int trials, std::mt19937_64& rng,
                         double step = kDefaultStep);

}  // namespace geoq
