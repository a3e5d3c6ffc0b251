#include <cmath>
#include <random>
#include <string>

#include "doctest.h"
#include "geoq/errors.hpp"
#include "geoq/quorum.hpp"
#include "geoq/random.hpp"
#include "support.hpp"

using namespace geoq;
using geoq::testing::random_unit;
using geoq::testing::uniform;

namespace {

DataType data_at(const UnitVec3& h) { return {"d", h, {}, {}}; }

double plane_distance(const SphericalCircle& c, const UnitVec3& p) {
    return std::abs(dot(c.axis, p) - std::cos(c.rho));
}

bool same_curve(const SphericalCurve& a, const SphericalCurve& b) {
    if (a.index() != b.index()) {
        return false;
    }
    if (const auto* ca = std::get_if<SphericalCircle>(&a)) {
        const auto& cb = std::get<SphericalCircle>(b);
        return ca->axis == cb.axis && ca->rho == cb.rho;
    }
    const auto& sa = std::get<SphericalSpiral>(a);
    const auto& sb = std::get<SphericalSpiral>(b);
    return sa.theta0 == sb.theta0 && sa.a == sb.a && sa.frame.e3 == sb.frame.e3;
}

QuorumSystem system_of(Kind kind) {
    QuorumSystem s;
    s.kind = kind;
    return s;
}

}  // namespace

TEST_CASE("hash location is deterministic and roughly uniform") {
    CHECK(hash_location("temperature", 1) == hash_location("temperature", 1));
    CHECK_FALSE(hash_location("temperature", 1) == hash_location("temperature", 2));
    CHECK_FALSE(hash_location("temperature", 1) == hash_location("humidity", 1));
    Vec3 mean;
    for (int i = 0; i < 10000; ++i) {
        const UnitVec3 p = hash_location("type-" + std::to_string(i), 7);
        REQUIRE(std::abs(norm(p) - 1.0) < 1e-12);
        mean += p.vec();
    }
    CHECK(norm(mean / 10000.0) < 0.05);
    CHECK(hash_location("x", 3, UnitVec3(0, 0, 1)) == UnitVec3(0, 0, 1));
}

TEST_CASE("kind parsing and parameter validation") {
    CHECK(parse_kind("QG") == Kind::QG);
    CHECK(parse_kind("qgm") == Kind::QGm);
    CHECK(parse_kind("QL") == Kind::QL);
    CHECK(parse_kind("QLd") == Kind::QLd);
    CHECK(parse_kind("GeoQuorum") == Kind::GeoQuorum);
    CHECK_THROWS_AS(parse_kind("grid"), ConfigError);
    for (Kind k : {Kind::QG, Kind::QGm, Kind::QL, Kind::QLd, Kind::GeoQuorum}) {
        CHECK(parse_kind(kind_name(k)) == k);
    }

    QuorumSystem g;
    g.R_W = 0.2 * kPi;
    g.a = 0.2;
    CHECK(g.k() == 1);
    CHECK_NOTHROW(g.validate());
    for (int k = 1; k <= 3; ++k) {
        for (double a : {0.05, 0.1, 0.2}) {
            g.a = a;
            g.R_W = k * a * kPi;
            CHECK(g.k() == k);
        }
    }
    g.a = 0.3;
    g.R_W = 0.2 * kPi;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g.R_W = 0.0;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g.R_W = 0.2 * kPi;
    g.a = -1.0;
    CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("QG and QL write quorums are the great circle through writer and hash") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const UnitVec3 w = random_unit(rng);
        const UnitVec3 h = random_unit(rng);
        for (Kind kind : {Kind::QG, Kind::QL}) {
            const auto c = std::get<SphericalCircle>(write_quorum(system_of(kind), w, data_at(h), rng));
            CHECK(plane_distance(c, w) < 1e-9);
            CHECK(plane_distance(c, h) < 1e-9);
            CHECK(c.is_great());
        }
    }
}

TEST_CASE("pure strategies ignore the random source; mixed ones are seed stable") {
    const UnitVec3 w(0.3, -0.2, 0.9), h(-0.5, 0.5, 0.1);
    for (Kind kind : {Kind::QG, Kind::QL, Kind::QLd}) {
        std::mt19937_64 r1(1), r2(99);
        CHECK(same_curve(write_quorum(system_of(kind), w, data_at(h), r1),
                         write_quorum(system_of(kind), w, data_at(h), r2)));
    }
    for (Kind kind : {Kind::QGm, Kind::GeoQuorum}) {
        std::mt19937_64 r1(5), r2(5), r3(6);
        const auto a = write_quorum(system_of(kind), w, data_at(h), r1);
        CHECK(same_curve(a, write_quorum(system_of(kind), w, data_at(h), r2)));
        CHECK_FALSE(same_curve(a, write_quorum(system_of(kind), w, data_at(h), r3)));
        std::mt19937_64 r4(5), r5(5);
        CHECK(same_curve(read_quorum(system_of(kind), w, data_at(h), r4),
                         read_quorum(system_of(kind), w, data_at(h), r5)));
    }
    CHECK_FALSE(is_mixed(system_of(Kind::QG), Role::Write));
    CHECK(is_mixed(system_of(Kind::QG), Role::Read));
    CHECK_FALSE(is_mixed(system_of(Kind::QL), Role::Read));
}

TEST_CASE("QGm write axis is uniform on the circle orthogonal to the writer") {
    const UnitVec3 w = UnitVec3(1, 2, -0.5);
    // Reference direction in the plane orthogonal to w, unrelated to any library frame.
    const Vec3 t1 = cross(w, Vec3{0.3, -0.7, 0.2}) / norm(cross(w, Vec3{0.3, -0.7, 0.2}));
    const Vec3 t2 = cross(w, t1);
    std::mt19937_64 rng(2024);
    constexpr int kBins = 20;
    constexpr int kDraws = 10000;
    std::vector<int> counts(kBins, 0);
    for (int i = 0; i < kDraws; ++i) {
        const auto c = std::get<SphericalCircle>(write_quorum(system_of(Kind::QGm), w, data_at(UnitVec3(0, 0, 1)), rng));
        REQUIRE(std::abs(dot(c.axis, w)) < 1e-12);
        double angle = std::atan2(dot(c.axis, t2), dot(c.axis, t1));
        // Axis and its negative describe the same circle.
        angle = std::fmod(angle + 2.0 * kPi, kPi);
        ++counts[std::min(kBins - 1, static_cast<int>(angle / kPi * kBins))];
    }
    double chi2 = 0.0;
    const double expected = static_cast<double>(kDraws) / kBins;
    for (int c : counts) {
        chi2 += (c - expected) * (c - expected) / expected;
    }
    // 19 degrees of freedom, p = 0.001.
    CHECK(chi2 < 43.82);
}

TEST_CASE("GeoQuorum curves") {
    QuorumSystem g;
    g.R_W = 0.2 * kPi;
    g.a = 0.2;
    std::mt19937_64 rng(3);
    const DataType d = data_at(UnitVec3(0, 0, 1));
    for (int i = 0; i < 200; ++i) {
        const UnitVec3 w = random_unit(rng);
        const auto c = std::get<SphericalCircle>(write_quorum(g, w, d, rng));
        CHECK(c.rho == doctest::Approx(0.2 * kPi).epsilon(1e-12));
        CHECK(plane_distance(c, w) < 1e-9);

        const auto s = std::get<SphericalSpiral>(read_quorum(g, w, d, rng));
        CHECK(norm(s.start().vec() - w.vec()) < 1e-9);
        CHECK(norm(s.end().vec() + w.vec()) < 1e-9);
        CHECK(s.a == 0.2);
    }
    // Radii beyond pi/2 describe the same point set via the antipodal center.
    g.R_W = 0.6 * kPi;
    g.a = 0.2;
    const UnitVec3 w(0.1, 0.4, 0.7);
    const auto c = std::get<SphericalCircle>(write_quorum(g, w, d, 0.3));
    CHECK(plane_distance(c, w) < 1e-9);
    CHECK(c.rho == doctest::Approx(0.4 * kPi));
}

TEST_CASE("QL and QLd use latitude circles about the hash") {
    const UnitVec3 h(0, 0, 1);
    const UnitVec3 r = UnitVec3::from_polar(kPi / 3, 1.0);
    const auto lat = std::get<SphericalCircle>(read_quorum(system_of(Kind::QL), r, data_at(h), 0.0));
    CHECK(lat.rho == doctest::Approx(kPi / 3));
    CHECK(lat.axis == h);
    const auto w = std::get<SphericalCircle>(write_quorum(system_of(Kind::QLd), r, data_at(h), 0.0));
    CHECK(w.rho == doctest::Approx(kPi / 3));
    const auto rd = std::get<SphericalCircle>(read_quorum(system_of(Kind::QLd), r, data_at(h), 0.0));
    CHECK(rd.is_great());
    CHECK(plane_distance(rd, h) < 1e-9);
    CHECK(plane_distance(rd, r) < 1e-9);
}

TEST_CASE("hash-based curves are undefined at the hash point") {
    const UnitVec3 h(0, 1, 0);
    CHECK_THROWS_AS(write_quorum(system_of(Kind::QG), h, data_at(h), 0.0), DegenerateInput);
    CHECK_THROWS_AS(write_quorum(system_of(Kind::QL), -h, data_at(h), 0.0), DegenerateInput);
    CHECK_THROWS_AS(read_quorum(system_of(Kind::QL), h, data_at(h), 0.0), DegenerateInput);
    CHECK_NOTHROW(write_quorum(system_of(Kind::QGm), h, data_at(h), 0.0));
}

TEST_CASE("dual design swaps only for GeoQuorum with the flag and cheaper writes") {
    QuorumSystem g;
    g.dual = true;
    CHECK(roles_swapped(g, 10.0, 100.0));
    CHECK_FALSE(roles_swapped(g, 1000.0, 100.0));
    g.dual = false;
    CHECK_FALSE(roles_swapped(g, 10.0, 100.0));
    QuorumSystem q = system_of(Kind::QG);
    q.dual = true;
    CHECK_FALSE(roles_swapped(q, 10.0, 100.0));
}

TEST_CASE("every read quorum meets every write quorum") {
    std::mt19937_64 rng(11);
    const double step = kPi / 1000;
    for (Kind kind : {Kind::QG, Kind::QGm, Kind::QL, Kind::QLd, Kind::GeoQuorum}) {
        const QuorumSystem s = system_of(kind);
        const DataType d = data_at(random_unit(rng));
        int worst = 1 << 20;
        for (int i = 0; i < 1000; ++i) {
            const auto w = write_quorum(s, random_unit(rng), d, rng);
            const auto r = read_quorum(s, random_unit(rng), d, rng);
            worst = std::min(worst, count_intersections(w, r, step, 2 * step).count);
        }
        CHECK_MESSAGE(worst >= 1, kind_name(kind));
    }
}

TEST_CASE("great-circle pairs meet exactly twice") {
    std::mt19937_64 rng(12);
    const QuorumSystem s = system_of(Kind::QGm);
    const DataType d = data_at(UnitVec3(0, 0, 1));
    for (int i = 0; i < 300; ++i) {
        const auto w = write_quorum(s, random_unit(rng), d, rng);
        const auto r = read_quorum(s, random_unit(rng), d, rng);
        REQUIRE(count_intersections(w, r).count == 2);
    }
    std::mt19937_64 trial_rng(13);
    CHECK(geometric_robustness(system_of(Kind::QG), data_at(UnitVec3(0, 0, 1)), 500, trial_rng) <= 2);
}

TEST_CASE("GeoQuorum robustness grows with R_W") {
    // Only caps free of the spiral poles carry the 2k guarantee; the sampled minimum
    // still has to rise from k = 1 to k = 3 on average over placements.
    std::mt19937_64 rng(21);
    QuorumSystem g;
    g.a = 0.05;
    const DataType d = data_at(UnitVec3(0, 0, 1));
    double mean_k1 = 0.0, mean_k3 = 0.0;
    for (int i = 0; i < 200; ++i) {
        const UnitVec3 w = random_unit(rng), r = random_unit(rng);
        const double u1 = unit_interval(rng), u2 = unit_interval(rng);
        g.R_W = 1 * g.a * kPi;
        mean_k1 += count_intersections(write_quorum(g, w, d, u1), read_quorum(g, r, d, u2)).count;
        g.R_W = 3 * g.a * kPi;
        mean_k3 += count_intersections(write_quorum(g, w, d, u1), read_quorum(g, r, d, u2)).count;
    }
    CHECK(mean_k3 / 200 > 2.5 * mean_k1 / 200);
    std::mt19937_64 trial_rng(22);
    g.R_W = 0.2 * kPi;
    g.a = 0.2;
    CHECK(geometric_robustness(g, d, 200, trial_rng) >= 1);
    CHECK_THROWS_AS(geometric_robustness(g, d, 0, trial_rng), OutOfRange);
}
