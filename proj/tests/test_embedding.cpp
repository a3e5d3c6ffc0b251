#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "geoq/embedding.hpp"
#include "geoq/errors.hpp"
#include "support.hpp"

using namespace geoq;
using geoq::testing::random_unit;
using geoq::testing::uniform;

namespace {

const std::vector<Point2> kUnitSquare{{0, 0}, {1, 0}, {1, 1}, {0, 1}};

std::vector<Point2> random_square(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Point2> pts;
    for (int i = 0; i < n; ++i) {
        pts.push_back({uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)});
    }
    return pts;
}

SphericalEmbedding square_embedding(int n, std::uint64_t seed, SolverOptions options = {}) {
    const auto planar = refine_boundary_chords(triangulate(random_square(n, seed), kUnitSquare));
    return harmonic_sphere_map(double_cover(planar), options);
}

const SphericalEmbedding& shared_embedding() {
    static const SphericalEmbedding emb = square_embedding(2000, 21);
    return emb;
}

// Containment straight from the definition, with no orientation bookkeeping shared with locate.
bool inside(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p) {
    const double s = triple(a, b, c);
    const double d0 = triple(a, b, p), d1 = triple(b, c, p), d2 = triple(c, a, p);
    const bool same = s > 0 ? (d0 >= 0 && d1 >= 0 && d2 >= 0) : (d0 <= 0 && d1 <= 0 && d2 <= 0);
    return same && dot(a + b + c, p) > 0;
}

int brute_force_locate(const SphericalEmbedding& emb, const UnitVec3& p) {
    for (int t = 0; t < emb.mesh.triangle_count(); ++t) {
        const auto& tri = emb.mesh.triangles[t];
        if (inside(emb.positions[tri[0]], emb.positions[tri[1]], emb.positions[tri[2]], p)) {
            return t;
        }
    }
    return -1;
}

}  // namespace

TEST_CASE("embedding invariants on a random square deployment") {
    const auto& emb = shared_embedding();
    const auto& m = emb.mesh;
    CHECK(emb.converged);
    CHECK(emb.residual <= 1e-7);
    double max_norm_err = 0.0, max_sym = 0.0, max_z = 0.0;
    for (int v = 0; v < m.vertex_count(); ++v) {
        max_norm_err = std::max(max_norm_err, std::abs(norm(emb.positions[v]) - 1.0));
        const UnitVec3 mirror = emb.positions[m.copy_map[m.original_of(v)]];
        const UnitVec3 self = emb.positions[m.original_of(v)];
        max_sym = std::max(max_sym, norm(mirror.vec() - reflect_z(self).vec()));
        if (m.on_boundary[v]) {
            max_z = std::max(max_z, std::abs(emb.positions[v].z()));
        }
    }
    CHECK(max_norm_err < 1e-9);
    CHECK(max_sym < 1e-6);
    CHECK(max_z < 1e-6);
    CHECK(flipped_triangles(emb) == 0);
    CHECK(norm(weighted_centroid(emb)) < 1e-6);
    // Interior of the original copy lies strictly in the upper hemisphere.
    for (int v = 0; v < m.original_vertex_count; ++v) {
        if (!m.on_boundary[v]) {
            REQUIRE(emb.positions[v].z() > 0.0);
        }
    }
}

TEST_CASE("energy never increases across iterations and approaches the conformal value") {
    SolverOptions options;
    options.trace_energy = true;
    const auto emb = square_embedding(800, 4, options);
    REQUIRE_FALSE(emb.energy_trace.empty());
    for (const auto& [before, after] : emb.energy_trace) {
        REQUIRE(after <= before * (1.0 + 1e-12));
    }
    // A conformal degree-one map of the doubled surface has Dirichlet energy 2 * 4 pi.
    CHECK(harmonic_energy(emb) == doctest::Approx(8.0 * kPi).epsilon(0.01));
}

TEST_CASE("symmetric grid puts the region center at the north pole") {
    std::vector<Point2> pts;
    for (int i = 1; i < 12; ++i) {
        for (int j = 1; j < 12; ++j) {
            pts.push_back({i / 12.0, j / 12.0});
        }
    }
    const auto emb = harmonic_sphere_map(double_cover(refine_boundary_chords(triangulate(pts, kUnitSquare))));
    CHECK(emb.converged);
    const UnitVec3 center = push_forward({0.5, 0.5}, emb);
    CHECK(geodesic_distance(center, UnitVec3(0, 0, 1)) < 0.05);
}

TEST_CASE("L-shaped region embeds without folds") {
    const std::vector<Point2> poly{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
    std::mt19937_64 rng(8);
    std::vector<Point2> pts;
    while (pts.size() < 600) {
        const Point2 p{uniform(rng, 0.0, 2.0), uniform(rng, 0.0, 2.0)};
        if (point_in_polygon(p, poly)) {
            pts.push_back(p);
        }
    }
    const auto emb = harmonic_sphere_map(double_cover(refine_boundary_chords(triangulate(pts, poly))));
    CHECK(emb.converged);
    CHECK(flipped_triangles(emb) == 0);
}

TEST_CASE("solver preconditions and non-convergence") {
    PlanarMesh chord;
    chord.vertices = {{0, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 0.5}};
    chord.triangles = {{1, 2, 3}, {0, 1, 4}, {0, 4, 3}, {4, 1, 3}};
    chord.boundary = {0, 1, 2, 3};
    chord.node_count = 5;
    CHECK_THROWS_AS(harmonic_sphere_map(double_cover(chord)), DegenerateMesh);
    CHECK_NOTHROW(harmonic_sphere_map(double_cover(refine_boundary_chords(chord))));
    SolverOptions options;
    options.max_iters = 1;
    const auto emb = square_embedding(300, 2, options);
    CHECK_FALSE(emb.converged);
    CHECK(emb.iterations == 1);
    CHECK_THROWS_AS(require_converged(emb), NoConvergence);
    try {
        require_converged(emb);
    } catch (const NoConvergence& e) {
        CHECK(e.residual() == emb.residual);
        CHECK(e.iterations() == 1);
    }
}

TEST_CASE("locate on vertices and centroids") {
    const auto& emb = shared_embedding();
    const auto& m = emb.mesh;
    for (int v = 0; v < m.vertex_count(); v += 7) {
        const int t = locate(emb.positions[v], emb);
        const auto& tri = m.triangles[t];
        CHECK((tri[0] == v || tri[1] == v || tri[2] == v));
    }
    for (int t = 0; t < m.triangle_count(); t += 5) {
        const auto& tri = m.triangles[t];
        const UnitVec3 c(emb.positions[tri[0]].vec() + emb.positions[tri[1]].vec() + emb.positions[tri[2]].vec());
        REQUIRE(locate(c, emb) == t);
    }
}

TEST_CASE("locate matches an exhaustive scan and ignores the hint") {
    const auto& emb = shared_embedding();
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> pick(0, emb.mesh.triangle_count() - 1);
    for (int i = 0; i < 10000; ++i) {
        const UnitVec3 p = random_unit(rng);
        const int expected = brute_force_locate(emb, p);
        REQUIRE(expected >= 0);
        REQUIRE(locate(p, emb) == expected);
        REQUIRE(locate(p, emb, pick(rng)) == expected);
    }
}

TEST_CASE("pull back splits curves at the equator") {
    const auto& emb = shared_embedding();
    const SphericalCircle cap{UnitVec3(0, 0, 1), 0.4};
    const auto upper = pull_back_path(sample(cap, kDefaultStep), emb);
    REQUIRE(upper.size() == 1);
    CHECK(upper[0].side == Side::Original);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 5; ++i) {
        const double lon = uniform(rng, 0.0, 2.0 * kPi);
        const SphericalCircle meridian{UnitVec3(std::cos(lon), std::sin(lon), 0.0), kPi / 2};
        const auto sections = pull_back_path(sample(meridian, kDefaultStep), emb);
        REQUIRE(sections.size() == 2);
        CHECK(sections[0].side != sections[1].side);
        for (const auto& s : sections) {
            for (const auto& q : s.points) {
                REQUIRE(q.x >= -1e-9);
                REQUIRE(q.x <= 1 + 1e-9);
                REQUIRE(q.y >= -1e-9);
                REQUIRE(q.y <= 1 + 1e-9);
            }
        }
    }
}

TEST_CASE("push forward then pull back is the identity") {
    const auto& emb = shared_embedding();
    std::mt19937_64 rng(17);
    const double diameter = std::sqrt(2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Point2 a{uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95)};
        const Point2 b{uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95)};
        GeodesicPolyline poly;
        for (int k = 0; k <= 50; ++k) {
            const double s = k / 50.0;
            poly.points.push_back(push_forward({a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)}, emb));
        }
        const auto back = pull_back_path(poly, emb);
        REQUIRE(back.size() == 1);
        const auto& pts = back[0].points;
        CHECK(std::hypot(pts.front().x - a.x, pts.front().y - a.y) < 0.01 * diameter);
        CHECK(std::hypot(pts.back().x - b.x, pts.back().y - b.y) < 0.01 * diameter);
    }
    CHECK_THROWS_AS(push_forward({2.0, 2.0}, emb), OutOfRange);
}

TEST_CASE("distortion report") {
    const auto& emb = shared_embedding();
    const auto report = distortion_report(emb);
    CHECK(report.angle.size() == static_cast<std::size_t>(emb.mesh.original_triangle_count));
    for (double x : report.angle) {
        REQUIRE(x >= 0.0);
    }
    for (double k : report.dilatation) {
        REQUIRE(k >= 1.0 - 1e-12);
    }
    CHECK(report.angle_stats.max >= report.angle_stats.mean);
    CHECK(report.angle_stats.p99 >= report.angle_stats.p50);
    CHECK(report.dilatation_stats.max >= report.dilatation_stats.mean);
    CHECK(report.angle_stats.mean < 0.10);

    // Four times the nodes gives a finer mesh and a smaller discretization error.
    const auto coarse = distortion_report(square_embedding(500, 21));
    CHECK(report.angle_stats.mean < coarse.angle_stats.mean);
}

TEST_CASE("triangular lattice in a hexagon has small distortion") {
    std::vector<Point2> hexagon;
    for (int k = 0; k < 6; ++k) {
        hexagon.push_back({std::cos(k * kPi / 3), std::sin(k * kPi / 3)});
    }
    std::vector<Point2> pts;
    const double h = 0.1;
    for (int i = -12; i <= 12; ++i) {
        for (int j = -12; j <= 12; ++j) {
            const Point2 p{h * (i + 0.5 * j), h * j * std::sqrt(3.0) / 2};
            if (point_in_polygon(p, hexagon) && std::hypot(p.x, p.y) < 0.85) {
                pts.push_back(p);
            }
        }
    }
    const auto emb = harmonic_sphere_map(double_cover(refine_boundary_chords(triangulate(pts, hexagon))));
    CHECK(emb.converged);
    // The continuum map is conformal; what remains is O(h) discretization error.
    CHECK(distortion_report(emb).angle_stats.mean < 0.05);
}

TEST_CASE("summary statistics") {
    const auto s = summarize({1, 2, 3, 4, 5});
    CHECK(s.mean == 3.0);
    CHECK(s.max == 5.0);
    CHECK(s.p50 == 3.0);
    CHECK(s.p90 == doctest::Approx(4.6));
}

TEST_CASE("embedding text round trip") {
    const auto emb = square_embedding(200, 5);
    std::stringstream ss;
    write_embedding(ss, emb);
    const auto back = read_embedding(ss, emb.mesh.node_count);
    CHECK(back.positions == emb.positions);
    CHECK(back.residual == emb.residual);
    CHECK(back.iterations == emb.iterations);
    CHECK(back.converged == emb.converged);
    CHECK(back.mesh.triangles == emb.mesh.triangles);
    CHECK(back.mesh.node_count == emb.mesh.node_count);
}
