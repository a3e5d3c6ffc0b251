#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "geoq/mesh.hpp"
#include "geoq/sphere.hpp"
#include "geoq/vec3.hpp"

namespace geoq {

struct SolverOptions {
    double tol = 1e-7;
    int max_iters = 20000;
    /// Iterations between Möbius normalizations; convergence is tested right after each.
    int mobius_every = 50;
    /// Record the harmonic energy before and after every smoothing sweep.
    bool trace_energy = false;
};

struct SphericalEmbedding {
    DoubledMesh mesh;
    std::vector<UnitVec3> positions;
    /// Largest per-vertex tangential energy gradient, relative to the vertex weight sum,
    /// after removing the component along the normalization constraints.
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Pairs (before, after) per sweep when SolverOptions::trace_energy is set.
    std::vector<std::pair<double, double>> energy_trace;

    /// Vertex-to-triangle lookup and start grid for locate, built by finalize().
    std::vector<std::vector<int>> vertex_triangles;
    std::vector<std::array<int, 3>> neighbors;
    std::vector<int> start_grid;
    double orientation = 1.0;

    UnitVec3 node_position(int node) const { return positions[node]; }
    /// Builds the lookup structures. Called by every producer of an embedding.
    void finalize();
};

/// Symmetric harmonic map of the doubled mesh to the unit sphere. The original copy lands
/// on the upper hemisphere, its mirror on the lower, the boundary on the equator.
///
/// Does not throw on slow convergence: check `converged` (see require_converged).
/// Throws DegenerateMesh for interior edges joining two boundary vertices (run
/// refine_boundary_chords first) and for meshes with fewer than one interior vertex.
SphericalEmbedding harmonic_sphere_map(const DoubledMesh& mesh, const SolverOptions& options = {});

/// Throws NoConvergence unless the embedding converged.
void require_converged(const SphericalEmbedding& emb);

/// Cotangent-weighted Dirichlet energy of the doubled surface.
double harmonic_energy(const SphericalEmbedding& emb);

/// Area-weighted centroid of the vertex images, weighted by planar vertex areas.
Vec3 weighted_centroid(const SphericalEmbedding& emb);

/// Number of doubled triangles whose orientation disagrees with the majority.
int flipped_triangles(const SphericalEmbedding& emb);

/// Signed tests of p against the edge opposite each vertex of t, oriented so that all
/// three are non-negative inside.
std::array<double, 3> edge_tests(const UnitVec3& p, const SphericalEmbedding& emb, int t);

/// Gnomonic containment with a rounding allowance of 1e-14 on each edge test.
bool contains(const UnitVec3& p, const SphericalEmbedding& emb, int t);

/// Index of the triangle containing p. Ties on shared edges resolve to the lowest index,
/// so the result does not depend on the hint.
int locate(const UnitVec3& p, const SphericalEmbedding& emb, std::optional<int> hint = {});

/// Gnomonic barycentric coordinates of p in triangle t.
std::array<double, 3> barycentric(const UnitVec3& p, const SphericalEmbedding& emb, int t);

struct PlanarPath {
    Side side = Side::Original;
    std::vector<Point2> points;
};

/// Maps each sample back into the planar region. A new section starts whenever the curve
/// changes hemisphere; for closed curves the wrap-around sections are joined.
std::vector<PlanarPath> pull_back_path(const GeodesicPolyline& poly, const SphericalEmbedding& emb);

/// Image of a planar point on the upper hemisphere. Throws OutOfRange outside the region.
UnitVec3 push_forward(const Point2& p, const SphericalEmbedding& emb);

struct Summary {
    double mean = 0.0;
    double max = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
    double p99 = 0.0;
};

Summary summarize(std::vector<double> values);

struct DistortionReport {
    /// Per original triangle: sum of |spherical - planar| over its angles, divided by pi.
    std::vector<double> angle;
    /// Per original triangle: quasi-conformal dilatation of the planar-to-chord affine map.
    std::vector<double> dilatation;
    Summary angle_stats;
    Summary dilatation_stats;
};

DistortionReport distortion_report(const SphericalEmbedding& emb);

/// Mesh text format followed by one "x y z" line per doubled vertex and a final
/// "residual iterations converged" line.
void write_embedding(std::ostream& out, const SphericalEmbedding& emb);
SphericalEmbedding read_embedding(std::istream& in, std::optional<int> node_count = {});

/// The original planar mesh underlying a doubled mesh.
PlanarMesh original_mesh(const DoubledMesh& mesh);

}  // namespace geoq
