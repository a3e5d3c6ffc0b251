#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace geoq {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    constexpr bool operator==(const Point2&) const = default;
};

using Triangle = std::array<int, 3>;

/// Triangulated planar region with a single counterclockwise boundary loop.
///
/// Vertices [0, node_count) are deployment nodes. Any vertices past node_count were
/// inserted by mesh refinement and carry no load.
struct PlanarMesh {
    std::vector<Point2> vertices;
    std::vector<Triangle> triangles;
    std::vector<int> boundary;
    int node_count = 0;

    int euler_characteristic() const;
};

/// Delaunay triangulation of `points`. Without a boundary polygon the convex hull is
/// the boundary. With one, the polygon edges are recovered by splitting them until they
/// appear in the triangulation (the split points become boundary vertices), and
/// triangles outside the polygon are dropped.
///
/// Throws DegenerateInput for fewer than three distinct non-collinear points, duplicate
/// points, a self-intersecting polygon, or points outside the polygon.
PlanarMesh triangulate(std::span<const Point2> points, const std::optional<std::vector<Point2>>& boundary = {});

/// Splits every interior edge whose endpoints both lie on the boundary by inserting its
/// midpoint. Such edges would otherwise collapse onto the equator in the sphere map.
PlanarMesh refine_boundary_chords(PlanarMesh mesh);

/// Throws DegenerateMesh unless the mesh is a consistently oriented simplicial disk.
void validate(const PlanarMesh& mesh);

enum class Side : std::uint8_t { Original, Mirrored };

/// Closed genus-0 surface made of a planar mesh and its orientation-reversed copy glued
/// along the boundary.
///
/// Vertices [0, original_vertex_count) are the original copy; each interior vertex v has
/// a mirror at copy_map[v]; boundary vertices are their own copy. Triangle i of the
/// original copy has its mirror at original_triangle_count + i.
struct DoubledMesh {
    std::vector<Point2> planar;
    std::vector<Triangle> triangles;
    std::vector<Side> sides;
    std::vector<int> copy_map;
    std::vector<bool> on_boundary;
    std::vector<int> boundary;
    int original_vertex_count = 0;
    int original_triangle_count = 0;
    int node_count = 0;

    int vertex_count() const { return static_cast<int>(planar.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }
    /// Index of the original-copy vertex for any vertex of the doubled mesh.
    int original_of(int v) const { return v < original_vertex_count ? v : copy_map[v]; }
    /// Physical node of a vertex, or -1 for refinement vertices.
    int node_of(int v) const {
        const int o = original_of(v);
        return o < node_count ? o : -1;
    }
    int original_triangle(int t) const { return t < original_triangle_count ? t : t - original_triangle_count; }

    int edge_count() const;
    int euler_characteristic() const { return vertex_count() - edge_count() + triangle_count(); }
    /// True when every edge is shared by exactly two triangles.
    bool is_closed_manifold() const;
};

DoubledMesh double_cover(const PlanarMesh& mesh);

/// Text format: header "V F B", then V lines "x y", F lines "i j k", B lines with one
/// boundary index each.
void write_mesh(std::ostream& out, const PlanarMesh& mesh);
/// Reads the text format. All vertices are deployment nodes unless node_count says otherwise.
PlanarMesh read_mesh(std::istream& in, std::optional<int> node_count = {});

bool point_in_polygon(const Point2& p, std::span<const Point2> polygon);
double signed_area(std::span<const Point2> polygon);

}  // namespace geoq
