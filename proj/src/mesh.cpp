#include "geoq/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>

#include <boost/polygon/voronoi.hpp>

#include "geoq/errors.hpp"

namespace geoq {
namespace {

struct GridPoint {
    std::int32_t x;
    std::int32_t y;
};

}  // namespace
}  // namespace geoq

namespace boost::polygon {

template <>
struct geometry_concept<geoq::GridPoint> {
    using type = point_concept;
};

template <>
struct point_traits<geoq::GridPoint> {
    using coordinate_type = std::int32_t;
    static coordinate_type get(const geoq::GridPoint& p, orientation_2d o) { return o == HORIZONTAL ? p.x : p.y; }
};

}  // namespace boost::polygon

namespace geoq {
namespace {

double orient(const Point2& a, const Point2& b, const Point2& c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint32_t>(std::min(a, b));
    const auto hi = static_cast<std::uint32_t>(std::max(a, b));
    return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

// Delaunay triangles as the dual of the Voronoi diagram. Coordinates are snapped to a
// 2^29 integer grid over the bounding box, where Boost's builder is exact.
std::vector<Triangle> delaunay(std::span<const Point2> pts) {
    double minx = pts[0].x, maxx = pts[0].x, miny = pts[0].y, maxy = pts[0].y;
    for (const auto& p : pts) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    const double extent = std::max(maxx - minx, maxy - miny);
    if (!(extent > 0.0) || !std::isfinite(extent)) {
        throw DegenerateInput("triangulation input has no extent");
    }
    const double scale = static_cast<double>(1 << 29) / extent;
    const double cx = 0.5 * (minx + maxx);
    const double cy = 0.5 * (miny + maxy);
    std::vector<GridPoint> grid;
    grid.reserve(pts.size());
    std::set<std::pair<std::int32_t, std::int32_t>> seen;
    for (const auto& p : pts) {
        GridPoint g{static_cast<std::int32_t>(std::llround((p.x - cx) * scale)),
                    static_cast<std::int32_t>(std::llround((p.y - cy) * scale))};
        if (!seen.emplace(g.x, g.y).second) {
            throw DegenerateInput("duplicate points in triangulation input");
        }
        grid.push_back(g);
    }

    boost::polygon::voronoi_diagram<double> vd;
    boost::polygon::construct_voronoi(grid.begin(), grid.end(), &vd);

    std::vector<Triangle> tris;
    std::vector<int> ring;
    for (const auto& vertex : vd.vertices()) {
        ring.clear();
        const auto* e = vertex.incident_edge();
        do {
            ring.push_back(static_cast<int>(e->cell()->source_index()));
            e = e->rot_next();
        } while (e != vertex.incident_edge());
        // Cocircular sites give a Voronoi vertex of degree > 3; fan-triangulate it.
        for (std::size_t i = 1; i + 1 < ring.size(); ++i) {
            Triangle t{ring[0], ring[i], ring[i + 1]};
            // Orientation on the snapped coordinates the diagram was built from, exact in 64 bits.
            const GridPoint &a = grid[t[0]], &b = grid[t[1]], &c = grid[t[2]];
            const std::int64_t o = std::int64_t{b.x - a.x} * (c.y - a.y) - std::int64_t{b.y - a.y} * (c.x - a.x);
            if (o == 0) {
                continue;
            }
            if (o < 0) {
                std::swap(t[1], t[2]);
            }
            tris.push_back(t);
        }
    }
    if (tris.empty()) {
        throw DegenerateInput("triangulation input is collinear");
    }
    return tris;
}

// Counts incident triangles per undirected edge.
std::unordered_map<std::uint64_t, int> edge_use(const std::vector<Triangle>& tris) {
    std::unordered_map<std::uint64_t, int> use;
    use.reserve(tris.size() * 2);
    for (const auto& t : tris) {
        for (int k = 0; k < 3; ++k) {
            ++use[edge_key(t[k], t[(k + 1) % 3])];
        }
    }
    return use;
}

// Chains the directed boundary edges (edges with a single incident triangle, oriented as
// in that triangle) into one loop.
std::vector<int> boundary_loop(const std::vector<Triangle>& tris) {
    const auto use = edge_use(tris);
    std::unordered_map<int, int> next;
    for (const auto& t : tris) {
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            if (use.at(edge_key(a, b)) == 1) {
                if (!next.emplace(a, b).second) {
                    throw DegenerateMesh("boundary is not a simple loop (pinched vertex)");
                }
            }
        }
    }
    if (next.empty()) {
        throw DegenerateMesh("mesh has no boundary");
    }
    int start = next.begin()->first;
    for (const auto& [a, b] : next) {
        start = std::min(start, a);
    }
    std::vector<int> loop{start};
    for (int v = next.at(start); v != start; v = next.at(v)) {
        loop.push_back(v);
        if (loop.size() > next.size()) {
            throw DegenerateMesh("boundary loop does not close");
        }
    }
    if (loop.size() != next.size()) {
        throw DegenerateMesh("boundary has more than one component");
    }
    return loop;
}

bool segments_intersect(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
    const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) {
        return true;
    }
    auto on_segment = [](const Point2& p, const Point2& q, const Point2& r) {
        return orient(p, q, r) == 0.0 && std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
               std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
    };
    return on_segment(a, b, c) || on_segment(a, b, d) || on_segment(c, d, a) || on_segment(c, d, b);
}

std::vector<Point2> checked_polygon(const std::vector<Point2>& poly) {
    if (poly.size() < 3) {
        throw DegenerateInput("boundary polygon needs at least 3 vertices");
    }
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) {
                continue;
            }
            if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) {
                throw DegenerateInput("boundary polygon is self-intersecting");
            }
        }
    }
    const double area = signed_area(poly);
    if (area == 0.0) {
        throw DegenerateInput("boundary polygon has zero area");
    }
    std::vector<Point2> ccw = poly;
    if (area < 0.0) {
        std::reverse(ccw.begin(), ccw.end());
    }
    return ccw;
}

PlanarMesh conforming(std::span<const Point2> points, const std::vector<Point2>& polygon) {
    std::vector<Point2> verts(points.begin(), points.end());
    const int node_count = static_cast<int>(verts.size());
    for (const auto& p : points) {
        if (!point_in_polygon(p, polygon)) {
            throw DegenerateInput("deployment point lies outside the boundary polygon");
        }
        for (std::size_t i = 0; i < polygon.size(); ++i) {
            if (segments_intersect(polygon[i], polygon[(i + 1) % polygon.size()], p, p)) {
                throw DegenerateInput("deployment point lies on the boundary polygon");
            }
        }
    }

    // Each polygon edge is a chain of vertex indices; chains grow as edges are split.
    std::vector<std::vector<int>> chains;
    const int first_corner = static_cast<int>(verts.size());
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        verts.push_back(polygon[i]);
    }
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        chains.push_back({first_corner + static_cast<int>(i),
                          first_corner + static_cast<int>((i + 1) % polygon.size())});
    }

    // Split polygon edges that are missing from the triangulation, and those whose inner
    // triangle has an obtuse apex (the apex sits inside the edge's diametral circle), so
    // no near-flat triangles hug the boundary. Small polygon angles can make the second
    // rule cascade, so it is dropped after a number of rounds.
    constexpr int kEncroachRounds = 30;
    std::vector<Triangle> tris;
    for (int round = 0;; ++round) {
        tris = delaunay(verts);
        std::unordered_map<std::uint64_t, std::vector<int>> apex;
        for (const auto& t : tris) {
            for (int k = 0; k < 3; ++k) {
                apex[edge_key(t[k], t[(k + 1) % 3])].push_back(t[(k + 2) % 3]);
            }
        }
        auto needs_split = [&](int a, int b) {
            auto it = apex.find(edge_key(a, b));
            if (it == apex.end()) {
                return true;
            }
            if (round >= kEncroachRounds) {
                return false;
            }
            for (int c : it->second) {
                const Point2 &pa = verts[a], &pb = verts[b], &pc = verts[c];
                if (orient(pa, pb, pc) > 0.0 && (pa.x - pc.x) * (pb.x - pc.x) + (pa.y - pc.y) * (pb.y - pc.y) < 0.0) {
                    return true;
                }
            }
            return false;
        };
        bool split = false;
        for (auto& chain : chains) {
            std::vector<int> refined{chain.front()};
            for (std::size_t k = 1; k < chain.size(); ++k) {
                const int a = chain[k - 1], b = chain[k];
                if (needs_split(a, b)) {
                    split = true;
                    refined.push_back(static_cast<int>(verts.size()));
                    verts.push_back({0.5 * (verts[a].x + verts[b].x), 0.5 * (verts[a].y + verts[b].y)});
                }
                refined.push_back(b);
            }
            chain = std::move(refined);
        }
        if (!split) {
            break;
        }
        if (round == kEncroachRounds + 40) {
            throw DegenerateInput("could not recover the boundary polygon edges");
        }
    }

    // Vertices on one polygon edge are collinear, but snapping can make them slightly
    // convex and the triangulation then fills the gap with a sliver; drop those.
    std::vector<int> chain_of(verts.size(), -1);
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (std::size_t k = 1; k + 1 < chains[c].size(); ++k) {
            chain_of[chains[c][k]] = static_cast<int>(c);
        }
    }
    auto on_chain = [&](int v, int c) {
        const int n = static_cast<int>(chains.size());
        return chain_of[v] == c || v == chains[c].front() || v == chains[(c + 1) % n].front();
    };
    auto along_one_edge = [&](const Triangle& t) {
        for (std::size_t c = 0; c < chains.size(); ++c) {
            const int ci = static_cast<int>(c);
            if (on_chain(t[0], ci) && on_chain(t[1], ci) && on_chain(t[2], ci)) {
                return true;
            }
        }
        return false;
    };

    PlanarMesh mesh;
    mesh.node_count = node_count;
    for (const auto& t : tris) {
        if (along_one_edge(t)) {
            continue;
        }
        const Point2 c{(verts[t[0]].x + verts[t[1]].x + verts[t[2]].x) / 3.0,
                       (verts[t[0]].y + verts[t[1]].y + verts[t[2]].y) / 3.0};
        if (point_in_polygon(c, polygon)) {
            mesh.triangles.push_back(t);
        }
    }
    mesh.vertices = std::move(verts);
    for (const auto& chain : chains) {
        mesh.boundary.insert(mesh.boundary.end(), chain.begin(), chain.end() - 1);
    }
    return mesh;
}

}  // namespace

int PlanarMesh::euler_characteristic() const {
    return static_cast<int>(vertices.size()) - static_cast<int>(edge_use(triangles).size()) +
           static_cast<int>(triangles.size());
}

double signed_area(std::span<const Point2> polygon) {
    double twice = 0.0;
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        const auto& p = polygon[i];
        const auto& q = polygon[(i + 1) % polygon.size()];
        twice += p.x * q.y - q.x * p.y;
    }
    return 0.5 * twice;
}

bool point_in_polygon(const Point2& p, std::span<const Point2> polygon) {
    bool inside = false;
    for (std::size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
        const auto& a = polygon[i];
        const auto& b = polygon[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
            inside = !inside;
        }
    }
    return inside;
}

PlanarMesh triangulate(std::span<const Point2> points, const std::optional<std::vector<Point2>>& boundary) {
    if (points.size() < 3) {
        throw DegenerateInput("triangulation needs at least 3 points");
    }
    PlanarMesh mesh;
    if (boundary) {
        mesh = conforming(points, checked_polygon(*boundary));
    } else {
        mesh.vertices.assign(points.begin(), points.end());
        mesh.node_count = static_cast<int>(points.size());
        mesh.triangles = delaunay(points);
        mesh.boundary = boundary_loop(mesh.triangles);
    }
    validate(mesh);
    return mesh;
}

PlanarMesh refine_boundary_chords(PlanarMesh mesh) {
    for (;;) {
        std::vector<bool> on_boundary(mesh.vertices.size(), false);
        for (int v : mesh.boundary) {
            on_boundary[v] = true;
        }
        std::set<std::uint64_t> boundary_edges;
        for (std::size_t i = 0; i < mesh.boundary.size(); ++i) {
            boundary_edges.insert(edge_key(mesh.boundary[i], mesh.boundary[(i + 1) % mesh.boundary.size()]));
        }
        // Midpoint per chord, created on first sight.
        std::map<std::uint64_t, int> midpoint;
        for (const auto& t : mesh.triangles) {
            for (int k = 0; k < 3; ++k) {
                const int a = t[k], b = t[(k + 1) % 3];
                const auto key = edge_key(a, b);
                if (on_boundary[a] && on_boundary[b] && !boundary_edges.contains(key) && !midpoint.contains(key)) {
                    midpoint[key] = static_cast<int>(mesh.vertices.size());
                    mesh.vertices.push_back(
                        {0.5 * (mesh.vertices[a].x + mesh.vertices[b].x), 0.5 * (mesh.vertices[a].y + mesh.vertices[b].y)});
                }
            }
        }
        if (midpoint.empty()) {
            return mesh;
        }
        // Split each triangle touching a chord. A triangle may hold more than one chord;
        // split one per pass and iterate.
        std::vector<Triangle> out;
        out.reserve(mesh.triangles.size() + 2 * midpoint.size());
        for (const auto& t : mesh.triangles) {
            bool split = false;
            for (int k = 0; k < 3 && !split; ++k) {
                const int a = t[k], b = t[(k + 1) % 3], c = t[(k + 2) % 3];
                auto it = midpoint.find(edge_key(a, b));
                if (it != midpoint.end()) {
                    out.push_back({a, it->second, c});
                    out.push_back({it->second, b, c});
                    split = true;
                }
            }
            if (!split) {
                out.push_back(t);
            }
        }
        // A triangle with two chords had only one split; the other side of that chord was
        // split with a new midpoint, leaving a T-junction. Resolve by re-splitting any
        // triangle that has a midpoint lying on one of its edges.
        std::unordered_map<std::uint64_t, int> mid_by_edge(midpoint.begin(), midpoint.end());
        bool changed = true;
        while (changed) {
            changed = false;
            std::vector<Triangle> next;
            next.reserve(out.size());
            for (const auto& t : out) {
                bool split = false;
                for (int k = 0; k < 3 && !split; ++k) {
                    const int a = t[k], b = t[(k + 1) % 3], c = t[(k + 2) % 3];
                    auto it = mid_by_edge.find(edge_key(a, b));
                    if (it != mid_by_edge.end() && it->second != c) {
                        next.push_back({a, it->second, c});
                        next.push_back({it->second, b, c});
                        split = true;
                        changed = true;
                    }
                }
                if (!split) {
                    next.push_back(t);
                }
            }
            out = std::move(next);
        }
        mesh.triangles = std::move(out);
    }
}

void validate(const PlanarMesh& mesh) {
    const auto nv = static_cast<int>(mesh.vertices.size());
    std::vector<bool> used(mesh.vertices.size(), false);
    for (const auto& t : mesh.triangles) {
        for (int v : t) {
            if (v < 0 || v >= nv) {
                throw DegenerateMesh("triangle references a missing vertex");
            }
            used[v] = true;
        }
        if (!(orient(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]) > 0.0)) {
            throw DegenerateMesh("triangle is not counterclockwise or has zero area");
        }
    }
    if (std::find(used.begin(), used.end(), false) != used.end()) {
        throw DegenerateMesh("mesh has an isolated vertex");
    }
    for (const auto& [key, count] : edge_use(mesh.triangles)) {
        if (count > 2) {
            throw DegenerateMesh("edge shared by more than two triangles");
        }
    }
    if (mesh.euler_characteristic() != 1) {
        throw DegenerateMesh("mesh is not a topological disk");
    }
    const auto loop = boundary_loop(mesh.triangles);
    if (loop.size() != mesh.boundary.size()) {
        throw DegenerateMesh("boundary loop does not match the mesh boundary");
    }
    std::set<std::uint64_t> expected;
    for (std::size_t i = 0; i < loop.size(); ++i) {
        expected.insert(edge_key(loop[i], loop[(i + 1) % loop.size()]));
    }
    for (std::size_t i = 0; i < mesh.boundary.size(); ++i) {
        if (!expected.contains(edge_key(mesh.boundary[i], mesh.boundary[(i + 1) % mesh.boundary.size()]))) {
            throw DegenerateMesh("boundary loop does not match the mesh boundary");
        }
    }
}

DoubledMesh double_cover(const PlanarMesh& mesh) {
    validate(mesh);
    const int n = static_cast<int>(mesh.vertices.size());
    const int f = static_cast<int>(mesh.triangles.size());
    DoubledMesh d;
    d.original_vertex_count = n;
    d.original_triangle_count = f;
    d.node_count = mesh.node_count;
    d.boundary = mesh.boundary;
    d.planar = mesh.vertices;
    d.on_boundary.assign(n, false);
    for (int v : mesh.boundary) {
        d.on_boundary[v] = true;
    }
    d.copy_map.resize(n);
    for (int v = 0; v < n; ++v) {
        if (d.on_boundary[v]) {
            d.copy_map[v] = v;
        } else {
            d.copy_map[v] = static_cast<int>(d.planar.size());
            d.planar.push_back(mesh.vertices[v]);
            d.copy_map.push_back(v);
            d.on_boundary.push_back(false);
        }
    }
    d.triangles = mesh.triangles;
    d.sides.assign(f, Side::Original);
    for (const auto& t : mesh.triangles) {
        d.triangles.push_back({d.copy_map[t[0]], d.copy_map[t[2]], d.copy_map[t[1]]});
        d.sides.push_back(Side::Mirrored);
    }
    return d;
}

namespace {

// Edge identity in the doubled mesh. Interior edges whose endpoints both lie on the
// boundary exist once per copy, so the side is part of their key.
std::uint64_t doubled_edge_key(const DoubledMesh& d, const std::set<std::uint64_t>& boundary_edges, int a, int b,
                               Side side) {
    const auto key = edge_key(a, b);
    if (d.on_boundary[a] && d.on_boundary[b] && !boundary_edges.contains(key) && side == Side::Mirrored) {
        return key | (std::uint64_t{1} << 63);
    }
    return key;
}

std::unordered_map<std::uint64_t, int> doubled_edge_use(const DoubledMesh& d) {
    std::set<std::uint64_t> boundary_edges;
    for (std::size_t i = 0; i < d.boundary.size(); ++i) {
        boundary_edges.insert(edge_key(d.boundary[i], d.boundary[(i + 1) % d.boundary.size()]));
    }
    std::unordered_map<std::uint64_t, int> use;
    for (std::size_t i = 0; i < d.triangles.size(); ++i) {
        const auto& t = d.triangles[i];
        for (int k = 0; k < 3; ++k) {
            ++use[doubled_edge_key(d, boundary_edges, t[k], t[(k + 1) % 3], d.sides[i])];
        }
    }
    return use;
}

}  // namespace

int DoubledMesh::edge_count() const { return static_cast<int>(doubled_edge_use(*this).size()); }

bool DoubledMesh::is_closed_manifold() const {
    const auto use = doubled_edge_use(*this);
    return std::all_of(use.begin(), use.end(), [](const auto& kv) { return kv.second == 2; });
}

void write_mesh(std::ostream& out, const PlanarMesh& mesh) {
    const auto old = out.precision(17);
    out << mesh.vertices.size() << ' ' << mesh.triangles.size() << ' ' << mesh.boundary.size() << '\n';
    for (const auto& p : mesh.vertices) {
        out << p.x << ' ' << p.y << '\n';
    }
    for (const auto& t : mesh.triangles) {
        out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    for (int b : mesh.boundary) {
        out << b << '\n';
    }
    out.precision(old);
}

PlanarMesh read_mesh(std::istream& in, std::optional<int> node_count) {
    std::size_t nv = 0, nf = 0, nb = 0;
    if (!(in >> nv >> nf >> nb)) {
        throw Error("mesh file: malformed header");
    }
    PlanarMesh mesh;
    mesh.vertices.resize(nv);
    mesh.triangles.resize(nf);
    mesh.boundary.resize(nb);
    for (auto& p : mesh.vertices) {
        if (!(in >> p.x >> p.y)) {
            throw Error("mesh file: truncated vertex list");
        }
    }
    for (auto& t : mesh.triangles) {
        if (!(in >> t[0] >> t[1] >> t[2])) {
            throw Error("mesh file: truncated triangle list");
        }
    }
    for (auto& b : mesh.boundary) {
        if (!(in >> b)) {
            throw Error("mesh file: truncated boundary list");
        }
    }
    mesh.node_count = node_count.value_or(static_cast<int>(nv));
    if (mesh.node_count < 0 || mesh.node_count > static_cast<int>(nv)) {
        throw Error("mesh file: node count out of range");
    }
    return mesh;
}

}  // namespace geoq
