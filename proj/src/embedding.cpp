#include "geoq/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "geoq/errors.hpp"

namespace geoq {
namespace {

constexpr int kGridRows = 36;
constexpr int kGridCols = 72;

std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint32_t>(std::min(a, b));
    const auto hi = static_cast<std::uint32_t>(std::max(a, b));
    return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

double cross2(const Point2& o, const Point2& a, const Point2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

/// Symmetric cotangent Laplacian on the original planar mesh, plus per-vertex areas.
struct Operator {
    // CSR adjacency: neighbors of v are adj[start[v] .. start[v+1]).
    std::vector<int> start;
    std::vector<int> adj;
    std::vector<double> weight;
    std::vector<double> weight_sum;
    std::vector<double> area;
    std::vector<bool> on_boundary;
    std::vector<int> boundary;
};

Operator build_operator(const PlanarMesh& mesh) {
    const int n = static_cast<int>(mesh.vertices.size());
    std::unordered_map<std::uint64_t, double> w;
    Operator op;
    op.area.assign(n, 0.0);
    for (const auto& t : mesh.triangles) {
        const double twice_area = cross2(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
        if (!(twice_area > 0.0)) {
            throw DegenerateMesh("zero-area triangle");
        }
        for (int k = 0; k < 3; ++k) {
            const Point2& o = mesh.vertices[t[k]];
            const Point2& a = mesh.vertices[t[(k + 1) % 3]];
            const Point2& b = mesh.vertices[t[(k + 2) % 3]];
            const double dotp = (a.x - o.x) * (b.x - o.x) + (a.y - o.y) * (b.y - o.y);
            w[edge_key(t[(k + 1) % 3], t[(k + 2) % 3])] += 0.5 * dotp / twice_area;
            op.area[t[k]] += twice_area / 6.0;
        }
    }
    std::vector<std::vector<std::pair<int, double>>> lists(n);
    for (const auto& [key, value] : w) {
        const int a = static_cast<int>(key >> 32);
        const int b = static_cast<int>(key & 0xffffffffu);
        const double c = std::clamp(value, 1e-3, 1e3);
        lists[a].emplace_back(b, c);
        lists[b].emplace_back(a, c);
    }
    op.start.push_back(0);
    op.weight_sum.assign(n, 0.0);
    for (int v = 0; v < n; ++v) {
        std::sort(lists[v].begin(), lists[v].end());
        for (const auto& [u, c] : lists[v]) {
            op.adj.push_back(u);
            op.weight.push_back(c);
            op.weight_sum[v] += c;
        }
        op.start.push_back(static_cast<int>(op.adj.size()));
    }
    op.on_boundary.assign(n, false);
    for (int b : mesh.boundary) {
        op.on_boundary[b] = true;
    }
    op.boundary = mesh.boundary;
    return op;
}

void check_chords(const PlanarMesh& mesh, const std::vector<bool>& on_boundary) {
    std::set<std::uint64_t> boundary_edges;
    for (std::size_t i = 0; i < mesh.boundary.size(); ++i) {
        boundary_edges.insert(edge_key(mesh.boundary[i], mesh.boundary[(i + 1) % mesh.boundary.size()]));
    }
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            if (on_boundary[a] && on_boundary[b] && !boundary_edges.contains(edge_key(a, b))) {
                throw DegenerateMesh("interior edge joins two boundary vertices; refine boundary chords first");
            }
        }
    }
}

/// Tutte-style disk map with the boundary on the unit circle by arc length, lifted to
/// the upper hemisphere by inverse stereographic projection.
std::vector<Vec3> initial_placement(const PlanarMesh& mesh, const Operator& op) {
    const int n = static_cast<int>(mesh.vertices.size());
    std::vector<double> disk_x(n, 0.0), disk_y(n, 0.0);
    const auto& loop = mesh.boundary;
    double perimeter = 0.0;
    std::vector<double> along(loop.size(), 0.0);
    for (std::size_t i = 0; i < loop.size(); ++i) {
        along[i] = perimeter;
        const auto& p = mesh.vertices[loop[i]];
        const auto& q = mesh.vertices[loop[(i + 1) % loop.size()]];
        perimeter += std::hypot(q.x - p.x, q.y - p.y);
    }
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const double angle = 2.0 * kPi * along[i] / perimeter;
        disk_x[loop[i]] = std::cos(angle);
        disk_y[loop[i]] = std::sin(angle);
    }

    std::vector<int> index(n, -1);
    int m = 0;
    for (int v = 0; v < n; ++v) {
        if (!op.on_boundary[v]) {
            index[v] = m++;
        }
    }
    std::vector<Eigen::Triplet<double>> entries;
    Eigen::VectorXd bx = Eigen::VectorXd::Zero(m), by = Eigen::VectorXd::Zero(m);
    for (int v = 0; v < n; ++v) {
        if (index[v] < 0) {
            continue;
        }
        entries.emplace_back(index[v], index[v], op.weight_sum[v]);
        for (int k = op.start[v]; k < op.start[v + 1]; ++k) {
            const int u = op.adj[k];
            if (index[u] >= 0) {
                entries.emplace_back(index[v], index[u], -op.weight[k]);
            } else {
                bx[index[v]] += op.weight[k] * disk_x[u];
                by[index[v]] += op.weight[k] * disk_y[u];
            }
        }
    }
    Eigen::SparseMatrix<double> lap(m, m);
    lap.setFromTriplets(entries.begin(), entries.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(lap);
    if (solver.info() != Eigen::Success) {
        throw DegenerateMesh("disk parameterization system is singular");
    }
    const Eigen::VectorXd sx = solver.solve(bx);
    const Eigen::VectorXd sy = solver.solve(by);
    std::vector<Vec3> pos(n);
    for (int v = 0; v < n; ++v) {
        double x = disk_x[v], y = disk_y[v];
        if (index[v] >= 0) {
            x = sx[index[v]];
            y = sy[index[v]];
        }
        const double r2 = x * x + y * y;
        pos[v] = op.on_boundary[v] ? Vec3{x, y, 0.0} / std::sqrt(r2)
                                   : Vec3{2.0 * x, 2.0 * y, 1.0 - r2} / (1.0 + r2);
    }
    return pos;
}

Vec3 gather(const Operator& op, const std::vector<Vec3>& pos, int v) {
    Vec3 s;
    for (int k = op.start[v]; k < op.start[v + 1]; ++k) {
        s += op.weight[k] * pos[op.adj[k]];
    }
    return s;
}

/// Moves v to the minimizer of its local energy; boundary vertices stay on the equator.
void relax(const Operator& op, std::vector<Vec3>& pos, int v) {
    Vec3 s = gather(op, pos, v);
    if (op.on_boundary[v]) {
        s.z = 0.0;
    }
    const double len = norm(s);
    if (len > 0.0) {
        pos[v] = s / len;
    }
}

/// Energy of one copy; the doubled surface has exactly twice this.
double energy(const Operator& op, const std::vector<Vec3>& pos) {
    double e = 0.0;
    for (int v = 0; v < static_cast<int>(pos.size()); ++v) {
        for (int k = op.start[v]; k < op.start[v + 1]; ++k) {
            if (op.adj[k] > v) {
                const Vec3 d = pos[v] - pos[op.adj[k]];
                e += op.weight[k] * dot(d, d);
            }
        }
    }
    return e;
}

Vec3 centroid(const Operator& op, const std::vector<Vec3>& pos) {
    Vec3 c;
    double total = 0.0;
    for (std::size_t v = 0; v < pos.size(); ++v) {
        c += op.area[v] * Vec3{pos[v].x, pos[v].y, 0.0};
        total += op.area[v];
    }
    return c / total;
}

/// Conformal boost of the sphere with velocity beta (|beta| < 1, beta.z = 0). It maps the
/// equator to itself and commutes with z-reflection.
void boost(std::vector<Vec3>& pos, const Vec3& beta) {
    const double b = norm(beta);
    if (b == 0.0) {
        return;
    }
    const Vec3 dir = beta / b;
    const double gamma_inv = std::sqrt(1.0 - b * b);
    for (auto& p : pos) {
        const double par = dot(p, dir);
        const Vec3 perp = p - par * dir;
        const double denom = 1.0 - b * par;
        const Vec3 q = ((par - b) / denom) * dir + perp * (gamma_inv / denom);
        p = q / norm(q);
    }
}

void normalize_mobius(const Operator& op, std::vector<Vec3>& pos) {
    for (int i = 0; i < 100; ++i) {
        const Vec3 c = centroid(op, pos);
        const double len = norm(c);
        if (len < 1e-13) {
            return;
        }
        // A boost of speed b shifts the centroid by roughly 2b/3 against its direction.
        const double b = std::min(1.5 * len, 0.5);
        boost(pos, c * (b / len));
    }
}

double residual(const Operator& op, const std::vector<Vec3>& pos) {
    const int n = static_cast<int>(pos.size());
    std::vector<Vec3> g(n), nx(n), ny(n);
    const Vec3 ex{1, 0, 0}, ey{0, 1, 0};
    for (int v = 0; v < n; ++v) {
        Vec3 s = gather(op, pos, v);
        if (op.on_boundary[v]) {
            s.z = 0.0;
        }
        g[v] = s - dot(s, pos[v]) * pos[v];
        nx[v] = op.area[v] * (ex - dot(ex, pos[v]) * pos[v]);
        ny[v] = op.area[v] * (ey - dot(ey, pos[v]) * pos[v]);
        if (op.on_boundary[v]) {
            nx[v].z = ny[v].z = 0.0;
        }
    }
    // Remove the part of the gradient explained by the centroid constraint (least squares).
    double a11 = 0, a12 = 0, a22 = 0, r1 = 0, r2 = 0;
    for (int v = 0; v < n; ++v) {
        a11 += dot(nx[v], nx[v]);
        a12 += dot(nx[v], ny[v]);
        a22 += dot(ny[v], ny[v]);
        r1 += dot(nx[v], g[v]);
        r2 += dot(ny[v], g[v]);
    }
    const double det = a11 * a22 - a12 * a12;
    const double lx = det != 0.0 ? (r1 * a22 - r2 * a12) / det : 0.0;
    const double ly = det != 0.0 ? (a11 * r2 - a12 * r1) / det : 0.0;
    double worst = 0.0;
    for (int v = 0; v < n; ++v) {
        worst = std::max(worst, norm(g[v] - lx * nx[v] - ly * ny[v]) / op.weight_sum[v]);
    }
    return worst;
}

/// One constrained Newton step on the reduced (one-copy) energy, with the centroid held
/// at zero to first order. Tangent coordinates: two per interior vertex, one per
/// boundary vertex (along the equator). Returns false if no energy-decreasing step exists.
bool newton_step(const Operator& op, std::vector<Vec3>& pos) {
    const int n = static_cast<int>(pos.size());
    std::vector<int> offset(n + 1, 0);
    std::vector<std::array<Vec3, 2>> basis(n);
    for (int v = 0; v < n; ++v) {
        if (op.on_boundary[v]) {
            basis[v][0] = Vec3{-pos[v].y, pos[v].x, 0.0} / std::hypot(pos[v].x, pos[v].y);
            offset[v + 1] = offset[v] + 1;
        } else {
            const Frame f = frame_with_axis(UnitVec3::from_unit(pos[v]));
            basis[v] = {f.e1, f.e2};
            offset[v + 1] = offset[v] + 2;
        }
    }
    const int dim = offset[n];
    auto dofs = [&](int v) { return offset[v + 1] - offset[v]; };

    std::vector<Eigen::Triplet<double>> entries;
    Eigen::VectorXd g(dim), jx(dim), jy(dim), rot(dim);
    double diag_max = 0.0;
    for (int v = 0; v < n; ++v) {
        const Vec3 s = gather(op, pos, v);
        const double curvature = dot(pos[v], s);
        diag_max = std::max(diag_max, curvature);
        const Vec3 spin{-pos[v].y, pos[v].x, 0.0};
        for (int a = 0; a < dofs(v); ++a) {
            const int row = offset[v] + a;
            entries.emplace_back(row, row, curvature);
            g[row] = -dot(basis[v][a], s);
            jx[row] = op.area[v] * basis[v][a].x;
            jy[row] = op.area[v] * basis[v][a].y;
            rot[row] = dot(basis[v][a], spin);
            for (int k = op.start[v]; k < op.start[v + 1]; ++k) {
                const int u = op.adj[k];
                for (int b = 0; b < dofs(u); ++b) {
                    entries.emplace_back(row, offset[u] + b, -op.weight[k] * dot(basis[v][a], basis[u][b]));
                }
            }
        }
    }
    // Rotation about the pole is an exact symmetry; a tiny shift keeps the matrix regular
    // and the rotational component is projected out of every solution.
    for (int i = 0; i < dim; ++i) {
        entries.emplace_back(i, i, 1e-9 * diag_max);
    }
    Eigen::SparseMatrix<double> h(dim, dim);
    h.setFromTriplets(entries.begin(), entries.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(h);
    if (solver.info() != Eigen::Success) {
        return false;
    }
    const double rr = rot.squaredNorm();
    auto solve = [&](const Eigen::VectorXd& rhs) {
        Eigen::VectorXd x = solver.solve(rhs);
        if (rr > 0.0) {
            x -= (x.dot(rot) / rr) * rot;
        }
        return x;
    };
    const Eigen::VectorXd y = solve(-g);
    const Eigen::VectorXd xx = solve(jx);
    const Eigen::VectorXd xy = solve(jy);
    const Vec3 c = centroid(op, pos);
    double total_area = 0.0;
    for (double a : op.area) {
        total_area += a;
    }
    // Constraint residual in the same units as J: sum of area-weighted xy.
    const double cx = c.x * total_area, cy = c.y * total_area;
    const double s11 = jx.dot(xx), s12 = jx.dot(xy), s21 = jy.dot(xx), s22 = jy.dot(xy);
    const double r1 = jx.dot(y) + cx, r2 = jy.dot(y) + cy;
    const double det = s11 * s22 - s12 * s21;
    if (!(std::abs(det) > 0.0)) {
        return false;
    }
    const double mu1 = (r1 * s22 - r2 * s12) / det;
    const double mu2 = (s11 * r2 - s21 * r1) / det;
    const Eigen::VectorXd step = y - mu1 * xx - mu2 * xy;
    if (!step.allFinite()) {
        return false;
    }

    const double e0 = energy(op, pos);
    std::vector<Vec3> trial(n);
    for (double t = 1.0; t >= 1.0 / 64.0; t *= 0.5) {
        for (int v = 0; v < n; ++v) {
            Vec3 d;
            for (int a = 0; a < dofs(v); ++a) {
                d += basis[v][a] * step[offset[v] + a];
            }
            const Vec3 q = pos[v] + t * d;
            trial[v] = q / norm(q);
        }
        normalize_mobius(op, trial);
        if (energy(op, trial) <= e0 * (1.0 + 1e-13)) {
            pos = std::move(trial);
            return true;
        }
    }
    return false;
}

void fill_positions(SphericalEmbedding& emb, const std::vector<Vec3>& original) {
    const auto& m = emb.mesh;
    emb.positions.resize(m.vertex_count());
    for (int v = 0; v < m.vertex_count(); ++v) {
        const Vec3& p = original[m.original_of(v)];
        emb.positions[v] = UnitVec3::from_unit(v < m.original_vertex_count ? p : Vec3{p.x, p.y, -p.z});
    }
}

Vec3 tri_vertex(const SphericalEmbedding& emb, int t, int k) { return emb.positions[emb.mesh.triangles[t][k]]; }

// Edge tests within this band count as on the edge; it absorbs rounding in the triple
// products, so a query at a vertex position is found in its incident triangles.
constexpr double kOnEdge = 1e-14;

int grid_cell(const UnitVec3& p) {
    const double polar = std::acos(std::clamp(p.z(), -1.0, 1.0));
    double lon = std::atan2(p.y(), p.x());
    if (lon < 0.0) {
        lon += 2.0 * kPi;
    }
    const int r = std::min(kGridRows - 1, static_cast<int>(polar / kPi * kGridRows));
    const int c = std::min(kGridCols - 1, static_cast<int>(lon / (2.0 * kPi) * kGridCols));
    return r * kGridCols + c;
}

int exhaustive(const UnitVec3& p, const SphericalEmbedding& emb) {
    for (int t = 0; t < emb.mesh.triangle_count(); ++t) {
        if (contains(p, emb, t)) {
            return t;
        }
    }
    throw NotFound("point is not covered by the embedding");
}

double angle_at(const Vec3& o, const Vec3& a, const Vec3& b) {
    return std::atan2(norm(cross(a - o, b - o)), dot(a - o, b - o));
}

// Angle of the spherical triangle at vertex o, between great-circle arcs to a and b.
double spherical_angle(const Vec3& o, const Vec3& a, const Vec3& b) {
    const Vec3 ta = a - dot(a, o) * o;
    const Vec3 tb = b - dot(b, o) * o;
    return std::atan2(norm(cross(ta, tb)), dot(ta, tb));
}

}  // namespace

std::array<double, 3> edge_tests(const UnitVec3& p, const SphericalEmbedding& emb, int t) {
    const Vec3 a = tri_vertex(emb, t, 0), b = tri_vertex(emb, t, 1), c = tri_vertex(emb, t, 2);
    return {emb.orientation * triple(b, c, p), emb.orientation * triple(c, a, p), emb.orientation * triple(a, b, p)};
}

bool contains(const UnitVec3& p, const SphericalEmbedding& emb, int t) {
    const auto e = edge_tests(p, emb, t);
    if (e[0] < -kOnEdge || e[1] < -kOnEdge || e[2] < -kOnEdge) {
        return false;
    }
    const Vec3 s = tri_vertex(emb, t, 0) + tri_vertex(emb, t, 1) + tri_vertex(emb, t, 2);
    return dot(s, p) > 0.0;
}

PlanarMesh original_mesh(const DoubledMesh& mesh) {
    PlanarMesh p;
    p.vertices.assign(mesh.planar.begin(), mesh.planar.begin() + mesh.original_vertex_count);
    p.triangles.assign(mesh.triangles.begin(), mesh.triangles.begin() + mesh.original_triangle_count);
    p.boundary = mesh.boundary;
    p.node_count = mesh.node_count;
    return p;
}

void SphericalEmbedding::finalize() {
    const int f = mesh.triangle_count();
    vertex_triangles.assign(mesh.vertex_count(), {});
    std::unordered_map<std::uint64_t, int> directed;
    for (int t = 0; t < f; ++t) {
        for (int k = 0; k < 3; ++k) {
            const int a = mesh.triangles[t][k], b = mesh.triangles[t][(k + 1) % 3];
            vertex_triangles[a].push_back(t);
            directed[(static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b)] = t;
        }
    }
    // neighbors[t][k] is across the edge opposite vertex k.
    neighbors.assign(f, {-1, -1, -1});
    for (int t = 0; t < f; ++t) {
        for (int k = 0; k < 3; ++k) {
            const int a = mesh.triangles[t][(k + 1) % 3], b = mesh.triangles[t][(k + 2) % 3];
            auto it = directed.find((static_cast<std::uint64_t>(b) << 32) | static_cast<std::uint32_t>(a));
            neighbors[t][k] = it == directed.end() ? -1 : it->second;
        }
    }
    double positive = 0.0;
    for (int t = 0; t < f; ++t) {
        positive += triple(tri_vertex(*this, t, 0), tri_vertex(*this, t, 1), tri_vertex(*this, t, 2)) > 0.0 ? 1 : -1;
    }
    orientation = positive >= 0.0 ? 1.0 : -1.0;

    start_grid.assign(kGridRows * kGridCols, -1);
    for (int t = 0; t < f; ++t) {
        const Vec3 s = tri_vertex(*this, t, 0) + tri_vertex(*this, t, 1) + tri_vertex(*this, t, 2);
        if (norm(s) == 0.0) {
            continue;
        }
        const UnitVec3 c(s);
        const int cell = grid_cell(c);
        if (start_grid[cell] < 0) {
            start_grid[cell] = t;
        }
    }
    // Empty cells borrow the nearest filled cell in the same row, else triangle 0.
    for (int r = 0; r < kGridRows; ++r) {
        for (int c = 0; c < kGridCols; ++c) {
            int& slot = start_grid[r * kGridCols + c];
            for (int d = 1; slot < 0 && d <= kGridCols / 2; ++d) {
                for (int cc : {(c + d) % kGridCols, (c - d + kGridCols) % kGridCols}) {
                    if (slot < 0 && start_grid[r * kGridCols + cc] >= 0) {
                        slot = start_grid[r * kGridCols + cc];
                    }
                }
            }
            if (slot < 0) {
                slot = 0;
            }
        }
    }
}

SphericalEmbedding harmonic_sphere_map(const DoubledMesh& mesh, const SolverOptions& options) {
    const PlanarMesh planar = original_mesh(mesh);
    validate(planar);
    const Operator op = build_operator(planar);
    check_chords(planar, op.on_boundary);
    if (std::all_of(op.on_boundary.begin(), op.on_boundary.end(), [](bool b) { return b; })) {
        throw DegenerateMesh("mesh has no interior vertex");
    }

    std::vector<Vec3> pos = initial_placement(planar, op);
    normalize_mobius(op, pos);

    SphericalEmbedding emb;
    emb.mesh = mesh;
    const int n = static_cast<int>(pos.size());
    double res = residual(op, pos);
    int iter = 0;
    // Smoothing settles the shape; Newton then removes the slow low-frequency error that
    // Gauss-Seidel alone needs tens of thousands of sweeps for.
    constexpr double kPolishBelow = 1e-3;
    bool polish = false;
    while (res > options.tol && iter < options.max_iters) {
        const double before = options.trace_energy ? 2.0 * energy(op, pos) : 0.0;
        if (polish) {
            polish = newton_step(op, pos);
            res = residual(op, pos);
        } else {
            for (int v = 0; v < n; ++v) {
                relax(op, pos, v);
            }
            for (int v = n - 1; v >= 0; --v) {
                relax(op, pos, v);
            }
        }
        ++iter;
        if (options.trace_energy) {
            emb.energy_trace.emplace_back(before, 2.0 * energy(op, pos));
        }
        if (iter % options.mobius_every == 0 || iter == options.max_iters) {
            normalize_mobius(op, pos);
            res = residual(op, pos);
            polish = polish || res < kPolishBelow;
        }
    }
    emb.residual = res;
    emb.iterations = iter;
    emb.converged = res <= options.tol;
    fill_positions(emb, pos);
    emb.finalize();
    return emb;
}

void require_converged(const SphericalEmbedding& emb) {
    if (!emb.converged) {
        throw NoConvergence("harmonic map did not reach the tolerance; residual " + std::to_string(emb.residual),
                            emb.residual, emb.iterations);
    }
}

double harmonic_energy(const SphericalEmbedding& emb) {
    const PlanarMesh planar = original_mesh(emb.mesh);
    const Operator op = build_operator(planar);
    std::vector<Vec3> pos(emb.positions.begin(), emb.positions.begin() + emb.mesh.original_vertex_count);
    return 2.0 * energy(op, pos);
}

Vec3 weighted_centroid(const SphericalEmbedding& emb) {
    const PlanarMesh planar = original_mesh(emb.mesh);
    const Operator op = build_operator(planar);
    // Both copies: the xy parts add, the z parts cancel.
    Vec3 c;
    double total = 0.0;
    for (int v = 0; v < emb.mesh.original_vertex_count; ++v) {
        const Vec3& p = emb.positions[v];
        const Vec3& q = emb.positions[emb.mesh.copy_map[v]];
        c += op.area[v] * (p + q);
        total += 2.0 * op.area[v];
    }
    return c / total;
}

int flipped_triangles(const SphericalEmbedding& emb) {
    int pos = 0, neg = 0;
    for (int t = 0; t < emb.mesh.triangle_count(); ++t) {
        const double s = triple(tri_vertex(emb, t, 0), tri_vertex(emb, t, 1), tri_vertex(emb, t, 2));
        if (s > 0.0) {
            ++pos;
        } else {
            ++neg;
        }
    }
    return std::min(pos, neg);
}

int locate(const UnitVec3& p, const SphericalEmbedding& emb, std::optional<int> hint) {
    const int f = emb.mesh.triangle_count();
    int t = hint && *hint >= 0 && *hint < f ? *hint : emb.start_grid[grid_cell(p)];
    int found = -1;
    for (int steps = 0; steps < 4 * f + 16; ++steps) {
        const auto e = edge_tests(p, emb, t);
        int worst = 0;
        for (int k = 1; k < 3; ++k) {
            if (e[k] < e[worst]) {
                worst = k;
            }
        }
        if (e[worst] >= -kOnEdge) {
            if (contains(p, emb, t)) {
                found = t;
            }
            break;
        }
        const int next = emb.neighbors[t][worst];
        if (next < 0) {
            break;
        }
        t = next;
    }
    if (found < 0) {
        return exhaustive(p, emb);
    }
    const auto e = edge_tests(p, emb, found);
    if (e[0] > kOnEdge && e[1] > kOnEdge && e[2] > kOnEdge) {
        return found;
    }
    // On an edge or vertex several triangles qualify, all sharing a vertex with `found`;
    // the lowest index wins.
    int best = found;
    for (int v : emb.mesh.triangles[found]) {
        for (int t : emb.vertex_triangles[v]) {
            if (t < best && contains(p, emb, t)) {
                best = t;
            }
        }
    }
    return best;
}

std::array<double, 3> barycentric(const UnitVec3& p, const SphericalEmbedding& emb, int t) {
    const Vec3 a = tri_vertex(emb, t, 0), b = tri_vertex(emb, t, 1), c = tri_vertex(emb, t, 2);
    std::array<double, 3> l{triple(p, b, c), triple(a, p, c), triple(a, b, p)};
    const double s = l[0] + l[1] + l[2];
    for (auto& x : l) {
        x /= s;
    }
    return l;
}

std::vector<PlanarPath> pull_back_path(const GeodesicPolyline& poly, const SphericalEmbedding& emb) {
    std::vector<PlanarPath> paths;
    std::optional<int> hint;
    for (const auto& p : poly.points) {
        const int t = locate(p, emb, hint);
        hint = t;
        const auto l = barycentric(p, emb, t);
        const auto& tri = emb.mesh.triangles[t];
        Point2 q;
        for (int k = 0; k < 3; ++k) {
            const Point2& v = emb.mesh.planar[tri[k]];
            q.x += l[k] * v.x;
            q.y += l[k] * v.y;
        }
        const Side side = emb.mesh.sides[t];
        if (paths.empty() || paths.back().side != side) {
            paths.push_back({side, {}});
        }
        paths.back().points.push_back(q);
    }
    if (poly.closed() && paths.size() > 1 && paths.front().side == paths.back().side) {
        auto& last = paths.back().points;
        last.insert(last.end(), paths.front().points.begin() + 1, paths.front().points.end());
        paths.front() = std::move(paths.back());
        paths.pop_back();
    }
    return paths;
}

UnitVec3 push_forward(const Point2& p, const SphericalEmbedding& emb) {
    const auto& m = emb.mesh;
    for (int t = 0; t < m.original_triangle_count; ++t) {
        const auto& tri = m.triangles[t];
        const Point2 &a = m.planar[tri[0]], &b = m.planar[tri[1]], &c = m.planar[tri[2]];
        const double area = cross2(a, b, c);
        const double l0 = cross2(p, b, c) / area, l1 = cross2(a, p, c) / area, l2 = cross2(a, b, p) / area;
        constexpr double eps = -1e-12;
        if (l0 >= eps && l1 >= eps && l2 >= eps) {
            return UnitVec3(l0 * tri_vertex(emb, t, 0) + l1 * tri_vertex(emb, t, 1) + l2 * tri_vertex(emb, t, 2));
        }
    }
    throw OutOfRange("point lies outside the planar region");
}

Summary summarize(std::vector<double> values) {
    Summary s;
    if (values.empty()) {
        return s;
    }
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    s.mean = sum / static_cast<double>(values.size());
    s.max = values.back();
    auto pct = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    s.p50 = pct(0.5);
    s.p90 = pct(0.9);
    s.p99 = pct(0.99);
    return s;
}

DistortionReport distortion_report(const SphericalEmbedding& emb) {
    DistortionReport r;
    const auto& m = emb.mesh;
    for (int t = 0; t < m.original_triangle_count; ++t) {
        const auto& tri = m.triangles[t];
        double err = 0.0;
        for (int k = 0; k < 3; ++k) {
            const int o = tri[k], a = tri[(k + 1) % 3], b = tri[(k + 2) % 3];
            const Point2 &po = m.planar[o], &pa = m.planar[a], &pb = m.planar[b];
            const double planar = angle_at({po.x, po.y, 0}, {pa.x, pa.y, 0}, {pb.x, pb.y, 0});
            const double sphere = spherical_angle(emb.positions[o], emb.positions[a], emb.positions[b]);
            err += std::abs(sphere - planar);
        }
        r.angle.push_back(err / kPi);

        // Affine map planar -> chord triangle, expressed in an orthonormal basis of its plane.
        const Vec3 p0 = emb.positions[tri[0]], p1 = emb.positions[tri[1]], p2 = emb.positions[tri[2]];
        const Vec3 u1 = p1 - p0, u2 = p2 - p0;
        const Vec3 e1 = u1 / norm(u1);
        const Vec3 nrm = cross(u1, u2);
        const Vec3 e2 = cross(nrm / norm(nrm), e1);
        const double q11 = dot(u1, e1), q21 = dot(u1, e2), q12 = dot(u2, e1), q22 = dot(u2, e2);
        const Point2 &a = m.planar[tri[0]], &b = m.planar[tri[1]], &c = m.planar[tri[2]];
        const double d11 = b.x - a.x, d21 = b.y - a.y, d12 = c.x - a.x, d22 = c.y - a.y;
        const double det = d11 * d22 - d12 * d21;
        // J = Q * D^-1
        const double i11 = d22 / det, i12 = -d12 / det, i21 = -d21 / det, i22 = d11 / det;
        const double j11 = q11 * i11 + q12 * i21, j12 = q11 * i12 + q12 * i22;
        const double j21 = q21 * i11 + q22 * i21, j22 = q21 * i12 + q22 * i22;
        const double fro = j11 * j11 + j12 * j12 + j21 * j21 + j22 * j22;
        const double dj = std::abs(j11 * j22 - j12 * j21);
        const double disc = std::sqrt(std::max(0.0, fro * fro - 4.0 * dj * dj));
        const double s1 = std::sqrt(0.5 * (fro + disc));
        const double s2 = std::sqrt(std::max(0.0, 0.5 * (fro - disc)));
        r.dilatation.push_back(s2 > 0.0 ? s1 / s2 : std::numeric_limits<double>::infinity());
    }
    r.angle_stats = summarize(r.angle);
    r.dilatation_stats = summarize(r.dilatation);
    return r;
}

void write_embedding(std::ostream& out, const SphericalEmbedding& emb) {
    write_mesh(out, original_mesh(emb.mesh));
    const auto old = out.precision(17);
    for (const auto& p : emb.positions) {
        out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    }
    out << emb.residual << ' ' << emb.iterations << ' ' << (emb.converged ? 1 : 0) << '\n';
    out.precision(old);
}

SphericalEmbedding read_embedding(std::istream& in, std::optional<int> node_count) {
    SphericalEmbedding emb;
    emb.mesh = double_cover(read_mesh(in, node_count));
    emb.positions.resize(emb.mesh.vertex_count());
    for (auto& p : emb.positions) {
        double x, y, z;
        if (!(in >> x >> y >> z)) {
            throw Error("embedding file: truncated position list");
        }
        p = UnitVec3::from_unit({x, y, z});
    }
    int converged = 0;
    if (!(in >> emb.residual >> emb.iterations >> converged)) {
        throw Error("embedding file: missing solver trailer");
    }
    emb.converged = converged != 0;
    emb.finalize();
    return emb;
}

}  // namespace geoq
