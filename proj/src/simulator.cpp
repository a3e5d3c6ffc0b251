#include "geoq/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <iterator>
#include <limits>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "geoq/errors.hpp"
#include "geoq/random.hpp"

namespace geoq {
namespace {

constexpr int kMaxWalk = 64;

// Exit edge of t for the arc p -> q, or -1 when q is inside t.
int exit_edge(const UnitVec3& p, const UnitVec3& q, const SphericalEmbedding& emb, int t) {
    const auto e = edge_tests(q, emb, t);
    if (contains(q, emb, t)) {
        return -1;
    }
    const Vec3 n = cross(p.vec(), q.vec());
    int best = -1;
    for (int k = 0; k < 3; ++k) {
        if (e[k] >= 0.0) {
            continue;
        }
        const Vec3& b = emb.positions[emb.mesh.triangles[t][(k + 1) % 3]];
        const Vec3& c = emb.positions[emb.mesh.triangles[t][(k + 2) % 3]];
        const bool straddles = dot(n, b) * dot(n, c) <= 0.0;
        if (straddles && (best < 0 || e[k] < e[best])) {
            best = k;
        }
    }
    if (best >= 0) {
        return best;
    }
    best = 0;
    for (int k = 1; k < 3; ++k) {
        if (e[k] < e[best]) {
            best = k;
        }
    }
    return best;
}

class TriangleSet {
public:
    void add(int t) {
        if (seen_.insert(t).second) {
            order_.push_back(t);
        }
    }
    std::vector<int> take() { return std::move(order_); }

private:
    std::unordered_set<int> seen_;
    std::vector<int> order_;
};

UnitVec3 node_point(const SphericalEmbedding& emb, int node) { return emb.node_position(node); }

void check_nodes(const std::vector<int>& ids, const SphericalEmbedding& emb, const char* what) {
    for (int id : ids) {
        if (id < 0 || id >= emb.mesh.node_count) {
            throw ConfigError(std::string(what) + " id " + std::to_string(id) + " is not a deployment node");
        }
    }
}

// Rotates a closed polyline so it starts at the sample closest to `start`.
GeodesicPolyline starting_at(GeodesicPolyline poly, const UnitVec3& start) {
    if (!poly.closed() || poly.points.size() < 3) {
        return poly;
    }
    poly.points.pop_back();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.points.size(); ++i) {
        const double d = norm(poly.points[i].vec() - start.vec());
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    std::rotate(poly.points.begin(), poly.points.begin() + static_cast<std::ptrdiff_t>(best), poly.points.end());
    poly.points.push_back(poly.points.front());
    return poly;
}

struct Access {
    int data = 0;
    int accessor = 0;
    Role role = Role::Write;
    double weight = 0.0;
    double u = 0.0;
};

struct AccessResult {
    std::vector<int> triangles;
    std::vector<int> nodes;
};

Role curve_role(const Workload& w, const QuorumSystem& system, std::size_t data, Role role) {
    const auto& d = w.data_types[data];
    const bool swapped = roles_swapped(system, w.write_rate * static_cast<double>(d.contributors.size()),
                                       w.read_rate * static_cast<double>(d.queriers.size()));
    if (!swapped) {
        return role;
    }
    return role == Role::Write ? Role::Read : Role::Write;
}

template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
    const std::size_t workers =
        std::min<std::size_t>(n, threads > 0 ? threads : std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::mutex error_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n && !failed; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    failed = true;
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

std::vector<Access> enumerate(const Workload& w, const QuorumSystem& system, Role role, std::uint64_t seed) {
    std::vector<Access> out;
    for (std::size_t d = 0; d < w.data_types.size(); ++d) {
        const auto& ids = role == Role::Write ? w.data_types[d].contributors : w.data_types[d].queriers;
        const double rate = role == Role::Write ? w.write_rate : w.read_rate;
        int draws = 1;
        if (w.mode == Mode::MonteCarlo) {
            draws = w.events;
        } else if (is_mixed(system, curve_role(w, system, d, role))) {
            draws = w.expected_samples;
        }
        for (int id : ids) {
            for (int j = 0; j < draws; ++j) {
                std::mt19937_64 rng(substream({seed, d, static_cast<std::uint64_t>(role),
                                               static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(j)}));
                const double jitter = unit_interval(rng);
                const double u = w.mode == Mode::MonteCarlo ? jitter : (j + jitter) / draws;
                out.push_back({static_cast<int>(d), id, role, rate / draws, u});
            }
        }
    }
    return out;
}

}  // namespace

double median_edge_length(const SphericalEmbedding& emb) {
    std::vector<double> lengths;
    lengths.reserve(3 * emb.mesh.triangles.size());
    for (const auto& t : emb.mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            if (a < b) {
                lengths.push_back(geodesic_distance(emb.positions[a], emb.positions[b]));
            }
        }
    }
    if (lengths.empty()) {
        throw DegenerateMesh("embedding has no edges");
    }
    auto mid = lengths.begin() + static_cast<std::ptrdiff_t>(lengths.size() / 2);
    std::nth_element(lengths.begin(), mid, lengths.end());
    return *mid;
}

std::vector<int> rasterize(const GeodesicPolyline& poly, const SphericalEmbedding& emb) {
    TriangleSet set;
    if (poly.points.empty()) {
        return {};
    }
    int t = locate(poly.points.front(), emb);
    set.add(t);
    for (std::size_t i = 1; i < poly.points.size(); ++i) {
        const UnitVec3& p = poly.points[i - 1];
        const UnitVec3& q = poly.points[i];
        int prev = -1;
        bool arrived = false;
        for (int steps = 0; steps < kMaxWalk; ++steps) {
            const int k = exit_edge(p, q, emb, t);
            if (k < 0) {
                arrived = true;
                break;
            }
            const int next = emb.neighbors[t][k];
            if (next < 0 || next == prev) {
                break;
            }
            prev = t;
            t = next;
            set.add(t);
        }
        if (!arrived) {
            t = locate(q, emb, t);
            set.add(t);
        }
    }
    return set.take();
}

std::vector<int> rasterize(const SphericalCurve& curve, const SphericalEmbedding& emb, double step_factor) {
    if (!(step_factor > 0.0)) {
        throw OutOfRange("step factor must be positive");
    }
    return rasterize(sample(curve, step_factor * median_edge_length(emb)), emb);
}

std::vector<int> charged_nodes(const std::vector<int>& triangles, const SphericalEmbedding& emb) {
    std::vector<int> nodes;
    nodes.reserve(3 * triangles.size());
    for (int t : triangles) {
        for (int v : emb.mesh.triangles[t]) {
            const int n = emb.mesh.node_of(v);
            if (n >= 0) {
                nodes.push_back(n);
            }
        }
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    return nodes;
}

void charge(LoadMap& load, const std::vector<int>& triangles, const SphericalEmbedding& emb, double weight) {
    if (load.size() < static_cast<std::size_t>(emb.mesh.node_count)) {
        load.resize(emb.mesh.node_count, 0.0);
    }
    for (int n : charged_nodes(triangles, emb)) {
        load[n] += weight;
    }
}

SphericalCurve access_curve(const QuorumSystem& system, Role curve_role, const UnitVec3& accessor,
                            const DataType& data, double u) {
    try {
        return curve_role == Role::Write ? write_quorum(system, accessor, data, u)
                                         : read_quorum(system, accessor, data, u);
    } catch (const DegenerateInput&) {
        return great_circle_at(accessor, u);
    }
}

RunResult run(const Workload& workload, const QuorumSystem& system, const SphericalEmbedding& emb,
              std::uint64_t seed, const SimOptions& options) {
    system.validate();
    if (!(workload.write_rate > 0.0) || !(workload.read_rate > 0.0)) {
        throw ConfigError("access rates must be positive");
    }
    if (workload.expected_samples < 1 || workload.events < 1) {
        throw ConfigError("sample and event counts must be at least 1");
    }
    for (const auto& d : workload.data_types) {
        check_nodes(d.contributors, emb, "contributor");
        check_nodes(d.queriers, emb, "querier");
    }
    const double step = options.step_factor * median_edge_length(emb);
    const int f_orig = emb.mesh.original_triangle_count;

    auto evaluate = [&](const std::vector<Access>& accesses, const std::vector<std::vector<char>>* written) {
        std::vector<AccessResult> results(accesses.size());
        parallel_for(accesses.size(), options.threads, [&](std::size_t i) {
            const Access& a = accesses[i];
            const auto& d = workload.data_types[a.data];
            const UnitVec3 at = node_point(emb, a.accessor);
            const SphericalCurve curve = access_curve(system, curve_role(workload, system, a.data, a.role), at, d, a.u);
            std::vector<int> tris = rasterize(starting_at(sample(curve, step), at), emb);
            if (written) {
                const auto& mask = (*written)[a.data];
                const auto hit = std::find_if(tris.begin(), tris.end(), [&](int t) { return mask[t % f_orig]; });
                if (hit != tris.end()) {
                    tris.erase(hit + 1, tris.end());
                }
            }
            results[i].nodes = charged_nodes(tris, emb);
            results[i].triangles = std::move(tris);
        });
        return results;
    };

    RunResult out;
    out.load.assign(emb.mesh.node_count, 0.0);

    const auto writes = enumerate(workload, system, Role::Write, seed);
    const auto write_results = evaluate(writes, nullptr);
    std::vector<std::vector<char>> written(workload.data_types.size(), std::vector<char>(f_orig, 0));
    for (std::size_t i = 0; i < writes.size(); ++i) {
        for (int n : write_results[i].nodes) {
            out.load[n] += writes[i].weight;
        }
        for (int t : write_results[i].triangles) {
            written[writes[i].data][t % f_orig] = 1;
        }
    }

    const auto reads = enumerate(workload, system, Role::Read, seed);
    const auto read_results =
        evaluate(reads, workload.termination == ReadTermination::FirstHit ? &written : nullptr);
    for (std::size_t i = 0; i < reads.size(); ++i) {
        for (int n : read_results[i].nodes) {
            out.load[n] += reads[i].weight;
        }
    }

    for (std::size_t n = 0; n < out.load.size(); ++n) {
        out.metrics.total_load += out.load[n];
        if (out.argmax < 0 || out.load[n] > out.load[out.argmax]) {
            out.argmax = static_cast<int>(n);
        }
    }
    out.metrics.system_load = out.argmax >= 0 ? out.load[out.argmax] : 0.0;

    if (options.robustness_trials > 0 && !workload.data_types.empty()) {
        int geometric = std::numeric_limits<int>::max();
        int discrete = std::numeric_limits<int>::max();
        for (std::size_t d = 0; d < workload.data_types.size(); ++d) {
            std::mt19937_64 g(substream({seed, d, 0x726f62ULL, 1}));
            geometric = std::min(geometric,
                                 geometric_robustness(system, workload.data_types[d], options.robustness_trials, g));
            std::mt19937_64 r(substream({seed, d, 0x726f62ULL, 2}));
            discrete = std::min(discrete, discrete_robustness(system, workload.data_types[d], emb,
                                                              options.robustness_trials, r, options.step_factor));
        }
        out.metrics.robustness_geometric = geometric;
        out.metrics.robustness_discrete = discrete;
    }
    return out;
}

int discrete_robustness(const QuorumSystem& system, const DataType& data, const SphericalEmbedding& emb, int trials,
                        std::mt19937_64& rng, double step_factor) {
    if (trials < 1) {
        throw OutOfRange("robustness needs at least one trial");
    }
    const int n = emb.mesh.node_count;
    auto pick = [&](std::mt19937_64& g) { return std::min(n - 1, static_cast<int>(unit_interval(g) * n)); };
    const double step = step_factor * median_edge_length(emb);
    int best = std::numeric_limits<int>::max();
    for (int t = 0; t < trials; ++t) {
        const UnitVec3 w = node_point(emb, pick(rng));
        const UnitVec3 r = node_point(emb, pick(rng));
        const double uw = unit_interval(rng);
        const double ur = unit_interval(rng);
        const auto wn = charged_nodes(rasterize(sample(access_curve(system, Role::Write, w, data, uw), step), emb), emb);
        const auto rn = charged_nodes(rasterize(sample(access_curve(system, Role::Read, r, data, ur), step), emb), emb);
        std::vector<int> shared;
        std::set_intersection(wn.begin(), wn.end(), rn.begin(), rn.end(), std::back_inserter(shared));
        best = std::min(best, static_cast<int>(shared.size()));
    }
    return best;
}

}  // namespace geoq
