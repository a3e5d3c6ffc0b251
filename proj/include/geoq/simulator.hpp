#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "geoq/embedding.hpp"
#include "geoq/quorum.hpp"
#include "geoq/sphere.hpp"

namespace geoq {

/// Median great-circle length over the edges of the doubled mesh.
double median_edge_length(const SphericalEmbedding& emb);

/// Triangles crossed by a polyline, each listed once in the order first reached. Between
/// consecutive samples the walk follows the connecting arc edge by edge, so triangles
/// clipped between samples are not skipped.
std::vector<int> rasterize(const GeodesicPolyline& poly, const SphericalEmbedding& emb);

/// Samples at `step_factor` times the median edge length, then rasterizes.
std::vector<int> rasterize(const SphericalCurve& curve, const SphericalEmbedding& emb, double step_factor = 0.25);

/// Distinct physical nodes on the given triangles, ascending. Mirror copies map to their
/// node; refinement vertices are skipped.
std::vector<int> charged_nodes(const std::vector<int>& triangles, const SphericalEmbedding& emb);

/// Per physical node.
using LoadMap = std::vector<double>;

/// Adds `weight` once to every node on the given triangles.
void charge(LoadMap& load, const std::vector<int>& triangles, const SphericalEmbedding& emb, double weight);

enum class Mode {
    /// Each accessor's strategy is integrated: pure strategies contribute one curve at
    /// full rate, mixed ones a stratified quadrature over their variate.
    Expected,
    /// Each accessor draws `events` curves at random, each carrying rate / events.
    MonteCarlo,
};

enum class ReadTermination {
    Full,
    /// Cut the read at the first triangle also crossed by a write of the same data type.
    FirstHit,
};

struct Workload {
    std::vector<DataType> data_types;
    /// Writes per unit time per contributor, relative to reads.
    double write_rate = 1.0;
    /// Reads per unit time per querier.
    double read_rate = 1.0;
    Mode mode = Mode::Expected;
    /// Quadrature points per mixed strategy in Expected mode.
    int expected_samples = 16;
    /// Curves per accessor in MonteCarlo mode.
    int events = 1;
    ReadTermination termination = ReadTermination::Full;
};

struct SimOptions {
    double step_factor = 0.25;
    /// Geometric and discrete robustness are sampled only when positive.
    int robustness_trials = 0;
    /// Zero picks the hardware concurrency.
    int threads = 0;
};

struct Metrics {
    double system_load = 0.0;
    double total_load = 0.0;
    /// -1 when not sampled.
    int robustness_geometric = -1;
    int robustness_discrete = -1;
};

struct RunResult {
    Metrics metrics;
    LoadMap load;
    /// Index of the most loaded node (lowest index on ties).
    int argmax = -1;
};

/// Simulates one workload. Results depend only on the inputs and seed, never on thread
/// count or scheduling. Throws ConfigError for node ids outside the deployment.
RunResult run(const Workload& workload, const QuorumSystem& system, const SphericalEmbedding& emb,
              std::uint64_t seed, const SimOptions& options = {});

/// Smallest number of shared physical nodes over sampled (write, read) pairs, with
/// accessors drawn from the deployment's nodes.
int discrete_robustness(const QuorumSystem& system, const DataType& data, const SphericalEmbedding& emb, int trials,
                        std::mt19937_64& rng, double step_factor = 0.25);

/// Quorum curve for a node, falling back to a great circle through the node (oriented by
/// u) when the hash-based curve is undefined at that node.
SphericalCurve access_curve(const QuorumSystem& system, Role curve_role, const UnitVec3& accessor,
                            const DataType& data, double u);

}  // namespace geoq
