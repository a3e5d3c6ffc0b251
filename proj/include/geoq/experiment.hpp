#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "geoq/embedding.hpp"
#include "geoq/mesh.hpp"
#include "geoq/quorum.hpp"
#include "geoq/simulator.hpp"
#include "geoq/sphere.hpp"

namespace geoq {

struct SweepAxis {
    /// One of: a, R_W, robustness, r, nodes, contributors, queriers.
    std::string parameter;
    std::vector<double> values;
};

/// Declarative experiment description. Every field has a default; see to_text for the
/// file format.
struct ExperimentConfig {
    std::string name = "experiment";
    int repetitions = 10;
    std::uint64_t seed = 1;

    int nodes = 2000;
    /// "square", "polygon", or "hull" (the convex hull of the nodes, placed in the square).
    std::string region = "square";
    double side = 1.0;
    std::string polygon_file;
    /// Explicit node coordinates ("x y" per line) instead of random placement.
    std::string nodes_file;

    std::vector<Kind> kinds{Kind::QG, Kind::QGm, Kind::QL, Kind::GeoQuorum};
    double R_W = 0.2 * kPi;
    double a = 0.2;
    bool dual = false;
    /// Upper bound on a when it is derived from a robustness target.
    double a_max = 0.49;

    int contributors = 100;
    int queriers = 20;
    int data_types = 1;
    std::vector<double> rates{4, 6, 8, 10};
    Mode mode = Mode::Expected;
    int events = 1;
    int expected_samples = 16;
    ReadTermination termination = ReadTermination::Full;
    std::optional<UnitVec3> hash_override;

    int robustness_trials = 20;
    double step_factor = 0.25;
    int threads = 0;
    SolverOptions solver;

    std::vector<SweepAxis> sweep;
    /// Keep floor(R_W / (a pi)) fixed while sweeping a by scaling R_W with it.
    bool scale_R_W = false;

    std::string csv = "results.csv";
    /// Prefix for heatmaps; empty disables them.
    std::string svg;
    /// Curve-length table for GeoQuorum settings; empty disables it.
    std::string lengths;
    std::string cache_dir;

    /// Directory that relative input paths are resolved against.
    std::filesystem::path base_dir = ".";
};

/// Parses the `key = value` format with `[section]` headers. Lines starting with ';' or
/// '#' are comments. Lists are comma separated; angles accept a "pi" suffix (0.2pi).
/// Throws ConfigError.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);
/// Serializes a config so that parse_config reproduces it.
std::string to_text(const ExperimentConfig& config);

struct Deployment {
    std::vector<Point2> nodes;
    std::vector<Point2> region;
    PlanarMesh mesh;
};

/// Seeded uniform placement in the region (rejection sampling for polygons), triangulated
/// against the region outline, or against the nodes' convex hull for "hull". Degenerate point sets raise DegenerateMesh.
Deployment generate_deployment(const ExperimentConfig& config, std::uint64_t seed);

/// Harmonic map of a deployment mesh, read from and stored to `cache_dir` when given.
/// Throws NoConvergence.
SphericalEmbedding embed(const PlanarMesh& mesh, const SolverOptions& solver,
                         const std::optional<std::filesystem::path>& cache_dir, bool* cache_hit = nullptr);

/// GEOQ_CACHE_DIR, else the configured cache directory, else `<out>/cache`.
std::filesystem::path cache_directory(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct ResultRow {
    std::string experiment_id;
    Kind kind = Kind::QG;
    double r = 0.0;
    double a = 0.0;
    double R_W = 0.0;
    /// Seed number, or "mean" / "stddev" on aggregate rows.
    std::string seed;
    double system_load = 0.0;
    double total_load = 0.0;
    double robustness_geometric = 0.0;
    double robustness_discrete = 0.0;
    double runtime_ms = 0.0;
};

std::string csv_header();
std::string csv_line(const ResultRow& row);
/// Marker appended when a run stops early.
std::string csv_partial_line();

/// Mean and sample standard deviation of a group of rows, as two aggregate rows.
std::pair<ResultRow, ResultRow> aggregate(const std::vector<ResultRow>& rows);

/// Heatmap of per-node load over the planar region.
void write_heatmap(std::ostream& out, const Deployment& deployment, const LoadMap& load);
/// Ramp position t in [0, 1] to "#rrggbb".
std::string ramp_color(double t);

class Interrupted : public Error {
public:
    Interrupted() : Error("interrupted") {}
};

struct RunControl {
    /// Polled between simulations; set it to stop early.
    const std::atomic<bool>* stop = nullptr;
    /// Progress lines.
    std::function<void(const std::string&)> log;
};

/// Runs the config (with_sweep = false ignores the sweep axes) and writes the CSV plus
/// optional heatmaps and length table under out_dir. Rows are written group by group in
/// config order; on any error a partial marker row is appended before rethrowing.
void run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir, bool with_sweep,
                    const RunControl& control = {});

}  // namespace geoq
