#include <CLI11.hpp>
#include <atomic>
#include <csignal>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "geoq/errors.hpp"
#include "geoq/experiment.hpp"

namespace fs = std::filesystem;
using namespace geoq;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_interrupt(int) { g_stop = true; }

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
};

ExperimentConfig load(const Options& o) {
    ExperimentConfig c = load_config(o.config);
    if (o.seed) {
        c.seed = *o.seed;
    }
    return c;
}

void save_config(const ExperimentConfig& c, const fs::path& out) {
    fs::create_directories(out);
    std::ofstream(out / "config_used.txt") << to_text(c);
}

fs::path mesh_path(const fs::path& out, std::uint64_t seed) { return out / ("mesh_seed" + std::to_string(seed) + ".txt"); }

int cmd_generate(const Options& o) {
    const auto c = load(o);
    const fs::path out(o.out);
    fs::create_directories(out);
    const Deployment d = generate_deployment(c, c.seed);
    {
        std::ofstream f(out / ("deployment_seed" + std::to_string(c.seed) + ".txt"));
        f.precision(17);
        for (const auto& p : d.nodes) {
            f << p.x << ' ' << p.y << '\n';
        }
    }
    std::ofstream(mesh_path(out, c.seed)) << [&] {
        std::ostringstream s;
        write_mesh(s, d.mesh);
        return s.str();
    }();
    std::cout << "nodes " << d.nodes.size() << ", mesh vertices " << d.mesh.vertices.size() << ", triangles "
              << d.mesh.triangles.size() << ", euler characteristic " << d.mesh.euler_characteristic() << '\n'
              << "wrote " << mesh_path(out, c.seed).string() << '\n';
    return 0;
}

int cmd_map(const Options& o) {
    const auto c = load(o);
    const fs::path out(o.out);
    fs::create_directories(out);
    PlanarMesh mesh;
    if (std::ifstream in(mesh_path(out, c.seed)); in) {
        try {
            mesh = read_mesh(in, c.nodes);
        } catch (const Error& e) {
            throw DegenerateMesh(std::string("mesh file unusable: ") + e.what());
        }
        validate(mesh);
    } else {
        mesh = generate_deployment(c, c.seed).mesh;
    }
    bool hit = false;
    const auto emb = embed(mesh, c.solver, cache_directory(c, out), &hit);
    double boundary_z = 0.0, symmetry = 0.0;
    const auto& m = emb.mesh;
    for (int v : m.boundary) {
        boundary_z = std::max(boundary_z, std::abs(emb.positions[v].z()));
    }
    for (int v = 0; v < m.vertex_count(); ++v) {
        const UnitVec3 mirror = reflect_z(emb.positions[m.original_of(v)]);
        if (v >= m.original_vertex_count) {
            symmetry = std::max(symmetry, norm(emb.positions[v].vec() - mirror.vec()));
        }
    }
    const auto report = distortion_report(emb);
    std::cout << "embedding " << (hit ? "loaded from cache" : "solved") << ": residual " << emb.residual
              << ", iterations " << emb.iterations << '\n'
              << "boundary max |z| " << boundary_z << ", mirror symmetry error " << symmetry
              << ", flipped triangles " << flipped_triangles(emb) << '\n'
              << "angle distortion mean " << report.angle_stats.mean << " p90 " << report.angle_stats.p90
              << " max " << report.angle_stats.max << '\n'
              << "dilatation mean " << report.dilatation_stats.mean << " p90 " << report.dilatation_stats.p90
              << " max " << report.dilatation_stats.max << '\n';
    const fs::path file = out / ("embedding_seed" + std::to_string(c.seed) + ".txt");
    std::ofstream f(file);
    write_embedding(f, emb);
    std::cout << "wrote " << file.string() << '\n';
    return 0;
}

int cmd_run(const Options& o, bool sweep) {
    const auto c = load(o);
    save_config(c, o.out);
    RunControl control;
    control.stop = &g_stop;
    control.log = [](const std::string& line) { std::cerr << line << '\n'; };
    run_experiment(c, o.out, sweep, control);
    std::cout << "wrote " << (fs::path(o.out) / c.csv).string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometric quorum experiments on sensor deployments"};
    app.require_subcommand(1);
    Options o;
    auto add = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", o.config, "experiment config file")->required();
        sub->add_option("--seed", o.seed, "override the experiment seed");
        sub->add_option("--out", o.out, "output directory")->capture_default_str();
        return sub;
    };
    auto* generate = add("generate", "place nodes and write the triangulation");
    auto* map = add("map", "compute (or load) the spherical embedding and report its quality");
    auto* run = add("run", "simulate every kind and rate, writing CSV rows and heatmaps");
    auto* sweep = add("sweep", "run the cross product of the [sweep] parameters");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    std::signal(SIGINT, on_interrupt);
    try {
        if (generate->parsed()) {
            return cmd_generate(o);
        }
        if (map->parsed()) {
            return cmd_map(o);
        }
        if (run->parsed()) {
            return cmd_run(o, false);
        }
        if (sweep->parsed()) {
            return cmd_run(o, true);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NoConvergence& e) {
        std::cerr << "no convergence: " << e.what() << " (residual " << e.residual() << " after " << e.iterations()
                  << " iterations)\n";
        return 3;
    } catch (const Interrupted&) {
        std::cerr << "interrupted; partial results kept\n";
        return 130;
    } catch (const DegenerateMesh& e) {
        std::cerr << "DegenerateMesh: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
