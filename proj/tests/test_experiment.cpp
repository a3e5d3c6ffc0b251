#include <atomic>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "geoq/errors.hpp"
#include "geoq/experiment.hpp"

using namespace geoq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    static const std::string run = std::to_string(std::random_device{}());
    const fs::path p = fs::temp_directory_path() / ("geoq_test_" + run) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ExperimentConfig parse(const std::string& text, const fs::path& base = ".") {
    std::istringstream in(text);
    return parse_config(in, base);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            cells.push_back(cell);
        }
        if (!line.empty() && line.back() == ',') {
            cells.emplace_back();
        }
        rows.push_back(cells);
    }
    return rows;
}

// CSV text without the runtime column.
std::string without_runtime(const fs::path& p) {
    std::string out;
    for (const auto& row : csv_rows(p)) {
        for (std::size_t i = 0; i + 1 < row.size(); ++i) {
            out += row[i] + ",";
        }
        out += "\n";
    }
    return out;
}

// Even-odd ray casting, written independently of the library's test.
bool inside_polygon(const Point2& p, const std::vector<Point2>& poly) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
            in = !in;
        }
    }
    return in;
}

const char* kSmall = R"(
[experiment]
name = small
repetitions = 2
seed = 3
[deployment]
nodes = 300
[system]
kinds = QG, GeoQuorum
R_W = 0.2pi
a = 0.2
[workload]
contributors = 20
queriers = 5
r = 4
[run]
robustness_trials = 3
)";

}  // namespace

TEST_CASE("config parsing") {
    const auto c = parse(R"(
# comment
; another comment
[experiment]
name = demo
seed = 9
[system]
kinds = qg, GeoQuorum
R_W = 0.3pi
a = 0.15
dual = yes
[workload]
r = 2, 5.5
mode = montecarlo
events = 7
hash = 0, 0, 2
read_termination = first_hit
[sweep]
robustness = 2, 4
)");
    CHECK(c.name == "demo");
    CHECK(c.seed == 9);
    CHECK(c.kinds == std::vector<Kind>{Kind::QG, Kind::GeoQuorum});
    CHECK(c.R_W == doctest::Approx(0.3 * kPi));
    CHECK(c.dual);
    CHECK(c.rates == std::vector<double>{2, 5.5});
    CHECK(c.mode == Mode::MonteCarlo);
    CHECK(c.events == 7);
    REQUIRE(c.hash_override);
    CHECK(c.hash_override->z() == 1.0);
    CHECK(c.termination == ReadTermination::FirstHit);
    REQUIRE(c.sweep.size() == 1);
    CHECK(c.sweep[0].parameter == "robustness");

    const auto defaults = parse("");
    CHECK(defaults.nodes == 2000);
    CHECK(defaults.contributors == 100);
    CHECK(defaults.queriers == 20);
    CHECK(defaults.repetitions == 10);
    CHECK(defaults.rates == std::vector<double>{4, 6, 8, 10});
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse("[bogus]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[system]\ncolour = red\n"), ConfigError);
    CHECK_THROWS_AS(parse("[system]\nkinds = QX\n"), ConfigError);
    CHECK_THROWS_AS(parse("[system]\nR_W = wide\n"), ConfigError);
    CHECK_THROWS_AS(parse("[system]\nkinds = GeoQuorum\nR_W = 0.1pi\na = 0.2\n"), ConfigError);
    CHECK_THROWS_AS(parse("[workload]\nr =\n"), ConfigError);
    CHECK_THROWS_AS(parse("[workload]\nr = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[experiment]\nrepetitions = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse("[deployment]\nregion = circle\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/geoq.conf"), ConfigError);
}

TEST_CASE("configs serialize and parse back unchanged") {
    auto c = parse(kSmall);
    c.sweep.push_back({"a", {0.05, 0.1}});
    c.hash_override = UnitVec3(0, 1, 0);
    c.svg = "map";
    const std::string text = to_text(c);
    CHECK(to_text(parse(text)) == text);
}

TEST_CASE("square deployments") {
    auto c = parse("[deployment]\nnodes = 2000\n");
    const auto d = generate_deployment(c, 1);
    CHECK(d.nodes.size() == 2000);
    for (const auto& p : d.nodes) {
        CHECK((p.x > 0 && p.x < 1 && p.y > 0 && p.y < 1));
    }
    CHECK(d.mesh.euler_characteristic() == 1);
    CHECK(d.mesh.node_count == 2000);
    validate(d.mesh);

    std::ostringstream a, b;
    write_mesh(a, d.mesh);
    write_mesh(b, generate_deployment(c, 1).mesh);
    CHECK(a.str() == b.str());
    std::ostringstream other;
    write_mesh(other, generate_deployment(c, 2).mesh);
    CHECK(other.str() != a.str());
}

TEST_CASE("polygon deployments stay inside the polygon") {
    const auto dir = scratch("poly");
    const std::vector<Point2> l{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
    {
        std::ofstream out(dir / "l.poly");
        for (const auto& p : l) {
            out << p.x << ' ' << p.y << '\n';
        }
    }
    const auto c = parse("[deployment]\nnodes = 500\nregion = polygon\npolygon = l.poly\n", dir);
    const auto d = generate_deployment(c, 4);
    CHECK(d.nodes.size() == 500);
    for (const auto& p : d.nodes) {
        CHECK(inside_polygon(p, l));
    }
    CHECK(d.mesh.euler_characteristic() == 1);
}

TEST_CASE("collinear deployments are degenerate meshes") {
    const auto dir = scratch("collinear");
    {
        std::ofstream out(dir / "line.txt");
        for (int i = 1; i < 10; ++i) {
            out << 0.1 * i << ' ' << 0.5 << '\n';
        }
    }
    const auto c = parse("[deployment]\nregion = hull\nnodes_file = line.txt\n", dir);
    CHECK_THROWS_AS(generate_deployment(c, 1), DegenerateMesh);
}

TEST_CASE("embedding cache") {
    const auto dir = scratch("cache");
    const auto c = parse("[deployment]\nnodes = 400\n");
    const auto d = generate_deployment(c, 1);
    bool hit = true;
    const auto first = embed(d.mesh, c.solver, dir, &hit);
    CHECK_FALSE(hit);
    const auto second = embed(d.mesh, c.solver, dir, &hit);
    CHECK(hit);
    CHECK(first.positions == second.positions);
    CHECK(first.residual == second.residual);

    SolverOptions starved;
    starved.max_iters = 1;
    CHECK_THROWS_AS(embed(d.mesh, starved, dir), NoConvergence);

    const auto out = scratch("cache_out");
    ::setenv("GEOQ_CACHE_DIR", "/tmp/elsewhere", 1);
    CHECK(cache_directory(c, out) == fs::path("/tmp/elsewhere"));
    ::unsetenv("GEOQ_CACHE_DIR");
    CHECK(cache_directory(c, out) == out / "cache");
}

TEST_CASE("color ramp") {
    CHECK(ramp_color(0.0) == "#440154");
    CHECK(ramp_color(0.25) == "#3b528b");
    CHECK(ramp_color(0.5) == "#21918c");
    CHECK(ramp_color(0.75) == "#5ec962");
    CHECK(ramp_color(1.0) == "#fde725");
    CHECK(ramp_color(-3.0) == "#440154");
    CHECK(ramp_color(7.0) == "#fde725");
}

TEST_CASE("aggregate rows") {
    std::vector<ResultRow> rows(3);
    const double loads[] = {1.0, 2.0, 6.0};
    for (int i = 0; i < 3; ++i) {
        rows[i].experiment_id = "x";
        rows[i].seed = std::to_string(i);
        rows[i].system_load = loads[i];
        rows[i].total_load = 10.0 * loads[i];
    }
    const auto [mean, dev] = aggregate(rows);
    CHECK(mean.seed == "mean");
    CHECK(dev.seed == "stddev");
    CHECK(mean.system_load == 3.0);
    CHECK(dev.system_load == doctest::Approx(std::sqrt(7.0)));
    CHECK(mean.total_load == 30.0);
    CHECK(csv_header().rfind("experiment_id,kind,r,a,R_W,seed,", 0) == 0);
}

TEST_CASE("run writes one row per seed plus aggregates, reproducibly") {
    const auto dir = scratch("run");
    auto c = parse(kSmall);
    c.svg = "heat";
    run_experiment(c, dir / "a", false);
    run_experiment(c, dir / "b", false);
    CHECK(without_runtime(dir / "a" / "results.csv") == without_runtime(dir / "b" / "results.csv"));

    const auto rows = csv_rows(dir / "a" / "results.csv");
    REQUIRE(rows.size() == 1 + 2 * (2 + 2));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].size() == 11);
    }
    // Aggregates recomputed from the printed rows match the printed aggregates.
    for (std::size_t g = 0; g < 2; ++g) {
        const auto& r1 = rows[1 + 4 * g];
        const auto& r2 = rows[2 + 4 * g];
        const auto& mean = rows[3 + 4 * g];
        const auto& dev = rows[4 + 4 * g];
        CHECK(mean[5] == "mean");
        CHECK(dev[5] == "stddev");
        for (int col : {6, 7, 8, 9}) {
            const double x = std::stod(r1[col]), y = std::stod(r2[col]);
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6g", (x + y) / 2.0);
            CHECK(mean[col] == buf);
            const double m = (x + y) / 2.0;
            std::snprintf(buf, sizeof buf, "%.6g", std::sqrt((x - m) * (x - m) + (y - m) * (y - m)));
            CHECK(dev[col] == buf);
        }
    }

    // The heatmap is XML with one colored marker per node.
    const fs::path svg = dir / "a" / "heat_QG_r4.svg";
    REQUIRE(fs::exists(svg));
    boost::property_tree::ptree tree;
    boost::property_tree::read_xml(svg.string(), tree);
    CHECK(tree.get<std::string>("svg.<xmlattr>.viewBox") == "0 0 1 1");
    int circles = 0;
    for (const auto& [tag, child] : tree.get_child("svg.g")) {
        if (tag == "circle") {
            ++circles;
            CHECK(child.get<std::string>("<xmlattr>.fill").size() == 7);
        }
    }
    CHECK(circles == 300);
}

TEST_CASE("sweeps batch single runs") {
    const auto dir = scratch("sweep");
    auto c = parse(kSmall);
    c.kinds = {Kind::GeoQuorum};
    c.repetitions = 1;
    c.sweep = {{"a", {0.1, 0.2}}};
    run_experiment(c, dir / "sweep", true);
    const auto swept = csv_rows(dir / "sweep" / "results.csv");
    CHECK(swept.size() == 1 + 2 * 3);
    CHECK(swept[1][3] == "0.1");
    CHECK(swept[4][3] == "0.2");

    c.sweep = {{"a", {0.2}}};
    run_experiment(c, dir / "one", true);
    run_experiment(c, dir / "plain", false);
    CHECK(without_runtime(dir / "one" / "results.csv") == without_runtime(dir / "plain" / "results.csv"));

    auto no_sweep = parse(kSmall);
    CHECK_THROWS_AS(run_experiment(no_sweep, dir / "none", true), ConfigError);
}

TEST_CASE("robustness sweeps derive a from the target") {
    const auto dir = scratch("robust");
    auto c = parse(kSmall);
    c.kinds = {Kind::GeoQuorum};
    c.repetitions = 1;
    c.robustness_trials = 0;
    c.R_W = 0.6 * kPi;
    c.sweep = {{"robustness", {2, 4, 6}}};
    run_experiment(c, dir, true);
    const auto rows = csv_rows(dir / "results.csv");
    REQUIRE(rows.size() == 1 + 3 * 3);
    CHECK(std::stod(rows[1][3]) == doctest::Approx(0.49));
    CHECK(std::stod(rows[4][3]) == doctest::Approx(0.3));
    CHECK(std::stod(rows[7][3]) == doctest::Approx(0.2));
    c.sweep = {{"robustness", {3}}};
    CHECK_THROWS_AS(run_experiment(c, dir, true), ConfigError);
}

TEST_CASE("interrupted runs leave a partial marker") {
    const auto dir = scratch("stop");
    std::atomic<bool> stop{true};
    RunControl control;
    control.stop = &stop;
    CHECK_THROWS_AS(run_experiment(parse(kSmall), dir, false, control), Interrupted);
    const auto rows = csv_rows(dir / "results.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows.back()[0] == "partial");
}

TEST_CASE("load tuning lengths") {
    const auto dir = scratch("lengths");
    auto c = parse(kSmall);
    c.kinds = {Kind::GeoQuorum};
    c.repetitions = 1;
    c.robustness_trials = 0;
    c.lengths = "lengths.csv";
    c.scale_R_W = true;
    c.sweep = {{"a", {0.025, 0.1, 0.3}}};
    run_experiment(c, dir, true);
    const auto rows = csv_rows(dir / "lengths.csv");
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i][2] == "1");
    }
    for (std::size_t i = 2; i < rows.size(); ++i) {
        CHECK(std::stod(rows[i][5]) > std::stod(rows[i - 1][5]));
        CHECK(std::stod(rows[i][6]) < std::stod(rows[i - 1][6]));
    }
}
