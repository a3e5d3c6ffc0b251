#include "geoq/experiment.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "geoq/errors.hpp"
#include "geoq/random.hpp"

namespace geoq {
namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

double parse_number(const std::string& key, std::string text) {
    text = trim(text);
    double scale = 1.0;
    if (text.size() >= 2 && text.compare(text.size() - 2, 2, "pi") == 0) {
        scale = kPi;
        text = trim(text.substr(0, text.size() - 2));
        if (text.empty()) {
            return kPi;
        }
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size() || !std::isfinite(v)) {
            throw std::invalid_argument(text);
        }
        return v * scale;
    } catch (const std::logic_error&) {
        throw ConfigError("'" + key + "' expects a number, got '" + text + "'");
    }
}

std::vector<double> parse_numbers(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) {
        out.push_back(parse_number(key, item));
    }
    if (out.empty()) {
        throw ConfigError("'" + key + "' needs at least one value");
    }
    return out;
}

int parse_int(const std::string& key, const std::string& text) {
    const double v = parse_number(key, text);
    if (v != std::floor(v) || std::abs(v) > 2e9) {
        throw ConfigError("'" + key + "' expects an integer, got '" + text + "'");
    }
    return static_cast<int>(v);
}

bool parse_bool(const std::string& key, std::string text) {
    text = trim(text);
    std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
    if (text == "true" || text == "yes" || text == "1" || text == "on") {
        return true;
    }
    if (text == "false" || text == "no" || text == "0" || text == "off") {
        return false;
    }
    throw ConfigError("'" + key + "' expects true or false, got '" + text + "'");
}

std::string format(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double rounded(double v) { return std::stod(format(v)); }

std::string exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<Point2> read_points(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open '" + path.string() + "'");
    }
    std::vector<Point2> pts;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::istringstream ls(line);
        Point2 p;
        if (!(ls >> p.x >> p.y)) {
            throw ConfigError("bad point line '" + line + "' in '" + path.string() + "'");
        }
        pts.push_back(p);
    }
    return pts;
}

const std::map<std::string, std::vector<std::string>>& known_keys() {
    static const std::map<std::string, std::vector<std::string>> keys{
        {"experiment", {"name", "repetitions", "seed"}},
        {"deployment", {"nodes", "region", "side", "polygon", "nodes_file"}},
        {"system", {"kinds", "R_W", "a", "dual", "a_max"}},
        {"workload",
         {"contributors", "queriers", "data_types", "r", "mode", "events", "expected_samples", "read_termination",
          "hash"}},
        {"run", {"robustness_trials", "step_factor", "threads"}},
        {"solver", {"tol", "max_iters", "mobius_every"}},
        {"sweep", {"a", "R_W", "robustness", "r", "nodes", "contributors", "queriers", "scale_R_W"}},
        {"output", {"csv", "svg", "lengths", "cache"}},
    };
    return keys;
}

void set_field(ExperimentConfig& c, const std::string& section, const std::string& key, const std::string& value) {
    const std::string k = section + "." + key;
    if (section == "experiment") {
        if (key == "name") {
            c.name = value;
        } else if (key == "repetitions") {
            c.repetitions = parse_int(k, value);
        } else if (key == "seed") {
            const int s = parse_int(k, value);
            if (s < 0) {
                throw ConfigError("seed must be non-negative");
            }
            c.seed = static_cast<std::uint64_t>(s);
        }
    } else if (section == "deployment") {
        if (key == "nodes") {
            c.nodes = parse_int(k, value);
        } else if (key == "region") {
            c.region = value;
        } else if (key == "side") {
            c.side = parse_number(k, value);
        } else if (key == "polygon") {
            c.polygon_file = value;
        } else if (key == "nodes_file") {
            c.nodes_file = value;
        }
    } else if (section == "system") {
        if (key == "kinds") {
            c.kinds.clear();
            for (const auto& name : split_list(value)) {
                c.kinds.push_back(parse_kind(name));
            }
        } else if (key == "R_W") {
            c.R_W = parse_number(k, value);
        } else if (key == "a") {
            c.a = parse_number(k, value);
        } else if (key == "dual") {
            c.dual = parse_bool(k, value);
        } else if (key == "a_max") {
            c.a_max = parse_number(k, value);
        }
    } else if (section == "workload") {
        if (key == "contributors") {
            c.contributors = parse_int(k, value);
        } else if (key == "queriers") {
            c.queriers = parse_int(k, value);
        } else if (key == "data_types") {
            c.data_types = parse_int(k, value);
        } else if (key == "r") {
            c.rates = parse_numbers(k, value);
        } else if (key == "mode") {
            if (value == "expected") {
                c.mode = Mode::Expected;
            } else if (value == "montecarlo") {
                c.mode = Mode::MonteCarlo;
            } else {
                throw ConfigError("mode must be 'expected' or 'montecarlo'");
            }
        } else if (key == "events") {
            c.events = parse_int(k, value);
        } else if (key == "expected_samples") {
            c.expected_samples = parse_int(k, value);
        } else if (key == "read_termination") {
            if (value == "full") {
                c.termination = ReadTermination::Full;
            } else if (value == "first_hit") {
                c.termination = ReadTermination::FirstHit;
            } else {
                throw ConfigError("read_termination must be 'full' or 'first_hit'");
            }
        } else if (key == "hash") {
            if (value == "auto") {
                c.hash_override.reset();
            } else {
                const auto v = parse_numbers(k, value);
                if (v.size() != 3) {
                    throw ConfigError("hash expects 'auto' or three coordinates");
                }
                try {
                    c.hash_override = UnitVec3(v[0], v[1], v[2]);
                } catch (const DegenerateInput&) {
                    throw ConfigError("hash override must be a nonzero vector");
                }
            }
        }
    } else if (section == "run") {
        if (key == "robustness_trials") {
            c.robustness_trials = parse_int(k, value);
        } else if (key == "step_factor") {
            c.step_factor = parse_number(k, value);
        } else if (key == "threads") {
            c.threads = parse_int(k, value);
        }
    } else if (section == "solver") {
        if (key == "tol") {
            c.solver.tol = parse_number(k, value);
        } else if (key == "max_iters") {
            c.solver.max_iters = parse_int(k, value);
        } else if (key == "mobius_every") {
            c.solver.mobius_every = parse_int(k, value);
        }
    } else if (section == "sweep") {
        if (key == "scale_R_W") {
            c.scale_R_W = parse_bool(k, value);
        } else {
            c.sweep.push_back({key, parse_numbers(k, value)});
        }
    } else if (section == "output") {
        if (key == "csv") {
            c.csv = value;
        } else if (key == "svg") {
            c.svg = value;
        } else if (key == "lengths") {
            c.lengths = value;
        } else if (key == "cache") {
            c.cache_dir = value;
        }
    }
}

void check(const ExperimentConfig& c) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) {
            throw ConfigError(what);
        }
    };
    require(c.repetitions >= 1, "repetitions must be at least 1");
    require(c.nodes >= 3 || !c.nodes_file.empty(), "nodes must be at least 3");
    require(c.region == "square" || c.region == "polygon" || c.region == "hull",
            "region must be 'square', 'polygon' or 'hull'");
    require(c.region != "polygon" || !c.polygon_file.empty(), "polygon region needs a polygon file");
    require(c.side > 0.0, "side must be positive");
    require(!c.kinds.empty(), "kinds must not be empty");
    require(!c.rates.empty(), "r needs at least one value");
    for (double r : c.rates) {
        require(r > 0.0, "r values must be positive");
    }
    require(c.contributors >= 0 && c.queriers >= 0, "contributor and querier counts must be non-negative");
    require(c.data_types >= 1, "data_types must be at least 1");
    require(c.events >= 1 && c.expected_samples >= 1, "events and expected_samples must be at least 1");
    require(c.robustness_trials >= 0, "robustness_trials must be non-negative");
    require(c.step_factor > 0.0, "step_factor must be positive");
    require(c.threads >= 0, "threads must be non-negative");
    require(c.solver.tol > 0.0 && c.solver.max_iters >= 1 && c.solver.mobius_every >= 1,
            "solver settings must be positive");
    require(c.a_max > 0.0, "a_max must be positive");
    for (const auto& axis : c.sweep) {
        require(!axis.values.empty(), "sweep axis '" + axis.parameter + "' has no values");
    }
    for (Kind kind : c.kinds) {
        if (kind == Kind::GeoQuorum && c.sweep.empty()) {
            QuorumSystem{kind, c.R_W, c.a, c.dual}.validate();
        }
    }
}

std::vector<std::string> kind_names(const std::vector<Kind>& kinds) {
    std::vector<std::string> out;
    for (Kind k : kinds) {
        out.emplace_back(kind_name(k));
    }
    return out;
}

template <class T>
std::string join(const std::vector<T>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        if constexpr (std::is_same_v<T, double>) {
            out += exact(items[i]);
        } else {
            out += items[i];
        }
    }
    return out;
}

// Distinct indices drawn without replacement.
std::vector<int> choose(int population, int count, std::mt19937_64& rng) {
    if (count > population) {
        throw ConfigError("cannot choose " + std::to_string(count) + " of " + std::to_string(population) + " nodes");
    }
    std::vector<int> ids(population);
    for (int i = 0; i < population; ++i) {
        ids[i] = i;
    }
    for (int i = 0; i < count; ++i) {
        const int j = i + std::min(population - i - 1, static_cast<int>(unit_interval(rng) * (population - i)));
        std::swap(ids[i], ids[j]);
    }
    ids.resize(count);
    return ids;
}

struct Context {
    Deployment deployment;
    SphericalEmbedding embedding;
    std::vector<DataType> data;
};

struct Setting {
    ExperimentConfig config;
    std::string label;
};

// Cross product of the sweep axes, first axis outermost.
std::vector<Setting> settings(const ExperimentConfig& base, bool with_sweep) {
    std::vector<Setting> out{{base, ""}};
    if (!with_sweep) {
        return out;
    }
    for (const auto& axis : base.sweep) {
        std::vector<Setting> next;
        for (const auto& s : out) {
            for (double v : axis.values) {
                Setting t = s;
                auto& c = t.config;
                const std::string& p = axis.parameter;
                if (p == "a") {
                    const int k = QuorumSystem{Kind::GeoQuorum, c.R_W, c.a}.k();
                    c.a = v;
                    if (c.scale_R_W) {
                        c.R_W = k * v * kPi;
                    }
                } else if (p == "R_W") {
                    c.R_W = v;
                } else if (p == "robustness") {
                    const int k = static_cast<int>(std::lround(v / 2.0));
                    if (k < 1 || std::abs(v - 2.0 * k) > 1e-9) {
                        throw ConfigError("robustness targets must be even and at least 2");
                    }
                    c.a = std::min(c.R_W / (k * kPi), c.a_max);
                    if (QuorumSystem{Kind::GeoQuorum, c.R_W, c.a}.k() != k) {
                        throw ConfigError("a_max too small for robustness target " + format(v));
                    }
                } else if (p == "r") {
                    c.rates = {v};
                } else if (p == "nodes") {
                    c.nodes = static_cast<int>(v);
                } else if (p == "contributors") {
                    c.contributors = static_cast<int>(v);
                } else if (p == "queriers") {
                    c.queriers = static_cast<int>(v);
                } else {
                    throw ConfigError("unknown sweep parameter '" + p + "'");
                }
                t.label = s.label + (s.label.empty() ? "" : "_") + p + format(v);
                next.push_back(std::move(t));
            }
        }
        out = std::move(next);
    }
    for (const auto& s : out) {
        check(s.config);
        for (Kind kind : s.config.kinds) {
            QuorumSystem{kind, s.config.R_W, s.config.a, s.config.dual}.validate();
        }
    }
    return out;
}

fs::path resolve(const fs::path& base, const std::string& file) {
    const fs::path p(file);
    return p.is_absolute() ? p : base / p;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const fs::path& base_dir) {
    pt::ptree tree;
    try {
        // '#' comments are accepted as well as the parser's own ';'.
        std::stringstream cleaned;
        std::string line;
        while (std::getline(in, line)) {
            const std::string t = trim(line);
            cleaned << (t.empty() || t[0] == '#' ? "" : line) << '\n';
        }
        pt::ini_parser::read_ini(cleaned, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }
    ExperimentConfig c;
    c.base_dir = base_dir;
    const auto& keys = known_keys();
    for (const auto& [section, body] : tree) {
        const auto known = keys.find(section);
        if (known == keys.end()) {
            throw ConfigError("unknown section [" + section + "]");
        }
        if (body.empty() && !body.data().empty()) {
            throw ConfigError("key '" + section + "' outside any section");
        }
        for (const auto& [key, value] : body) {
            if (std::find(known->second.begin(), known->second.end(), key) == known->second.end()) {
                throw ConfigError("unknown key '" + key + "' in [" + section + "]");
            }
            set_field(c, section, key, trim(value.data()));
        }
    }
    check(c);
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path.string() + "'");
    }
    return parse_config(in, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

std::string to_text(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "[experiment]\nname = " << c.name << "\nrepetitions = " << c.repetitions << "\nseed = " << c.seed << "\n\n";
    o << "[deployment]\nnodes = " << c.nodes << "\nregion = " << c.region << "\nside = " << exact(c.side) << "\n";
    if (!c.polygon_file.empty()) {
        o << "polygon = " << c.polygon_file << "\n";
    }
    if (!c.nodes_file.empty()) {
        o << "nodes_file = " << c.nodes_file << "\n";
    }
    o << "\n[system]\nkinds = " << join(kind_names(c.kinds)) << "\nR_W = " << exact(c.R_W) << "\na = " << exact(c.a)
      << "\ndual = " << (c.dual ? "true" : "false") << "\na_max = " << exact(c.a_max) << "\n\n";
    o << "[workload]\ncontributors = " << c.contributors << "\nqueriers = " << c.queriers
      << "\ndata_types = " << c.data_types << "\nr = " << join(c.rates)
      << "\nmode = " << (c.mode == Mode::Expected ? "expected" : "montecarlo") << "\nevents = " << c.events
      << "\nexpected_samples = " << c.expected_samples
      << "\nread_termination = " << (c.termination == ReadTermination::Full ? "full" : "first_hit") << "\nhash = ";
    if (c.hash_override) {
        o << join(std::vector<double>{c.hash_override->x(), c.hash_override->y(), c.hash_override->z()});
    } else {
        o << "auto";
    }
    o << "\n\n[run]\nrobustness_trials = " << c.robustness_trials << "\nstep_factor = " << exact(c.step_factor)
      << "\nthreads = " << c.threads << "\n\n";
    o << "[solver]\ntol = " << exact(c.solver.tol) << "\nmax_iters = " << c.solver.max_iters
      << "\nmobius_every = " << c.solver.mobius_every << "\n";
    if (!c.sweep.empty()) {
        o << "\n[sweep]\n";
        for (const auto& axis : c.sweep) {
            o << axis.parameter << " = " << join(axis.values) << "\n";
        }
        o << "scale_R_W = " << (c.scale_R_W ? "true" : "false") << "\n";
    }
    o << "\n[output]\ncsv = " << c.csv << "\n";
    if (!c.svg.empty()) {
        o << "svg = " << c.svg << "\n";
    }
    if (!c.lengths.empty()) {
        o << "lengths = " << c.lengths << "\n";
    }
    if (!c.cache_dir.empty()) {
        o << "cache = " << c.cache_dir << "\n";
    }
    return o.str();
}

Deployment generate_deployment(const ExperimentConfig& c, std::uint64_t seed) {
    Deployment d;
    if (c.region == "polygon") {
        d.region = read_points(resolve(c.base_dir, c.polygon_file));
        if (d.region.size() < 3) {
            throw ConfigError("polygon needs at least three vertices");
        }
    } else {
        d.region = {{0, 0}, {c.side, 0}, {c.side, c.side}, {0, c.side}};
    }
    if (!c.nodes_file.empty()) {
        d.nodes = read_points(resolve(c.base_dir, c.nodes_file));
    } else {
        double x0 = d.region[0].x, x1 = x0, y0 = d.region[0].y, y1 = y0;
        for (const auto& p : d.region) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
        }
        std::mt19937_64 rng(substream({seed, 0x6465706cULL}));
        while (static_cast<int>(d.nodes.size()) < c.nodes) {
            const Point2 p{x0 + (x1 - x0) * unit_interval(rng), y0 + (y1 - y0) * unit_interval(rng)};
            if (p.x > x0 && p.y > y0 && point_in_polygon(p, d.region)) {
                d.nodes.push_back(p);
            }
        }
    }
    try {
        if (c.region == "hull") {
            d.mesh = refine_boundary_chords(triangulate(d.nodes));
            d.region.clear();
            for (int v : d.mesh.boundary) {
                d.region.push_back(d.mesh.vertices[v]);
            }
        } else {
            d.mesh = refine_boundary_chords(triangulate(d.nodes, d.region));
        }
    } catch (const DegenerateInput& e) {
        throw DegenerateMesh(std::string("deployment cannot be triangulated: ") + e.what());
    }
    return d;
}

fs::path cache_directory(const ExperimentConfig& c, const fs::path& out_dir) {
    if (const char* env = std::getenv("GEOQ_CACHE_DIR"); env && *env) {
        return env;
    }
    if (!c.cache_dir.empty()) {
        return resolve(c.base_dir, c.cache_dir);
    }
    return out_dir / "cache";
}

SphericalEmbedding embed(const PlanarMesh& mesh, const SolverOptions& solver, const std::optional<fs::path>& cache_dir,
                         bool* cache_hit) {
    if (cache_hit) {
        *cache_hit = false;
    }
    fs::path file;
    if (cache_dir) {
        std::ostringstream key;
        write_mesh(key, mesh);
        key << mesh.node_count << ' ' << exact(solver.tol) << ' ' << solver.max_iters << ' ' << solver.mobius_every;
        char name[40];
        std::snprintf(name, sizeof name, "emb_%016llx.txt", static_cast<unsigned long long>(fnv1a64(key.str())));
        file = *cache_dir / name;
        if (std::ifstream in(file); in) {
            try {
                auto emb = read_embedding(in, mesh.node_count);
                if (emb.converged && original_mesh(emb.mesh).triangles == mesh.triangles) {
                    if (cache_hit) {
                        *cache_hit = true;
                    }
                    return emb;
                }
            } catch (const Error&) {
                // Unreadable cache entries are recomputed and overwritten.
            }
        }
    }
    auto emb = harmonic_sphere_map(double_cover(mesh), solver);
    require_converged(emb);
    if (cache_dir) {
        fs::create_directories(*cache_dir);
        const fs::path tmp = file.string() + ".tmp";
        {
            std::ofstream out(tmp);
            write_embedding(out, emb);
            if (!out) {
                throw Error("cannot write cache file '" + tmp.string() + "'");
            }
        }
        fs::rename(tmp, file);
    }
    return emb;
}

std::string csv_header() {
    return "experiment_id,kind,r,a,R_W,seed,system_load,total_load,robustness_geometric,robustness_discrete,"
           "runtime_ms";
}

std::string csv_line(const ResultRow& r) {
    return r.experiment_id + "," + std::string(kind_name(r.kind)) + "," + format(r.r) + "," + format(r.a) + "," +
           format(r.R_W) + "," + r.seed + "," + format(r.system_load) + "," + format(r.total_load) + "," +
           format(r.robustness_geometric) + "," + format(r.robustness_discrete) + "," + format(r.runtime_ms);
}

std::string csv_partial_line() { return "partial,,,,,,,,,,"; }

std::pair<ResultRow, ResultRow> aggregate(const std::vector<ResultRow>& rows) {
    if (rows.empty()) {
        throw Error("cannot aggregate an empty group");
    }
    ResultRow mean = rows.front(), dev = rows.front();
    mean.seed = "mean";
    dev.seed = "stddev";
    using Field = double ResultRow::*;
    const Field fields[] = {&ResultRow::system_load, &ResultRow::total_load, &ResultRow::robustness_geometric,
                            &ResultRow::robustness_discrete, &ResultRow::runtime_ms};
    const double n = static_cast<double>(rows.size());
    for (Field f : fields) {
        // Aggregates use the values as printed so they can be recomputed from the file.
        double sum = 0.0;
        for (const auto& r : rows) {
            sum += rounded(r.*f);
        }
        const double m = sum / n;
        double ss = 0.0;
        for (const auto& r : rows) {
            ss += (rounded(r.*f) - m) * (rounded(r.*f) - m);
        }
        mean.*f = m;
        dev.*f = rows.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    return {mean, dev};
}

std::string ramp_color(double t) {
    static const int stops[5][3] = {{0x44, 0x01, 0x54}, {0x3b, 0x52, 0x8b}, {0x21, 0x91, 0x8c}, {0x5e, 0xc9, 0x62},
                                    {0xfd, 0xe7, 0x25}};
    t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 4.0;
    const int i = std::min(3, static_cast<int>(t));
    const double f = t - i;
    char buf[8];
    int rgb[3];
    for (int c = 0; c < 3; ++c) {
        rgb[c] = static_cast<int>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
    }
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

void write_heatmap(std::ostream& out, const Deployment& d, const LoadMap& load) {
    double x0 = d.region[0].x, x1 = x0, y0 = d.region[0].y, y1 = y0;
    for (const auto& p : d.region) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    const double lo = load.empty() ? 0.0 : *std::min_element(load.begin(), load.end());
    const double hi = load.empty() ? 0.0 : *std::max_element(load.begin(), load.end());
    const double area = std::abs(signed_area(d.region));
    const double radius = 0.4 * std::sqrt(area / std::max<std::size_t>(1, d.nodes.size()));
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << format(x0) << ' ' << format(y0) << ' '
        << format(x1 - x0) << ' ' << format(y1 - y0) << "\">\n";
    out << "<desc>node load, min " << format(lo) << " max " << format(hi)
        << "; ramp #440154 #3b528b #21918c #5ec962 #fde725</desc>\n";
    out << "<g transform=\"matrix(1 0 0 -1 0 " << format(y0 + y1) << ")\">\n";
    out << "<polygon fill=\"none\" stroke=\"#888888\" stroke-width=\"" << format(radius / 4) << "\" points=\"";
    for (std::size_t i = 0; i < d.region.size(); ++i) {
        out << (i ? " " : "") << format(d.region[i].x) << ',' << format(d.region[i].y);
    }
    out << "\"/>\n";
    for (std::size_t n = 0; n < d.nodes.size(); ++n) {
        const double t = hi > lo ? (load[n] - lo) / (hi - lo) : 0.0;
        out << "<circle cx=\"" << format(d.nodes[n].x) << "\" cy=\"" << format(d.nodes[n].y) << "\" r=\""
            << format(radius) << "\" fill=\"" << ramp_color(t) << "\"/>\n";
    }
    out << "</g>\n</svg>\n";
}

void run_experiment(const ExperimentConfig& config, const fs::path& out_dir, bool with_sweep,
                    const RunControl& control) {
    if (with_sweep && config.sweep.empty()) {
        throw ConfigError("sweep needs a [sweep] section with at least one parameter");
    }
    const auto points = settings(config, with_sweep);
    fs::create_directories(out_dir);
    const fs::path csv_path = resolve(out_dir, config.csv);
    if (csv_path.has_parent_path()) {
        fs::create_directories(csv_path.parent_path());
    }
    std::ofstream csv(csv_path);
    if (!csv) {
        throw Error("cannot write '" + csv_path.string() + "'");
    }
    auto log = [&](const std::string& msg) {
        if (control.log) {
            control.log(msg);
        }
    };
    const fs::path cache = cache_directory(config, out_dir);
    std::map<std::pair<std::string, std::uint64_t>, Context> contexts;
    std::vector<std::string> length_rows;

    auto context = [&](const ExperimentConfig& c, std::uint64_t seed) -> const Context& {
        const std::pair<std::string, std::uint64_t> key{std::to_string(c.nodes) + "/" + std::to_string(c.contributors) +
                                                            "/" + std::to_string(c.queriers),
                                                        seed};
        auto it = contexts.find(key);
        if (it != contexts.end()) {
            return it->second;
        }
        Context ctx;
        ctx.deployment = generate_deployment(c, seed);
        bool hit = false;
        ctx.embedding = embed(ctx.deployment.mesh, c.solver, cache, &hit);
        log("deployment seed " + std::to_string(seed) + ": " + std::to_string(ctx.deployment.nodes.size()) +
            " nodes, embedding " + (hit ? "from cache" : "solved") + ", residual " + format(ctx.embedding.residual));
        const int n = static_cast<int>(ctx.deployment.nodes.size());
        for (int i = 0; i < c.data_types; ++i) {
            const std::string id = "d" + std::to_string(i);
            std::mt19937_64 rng(substream({seed, 0x726f6c65ULL, static_cast<std::uint64_t>(i)}));
            DataType d;
            d.id = id;
            d.hash_point = hash_location(id, seed, c.hash_override);
            d.contributors = choose(n, c.contributors, rng);
            d.queriers = choose(n, c.queriers, rng);
            ctx.data.push_back(std::move(d));
        }
        return contexts.emplace(key, std::move(ctx)).first->second;
    };

    try {
        csv << csv_header() << '\n';
        for (const auto& point : points) {
            const ExperimentConfig& c = point.config;
            if (!config.lengths.empty() &&
                std::find(c.kinds.begin(), c.kinds.end(), Kind::GeoQuorum) != c.kinds.end()) {
                const QuorumSystem s{Kind::GeoQuorum, c.R_W, c.a, c.dual};
                const double write_len = curve_length(circle_with_radius(UnitVec3(0, 0, 1), c.R_W));
                const double read_len = curve_length(spiral_for(UnitVec3(0, 0, 1), c.a, 0.0));
                const double robustness = 2.0 * s.k();
                length_rows.push_back(format(c.a) + "," + format(c.R_W) + "," + std::to_string(s.k()) + "," +
                                      format(write_len) + "," + format(read_len) + "," +
                                      format(write_len / robustness) + "," + format(read_len / robustness));
            }
            for (Kind kind : c.kinds) {
                const QuorumSystem system{kind, c.R_W, c.a, c.dual};
                const bool geo = kind == Kind::GeoQuorum;
                for (double r : c.rates) {
                    std::vector<ResultRow> rows;
                    for (int rep = 0; rep < c.repetitions; ++rep) {
                        if (control.stop && control.stop->load()) {
                            throw Interrupted();
                        }
                        const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(rep);
                        const Context& ctx = context(c, seed);
                        Workload w;
                        w.data_types = ctx.data;
                        w.write_rate = r;
                        w.mode = c.mode;
                        w.events = c.events;
                        w.expected_samples = c.expected_samples;
                        w.termination = c.termination;
                        SimOptions opts;
                        opts.step_factor = c.step_factor;
                        opts.robustness_trials = c.robustness_trials;
                        opts.threads = c.threads;
                        const auto start = std::chrono::steady_clock::now();
                        const RunResult result = run(w, system, ctx.embedding, seed, opts);
                        const auto ms = std::chrono::duration<double, std::milli>(
                                            std::chrono::steady_clock::now() - start)
                                            .count();
                        ResultRow row;
                        row.experiment_id = c.name;
                        row.kind = kind;
                        row.r = r;
                        row.a = geo ? c.a : 0.0;
                        row.R_W = geo ? c.R_W : 0.0;
                        row.seed = std::to_string(seed);
                        row.system_load = result.metrics.system_load;
                        row.total_load = result.metrics.total_load;
                        row.robustness_geometric = result.metrics.robustness_geometric;
                        row.robustness_discrete = result.metrics.robustness_discrete;
                        row.runtime_ms = ms;
                        rows.push_back(row);
                        if (!c.svg.empty() && rep == 0) {
                            const fs::path svg = resolve(out_dir, c.svg + "_" + std::string(kind_name(kind)) + "_r" +
                                                                      format(r) +
                                                                      (point.label.empty() ? "" : "_" + point.label) +
                                                                      ".svg");
                            std::ofstream out(svg);
                            write_heatmap(out, ctx.deployment, result.load);
                        }
                        log(std::string(kind_name(kind)) + " r=" + format(r) + " seed " + std::to_string(seed) +
                            (point.label.empty() ? "" : " " + point.label) + ": system_load " +
                            format(row.system_load) + ", total_load " + format(row.total_load));
                    }
                    for (const auto& row : rows) {
                        csv << csv_line(row) << '\n';
                    }
                    const auto [mean, dev] = aggregate(rows);
                    csv << csv_line(mean) << '\n' << csv_line(dev) << '\n';
                    csv.flush();
                }
            }
        }
    } catch (...) {
        csv << csv_partial_line() << '\n';
        csv.flush();
        throw;
    }
    if (!config.lengths.empty()) {
        std::ofstream out(resolve(out_dir, config.lengths));
        out << "a,R_W,k,write_length,read_length,write_length_per_robustness,read_length_per_robustness\n";
        for (const auto& row : length_rows) {
            out << row << '\n';
        }
    }
}

}  // namespace geoq
