#include "sktomo/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sktomo/raw_io.hpp"
#include "sktomo/rng.hpp"

namespace fs = std::filesystem;

namespace sktomo {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* geometry_kind_name(GeometryKind k) {
    return k == GeometryKind::parallel ? "parallel" : "fan";
}

GeometryKind geometry_kind_from_name(const std::string& name) {
    if (name == "parallel") return GeometryKind::parallel;
    if (name == "fan") return GeometryKind::fan;
    throw std::invalid_argument("unknown geometry kind '" + name +
                                "' (expected parallel or fan)");
}

struct Ellipse {
    double intensity, a, b, x0, y0, phi;  // phi in radians
};

void add_ellipses(Image& img, const std::vector<Ellipse>& ellipses) {
    const int side = img.side();
    for (const Ellipse& e : ellipses) {
        const double ct = std::cos(e.phi), st = std::sin(e.phi);
        for (int i = 0; i < side; ++i) {
            const double y = 1.0 - 2.0 * (i + 0.5) / side;
            for (int j = 0; j < side; ++j) {
                const double x = -1.0 + 2.0 * (j + 0.5) / side;
                const double dx = x - e.x0, dy = y - e.y0;
                const double u = dx * ct + dy * st;
                const double v = -dx * st + dy * ct;
                if ((u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0)
                    img.at(i, j) += e.intensity;
            }
        }
    }
}

constexpr double kDeg = 3.141592653589793 / 180.0;

}  // namespace

// ---------------------------------------------------------------------------
// Phantoms
// ---------------------------------------------------------------------------

const char* phantom_kind_name(PhantomKind k) {
    return k == PhantomKind::shepp_logan ? "shepp_logan" : "random_ellipses";
}

PhantomKind phantom_kind_from_name(const std::string& name) {
    if (name == "shepp_logan") return PhantomKind::shepp_logan;
    if (name == "random_ellipses") return PhantomKind::random_ellipses;
    throw std::invalid_argument("unknown phantom kind '" + name +
                                "' (expected shepp_logan or random_ellipses)");
}

Image generate_phantom(const PhantomSpec& spec) {
    if (spec.grid_side < 1) throw std::invalid_argument("phantom: grid side must be >= 1");
    Image img(spec.grid_side, 0.0);
    if (spec.kind == PhantomKind::shepp_logan) {
        // Standard head-phantom ellipse table with the low-contrast intensity
        // variant, so the summed values already lie in [0, 1].
        static const std::vector<Ellipse> head = {
            {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
            {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
            {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0 * kDeg},
            {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0 * kDeg},
            {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
            {0.1, 0.0460, 0.0460, 0.0, 0.10, 0.0},
            {0.1, 0.0460, 0.0460, 0.0, -0.10, 0.0},
            {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
            {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
            {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
        };
        add_ellipses(img, head);
    } else {
        if (spec.num_ellipses < 0)
            throw std::invalid_argument("phantom: ellipse count must be >= 0");
        Rng rng(spec.seed);
        std::vector<Ellipse> ellipses;
        ellipses.reserve(std::size_t(spec.num_ellipses));
        for (int n = 0; n < spec.num_ellipses; ++n) {
            Ellipse e;
            e.x0 = rng.uniform(-0.55, 0.55);
            e.y0 = rng.uniform(-0.55, 0.55);
            e.a = rng.uniform(0.08, 0.40);
            e.b = rng.uniform(0.08, 0.40);
            e.phi = rng.uniform(0.0, 3.141592653589793);
            // The first ellipse is a positive body; later ones may subtract,
            // carving holes and internal structure.
            e.intensity = (n == 0) ? rng.uniform(0.3, 0.7) : rng.uniform(-0.35, 0.55);
            ellipses.push_back(e);
        }
        add_ellipses(img, ellipses);
    }
    for (double& v : img.values) v = std::clamp(v, 0.0, 1.0);
    return img;
}

// ---------------------------------------------------------------------------
// Measurement simulation
// ---------------------------------------------------------------------------

Sinogram simulate_measurements(const ProjectionOperator& op, const Image& x,
                               const NoiseSpec& noise) {
    if (!(noise.I0 > 0.0)) throw std::invalid_argument("noise: I0 must be > 0");
    if (!(noise.attenuation_scale > 0.0) || !std::isfinite(noise.attenuation_scale))
        throw std::invalid_argument("noise: attenuation scale must be a positive finite value");
    CostLedger scratch;
    Sinogram b = forward_project(op, x, scratch);
    if (!b.all_finite()) throw std::runtime_error("simulate_measurements: projection not finite");
    if (!noise.enabled) return b;
    // The attenuation scale maps line integrals (pixel-unit path lengths) to
    // physical attenuation before the photon statistics are drawn; without it,
    // thick paths through a [0,1]-valued image exceed log(I0) and every such
    // ray saturates at the one-photon floor, destroying the measurement.
    const double s = noise.attenuation_scale;
    Rng rng(noise.seed);
    const double log_i0 = std::log(noise.I0);
    for (double& v : b.values) {
        const double lambda = noise.I0 * std::exp(-s * v);
        double counts = rng.poisson(lambda);
        if (counts < 1.0) counts = 1.0;  // keep the log finite at zero photons
        v = (log_i0 - std::log(counts)) / s;
    }
    return b;
}

// ---------------------------------------------------------------------------
// Dataset persistence
// ---------------------------------------------------------------------------

namespace {

std::string item_name(std::size_t index, const char* part) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "item%04zu.%s.uskd", index, part);
    return buf;
}

[[noreturn]] void dataset_fail(const std::string& dir, const std::string& why) {
    throw std::runtime_error("dataset '" + dir + "': " + why);
}

}  // namespace

void save_dataset(const std::string& dir, const Dataset& ds) {
    if (ds.grid_side < 1) throw std::invalid_argument("save_dataset: grid side must be >= 1");
    fs::create_directories(dir);
    KvConfig manifest;
    manifest.set("format", "sktomo-dataset-v1");
    manifest.set_int("count", (long long)ds.samples.size());
    manifest.set_int("grid_side", ds.grid_side);
    geometry_to_config(manifest, ds.geom);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const TrainSample& s = ds.samples[i];
        const std::string sino_name = item_name(i, "sino");
        const std::string truth_name = item_name(i, "truth");
        write_sinogram_raw((fs::path(dir) / sino_name).string(), s.measurements);
        write_image_raw((fs::path(dir) / truth_name).string(), s.truth);
        manifest.set("checksum." + sino_name,
                     hex64(fnv1a64_file((fs::path(dir) / sino_name).string())));
        manifest.set("checksum." + truth_name,
                     hex64(fnv1a64_file((fs::path(dir) / truth_name).string())));
    }
    manifest.write((fs::path(dir) / "manifest.txt").string());
}

Dataset load_dataset(const std::string& dir) {
    const std::string manifest_path = (fs::path(dir) / "manifest.txt").string();
    if (!fs::exists(manifest_path)) dataset_fail(dir, "missing manifest.txt");
    KvConfig manifest = KvConfig::parse_file(manifest_path);
    if (manifest.get_string("format", "") != "sktomo-dataset-v1")
        dataset_fail(dir, "unsupported format '" + manifest.get_string("format", "<absent>") +
                              "' (expected sktomo-dataset-v1)");
    Dataset ds;
    ds.geom = geometry_from_config(manifest);
    ds.grid_side = int(manifest.get_int("grid_side"));
    const long long count = manifest.get_int("count");
    if (count < 0) dataset_fail(dir, "negative item count");

    // Consistency: the payload files present must be exactly the ones listed.
    std::size_t payload_files = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("item", 0) == 0 && name.size() > 5 &&
            name.substr(name.size() - 5) == ".uskd")
            ++payload_files;
    }
    if (payload_files != std::size_t(count) * 2)
        dataset_fail(dir, "manifest lists " + std::to_string(count) + " items but " +
                              std::to_string(payload_files) + " payload files are present");

    ds.samples.reserve(std::size_t(count));
    for (std::size_t i = 0; i < std::size_t(count); ++i) {
        for (const char* part : {"sino", "truth"}) {
            const std::string name = item_name(i, part);
            const std::string path = (fs::path(dir) / name).string();
            if (!fs::exists(path)) dataset_fail(dir, "missing file '" + name + "'");
            const std::string key = "checksum." + name;
            if (!manifest.has(key)) dataset_fail(dir, "manifest lacks a checksum for '" + name + "'");
            const std::string want = manifest.get_string(key);
            const std::string got = hex64(fnv1a64_file(path));
            if (want != got)
                dataset_fail(dir, "checksum mismatch for '" + name + "' (manifest " + want +
                                      ", file " + got + ")");
        }
        TrainSample s;
        s.measurements = read_sinogram_raw((fs::path(dir) / item_name(i, "sino")).string());
        s.truth = read_image_raw((fs::path(dir) / item_name(i, "truth")).string());
        if (s.measurements.num_angles != ds.geom.num_angles ||
            s.measurements.num_detectors != ds.geom.num_detectors)
            dataset_fail(dir, "'" + item_name(i, "sino") + "' shape disagrees with the geometry");
        if (s.truth.side() != ds.grid_side)
            dataset_fail(dir, "'" + item_name(i, "truth") + "' shape disagrees with grid_side");
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Flat key:value configuration
// ---------------------------------------------------------------------------

KvConfig KvConfig::parse_text(const std::string& text, const std::string& origin) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t colon = t.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("config '" + origin + "' line " + std::to_string(lineno) +
                                        ": expected 'key: value'");
        const std::string key = trim(t.substr(0, colon));
        const std::string value = trim(t.substr(colon + 1));
        if (key.empty())
            throw std::invalid_argument("config '" + origin + "' line " + std::to_string(lineno) +
                                        ": empty key");
        if (cfg.kv_.count(key))
            throw std::invalid_argument("config '" + origin + "' line " + std::to_string(lineno) +
                                        ": duplicate key '" + key + "'");
        cfg.kv_[key] = value;
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("config '" + path + "': cannot open");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

void KvConfig::set(const std::string& key, const std::string& value) { kv_[key] = value; }
void KvConfig::set_int(const std::string& key, long long v) { kv_[key] = std::to_string(v); }
void KvConfig::set_u64(const std::string& key, std::uint64_t v) { kv_[key] = std::to_string(v); }
void KvConfig::set_double(const std::string& key, double v) { kv_[key] = format_double(v); }
void KvConfig::set_bool(const std::string& key, bool v) { kv_[key] = v ? "true" : "false"; }

std::string KvConfig::get_string(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw std::invalid_argument("config: missing required key '" + key + "'");
    return it->second;
}

long long KvConfig::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    const long long r = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw std::invalid_argument("config key '" + key + "': not an integer: '" + v + "'");
    return r;
}

std::uint64_t KvConfig::get_u64(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    const unsigned long long r = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0' || v.find('-') != std::string::npos)
        throw std::invalid_argument("config key '" + key + "': not an unsigned integer: '" + v +
                                    "'");
    return r;
}

double KvConfig::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    const double r = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw std::invalid_argument("config key '" + key + "': not a number: '" + v + "'");
    return r;
}

bool KvConfig::get_bool(const std::string& key) const {
    const std::string v = get_string(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config key '" + key + "': not a boolean: '" + v + "'");
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}
long long KvConfig::get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
}
std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_u64(key) : fallback;
}
double KvConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}
bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::string KvConfig::serialize() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
        out += k;
        out += ": ";
        out += v;
        out += '\n';
    }
    return out;
}

void KvConfig::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("config '" + path + "': cannot open for writing");
    out << serialize();
    out.flush();
    if (!out) throw std::runtime_error("config '" + path + "': write failed");
}

void geometry_to_config(KvConfig& kv, const Geometry& geom) {
    kv.set("geometry.kind", geometry_kind_name(geom.kind));
    kv.set_int("geometry.num_angles", geom.num_angles);
    kv.set_int("geometry.num_detectors", geom.num_detectors);
    kv.set_double("geometry.detector_spacing", geom.detector_spacing);
    kv.set_double("geometry.source_radius", geom.source_radius);
    kv.set_double("geometry.detector_radius", geom.detector_radius);
    kv.set_double("geometry.angle_range", geom.angle_range);
}

Geometry geometry_from_config(const KvConfig& kv) {
    Geometry def;
    Geometry g;
    g.kind = geometry_kind_from_name(kv.get_string("geometry.kind", "parallel"));
    g.num_angles = int(kv.get_int("geometry.num_angles", 60));
    g.num_detectors = int(kv.get_int("geometry.num_detectors", 96));
    g.detector_spacing = kv.get_double("geometry.detector_spacing", def.detector_spacing);
    g.source_radius = kv.get_double("geometry.source_radius", def.source_radius);
    g.detector_radius = kv.get_double("geometry.detector_radius", def.detector_radius);
    g.angle_range = kv.get_double("geometry.angle_range", def.angle_range);
    return g;
}

void unroll_to_config(KvConfig& kv, const UnrollConfig& cfg) {
    kv.set("unroll.variant", variant_name(cfg.variant));
    kv.set_int("unroll.K", cfg.K);
    kv.set_int("unroll.m", cfg.m);
    kv.set("unroll.subset_rule", subset_rule_name(cfg.subset_rule));
    kv.set_int("unroll.sketch_factor", cfg.sketch_factor);
    kv.set_int("unroll.K_switch", cfg.K_switch);
    kv.set_int("unroll.momentum", cfg.momentum);
    kv.set_u64("unroll.seed", cfg.seed);
    kv.set_int("unroll.hidden", cfg.hidden);
    kv.set_int("unroll.ksize", cfg.ksize);
}

UnrollConfig unroll_from_config(const KvConfig& kv) {
    UnrollConfig def;
    def.hidden = 12;  // desk-scale default width
    UnrollConfig cfg;
    cfg.variant = variant_from_name(kv.get_string("unroll.variant", "lpd"));
    cfg.K = int(kv.get_int("unroll.K", def.K));
    cfg.m = int(kv.get_int("unroll.m", def.m));
    cfg.subset_rule = subset_rule_from_name(kv.get_string("unroll.subset_rule", "cyclic"));
    cfg.sketch_factor = int(kv.get_int("unroll.sketch_factor", def.sketch_factor));
    cfg.K_switch = int(kv.get_int("unroll.K_switch", cfg.K));
    cfg.momentum = int(kv.get_int("unroll.momentum", def.momentum));
    cfg.seed = kv.get_u64("unroll.seed", def.seed);
    cfg.hidden = int(kv.get_int("unroll.hidden", def.hidden));
    cfg.ksize = int(kv.get_int("unroll.ksize", def.ksize));
    return cfg;
}

RunConfig::RunConfig() {
    // Desk-scale default rig: sparse-view fan beam with the angle/detector to
    // grid ratios of a clinically flavored sparse-view protocol (views ~0.39x
    // and detector bins ~1.0x the image side), moderate photon budget. This is
    // the regime where learned reconstructions have real headroom over FBP.
    geom.kind = GeometryKind::fan;
    geom.num_angles = 25;
    geom.num_detectors = 64;
    geom.detector_spacing = 2.0;
    geom.source_radius = 120.0;
    geom.detector_radius = 120.0;
    geom.angle_range = 2.0 * 3.141592653589793;
    noise.I0 = 1e4;
    noise.attenuation_scale = 0.15;
    unroll.hidden = 12;
}

RunConfig RunConfig::from_config(const KvConfig& kv) {
    RunConfig cfg;
    cfg.seed = kv.get_u64("seed", cfg.seed);
    cfg.grid_side = int(kv.get_int("grid.side", cfg.grid_side));
    cfg.geom = geometry_from_config(kv);
    cfg.phantom_kind =
        phantom_kind_from_name(kv.get_string("phantom.kind", phantom_kind_name(cfg.phantom_kind)));
    cfg.phantom_ellipses = int(kv.get_int("phantom.num_ellipses", cfg.phantom_ellipses));
    cfg.noise.I0 = kv.get_double("noise.I0", cfg.noise.I0);
    cfg.noise.attenuation_scale =
        kv.get_double("noise.attenuation_scale", cfg.noise.attenuation_scale);
    cfg.noise.enabled = kv.get_bool("noise.enabled", cfg.noise.enabled);
    cfg.unroll = unroll_from_config(kv);
    if (!kv.has("unroll.seed")) cfg.unroll.seed = cfg.seed;
    cfg.train_count = int(kv.get_int("data.train_count", cfg.train_count));
    cfg.test_count = int(kv.get_int("data.test_count", cfg.test_count));
    cfg.epochs = int(kv.get_int("train.epochs", cfg.epochs));
    cfg.lr = kv.get_double("train.lr", cfg.lr);
    cfg.data_dir = kv.get_string("data.dir", cfg.data_dir);
    cfg.checkpoint_dir = kv.get_string("checkpoint.dir", cfg.checkpoint_dir);
    return cfg;
}

KvConfig RunConfig::resolved_config() const {
    KvConfig kv;
    kv.set("format", "sktomo-config-v1");
    kv.set_u64("seed", seed);
    kv.set_int("grid.side", grid_side);
    geometry_to_config(kv, geom);
    kv.set("phantom.kind", phantom_kind_name(phantom_kind));
    kv.set_int("phantom.num_ellipses", phantom_ellipses);
    kv.set_double("noise.I0", noise.I0);
    kv.set_double("noise.attenuation_scale", noise.attenuation_scale);
    kv.set_bool("noise.enabled", noise.enabled);
    unroll_to_config(kv, unroll);
    kv.set_int("data.train_count", train_count);
    kv.set_int("data.test_count", test_count);
    kv.set_int("train.epochs", epochs);
    kv.set_double("train.lr", lr);
    if (!data_dir.empty()) kv.set("data.dir", data_dir);
    if (!checkpoint_dir.empty()) kv.set("checkpoint.dir", checkpoint_dir);
    return kv;
}

// ---------------------------------------------------------------------------
// Previews and benchmark report
// ---------------------------------------------------------------------------

void write_pgm(const std::string& path, const Image& img, double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("pgm: window must satisfy hi > lo");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pgm '" + path + "': cannot open for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> bytes;
    bytes.reserve(img.size());
    for (double v : img.values) {
        const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        bytes.push_back((unsigned char)std::lround(t * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error("pgm '" + path + "': write failed");
}

namespace {

void check_same_geometry(const std::string& dir, const Geometry& a, int grid_a,
                         const Geometry& b, int grid_b) {
    const bool same = a.kind == b.kind && a.num_angles == b.num_angles &&
                      a.num_detectors == b.num_detectors &&
                      a.detector_spacing == b.detector_spacing &&
                      a.source_radius == b.source_radius &&
                      a.detector_radius == b.detector_radius &&
                      a.angle_range == b.angle_range && grid_a == grid_b;
    if (!same)
        throw std::runtime_error("checkpoint '" + dir +
                                 "': recorded geometry does not match the run configuration");
}

}  // namespace

LoadedNetwork load_network_checkpoint(const std::string& dir, const RunConfig& cfg) {
    if (!fs::exists(fs::path(dir) / "manifest.txt"))
        throw std::runtime_error("benchmark: missing checkpoint '" + dir + "'");
    const std::string snap_path = (fs::path(dir) / "config.txt").string();
    if (!fs::exists(snap_path))
        throw std::runtime_error("benchmark: checkpoint '" + dir +
                                 "' lacks its config.txt snapshot");
    KvConfig snap = KvConfig::parse_file(snap_path);
    check_same_geometry(dir, cfg.geom, cfg.grid_side, geometry_from_config(snap),
                        int(snap.get_int("grid.side")));
    LoadedNetwork p;
    p.ucfg = unroll_from_config(snap);
    p.net = build_network(p.store, p.ucfg, 0.0);
    ParamStore<float> loaded = load_checkpoint(dir);
    if (loaded.count() != p.store.count())
        throw std::runtime_error("checkpoint '" + dir +
                                 "': parameter count does not match the architecture");
    for (std::size_t q = 0; q < p.store.count(); ++q) {
        if (loaded.info[q].name != p.store.info[q].name ||
            loaded.values[q].size() != p.store.values[q].size())
            throw std::runtime_error("checkpoint '" + dir + "': parameter '" +
                                     loaded.info[q].name + "' does not match the architecture");
    }
    p.store.values = std::move(loaded.values);
    return p;
}

BenchmarkReport run_benchmark(const RunConfig& cfg, const Dataset& test,
                              const std::vector<std::pair<std::string, std::string>>& checkpoints,
                              const std::string& out_dir, int preview_count) {
    if (test.samples.empty()) throw std::invalid_argument("benchmark: empty test set");
    check_same_geometry("<test set>", cfg.geom, cfg.grid_side, test.geom, test.grid_side);

    // Validate and load every checkpoint up front, so configuration errors
    // surface before any reconstruction work starts.
    struct Prepared {
        std::string name;
        UnrollConfig ucfg;
        ParamStore<float> store;
        UnrolledNetwork net;
    };
    std::vector<Prepared> prepared;
    prepared.reserve(checkpoints.size());
    for (const auto& [name, dir] : checkpoints) {
        LoadedNetwork loaded = load_network_checkpoint(dir, cfg);
        if (name != variant_name(loaded.ucfg.variant))
            throw std::runtime_error("benchmark: checkpoint '" + dir + "' holds variant '" +
                                     std::string(variant_name(loaded.ucfg.variant)) +
                                     "' but was listed as '" + name + "'");
        prepared.push_back(
            {name, loaded.ucfg, std::move(loaded.store), std::move(loaded.net)});
    }

    if (!out_dir.empty()) fs::create_directories(out_dir);
    const int previews = std::min<int>(preview_count, int(test.samples.size()));

    BenchmarkReport report;

    // FBP baseline: one weighted backprojection per reconstruction = cost 1.
    {
        BenchmarkRow row;
        row.variant = "fbp";
        row.cost = 1.0;
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < test.samples.size(); ++i) {
            const TrainSample& s = test.samples[i];
            Image rec = fbp_reconstruct(cfg.geom, s.measurements, cfg.grid_side, FbpFilter::hann);
            row.psnr_mean += psnr(rec, s.truth, 1.0);
            row.ssim_mean += ssim(rec, s.truth, 1.0);
            if (!out_dir.empty() && int(i) < previews) {
                char name[64];
                std::snprintf(name, sizeof(name), "fbp_item%02zu", i);
                write_pgm((fs::path(out_dir) / (std::string(name) + ".pgm")).string(), rec);
                write_image_raw((fs::path(out_dir) / (std::string(name) + ".uskd")).string(), rec);
                std::snprintf(name, sizeof(name), "truth_item%02zu", i);
                write_pgm((fs::path(out_dir) / (std::string(name) + ".pgm")).string(), s.truth);
                write_image_raw((fs::path(out_dir) / (std::string(name) + ".uskd")).string(),
                                s.truth);
            }
        }
        row.op_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.psnr_mean /= double(test.samples.size());
        row.ssim_mean /= double(test.samples.size());
        report.rows.push_back(row);
    }

    for (const Prepared& p : prepared) {
        OperatorSet ops = make_operator_set(cfg.geom, cfg.grid_side, p.ucfg);
        BenchmarkRow row;
        row.variant = p.name;
        row.cost = operator_cost(p.ucfg);
        CostLedger ledger;
        for (std::size_t i = 0; i < test.samples.size(); ++i) {
            const TrainSample& s = test.samples[i];
            Image x0 = fbp_reconstruct(cfg.geom, s.measurements, cfg.grid_side, FbpFilter::hann);
            Image rec = reconstruct(p.net, p.store, ops, s.measurements, x0, ledger);
            row.psnr_mean += psnr(rec, s.truth, 1.0);
            row.ssim_mean += ssim(rec, s.truth, 1.0);
            if (!out_dir.empty() && int(i) < previews) {
                char base[80];
                std::snprintf(base, sizeof(base), "%s_item%02zu", p.name.c_str(), i);
                write_pgm((fs::path(out_dir) / (std::string(base) + ".pgm")).string(), rec);
                write_image_raw((fs::path(out_dir) / (std::string(base) + ".uskd")).string(), rec);
            }
        }
        row.psnr_mean /= double(test.samples.size());
        row.ssim_mean /= double(test.samples.size());
        row.op_seconds = ledger.seconds;
        report.rows.push_back(row);
    }

    if (!out_dir.empty()) {
        const std::string csv_path = (fs::path(out_dir) / "report.csv").string();
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw std::runtime_error("report '" + csv_path + "': cannot open for writing");
        out << report_to_csv(report);
        out.flush();
        if (!out) throw std::runtime_error("report '" + csv_path + "': write failed");
    }
    return report;
}

std::string report_to_csv(const BenchmarkReport& report) {
    std::string out = "variant,operator_cost,psnr_mean,ssim_mean\n";
    for (const BenchmarkRow& r : report.rows) {
        out += r.variant;
        out += ',';
        out += format_double(r.cost);
        out += ',';
        out += format_double(r.psnr_mean);
        out += ',';
        out += format_double(r.ssim_mean);
        out += '\n';
    }
    return out;
}

std::string report_to_table(const BenchmarkReport& report) {
    char line[160];
    std::string out;
    std::snprintf(line, sizeof(line), "%-10s %14s %10s %8s %12s\n", "variant", "operator_cost",
                  "psnr", "ssim", "op_seconds");
    out += line;
    for (const BenchmarkRow& r : report.rows) {
        std::snprintf(line, sizeof(line), "%-10s %14.4g %10.3f %8.4f %12.3f\n", r.variant.c_str(),
                      r.cost, r.psnr_mean, r.ssim_mean, r.op_seconds);
        out += line;
    }
    return out;
}

Dataset generate_dataset(const RunConfig& cfg, int count, std::uint64_t first_item_index) {
    if (count < 0) throw std::invalid_argument("generate_dataset: count must be >= 0");
    Dataset ds;
    ds.geom = cfg.geom;
    ds.grid_side = cfg.grid_side;
    ProjectionOperator op = build_operator(cfg.geom, cfg.grid_side);
    ds.samples.reserve(std::size_t(count));
    for (int i = 0; i < count; ++i) {
        const std::uint64_t item = first_item_index + std::uint64_t(i);
        PhantomSpec ps;
        ps.kind = cfg.phantom_kind;
        ps.grid_side = cfg.grid_side;
        ps.num_ellipses = cfg.phantom_ellipses;
        ps.seed = derive_seed(cfg.seed, 0xa11ce000ULL + item);
        Image truth = generate_phantom(ps);
        NoiseSpec ns = cfg.noise;
        ns.seed = derive_seed(cfg.seed, 0xb0b00000ULL + item);
        Sinogram b = simulate_measurements(op, truth, ns);
        // Quantize to the USKD payload precision so saved datasets round-trip
        // bit-exactly.
        for (double& v : truth.values) v = double(float(v));
        for (double& v : b.values) v = double(float(v));
        ds.samples.push_back({std::move(b), std::move(truth)});
    }
    return ds;
}

}  // namespace sktomo
