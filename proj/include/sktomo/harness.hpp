#pragma once

// Experiment harness: synthetic phantoms, Poisson measurement simulation,
// dataset persistence, flat key:value experiment configs with resolved
// snapshots, graymap previews, and the reconstruction benchmark report.
//
// Everything here is deterministic given the seeds recorded in the config:
// phantoms and noise draw from per-item seeds derived from the run seed, so
// regenerating any artifact from a resolved snapshot reproduces it bit for
// bit. Dataset samples are quantized to float32 (the USKD payload type) at
// generation time, which makes save/load round-trips exact.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sktomo/image.hpp"
#include "sktomo/tomo.hpp"
#include "sktomo/unroll.hpp"

namespace sktomo {

// ---------------------------------------------------------------------------
// Phantoms
// ---------------------------------------------------------------------------

enum class PhantomKind { shepp_logan, random_ellipses };

const char* phantom_kind_name(PhantomKind k);
PhantomKind phantom_kind_from_name(const std::string& name);

struct PhantomSpec {
    PhantomKind kind = PhantomKind::random_ellipses;
    int grid_side = 64;
    int num_ellipses = 8;     // random_ellipses only
    std::uint64_t seed = 0;   // random_ellipses only
};

// Deterministic per spec. Ellipse sums are clipped to [0, 1]. The head
// phantom uses the standard ellipse table with the low-contrast intensity
// variant whose values already lie in [0, 1].
Image generate_phantom(const PhantomSpec& spec);

// ---------------------------------------------------------------------------
// Measurement simulation
// ---------------------------------------------------------------------------

struct NoiseSpec {
    double I0 = 1e5;          // unattenuated photon count per detector bin
    // Physical attenuation per unit of line integral: counts are drawn at
    // attenuation scale*(Ax) and the log-linearized result is divided by the
    // scale again, so b stays in the operator's units while the photon
    // statistics see a physically sensible exponent.
    double attenuation_scale = 1.0;
    std::uint64_t seed = 0;
    bool enabled = true;      // disabled -> b = Ax exactly
};

// Transmission model: counts_i ~ Poisson(I0 * exp(-s*(Ax)_i)) with s the
// attenuation scale, zero counts clamped to one, then
// b_i = -log(counts_i / I0) / s. With noise disabled the result is exactly Ax.
Sinogram simulate_measurements(const ProjectionOperator& op, const Image& x,
                               const NoiseSpec& noise);

// ---------------------------------------------------------------------------
// Dataset persistence
// ---------------------------------------------------------------------------

struct Dataset {
    Geometry geom;
    int grid_side = 0;
    std::vector<TrainSample> samples;
};

// Directory layout: manifest.txt (flat key:value with format version, count,
// geometry, grid side, and one checksum entry per payload file) plus
// item%04d.sino.uskd / item%04d.truth.uskd pairs. Loading verifies counts,
// checksums and shapes, naming the offending file in every error.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

// ---------------------------------------------------------------------------
// Flat key:value configuration
// ---------------------------------------------------------------------------

// Grammar: one "key: value" per line; '#' starts a comment line; blank lines
// ignored; keys use dotted section prefixes ("geometry.num_angles"). Values
// keep interior whitespace. serialize() emits sorted keys so snapshots diff
// cleanly; doubles round-trip bit-exactly via %.17g.
class KvConfig {
  public:
    static KvConfig parse_text(const std::string& text, const std::string& origin = "<text>");
    static KvConfig parse_file(const std::string& path);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    void set(const std::string& key, const std::string& value);
    void set_int(const std::string& key, long long v);
    void set_u64(const std::string& key, std::uint64_t v);
    void set_double(const std::string& key, double v);
    void set_bool(const std::string& key, bool v);

    // Required lookups throw std::invalid_argument naming the key.
    std::string get_string(const std::string& key) const;
    long long get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    // Defaulted lookups.
    std::string get_string(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    std::string serialize() const;
    void write(const std::string& path) const;
    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
};

// Section helpers shared by the CLI and the tests.
void geometry_to_config(KvConfig& kv, const Geometry& geom);
Geometry geometry_from_config(const KvConfig& kv);
void unroll_to_config(KvConfig& kv, const UnrollConfig& cfg);
UnrollConfig unroll_from_config(const KvConfig& kv);

// The full experiment description the CLI commands share. Field defaults are
// the desk-scale experiment; from_config applies config keys on top of them
// and resolved_config() re-emits every field explicitly.
struct RunConfig {
    std::uint64_t seed = 0;
    int grid_side = 64;
    Geometry geom;              // desk default: parallel, 60 angles, 96 detectors
    PhantomKind phantom_kind = PhantomKind::random_ellipses;
    int phantom_ellipses = 8;
    NoiseSpec noise;            // I0 = 1e5, enabled
    UnrollConfig unroll;        // study default: K=12, hidden 12 (set in ctor)
    int train_count = 400;
    int test_count = 50;
    int epochs = 20;
    double lr = 1e-3;
    std::string data_dir;       // dataset root holding train/ and test/
    std::string checkpoint_dir; // reconstruct: trained parameters to load

    RunConfig();
    static RunConfig from_config(const KvConfig& kv);
    KvConfig resolved_config() const;
};

// ---------------------------------------------------------------------------
// Previews and benchmark report
// ---------------------------------------------------------------------------

// 8-bit binary portable graymap with a fixed display window [lo, hi].
void write_pgm(const std::string& path, const Image& img, double lo = 0.0, double hi = 1.0);

struct BenchmarkRow {
    std::string variant;   // "fbp" for the baseline row
    double cost = 0.0;     // forward-pass operator cost per reconstruction
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
    double op_seconds = 0.0;  // wall time inside projection kernels
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;
};

// A trained network restored from a checkpoint directory (parameter files
// plus the config.txt snapshot recorded at save time). Throws with the
// directory named when anything is missing, when the recorded geometry
// disagrees with cfg, or when the parameter set does not match the
// architecture the snapshot describes.
struct LoadedNetwork {
    UnrollConfig ucfg;
    ParamStore<float> store;
    UnrolledNetwork net;
};
LoadedNetwork load_network_checkpoint(const std::string& dir, const RunConfig& cfg);

// Evaluates each (variant name, checkpoint dir) pair on the test set and
// prepends the FBP baseline row (cost 1: one weighted backprojection).
// Writes report.csv plus USKD and PGM previews of the first preview_count
// test reconstructions into out_dir (when non-empty). Throws when a
// checkpoint is missing (naming the path) or its recorded geometry disagrees
// with cfg.
BenchmarkReport run_benchmark(const RunConfig& cfg, const Dataset& test,
                              const std::vector<std::pair<std::string, std::string>>& checkpoints,
                              const std::string& out_dir, int preview_count = 3);

std::string report_to_csv(const BenchmarkReport& report);
std::string report_to_table(const BenchmarkReport& report);

// Per-item derived seeds keep generated datasets order-independent.
Dataset generate_dataset(const RunConfig& cfg, int count, std::uint64_t first_item_index);

}  // namespace sktomo
