#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sktomo/harness.hpp"
#include "sktomo/nn.hpp"
#include "sktomo/raw_io.hpp"
#include "sktomo/rng.hpp"
#include "test_util.hpp"

using namespace sktomo;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Geometry small_geometry() {
    Geometry g;
    g.kind = GeometryKind::parallel;
    g.num_angles = 8;
    g.num_detectors = 12;
    return g;
}

bool same_samples(const std::vector<TrainSample>& a, const std::vector<TrainSample>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].measurements.values != b[i].measurements.values ||
            a[i].truth.values != b[i].truth.values)
            return false;
    return true;
}

}  // namespace

TEST_CASE("phantom generation is deterministic and bounded") {
    SUBCASE("same seed gives bit-identical images, different seeds differ") {
        PhantomSpec spec;
        spec.kind = PhantomKind::random_ellipses;
        spec.grid_side = 32;
        spec.num_ellipses = 7;
        spec.seed = 42;
        Image a = generate_phantom(spec);
        Image b = generate_phantom(spec);
        CHECK(a.values == b.values);
        spec.seed = 43;
        CHECK(generate_phantom(spec).values != a.values);
        for (double v : a.values) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    SUBCASE("zero ellipses give the zero image") {
        PhantomSpec spec;
        spec.kind = PhantomKind::random_ellipses;
        spec.grid_side = 16;
        spec.num_ellipses = 0;
        Image z = generate_phantom(spec);
        for (double v : z.values) CHECK(v == 0.0);
    }
    SUBCASE("head phantom stays in range with the expected interior plateau") {
        PhantomSpec spec;
        spec.kind = PhantomKind::shepp_logan;
        spec.grid_side = 64;
        Image head = generate_phantom(spec);
        double mass = 0.0;
        for (double v : head.values) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            mass += v;
        }
        CHECK(mass > 100.0);
        // The brain plateau: outer ellipse (1.0) minus the big interior
        // ellipse (0.8), sampled just off the exact center.
        CHECK(head.at(32, 32) == Approx(0.2).epsilon(1e-12));
        // Corners lie outside every ellipse.
        CHECK(head.at(0, 0) == 0.0);
        CHECK(head.at(63, 63) == 0.0);
    }
}

TEST_CASE("measurement simulation follows the transmission model") {
    Geometry geom = small_geometry();
    ProjectionOperator op = build_operator(geom, 16);

    SUBCASE("noise disabled returns the projection exactly") {
        Image x = testutil::make_disk(16, 5.0, 0.3);
        CostLedger scratch;
        Sinogram ax = forward_project(op, x, scratch);
        NoiseSpec ns;
        ns.enabled = false;
        Sinogram b = simulate_measurements(op, x, ns);
        CHECK(b.values == ax.values);
    }

    SUBCASE("zero image at huge photon count gives nearly zero data") {
        Image x(16, 0.0);
        NoiseSpec ns;
        ns.I0 = 1e8;
        ns.seed = 9;
        Sinogram b = simulate_measurements(op, x, ns);
        double abs_mean = 0.0;
        for (double v : b.values) abs_mean += std::abs(v);
        abs_mean /= double(b.size());
        CHECK(abs_mean <= 1e-3);
    }

    SUBCASE("zero counts are clamped so the log stays finite") {
        Image x = testutil::make_disk(16, 6.0, 1.0);
        NoiseSpec ns;
        ns.I0 = 2.0;
        ns.seed = 31;
        Sinogram b = simulate_measurements(op, x, ns);
        REQUIRE(b.all_finite());
        for (double v : b.values) CHECK(v <= std::log(2.0) + 1e-12);
    }

    SUBCASE("counts match Poisson mean and variance at fixed bins over 10000 draws") {
        struct Regime {
            double i0;
            double disk_value;
        };
        // Large-mean and small-mean sampling branches.
        for (Regime regime : {Regime{2e4, 0.15}, Regime{35.0, 0.08}}) {
            CAPTURE(regime.i0);
            Image x = testutil::make_disk(16, 6.0, regime.disk_value);
            NoiseSpec clean;
            clean.enabled = false;
            Sinogram ax = simulate_measurements(op, x, clean);
            // Most and least attenuated bins.
            std::size_t bin_hi = 0, bin_lo = 0;
            for (std::size_t i = 0; i < ax.size(); ++i) {
                if (ax.values[i] > ax.values[bin_hi]) bin_hi = i;
                if (ax.values[i] < ax.values[bin_lo]) bin_lo = i;
            }
            const int n = 10000;
            for (std::size_t bin : {bin_hi, bin_lo}) {
                const double lambda = regime.i0 * std::exp(-ax.values[bin]);
                REQUIRE(lambda > 8.0);  // keep the zero-count clamp negligible
                double sum = 0.0, sumsq = 0.0;
                for (int t = 0; t < n; ++t) {
                    NoiseSpec ns;
                    ns.I0 = regime.i0;
                    ns.seed = derive_seed(123, std::uint64_t(t));
                    Sinogram b = simulate_measurements(op, x, ns);
                    const double counts = std::round(regime.i0 * std::exp(-b.values[bin]));
                    sum += counts;
                    sumsq += counts * counts;
                }
                const double mean = sum / n;
                const double var = (sumsq - sum * sum / n) / (n - 1);
                const double se_mean = std::sqrt(lambda / n);
                const double se_var = std::sqrt((lambda + 2.0 * lambda * lambda) / n);
                CAPTURE(lambda);
                CHECK(std::abs(mean - lambda) <= 4.0 * se_mean);
                CHECK(std::abs(var - lambda) <= 4.0 * se_var);
            }
        }
    }

    SUBCASE("invalid photon count is rejected") {
        NoiseSpec ns;
        ns.I0 = 0.0;
        CHECK_THROWS_AS(simulate_measurements(op, Image(16, 0.0), ns), std::invalid_argument);
    }
}

TEST_CASE("datasets persist losslessly with named failures") {
    Geometry geom = small_geometry();
    RunConfig cfg;
    cfg.seed = 5;
    cfg.grid_side = 16;
    cfg.geom = geom;
    cfg.phantom_ellipses = 4;
    Dataset ds = generate_dataset(cfg, 10, 0);

    SUBCASE("round-trip is bit-exact and saving is deterministic") {
        TempDir dir("sktomo_ds_roundtrip");
        save_dataset(dir.sub("a"), ds);
        Dataset back = load_dataset(dir.sub("a"));
        CHECK(back.grid_side == ds.grid_side);
        CHECK(back.geom.num_angles == geom.num_angles);
        CHECK(same_samples(back.samples, ds.samples));
        save_dataset(dir.sub("b"), back);
        CHECK(read_file(dir.sub("a") + "/manifest.txt") ==
              read_file(dir.sub("b") + "/manifest.txt"));
        CHECK(read_file(dir.sub("a") + "/item0004.sino.uskd") ==
              read_file(dir.sub("b") + "/item0004.sino.uskd"));
    }

    SUBCASE("generation derives per-item seeds, so items are order-independent") {
        Dataset tail = generate_dataset(cfg, 6, 4);
        for (std::size_t j = 0; j < tail.samples.size(); ++j) {
            CHECK(tail.samples[j].truth.values == ds.samples[j + 4].truth.values);
            CHECK(tail.samples[j].measurements.values == ds.samples[j + 4].measurements.values);
        }
    }

    SUBCASE("corruption is caught and the file is named") {
        TempDir dir("sktomo_ds_corrupt");
        save_dataset(dir.str(), ds);
        {
            std::fstream f(dir.sub("item0003.sino.uskd"),
                           std::ios::in | std::ios::out | std::ios::binary);
            REQUIRE(bool(f));
            f.seekp(0);
            f.put('X');  // stomp the magic
        }
        CHECK_THROWS_WITH_AS(load_dataset(dir.str()), doctest::Contains("item0003.sino.uskd"),
                             std::runtime_error);
    }

    SUBCASE("item counts must agree with the files present") {
        TempDir dir("sktomo_ds_count");
        save_dataset(dir.str(), ds);
        {
            std::ofstream extra(dir.sub("item9999.sino.uskd"), std::ios::binary);
            extra << "junk";
        }
        CHECK_THROWS_WITH_AS(load_dataset(dir.str()), doctest::Contains("payload files"),
                             std::runtime_error);
        fs::remove(dir.sub("item9999.sino.uskd"));
        fs::remove(dir.sub("item0007.truth.uskd"));
        CHECK_THROWS_AS(load_dataset(dir.str()), std::runtime_error);
    }

    SUBCASE("a missing manifest is reported") {
        TempDir dir("sktomo_ds_nomanifest");
        CHECK_THROWS_WITH_AS(load_dataset(dir.str()), doctest::Contains("manifest"),
                             std::runtime_error);
    }
}

TEST_CASE("flat key:value configs parse, validate and round-trip") {
    SUBCASE("grammar: comments, blanks, trimming, first-colon split") {
        KvConfig kv = KvConfig::parse_text(
            "# a comment\n"
            "\n"
            "  alpha :  12 \n"
            "path.out: /tmp/x:y\n"
            "note: hello world\n");
        CHECK(kv.get_int("alpha") == 12);
        CHECK(kv.get_string("path.out") == "/tmp/x:y");
        CHECK(kv.get_string("note") == "hello world");
    }
    SUBCASE("malformed lines and duplicates are reported with line numbers") {
        CHECK_THROWS_WITH_AS(KvConfig::parse_text("just words\n", "inline"),
                             doctest::Contains("line 1"), std::invalid_argument);
        CHECK_THROWS_WITH_AS(KvConfig::parse_text("a: 1\na: 2\n", "inline"),
                             doctest::Contains("duplicate key 'a'"), std::invalid_argument);
        CHECK_THROWS_AS(KvConfig::parse_text(": noname\n"), std::invalid_argument);
        CHECK_THROWS_AS(KvConfig::parse_file("/nonexistent/sktomo.cfg"), std::runtime_error);
    }
    SUBCASE("typed getters check their formats and name the key") {
        KvConfig kv = KvConfig::parse_text("n: 3x\nf: 1.5\nb: yes\n");
        CHECK_THROWS_WITH_AS(kv.get_int("n"), doctest::Contains("'n'"), std::invalid_argument);
        CHECK(kv.get_double("f") == 1.5);
        CHECK_THROWS_AS(kv.get_bool("b"), std::invalid_argument);
        CHECK_THROWS_WITH_AS(kv.get_string("absent"), doctest::Contains("absent"),
                             std::invalid_argument);
        CHECK(kv.get_int("missing", 7) == 7);
        CHECK(kv.get_bool("missing", true) == true);
    }
    SUBCASE("serialization is sorted and doubles survive bit-exactly") {
        KvConfig kv;
        kv.set_double("pi", 3.141592653589793);
        kv.set_double("tiny", 1e-300);
        kv.set_int("z", -4);
        kv.set("a", "first");
        const std::string text = kv.serialize();
        CHECK(text.find("a: first") < text.find("pi:"));
        KvConfig back = KvConfig::parse_text(text);
        CHECK(back.get_double("pi") == 3.141592653589793);
        CHECK(back.get_double("tiny") == 1e-300);
        CHECK(back.get_int("z") == -4);
        CHECK(back.serialize() == text);
    }
    SUBCASE("geometry and network sections round-trip every field") {
        Geometry g;
        g.kind = GeometryKind::fan;
        g.num_angles = 33;
        g.num_detectors = 47;
        g.detector_spacing = 1.25;
        g.source_radius = 80.0;
        g.detector_radius = 40.0;
        g.angle_range = 6.283185307179586;
        KvConfig kv;
        geometry_to_config(kv, g);
        Geometry b = geometry_from_config(kv);
        CHECK(b.kind == g.kind);
        CHECK(b.num_angles == g.num_angles);
        CHECK(b.num_detectors == g.num_detectors);
        CHECK(b.detector_spacing == g.detector_spacing);
        CHECK(b.source_radius == g.source_radius);
        CHECK(b.detector_radius == g.detector_radius);
        CHECK(b.angle_range == g.angle_range);

        UnrollConfig u;
        u.variant = NetVariant::sklspd2;
        u.K = 7;
        u.m = 3;
        u.subset_rule = SubsetRule::uniform_random;
        u.sketch_factor = 2;
        u.K_switch = 5;
        u.momentum = 2;
        u.seed = 88;
        u.hidden = 12;
        u.ksize = 3;
        KvConfig kv2;
        unroll_to_config(kv2, u);
        UnrollConfig v = unroll_from_config(kv2);
        CHECK(v.variant == u.variant);
        CHECK(v.K == u.K);
        CHECK(v.m == u.m);
        CHECK(v.subset_rule == u.subset_rule);
        CHECK(v.sketch_factor == u.sketch_factor);
        CHECK(v.K_switch == u.K_switch);
        CHECK(v.momentum == u.momentum);
        CHECK(v.seed == u.seed);
        CHECK(v.hidden == u.hidden);
        CHECK(v.ksize == u.ksize);
    }
    SUBCASE("run config defaults are the desk-scale experiment") {
        RunConfig cfg;
        CHECK(cfg.grid_side == 64);
        CHECK(cfg.geom.kind == GeometryKind::fan);
        CHECK(cfg.geom.num_angles == 25);  // sparse-view: ~0.39x the grid side
        CHECK(cfg.geom.num_detectors == 64);
        CHECK(cfg.geom.detector_spacing == 2.0);
        CHECK(cfg.geom.source_radius == 120.0);
        CHECK(cfg.geom.detector_radius == 120.0);
        CHECK(cfg.noise.I0 == 1e4);
        CHECK(cfg.noise.attenuation_scale == 0.15);
        CHECK(cfg.train_count == 400);
        CHECK(cfg.test_count == 50);
        CHECK(cfg.epochs == 20);
        CHECK(cfg.lr == 1e-3);
        CHECK(cfg.unroll.K == 12);
        CHECK(cfg.unroll.hidden == 12);
    }
    SUBCASE("resolved snapshots are a fixpoint of parse -> resolve") {
        KvConfig partial = KvConfig::parse_text(
            "seed: 77\n"
            "grid.side: 32\n"
            "unroll.variant: sklspd1\n"
            "unroll.m: 4\n"
            "unroll.sketch_factor: 2\n"
            "train.epochs: 3\n");
        RunConfig cfg = RunConfig::from_config(partial);
        CHECK(cfg.seed == 77);
        CHECK(cfg.unroll.seed == 77);  // inherits the run seed when unset
        CHECK(cfg.unroll.m == 4);
        CHECK(cfg.epochs == 3);
        const std::string snap = cfg.resolved_config().serialize();
        RunConfig again = RunConfig::from_config(KvConfig::parse_text(snap));
        CHECK(again.resolved_config().serialize() == snap);
    }
}

TEST_CASE("graymap previews use a fixed window") {
    TempDir dir("sktomo_pgm");
    Image img(2, 0.0);
    img.values = {0.0, 0.5, 1.0, 2.0};
    write_pgm(dir.sub("t.pgm"), img);
    const std::string bytes = read_file(dir.sub("t.pgm"));
    const std::string expect = std::string("P5\n2 2\n255\n") + '\x00' + '\x80' + '\xff' + '\xff';
    CHECK(bytes == expect);
    CHECK_THROWS_AS(write_pgm(dir.sub("bad.pgm"), img, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("the benchmark evaluates checkpoints against the FBP baseline") {
    RunConfig cfg;
    cfg.seed = 3;
    cfg.grid_side = 16;
    cfg.geom = small_geometry();
    cfg.geom.num_angles = 12;
    cfg.geom.num_detectors = 24;
    cfg.phantom_ellipses = 4;
    cfg.unroll.variant = NetVariant::lpd;
    cfg.unroll.K = 2;
    cfg.unroll.K_switch = 2;
    cfg.unroll.hidden = 4;
    cfg.unroll.seed = 3;

    Dataset test = generate_dataset(cfg, 3, 100);

    TempDir dir("sktomo_bench");
    const std::string ckpt = dir.sub("ckpt_lpd");
    {
        ParamStore<float> store;
        build_network(store, cfg.unroll, 0.04f);
        save_checkpoint(ckpt, store);
        cfg.resolved_config().write(ckpt + "/config.txt");
    }

    SUBCASE("report rows, determinism, and preview artifacts") {
        BenchmarkReport r1 = run_benchmark(cfg, test, {{"lpd", ckpt}}, dir.sub("out"), 2);
        REQUIRE(r1.rows.size() == 2);
        CHECK(r1.rows[0].variant == "fbp");
        CHECK(r1.rows[0].cost == 1.0);
        CHECK(r1.rows[1].variant == "lpd");
        CHECK(r1.rows[1].cost == operator_cost(cfg.unroll));
        CHECK(std::isfinite(r1.rows[1].psnr_mean));
        CHECK(r1.rows[1].ssim_mean <= 1.0);
        for (const char* f :
             {"report.csv", "fbp_item00.pgm", "fbp_item01.uskd", "truth_item00.pgm",
              "lpd_item00.pgm", "lpd_item01.uskd"})
            CHECK(fs::exists(fs::path(dir.sub("out")) / f));
        CHECK(!fs::exists(fs::path(dir.sub("out")) / "lpd_item02.pgm"));

        BenchmarkReport r2 = run_benchmark(cfg, test, {{"lpd", ckpt}}, dir.sub("out2"), 2);
        CHECK(report_to_csv(r1) == report_to_csv(r2));
        CHECK(read_file(dir.sub("out") + "/report.csv") ==
              read_file(dir.sub("out2") + "/report.csv"));
        CHECK(read_file(dir.sub("out") + "/lpd_item00.uskd") ==
              read_file(dir.sub("out2") + "/lpd_item00.uskd"));
        CHECK(report_to_csv(r1).rfind("variant,operator_cost,psnr_mean,ssim_mean\n", 0) == 0);
        CHECK(report_to_table(r1).find("fbp") != std::string::npos);
    }

    SUBCASE("missing checkpoints are named") {
        CHECK_THROWS_WITH_AS(
            run_benchmark(cfg, test, {{"lpd", dir.sub("nowhere")}}, "", 0),
            doctest::Contains("nowhere"), std::runtime_error);
    }

    SUBCASE("geometry mismatches are rejected") {
        RunConfig other = cfg;
        other.geom.num_angles = 10;
        CHECK_THROWS_WITH_AS(run_benchmark(other, test, {}, "", 0),
                             doctest::Contains("geometry"), std::runtime_error);
        Dataset test2 = test;
        test2.geom.num_angles = 10;
        // Checkpoint recorded 12 angles; a 10-angle run config must be refused
        // before any reconstruction happens.
        RunConfig cfg10 = cfg;
        cfg10.geom.num_angles = 10;
        CHECK_THROWS_WITH_AS(run_benchmark(cfg10, test2, {{"lpd", ckpt}}, "", 0),
                             doctest::Contains("checkpoint"), std::runtime_error);
    }

    SUBCASE("variant labels must match the checkpoint") {
        CHECK_THROWS_WITH_AS(run_benchmark(cfg, test, {{"lspd", ckpt}}, "", 0),
                             doctest::Contains("listed as"), std::runtime_error);
    }
}
