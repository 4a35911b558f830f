// Command-line front end: data generation, training, reconstruction,
// benchmarking, and the adjoint / gradient diagnostics.
//
// Exit codes: 0 success, 1 usage error (bad flags, missing subcommand),
// 2 runtime failure (missing files, invalid configuration values, NaNs).
// Every state-producing run writes a resolved-config snapshot next to its
// outputs so it can be reproduced bit-for-bit from that file and the seed;
// the read-only diagnostics print the resolved config to stdout instead
// (and also write the snapshot when --out is given).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sktomo/harness.hpp"
#include "sktomo/nn.hpp"
#include "sktomo/pdhg.hpp"
#include "sktomo/raw_io.hpp"
#include "sktomo/rng.hpp"
#include "sktomo/tape.hpp"
#include "sktomo/unroll.hpp"

namespace fs = std::filesystem;
using namespace sktomo;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string variant;
    std::uint64_t seed = 0;
    int epochs = -1;
    int factor = -1;
    int subsets = -1;
    bool seed_set = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f, bool out_required) {
    cmd->add_option("--config", f.config_path, "flat key:value config file");
    auto* seed_opt =
        cmd->add_option("--seed", f.seed, "run seed (overrides the config's seed key)");
    seed_opt->each([&f](const std::string&) { f.seed_set = true; });
    auto* out = cmd->add_option("--out", f.out_dir, "output directory");
    if (out_required) out->required();
    cmd->add_option("--variant", f.variant,
                    "network variant: lpd, lspd, sklpd1, sklpd2, sklspd1, sklspd2");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--factor", f.factor, "sketch factor");
    cmd->add_option("--subsets", f.subsets, "angle subset count m");
}

RunConfig resolve_config(const CommonFlags& f) {
    KvConfig kv;
    if (!f.config_path.empty()) kv = KvConfig::parse_file(f.config_path);
    RunConfig cfg = RunConfig::from_config(kv);
    if (f.seed_set) {
        cfg.seed = f.seed;
        if (!kv.has("unroll.seed")) cfg.unroll.seed = f.seed;
    }
    if (!f.variant.empty()) cfg.unroll.variant = variant_from_name(f.variant);
    if (f.epochs >= 0) cfg.epochs = f.epochs;
    if (f.factor >= 1) {
        cfg.unroll.sketch_factor = f.factor;
        if (!kv.has("unroll.K_switch")) cfg.unroll.K_switch = cfg.unroll.K;
    }
    if (f.subsets >= 1) cfg.unroll.m = f.subsets;
    return cfg;
}

void write_snapshot(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    cfg.resolved_config().write((fs::path(out_dir) / "config.resolved.txt").string());
}

Dataset load_split(const RunConfig& cfg, const char* split) {
    if (cfg.data_dir.empty())
        throw std::runtime_error(std::string("no dataset configured: set data.dir in the config "
                                             "(a directory holding train/ and test/)"));
    Dataset ds = load_dataset((fs::path(cfg.data_dir) / split).string());
    if (ds.grid_side != cfg.grid_side || ds.geom.num_angles != cfg.geom.num_angles ||
        ds.geom.num_detectors != cfg.geom.num_detectors || ds.geom.kind != cfg.geom.kind)
        throw std::runtime_error("dataset '" + cfg.data_dir + "/" + split +
                                 "' geometry disagrees with the run configuration");
    return ds;
}

int cmd_gen_data(const CommonFlags& f) {
    RunConfig cfg = resolve_config(f);
    Dataset train = generate_dataset(cfg, cfg.train_count, 0);
    Dataset test = generate_dataset(cfg, cfg.test_count, std::uint64_t(cfg.train_count));
    save_dataset((fs::path(f.out_dir) / "train").string(), train);
    save_dataset((fs::path(f.out_dir) / "test").string(), test);
    write_snapshot(cfg, f.out_dir);
    std::printf("wrote %d train and %d test samples (%dx%d grid, %d angles) to %s\n",
                cfg.train_count, cfg.test_count, cfg.grid_side, cfg.grid_side,
                cfg.geom.num_angles, f.out_dir.c_str());
    return 0;
}

int cmd_train(const CommonFlags& f) {
    RunConfig cfg = resolve_config(f);
    validate_unroll_config(cfg.unroll);
    Dataset train = load_split(cfg, "train");
    OperatorSet ops = make_operator_set(cfg.geom, cfg.grid_side, cfg.unroll);
    const double anorm = power_method_norm(ops.full, 50, derive_seed(cfg.seed, 0x41));
    ParamStore<float> store;
    UnrolledNetwork net = build_network(store, cfg.unroll, 1.0 / anorm);
    CostLedger ledger;
    std::printf("training %s: K=%d m=%d factor=%d hidden=%d, %zu samples, %d epochs, lr=%g\n",
                variant_name(cfg.unroll.variant), cfg.unroll.K, cfg.unroll.m,
                cfg.unroll.sketch_factor, cfg.unroll.hidden, train.samples.size(), cfg.epochs,
                cfg.lr);
    std::fflush(stdout);
    auto rows =
        train_network(net, store, ops, train.samples, cfg.epochs, cfg.lr, cfg.seed, ledger);
    write_snapshot(cfg, f.out_dir);
    write_training_log((fs::path(f.out_dir) / "train_log.csv").string(), rows);
    const std::string ckpt = (fs::path(f.out_dir) / "checkpoint").string();
    save_checkpoint(ckpt, store);
    cfg.resolved_config().write((fs::path(ckpt) / "config.txt").string());
    if (!rows.empty())
        std::printf("final mean loss %.6g, operator cost %.6g, operator seconds %.2f\n",
                    rows.back().mean_loss, rows.back().cumulative_cost, ledger.seconds);
    std::printf("checkpoint written to %s\n", ckpt.c_str());
    return 0;
}

int cmd_reconstruct(const CommonFlags& f) {
    RunConfig cfg = resolve_config(f);
    if (cfg.checkpoint_dir.empty())
        throw std::runtime_error("no checkpoint configured: set checkpoint.dir in the config");
    Dataset test = load_split(cfg, "test");
    LoadedNetwork loaded = load_network_checkpoint(cfg.checkpoint_dir, cfg);
    OperatorSet ops = make_operator_set(cfg.geom, cfg.grid_side, loaded.ucfg);
    write_snapshot(cfg, f.out_dir);
    CostLedger ledger;
    std::string metrics = "item,psnr,ssim\n";
    char buf[128];
    for (std::size_t i = 0; i < test.samples.size(); ++i) {
        const TrainSample& s = test.samples[i];
        Image x0 = fbp_reconstruct(cfg.geom, s.measurements, cfg.grid_side, FbpFilter::hann);
        Image rec = reconstruct(loaded.net, loaded.store, ops, s.measurements, x0, ledger);
        std::snprintf(buf, sizeof(buf), "rec_item%04zu", i);
        write_image_raw((fs::path(f.out_dir) / (std::string(buf) + ".uskd")).string(), rec);
        write_pgm((fs::path(f.out_dir) / (std::string(buf) + ".pgm")).string(), rec);
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i, psnr(rec, s.truth, 1.0),
                      ssim(rec, s.truth, 1.0));
        metrics += buf;
    }
    std::ofstream mfile((fs::path(f.out_dir) / "metrics.csv").string(), std::ios::binary);
    if (!mfile) throw std::runtime_error("cannot write metrics.csv");
    mfile << metrics;
    mfile.flush();
    if (!mfile) throw std::runtime_error("metrics.csv write failed");
    std::printf("reconstructed %zu samples with %s (operator cost %.6g) into %s\n",
                test.samples.size(), variant_name(loaded.ucfg.variant),
                ledger.accumulated_cost(), f.out_dir.c_str());
    return 0;
}

int cmd_benchmark(const CommonFlags& f) {
    KvConfig kv;
    if (!f.config_path.empty()) kv = KvConfig::parse_file(f.config_path);
    RunConfig cfg = resolve_config(f);
    Dataset test = load_split(cfg, "test");
    const std::string list = kv.get_string("benchmark.variants", "");
    if (list.empty())
        throw std::runtime_error(
            "no variants configured: set benchmark.variants (comma-separated names) and one "
            "checkpoint.<name> key per variant");
    std::vector<std::pair<std::string, std::string>> checkpoints;
    std::size_t pos = 0;
    while (pos <= list.size()) {
        std::size_t comma = list.find(',', pos);
        if (comma == std::string::npos) comma = list.size();
        std::string name = list.substr(pos, comma - pos);
        name.erase(0, name.find_first_not_of(" \t"));
        if (auto end = name.find_last_not_of(" \t"); end != std::string::npos)
            name.resize(end + 1);
        if (!name.empty()) checkpoints.emplace_back(name, kv.get_string("checkpoint." + name));
        pos = comma + 1;
    }
    BenchmarkReport report = run_benchmark(cfg, test, checkpoints, f.out_dir);
    KvConfig snap = cfg.resolved_config();
    snap.set("benchmark.variants", list);
    for (const auto& [name, dir] : checkpoints) snap.set("checkpoint." + name, dir);
    fs::create_directories(f.out_dir);
    snap.write((fs::path(f.out_dir) / "config.resolved.txt").string());
    std::fputs(report_to_table(report).c_str(), stdout);
    std::printf("report written to %s\n", (fs::path(f.out_dir) / "report.csv").string().c_str());
    return 0;
}

int cmd_adjoint_test(const CommonFlags& f) {
    RunConfig cfg = resolve_config(f);
    std::fputs(cfg.resolved_config().serialize().c_str(), stdout);
    if (!f.out_dir.empty()) write_snapshot(cfg, f.out_dir);
    ProjectionOperator op = build_operator(cfg.geom, cfg.grid_side);
    double worst = adjoint_discrepancy(op, 25, derive_seed(cfg.seed, 1));
    const int m = cfg.unroll.m > 1 ? cfg.unroll.m : 4;
    auto subsets = partition_subsets(op, m);
    for (std::size_t i = 0; i < subsets.size(); ++i)
        worst = std::max(worst,
                         adjoint_discrepancy(subsets[i], 25, derive_seed(cfg.seed, 2 + i)));
    std::printf("max normalized adjoint discrepancy over full + %d subsets: %.3e\n", m, worst);
    if (!(worst <= 1e-10)) {
        std::fprintf(stderr, "error: adjoint discrepancy %.3e exceeds 1e-10\n", worst);
        return 2;
    }
    return 0;
}

int cmd_grad_check(const CommonFlags& f) {
    RunConfig cfg = resolve_config(f);
    std::fputs(cfg.resolved_config().serialize().c_str(), stdout);
    if (!f.out_dir.empty()) write_snapshot(cfg, f.out_dir);

    // Tiny double-precision probe network; flags/config choose the variant.
    UnrollConfig ucfg = cfg.unroll;
    ucfg.K = 3;
    ucfg.K_switch = std::min(ucfg.K_switch, ucfg.K);
    ucfg.hidden = 4;
    const int side = 16;
    Geometry geom = cfg.geom;
    geom.num_angles = 12;
    geom.num_detectors = 24;
    validate_unroll_config(ucfg);

    OperatorSet ops = make_operator_set(geom, side, ucfg);
    PhantomSpec ps;
    ps.grid_side = side;
    ps.num_ellipses = 4;
    ps.seed = derive_seed(cfg.seed, 7);
    Image phantom = generate_phantom(ps);
    NoiseSpec clean;
    clean.enabled = false;
    Sinogram b = simulate_measurements(ops.full, phantom, clean);
    Image x0(side, 0.0);
    std::vector<double> target(std::size_t(side) * side, 0.25);

    ParamStore<double> store;
    UnrolledNetwork net = build_network(store, ucfg, 0.04);
    for (const auto* blocks : {&net.dual_blocks, &net.primal_blocks})
        for (const ProxBlockParamIds& ids : *blocks)
            for (int a : {ids.a1, ids.a2}) store.values[std::size_t(a)][0] = 1.0;

    auto loss_at = [&](const ParamStore<double>& ps2) {
        Tape<double> tape;
        auto staged = stage_params(tape, ps2, false);
        CostLedger ledger;
        auto res = unrolled_forward(tape, net, staged, ops, b, x0, ledger);
        return tape.value(tape.mse(res.out, target))[0];
    };

    Tape<double> tape;
    auto staged = stage_params(tape, store, true);
    CostLedger ledger;
    auto res = unrolled_forward(tape, net, staged, ops, b, x0, ledger);
    tape.backward(tape.mse(res.out, target));
    auto grads = collect_gradients(tape, staged);

    Rng probe(derive_seed(cfg.seed, 99));
    double worst = 0.0;
    const int probes = 24;
    for (int p = 0; p < probes; ++p) {
        const std::size_t pi = probe.below(store.count());
        const std::size_t ci = probe.below(store.values[pi].size());
        ParamStore<double> shifted = store;
        const double h = 1e-5;
        shifted.values[pi][ci] += h;
        const double fp = loss_at(shifted);
        shifted.values[pi][ci] -= 2 * h;
        const double fm = loss_at(shifted);
        const double fd = (fp - fm) / (2 * h);
        const double ad = grads[pi][ci];
        worst =
            std::max(worst, std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1e-6}));
    }
    std::printf("%s: worst relative gradient error over %d probes: %.3e\n",
                variant_name(ucfg.variant), probes, worst);
    if (!(worst <= 1e-4)) {
        std::fprintf(stderr, "error: gradient mismatch %.3e exceeds 1e-4\n", worst);
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sketched unrolled tomographic reconstruction toolkit"};
    app.require_subcommand(1);

    CommonFlags fg, ft, fr, fb, fa, fc;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    add_common_flags(gen, fg, true);
    CLI::App* train = app.add_subcommand("train", "train one network variant");
    add_common_flags(train, ft, true);
    CLI::App* rec = app.add_subcommand("reconstruct", "reconstruct the test split");
    add_common_flags(rec, fr, true);
    CLI::App* bench = app.add_subcommand("benchmark", "compare trained variants against FBP");
    add_common_flags(bench, fb, true);
    CLI::App* adj = app.add_subcommand("adjoint-test", "verify the matched adjoint");
    add_common_flags(adj, fa, false);
    CLI::App* grad = app.add_subcommand("grad-check", "verify end-to-end gradients");
    add_common_flags(grad, fc, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the error message
        std::fputs(app.help().c_str(), stderr);
        return 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(fg);
        if (train->parsed()) return cmd_train(ft);
        if (rec->parsed()) return cmd_reconstruct(fr);
        if (bench->parsed()) return cmd_benchmark(fb);
        if (adj->parsed()) return cmd_adjoint_test(fa);
        if (grad->parsed()) return cmd_grad_check(fc);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
