#include "sktomo/unroll.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <stdexcept>

namespace sktomo {

bool variant_is_sketched(NetVariant v) {
    return v == NetVariant::sklpd1 || v == NetVariant::sklpd2 || v == NetVariant::sklspd1 ||
           v == NetVariant::sklspd2;
}

bool variant_is_stochastic(NetVariant v) {
    return v == NetVariant::lspd || v == NetVariant::sklspd1 || v == NetVariant::sklspd2;
}

bool variant_is_option2(NetVariant v) {
    return v == NetVariant::sklpd2 || v == NetVariant::sklspd2;
}

const char* variant_name(NetVariant v) {
    switch (v) {
        case NetVariant::lpd: return "lpd";
        case NetVariant::lspd: return "lspd";
        case NetVariant::sklpd1: return "sklpd1";
        case NetVariant::sklpd2: return "sklpd2";
        case NetVariant::sklspd1: return "sklspd1";
        case NetVariant::sklspd2: return "sklspd2";
    }
    return "?";
}

NetVariant variant_from_name(const std::string& name) {
    for (NetVariant v : {NetVariant::lpd, NetVariant::lspd, NetVariant::sklpd1,
                         NetVariant::sklpd2, NetVariant::sklspd1, NetVariant::sklspd2})
        if (name == variant_name(v)) return v;
    throw std::invalid_argument("unknown network variant '" + name +
                                "' (expected lpd, lspd, sklpd1, sklpd2, sklspd1 or sklspd2)");
}

const char* subset_rule_name(SubsetRule rule) {
    return rule == SubsetRule::cyclic ? "cyclic" : "uniform_random";
}

SubsetRule subset_rule_from_name(const std::string& name) {
    if (name == "cyclic") return SubsetRule::cyclic;
    if (name == "uniform_random") return SubsetRule::uniform_random;
    throw std::invalid_argument("unknown subset rule '" + name +
                                "' (expected cyclic or uniform_random)");
}

void validate_unroll_config(const UnrollConfig& cfg) {
    if (cfg.K < 0) throw std::invalid_argument("unroll config: K must be >= 0");
    if (cfg.m < 1) throw std::invalid_argument("unroll config: subset count must be >= 1");
    if (cfg.sketch_factor < 1)
        throw std::invalid_argument("unroll config: sketch factor must be >= 1");
    if (cfg.K_switch < 0 || cfg.K_switch > cfg.K)
        throw std::invalid_argument("unroll config: K_switch must lie in [0, K]");
    if (cfg.momentum < 0) throw std::invalid_argument("unroll config: momentum must be >= 0");
    if (cfg.hidden < 1) throw std::invalid_argument("unroll config: hidden width must be >= 1");
    if (cfg.ksize < 1 || cfg.ksize % 2 == 0)
        throw std::invalid_argument("unroll config: kernel size must be odd");
    if (!variant_is_stochastic(cfg.variant) && cfg.m != 1)
        throw std::invalid_argument("unroll config: deterministic variants require m == 1");
    if (!variant_is_sketched(cfg.variant) && cfg.sketch_factor != 1)
        throw std::invalid_argument("unroll config: unsketched variants require sketch factor 1");
}

double operator_cost(const UnrollConfig& cfg) {
    validate_unroll_config(cfg);
    // One forward and one adjoint application per layer, each discounted by
    // the subset fraction and, on coarse layers, by the sketch factor.  The
    // single-division form keeps whole-number costs exact in floating point.
    const int coarse =
        variant_is_sketched(cfg.variant) ? std::min(cfg.K_switch, cfg.K) : 0;
    return 2.0 * (double(coarse) / cfg.sketch_factor + double(cfg.K - coarse)) / cfg.m;
}

OperatorSet make_operator_set(const Geometry& geom, int grid_side, const UnrollConfig& cfg) {
    validate_unroll_config(cfg);
    OperatorSet ops;
    ops.full = build_operator(geom, grid_side);
    ops.subsets = partition_subsets(ops.full, cfg.m);
    ops.sampler.factor = cfg.sketch_factor;
    if (cfg.sketch_factor > 1) {
        ops.sketch_subsets.reserve(ops.subsets.size());
        for (const ProjectionOperator& sub : ops.subsets)
            ops.sketch_subsets.push_back(sketch_operator(sub, cfg.sketch_factor));
    }
    return ops;
}

template <typename Real>
UnrolledNetwork build_network(ParamStore<Real>& store, const UnrollConfig& cfg,
                              double step_init) {
    validate_unroll_config(cfg);
    if (!std::isfinite(step_init))
        throw std::invalid_argument("build_network: step init must be finite");
    UnrolledNetwork net;
    net.cfg = cfg;
    Rng rng(derive_seed(cfg.seed, 0x17e7));
    // Each block's last conv starts small so the block begins close to its skip
    // connection and the whole network begins close to its input reconstruction;
    // a loss that starts at the baseline reconstruction error instead of the
    // compounded noise of K random layers makes short training runs dependable.
    constexpr double kFinalConvInitScale = 0.01;
    auto damp_final_conv = [&store](const ProxBlockParamIds& ids) {
        for (Real& w : store.values[std::size_t(ids.k3)]) w *= Real(kFinalConvInitScale);
    };
    const int P = cfg.momentum;
    ProxBlockSpec dual_spec;
    dual_spec.in_channels = P + 3;  // dual history + operator channel + data channel
    dual_spec.hidden = cfg.hidden;
    dual_spec.ksize = cfg.ksize;
    ProxBlockSpec primal_spec = dual_spec;
    primal_spec.in_channels = P + 2;  // primal history + adjoint channel
    for (int k = 0; k < cfg.K; ++k) {
        char prefix[32];
        std::snprintf(prefix, sizeof(prefix), "layer%02d", k);
        const std::string base = prefix;
        net.dual_blocks.push_back(add_prox_block_params(store, base + ".dual", dual_spec, rng));
        net.primal_blocks.push_back(
            add_prox_block_params(store, base + ".primal", primal_spec, rng));
        damp_final_conv(net.dual_blocks.back());
        damp_final_conv(net.primal_blocks.back());
        net.sigma_ids.push_back(
            store.add(base + ".sigma", scalar_shape(), {Real(step_init)}));
        net.tau_ids.push_back(store.add(base + ".tau", scalar_shape(), {Real(step_init)}));
    }
    return net;
}

namespace {

template <typename Real>
std::vector<Real> to_real(const std::vector<double>& v) {
    return std::vector<Real>(v.begin(), v.end());
}

// Subset rows of a full sinogram, in the subset's angle order.
std::vector<double> subset_rows(const Sinogram& b, const ProjectionOperator& op) {
    const int nd = b.num_detectors;
    std::vector<double> out;
    out.reserve(std::size_t(op.num_rows()) * nd);
    for (int r = 0; r < op.num_rows(); ++r) {
        const int a = op.angle_index(r);
        out.insert(out.end(), b.values.begin() + std::size_t(a) * nd,
                   b.values.begin() + std::size_t(a + 1) * nd);
    }
    return out;
}

template <typename Real>
bool node_finite(const Tape<Real>& tape, typename Tape<Real>::NodeId id) {
    for (Real v : tape.value(id))
        if (!std::isfinite(double(v))) return false;
    return true;
}

[[noreturn]] void layer_error(int layer, const char* side) {
    throw std::runtime_error("unrolled forward: non-finite values at layer " +
                             std::to_string(layer) + " (" + side + ")");
}

// Projection node: forward applies A (recorded), backward applies A^T
// (recorded). The operator and ledger must outlive the tape.
template <typename Real>
typename Tape<Real>::NodeId project_node(Tape<Real>& tape, typename Tape<Real>::NodeId x,
                                         const ProjectionOperator& op, CostLedger& ledger) {
    const ProjectionOperator* o = &op;
    CostLedger* led = &ledger;
    const int side = op.grid_side;
    const TensorShape out_shape{1, op.num_rows(), op.geom.num_detectors};
    return tape.linear_op(
        x, out_shape,
        [o, led, side](const Real* in, Real* out) {
            Image img(side);
            for (std::size_t i = 0; i < img.size(); ++i) img.values[i] = double(in[i]);
            const Sinogram s = forward_project(*o, img, *led);
            for (std::size_t i = 0; i < s.size(); ++i) out[i] = Real(s.values[i]);
        },
        [o, led](const Real* in, Real* out) {
            Sinogram s(o->num_rows(), o->geom.num_detectors);
            for (std::size_t i = 0; i < s.size(); ++i) s.values[i] = double(in[i]);
            const Image img = back_project(*o, s, *led);
            for (std::size_t i = 0; i < img.size(); ++i) out[i] = Real(img.values[i]);
        });
}

// Backprojection node: forward applies A^T (recorded), backward applies A.
template <typename Real>
typename Tape<Real>::NodeId backproject_node(Tape<Real>& tape, typename Tape<Real>::NodeId y,
                                             const ProjectionOperator& op, CostLedger& ledger) {
    const ProjectionOperator* o = &op;
    CostLedger* led = &ledger;
    const int side = op.grid_side;
    return tape.linear_op(
        y, TensorShape{1, side, side},
        [o, led](const Real* in, Real* out) {
            Sinogram s(o->num_rows(), o->geom.num_detectors);
            for (std::size_t i = 0; i < s.size(); ++i) s.values[i] = double(in[i]);
            const Image img = back_project(*o, s, *led);
            for (std::size_t i = 0; i < img.size(); ++i) out[i] = Real(img.values[i]);
        },
        [o, led, side](const Real* in, Real* out) {
            Image img(side);
            for (std::size_t i = 0; i < img.size(); ++i) img.values[i] = double(in[i]);
            const Sinogram s = forward_project(*o, img, *led);
            for (std::size_t i = 0; i < s.size(); ++i) out[i] = Real(s.values[i]);
        });
}

// Downsampling node S (uncounted sampler work; adjoint is the exact scatter
// transpose).
template <typename Real>
typename Tape<Real>::NodeId downsample_node(Tape<Real>& tape, typename Tape<Real>::NodeId x,
                                            const SamplerSpec& sampler, int fine_side) {
    const int coarse_side = fine_side / sampler.factor;
    return tape.linear_op(
        x, TensorShape{1, coarse_side, coarse_side},
        [sampler, fine_side](const Real* in, Real* out) {
            Image img(fine_side);
            for (std::size_t i = 0; i < img.size(); ++i) img.values[i] = double(in[i]);
            const Image coarse = downsample(img, sampler);
            for (std::size_t i = 0; i < coarse.size(); ++i) out[i] = Real(coarse.values[i]);
        },
        [sampler, fine_side, coarse_side](const Real* in, Real* out) {
            Image coarse(coarse_side);
            for (std::size_t i = 0; i < coarse.size(); ++i) coarse.values[i] = double(in[i]);
            const Image fine = downsample_adjoint(coarse, sampler, fine_side);
            for (std::size_t i = 0; i < fine.size(); ++i) out[i] = Real(fine.values[i]);
        });
}

// Adjoint-path lift: the transpose of the downsampler, used to move coarse
// adjoint images to full resolution with scale-consistent weights.
template <typename Real>
typename Tape<Real>::NodeId downsample_transpose_node(Tape<Real>& tape,
                                                      typename Tape<Real>::NodeId coarse,
                                                      const SamplerSpec& sampler, int fine_side) {
    const int coarse_side = fine_side / sampler.factor;
    return tape.linear_op(
        coarse, TensorShape{1, fine_side, fine_side},
        [sampler, fine_side, coarse_side](const Real* in, Real* out) {
            Image c(coarse_side);
            for (std::size_t i = 0; i < c.size(); ++i) c.values[i] = double(in[i]);
            const Image fine = downsample_adjoint(c, sampler, fine_side);
            for (std::size_t i = 0; i < fine.size(); ++i) out[i] = Real(fine.values[i]);
        },
        [sampler, fine_side](const Real* in, Real* out) {
            Image img(fine_side);
            for (std::size_t i = 0; i < img.size(); ++i) img.values[i] = double(in[i]);
            const Image c = downsample(img, sampler);
            for (std::size_t i = 0; i < c.size(); ++i) out[i] = Real(c.values[i]);
        });
}

// Interpolating upsampler U for lifting coarse images (sketched option 2).
template <typename Real>
typename Tape<Real>::NodeId upsample_node(Tape<Real>& tape, typename Tape<Real>::NodeId coarse,
                                          const SamplerSpec& sampler, int fine_side) {
    const int coarse_side = fine_side / sampler.factor;
    return tape.linear_op(
        coarse, TensorShape{1, fine_side, fine_side},
        [sampler, coarse_side](const Real* in, Real* out) {
            Image c(coarse_side);
            for (std::size_t i = 0; i < c.size(); ++i) c.values[i] = double(in[i]);
            const Image fine = upsample(c, sampler);
            for (std::size_t i = 0; i < fine.size(); ++i) out[i] = Real(fine.values[i]);
        },
        [sampler, fine_side, coarse_side](const Real* in, Real* out) {
            Image fine(fine_side);
            for (std::size_t i = 0; i < fine.size(); ++i) fine.values[i] = double(in[i]);
            const Image c = upsample_adjoint(fine, sampler, coarse_side);
            for (std::size_t i = 0; i < c.size(); ++i) out[i] = Real(c.values[i]);
        });
}

}  // namespace

template <typename Real>
UnrollResult<Real> unrolled_forward(Tape<Real>& tape, const UnrolledNetwork& net,
                                    const std::vector<typename Tape<Real>::NodeId>& staged,
                                    const OperatorSet& ops, const Sinogram& b, const Image& x0,
                                    CostLedger& ledger, Rng* subset_rng) {
    using NodeId = typename Tape<Real>::NodeId;
    const UnrollConfig& cfg = net.cfg;
    validate_unroll_config(cfg);
    if (int(ops.subsets.size()) != cfg.m)
        throw std::invalid_argument("unrolled forward: operator set has the wrong subset count");
    if (cfg.sketch_factor > 1 && ops.sketch_subsets.size() != ops.subsets.size())
        throw std::invalid_argument("unrolled forward: sketched subsets missing or mismatched");
    for (std::size_t i = 0; i < ops.sketch_subsets.size(); ++i)
        if (ops.sketch_subsets[i].subset != ops.subsets[i].subset ||
            ops.sketch_subsets[i].grid_side * cfg.sketch_factor != ops.full.grid_side)
            throw std::invalid_argument(
                "unrolled forward: sketched subsets do not mirror the full partition");
    if (b.num_angles != ops.full.geom.num_angles ||
        b.num_detectors != ops.full.geom.num_detectors)
        throw std::invalid_argument("unrolled forward: measurement shape does not match geometry");
    if (x0.width != ops.full.grid_side || x0.height != ops.full.grid_side)
        throw std::invalid_argument("unrolled forward: initial image does not match the grid");
    if (int(net.dual_blocks.size()) != cfg.K || int(net.sigma_ids.size()) != cfg.K)
        throw std::invalid_argument("unrolled forward: network layer count disagrees with config");

    const int n = ops.full.grid_side;
    const int nd = ops.full.geom.num_detectors;
    const int P = cfg.momentum;
    const bool sketched = variant_is_sketched(cfg.variant);
    const bool option2 = variant_is_option2(cfg.variant);

    Rng own_rng(derive_seed(cfg.seed, 0x5eed));
    Rng& rng = subset_rng ? *subset_rng : own_rng;

    UnrollResult<Real> result;
    result.subset_trace.reserve(std::size_t(cfg.K));

    NodeId x_cur = tape.leaf(TensorShape{1, n, n}, to_real<Real>(x0.values), false);
    std::deque<NodeId> x_hist = {x_cur};

    std::vector<NodeId> y_state(std::size_t(cfg.m));
    std::vector<std::deque<NodeId>> y_hist(std::size_t(cfg.m));
    for (int i = 0; i < cfg.m; ++i) {
        y_state[std::size_t(i)] =
            tape.zeros(TensorShape{1, ops.subsets[std::size_t(i)].num_rows(), nd});
        y_hist[std::size_t(i)] = {y_state[std::size_t(i)]};
    }

    // History channels [newest, ..., oldest], zero-padded to P+1 entries.
    auto history_primary = [&](const std::deque<NodeId>& hist, const TensorShape& entry_shape,
                               auto&& map_entry) -> NodeId {
        if (P == 0) return map_entry(hist.front());
        std::vector<NodeId> parts;
        parts.reserve(std::size_t(P) + 1);
        for (int j = 0; j <= P; ++j)
            parts.push_back(j < int(hist.size()) ? map_entry(hist[std::size_t(j)])
                                                 : tape.zeros(entry_shape));
        return tape.concat(parts);
    };
    auto identity_entry = [](NodeId id) { return id; };

    for (int k = 0; k < cfg.K; ++k) {
        const int i = cfg.subset_rule == SubsetRule::cyclic ? k % cfg.m : int(rng.below(cfg.m));
        result.subset_trace.push_back(i);
        const bool coarse = sketched && cfg.sketch_factor > 1 && k < cfg.K_switch;
        const ProjectionOperator& A =
            coarse ? ops.sketch_subsets[std::size_t(i)] : ops.subsets[std::size_t(i)];
        const int res_side = A.grid_side;

        // Dual update.
        NodeId x_feed = coarse ? downsample_node(tape, x_cur, ops.sampler, n) : x_cur;
        NodeId t = project_node(tape, x_feed, A, ledger);
        NodeId t_scaled = tape.scale(t, staged[std::size_t(net.sigma_ids[std::size_t(k)])]);
        NodeId b_i = tape.leaf(TensorShape{1, A.num_rows(), nd},
                               to_real<Real>(subset_rows(b, A)), false);
        NodeId dual_primary = history_primary(y_hist[std::size_t(i)],
                                              TensorShape{1, A.num_rows(), nd}, identity_entry);
        auto dual_nodes = pick_block_nodes<Real>(staged, net.dual_blocks[std::size_t(k)], cfg.ksize);
        NodeId y_new = prox_block_apply(tape, dual_nodes, dual_primary, {t_scaled, b_i});
        if (!node_finite(tape, y_new)) layer_error(k, "dual");
        y_state[std::size_t(i)] = y_new;
        y_hist[std::size_t(i)].push_front(y_new);
        while (int(y_hist[std::size_t(i)].size()) > P + 1) y_hist[std::size_t(i)].pop_back();

        // Primal update.
        NodeId adj = backproject_node(tape, y_new, A, ledger);
        NodeId x_new;
        auto primal_nodes =
            pick_block_nodes<Real>(staged, net.primal_blocks[std::size_t(k)], cfg.ksize);
        if (coarse && option2) {
            auto coarse_entry = [&](NodeId id) { return downsample_node(tape, id, ops.sampler, n); };
            NodeId primal_primary =
                history_primary(x_hist, TensorShape{1, res_side, res_side}, coarse_entry);
            NodeId u = tape.scale(adj, staged[std::size_t(net.tau_ids[std::size_t(k)])]);
            NodeId blk = prox_block_apply(tape, primal_nodes, primal_primary, {u});
            x_new = upsample_node(tape, blk, ops.sampler, n);
        } else {
            NodeId lifted = coarse ? downsample_transpose_node(tape, adj, ops.sampler, n) : adj;
            NodeId u = tape.scale(lifted, staged[std::size_t(net.tau_ids[std::size_t(k)])]);
            NodeId primal_primary = history_primary(x_hist, TensorShape{1, n, n}, identity_entry);
            x_new = prox_block_apply(tape, primal_nodes, primal_primary, {u});
        }
        if (!node_finite(tape, x_new)) layer_error(k, "primal");
        x_cur = x_new;
        x_hist.push_front(x_new);
        while (int(x_hist.size()) > P + 1) x_hist.pop_back();
    }

    result.out = x_cur;
    return result;
}

template <typename Real>
Image reconstruct(const UnrolledNetwork& net, const ParamStore<Real>& store,
                  const OperatorSet& ops, const Sinogram& b, const Image& x0, CostLedger& ledger,
                  Rng* subset_rng) {
    Tape<Real> tape;
    auto staged = stage_params(tape, store, false);
    auto result = unrolled_forward(tape, net, staged, ops, b, x0, ledger, subset_rng);
    Image out(ops.full.grid_side);
    const auto& v = tape.value(result.out);
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = double(v[i]);
    return out;
}

template <typename Real>
std::vector<TrainLogRow> train_network(const UnrolledNetwork& net, ParamStore<Real>& store,
                                       const OperatorSet& ops,
                                       const std::vector<TrainSample>& data, int epochs,
                                       double lr, std::uint64_t seed, CostLedger& ledger) {
    if (data.empty()) throw std::invalid_argument("train_network: empty dataset");
    if (epochs < 0) throw std::invalid_argument("train_network: epochs must be >= 0");
    const Geometry& geom = ops.full.geom;
    const int side = ops.full.grid_side;
    for (const TrainSample& s : data) {
        if (s.measurements.num_angles != geom.num_angles ||
            s.measurements.num_detectors != geom.num_detectors)
            throw std::invalid_argument("train_network: sample measurement shape mismatch");
        if (s.truth.width != side || s.truth.height != side)
            throw std::invalid_argument("train_network: sample ground-truth shape mismatch");
    }

    std::vector<Image> inits;
    inits.reserve(data.size());
    for (const TrainSample& s : data)
        inits.push_back(fbp_reconstruct(geom, s.measurements, side, FbpFilter::hann));

    AdamState<Real> adam;
    adam.lr = Real(lr);
    std::vector<TrainLogRow> rows;
    rows.reserve(std::size_t(epochs));
    const auto t0 = std::chrono::steady_clock::now();
    long step = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        double loss_sum = 0.0;
        for (std::size_t s = 0; s < data.size(); ++s) {
            Tape<Real> tape;
            auto staged = stage_params(tape, store, true);
            Rng srng(derive_seed(seed, 0x51e9000 + std::uint64_t(step)));
            auto fwd = unrolled_forward(tape, net, staged, ops, data[s].measurements, inits[s],
                                        ledger, &srng);
            auto loss = tape.mse(fwd.out, to_real<Real>(data[s].truth.values));
            const double lval = double(tape.value(loss)[0]);
            if (!std::isfinite(lval))
                throw std::runtime_error("train_network: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", sample " + std::to_string(s));
            tape.backward(loss);
            adam_step(adam, store, collect_gradients(tape, staged));
            loss_sum += lval;
            ++step;
        }
        TrainLogRow row;
        row.epoch = epoch;
        row.mean_loss = loss_sum / double(data.size());
        row.cumulative_cost = ledger.accumulated_cost();
        row.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rows.push_back(row);
    }
    return rows;
}

void write_training_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("training log '" + path + "': cannot open for writing");
    out << "epoch,mean_loss,cumulative_operator_cost,wall_seconds\n";
    char buf[160];
    for (const TrainLogRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.epoch, r.mean_loss,
                      r.cumulative_cost, r.wall_seconds);
        out << buf;
    }
    if (!out.flush()) throw std::runtime_error("training log '" + path + "': write failed");
}

template UnrolledNetwork build_network<float>(ParamStore<float>&, const UnrollConfig&, double);
template UnrolledNetwork build_network<double>(ParamStore<double>&, const UnrollConfig&, double);
template UnrollResult<float> unrolled_forward<float>(Tape<float>&, const UnrolledNetwork&,
                                                     const std::vector<Tape<float>::NodeId>&,
                                                     const OperatorSet&, const Sinogram&,
                                                     const Image&, CostLedger&, Rng*);
template UnrollResult<double> unrolled_forward<double>(Tape<double>&, const UnrolledNetwork&,
                                                       const std::vector<Tape<double>::NodeId>&,
                                                       const OperatorSet&, const Sinogram&,
                                                       const Image&, CostLedger&, Rng*);
template Image reconstruct<float>(const UnrolledNetwork&, const ParamStore<float>&,
                                  const OperatorSet&, const Sinogram&, const Image&, CostLedger&,
                                  Rng*);
template Image reconstruct<double>(const UnrolledNetwork&, const ParamStore<double>&,
                                   const OperatorSet&, const Sinogram&, const Image&, CostLedger&,
                                   Rng*);
template std::vector<TrainLogRow> train_network<float>(const UnrolledNetwork&, ParamStore<float>&,
                                                       const OperatorSet&,
                                                       const std::vector<TrainSample>&, int,
                                                       double, std::uint64_t, CostLedger&);
template std::vector<TrainLogRow> train_network<double>(const UnrolledNetwork&,
                                                        ParamStore<double>&, const OperatorSet&,
                                                        const std::vector<TrainSample>&, int,
                                                        double, std::uint64_t, CostLedger&);

}  // namespace sktomo
