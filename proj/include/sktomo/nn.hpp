#pragma once

// Parameter management for the unrolled networks: a flat named parameter
// store, seeded He initialization, the 3-layer convolutional block with PReLU
// activations and a first-channel skip connection, the Adam optimizer, and
// bit-exact float32 checkpoints (text manifest + one raw array per
// parameter, checksummed).

#include <cstdint>
#include <string>
#include <vector>

#include "sktomo/rng.hpp"
#include "sktomo/tape.hpp"

namespace sktomo {

// ---- parameter store -----------------------------------------------------

struct ParamInfo {
    std::string name;
    TensorShape shape;
};

template <typename Real>
struct ParamStore {
    std::vector<ParamInfo> info;
    std::vector<std::vector<Real>> values;

    int add(const std::string& name, const TensorShape& shape, std::vector<Real> init) {
        if (init.size() != shape.size())
            throw std::invalid_argument("param store: init size does not match shape for " + name);
        for (const ParamInfo& p : info)
            if (p.name == name)
                throw std::invalid_argument("param store: duplicate parameter name " + name);
        info.push_back(ParamInfo{name, shape});
        values.push_back(std::move(init));
        return int(info.size()) - 1;
    }

    int find(const std::string& name) const {
        for (std::size_t i = 0; i < info.size(); ++i)
            if (info[i].name == name) return int(i);
        return -1;
    }

    std::size_t count() const { return info.size(); }

    std::size_t total_scalars() const {
        std::size_t n = 0;
        for (const auto& v : values) n += v.size();
        return n;
    }
};

// Stages every stored parameter as a leaf on the tape (in store order) and
// returns the node ids. trainable=false records constants instead.
template <typename Real>
std::vector<typename Tape<Real>::NodeId> stage_params(Tape<Real>& tape,
                                                      const ParamStore<Real>& store,
                                                      bool trainable = true) {
    std::vector<typename Tape<Real>::NodeId> ids;
    ids.reserve(store.count());
    for (std::size_t i = 0; i < store.count(); ++i)
        ids.push_back(tape.leaf(store.info[i].shape, store.values[i], trainable));
    return ids;
}

// Gathers d(loss)/d(param) for staged parameters, in store order. Must run
// after tape.backward(); parameters a loss does not touch report zeros.
template <typename Real>
std::vector<std::vector<Real>> collect_gradients(
    const Tape<Real>& tape, const std::vector<typename Tape<Real>::NodeId>& staged) {
    std::vector<std::vector<Real>> grads;
    grads.reserve(staged.size());
    for (auto id : staged) grads.push_back(tape.grad(id));
    return grads;
}

// ---- initialization --------------------------------------------------------

// He-style Gaussian kernel init: std = sqrt(2 / fan_in), fan_in = cin*k*k.
template <typename Real>
std::vector<Real> he_kernel_init(int cout, int cin, int ksize, Rng& rng) {
    const double stddev = std::sqrt(2.0 / (double(cin) * ksize * ksize));
    std::vector<Real> w(std::size_t(cout) * cin * ksize * ksize);
    for (Real& v : w) v = Real(rng.normal(0.0, stddev));
    return w;
}

// ---- prox block ------------------------------------------------------------

// conv(k) -> PReLU -> conv(k) -> PReLU -> conv(k), hidden channels fixed,
// plus a skip connection that adds the first channel of the primary input to
// the single-channel output.
struct ProxBlockSpec {
    int in_channels = 2;  // concatenated primary + extra channels
    int hidden = 32;
    int ksize = 5;
    int out_channels = 1;
};

// Indices into a ParamStore for one block's eight parameter arrays.
struct ProxBlockParamIds {
    int k1 = -1, b1 = -1, a1 = -1;
    int k2 = -1, b2 = -1, a2 = -1;
    int k3 = -1, b3 = -1;
};

std::size_t prox_block_param_count(const ProxBlockSpec& spec);

template <typename Real>
ProxBlockParamIds add_prox_block_params(ParamStore<Real>& store, const std::string& prefix,
                                        const ProxBlockSpec& spec, Rng& rng,
                                        double slope_init = 0.1) {
    ProxBlockParamIds ids;
    ids.k1 = store.add(prefix + ".conv1.weight", kernel_shape(spec.hidden, spec.in_channels, spec.ksize),
                       he_kernel_init<Real>(spec.hidden, spec.in_channels, spec.ksize, rng));
    ids.b1 = store.add(prefix + ".conv1.bias", TensorShape{spec.hidden, 1, 1},
                       std::vector<Real>(std::size_t(spec.hidden), Real(0)));
    ids.a1 = store.add(prefix + ".act1.slope", scalar_shape(), {Real(slope_init)});
    ids.k2 = store.add(prefix + ".conv2.weight", kernel_shape(spec.hidden, spec.hidden, spec.ksize),
                       he_kernel_init<Real>(spec.hidden, spec.hidden, spec.ksize, rng));
    ids.b2 = store.add(prefix + ".conv2.bias", TensorShape{spec.hidden, 1, 1},
                       std::vector<Real>(std::size_t(spec.hidden), Real(0)));
    ids.a2 = store.add(prefix + ".act2.slope", scalar_shape(), {Real(slope_init)});
    ids.k3 = store.add(prefix + ".conv3.weight", kernel_shape(spec.out_channels, spec.hidden, spec.ksize),
                       he_kernel_init<Real>(spec.out_channels, spec.hidden, spec.ksize, rng));
    ids.b3 = store.add(prefix + ".conv3.bias", TensorShape{spec.out_channels, 1, 1},
                       std::vector<Real>(std::size_t(spec.out_channels), Real(0)));
    return ids;
}

// The block's parameters staged on a tape.
template <typename Real>
struct ProxBlockNodes {
    typename Tape<Real>::NodeId k1, b1, a1, k2, b2, a2, k3, b3;
    int ksize = 5;
};

template <typename Real>
ProxBlockNodes<Real> pick_block_nodes(const std::vector<typename Tape<Real>::NodeId>& staged,
                                      const ProxBlockParamIds& ids, int ksize = 5) {
    return ProxBlockNodes<Real>{staged[std::size_t(ids.k1)], staged[std::size_t(ids.b1)],
                                staged[std::size_t(ids.a1)], staged[std::size_t(ids.k2)],
                                staged[std::size_t(ids.b2)], staged[std::size_t(ids.a2)],
                                staged[std::size_t(ids.k3)], staged[std::size_t(ids.b3)], ksize};
}

// Concatenates [primary, extras...] along channels, runs the 3-conv/2-PReLU
// stack, and adds the first channel of the primary input to the output.
// All inputs must share spatial dimensions; the output has one channel.
template <typename Real>
typename Tape<Real>::NodeId prox_block_apply(Tape<Real>& tape, const ProxBlockNodes<Real>& p,
                                             typename Tape<Real>::NodeId primary,
                                             const std::vector<typename Tape<Real>::NodeId>& extras) {
    const TensorShape& ps = tape.shape(primary);
    for (auto id : extras) {
        const TensorShape& es = tape.shape(id);
        if (es.h != ps.h || es.w != ps.w)
            throw std::invalid_argument("prox block: spatial mismatch between inputs");
    }
    std::vector<typename Tape<Real>::NodeId> parts;
    parts.reserve(extras.size() + 1);
    parts.push_back(primary);
    for (auto id : extras) parts.push_back(id);
    auto h0 = parts.size() == 1 ? primary : tape.concat(parts);
    auto h1 = tape.prelu(tape.conv2d(h0, p.k1, p.b1, p.ksize), p.a1);
    auto h2 = tape.prelu(tape.conv2d(h1, p.k2, p.b2, p.ksize), p.a2);
    auto h3 = tape.conv2d(h2, p.k3, p.b3, p.ksize);
    if (tape.shape(h3).c != 1)
        throw std::invalid_argument("prox block: output must have one channel for the skip");
    auto skip = ps.c == 1 ? primary : tape.slice_channels(primary, 0, 1);
    return tape.add(h3, skip);
}

// ---- Adam ------------------------------------------------------------------

template <typename Real>
struct AdamState {
    Real lr = Real(1e-3);
    Real beta1 = Real(0.9);
    Real beta2 = Real(0.999);
    Real epsilon = Real(1e-8);
    long step = 0;
    std::vector<std::vector<Real>> m, v;
};

// Bias-corrected Adam update, in place on the store.
template <typename Real>
void adam_step(AdamState<Real>& state, ParamStore<Real>& params,
               const std::vector<std::vector<Real>>& grads) {
    if (grads.size() != params.count())
        throw std::invalid_argument("adam: gradient count does not match parameter count");
    if (state.m.empty()) {
        state.m.resize(params.count());
        state.v.resize(params.count());
        for (std::size_t i = 0; i < params.count(); ++i) {
            state.m[i].assign(params.values[i].size(), Real(0));
            state.v[i].assign(params.values[i].size(), Real(0));
        }
    }
    if (state.m.size() != params.count())
        throw std::invalid_argument("adam: state was initialized for a different parameter set");
    state.step += 1;
    const Real b1t = Real(1) - Real(std::pow(double(state.beta1), double(state.step)));
    const Real b2t = Real(1) - Real(std::pow(double(state.beta2), double(state.step)));
    for (std::size_t i = 0; i < params.count(); ++i) {
        if (grads[i].size() != params.values[i].size())
            throw std::invalid_argument("adam: gradient shape mismatch at parameter " +
                                        params.info[i].name);
        auto& th = params.values[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        const auto& g = grads[i];
        for (std::size_t j = 0; j < th.size(); ++j) {
            m[j] = state.beta1 * m[j] + (Real(1) - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (Real(1) - state.beta2) * g[j] * g[j];
            const Real mhat = m[j] / b1t;
            const Real vhat = v[j] / b2t;
            th[j] -= state.lr * mhat / (Real(std::sqrt(double(vhat))) + state.epsilon);
        }
    }
}

// ---- checkpoints -----------------------------------------------------------

// Writes <dir>/manifest.txt plus one raw float32 array file per parameter.
// Round-trips are bit-exact; loading verifies per-file checksums and shapes
// and throws std::runtime_error naming the offending file otherwise.
void save_checkpoint(const std::string& dir, const ParamStore<float>& params);
ParamStore<float> load_checkpoint(const std::string& dir);

}  // namespace sktomo
