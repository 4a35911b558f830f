#include "sktomo/pdhg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <stdexcept>

#include "sktomo/rng.hpp"

namespace sktomo {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void validate_config(const PDHGConfig& cfg) {
    if (!(cfg.sigma > 0.0)) throw std::invalid_argument("pdhg: sigma must be > 0");
    if (!(cfg.tau > 0.0)) throw std::invalid_argument("pdhg: tau must be > 0");
    if (!(cfg.momentum_beta >= 0.0 && cfg.momentum_beta <= 1.0))
        throw std::invalid_argument("pdhg: momentum_beta must be in [0, 1]");
    if (cfg.iterations < 1) throw std::invalid_argument("pdhg: iterations must be >= 1");
}

// Stacks the subset maps into one tall operator for the step-size check.
LinearMap stack_maps(const std::vector<LinearMap>& subsets) {
    LinearMap all;
    all.domain_size = subsets.front().domain_size;
    all.range_size = 0;
    for (const LinearMap& m : subsets) all.range_size += m.range_size;
    all.cost_weight = 1.0;
    all.forward = [&subsets](const double* x, double* y) {
        std::size_t off = 0;
        for (const LinearMap& m : subsets) {
            m.forward(x, y + off);
            off += m.range_size;
        }
    };
    all.adjoint = [&subsets](const double* y, double* x) {
        const std::size_t d = subsets.front().domain_size;
        std::vector<double> acc(d, 0.0), part(d);
        std::size_t off = 0;
        for (const LinearMap& m : subsets) {
            m.adjoint(y + off, part.data());
            for (std::size_t i = 0; i < d; ++i) acc[i] += part[i];
            off += m.range_size;
        }
        std::copy(acc.begin(), acc.end(), x);
    };
    return all;
}

}  // namespace

LinearMap make_linear_map(const ProjectionOperator& op) {
    LinearMap map;
    map.domain_size = op.image_size();
    map.range_size = std::size_t(op.num_rows()) * op.geom.num_detectors;
    map.cost_weight = op.cost_weight;
    // The wrapped calls keep their own ledger; callers that need cost
    // accounting record map.cost_weight themselves (see saddle_solve), which
    // keeps objective-only evaluations free of charge.
    auto scratch = std::make_shared<CostLedger>();
    map.forward = [op, scratch](const double* x, double* y) {
        Image img(op.grid_side);
        std::copy(x, x + img.values.size(), img.values.begin());
        const Sinogram s = forward_project(op, img, *scratch);
        std::copy(s.values.begin(), s.values.end(), y);
    };
    map.adjoint = [op, scratch](const double* y, double* x) {
        Sinogram s(op.num_rows(), op.geom.num_detectors);
        std::copy(y, y + s.values.size(), s.values.begin());
        const Image img = back_project(op, s, *scratch);
        std::copy(img.values.begin(), img.values.end(), x);
    };
    return map;
}

std::vector<double> power_method_estimates(const LinearMap& map, int iters, std::uint64_t seed) {
    if (iters < 1) throw std::invalid_argument("power_method_norm: iters must be >= 1");
    Rng rng(derive_seed(seed, 0x9090));
    std::vector<double> v(map.domain_size), w(map.range_size), back(map.domain_size);
    for (double& x : v) x = rng.normal();
    double nv = norm2(v);
    if (nv == 0.0) return std::vector<double>(std::size_t(iters), 0.0);
    for (double& x : v) x /= nv;

    std::vector<double> estimates;
    estimates.reserve(std::size_t(iters));
    for (int it = 0; it < iters; ++it) {
        map.forward(v.data(), w.data());
        const double nw = norm2(w);  // |A v| with |v| == 1: Rayleigh estimate
        estimates.push_back(nw);
        if (nw == 0.0) {
            std::fill(estimates.begin() + it, estimates.end(), 0.0);
            estimates.resize(std::size_t(iters), 0.0);
            break;
        }
        map.adjoint(w.data(), back.data());
        const double nb = norm2(back);
        if (nb == 0.0) break;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = back[i] / nb;
    }
    while (estimates.size() < std::size_t(iters)) estimates.push_back(estimates.back());
    return estimates;
}

double power_method_norm(const LinearMap& map, int iters, std::uint64_t seed) {
    return power_method_estimates(map, iters, seed).back();
}

double power_method_norm(const ProjectionOperator& op, int iters, std::uint64_t seed) {
    return power_method_norm(make_linear_map(op), iters, seed);
}

PDHGConfig default_pdhg_config(const ProjectionOperator& op, int iterations, std::uint64_t seed) {
    const double norm = power_method_norm(op, 30, seed);
    PDHGConfig cfg;
    cfg.sigma = cfg.tau = 0.95 / std::max(norm, 1e-12);
    cfg.momentum_beta = 1.0;
    cfg.iterations = iterations;
    cfg.seed = seed;
    cfg.num_subsets = 1;
    return cfg;
}

GenericTrace saddle_solve(const std::vector<LinearMap>& subsets,
                          const std::vector<std::vector<double>>& b_slices,
                          const Regularizer& reg, const PDHGConfig& cfg, const Image& x0,
                          bool stochastic) {
    validate_config(cfg);
    if (subsets.empty()) throw std::invalid_argument("pdhg: no operator subsets given");
    if (b_slices.size() != subsets.size())
        throw std::invalid_argument("pdhg: data slice count does not match subset count");
    if (!stochastic && subsets.size() != 1)
        throw std::invalid_argument("pdhg: deterministic solve requires a single operator");
    const std::size_t d = subsets.front().domain_size;
    if (x0.values.size() != d) throw std::invalid_argument("pdhg: x0 size does not match operator");
    for (std::size_t i = 0; i < subsets.size(); ++i) {
        if (subsets[i].domain_size != d)
            throw std::invalid_argument("pdhg: subsets act on different image spaces");
        if (b_slices[i].size() != subsets[i].range_size)
            throw std::invalid_argument("pdhg: data slice shape mismatch");
    }

    {  // Step-size sanity: recommended sigma * tau * |A|^2 <= 1.
        const LinearMap stacked = stack_maps(subsets);
        const double norm = power_method_norm(stacked, 16, cfg.seed ^ 0x5117);
        if (cfg.sigma * cfg.tau * norm * norm > 1.0 + 1e-6)
            std::cerr << "pdhg warning: sigma*tau*|A|^2 = " << cfg.sigma * cfg.tau * norm * norm
                      << " exceeds 1; convergence is not guaranteed\n";
    }

    const std::size_t m = subsets.size();
    const int side = x0.side();
    GenericTrace out;
    out.duals.resize(m);
    std::vector<std::vector<double>> adj_parts(m);  // c_j = A_j^T y_j
    for (std::size_t j = 0; j < m; ++j) {
        out.duals[j].assign(subsets[j].range_size, 0.0);
        adj_parts[j].assign(d, 0.0);
    }

    Image x = x0;
    Image xbar = x0;
    std::vector<double> t_buf, c_new(d), delta(d), direction(d), fwd_buf;
    TvDualState tv_warm;  // carried across iterations so the tv prox refines in place
    Rng rng(cfg.seed);

    auto objective = [&](const Image& img) {
        double data = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            fwd_buf.assign(subsets[j].range_size, 0.0);
            subsets[j].forward(img.values.data(), fwd_buf.data());
            for (std::size_t i = 0; i < fwd_buf.size(); ++i) {
                const double e = fwd_buf[i] - b_slices[j][i];
                data += 0.5 * e * e;
            }
        }
        return data + regularizer_value(reg, img);
    };

    out.objective.reserve(std::size_t(cfg.iterations) + 1);
    out.cumulative_cost.reserve(std::size_t(cfg.iterations) + 1);
    out.objective.push_back(objective(x));
    out.cumulative_cost.push_back(0.0);

    const double sigma = cfg.sigma;
    const double dual_scale = 1.0 / (1.0 + sigma);
    for (int k = 0; k < cfg.iterations; ++k) {
        const std::size_t i = stochastic ? std::size_t(rng.below(m)) : 0;
        const LinearMap& a_i = subsets[i];
        std::vector<double>& y_i = out.duals[i];

        // Dual ascent on the sampled block: y_i <- prox_{sigma f_i*}(y_i + sigma A_i xbar).
        t_buf.assign(a_i.range_size, 0.0);
        auto t0 = Clock::now();
        a_i.forward(xbar.values.data(), t_buf.data());
        out.ledger.record(false, a_i.cost_weight, seconds_since(t0));
        for (std::size_t j = 0; j < t_buf.size(); ++j)
            y_i[j] = (y_i[j] + sigma * t_buf[j] - sigma * b_slices[i][j]) * dual_scale;

        // Primal direction: refreshed adjoint sum plus sampled-block correction.
        t0 = Clock::now();
        a_i.adjoint(y_i.data(), c_new.data());
        out.ledger.record(true, a_i.cost_weight, seconds_since(t0));
        for (std::size_t j = 0; j < d; ++j) delta[j] = c_new[j] - adj_parts[i][j];
        adj_parts[i] = c_new;
        const double extrap = double(m) - 1.0;  // 1/p_i - 1 under uniform sampling
        std::fill(direction.begin(), direction.end(), 0.0);
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t l = 0; l < d; ++l) direction[l] += adj_parts[j][l];
        if (extrap != 0.0)
            for (std::size_t l = 0; l < d; ++l) direction[l] += extrap * delta[l];

        // Primal descent and momentum.
        Image cand(side);
        for (std::size_t l = 0; l < d; ++l) cand.values[l] = x.values[l] - cfg.tau * direction[l];
        Image x_new = apply_regularizer_prox(reg, cand, cfg.tau, &tv_warm);
        if (!x_new.all_finite())
            throw std::runtime_error("pdhg diverged at iteration " + std::to_string(k) +
                                     ": non-finite iterate");
        for (std::size_t l = 0; l < d; ++l) {
            xbar.values[l] = x_new.values[l] + cfg.momentum_beta * (x_new.values[l] - x.values[l]);
        }
        x = std::move(x_new);

        out.objective.push_back(objective(x));
        out.cumulative_cost.push_back(out.ledger.accumulated_cost());
    }

    out.primal = std::move(x);
    return out;
}

namespace {

// Maps each subset's local rows to global sinogram rows and checks the
// subsets tile the full angle set exactly once.
std::vector<std::vector<int>> partition_rows(const std::vector<ProjectionOperator>& subsets) {
    if (subsets.empty()) throw std::invalid_argument("spdhg: empty subset list");
    const Geometry& g = subsets.front().geom;
    std::vector<int> seen(std::size_t(g.num_angles), 0);
    std::vector<std::vector<int>> rows(subsets.size());
    for (std::size_t s = 0; s < subsets.size(); ++s) {
        const ProjectionOperator& op = subsets[s];
        if (op.geom.num_angles != g.num_angles || op.geom.num_detectors != g.num_detectors ||
            op.geom.kind != g.kind || op.grid_side != subsets.front().grid_side ||
            op.full_grid_side != subsets.front().full_grid_side)
            throw std::invalid_argument("spdhg: subsets disagree on geometry or grid");
        rows[s].resize(std::size_t(op.num_rows()));
        for (int r = 0; r < op.num_rows(); ++r) {
            const int a = op.angle_index(r);
            if (a < 0 || a >= g.num_angles || seen[std::size_t(a)]++)
                throw std::invalid_argument("spdhg: subsets do not partition the angles");
            rows[s][std::size_t(r)] = a;
        }
    }
    for (int c : seen)
        if (c != 1) throw std::invalid_argument("spdhg: subsets do not partition the angles");
    return rows;
}

std::vector<double> slice_rows(const Sinogram& full, const std::vector<int>& angles) {
    const int nd = full.num_detectors;
    std::vector<double> out(angles.size() * std::size_t(nd));
    for (std::size_t r = 0; r < angles.size(); ++r)
        std::copy(full.values.begin() + std::size_t(angles[r]) * nd,
                  full.values.begin() + std::size_t(angles[r] + 1) * nd,
                  out.begin() + r * std::size_t(nd));
    return out;
}

SolveTrace finish_trace(GenericTrace&& core, const Geometry& geom,
                        const std::vector<std::vector<int>>& rows) {
    SolveTrace trace;
    trace.objective = std::move(core.objective);
    trace.cumulative_cost = std::move(core.cumulative_cost);
    trace.primal = std::move(core.primal);
    trace.ledger = core.ledger;
    trace.dual = Sinogram(geom.num_angles, geom.num_detectors);
    for (std::size_t s = 0; s < rows.size(); ++s)
        for (std::size_t r = 0; r < rows[s].size(); ++r)
            std::copy(core.duals[s].begin() + std::ptrdiff_t(r) * geom.num_detectors,
                      core.duals[s].begin() + std::ptrdiff_t(r + 1) * geom.num_detectors,
                      trace.dual.values.begin() +
                          std::size_t(rows[s][r]) * geom.num_detectors);
    return trace;
}

}  // namespace

SolveTrace pdhg_solve(const ProjectionOperator& op, const DataTerm& term, const Regularizer& reg,
                      const PDHGConfig& cfg, const Image& x0) {
    if (!op.subset.empty())
        throw std::invalid_argument("pdhg_solve: expects the full (unrestricted) operator");
    if (term.data.num_angles != op.geom.num_angles ||
        term.data.num_detectors != op.geom.num_detectors)
        throw std::invalid_argument("pdhg_solve: data shape does not match operator");
    const std::vector<std::vector<int>> rows = partition_rows({op});
    GenericTrace core = saddle_solve({make_linear_map(op)}, {slice_rows(term.data, rows[0])}, reg,
                                     cfg, x0, false);
    return finish_trace(std::move(core), op.geom, rows);
}

SolveTrace spdhg_solve(const std::vector<ProjectionOperator>& subsets, const DataTerm& term,
                       const Regularizer& reg, const PDHGConfig& cfg, const Image& x0) {
    const std::vector<std::vector<int>> rows = partition_rows(subsets);
    if (cfg.num_subsets != int(subsets.size()))
        throw std::invalid_argument("spdhg_solve: cfg.num_subsets does not match subset list");
    const Geometry& g = subsets.front().geom;
    if (term.data.num_angles != g.num_angles || term.data.num_detectors != g.num_detectors)
        throw std::invalid_argument("spdhg_solve: data shape does not match operators");
    std::vector<LinearMap> maps;
    std::vector<std::vector<double>> slices;
    maps.reserve(subsets.size());
    slices.reserve(subsets.size());
    for (std::size_t s = 0; s < subsets.size(); ++s) {
        maps.push_back(make_linear_map(subsets[s]));
        slices.push_back(slice_rows(term.data, rows[s]));
    }
    GenericTrace core = saddle_solve(maps, slices, reg, cfg, x0, true);
    return finish_trace(std::move(core), g, rows);
}

void write_trace_csv(const std::string& path, const SolveTrace& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
    out << "iteration,objective,cumulative_cost\n";
    char line[96];
    for (std::size_t k = 0; k < trace.objective.size(); ++k) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", k, trace.objective[k],
                      trace.cumulative_cost[k]);
        out << line;
    }
    if (!out) throw std::runtime_error("write_trace_csv: write failed for " + path);
}

}  // namespace sktomo
