#include "sktomo/prox.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sktomo {

namespace {

void check_strength(double lambda, const char* who) {
    if (!(lambda >= 0.0))
        throw std::invalid_argument(std::string(who) + ": negative or non-finite strength");
}

// Forward-difference gradient with replicated boundary: the difference with a
// replicated neighbor is zero, so the last column/row components vanish.
void grad_forward(const std::vector<double>& u, int n, std::vector<double>& gx,
                  std::vector<double>& gy) {
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const std::size_t i = std::size_t(r) * n + c;
            gx[i] = (c + 1 < n) ? u[i + 1] - u[i] : 0.0;
            gy[i] = (r + 1 < n) ? u[i + n] - u[i] : 0.0;
        }
    }
}

// Negative adjoint of grad_forward: <grad u, p> == -<u, div p>.
void divergence(const std::vector<double>& px, const std::vector<double>& py, int n,
                std::vector<double>& div) {
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const std::size_t i = std::size_t(r) * n + c;
            double d = 0.0;
            if (c + 1 < n) d += px[i];
            if (c > 0) d -= px[i - 1];
            if (r + 1 < n) d += py[i];
            if (r > 0) d -= py[i - std::size_t(n)];
            div[i] = d;
        }
    }
}

struct TvRun {
    Image result;
    std::vector<double> dual_objective;
};

TvRun tv_inner_loop(const Image& x, double lambda, int inner_iters, TvDualState* warm) {
    check_strength(lambda, "prox_tv");
    if (inner_iters < 1) throw std::invalid_argument("prox_tv: inner_iters must be >= 1");
    if (x.width != x.height) throw std::invalid_argument("prox_tv: image must be square");

    TvRun run;
    const int n = x.side();
    const std::size_t total = x.values.size();

    auto dual_objective = [&](const std::vector<double>& div) {
        double s = 0.0;
        for (std::size_t i = 0; i < total; ++i) {
            const double e = x.values[i] - lambda * div[i];
            s += 0.5 * e * e;
        }
        return s;
    };

    if (lambda == 0.0) {
        run.result = x;
        std::vector<double> zero(total, 0.0);
        run.dual_objective.assign(std::size_t(inner_iters) + 1, dual_objective(zero));
        return run;
    }

    std::vector<double> px(total, 0.0), py(total, 0.0);
    if (warm && warm->px.size() == total && warm->py.size() == total) {
        px = warm->px;
        py = warm->py;
    }
    std::vector<double> div(total), w(total), gx(total), gy(total);
    divergence(px, py, n, div);
    run.dual_objective.reserve(std::size_t(inner_iters) + 1);
    run.dual_objective.push_back(dual_objective(div));

    const double step = 0.125;
    for (int it = 0; it < inner_iters; ++it) {
        for (std::size_t i = 0; i < total; ++i) w[i] = div[i] - x.values[i] / lambda;
        grad_forward(w, n, gx, gy);
        for (std::size_t i = 0; i < total; ++i) {
            double ax = px[i] + step * gx[i];
            double ay = py[i] + step * gy[i];
            const double norm = std::sqrt(ax * ax + ay * ay);
            if (norm > 1.0) {
                ax /= norm;
                ay /= norm;
            }
            px[i] = ax;
            py[i] = ay;
        }
        divergence(px, py, n, div);
        run.dual_objective.push_back(dual_objective(div));
    }

    run.result = Image(n);
    for (std::size_t i = 0; i < total; ++i)
        run.result.values[i] = x.values[i] - lambda * div[i];
    if (warm) {
        warm->px = std::move(px);
        warm->py = std::move(py);
    }
    return run;
}

}  // namespace

Sinogram prox_conjugate_data(const DataTerm& term, const Sinogram& v, double sigma) {
    if (term.kind != DataTermKind::least_squares)
        throw std::invalid_argument("prox_conjugate_data: unsupported data term");
    if (v.num_angles != term.data.num_angles || v.num_detectors != term.data.num_detectors)
        throw std::invalid_argument("prox_conjugate_data: shape mismatch between v and data");
    if (!(sigma > 0.0)) throw std::invalid_argument("prox_conjugate_data: sigma must be > 0");

    Sinogram out(v.num_angles, v.num_detectors);
    const double inv = 1.0 / (1.0 + sigma);
    for (std::size_t i = 0; i < v.values.size(); ++i)
        out.values[i] = (v.values[i] - sigma * term.data.values[i]) * inv;
    return out;
}

Image soft_threshold(const Image& x, double lambda) {
    check_strength(lambda, "soft_threshold");
    Image out(x.side());
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        const double v = x.values[i];
        const double mag = std::abs(v) - lambda;
        out.values[i] = mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0;
    }
    return out;
}

Image prox_box(const Image& x, double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("prox_box: lo must be <= hi");
    Image out = x;
    for (double& v : out.values) v = v < lo ? lo : (v > hi ? hi : v);
    return out;
}

Image prox_tv(const Image& x, double lambda, int inner_iters) {
    return tv_inner_loop(x, lambda, inner_iters, nullptr).result;
}

Image prox_tv_warm(const Image& x, double lambda, int inner_iters, TvDualState& state) {
    return tv_inner_loop(x, lambda, inner_iters, &state).result;
}

std::vector<double> prox_tv_dual_trace(const Image& x, double lambda, int inner_iters) {
    return tv_inner_loop(x, lambda, inner_iters, nullptr).dual_objective;
}

double tv_value(const Image& x) {
    const int n = x.side();
    double total = 0.0;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double v = x.at(r, c);
            const double dx = (c + 1 < n) ? x.at(r, c + 1) - v : 0.0;
            const double dy = (r + 1 < n) ? x.at(r + 1, c) - v : 0.0;
            total += std::sqrt(dx * dx + dy * dy);
        }
    }
    return total;
}

Image apply_regularizer_prox(const Regularizer& reg, const Image& v, double tau,
                             TvDualState* warm) {
    check_strength(reg.strength, "apply_regularizer_prox");
    if (!(tau > 0.0)) throw std::invalid_argument("apply_regularizer_prox: tau must be > 0");
    switch (reg.kind) {
        case RegularizerKind::zero:
            return v;
        case RegularizerKind::l1:
            return soft_threshold(v, tau * reg.strength);
        case RegularizerKind::box:
            return prox_box(v, reg.lo, reg.hi);
        case RegularizerKind::tv:
            return tv_inner_loop(v, tau * reg.strength, reg.tv_inner_iters, warm).result;
    }
    throw std::logic_error("apply_regularizer_prox: unknown regularizer kind");
}

double regularizer_value(const Regularizer& reg, const Image& x) {
    check_strength(reg.strength, "regularizer_value");
    switch (reg.kind) {
        case RegularizerKind::zero:
            return 0.0;
        case RegularizerKind::l1: {
            double s = 0.0;
            for (double v : x.values) s += std::abs(v);
            return reg.strength * s;
        }
        case RegularizerKind::tv:
            return reg.strength * tv_value(x);
        case RegularizerKind::box: {
            const double slack = 1e-9 * (1.0 + std::abs(reg.hi) + std::abs(reg.lo));
            for (double v : x.values)
                if (v < reg.lo - slack || v > reg.hi + slack)
                    return std::numeric_limits<double>::infinity();
            return 0.0;
        }
    }
    throw std::logic_error("regularizer_value: unknown regularizer kind");
}

}  // namespace sktomo
