#pragma once

// Proximal operators used by the primal-dual solvers: the conjugate prox of
// the least-squares data term, elementwise soft-thresholding (l1), box
// projection, and an isotropic total-variation prox computed by a dual
// projected-gradient inner loop.

#include <vector>

#include "sktomo/image.hpp"

namespace sktomo {

enum class DataTermKind { least_squares };

// Data-fitting term f_b anchored to a measured sinogram b. Only the
// least-squares form f_b(h) = 0.5*|h - b|^2 is implemented; its conjugate
// prox has the closed form used by prox_conjugate_data.
struct DataTerm {
    DataTermKind kind = DataTermKind::least_squares;
    Sinogram data;
};

enum class RegularizerKind { zero, l1, tv, box };

struct Regularizer {
    RegularizerKind kind = RegularizerKind::zero;
    double strength = 0.0;  // multiplier for l1 / tv
    double lo = 0.0;        // box bounds
    double hi = 1.0;
    int tv_inner_iters = 30;  // dual iterations per tv prox evaluation
};

// prox_{sigma * f_b^*}(v) = (v - sigma*b) / (1 + sigma) for the least-squares
// data term. Throws on shape mismatch or sigma <= 0.
Sinogram prox_conjugate_data(const DataTerm& term, const Sinogram& v, double sigma);

// Elementwise sign(x) * max(|x| - lambda, 0). Throws on lambda < 0.
Image soft_threshold(const Image& x, double lambda);

// Elementwise clamp to [lo, hi]. Throws when lo > hi.
Image prox_box(const Image& x, double lo, double hi);

// Approximate argmin_u 0.5*|u - x|^2 + lambda*TV_iso(u) via projected
// gradient on the dual problem with step 1/8 (the inverse Lipschitz constant
// of the discrete div-grad composition). Forward-difference gradients with
// replicated boundary. lambda == 0 returns x exactly.
Image prox_tv(const Image& x, double lambda, int inner_iters);

// Dual variable of the tv prox inner loop, reusable across calls. Warm
// starting from the previous outer iterate's dual point makes the inexact
// prox asymptotically exact inside an outer solver loop.
struct TvDualState {
    std::vector<double> px, py;  // empty means cold start
};

Image prox_tv_warm(const Image& x, double lambda, int inner_iters, TvDualState& state);

// Dual objective 0.5*|x - lambda*div p_n|^2 at every inner iterate of the
// prox_tv loop (entry 0 is the starting point p_0 = 0). The step size 1/8
// makes this sequence non-increasing; exposed so that property is testable.
std::vector<double> prox_tv_dual_trace(const Image& x, double lambda, int inner_iters);

// Isotropic total variation: sum over pixels of the Euclidean norm of the
// forward-difference gradient, with replicated boundary (zero difference at
// the last row/column).
double tv_value(const Image& x);

// prox_{tau * r}(v) for the configured regularizer. The optional warm-start
// state is consulted only by the tv kind.
Image apply_regularizer_prox(const Regularizer& reg, const Image& v, double tau,
                             TvDualState* warm = nullptr);

// r(x): 0 for zero, strength*|x|_1 for l1, strength*TV_iso(x) for tv, and the
// box indicator (0 inside, +infinity outside, with a tiny feasibility slack
// for roundoff) for box.
double regularizer_value(const Regularizer& reg, const Image& x);

}  // namespace sktomo
