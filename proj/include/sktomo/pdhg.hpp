#pragma once

// Classical saddle-point solvers: the primal-dual hybrid gradient method and
// its stochastic (angle-subset) variant, together with a power-method
// operator-norm estimator and CSV trace export.
//
// Both solvers minimize 0.5*|A x - b|^2 + r(x) through the saddle form with
// dual variable y. One iteration performs, in order,
//     y_i  <- prox_{sigma f_i*}(y_i + sigma * A_i xbar)   (one subset i)
//     x    <- prox_{tau r}(x - tau * d)
//     xbar <- x_new + beta * (x_new - x_old)
// where d is the running adjoint sum z = sum_j A_j^T y_j plus the sampled
// subset's correction (1/p_i - 1) * A_i^T (y_i_new - y_i_old). With a single
// subset the correction factor is exactly zero and the recursion is the
// textbook PDHG update, so the stochastic path degenerates to the
// deterministic one bitwise.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sktomo/image.hpp"
#include "sktomo/prox.hpp"
#include "sktomo/tomo.hpp"

namespace sktomo {

// Linear map between flat vectors with an exact adjoint and a cost weight in
// full-operator-call units. Wrappers around ProjectionOperator are provided;
// tests may supply closures directly (identity, diagonal scalings, ...).
struct LinearMap {
    std::size_t domain_size = 0;
    std::size_t range_size = 0;
    double cost_weight = 1.0;
    std::function<void(const double*, double*)> forward;  // y = A x
    std::function<void(const double*, double*)> adjoint;  // x = A^T y
};

LinearMap make_linear_map(const ProjectionOperator& op);

struct PDHGConfig {
    double sigma = 0.0;
    double tau = 0.0;
    double momentum_beta = 1.0;  // in [0, 1]
    int iterations = 1;
    std::uint64_t seed = 0;  // stochastic subset sampling only
    int num_subsets = 1;     // stochastic variant only
};

struct SolveTrace {
    std::vector<double> objective;        // length iterations + 1
    std::vector<double> cumulative_cost;  // same length, entry 0 is 0
    Image primal;
    Sinogram dual;
    CostLedger ledger;
};

// Largest-singular-value estimate via power iteration on A^T A; the returned
// per-iteration Rayleigh estimates are non-decreasing. Deterministic per seed.
double power_method_norm(const LinearMap& map, int iters, std::uint64_t seed);
double power_method_norm(const ProjectionOperator& op, int iters, std::uint64_t seed);
std::vector<double> power_method_estimates(const LinearMap& map, int iters, std::uint64_t seed);

// sigma = tau = 0.95 / |A|, beta = 1, with the given iteration count.
PDHGConfig default_pdhg_config(const ProjectionOperator& op, int iterations,
                               std::uint64_t seed = 7);

// Result of the generic flat-vector solve (testing hook; the Image/Sinogram
// wrappers below are the primary interface).
struct GenericTrace {
    std::vector<double> objective;
    std::vector<double> cumulative_cost;
    Image primal;
    std::vector<std::vector<double>> duals;  // one block per subset map
    CostLedger ledger;
};

// Shared solver core. subsets[i] must all act on the same image space;
// b_slices[i] is the data block for subset i. stochastic == false requires a
// single subset (plain PDHG); stochastic == true samples subsets uniformly
// with cfg.seed. Objective evaluations are not charged to the ledger.
GenericTrace saddle_solve(const std::vector<LinearMap>& subsets,
                          const std::vector<std::vector<double>>& b_slices,
                          const Regularizer& reg, const PDHGConfig& cfg, const Image& x0,
                          bool stochastic);

SolveTrace pdhg_solve(const ProjectionOperator& op, const DataTerm& term, const Regularizer& reg,
                      const PDHGConfig& cfg, const Image& x0);

// subsets must partition the operator's angles; cfg.num_subsets must match.
SolveTrace spdhg_solve(const std::vector<ProjectionOperator>& subsets, const DataTerm& term,
                       const Regularizer& reg, const PDHGConfig& cfg, const Image& x0);

// Plain-text export: header then one "iteration,objective,cumulative_cost"
// row per trace entry.
void write_trace_csv(const std::string& path, const SolveTrace& trace);

}  // namespace sktomo
