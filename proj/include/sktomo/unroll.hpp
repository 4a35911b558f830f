#pragma once

// Unrolled primal-dual reconstruction networks. One unified layer template
// covers the four families:
//
//   plain:        y_{k+1} = D_k(y_k, sigma_k*A x_k, b)
//                 x_{k+1} = P_k(x_k, tau_k*A^T y_{k+1})
//   stochastic:   layer k touches one angle subset i (cyclic or uniform
//                 random); per-subset dual states y_i are persistent and the
//                 dual block sees the subset rows of b.
//   sketched:     layers below the switch index run the operator products on
//                 a coarse grid: the dual feed is A_s(S x_k); option 1 lifts
//                 the adjoint back to full resolution with the transpose of
//                 the downsampler and runs the primal block there, option 2
//                 runs the primal block at coarse resolution on S x_k and
//                 bilinearly upsamples its output.
//   momentum:     blocks consume the last P+1 iterates as stacked channels
//                 (zero-padded before layer P).
//
// Setting the subset count to 1 makes the stochastic path coincide with the
// plain one node-for-node, and sketch factor 1 likewise disables the sampler
// nodes, so the reductions are bitwise, not approximate. Every forward /
// adjoint application of the projection operators is recorded in a
// CostLedger; the closed-form operator_cost() matches the measured ledger
// exactly for equal-size subset partitions.

#include <cstdint>
#include <string>
#include <vector>

#include "sktomo/image.hpp"
#include "sktomo/nn.hpp"
#include "sktomo/rng.hpp"
#include "sktomo/tape.hpp"
#include "sktomo/tomo.hpp"

namespace sktomo {

enum class NetVariant { lpd, lspd, sklpd1, sklpd2, sklspd1, sklspd2 };
enum class SubsetRule { cyclic, uniform_random };

bool variant_is_sketched(NetVariant v);
bool variant_is_stochastic(NetVariant v);
bool variant_is_option2(NetVariant v);
const char* variant_name(NetVariant v);
NetVariant variant_from_name(const std::string& name);  // throws on unknown names
const char* subset_rule_name(SubsetRule rule);
SubsetRule subset_rule_from_name(const std::string& name);

struct UnrollConfig {
    int K = 12;
    NetVariant variant = NetVariant::lpd;
    int m = 1;                                   // angle subsets (1 = deterministic)
    SubsetRule subset_rule = SubsetRule::cyclic;
    int sketch_factor = 1;
    int K_switch = 12;                           // layers >= K_switch use the full operator
    int momentum = 0;                            // P: extra history channels per block
    std::uint64_t seed = 0;                      // parameter init + random subset rule
    int hidden = 32;                             // CNN width inside each block
    int ksize = 5;
};

// Throws std::invalid_argument on inconsistent settings (negative counts,
// K_switch outside [0, K], subsets on a deterministic variant, a sketch
// factor on an unsketched variant, ...).
void validate_unroll_config(const UnrollConfig& cfg);

// Closed-form weighted operator-call count of one forward pass:
// sum over layers of 2 * (1/m) * (1/sketch_factor below the switch index).
// Assumes subsets of equal angle fraction 1/m, which is exact whenever m
// divides the angle count.
double operator_cost(const UnrollConfig& cfg);

// The operators one network instance runs on. subsets has exactly cfg.m
// entries; sketch_subsets is empty when cfg.sketch_factor == 1 and holds the
// coarse-grid version of each subset otherwise.
struct OperatorSet {
    ProjectionOperator full;
    std::vector<ProjectionOperator> subsets;
    std::vector<ProjectionOperator> sketch_subsets;
    SamplerSpec sampler;
};

OperatorSet make_operator_set(const Geometry& geom, int grid_side, const UnrollConfig& cfg);

// Static description: per-layer block parameter ids plus the trainable
// scalars sigma_k / tau_k, all indices into one ParamStore.
struct UnrolledNetwork {
    UnrollConfig cfg;
    std::vector<ProxBlockParamIds> dual_blocks;
    std::vector<ProxBlockParamIds> primal_blocks;
    std::vector<int> sigma_ids;
    std::vector<int> tau_ids;
};

// Registers all parameters (He-initialized kernels, zero biases, PReLU
// slopes 0.1, sigma_k = tau_k = step_init) on the store, seeded by cfg.seed.
// Parameter shapes depend only on K, momentum, hidden and ksize, so two
// variants built with the same seed share bit-identical initial values.
template <typename Real>
UnrolledNetwork build_network(ParamStore<Real>& store, const UnrollConfig& cfg, double step_init);

template <typename Real>
struct UnrollResult {
    typename Tape<Real>::NodeId out;  // single-channel image node
    std::vector<int> subset_trace;    // subset index each layer touched
};

// Records the K unrolled layers on the tape. staged must come from
// stage_params on the same store build_network filled. subset_rng drives the
// uniform_random rule (ignored for cyclic); pass nullptr to use a generator
// derived from cfg.seed.
template <typename Real>
UnrollResult<Real> unrolled_forward(Tape<Real>& tape, const UnrolledNetwork& net,
                                    const std::vector<typename Tape<Real>::NodeId>& staged,
                                    const OperatorSet& ops, const Sinogram& b, const Image& x0,
                                    CostLedger& ledger, Rng* subset_rng = nullptr);

// Inference convenience: one forward pass on a private tape, no gradients.
template <typename Real>
Image reconstruct(const UnrolledNetwork& net, const ParamStore<Real>& store,
                  const OperatorSet& ops, const Sinogram& b, const Image& x0, CostLedger& ledger,
                  Rng* subset_rng = nullptr);

// ---- training ---------------------------------------------------------------

struct TrainSample {
    Sinogram measurements;
    Image truth;
};

struct TrainLogRow {
    int epoch = 0;
    double mean_loss = 0.0;
    double cumulative_cost = 0.0;  // ledger total after the epoch
    double wall_seconds = 0.0;     // since training start
};

// Adam on the mean-squared error between network(b, FBP(b)) and the ground
// truth, batch size 1, samples visited in dataset order. Deterministic for a
// fixed seed; subset draws for the uniform_random rule are derived from
// (seed, step). Throws on an empty dataset or a non-finite loss.
template <typename Real>
std::vector<TrainLogRow> train_network(const UnrolledNetwork& net, ParamStore<Real>& store,
                                       const OperatorSet& ops,
                                       const std::vector<TrainSample>& data, int epochs,
                                       double lr, std::uint64_t seed, CostLedger& ledger);

// CSV with header epoch,mean_loss,cumulative_operator_cost,wall_seconds.
void write_training_log(const std::string& path, const std::vector<TrainLogRow>& rows);

}  // namespace sktomo
