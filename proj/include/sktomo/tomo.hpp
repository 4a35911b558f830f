#pragma once

// Tomographic forward/adjoint operators with matched (exact-transpose)
// discretization, angular subset restriction, sketched (coarse-grid)
// variants, filtered backprojection, and operator-call cost accounting.
//
// World conventions: the reconstruction field of view is a square of
// full_grid_side pixel units centered at the origin; a grid of side g covers
// it with pixel size full_grid_side/g, so sketched operators see the same
// physical scene. Projection angle j is j*(angle_range/num_angles); detector
// bin t sits at offset (t - (num_detectors-1)/2)*detector_spacing along the
// detector axis (cos t, sin t), and rays travel along (-sin t, cos t) for
// parallel geometry. Fan beams place the source at -source_radius*(-sin t,
// cos t) and a flat detector line through +detector_radius*(-sin t, cos t).

#include <cstdint>
#include <map>
#include <vector>

#include "sktomo/image.hpp"

namespace sktomo {

enum class GeometryKind { parallel, fan };
enum class SubsetScheme { interleaved, contiguous };
enum class FbpFilter { ramlak, hann };

struct Geometry {
    GeometryKind kind = GeometryKind::parallel;
    int num_angles = 0;
    int num_detectors = 0;
    double detector_spacing = 1.0;
    double source_radius = 0.0;    // fan only
    double detector_radius = 0.0;  // fan only
    double angle_range = 3.141592653589793;

    double angle_of(int j) const { return j * (angle_range / num_angles); }
};

// Weighted count of operator applications, in units of one full-resolution,
// full-angle forward (or adjoint) call. Counts are kept per weight so the
// accumulated cost reproduces the closed-form sum exactly.
struct CostLedger {
    long num_forward = 0;
    long num_adjoint = 0;
    double seconds = 0.0;  // wall time spent inside apply calls
    std::map<double, long> weight_counts;

    void record(bool adjoint, double weight, double secs) {
        (adjoint ? num_adjoint : num_forward) += 1;
        weight_counts[weight] += 1;
        seconds += secs;
    }
    double accumulated_cost() const {
        double total = 0.0;
        for (const auto& [w, n] : weight_counts) total += double(n) * w;
        return total;
    }
};

struct ProjectionOperator {
    Geometry geom;
    int grid_side = 0;       // image side this operator acts on
    int full_grid_side = 0;  // reference (unsketched) side; fixes the FOV
    std::vector<int> subset;  // strictly increasing angle indices; empty = all
    double cost_weight = 1.0;

    int num_rows() const { return subset.empty() ? geom.num_angles : int(subset.size()); }
    int angle_index(int row) const { return subset.empty() ? row : subset[row]; }
    double pixel_size() const { return double(full_grid_side) / grid_side; }
    std::size_t image_size() const { return std::size_t(grid_side) * grid_side; }
};

// Full operator at the given grid (FOV = grid_side pixels, cost weight 1).
ProjectionOperator build_operator(const Geometry& geom, int grid_side);

// Coarse-grid version of op: same geometry, subset and FOV, grid divided by
// factor, cost weight scaled by 1/factor.
ProjectionOperator sketch_operator(const ProjectionOperator& op, int factor);

// Disjoint angle subsets covering all angles. Interleaved assigns angle j to
// subset j mod m; contiguous splits the angle list into m blocks.
std::vector<ProjectionOperator> partition_subsets(const ProjectionOperator& op, int m,
                                                  SubsetScheme scheme = SubsetScheme::interleaved);

// Joseph-style ray-driven projection restricted to op's subset rows.
Sinogram forward_project(const ProjectionOperator& op, const Image& img, CostLedger& ledger);

// Exact transpose of forward_project (same ray weights, scatter instead of
// gather).
Image back_project(const ProjectionOperator& op, const Sinogram& sino, CostLedger& ledger);

// Filtered backprojection: frequency-domain ramp filter (band-limited Ram-Lak,
// optionally Hann-windowed) followed by pixel-driven interpolating
// backprojection (cosine-weighted with distance correction for fan beams).
// Negative output pixels are clamped to zero unless clip_negative is false.
Image fbp_reconstruct(const Geometry& geom, const Sinogram& sino, int grid_side, FbpFilter filter,
                      bool clip_negative = true);

// Max over seeded Gaussian trials of |<Ax,y> - <x,A^T y>| / (|Ax|·|y|).
double adjoint_discrepancy(const ProjectionOperator& op, int trials, std::uint64_t seed);

}  // namespace sktomo
