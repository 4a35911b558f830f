#include "sktomo/tomo.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "sktomo/rng.hpp"

namespace sktomo {

namespace {

void check_geometry(const Geometry& g, int full_grid_side) {
    if (g.num_angles < 1) throw std::invalid_argument("geometry: num_angles must be >= 1");
    if (g.num_detectors < 1) throw std::invalid_argument("geometry: num_detectors must be >= 1");
    if (g.detector_spacing <= 0) throw std::invalid_argument("geometry: detector_spacing <= 0");
    if (g.angle_range <= 0) throw std::invalid_argument("geometry: angle_range <= 0");
    if (g.kind == GeometryKind::fan) {
        const double half_diag = 0.5 * full_grid_side * std::sqrt(2.0);
        if (g.source_radius <= half_diag)
            throw std::invalid_argument("geometry: fan source inside the grid");
        if (g.detector_radius <= half_diag)
            throw std::invalid_argument("geometry: fan detector inside the grid");
    }
}

struct Ray {
    double ox, oy;  // origin
    double dx, dy;  // unit direction
};

Ray make_ray(const Geometry& g, double theta, double s) {
    const double c = std::cos(theta), sn = std::sin(theta);
    if (g.kind == GeometryKind::parallel) return {s * c, s * sn, -sn, c};
    const double wx = -sn, wy = c;  // unit vector source -> detector center
    const double ox = -g.source_radius * wx;
    const double oy = -g.source_radius * wy;
    const double px = g.detector_radius * wx + s * c;
    const double py = g.detector_radius * wy + s * sn;
    double dx = px - ox, dy = py - oy;
    const double norm = std::sqrt(dx * dx + dy * dy);
    return {ox, oy, dx / norm, dy / norm};
}

// Joseph sampling: walk the slab axis the ray is most aligned with, linearly
// interpolating along the other axis. fn(flat_pixel_index, weight) sees the
// exact same weights in forward (gather) and adjoint (scatter) mode, which is
// what makes the adjoint a true transpose.
template <class Fn>
inline void trace(const Ray& ray, int g, double h, Fn&& fn) {
    const double half = 0.5 * g * h;
    if (std::abs(ray.dx) >= std::abs(ray.dy)) {
        const double dl = h / std::abs(ray.dx);
        const double slope = ray.dy / ray.dx;
        for (int c = 0; c < g; ++c) {
            const double xc = (c + 0.5) * h - half;
            const double y = ray.oy + (xc - ray.ox) * slope;
            const double rf = (y + half) / h - 0.5;
            const double fl = std::floor(rf);
            const int i0 = int(fl);
            const double fr = rf - fl;
            if (i0 >= 0 && i0 < g) fn(std::size_t(i0) * g + c, (1.0 - fr) * dl);
            if (fr != 0.0 && i0 + 1 >= 0 && i0 + 1 < g) fn(std::size_t(i0 + 1) * g + c, fr * dl);
        }
    } else {
        const double dl = h / std::abs(ray.dy);
        const double slope = ray.dx / ray.dy;
        for (int r = 0; r < g; ++r) {
            const double yr = (r + 0.5) * h - half;
            const double x = ray.ox + (yr - ray.oy) * slope;
            const double cf = (x + half) / h - 0.5;
            const double fl = std::floor(cf);
            const int i0 = int(fl);
            const double fr = cf - fl;
            if (i0 >= 0 && i0 < g) fn(std::size_t(r) * g + i0, (1.0 - fr) * dl);
            if (fr != 0.0 && i0 + 1 >= 0 && i0 + 1 < g) fn(std::size_t(r) * g + i0 + 1, fr * dl);
        }
    }
}

double detector_offset(const Geometry& g, int t) {
    return (t - 0.5 * (g.num_detectors - 1)) * g.detector_spacing;
}

using clock_type = std::chrono::steady_clock;

}  // namespace

ProjectionOperator build_operator(const Geometry& geom, int grid_side) {
    if (grid_side < 2) throw std::invalid_argument("build_operator: grid_side must be >= 2");
    check_geometry(geom, grid_side);
    ProjectionOperator op;
    op.geom = geom;
    op.grid_side = grid_side;
    op.full_grid_side = grid_side;
    op.cost_weight = 1.0;
    return op;
}

ProjectionOperator sketch_operator(const ProjectionOperator& op, int factor) {
    if (factor < 1) throw std::invalid_argument("sketch_operator: factor must be >= 1");
    if (op.grid_side % factor != 0)
        throw std::invalid_argument("sketch_operator: grid side not divisible by factor");
    if (op.grid_side / factor < 2)
        throw std::invalid_argument("sketch_operator: sketched grid too small");
    ProjectionOperator out = op;
    out.grid_side = op.grid_side / factor;
    out.cost_weight = op.cost_weight / factor;
    return out;
}

std::vector<ProjectionOperator> partition_subsets(const ProjectionOperator& op, int m,
                                                  SubsetScheme scheme) {
    const int rows = op.num_rows();
    if (m < 1 || m > rows) throw std::invalid_argument("partition_subsets: bad subset count");
    std::vector<std::vector<int>> lists(m);
    if (scheme == SubsetScheme::interleaved) {
        for (int j = 0; j < rows; ++j) lists[j % m].push_back(op.angle_index(j));
    } else {
        for (int i = 0; i < m; ++i) {
            const int lo = int(std::int64_t(i) * rows / m);
            const int hi = int(std::int64_t(i + 1) * rows / m);
            for (int j = lo; j < hi; ++j) lists[i].push_back(op.angle_index(j));
        }
    }
    std::vector<ProjectionOperator> out;
    out.reserve(m);
    for (int i = 0; i < m; ++i) {
        ProjectionOperator part = op;
        part.subset = std::move(lists[i]);
        part.cost_weight = (double(part.subset.size()) / op.geom.num_angles) *
                           (double(op.grid_side) / op.full_grid_side);
        out.push_back(std::move(part));
    }
    return out;
}

Sinogram forward_project(const ProjectionOperator& op, const Image& img, CostLedger& ledger) {
    if (img.width != op.grid_side || img.height != op.grid_side)
        throw std::invalid_argument("forward_project: image grid does not match operator");
    const auto t0 = clock_type::now();
    const Geometry& g = op.geom;
    const int rows = op.num_rows();
    Sinogram out(rows, g.num_detectors);
    const double h = op.pixel_size();
    const double* pix = img.values.data();
    for (int a = 0; a < rows; ++a) {
        const double theta = g.angle_of(op.angle_index(a));
        double* row = out.values.data() + std::size_t(a) * g.num_detectors;
        for (int t = 0; t < g.num_detectors; ++t) {
            const Ray ray = make_ray(g, theta, detector_offset(g, t));
            double acc = 0.0;
            trace(ray, op.grid_side, h,
                  [&](std::size_t idx, double w) { acc += pix[idx] * w; });
            row[t] = acc;
        }
    }
    const auto t1 = clock_type::now();
    ledger.record(false, op.cost_weight, std::chrono::duration<double>(t1 - t0).count());
    return out;
}

Image back_project(const ProjectionOperator& op, const Sinogram& sino, CostLedger& ledger) {
    if (sino.num_angles != op.num_rows() || sino.num_detectors != op.geom.num_detectors)
        throw std::invalid_argument("back_project: sinogram shape does not match operator");
    const auto t0 = clock_type::now();
    const Geometry& g = op.geom;
    Image out(op.grid_side);
    const double h = op.pixel_size();
    double* pix = out.values.data();
    for (int a = 0; a < sino.num_angles; ++a) {
        const double theta = g.angle_of(op.angle_index(a));
        const double* row = sino.values.data() + std::size_t(a) * g.num_detectors;
        for (int t = 0; t < g.num_detectors; ++t) {
            const double v = row[t];
            if (v == 0.0) continue;
            const Ray ray = make_ray(g, theta, detector_offset(g, t));
            trace(ray, op.grid_side, h, [&](std::size_t idx, double w) { pix[idx] += v * w; });
        }
    }
    const auto t1 = clock_type::now();
    ledger.record(true, op.cost_weight, std::chrono::duration<double>(t1 - t0).count());
    return out;
}

double adjoint_discrepancy(const ProjectionOperator& op, int trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("adjoint_discrepancy: trials must be >= 1");
    Rng rng(seed);
    CostLedger scratch;
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        Image x(op.grid_side);
        for (double& v : x.values) v = rng.normal();
        Sinogram y(op.num_rows(), op.geom.num_detectors);
        for (double& v : y.values) v = rng.normal();
        const Sinogram ax = forward_project(op, x, scratch);
        const Image aty = back_project(op, y, scratch);
        double lhs = 0.0, rhs = 0.0, nax = 0.0, ny = 0.0;
        for (std::size_t i = 0; i < ax.values.size(); ++i) {
            lhs += ax.values[i] * y.values[i];
            nax += ax.values[i] * ax.values[i];
            ny += y.values[i] * y.values[i];
        }
        for (std::size_t i = 0; i < x.values.size(); ++i) rhs += x.values[i] * aty.values[i];
        const double denom = std::sqrt(nax) * std::sqrt(ny);
        const double disc = std::abs(lhs - rhs) / denom;
        if (disc > worst) worst = disc;
    }
    return worst;
}

}  // namespace sktomo
