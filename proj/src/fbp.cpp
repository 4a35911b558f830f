#include <cmath>
#include <stdexcept>
#include <vector>

#include "sktomo/fft.hpp"
#include "sktomo/tomo.hpp"

namespace sktomo {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Frequency response of the band-limited ramp filter: the spatial-domain
// Ram-Lak kernel on support [-(nd-1), nd-1] (spacing ds), zero-embedded in a
// length-m array and transformed. Optionally Hann-windowed.
std::vector<double> ramp_filter(std::size_t m, int nd, double ds, FbpFilter filter) {
    std::vector<double> re(m, 0.0), im(m, 0.0);
    re[0] = 1.0 / (4.0 * ds * ds);
    for (int n = 1; n < nd; ++n) {
        if (n % 2 == 0) continue;
        const double v = -1.0 / (kPi * kPi * double(n) * double(n) * ds * ds);
        re[std::size_t(n)] = v;
        re[m - std::size_t(n)] = v;
    }
    fft_radix2(re, im, false);
    // The kernel is real and even, so the response is real; drop rounding dust.
    if (filter == FbpFilter::hann)
        for (std::size_t k = 0; k < m; ++k) re[k] *= 0.5 * (1.0 + std::cos(2.0 * kPi * k / m));
    return re;
}

// Ramp-filter every row of the sinogram, scaled by the detector spacing so the
// result approximates the continuous filtered projection.
std::vector<double> filter_rows(const Sinogram& sino, double ds, FbpFilter filter) {
    const int na = sino.num_angles, nd = sino.num_detectors;
    const std::size_t m = next_pow2(std::size_t(2) * nd);
    const std::vector<double> h = ramp_filter(m, nd, ds, filter);
    std::vector<double> out(std::size_t(na) * nd);
    std::vector<double> re(m), im(m);
    for (int a = 0; a < na; ++a) {
        std::fill(re.begin(), re.end(), 0.0);
        std::fill(im.begin(), im.end(), 0.0);
        for (int t = 0; t < nd; ++t) re[std::size_t(t)] = sino.at(a, t);
        fft_radix2(re, im, false);
        for (std::size_t k = 0; k < m; ++k) {
            re[k] *= h[k];
            im[k] *= h[k];
        }
        fft_radix2(re, im, true);
        for (int t = 0; t < nd; ++t) out[std::size_t(a) * nd + t] = re[std::size_t(t)] * ds;
    }
    return out;
}

inline double interp_row(const double* q, int nd, double tf) {
    if (tf <= 0.0) return (tf <= -1.0) ? 0.0 : q[0] * (1.0 + tf);
    if (tf >= nd - 1) return (tf >= nd) ? 0.0 : q[nd - 1] * (double(nd) - tf);
    const double fl = std::floor(tf);
    const int i = int(fl);
    const double fr = tf - fl;
    return q[i] + fr * (q[i + 1] - q[i]);
}

}  // namespace

Image fbp_reconstruct(const Geometry& geom, const Sinogram& sino, int grid_side, FbpFilter filter,
                      bool clip_negative) {
    if (sino.num_angles != geom.num_angles || sino.num_detectors != geom.num_detectors)
        throw std::invalid_argument("fbp_reconstruct: sinogram shape does not match geometry");
    if (grid_side < 2) throw std::invalid_argument("fbp_reconstruct: grid_side must be >= 2");

    const int na = geom.num_angles, nd = geom.num_detectors;
    const double ds = geom.detector_spacing;
    const double half = 0.5 * grid_side;
    const double center = 0.5 * (nd - 1);
    Image out(grid_side);

    if (geom.kind == GeometryKind::parallel) {
        const std::vector<double> q = filter_rows(sino, ds, filter);
        const double dtheta = geom.angle_range / na;
        const double scale = (geom.angle_range >= kPi) ? kPi / na : dtheta;
        for (int a = 0; a < na; ++a) {
            const double theta = geom.angle_of(a);
            const double c = std::cos(theta), sn = std::sin(theta);
            const double* row = q.data() + std::size_t(a) * nd;
            for (int r = 0; r < grid_side; ++r) {
                const double y = (r + 0.5) - half;
                double* orow = out.values.data() + std::size_t(r) * grid_side;
                for (int col = 0; col < grid_side; ++col) {
                    const double x = (col + 0.5) - half;
                    const double s = x * c + y * sn;
                    orow[col] += scale * interp_row(row, nd, s / ds + center);
                }
            }
        }
    } else {
        // Flat-detector fan beam: rescale to the virtual detector through the
        // origin, cosine-weight, ramp-filter, then distance-weighted
        // backprojection. Full-scan (2*pi) data covers every ray twice.
        const double rs = geom.source_radius;
        const double v = rs / (rs + geom.detector_radius);
        const double dsv = ds * v;
        Sinogram weighted(na, nd);
        for (int a = 0; a < na; ++a)
            for (int t = 0; t < nd; ++t) {
                const double av = (t - center) * dsv;
                weighted.at(a, t) = sino.at(a, t) * rs / std::sqrt(rs * rs + av * av);
            }
        const std::vector<double> q = filter_rows(weighted, dsv, filter);
        const double dbeta = geom.angle_range / na;
        const double scale = (geom.angle_range >= 2.0 * kPi - 1e-9) ? 0.5 * dbeta : dbeta;
        for (int a = 0; a < na; ++a) {
            const double beta = geom.angle_of(a);
            const double c = std::cos(beta), sn = std::sin(beta);
            const double wx = -sn, wy = c;  // source -> detector direction
            const double ux = c, uy = sn;   // detector axis
            const double* row = q.data() + std::size_t(a) * nd;
            for (int r = 0; r < grid_side; ++r) {
                const double y = (r + 0.5) - half;
                double* orow = out.values.data() + std::size_t(r) * grid_side;
                for (int col = 0; col < grid_side; ++col) {
                    const double x = (col + 0.5) - half;
                    const double du = rs + x * wx + y * wy;  // distance along w from source plane
                    const double a_v = rs * (x * ux + y * uy) / du;
                    const double u2 = (du / rs) * (du / rs);
                    orow[col] += scale * interp_row(row, nd, a_v / dsv + center) / u2;
                }
            }
        }
    }

    if (clip_negative)
        for (double& p : out.values)
            if (p < 0.0) p = 0.0;
    return out;
}

}  // namespace sktomo
