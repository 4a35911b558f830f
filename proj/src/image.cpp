#include "sktomo/image.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sktomo {

Image::Image(int side, double fill) : width(side), height(side) {
    if (side < 0) throw std::invalid_argument("Image: negative side");
    values.assign(std::size_t(side) * side, fill);
}

bool Image::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

Sinogram::Sinogram(int angles, int detectors, double fill)
    : num_angles(angles), num_detectors(detectors) {
    if (angles < 0 || detectors < 0) throw std::invalid_argument("Sinogram: negative shape");
    values.assign(std::size_t(angles) * detectors, fill);
}

bool Sinogram::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

void check_square(const Image& img, const char* what) {
    if (img.width != img.height) throw std::invalid_argument(std::string(what) + ": image not square");
    if (img.values.size() != std::size_t(img.width) * img.height)
        throw std::invalid_argument(std::string(what) + ": value count mismatch");
}

// Per-axis interpolation stencil: source indices (i0, i0+1) and fraction t,
// for a sample at continuous source coordinate u (pixel centers at i + 0.5).
// Indices are clamped so edge values replicate.
struct AxisTap {
    int i0;
    int i1;
    double t;
};

AxisTap axis_tap(double u, int n) {
    const double p = u - 0.5;
    double f = std::floor(p);
    int i0 = static_cast<int>(f);
    double t = p - f;
    if (i0 < 0) {
        i0 = 0;
        t = 0.0;
    }
    if (i0 >= n - 1) {
        i0 = n - 1;
        t = 0.0;
    }
    const int i1 = (i0 < n - 1) ? i0 + 1 : i0;
    return {i0, i1, t};
}

}  // namespace

Image downsample(const Image& img, const SamplerSpec& spec) {
    check_square(img, "downsample");
    if (spec.factor < 1) throw std::invalid_argument("downsample: factor must be >= 1");
    if (spec.factor == 1) return img;
    const int n = img.width;
    const int f = spec.factor;
    if (n % f != 0) throw std::invalid_argument("downsample: side not divisible by factor");
    const int m = n / f;
    Image out(m);
    for (int r = 0; r < m; ++r) {
        const AxisTap ry = axis_tap(r * double(f) + f * 0.5, n);
        for (int c = 0; c < m; ++c) {
            const AxisTap cx = axis_tap(c * double(f) + f * 0.5, n);
            const double v00 = img.at(ry.i0, cx.i0);
            const double v01 = img.at(ry.i0, cx.i1);
            const double v10 = img.at(ry.i1, cx.i0);
            const double v11 = img.at(ry.i1, cx.i1);
            const double a = v00 + cx.t * (v01 - v00);
            const double b = v10 + cx.t * (v11 - v10);
            out.at(r, c) = a + ry.t * (b - a);
        }
    }
    return out;
}

Image upsample(const Image& img, const SamplerSpec& spec) {
    check_square(img, "upsample");
    if (spec.factor < 1) throw std::invalid_argument("upsample: factor must be >= 1");
    if (spec.factor == 1) return img;
    const int n = img.width;
    const int f = spec.factor;
    const int m = n * f;
    Image out(m);
    for (int r = 0; r < m; ++r) {
        const AxisTap ry = axis_tap((r + 0.5) / f, n);
        for (int c = 0; c < m; ++c) {
            const AxisTap cx = axis_tap((c + 0.5) / f, n);
            const double v00 = img.at(ry.i0, cx.i0);
            const double v01 = img.at(ry.i0, cx.i1);
            const double v10 = img.at(ry.i1, cx.i0);
            const double v11 = img.at(ry.i1, cx.i1);
            const double a = v00 + cx.t * (v01 - v00);
            const double b = v10 + cx.t * (v11 - v10);
            out.at(r, c) = a + ry.t * (b - a);
        }
    }
    return out;
}

Image downsample_adjoint(const Image& coarse, const SamplerSpec& spec, int source_side) {
    check_square(coarse, "downsample_adjoint");
    if (spec.factor < 1) throw std::invalid_argument("downsample_adjoint: factor must be >= 1");
    if (spec.factor == 1) return coarse;
    const int f = spec.factor;
    const int n = source_side;
    if (coarse.width * f != n)
        throw std::invalid_argument("downsample_adjoint: shape mismatch");
    Image out(n);
    const int m = coarse.width;
    for (int r = 0; r < m; ++r) {
        const AxisTap ry = axis_tap(r * double(f) + f * 0.5, n);
        for (int c = 0; c < m; ++c) {
            const AxisTap cx = axis_tap(c * double(f) + f * 0.5, n);
            const double g = coarse.at(r, c);
            out.at(ry.i0, cx.i0) += (1.0 - ry.t) * (1.0 - cx.t) * g;
            out.at(ry.i0, cx.i1) += (1.0 - ry.t) * cx.t * g;
            out.at(ry.i1, cx.i0) += ry.t * (1.0 - cx.t) * g;
            out.at(ry.i1, cx.i1) += ry.t * cx.t * g;
        }
    }
    return out;
}

Image upsample_adjoint(const Image& fine, const SamplerSpec& spec, int source_side) {
    check_square(fine, "upsample_adjoint");
    if (spec.factor < 1) throw std::invalid_argument("upsample_adjoint: factor must be >= 1");
    if (spec.factor == 1) return fine;
    const int f = spec.factor;
    const int n = source_side;
    if (n * f != fine.width) throw std::invalid_argument("upsample_adjoint: shape mismatch");
    Image out(n);
    const int m = fine.width;
    for (int r = 0; r < m; ++r) {
        const AxisTap ry = axis_tap((r + 0.5) / f, n);
        for (int c = 0; c < m; ++c) {
            const AxisTap cx = axis_tap((c + 0.5) / f, n);
            const double g = fine.at(r, c);
            out.at(ry.i0, cx.i0) += (1.0 - ry.t) * (1.0 - cx.t) * g;
            out.at(ry.i0, cx.i1) += (1.0 - ry.t) * cx.t * g;
            out.at(ry.i1, cx.i0) += ry.t * (1.0 - cx.t) * g;
            out.at(ry.i1, cx.i1) += ry.t * cx.t * g;
        }
    }
    return out;
}

double psnr(const Image& x, const Image& ref, double data_range) {
    if (x.width != ref.width || x.height != ref.height)
        throw std::invalid_argument("psnr: dimension mismatch");
    if (data_range <= 0.0) throw std::invalid_argument("psnr: data_range must be positive");
    double mse = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        const double d = x.values[i] - ref.values[i];
        mse += d * d;
    }
    mse /= double(x.values.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const Image& x, const Image& ref, double data_range) {
    if (x.width != ref.width || x.height != ref.height)
        throw std::invalid_argument("ssim: dimension mismatch");
    constexpr int kWin = 8;
    const int n = x.width;
    if (n < kWin) throw std::invalid_argument("ssim: image smaller than window");
    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);
    const double inv = 1.0 / (kWin * kWin);
    double total = 0.0;
    int count = 0;
    for (int r0 = 0; r0 + kWin <= n; ++r0) {
        for (int c0 = 0; c0 + kWin <= n; ++c0) {
            double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (int r = r0; r < r0 + kWin; ++r) {
                for (int c = c0; c < c0 + kWin; ++c) {
                    const double a = x.at(r, c);
                    const double b = ref.at(r, c);
                    sx += a;
                    sy += b;
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            }
            const double mx = sx * inv;
            const double my = sy * inv;
            const double vx = sxx * inv - mx * mx;
            const double vy = syy * inv - my * my;
            const double cxy = sxy * inv - mx * my;
            const double num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
            const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
            ++count;
        }
    }
    return total / count;
}

}  // namespace sktomo
