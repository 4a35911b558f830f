#pragma once

// Direct 2-D cross-correlation kernels (stride 1, zero padding) over
// channel-major planes: tensors are laid out [channel][row][col] contiguously.
// Weights are [out_channel][in_channel][krow][kcol].
//
// The hot path is kernel size 5 with padding 2: all five column taps of a
// kernel row are fused, and the row loop is flattened into one long pass over
// the plane interior with scalar fixups at the row boundaries, so the vector
// unit runs long unit-stride streams. A generic tap-by-tap path covers other
// kernel shapes.

#include <cstddef>

namespace sktomo {

namespace detail {

// dst[c] += sum_kc w[kc] * src[c + kc - 2] over c in [0, n), zero-padded taps.
template <typename Real>
inline void row_tap5_add(Real* __restrict dst, const Real* __restrict src, const Real* w, int n) {
    const Real w0 = w[0], w1 = w[1], w2 = w[2], w3 = w[3], w4 = w[4];
    const int lo = (2 < n) ? 2 : n;
    const int hi = (n - 2 > lo) ? n - 2 : lo;
    for (int c = 0; c < lo; ++c) {
        Real acc = dst[c];
        if (c - 2 >= 0) acc += w0 * src[c - 2];
        if (c - 1 >= 0) acc += w1 * src[c - 1];
        acc += w2 * src[c];
        if (c + 1 < n) acc += w3 * src[c + 1];
        if (c + 2 < n) acc += w4 * src[c + 2];
        dst[c] = acc;
    }
    const Real* __restrict s = src;
#pragma omp simd
    for (int c = lo; c < hi; ++c)
        dst[c] += w0 * s[c - 2] + w1 * s[c - 1] + w2 * s[c] + w3 * s[c + 1] + w4 * s[c + 2];
    for (int c = hi; c < n; ++c) {
        Real acc = dst[c];
        acc += w0 * src[c - 2];
        acc += w1 * src[c - 1];
        acc += w2 * src[c];
        if (c + 1 < n) acc += w3 * src[c + 1];
        if (c + 2 < n) acc += w4 * src[c + 2];
        dst[c] = acc;
    }
}

// Fused k=5 update over output rows [r0, r1): dst[r][c] += sum_kc w[kc] *
// src[r + dr][c + kc - 2]. Interior rows run as one flat pass whose wrapped
// row-boundary terms are subtracted afterwards; extreme rows stay guarded.
template <typename Real>
inline void plane_tap5_add(Real* dst, const Real* src, const Real* w, int wd, int r0, int r1,
                           int dr) {
    const Real w0 = w[0], w1 = w[1], w2 = w[2], w3 = w[3], w4 = w[4];
    int rb0 = r0 + 1, rb1 = r1 - 1;
    if (wd < 8 || rb1 <= rb0) {
        rb0 = r1;
        rb1 = r1;
    }
    for (int r = r0; r < rb0 && r < r1; ++r)
        row_tap5_add(dst + std::size_t(r) * wd, src + std::size_t(r + dr) * wd, w, wd);
    for (int r = rb1; r < r1; ++r)
        row_tap5_add(dst + std::size_t(r) * wd, src + std::size_t(r + dr) * wd, w, wd);
    if (rb1 > rb0) {
        Real* __restrict d = dst + std::size_t(rb0) * wd;
        const Real* __restrict s = src + (std::ptrdiff_t(rb0) + dr) * wd;
        const std::ptrdiff_t n = std::ptrdiff_t(rb1 - rb0) * wd;
#pragma omp simd
        for (std::ptrdiff_t i = 0; i < n; ++i)
            d[i] += w0 * s[i - 2] + w1 * s[i - 1] + w2 * s[i] + w3 * s[i + 1] + w4 * s[i + 2];
        for (int r = rb0; r < rb1; ++r) {
            Real* dr_ = dst + std::size_t(r) * wd;
            const Real* sb = src + (std::ptrdiff_t(r) + dr) * wd;
            dr_[0] -= w0 * sb[-2] + w1 * sb[-1];
            dr_[1] -= w0 * sb[-1];
            dr_[wd - 2] -= w4 * sb[wd];
            dr_[wd - 1] -= w3 * sb[wd] + w4 * sb[wd + 1];
        }
    }
}

// Generic single-tap row update: dst[c0..c1) += wv * src[c0+s .. c1+s).
template <typename Real>
inline void row_tap_add(Real* __restrict dst, const Real* __restrict src, Real wv, int c0, int c1,
                        int s) {
#pragma omp simd
    for (int c = c0; c < c1; ++c) dst[c] += wv * src[c + s];
}

// Guarded per-row dot for one tap: sum_c g[c] * xrow[c + s] over in-range c.
template <typename Real>
inline Real row_tap_dot(const Real* __restrict g, const Real* __restrict xrow, int wd, int s) {
    const int c0 = (s < 0) ? -s : 0;
    const int c1 = (s > 0) ? wd - s : wd;
    Real acc = Real(0);
#pragma omp simd reduction(+ : acc)
    for (int c = c0; c < c1; ++c) acc += g[c] * xrow[c + s];
    return acc;
}

}  // namespace detail

template <typename Real>
void conv2d_forward(const Real* x, int cin, const Real* w, const Real* bias, Real* y, int cout,
                    int h, int wd, int k, int pad) {
    const std::size_t plane = std::size_t(h) * wd;
    for (int co = 0; co < cout; ++co) {
        Real* yp = y + co * plane;
        const Real bv = bias ? bias[co] : Real(0);
        for (std::size_t i = 0; i < plane; ++i) yp[i] = bv;
        for (int ci = 0; ci < cin; ++ci) {
            const Real* xp = x + ci * plane;
            const Real* wp = w + (std::size_t(co) * cin + ci) * k * k;
            for (int kr = 0; kr < k; ++kr) {
                const int r0 = (pad - kr > 0) ? pad - kr : 0;
                const int r1 = (h + pad - kr < h) ? h + pad - kr : h;
                if (k == 5 && pad == 2) {
                    detail::plane_tap5_add(yp, xp, wp + kr * 5, wd, r0, r1, kr - 2);
                    continue;
                }
                for (int kc = 0; kc < k; ++kc) {
                    const Real wv = wp[kr * k + kc];
                    const int s = kc - pad;
                    const int c0 = (s < 0) ? -s : 0;
                    const int c1 = (s > 0) ? wd - s : wd;
                    for (int r = r0; r < r1; ++r)
                        detail::row_tap_add(yp + std::size_t(r) * wd,
                                            xp + std::size_t(r + kr - pad) * wd, wv, c0, c1, s);
                }
            }
        }
    }
}

// dx is overwritten. dx[ci][p][q] = sum_{co,kr,kc} w[co][ci][kr][kc] * dy[co][p-kr+pad][q-kc+pad],
// a correlation of dy with the kernel flipped in both axes.
template <typename Real>
void conv2d_backward_input(Real* dx, int cin, const Real* w, const Real* dy, int cout, int h,
                           int wd, int k, int pad) {
    const std::size_t plane = std::size_t(h) * wd;
    for (std::size_t i = 0; i < std::size_t(cin) * plane; ++i) dx[i] = Real(0);
    for (int ci = 0; ci < cin; ++ci) {
        Real* xp = dx + ci * plane;
        for (int co = 0; co < cout; ++co) {
            const Real* gp = dy + co * plane;
            const Real* wp = w + (std::size_t(co) * cin + ci) * k * k;
            for (int kr = 0; kr < k; ++kr) {
                const int fr = k - 1 - kr;
                const int r0 = (pad - kr > 0) ? pad - kr : 0;
                const int r1 = (h + pad - kr < h) ? h + pad - kr : h;
                if (k == 5 && pad == 2) {
                    Real wrow[5];
                    for (int kc = 0; kc < 5; ++kc) wrow[kc] = wp[fr * 5 + (4 - kc)];
                    detail::plane_tap5_add(xp, gp, wrow, wd, r0, r1, kr - 2);
                    continue;
                }
                for (int kc = 0; kc < k; ++kc) {
                    const Real wv = wp[fr * k + (k - 1 - kc)];
                    const int s = kc - pad;
                    const int c0 = (s < 0) ? -s : 0;
                    const int c1 = (s > 0) ? wd - s : wd;
                    for (int r = r0; r < r1; ++r)
                        detail::row_tap_add(xp + std::size_t(r) * wd,
                                            gp + std::size_t(r + kr - pad) * wd, wv, c0, c1, s);
                }
            }
        }
    }
}

// dw/dbias are overwritten. dw[co][ci][kr][kc] = <dy[co], x[ci] shifted by (kr-pad, kc-pad)>.
template <typename Real>
void conv2d_backward_weights(const Real* x, int cin, const Real* dy, int cout, Real* dw,
                             Real* dbias, int h, int wd, int k, int pad) {
    const std::size_t plane = std::size_t(h) * wd;
    for (int co = 0; co < cout; ++co) {
        const Real* gp = dy + co * plane;
        if (dbias) {
            Real b = Real(0);
#pragma omp simd reduction(+ : b)
            for (std::size_t i = 0; i < plane; ++i) b += gp[i];
            dbias[co] = b;
        }
        for (int ci = 0; ci < cin; ++ci) {
            const Real* xp = x + ci * plane;
            Real* wp = dw + (std::size_t(co) * cin + ci) * k * k;
            for (int kr = 0; kr < k; ++kr) {
                const int r0 = (pad - kr > 0) ? pad - kr : 0;
                const int r1 = (h + pad - kr < h) ? h + pad - kr : h;
                if (k == 5 && pad == 2 && wd >= 8 && r1 - r0 >= 3) {
                    const int rb0 = r0 + 1, rb1 = r1 - 1;
                    Real acc[5];
                    for (int kc = 0; kc < 5; ++kc) {
                        acc[kc] =
                            detail::row_tap_dot(gp + std::size_t(r0) * wd,
                                                xp + std::size_t(r0 + kr - 2) * wd, wd, kc - 2) +
                            detail::row_tap_dot(gp + std::size_t(rb1) * wd,
                                                xp + std::size_t(rb1 + kr - 2) * wd, wd, kc - 2);
                    }
                    const Real* __restrict g = gp + std::size_t(rb0) * wd;
                    const Real* __restrict s = xp + (std::ptrdiff_t(rb0) + kr - 2) * wd;
                    const std::ptrdiff_t n = std::ptrdiff_t(rb1 - rb0) * wd;
                    Real b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0;
#pragma omp simd reduction(+ : b0, b1, b2, b3, b4)
                    for (std::ptrdiff_t i = 0; i < n; ++i) {
                        const Real gv = g[i];
                        b0 += gv * s[i - 2];
                        b1 += gv * s[i - 1];
                        b2 += gv * s[i];
                        b3 += gv * s[i + 1];
                        b4 += gv * s[i + 2];
                    }
                    // Remove the wrapped column terms the flat pass included.
                    for (int r = rb0; r < rb1; ++r) {
                        const Real* gr = gp + std::size_t(r) * wd;
                        const Real* sb = xp + (std::ptrdiff_t(r) + kr - 2) * wd;
                        b0 -= gr[0] * sb[-2] + gr[1] * sb[-1];
                        b1 -= gr[0] * sb[-1];
                        b3 -= gr[wd - 1] * sb[wd];
                        b4 -= gr[wd - 2] * sb[wd] + gr[wd - 1] * sb[wd + 1];
                    }
                    wp[kr * 5 + 0] = acc[0] + b0;
                    wp[kr * 5 + 1] = acc[1] + b1;
                    wp[kr * 5 + 2] = acc[2] + b2;
                    wp[kr * 5 + 3] = acc[3] + b3;
                    wp[kr * 5 + 4] = acc[4] + b4;
                    continue;
                }
                for (int kc = 0; kc < k; ++kc) {
                    const int s = kc - pad;
                    Real acc = Real(0);
                    for (int r = r0; r < r1; ++r)
                        acc += detail::row_tap_dot(gp + std::size_t(r) * wd,
                                                   xp + std::size_t(r + kr - pad) * wd, wd, s);
                    wp[kr * k + kc] = acc;
                }
            }
        }
    }
}

}  // namespace sktomo
