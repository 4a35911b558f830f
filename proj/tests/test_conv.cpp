#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "sktomo/conv.hpp"
#include "sktomo/rng.hpp"

using namespace sktomo;

namespace {

// Straightforward reference cross-correlation used as the oracle.
template <typename Real>
void conv_ref(const std::vector<Real>& x, int cin, const std::vector<Real>& w,
              const std::vector<Real>& bias, std::vector<Real>& y, int cout, int h, int wd, int k,
              int pad) {
    const std::size_t plane = std::size_t(h) * wd;
    y.assign(std::size_t(cout) * plane, Real(0));
    for (int co = 0; co < cout; ++co)
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < wd; ++c) {
                Real acc = bias.empty() ? Real(0) : bias[std::size_t(co)];
                for (int ci = 0; ci < cin; ++ci)
                    for (int kr = 0; kr < k; ++kr)
                        for (int kc = 0; kc < k; ++kc) {
                            const int rr = r + kr - pad, cc = c + kc - pad;
                            if (rr < 0 || rr >= h || cc < 0 || cc >= wd) continue;
                            acc += w[((std::size_t(co) * cin + ci) * k + kr) * k + kc] *
                                   x[ci * plane + std::size_t(rr) * wd + cc];
                        }
                y[co * plane + std::size_t(r) * wd + c] = acc;
            }
}

template <typename Real>
std::vector<Real> randvec(std::size_t n, Rng& rng, double scale = 1.0) {
    std::vector<Real> v(n);
    for (auto& x : v) x = Real(rng.uniform(-scale, scale));
    return v;
}

template <typename Real>
double dotv(const std::vector<Real>& a, const std::vector<Real>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
    return s;
}

}  // namespace

TEST_CASE_TEMPLATE("conv2d_forward matches the reference", Real, float, double) {
    Rng rng(101);
    struct Shape {
        int cin, cout, h, wd, k;
    };
    for (const Shape s : {Shape{1, 1, 8, 8, 5}, Shape{3, 2, 7, 5, 5}, Shape{2, 3, 6, 9, 3},
                          Shape{2, 2, 4, 4, 5}, Shape{1, 2, 3, 3, 5}, Shape{2, 1, 12, 16, 5}}) {
        const int pad = s.k / 2;
        const std::size_t plane = std::size_t(s.h) * s.wd;
        auto x = randvec<Real>(s.cin * plane, rng);
        auto w = randvec<Real>(std::size_t(s.cout) * s.cin * s.k * s.k, rng);
        auto b = randvec<Real>(std::size_t(s.cout), rng);
        std::vector<Real> y(s.cout * plane), yref;
        conv2d_forward(x.data(), s.cin, w.data(), b.data(), y.data(), s.cout, s.h, s.wd, s.k, pad);
        conv_ref(x, s.cin, w, b, yref, s.cout, s.h, s.wd, s.k, pad);
        const double tol = sizeof(Real) == 4 ? 2e-5 : 1e-12;
        for (std::size_t i = 0; i < y.size(); ++i)
            CHECK(double(y[i]) == doctest::Approx(double(yref[i])).epsilon(tol).scale(1.0));
    }
}

TEST_CASE("conv gradients satisfy the transpose identities") {
    Rng rng(202);
    const int cin = 3, cout = 2, h = 9, wd = 7, k = 5, pad = 2;
    const std::size_t plane = std::size_t(h) * wd;
    auto x = randvec<double>(cin * plane, rng);
    auto w = randvec<double>(std::size_t(cout) * cin * k * k, rng);
    auto g = randvec<double>(cout * plane, rng);

    // <conv(x; w, 0), g> == <x, dX(g; w)>
    std::vector<double> y(cout * plane);
    conv2d_forward(x.data(), cin, w.data(), static_cast<const double*>(nullptr), y.data(), cout, h,
                   wd, k, pad);
    std::vector<double> dx(cin * plane);
    conv2d_backward_input(dx.data(), cin, w.data(), g.data(), cout, h, wd, k, pad);
    CHECK(dotv(y, g) == doctest::Approx(dotv(x, dx)).epsilon(1e-12));

    // <dW(x, g), dw_probe> == <conv(x; dw_probe, 0), g> and dbias == row sums
    std::vector<double> dw(w.size()), db(cout);
    conv2d_backward_weights(x.data(), cin, g.data(), cout, dw.data(), db.data(), h, wd, k, pad);
    auto probe = randvec<double>(w.size(), rng);
    std::vector<double> yprobe(cout * plane);
    conv2d_forward(x.data(), cin, probe.data(), static_cast<const double*>(nullptr), yprobe.data(),
                   cout, h, wd, k, pad);
    CHECK(dotv(dw, probe) == doctest::Approx(dotv(yprobe, g)).epsilon(1e-12));

    for (int co = 0; co < cout; ++co) {
        double sum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) sum += g[co * plane + i];
        CHECK(db[std::size_t(co)] == doctest::Approx(sum).epsilon(1e-12));
    }
}

TEST_CASE("conv k=3 generic gradient path also satisfies the identities") {
    Rng rng(303);
    const int cin = 2, cout = 2, h = 6, wd = 11, k = 3, pad = 1;
    const std::size_t plane = std::size_t(h) * wd;
    auto x = randvec<double>(cin * plane, rng);
    auto w = randvec<double>(std::size_t(cout) * cin * k * k, rng);
    auto g = randvec<double>(cout * plane, rng);
    std::vector<double> y(cout * plane), dx(cin * plane), dw(w.size());
    conv2d_forward(x.data(), cin, w.data(), static_cast<const double*>(nullptr), y.data(), cout, h,
                   wd, k, pad);
    conv2d_backward_input(dx.data(), cin, w.data(), g.data(), cout, h, wd, k, pad);
    conv2d_backward_weights(x.data(), cin, g.data(), cout, dw.data(),
                            static_cast<double*>(nullptr), h, wd, k, pad);
    CHECK(dotv(y, g) == doctest::Approx(dotv(x, dx)).epsilon(1e-12));
    auto probe = randvec<double>(w.size(), rng);
    std::vector<double> yprobe(cout * plane);
    conv2d_forward(x.data(), cin, probe.data(), static_cast<const double*>(nullptr), yprobe.data(),
                   cout, h, wd, k, pad);
    CHECK(dotv(dw, probe) == doctest::Approx(dotv(yprobe, g)).epsilon(1e-12));
}
