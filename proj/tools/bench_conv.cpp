// Micro-benchmark for the direct convolution kernels; prints GFLOP/s so
// training-time budgets can be checked on the host in use.
#include <chrono>
#include <cstdio>
#include <vector>

#include "sktomo/conv.hpp"
#include "sktomo/rng.hpp"

using clk = std::chrono::steady_clock;

template <typename Real>
void bench(const char* label, int c, int hw, int k, int reps) {
    const int pad = k / 2;
    const std::size_t plane = std::size_t(hw) * hw;
    std::vector<Real> x(c * plane), y(c * plane), w(std::size_t(c) * c * k * k), b(c);
    std::vector<Real> dx(c * plane), dw(w.size()), db(c);
    sktomo::Rng rng(1);
    for (auto& v : x) v = Real(rng.uniform(-1, 1));
    for (auto& v : w) v = Real(rng.uniform(-0.1, 0.1));
    for (auto& v : b) v = Real(rng.uniform(-0.1, 0.1));

    const double flop = 2.0 * c * c * k * k * plane;

    auto t0 = clk::now();
    for (int i = 0; i < reps; ++i)
        sktomo::conv2d_forward(x.data(), c, w.data(), b.data(), y.data(), c, hw, hw, k, pad);
    auto t1 = clk::now();
    for (int i = 0; i < reps; ++i)
        sktomo::conv2d_backward_input(dx.data(), c, w.data(), y.data(), c, hw, hw, k, pad);
    auto t2 = clk::now();
    for (int i = 0; i < reps; ++i)
        sktomo::conv2d_backward_weights(x.data(), c, y.data(), c, dw.data(), db.data(), hw, hw, k,
                                        pad);
    auto t3 = clk::now();

    auto secs = [](clk::time_point a, clk::time_point bb) {
        return std::chrono::duration<double>(bb - a).count();
    };
    std::printf("%s c=%d hw=%d k=%d: fwd %.1f GF/s  dX %.1f GF/s  dW %.1f GF/s\n", label, c, hw, k,
                flop * reps / secs(t0, t1) * 1e-9, flop * reps / secs(t1, t2) * 1e-9,
                flop * reps / secs(t2, t3) * 1e-9);
}

int main() {
    bench<float>("f32", 32, 64, 5, 40);
    bench<float>("f32", 32, 32, 5, 160);
    bench<double>("f64", 32, 64, 5, 20);
    return 0;
}
