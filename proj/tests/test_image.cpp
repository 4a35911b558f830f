#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "sktomo/image.hpp"
#include "sktomo/raw_io.hpp"
#include "sktomo/rng.hpp"

using namespace sktomo;

namespace {

Image random_image(int side, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Image img(side);
    for (double& v : img.values) v = rng.uniform(lo, hi);
    return img;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::string temp_path(const char* stem) {
    return std::string("tmp_") + stem + ".uskd";
}

}  // namespace

TEST_CASE("downsample: constants, identity factor, averaged rows") {
    SamplerSpec f2{2, SamplerMethod::bilinear};

    Image c(4, 3.25);
    Image dc = downsample(c, f2);
    CHECK(dc.width == 2);
    for (double v : dc.values) CHECK(v == doctest::Approx(3.25).epsilon(1e-15));

    Image x(4);
    for (int r = 0; r < 4; ++r)
        for (int col = 0; col < 4; ++col) x.at(r, col) = r;
    Image d1 = downsample(x, SamplerSpec{1, SamplerMethod::bilinear});
    CHECK(d1.values == x.values);

    Image d = downsample(x, f2);
    REQUIRE(d.width == 2);
    CHECK(d.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d.at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d.at(1, 0) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(d.at(1, 1) == doctest::Approx(2.5).epsilon(1e-15));

    Image odd(3, 1.0);
    CHECK_THROWS(downsample(odd, f2));
}

TEST_CASE("downsample factor 2 equals 2x2 block average") {
    Rng rng(11);
    Image x = random_image(8, rng);
    Image d = downsample(x, SamplerSpec{2, SamplerMethod::bilinear});
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            const double avg = 0.25 * (x.at(2 * r, 2 * c) + x.at(2 * r, 2 * c + 1) +
                                       x.at(2 * r + 1, 2 * c) + x.at(2 * r + 1, 2 * c + 1));
            CHECK(d.at(r, c) == doctest::Approx(avg).epsilon(1e-14));
        }
    }
}

TEST_CASE("upsample: constants, identity factor, hand-computed 2x2 -> 4x4") {
    SamplerSpec f2{2, SamplerMethod::bilinear};

    Image c(2, -0.75);
    Image uc = upsample(c, f2);
    CHECK(uc.width == 4);
    for (double v : uc.values) CHECK(v == doctest::Approx(-0.75).epsilon(1e-15));

    Image s(2);
    s.at(0, 0) = 0;
    s.at(0, 1) = 1;
    s.at(1, 0) = 2;
    s.at(1, 1) = 3;
    Image u1 = upsample(s, SamplerSpec{1, SamplerMethod::bilinear});
    CHECK(u1.values == s.values);

    Image u = upsample(s, f2);
    REQUIRE(u.width == 4);
    // Interpolation weights per axis at factor 2: 0, 0.25, 0.75, 1 (edges replicated).
    const double expect[4][4] = {{0.0, 0.25, 0.75, 1.0},
                                 {0.5, 0.75, 1.25, 1.5},
                                 {1.5, 1.75, 2.25, 2.5},
                                 {2.0, 2.25, 2.75, 3.0}};
    for (int r = 0; r < 4; ++r)
        for (int col = 0; col < 4; ++col)
            CHECK(u.at(r, col) == doctest::Approx(expect[r][col]).epsilon(1e-15));

    CHECK_THROWS(upsample(s, SamplerSpec{0, SamplerMethod::bilinear}));
}

TEST_CASE("samplers are linear and preserve constants across factors") {
    Rng rng(7);
    for (int factor : {1, 2, 4}) {
        SamplerSpec spec{factor, SamplerMethod::bilinear};
        Image x = random_image(16, rng);
        Image y = random_image(16, rng);
        const double a = rng.uniform(-2.0, 2.0);
        const double b = rng.uniform(-2.0, 2.0);

        Image combo(16);
        for (std::size_t i = 0; i < combo.values.size(); ++i)
            combo.values[i] = a * x.values[i] + b * y.values[i];

        Image dx = downsample(x, spec), dy = downsample(y, spec), dc = downsample(combo, spec);
        for (std::size_t i = 0; i < dc.values.size(); ++i)
            CHECK(dc.values[i] ==
                  doctest::Approx(a * dx.values[i] + b * dy.values[i]).epsilon(1e-12));

        Image ux = upsample(x, spec), uy = upsample(y, spec), ucombo = upsample(combo, spec);
        for (std::size_t i = 0; i < ucombo.values.size(); ++i)
            CHECK(ucombo.values[i] ==
                  doctest::Approx(a * ux.values[i] + b * uy.values[i]).epsilon(1e-12));

        Image ones(16, 1.0);
        Image dones = downsample(ones, spec);
        for (double v : dones.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
        Image uones = upsample(ones, spec);
        for (double v : uones.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

        // Round trip restores dimensions; exact on constants.
        Image rt = upsample(downsample(ones, spec), spec);
        CHECK(rt.width == 16);
        for (double v : rt.values) CHECK(v == 1.0);
    }
}

TEST_CASE("sampler adjoints satisfy the inner-product identity") {
    Rng rng(23);
    SamplerSpec f2{2, SamplerMethod::bilinear};
    for (int trial = 0; trial < 5; ++trial) {
        Image x = random_image(12, rng);
        Image yc = random_image(6, rng);
        Image sx = downsample(x, f2);
        Image sty = downsample_adjoint(yc, f2, 12);
        CHECK(dot(sx.values, yc.values) == doctest::Approx(dot(x.values, sty.values)).epsilon(1e-12));

        Image z = random_image(6, rng);
        Image yf = random_image(12, rng);
        Image uz = upsample(z, f2);
        Image uty = upsample_adjoint(yf, f2, 6);
        CHECK(dot(uz.values, yf.values) == doctest::Approx(dot(z.values, uty.values)).epsilon(1e-12));
    }
}

TEST_CASE("psnr: sentinel, fixed case, oracle, symmetry") {
    Image z(8, 0.0);
    Image same(8, 0.0);
    CHECK(psnr(z, same) == std::numeric_limits<double>::infinity());

    Image tenth(8, 0.1);
    CHECK(psnr(tenth, z, 1.0) == doctest::Approx(20.0).epsilon(1e-12));

    Rng rng(5);
    Image a = random_image(8, rng, 0.0, 1.0);
    Image b = random_image(8, rng, 0.0, 1.0);
    double mse = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        mse += d * d;
    }
    mse /= double(a.values.size());
    CHECK(psnr(a, b, 1.0) == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-12));
    CHECK(psnr(a, b, 1.0) == doctest::Approx(psnr(b, a, 1.0)).epsilon(1e-15));

    Image small(4, 0.0);
    CHECK_THROWS(psnr(small, z));
}

TEST_CASE("ssim: identity, constant-image closed form, symmetry") {
    Rng rng(9);
    Image a = random_image(16, rng, 0.0, 1.0);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    const double c = 0.4, delta = 0.2;
    Image u(16, c), v(16, c + delta);
    const double c1 = 0.01 * 0.01;
    const double expect = (2.0 * c * (c + delta) + c1) / (c * c + (c + delta) * (c + delta) + c1);
    CHECK(ssim(u, v) == doctest::Approx(expect).epsilon(1e-12));

    Image b = random_image(16, rng, 0.0, 1.0);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-13));

    Image tiny(4, 0.0);
    CHECK_THROWS(ssim(tiny, tiny));
}

TEST_CASE("raw container round-trips bit-exactly") {
    Rng rng(31);
    RawMatrix m;
    m.rows = 7;
    m.cols = 5;
    m.data.resize(35);
    for (float& v : m.data) v = float(rng.uniform(-10.0, 10.0));
    m.data[3] = 0.0f;
    m.data[4] = -0.0f;
    m.data[5] = std::numeric_limits<float>::denorm_min();

    const std::string path = temp_path("roundtrip");
    write_raw(path, m);
    RawMatrix back = read_raw(path);
    CHECK(back.rows == m.rows);
    CHECK(back.cols == m.cols);
    REQUIRE(back.data.size() == m.data.size());
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        std::uint32_t ba, bb;
        std::memcpy(&ba, &m.data[i], 4);
        std::memcpy(&bb, &back.data[i], 4);
        CHECK(ba == bb);
    }
    std::remove(path.c_str());
}

TEST_CASE("raw container rejects malformed files and names the path") {
    RawMatrix m;
    m.rows = 2;
    m.cols = 2;
    m.data = {1.f, 2.f, 3.f, 4.f};
    const std::string path = temp_path("corrupt");
    write_raw(path, m);

    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
        f.close();
        try {
            read_raw(path);
            FAIL("expected a format error");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find(path) != std::string::npos);
            CHECK(std::string(e.what()).find("magic") != std::string::npos);
        }
    }
    SUBCASE("version mismatch") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        const char v2[2] = {2, 0};
        f.write(v2, 2);
        f.close();
        CHECK_THROWS(read_raw(path));
    }
    SUBCASE("truncated payload") {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write("USKD", 4);
        const char rest[12] = {1, 0, 1, 0, 2, 0, 0, 0, 2, 0, 0, 0};
        f.write(rest, 12);
        f.write("\x01\x02", 2);
        f.close();
        CHECK_THROWS(read_raw(path));
    }
    SUBCASE("missing file") { CHECK_THROWS(read_raw("no_such_file.uskd")); }
    std::remove(path.c_str());
}

TEST_CASE("image and sinogram wrappers go through the raw container") {
    Rng rng(41);
    Image img = random_image(6, rng);
    const std::string ipath = temp_path("img");
    write_image_raw(ipath, img);
    Image back = read_image_raw(ipath);
    CHECK(back.width == 6);
    for (std::size_t i = 0; i < img.values.size(); ++i)
        CHECK(back.values[i] == double(float(img.values[i])));
    std::remove(ipath.c_str());

    Sinogram s(3, 4, 0.0);
    for (double& v : s.values) v = rng.uniform(0.0, 5.0);
    const std::string spath = temp_path("sino");
    write_sinogram_raw(spath, s);
    Sinogram sback = read_sinogram_raw(spath);
    CHECK(sback.num_angles == 3);
    CHECK(sback.num_detectors == 4);
    for (std::size_t i = 0; i < s.values.size(); ++i)
        CHECK(sback.values[i] == double(float(s.values[i])));
    std::remove(spath.c_str());
}

TEST_CASE("fnv1a64 matches reference vectors") {
    CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("hello world", 11) == 0x779a65e7023cd2e7ull);
    CHECK(hex64(0xaf63dc4c8601ec8cull) == "af63dc4c8601ec8c");

    const std::string path = temp_path("fnv");
    std::ofstream f(path, std::ios::binary);
    f.write("hello world", 11);
    f.close();
    CHECK(fnv1a64_file(path) == 0x779a65e7023cd2e7ull);
    std::remove(path.c_str());
}

TEST_CASE("rng is deterministic and seed derivation separates streams") {
    Rng a(123), b(123), c(124);
    bool same = true, diff = false;
    for (int i = 0; i < 100; ++i) {
        const double va = a.uniform01(), vb = b.uniform01(), vc = c.uniform01();
        same = same && (va == vb);
        diff = diff || (va != vc);
    }
    CHECK(same);
    CHECK(diff);
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(99, 7) == derive_seed(99, 7));
}

TEST_CASE("rng normal and poisson have sane moments") {
    Rng rng(2026);
    double sum = 0.0, sumsq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sumsq += v * v;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.05));

    for (double mean : {3.0, 80.0}) {
        double psum = 0.0;
        for (int i = 0; i < n; ++i) psum += double(rng.poisson(mean));
        CHECK(psum / n == doctest::Approx(mean).epsilon(0.05));
    }
    CHECK(rng.poisson(0.0) == 0);
}
