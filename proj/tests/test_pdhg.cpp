#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sktomo/pdhg.hpp"
#include "sktomo/rng.hpp"
#include "test_util.hpp"

using namespace sktomo;
using testutil::make_disk;
using testutil::random_image;

namespace {

LinearMap identity_map(std::size_t n) {
    LinearMap map;
    map.domain_size = map.range_size = n;
    map.cost_weight = 1.0;
    map.forward = [n](const double* x, double* y) { std::copy(x, x + n, y); };
    map.adjoint = map.forward;
    return map;
}

LinearMap scaling_map(std::size_t n, double c) {
    LinearMap map;
    map.domain_size = map.range_size = n;
    map.cost_weight = 1.0;
    map.forward = [n, c](const double* x, double* y) {
        for (std::size_t i = 0; i < n; ++i) y[i] = c * x[i];
    };
    map.adjoint = map.forward;
    return map;
}

Geometry desk_geometry(int angles = 60, int dets = 96) {
    Geometry g;
    g.kind = GeometryKind::parallel;
    g.num_angles = angles;
    g.num_detectors = dets;
    g.detector_spacing = 1.0;
    return g;
}

Sinogram project_clean(const ProjectionOperator& op, const Image& x) {
    CostLedger scratch;
    return forward_project(op, x, scratch);
}

}  // namespace

TEST_CASE("power method recovers a known spectrum") {
    const LinearMap map = scaling_map(25, 3.7);
    CHECK(power_method_norm(map, 8, 5) == doctest::Approx(3.7).epsilon(1e-6));
    CHECK_THROWS_AS(power_method_norm(map, 0, 5), std::invalid_argument);
}

TEST_CASE("power method estimates are non-decreasing and deterministic") {
    ProjectionOperator op = build_operator(desk_geometry(40, 48), 32);
    const LinearMap map = make_linear_map(op);
    std::vector<double> est = power_method_estimates(map, 25, 3);
    REQUIRE(est.size() == 25);
    for (std::size_t k = 0; k + 1 < est.size(); ++k) CHECK(est[k + 1] >= est[k] - 1e-12 * est[k]);
    CHECK(est.back() > 0.0);

    std::vector<double> again = power_method_estimates(map, 25, 3);
    for (std::size_t k = 0; k < est.size(); ++k) CHECK(est[k] == again[k]);
    CHECK(power_method_norm(op, 25, 3) == est.back());
}

TEST_CASE("identity-operator l1 problem converges to the soft-threshold solution") {
    const int side = 8;
    const std::size_t n = std::size_t(side) * side;
    Image b_img = random_image(side, 321);
    Regularizer reg;
    reg.kind = RegularizerKind::l1;
    reg.strength = 0.3;

    PDHGConfig cfg;
    cfg.sigma = cfg.tau = 0.95;
    cfg.momentum_beta = 1.0;
    cfg.iterations = 600;

    Image x0(side, 0.0);
    GenericTrace trace = saddle_solve({identity_map(n)}, {b_img.values}, reg, cfg, x0, false);

    Image expected = soft_threshold(b_img, reg.strength);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(std::abs(trace.primal.values[i] - expected.values[i]) <= 1e-6);
    REQUIRE(trace.objective.size() == 601);
    // Empirical descent gate away from the transient.
    for (std::size_t k = 10; k + 1 < trace.objective.size(); ++k)
        CHECK(trace.objective[k + 1] <= trace.objective[k] * (1.0 + 1e-8) + 1e-8);
}

TEST_CASE("zero data with zero regularizer stays at the zero fixed point") {
    ProjectionOperator op = build_operator(desk_geometry(30, 48), 32);
    DataTerm term;
    term.data = Sinogram(30, 48, 0.0);
    Regularizer reg;
    PDHGConfig cfg;
    cfg.sigma = cfg.tau = 0.01;
    cfg.iterations = 20;
    SolveTrace trace = pdhg_solve(op, term, reg, cfg, Image(32, 0.0));
    for (double v : trace.primal.values) CHECK(v == 0.0);
    for (double v : trace.dual.values) CHECK(v == 0.0);
    for (double v : trace.objective) CHECK(v == 0.0);
}

TEST_CASE("ledger counts exactly two weighted calls per iteration") {
    ProjectionOperator op = build_operator(desk_geometry(), 32);
    Image phantom = make_disk(32, 10.0, 0.5);
    DataTerm term;
    term.data = project_clean(op, phantom);
    Regularizer reg;

    PDHGConfig cfg = default_pdhg_config(op, 7);
    SolveTrace trace = pdhg_solve(op, term, reg, cfg, Image(32, 0.0));
    CHECK(trace.ledger.num_forward == 7);
    CHECK(trace.ledger.num_adjoint == 7);
    CHECK(trace.ledger.accumulated_cost() == 14.0);
    REQUIRE(trace.cumulative_cost.size() == 8);
    CHECK(trace.cumulative_cost.front() == 0.0);
    CHECK(trace.cumulative_cost.back() == 14.0);

    std::vector<ProjectionOperator> subs = partition_subsets(op, 4);
    PDHGConfig scfg = cfg;
    scfg.iterations = 10;
    scfg.num_subsets = 4;
    scfg.seed = 99;
    SolveTrace strace = spdhg_solve(subs, term, reg, scfg, Image(32, 0.0));
    CHECK(strace.ledger.num_forward == 10);
    CHECK(strace.ledger.num_adjoint == 10);
    CHECK(strace.ledger.accumulated_cost() == 2.0 * 10 / 4);
    REQUIRE(strace.objective.size() == 11);
}

TEST_CASE("single-subset stochastic solve is bitwise the deterministic solve") {
    ProjectionOperator op = build_operator(desk_geometry(40, 64), 32);
    Image phantom = make_disk(32, 9.0, 0.7);
    DataTerm term;
    term.data = project_clean(op, phantom);
    Regularizer reg;
    reg.kind = RegularizerKind::l1;
    reg.strength = 1e-3;

    PDHGConfig cfg = default_pdhg_config(op, 25);
    cfg.seed = 4242;
    cfg.num_subsets = 1;

    SolveTrace det = pdhg_solve(op, term, reg, cfg, Image(32, 0.0));
    SolveTrace sto = spdhg_solve(partition_subsets(op, 1), term, reg, cfg, Image(32, 0.0));

    REQUIRE(det.objective.size() == sto.objective.size());
    for (std::size_t k = 0; k < det.objective.size(); ++k)
        CHECK(det.objective[k] == sto.objective[k]);
    for (std::size_t i = 0; i < det.primal.values.size(); ++i)
        CHECK(det.primal.values[i] == sto.primal.values[i]);
    for (std::size_t i = 0; i < det.dual.values.size(); ++i)
        CHECK(det.dual.values[i] == sto.dual.values[i]);
}

TEST_CASE("stochastic solve is seed-deterministic and seed-sensitive") {
    ProjectionOperator op = build_operator(desk_geometry(40, 64), 32);
    Image phantom = make_disk(32, 9.0, 0.7);
    DataTerm term;
    term.data = project_clean(op, phantom);
    Regularizer reg;
    std::vector<ProjectionOperator> subs = partition_subsets(op, 4);

    PDHGConfig cfg = default_pdhg_config(op, 30);
    cfg.num_subsets = 4;
    cfg.seed = 11;

    SolveTrace a = spdhg_solve(subs, term, reg, cfg, Image(32, 0.0));
    SolveTrace b = spdhg_solve(subs, term, reg, cfg, Image(32, 0.0));
    for (std::size_t k = 0; k < a.objective.size(); ++k) CHECK(a.objective[k] == b.objective[k]);

    cfg.seed = 12;
    SolveTrace c = spdhg_solve(subs, term, reg, cfg, Image(32, 0.0));
    bool any_diff = false;
    for (std::size_t k = 0; k < a.objective.size(); ++k)
        if (a.objective[k] != c.objective[k]) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("tv-regularized problem: medium run nears a longer oracle") {
    ProjectionOperator op = build_operator(desk_geometry(), 64);
    Image phantom = make_disk(64, 20.0, 0.8);
    DataTerm term;
    term.data = project_clean(op, phantom);
    Regularizer reg;
    reg.kind = RegularizerKind::tv;
    reg.strength = 0.05;
    reg.tv_inner_iters = 30;
    Image x0 = fbp_reconstruct(op.geom, term.data, 64, FbpFilter::hann);

    PDHGConfig cfg = default_pdhg_config(op, 400);
    SolveTrace run = pdhg_solve(op, term, reg, cfg, x0);

    PDHGConfig long_cfg = cfg;
    long_cfg.iterations = 1500;
    SolveTrace oracle = pdhg_solve(op, term, reg, long_cfg, x0);
    const double f_mid = run.objective.back();
    const double f_ref = oracle.objective.back();
    CHECK(f_mid <= f_ref * 1.01);
    CHECK(f_mid >= f_ref * (1.0 - 1e-6));  // a longer run cannot end meaningfully above it
    // The trace tail is settled: the last 100 iterations move by < 0.1% total.
    const double f_tail = run.objective[run.objective.size() - 101];
    CHECK(std::abs(f_tail - f_mid) <= 1e-3 * std::abs(f_ref));
}

TEST_CASE("stochastic two-block identity problem approaches the closed-form optimum") {
    const int side = 8;
    const std::size_t n = std::size_t(side) * side;
    Image b_img = random_image(side, 987);
    Regularizer reg;
    reg.kind = RegularizerKind::l1;
    reg.strength = 0.25;

    // Split the identity into two disjoint row blocks.
    auto block = [n](std::size_t begin, std::size_t count) {
        LinearMap map;
        map.domain_size = n;
        map.range_size = count;
        map.cost_weight = 0.5;
        map.forward = [begin, count](const double* x, double* y) {
            std::copy(x + begin, x + begin + count, y);
        };
        map.adjoint = [n, begin, count](const double* y, double* x) {
            std::fill(x, x + n, 0.0);
            std::copy(y, y + count, x + begin);
        };
        return map;
    };
    std::vector<LinearMap> maps = {block(0, n / 2), block(n / 2, n / 2)};
    std::vector<std::vector<double>> slices = {
        {b_img.values.begin(), b_img.values.begin() + n / 2},
        {b_img.values.begin() + n / 2, b_img.values.end()}};

    PDHGConfig cfg;
    // Stochastic stability wants sigma*tau*|A_i|^2 <= p_i = 1/2; the blocks are
    // identity restrictions (|A_i| = 1), so 0.5 * 0.5 = 0.25 sits inside it.
    cfg.sigma = cfg.tau = 0.5;
    cfg.iterations = 2500;
    cfg.seed = 31;
    GenericTrace trace = saddle_solve(maps, slices, reg, cfg, Image(side, 0.0), true);

    Image star = soft_threshold(b_img, reg.strength);
    double f_star = reg.strength * 0.0;
    {
        double data = 0.0, l1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = star.values[i] - b_img.values[i];
            data += 0.5 * e * e;
            l1 += std::abs(star.values[i]);
        }
        f_star = data + reg.strength * l1;
    }
    CHECK(trace.objective.back() <= f_star * 1.01 + 1e-9);
    CHECK(trace.objective.back() >= f_star - 1e-9);
}

TEST_CASE("divergent step sizes raise a named error") {
    ProjectionOperator op = build_operator(desk_geometry(30, 48), 32);
    Image phantom = make_disk(32, 10.0, 1.0);
    DataTerm term;
    term.data = project_clean(op, phantom);
    Regularizer reg;
    PDHGConfig cfg;
    cfg.sigma = cfg.tau = 1e6;  // far beyond the stability bound; warning expected on stderr
    cfg.iterations = 200;
    CHECK_THROWS_WITH_AS(pdhg_solve(op, term, reg, cfg, Image(32, 0.0)),
                         doctest::Contains("diverged at iteration"), std::runtime_error);
}

TEST_CASE("solver input validation") {
    ProjectionOperator op = build_operator(desk_geometry(30, 48), 32);
    DataTerm term;
    term.data = Sinogram(30, 48, 0.0);
    Regularizer reg;
    PDHGConfig cfg;
    cfg.sigma = cfg.tau = 0.1;
    cfg.iterations = 2;

    SUBCASE("config bounds") {
        PDHGConfig bad = cfg;
        bad.sigma = 0.0;
        CHECK_THROWS_AS(pdhg_solve(op, term, reg, bad, Image(32, 0.0)), std::invalid_argument);
        bad = cfg;
        bad.tau = -1.0;
        CHECK_THROWS_AS(pdhg_solve(op, term, reg, bad, Image(32, 0.0)), std::invalid_argument);
        bad = cfg;
        bad.momentum_beta = 1.5;
        CHECK_THROWS_AS(pdhg_solve(op, term, reg, bad, Image(32, 0.0)), std::invalid_argument);
        bad = cfg;
        bad.iterations = 0;
        CHECK_THROWS_AS(pdhg_solve(op, term, reg, bad, Image(32, 0.0)), std::invalid_argument);
    }
    SUBCASE("shape and partition checks") {
        DataTerm wrong;
        wrong.data = Sinogram(31, 48, 0.0);
        CHECK_THROWS_AS(pdhg_solve(op, wrong, reg, cfg, Image(32, 0.0)), std::invalid_argument);
        CHECK_THROWS_AS(pdhg_solve(op, term, reg, cfg, Image(16, 0.0)), std::invalid_argument);

        std::vector<ProjectionOperator> subs = partition_subsets(op, 3);
        PDHGConfig scfg = cfg;
        scfg.num_subsets = 2;  // wrong count
        CHECK_THROWS_AS(spdhg_solve(subs, term, reg, scfg, Image(32, 0.0)),
                        std::invalid_argument);
        scfg.num_subsets = 3;
        std::vector<ProjectionOperator> overlap = subs;
        overlap[1] = subs[0];  // duplicate angles, hole elsewhere
        CHECK_THROWS_AS(spdhg_solve(overlap, term, reg, scfg, Image(32, 0.0)),
                        std::invalid_argument);
        CHECK_THROWS_AS(spdhg_solve({}, term, reg, scfg, Image(32, 0.0)), std::invalid_argument);
    }
    SUBCASE("deterministic path rejects subset-restricted operators") {
        std::vector<ProjectionOperator> subs = partition_subsets(op, 2);
        CHECK_THROWS_AS(pdhg_solve(subs[0], term, reg, cfg, Image(32, 0.0)),
                        std::invalid_argument);
    }
}

TEST_CASE("trace csv export") {
    ProjectionOperator op = build_operator(desk_geometry(30, 48), 32);
    DataTerm term;
    term.data = Sinogram(30, 48, 0.0);
    Regularizer reg;
    PDHGConfig cfg;
    cfg.sigma = cfg.tau = 0.03;
    cfg.iterations = 3;
    SolveTrace trace = pdhg_solve(op, term, reg, cfg, Image(32, 0.0));

    const std::string path = "trace_test.csv";
    write_trace_csv(path, trace);
    std::ifstream in(path);
    REQUIRE(bool(in));
    std::string header;
    std::getline(in, header);
    CHECK(header == "iteration,objective,cumulative_cost");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
        if (rows == 1) {
            std::istringstream ss(line);
            std::string tok;
            std::getline(ss, tok, ',');
            CHECK(tok == "0");
        }
    }
    CHECK(rows == 4);
    std::remove(path.c_str());
    CHECK_THROWS_AS(write_trace_csv("/nonexistent_dir_zz/trace.csv", trace), std::runtime_error);
}
