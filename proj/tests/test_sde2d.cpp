#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "kimura/sde2d.hpp"

using namespace kimura;

namespace {
const TriangleSpec kTri{1.0, 2.0, 1.0};
}

TEST(Drift2D, CornerValues) {
    // At (0,0): γ23 (-1)(0,-1) + γ13 (-1)(-1,0) = (γ13, γ23).
    const auto d0 = drift_2d({0.0, 0.0}, kTri);
    EXPECT_DOUBLE_EQ(d0[0], 2.0);
    EXPECT_DOUBLE_EQ(d0[1], 1.0);
    // At (1,0): γ12 (-1)(1,-1) + γ23 (-1)(1,-1) = (-2, 2).
    const auto d1 = drift_2d({1.0, 0.0}, kTri);
    EXPECT_DOUBLE_EQ(d1[0], -2.0);
    EXPECT_DOUBLE_EQ(d1[1], 2.0);
}

TEST(Drift2D, PointsInwardOnTheAxes) {
    for (int i = 0; i <= 20; ++i) {
        const double t = i / 20.0;
        EXPECT_GE(drift_2d({t, 0.0}, kTri)[1], 0.0);
        EXPECT_GE(drift_2d({0.0, t}, kTri)[0], 0.0);
    }
}

TEST(Noise2D, VanishesOnTheMatchingEdges) {
    const auto s = noise_coefficients_2d({0.0, 0.4}, kTri);
    EXPECT_EQ(s[0], 0.0);
    EXPECT_EQ(s[2], 0.0);
    EXPECT_DOUBLE_EQ(s[1], std::sqrt(0.8));
    const auto t = noise_coefficients_2d({0.3, 0.0}, kTri);
    EXPECT_EQ(t[1], 0.0);
    EXPECT_EQ(t[2], 0.0);
}

TEST(Generator2D, MatchesDirectExpansionOnAQuadratic) {
    // g = x², so ∇g = (2x, 0), ∇²g = diag(2, 0); then
    // L g = Σ σ_k² φ_k,x² + 2x μ_x.
    const TriangleState s{0.3, 0.2};
    const auto f = triangle_fields(s);
    const auto sig = noise_coefficients_2d(s, kTri);
    const auto mu = drift_2d(s, kTri);
    double expected = 2.0 * s.x * mu[0];
    for (int k = 0; k < 3; ++k) expected += sig[k] * sig[k] * f[k][0] * f[k][0];
    const double got = apply_triangle_generator(s, kTri, {2.0 * s.x, 0.0}, {Vec2{2.0, 0.0}, Vec2{0.0, 0.0}});
    EXPECT_NEAR(got, expected, 1e-15);
}

TEST(Step2D, ZeroNoiseIsEuler) {
    const TriangleState s{0.2, 0.3};
    const auto mu = drift_2d(s, kTri);
    const auto r = step_euler_2d(s, kTri, 0.01, {0.0, 0.0, 0.0});
    EXPECT_DOUBLE_EQ(r.x, 0.2 + 0.01 * mu[0]);
    EXPECT_DOUBLE_EQ(r.y, 0.3 + 0.01 * mu[1]);
}

TEST(Step2D, CutoffThenRescale) {
    BoundaryCounters2D c;
    // Large noise from near the corner (0,0) forces a cutoff.
    const auto r = step_euler_2d({0.01, 0.01}, kTri, 0.01, {30.0, 0.0, 0.0}, &c);
    EXPECT_GE(r.x, 0.0);
    EXPECT_GE(r.y, 0.0);
    EXPECT_EQ(c.cutoffs, 1u);
    // A step across the diagonal is scaled back onto x + y = x_prev + y_prev.
    const TriangleState s{0.45, 0.45};
    const auto big = step_euler_2d(s, kTri, 0.01, {-20.0, -20.0, 0.0}, &c);
    EXPECT_NEAR(big.x + big.y, 0.9, 1e-15);
    EXPECT_EQ(c.rescales, 1u);
}

TEST(Step2D, ContainmentUnderRandomKicks) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100000; ++i) {
        double x = u(rng), y = u(rng);
        if (x + y > 1.0) {
            x = 1.0 - x;
            y = 1.0 - y;
        }
        const auto r = step_euler_2d({x, y}, kTri, 0.1, {5 * z(rng), 5 * z(rng), 5 * z(rng)});
        ASSERT_TRUE(r.in_triangle()) << x << "," << y << " -> " << r.x << "," << r.y;
    }
}

TEST(Ensemble2D, DeterministicAcrossThreads) {
    SchemeConfig2D cfg;
    cfg.t_final = 0.5;
    cfg.snapshot_times = {0.25, 0.5};
    EnsembleOptions opt{9000, 5, 1, 0, false};
    const auto a = simulate_ensemble_2d(kTri, cfg, {0.1, 0.1}, opt);
    opt.threads = 3;
    const auto b = simulate_ensemble_2d(kTri, cfg, {0.1, 0.1}, opt);
    ASSERT_EQ(a.snapshots.size(), 2u);
    EXPECT_EQ(a.snapshots[1].x, b.snapshots[1].x);
    EXPECT_EQ(a.snapshots[1].y, b.snapshots[1].y);
    EXPECT_EQ(a.snapshots[1].mean_one_minus_x_minus_y, b.snapshots[1].mean_one_minus_x_minus_y);
    EXPECT_EQ(a.counters.cutoffs, b.counters.cutoffs);
}

TEST(Ensemble2D, MeanDistanceMatchesDriftFlowWithoutNoise) {
    // Along the noiseless flow V = 1 - x - y obeys
    // dV/dt = -((1-x)γ13 + (1-y)γ23) V, so V stays positive and decreases.
    SchemeConfig2D cfg;
    cfg.t_final = 1.0;
    cfg.snapshot_times = {0.5, 1.0};
    const auto run = simulate_ensemble_2d(kTri, cfg, {0.1, 0.1}, {3, 1, 1, 0, true});
    EXPECT_LT(run.snapshots[1].mean_one_minus_x_minus_y, run.snapshots[0].mean_one_minus_x_minus_y);
    EXPECT_GT(run.snapshots[1].mean_one_minus_x_minus_y, 0.0);
    // The rate lies between min(γ13, γ23) = 1 and γ13 + γ23 = 3.
    const double rate = -std::log(run.snapshots[1].mean_one_minus_x_minus_y / run.snapshots[0].mean_one_minus_x_minus_y) / 0.5;
    EXPECT_GT(rate, 1.0);
    EXPECT_LT(rate, 3.0);
}
