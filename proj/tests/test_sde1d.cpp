#include <cmath>
#include <vector>

#include <boost/numeric/odeint.hpp>
#include <gtest/gtest.h>

#include "kimura/sde1d.hpp"

using namespace kimura;

namespace {

SchemeConfig1D scheme(double dt, double t_final, std::vector<double> times) {
    SchemeConfig1D c;
    c.dt = dt;
    c.t_final = t_final;
    c.snapshot_times = std::move(times);
    return c;
}

} // namespace

TEST(MixedModel, SpecRoundTrip) {
    const MixedModel1D m{0.5, 2.0};
    const auto spec = m.spec();
    EXPECT_EQ(spec.b.coeff(1), -2.5);
    const auto back = MixedModel1D::from_spec(spec);
    EXPECT_EQ(back.c0, 0.5);
    EXPECT_EQ(back.c1, 2.0);
    EXPECT_THROW(MixedModel1D::from_spec({{1.0}, {0.5, -1.0}, 1, 1}), ValidationError);
    EXPECT_THROW(MixedModel1D::from_spec({{2.0}, {0.5, -1.0}, 1, 2}), ValidationError);
}

TEST(Steps, InteriorEulerByHand) {
    const MixedModel1D m{0.5, 2.0};
    // drift(0.5) = 0.5*0.25 - 2*0.25 = -0.375; noise sqrt(2*0.5)*0.5*sqrt(0.01) = 0.05.
    EXPECT_NEAR(step_interior(0.5, 0.01, m, 0.0), 0.49625, 1e-15);
    EXPECT_NEAR(step_interior(0.5, 0.01, m, 1.0), 0.54625, 1e-15);
}

TEST(Steps, ImplicitKimuraSolvesItsEquation) {
    const MixedModel1D m{0.5, 2.0};
    const double dt = 0x1.0p-10;
    for (double x : {1e-12, 1e-6, 0.003, 0.0099})
        for (double z : {-6.0, -1.0, 0.0, 0.5, 4.0}) {
            const double next = step_kimura_implicit(x, dt, m, z);
            ASSERT_GT(next, 0.0);
            const double rhs = x + m.drift(x) * dt + std::sqrt(2.0 * next) * (1.0 - x) * std::sqrt(dt) * z;
            EXPECT_NEAR(next, rhs, 1e-14 * std::max(1.0, next)) << "x=" << x << " z=" << z;
        }
    EXPECT_NEAR(step_kimura_implicit(0.005, dt, m, 0.0), 0.005 + m.drift(0.005) * dt, 1e-17);
}

TEST(Steps, ImplicitKimuraGuardsNegativeBase) {
    const MixedModel1D m{0.0, 5.0};
    // drift(x) = -5 x (1-x): with dt = 1 the base x + drift dt is negative.
    EXPECT_THROW(step_kimura_implicit(0.005, 1.0, m, 0.0), NegativeDiscriminantGuard);
}

TEST(Steps, LogStepByHand) {
    const MixedModel1D m{0.5, 0.5};
    const double x = 0.995, dt = 0.01;
    const double y = -std::log(1.0 - x);
    const double y1 = y + (0.5 * 0.005 - 0.5 * x + x) * dt + std::sqrt(2.0 * x * dt) * 0.3;
    EXPECT_NEAR(step_quadratic_log(x, dt, m, 0.3), 1.0 - std::exp(-y1), 1e-14);
    // Never reaches 1 in finite steps.
    EXPECT_LT(step_quadratic_log(0.9999, dt, m, 8.0), 1.0);
}

TEST(Advance, DispatchAndClamping) {
    const MixedModel1D m{0.5, 2.0};
    SchemeConfig1D cfg;
    SchemeCounters1D c;
    EXPECT_EQ(advance_1d(1.0, cfg.dt, m, cfg, 3.0, c), 1.0);
    advance_1d(0.005, cfg.dt, m, cfg, 0.1, c);
    advance_1d(0.5, cfg.dt, m, cfg, 0.1, c);
    advance_1d(0.995, cfg.dt, m, cfg, 0.1, c);
    EXPECT_EQ(c.kimura_steps, 1u);
    EXPECT_EQ(c.interior_steps, 1u);
    EXPECT_EQ(c.quadratic_steps, 1u);
    // An explicit step far below zero is reset to the Kimura threshold.
    EXPECT_EQ(advance_1d(0.02, cfg.dt, m, cfg, -50.0, c), cfg.kimura_threshold);
    EXPECT_EQ(c.clamped_low, 1u);
    EXPECT_EQ(advance_1d(0.98, cfg.dt, m, cfg, 50.0, c), cfg.quadratic_threshold);
    EXPECT_EQ(c.clamped_high, 1u);
}

TEST(SchemeConfig, ValidationNamesTheField) {
    auto message = [](const SchemeConfig1D& c) {
        try {
            c.validate();
        } catch (const ValidationError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message(scheme(0.0, 1.0, {})).find("scheme.dt"), std::string::npos);
    EXPECT_NE(message(scheme(0.01, 1.0, {0.5, 0.2})).find("snapshot_times"), std::string::npos);
    EXPECT_NE(message(scheme(0.01, 1.0, {2.0})).find("snapshot_times"), std::string::npos);
    SchemeConfig1D t;
    t.kimura_threshold = 0.5;
    t.quadratic_threshold = 0.4;
    EXPECT_NE(message(t).find("threshold"), std::string::npos);
}

TEST(Ensemble, ZeroNoiseFollowsTheDriftOde) {
    const MixedModel1D m{0.5, 2.0};
    const auto cfg = scheme(0x1.0p-12, 2.0, {0.5, 1.0, 2.0});
    EnsembleOptions opt{4, 1, 1, 0, true};
    const auto run = simulate_ensemble_1d(m.spec(), cfg, InitialCondition1D::dirac(0.7), opt);
    ASSERT_EQ(run.snapshots.size(), 3u);
    // Oracle: adaptive Runge-Kutta on x' = drift(x).
    std::vector<double> state{0.7};
    double t = 0.0;
    namespace odeint = boost::numeric::odeint;
    for (const auto& snap : run.snapshots) {
        odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<std::vector<double>>>(1e-13, 1e-13),
                                   [&](const std::vector<double>& x, std::vector<double>& dx, double) {
                                       dx[0] = m.drift(x[0]);
                                   },
                                   state, t, snap.time, 1e-3);
        t = snap.time;
        for (double x : snap.positions) EXPECT_NEAR(x, state[0], 2e-4) << "t=" << t;
    }
}

TEST(Ensemble, StaysInUnitIntervalAndPositive) {
    const MixedModel1D m{0.5, 2.0};
    const auto cfg = scheme(0x1.0p-8, 2.0, {1.0, 2.0});
    EnsembleOptions opt{5000, 11, 2, 0, false};
    const auto run = simulate_ensemble_1d(m.spec(), cfg, InitialCondition1D::dirac(0.02), opt);
    for (const auto& snap : run.snapshots)
        for (double x : snap.positions) {
            ASSERT_GT(x, 0.0);
            ASSERT_LE(x, 1.0);
        }
    EXPECT_GT(run.counters.kimura_steps, 0u);
}

TEST(Ensemble, IndependentOfThreadCount) {
    const MixedModel1D m{0.5, 0.5};
    const auto cfg = scheme(0x1.0p-9, 1.0, {0.25, 1.0});
    EnsembleOptions opt{10000, 99, 1, 0, false};
    const auto one = simulate_ensemble_1d(m.spec(), cfg, InitialCondition1D::dirac(0.5), opt);
    opt.threads = 4;
    const auto four = simulate_ensemble_1d(m.spec(), cfg, InitialCondition1D::dirac(0.5), opt);
    for (std::size_t s = 0; s < one.snapshots.size(); ++s)
        EXPECT_EQ(one.snapshots[s].positions, four.snapshots[s].positions);
    EXPECT_EQ(one.counters.interior_steps, four.counters.interior_steps);
}

TEST(Ensemble, ParticleOffsetSelectsStreams) {
    const MixedModel1D m{0.5, 2.0};
    const auto cfg = scheme(0x1.0p-8, 0.5, {0.5});
    const auto full = simulate_ensemble_1d(m.spec(), cfg, InitialCondition1D::dirac(0.5), {20, 4, 1, 0, false});
    const auto tail = simulate_ensemble_1d(m.spec(), cfg, InitialCondition1D::dirac(0.5), {10, 4, 1, 10, false});
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(tail.snapshots[0].positions[i], full.snapshots[0].positions[10 + i]);
}

TEST(Ensemble, QuantileInitialCondition) {
    const MixedModel1D m{0.5, 2.0};
    const auto cfg = scheme(0x1.0p-8, 0.0, {0.0});
    const auto run = simulate_ensemble_1d(m.spec(), cfg, InitialCondition1D::from_quantile([](double u) { return u * u; }),
                                          {1000, 8, 1, 0, false});
    double mean = 0.0;
    for (double x : run.snapshots[0].positions) mean += x;
    // E U² = 1/3 with standard deviation sqrt(4/45)/sqrt(1000).
    EXPECT_NEAR(mean / 1000.0, 1.0 / 3.0, 5.0 * std::sqrt(4.0 / 45.0 / 1000.0));
}

TEST(Steps, ExactKimuraMatchesFrozenCoefficientMoments) {
    const MixedModel1D m{0.5, 2.0};
    const double x = 0.004, dt = 0x1.0p-6;
    // Oracle: mean and variance of the square-root diffusion with rates
    // frozen at x.
    const double w = 1.0 - x, s2 = 2.0 * w * w, alpha = m.c0 * w, kappa = (m.c0 + m.c1) * w;
    const double e = std::exp(-kappa * dt);
    const double mean = x * e + alpha / kappa * (1.0 - e);
    const double var = x * s2 * e * (1.0 - e) / kappa + alpha * s2 * (1.0 - e) * (1.0 - e) / (2.0 * kappa * kappa);

    const ParticleStream stream(11);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        auto eng = stream.engine(static_cast<std::uint64_t>(i), 0);
        const double y = step_kimura_cir(x, dt, m, eng);
        ASSERT_GE(y, 0.0);
        sum += y;
        sum2 += y * y;
    }
    const double mu = sum / n, v = sum2 / n - mu * mu;
    EXPECT_NEAR(mu, mean, 5.0 * std::sqrt(var / n));
    EXPECT_NEAR(v / var, 1.0, 0.03);
}

TEST(Steps, ExactKimuraLeavesZeroAndIsReproducible) {
    const MixedModel1D m{0.5, 2.0};
    const ParticleStream stream(3);
    auto a = stream.engine(7, 9), b = stream.engine(7, 9);
    const double ya = step_kimura_cir(0.0, 0x1.0p-10, m, a);
    EXPECT_GT(ya, 0.0);
    EXPECT_EQ(ya, step_kimura_cir(0.0, 0x1.0p-10, m, b));
    EXPECT_EQ(step_kimura_cir(0.0, 0x1.0p-10, MixedModel1D{0.0, 1.0}, a), 0.0);
    EXPECT_THROW(step_kimura_cir(0.0, 0x1.0p-10, MixedModel1D{-0.1, 1.0}, a), ValidationError);
}

TEST(Advance, KimuraStepSelection) {
    const MixedModel1D m{0.5, 2.0};
    SchemeConfig1D cfg;
    SchemeCounters1D c;
    // Without an engine the exact step degenerates to the drift update.
    EXPECT_DOUBLE_EQ(advance_1d(0.005, cfg.dt, m, cfg, 1.0, c), 0.005 + m.drift(0.005) * cfg.dt);
    cfg.kimura_step = KimuraStep::ImplicitNoise;
    EXPECT_DOUBLE_EQ(advance_1d(0.005, cfg.dt, m, cfg, 1.0, c), step_kimura_implicit(0.005, cfg.dt, m, 1.0));
    EXPECT_EQ(parse_kimura_step("implicit_noise"), KimuraStep::ImplicitNoise);
    EXPECT_EQ(parse_kimura_step(to_string(KimuraStep::CirExact)), KimuraStep::CirExact);
    EXPECT_THROW(parse_kimura_step("euler"), ValidationError);
}
