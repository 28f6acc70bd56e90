#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "corpus.hpp"
#include "kimura/lyapunov.hpp"

using namespace kimura;

namespace {

/// L = x²(1-x)∂².
const OperatorSpec1D kRemark{{1.0}, {}, 2, 1};

/// L = x²(1-x)∂² + b x (a - x)∂.
OperatorSpec1D logistic(double a, double b) { return {{1.0}, {a * b, -b}, 2, 1}; }

} // namespace

TEST(ApplyLOverF, RemarkClosedForm) {
    // f = x^c (1-x): L f / f = c(c-1) - c(c+1) x.
    for (double c : {0.2, 0.5, 0.8}) {
        const LyapunovCandidate1D f{c, 1.0};
        for (double x : {0.01, 0.3, 0.77, 0.999})
            EXPECT_NEAR(apply_L_over_f(kRemark, f, x), c * (c - 1.0) - c * (c + 1.0) * x, 1e-12);
        EXPECT_NEAR(endpoint_limit(kRemark, f, End::Left), c * (c - 1.0), 1e-15);
    }
}

TEST(ApplyLOverF, AgreesWithFiniteDifferences) {
    std::vector<LyapunovCandidate1D> cands{{0.5, 0.5}, {0.3, 1.0, Polynomial({1.0, 0.5})}, {-0.4, 0.7}, {0.0, -0.3}};
    auto specs = kimura::testing::transverse_corpus();
    specs.push_back({"remark", kRemark});
    for (const auto& entry : specs)
        for (const auto& f : cands)
            for (int i = 1; i <= 50; ++i) {
                const double x = i / 51.0;
                // Richardson-extrapolated central differences, O(h^4).
                auto derivs = [&](double h) {
                    return std::pair{(f(x + h) - f(x - h)) / (2 * h), (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)};
                };
                const double h = 2e-3 * std::min(x, 1.0 - x);
                const auto [c1, c2] = derivs(h);
                const auto [f1, f2] = derivs(h / 2);
                const double d1 = (4 * f1 - c1) / 3, d2 = (4 * f2 - c2) / 3;
                const auto [at, bt] = coefficients_full(entry.spec);
                const double fd = (at(x) * d2 + bt(x) * d1) / f(x);
                const double exact = apply_L_over_f(entry.spec, f, x);
                EXPECT_NEAR(fd, exact, 1e-6 * std::max(1.0, std::abs(exact))) << entry.name << " x=" << x;
            }
}

TEST(Certificate, RemarkOptimumIsMinusQuarter) {
    const auto res = optimize_exponent(kRemark, [](double c) { return LyapunovCandidate1D{c, 1.0}; }, 0.0, 1.0);
    EXPECT_NEAR(res.exponent, 0.5, 1e-4);
    EXPECT_NEAR(res.certificate.lambda0_bound, -0.25, 1e-6);
    EXPECT_EQ(res.certificate.status, CertificateStatus::Certified);
    EXPECT_EQ(res.certificate.worst_point, 0.0);
}

TEST(Certificate, LogisticDriftBound) {
    // f = x^c: L f / f = c(c-1)(1-x) + b c (a-x), linear in x, so the
    // supremum is c max(c-1+ab, b(a-1)).
    for (auto [a, b, c] : {std::array{0.5, 1.0, 0.3}, std::array{0.2, 2.0, 0.5}, std::array{0.9, 0.5, 0.1}}) {
        const auto cert = certify_lambda0(logistic(a, b), {c, 0.0});
        const double expected = c * std::max(c - 1.0 + a * b, b * (a - 1.0));
        ASSERT_LT(expected, 0.0);
        EXPECT_NEAR(cert.lambda0_bound, expected, 1e-9);
        EXPECT_EQ(cert.status, CertificateStatus::Certified);
    }
}

TEST(Certificate, NonVanishingAtTangentEndFails) {
    const auto cert = certify_lambda0(kRemark, {-0.5, 1.0});
    EXPECT_EQ(cert.status, CertificateStatus::PositiveSupremum);
    EXPECT_GT(cert.lambda0_bound, 0.0);
}

TEST(Certificate, StableUnderGridRefinement) {
    const LyapunovCandidate1D f{0.4, 0.6};
    const auto spec = kimura::testing::mixed_model(0.5, 0.5);
    const double coarse = certify_lambda0(spec, f, 1024).lambda0_bound;
    const double fine = certify_lambda0(spec, f, 2048).lambda0_bound;
    EXPECT_NEAR(coarse, fine, 1e-3 * std::abs(fine) + 1e-9);
}

TEST(GoldenSection, FindsParabolaMinimum) {
    const auto [x, fx] = golden_section_minimize([](double t) { return (t - 0.3) * (t - 0.3) + 2.0; }, 0.0, 1.0);
    EXPECT_NEAR(x, 0.3, 1e-7);
    EXPECT_NEAR(fx, 2.0, 1e-15);
}

TEST(BoundaryRecipe, ExponentsByEndpointClass) {
    EXPECT_EQ(*construct_boundary_candidate({{1.0}, {}, 1, 1}, End::Left).exponent, 0.5);
    EXPECT_EQ(*construct_boundary_candidate({{1.0}, {-1.0}, 2, 1}, End::Left).exponent, 0.5);
    EXPECT_EQ(*construct_boundary_candidate(kimura::testing::mixed_model(0.5, 2.0), End::Left).exponent, 0.0);
    const auto neutral = construct_boundary_candidate({{1.0}, {1.0}, 2, 1}, End::Left);
    EXPECT_EQ(neutral.kind, EndpointKind::QuadraticNeutral);
    EXPECT_FALSE(neutral.exponent.has_value());
}

TEST(InteriorPatch, ConstantSourceWithoutDrift) {
    const OperatorSpec1D spec{{1.0}, {}, 1, 1};
    const InteriorPatch p(spec, 0.3, 0.7, 1.0, 1.0, 0.5, 1.25, 1.25);
    EXPECT_NEAR(p.k(), 0.0, 1e-9);
    for (double x : {0.3, 0.45, 0.6, 0.7}) {
        EXPECT_NEAR(p.f(x), 1.25, 1e-9);
        EXPECT_NEAR(p.ux(x), 1.0 - 1.25 * (x - 0.3), 1e-9);
        EXPECT_NEAR(p.u(x), 1.0 + (x - 0.3) - 0.625 * (x - 0.3) * (x - 0.3), 1e-9);
    }
}

TEST(InteriorPatch, RisesThenFalls) {
    const auto spec = kimura::testing::mixed_model(0.5, 0.5);
    const InteriorPatch p(spec, 0.2, 0.8, 2.0, 1.0, -1.0, 0.7, 0.9);
    double max_u = 0.0, min_u = 1e300;
    bool rising = true;
    int turns = 0;
    double prev = p.u(0.2);
    for (int i = 1; i <= 200; ++i) {
        const double x = 0.2 + 0.6 * i / 201.0;
        EXPECT_LT(p.Lu(x), 0.0) << x;
        const double u = p.u(x);
        if (rising && u < prev) {
            rising = false;
            ++turns;
        }
        if (!rising) {
            EXPECT_LE(u, prev + 1e-12);
        }
        prev = u;
        max_u = std::max(max_u, u);
        min_u = std::min(min_u, u);
    }
    EXPECT_EQ(turns, 1);
    EXPECT_GE(min_u, std::min(p.u(0.2), p.u_right()) - 1e-12);
}

TEST(InteriorPatch, RejectsIncreasingFlux) {
    const OperatorSpec1D spec{{1.0}, {}, 1, 1};
    EXPECT_THROW(InteriorPatch(spec, 0.3, 0.7, 1.0, 0.5, 1.0, 1.0, 1.0), NumericalError);
}

namespace {

void expect_valid_global(const PatchedLyapunov1D& g) {
    const double x1 = g.patch().x1(), x2 = g.patch().x2();
    for (double x : {x1, x2}) {
        EXPECT_NEAR(g.u(x - 1e-12), g.u(x + 1e-12), 1e-8 * std::abs(g.u(x)));
        EXPECT_NEAR(g.ux(x - 1e-12), g.ux(x + 1e-12), 1e-6 * std::max(1.0, std::abs(g.ux(x))));
    }
    for (int i = 1; i < 200; ++i) {
        const double x = i / 200.0;
        EXPECT_GT(g.u(x), 0.0) << x;
        EXPECT_LT(g.Lu(x), 0.0) << x;
        if (std::abs(x - x1) > 1e-3 && std::abs(x - x2) > 1e-3) {
            EXPECT_NEAR(g.Lu_finite_difference(x), g.Lu(x), 1e-4 * std::max(1.0, std::abs(g.Lu(x)))) << x;
        }
    }
    const auto cert = g.certify();
    EXPECT_EQ(cert.status, CertificateStatus::Certified);
    EXPECT_LT(cert.lambda0_bound, 0.0);
}

} // namespace

TEST(GlobalLyapunov, OneTangentOneTransverse) {
    const auto g = assemble_global_lyapunov(kimura::testing::mixed_model(0.5, 0.5));
    EXPECT_EQ(g.topology(), PatchTopology::OneTangent);
    expect_valid_global(g);
}

TEST(GlobalLyapunov, TwoTangent) {
    const auto g = assemble_global_lyapunov({{1.0}, {}, 1, 1});
    EXPECT_EQ(g.topology(), PatchTopology::TwoTangent);
    expect_valid_global(g);
}

TEST(GlobalLyapunov, DeclinesWithoutATangentEnd) {
    EXPECT_THROW(assemble_global_lyapunov(kimura::testing::mixed_model(0.5, 2.0)), ValidationError);
    EXPECT_THROW(assemble_global_lyapunov({{1.0}, {1.0, -2.0}, 2, 1}), ValidationError);
}

TEST(Triangle, IdentityAndCornerRates) {
    const TriangleSpec tri{1.0, 2.0, 1.0};
    const auto cert = lyapunov_check_2d(tri);
    EXPECT_LT(cert.max_identity_error, 1e-13);
    EXPECT_EQ(cert.points_checked, 101u * 102u / 2u);
    EXPECT_EQ(cert.uniform_bound, -1.0);
    EXPECT_EQ(cert.rate_window, std::make_pair(1.0, 3.0));
    const Vec2 grad{-1.0, -1.0};
    const std::array<Vec2, 2> hess{};
    EXPECT_NEAR(apply_triangle_generator({0.0, 0.0}, tri, grad, hess), -3.0, 1e-15);
    // Near (1,0), L V / V tends to -1.
    const TriangleState s{1.0 - 1e-9, 0.0};
    EXPECT_NEAR(apply_triangle_generator(s, tri, grad, hess) / (1.0 - s.x - s.y), -1.0, 1e-6);
}

TEST(Triangle, SymmetricRates) {
    const double g = 0.7;
    const TriangleSpec tri{g, g, g};
    for (auto [x, y] : {std::pair{0.1, 0.2}, std::pair{0.5, 0.3}, std::pair{0.0, 0.6}}) {
        const double V = 1.0 - x - y;
        const double lv = apply_triangle_generator({x, y}, tri, {-1.0, -1.0}, {});
        EXPECT_NEAR(lv / V, -g * (2.0 - x - y), 1e-14);
    }
    EXPECT_DOUBLE_EQ(lyapunov_check_2d(tri).uniform_bound, -g);
}
