#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "kimura/rng.hpp"

using namespace kimura;

TEST(Philox, KnownAnswerVectors) {
    using C = Philox4x32::Counter;
    EXPECT_EQ(Philox4x32::apply(C{0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    EXPECT_EQ(Philox4x32::apply(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
              (C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    EXPECT_EQ(Philox4x32::apply(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
              (C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(UniformOpen, StaysInsideTheOpenInterval) {
    EXPECT_GT(uniform_open(0, 0), 0.0);
    EXPECT_LT(uniform_open(0xffffffffu, 0xffffffffu), 1.0);
    EXPECT_EQ(uniform_open(0xffffffffu, 0xffffffffu), 1.0 - 0x1.0p-53);
    EXPECT_DOUBLE_EQ(uniform_open(0x80000000u, 0), 0.5 + 0x1.0p-53);
}

TEST(ParticleStream, DependsOnlyOnCoordinates) {
    const ParticleStream a(42), b(42), c(43);
    EXPECT_EQ(a.normal(7, 100), b.normal(7, 100));
    EXPECT_NE(a.normal(7, 100), c.normal(7, 100));
    EXPECT_NE(a.normal(7, 100), a.normal(8, 100));
    EXPECT_NE(a.normal(7, 100), a.normal(7, 101));
    // Particle indices beyond 2^32 use the high counter word.
    EXPECT_NE(a.normal(1, 0), a.normal(1 + (std::uint64_t{1} << 32), 0));
}

TEST(ParticleStream, FirstLaneOfWiderDrawIsTheScalarNormal) {
    const ParticleStream s(5);
    const auto three = s.draw<3>(11, 22);
    EXPECT_EQ(three[0], s.normal(11, 22));
    EXPECT_NE(three[1], three[2]);
}

TEST(ParticleStream, UniformsAreDisjointFromNormals) {
    const ParticleStream s(9);
    std::set<double> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const double u = s.uniform(i, 0);
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        seen.insert(u);
    }
    EXPECT_EQ(seen.size(), 1000u);
}

TEST(ParticleStream, NormalMomentsAtMonteCarloAccuracy) {
    const ParticleStream s(2024);
    const int n = 200000;
    double m1 = 0, m2 = 0, m4 = 0;
    for (int i = 0; i < n; ++i) {
        const auto z = s.draw<2>(static_cast<std::uint64_t>(i), 3);
        for (double v : z) {
            m1 += v;
            m2 += v * v;
            m4 += v * v * v * v;
        }
    }
    const double N = 2.0 * n;
    // Standard errors: 1/sqrt(N), sqrt(2/N), sqrt(96/N).
    EXPECT_NEAR(m1 / N, 0.0, 5.0 / std::sqrt(N));
    EXPECT_NEAR(m2 / N, 1.0, 5.0 * std::sqrt(2.0 / N));
    EXPECT_NEAR(m4 / N, 3.0, 5.0 * std::sqrt(96.0 / N));
}

TEST(CounterEngine, DrawsFromTheUpperBlockRange) {
    const std::uint64_t seed = 0x0123456789abcdefULL, particle = 5, step = 6;
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    auto eng = ParticleStream(seed).engine(particle, step);
    for (std::uint32_t block = 0x80000000u; block < 0x80000003u; ++block) {
        const auto w = Philox4x32::apply({static_cast<std::uint32_t>(step), block, static_cast<std::uint32_t>(particle), 0}, key);
        for (auto word : w) EXPECT_EQ(eng(), word);
    }
    auto a = ParticleStream(seed).engine(particle, step);
    auto b = ParticleStream(seed).engine(particle, step + 1);
    EXPECT_NE(a(), b());
}
