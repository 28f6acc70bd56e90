#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace kimura {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Stateless: every 128-bit counter under a 64-bit key maps to four
/// independent 32-bit words, so any particle's stream can be evaluated at any
/// step without touching shared state.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter apply(Counter ctr, Key key) {
        constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
        constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }
};

/// Uniform in (0,1) on the midpoints of a 2^-52 grid; never returns 0 or 1.
inline double uniform_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

/// Random variates for particle `particle` at step `step`.
///
/// The key is the run seed and the counter is (step, block, particle), so the
/// value depends only on those coordinates and never on scheduling. Each
/// block yields two normals by Box-Muller; `Lanes` normals use
/// ceil(Lanes/2) blocks. Uniforms use a reserved block and never overlap the
/// normal blocks.
class CounterEngine;

class ParticleStream {
public:
    explicit ParticleStream(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    template <std::size_t Lanes>
    std::array<double, Lanes> draw(std::uint64_t particle, std::uint64_t step) const {
        std::array<double, Lanes> out{};
        for (std::size_t block = 0; 2 * block < Lanes; ++block) {
            const auto pair = box_muller(particle, step, static_cast<std::uint32_t>(block));
            out[2 * block] = pair[0];
            if (2 * block + 1 < Lanes) out[2 * block + 1] = pair[1];
        }
        return out;
    }

    double normal(std::uint64_t particle, std::uint64_t step) const { return draw<1>(particle, step)[0]; }

    double uniform(std::uint64_t particle, std::uint64_t step) const {
        const auto w = Philox4x32::apply(counter(particle, step, kUniformBlock), key_);
        return uniform_open(w[0], w[1]);
    }

    /// Unbounded sequence of 32-bit words for (particle, step), for samplers
    /// that consume a variable number of variates.
    CounterEngine engine(std::uint64_t particle, std::uint64_t step) const;

private:
    std::array<double, 2> box_muller(std::uint64_t particle, std::uint64_t step, std::uint32_t block) const {
        const auto w = Philox4x32::apply(counter(particle, step, block), key_);
        const double u1 = uniform_open(w[0], w[1]);
        const double u2 = uniform_open(w[2], w[3]);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    static constexpr std::uint32_t kUniformBlock = 0xFFFFFFFFu;

    static Philox4x32::Counter counter(std::uint64_t particle, std::uint64_t step, std::uint32_t block) {
        return {static_cast<std::uint32_t>(step), block, static_cast<std::uint32_t>(particle),
                static_cast<std::uint32_t>(particle >> 32)};
    }

    Philox4x32::Key key_;

    friend class CounterEngine;
};

/// UniformRandomBitGenerator over the counter blocks 2^31, 2^31 + 1, ... of
/// one (particle, step) cell; disjoint from the normal and uniform blocks.
class CounterEngine {
public:
    using result_type = std::uint32_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xFFFFFFFFu; }

    CounterEngine(Philox4x32::Key key, std::uint64_t particle, std::uint64_t step)
        : key_(key), particle_(particle), step_(step) {}

    result_type operator()() {
        if (used_ == 4) {
            words_ = Philox4x32::apply(ParticleStream::counter(particle_, step_, kFirstBlock + block_++), key_);
            used_ = 0;
        }
        return words_[used_++];
    }

private:
    static constexpr std::uint32_t kFirstBlock = 0x80000000u;

    Philox4x32::Key key_;
    std::uint64_t particle_, step_;
    std::uint32_t block_ = 0;
    Philox4x32::Counter words_{};
    int used_ = 4;
};

inline CounterEngine ParticleStream::engine(std::uint64_t particle, std::uint64_t step) const {
    return {key_, particle, step};
}

} // namespace kimura
