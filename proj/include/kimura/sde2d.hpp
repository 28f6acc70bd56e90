#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "kimura/errors.hpp"
#include "kimura/metrics.hpp"
#include "kimura/operator_model.hpp"
#include "kimura/parallel.hpp"
#include "kimura/rng.hpp"
#include "kimura/sde1d.hpp"

namespace kimura {

/// A point of the triangle {x ≥ 0, y ≥ 0, x + y ≤ 1}.
struct TriangleState {
    double x = 0.0;
    double y = 0.0;

    bool in_triangle() const { return x >= 0.0 && y >= 0.0 && x + y <= 1.0; }
};

using Vec2 = std::array<double, 2>;

/// Vector fields φ1 = (x-1, y), φ2 = (x, y-1), φ3 = (1, -1).
inline std::array<Vec2, 3> triangle_fields(const TriangleState& s) {
    return {Vec2{s.x - 1.0, s.y}, Vec2{s.x, s.y - 1.0}, Vec2{1.0, -1.0}};
}

/// γ12 (y-x) φ3 + γ23 (y-1) φ2 + γ13 (x-1) φ1.
inline Vec2 drift_2d(const TriangleState& s, const TriangleSpec& tri) {
    const auto [p1, p2, p3] = triangle_fields(s);
    const double w1 = tri.gamma13 * (s.x - 1.0);
    const double w2 = tri.gamma23 * (s.y - 1.0);
    const double w3 = tri.gamma12 * (s.y - s.x);
    return {w1 * p1[0] + w2 * p2[0] + w3 * p3[0], w1 * p1[1] + w2 * p2[1] + w3 * p3[1]};
}

/// Noise amplitudes sqrt(2γ13 x), sqrt(2γ23 y), sqrt(2γ12 xy) multiplying φ1, φ2, φ3.
inline std::array<double, 3> noise_coefficients_2d(const TriangleState& s, const TriangleSpec& tri) {
    return {std::sqrt(2.0 * tri.gamma13 * s.x), std::sqrt(2.0 * tri.gamma23 * s.y),
            std::sqrt(2.0 * tri.gamma12 * s.x * s.y)};
}

/// (L g)(x, y) = Σ_k σ_k²/2 (φ_k ⊗ φ_k) : ∇²g + drift · ∇g for the SDE generator,
/// given the gradient and Hessian of g at s.
inline double apply_triangle_generator(const TriangleState& s, const TriangleSpec& tri, const Vec2& grad,
                                       const std::array<Vec2, 2>& hess) {
    const auto fields = triangle_fields(s);
    const auto sigma = noise_coefficients_2d(s, tri);
    const Vec2 mu = drift_2d(s, tri);
    double second = 0.0;
    for (int k = 0; k < 3; ++k) {
        const Vec2& p = fields[k];
        const double quad = p[0] * p[0] * hess[0][0] + 2.0 * p[0] * p[1] * hess[0][1] + p[1] * p[1] * hess[1][1];
        second += 0.5 * sigma[k] * sigma[k] * quad;
    }
    return second + mu[0] * grad[0] + mu[1] * grad[1];
}

struct BoundaryCounters2D {
    std::uint64_t cutoffs = 0;  ///< steps where some coordinate was set to 0
    std::uint64_t rescales = 0; ///< steps pulled back under the diagonal

    BoundaryCounters2D& operator+=(const BoundaryCounters2D& o) {
        cutoffs += o.cutoffs;
        rescales += o.rescales;
        return *this;
    }
};

/// Euler step with the triangle boundary handling: coordinates are cut off at
/// 0 first, then a point beyond x + y = 1 is scaled by
/// (x_prev + y_prev) / (x + y). z holds three standard normals.
inline TriangleState step_euler_2d(const TriangleState& s, const TriangleSpec& tri, double dt,
                                   const std::array<double, 3>& z, BoundaryCounters2D* counters = nullptr) {
    const auto fields = triangle_fields(s);
    const auto sigma = noise_coefficients_2d(s, tri);
    const Vec2 mu = drift_2d(s, tri);
    const double sdt = std::sqrt(dt);
    TriangleState r{s.x + mu[0] * dt, s.y + mu[1] * dt};
    for (int k = 0; k < 3; ++k) {
        r.x += sigma[k] * fields[k][0] * sdt * z[k];
        r.y += sigma[k] * fields[k][1] * sdt * z[k];
    }
    if (r.x < 0.0 || r.y < 0.0) {
        r.x = std::max(r.x, 0.0);
        r.y = std::max(r.y, 0.0);
        if (counters) ++counters->cutoffs;
    }
    const double sum = r.x + r.y;
    if (sum > 1.0) {
        const double factor = (s.x + s.y) / sum;
        r.x *= factor;
        r.y *= factor;
        // Rounding can leave the product a few ulps above the diagonal.
        if (r.x + r.y > 1.0) r.y = std::max(0.0, 1.0 - r.x);
        if (counters) ++counters->rescales;
    }
    return r;
}

struct SchemeConfig2D {
    double dt = 0x1.0p-9;
    double t_final = 4.0;
    std::vector<double> snapshot_times;
    int marginal_bins = 100;

    void validate() const {
        SchemeConfig1D as1d;
        as1d.dt = dt;
        as1d.t_final = t_final;
        as1d.snapshot_times = snapshot_times;
        as1d.validate();
        if (marginal_bins < 1) throw ValidationError("scheme.marginal_bins must be positive");
    }
    std::uint64_t step_index(double t) const { return static_cast<std::uint64_t>(std::llround(t / dt)); }
};

struct TriangleSnapshot {
    double time = 0.0;
    std::vector<double> x;
    std::vector<double> y;
    double mean_one_minus_x_minus_y = 0.0;
    Histogram x_marginal;
};

struct EnsembleRun2D {
    std::vector<TriangleSnapshot> snapshots;
    BoundaryCounters2D counters;
};

/// Simulates n particles from s0 and calls observe(snapshot) at each snapshot
/// time. Particle i at step n uses the three normals at counter (n, i).
template <class Observer>
BoundaryCounters2D simulate_ensemble_2d(const TriangleSpec& tri, const SchemeConfig2D& cfg, const TriangleState& s0,
                                        const EnsembleOptions& opt, Observer&& observe) {
    tri.validate();
    cfg.validate();
    if (!s0.in_triangle()) throw ValidationError("initial state must lie in the triangle");
    const ParticleStream stream(opt.seed);
    const std::size_t n = opt.n_particles;
    std::vector<double> xs(n, s0.x), ys(n, s0.y);
    BoundaryCounters2D total;
    std::uint64_t step = 0;
    for (double t_snap : cfg.snapshot_times) {
        const std::uint64_t target = cfg.step_index(t_snap);
        constexpr std::size_t kBlock = 4096;
        const std::size_t blocks = (n + kBlock - 1) / kBlock;
        std::vector<BoundaryCounters2D> per_block(blocks);
        parallel_for(blocks, opt.threads, [&](std::size_t b0, std::size_t b1) {
            for (std::size_t b = b0; b < b1; ++b) {
                const std::size_t hi = std::min(n, (b + 1) * kBlock);
                for (std::size_t i = b * kBlock; i < hi; ++i) {
                    const std::uint64_t id = i + opt.particle_index_offset;
                    TriangleState s{xs[i], ys[i]};
                    for (std::uint64_t k = step; k < target; ++k) {
                        const auto z = opt.zero_noise ? std::array<double, 3>{} : stream.draw<3>(id, k);
                        s = step_euler_2d(s, tri, cfg.dt, z, &per_block[b]);
                    }
                    xs[i] = s.x;
                    ys[i] = s.y;
                }
            }
        });
        for (const auto& c : per_block) total += c;
        step = std::max(step, target);

        TriangleSnapshot snap;
        snap.time = t_snap;
        snap.x = xs;
        snap.y = ys;
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 - xs[i] - ys[i];
        snap.mean_one_minus_x_minus_y = n ? pairwise_sum(v) / static_cast<double>(n) : 0.0;
        snap.x_marginal = histogram(xs, cfg.marginal_bins, 0.0, 1.0);
        observe(std::move(snap));
    }
    return total;
}

inline EnsembleRun2D simulate_ensemble_2d(const TriangleSpec& tri, const SchemeConfig2D& cfg,
                                          const TriangleState& s0, const EnsembleOptions& opt) {
    EnsembleRun2D run;
    run.counters = simulate_ensemble_2d(tri, cfg, s0, opt,
                                        [&](TriangleSnapshot&& snap) { run.snapshots.push_back(std::move(snap)); });
    return run;
}

} // namespace kimura
