#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "kimura/errors.hpp"
#include "kimura/operator_model.hpp"
#include "kimura/parallel.hpp"
#include "kimura/rng.hpp"

namespace kimura {

/// The one-dimensional test family
///
///     dX = (c0 (1-X)² - c1 X (1-X)) dt + sqrt(2 X (1-X)²) dW,
///
/// i.e. a = 1, b = c0 - (c0 + c1) x, Kimura at 0 and quadratic at 1.
struct MixedModel1D {
    double c0 = 0.5;
    double c1 = 2.0;

    OperatorSpec1D spec() const { return {{1.0}, {c0, -(c0 + c1)}, 1, 2}; }

    /// Recovers (c0, c1) from a spec of this family; throws ValidationError
    /// for any other operator.
    static MixedModel1D from_spec(const OperatorSpec1D& spec) {
        const bool shape = spec.m0 == 1 && spec.m1 == 2 && spec.a.degree() == 0 && spec.a.coeff(0) == 1.0 &&
                           spec.b.degree() <= 1;
        if (!shape) throw ValidationError("simulation supports only a = 1, b = c0 - (c0 + c1) x with m0 = 1, m1 = 2");
        return {spec.b.coeff(0), -spec.b.coeff(1) - spec.b.coeff(0)};
    }

    double drift(double x) const { return c0 * (1.0 - x) * (1.0 - x) - c1 * x * (1.0 - x); }
};

/// Step used below the Kimura threshold.
enum class KimuraStep {
    /// Exact transition of the square-root diffusion obtained by freezing the
    /// (1 - x) factors at the current position.
    CirExact,
    /// Implicit update with the noise evaluated at the new point; see
    /// step_kimura_implicit.
    ImplicitNoise,
};

inline constexpr std::string_view to_string(KimuraStep k) {
    return k == KimuraStep::CirExact ? "cir_exact" : "implicit_noise";
}

inline KimuraStep parse_kimura_step(std::string_view s) {
    if (s == "cir_exact") return KimuraStep::CirExact;
    if (s == "implicit_noise") return KimuraStep::ImplicitNoise;
    throw ValidationError("scheme.kimura_step must be \"cir_exact\" or \"implicit_noise\"");
}

struct SchemeConfig1D {
    double dt = 0x1.0p-10;
    double kimura_threshold = 0.01;
    double quadratic_threshold = 0.99;
    double t_final = 2.0;
    std::vector<double> snapshot_times;
    KimuraStep kimura_step = KimuraStep::CirExact;

    void validate() const {
        if (!(dt > 0.0)) throw ValidationError("scheme.dt must be positive");
        if (!(kimura_threshold > 0.0 && kimura_threshold < quadratic_threshold && quadratic_threshold < 1.0))
            throw ValidationError("scheme thresholds must satisfy 0 < kimura_threshold < quadratic_threshold < 1");
        if (!(t_final >= 0.0)) throw ValidationError("scheme.t_final must be nonnegative");
        if (t_final / dt >= 4294967295.0) throw ValidationError("scheme.t_final / scheme.dt exceeds 2^32 steps");
        for (std::size_t i = 0; i < snapshot_times.size(); ++i) {
            const double t = snapshot_times[i];
            if (t < 0.0 || t > t_final * (1.0 + 1e-12))
                throw ValidationError("scheme.snapshot_times must lie in [0, t_final]");
            if (i > 0 && !(t > snapshot_times[i - 1]))
                throw ValidationError("scheme.snapshot_times must be strictly increasing");
        }
    }

    /// Step index whose end time is closest to t.
    std::uint64_t step_index(double t) const { return static_cast<std::uint64_t>(std::llround(t / dt)); }
};

/// Explicit Euler-Maruyama step; z is a standard normal and the Brownian
/// increment is sqrt(dt) z.
inline double step_interior(double x, double dt, const MixedModel1D& m, double z) {
    return x + m.drift(x) * dt + std::sqrt(2.0 * x) * (1.0 - x) * std::sqrt(dt) * z;
}

/// Implicit-noise step near the Kimura end:
///     X' = X + drift(X) dt + sqrt(2 X') (1 - X) sqrt(dt) z,
/// solved as a quadratic in s = sqrt(X'). Positive whenever X + drift dt > 0.
///
/// Since X' = B + beta s with s the root, E[X'] = B + (1 - X)² dt exactly:
/// the step carries an extra drift of (1 - X)², which does not vanish as
/// dt -> 0 and thins out the mass near 0.
inline double step_kimura_implicit(double x, double dt, const MixedModel1D& m, double z) {
    const double base = x + m.drift(x) * dt;
    if (base < 0.0)
        throw NegativeDiscriminantGuard("implicit Kimura step: x + drift*dt = " + std::to_string(base) +
                                        " is negative");
    const double beta = std::sqrt(2.0 * dt) * (1.0 - x) * z;
    const double root = std::sqrt(beta * beta + 4.0 * base);
    // Larger root of s² - beta s - base = 0, in a cancellation-free form.
    const double s = beta >= 0.0 ? 0.5 * (beta + root) : 2.0 * base / (root - beta);
    return s * s;
}

/// Exact one-step transition of the square-root diffusion
///
///     dX = w (c0 - (c0 + c1) X) dt + sqrt(2) w sqrt(X) dW,  w = 1 - x frozen,
///
/// which agrees with the model to first order in x. Sampled as a scaled
/// noncentral chi-square through its Poisson mixture of Gamma laws.
/// Never negative. With c0 = 0 the point 0 is absorbing.
template <class Engine>
double step_kimura_cir(double x, double dt, const MixedModel1D& m, Engine& engine) {
    if (m.c0 < 0.0) throw ValidationError("exact Kimura step needs c0 >= 0");
    const double w = 1.0 - x;
    const double sigma2 = 2.0 * w * w;
    const double alpha = m.c0 * w;
    const double kappa = (m.c0 + m.c1) * w;
    // c = sigma² (1 - e^{-kappa dt}) / (4 kappa), with the kappa -> 0 limit.
    const double growth = kappa != 0.0 ? -std::expm1(-kappa * dt) / kappa : dt;
    const double c = 0.25 * sigma2 * growth;
    const double dof = 4.0 * alpha / sigma2;
    const double lambda = x * std::exp(-kappa * dt) / c;
    long n = 0;
    if (lambda > 0.0) n = boost::random::poisson_distribution<long, double>(0.5 * lambda)(engine);
    const double shape = 0.5 * dof + static_cast<double>(n);
    if (shape == 0.0) return 0.0;
    const double g = boost::random::gamma_distribution<double>(shape)(engine);
    return 2.0 * c * g;
}

/// Step in y = -ln(1 - x) near the quadratic end:
///     y' = y + (c0 (1-x) - c1 x + x) dt + sqrt(2x) sqrt(dt) z.
inline double step_quadratic_log(double x, double dt, const MixedModel1D& m, double z) {
    const double y = -std::log1p(-x);
    const double y_next = y + (m.c0 * (1.0 - x) - m.c1 * x + x) * dt + std::sqrt(2.0 * x * dt) * z;
    return -std::expm1(-y_next);
}

enum class Regime1D { Kimura, Interior, Quadratic, Absorbed };

inline Regime1D regime_of(double x, const SchemeConfig1D& cfg) {
    if (x >= 1.0) return Regime1D::Absorbed;
    if (x < cfg.kimura_threshold) return Regime1D::Kimura;
    if (x > cfg.quadratic_threshold) return Regime1D::Quadratic;
    return Regime1D::Interior;
}

struct SchemeCounters1D {
    std::uint64_t interior_steps = 0;
    std::uint64_t kimura_steps = 0;
    std::uint64_t quadratic_steps = 0;
    /// Explicit or log steps that left [0,1] and were reset to a threshold.
    std::uint64_t clamped_low = 0;
    std::uint64_t clamped_high = 0;

    SchemeCounters1D& operator+=(const SchemeCounters1D& o) {
        interior_steps += o.interior_steps;
        kimura_steps += o.kimura_steps;
        quadratic_steps += o.quadratic_steps;
        clamped_low += o.clamped_low;
        clamped_high += o.clamped_high;
        return *this;
    }
};

/// One step with regime dispatch. x = 1 is absorbing. A result outside
/// [0, 1] is reset to the nearest threshold and counted. `engine` feeds the
/// exact Kimura step; when it is null that step falls back to the noiseless
/// update x + drift dt.
template <class Engine = CounterEngine>
double advance_1d(double x, double dt, const MixedModel1D& m, const SchemeConfig1D& cfg, double z,
                  SchemeCounters1D& counters, Engine* engine = nullptr) {
    double next = x;
    switch (regime_of(x, cfg)) {
    case Regime1D::Absorbed: return x;
    case Regime1D::Kimura:
        ++counters.kimura_steps;
        if (cfg.kimura_step == KimuraStep::ImplicitNoise) {
            next = step_kimura_implicit(x, dt, m, z);
        } else if (engine) {
            next = step_kimura_cir(x, dt, m, *engine);
        } else {
            next = x + m.drift(x) * dt;
        }
        break;
    case Regime1D::Quadratic:
        ++counters.quadratic_steps;
        next = step_quadratic_log(x, dt, m, z);
        break;
    case Regime1D::Interior:
        ++counters.interior_steps;
        next = step_interior(x, dt, m, z);
        break;
    }
    if (next < 0.0) {
        ++counters.clamped_low;
        return cfg.kimura_threshold;
    }
    if (next > 1.0) {
        ++counters.clamped_high;
        return cfg.quadratic_threshold;
    }
    return next;
}

/// Initial law: a point mass or i.i.d. draws through a quantile function.
struct InitialCondition1D {
    std::optional<double> point;
    std::function<double(double)> quantile;

    static InitialCondition1D dirac(double x0) { return {x0, {}}; }
    static InitialCondition1D from_quantile(std::function<double(double)> q) { return {std::nullopt, std::move(q)}; }
};

/// Particle positions at one time.
struct ParticleEnsemble {
    std::vector<double> positions;
    double time = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t particle_index_offset = 0;
};

struct EnsembleOptions {
    std::size_t n_particles = 0;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    /// Global index of particle 0; shifts every particle's random stream.
    std::uint64_t particle_index_offset = 0;
    /// Replace every Gaussian draw by 0 (deterministic drift flow).
    bool zero_noise = false;
};

struct EnsembleRun1D {
    std::vector<ParticleEnsemble> snapshots;
    SchemeCounters1D counters;
};

/// Counter-stream step index reserved for initial sampling.
inline constexpr std::uint64_t kInitialSamplingStep = 0xFFFFFFFFull;

/// Simulates n independent particles and calls `observe(snapshot)` at each
/// snapshot time, in order. Particle i at step n always consumes the normal
/// at counter (n, i + offset), so results do not depend on `threads`.
template <class Observer>
SchemeCounters1D simulate_ensemble_1d(const OperatorSpec1D& spec, const SchemeConfig1D& cfg,
                                      const InitialCondition1D& init, const EnsembleOptions& opt,
                                      Observer&& observe) {
    spec.validate();
    cfg.validate();
    const MixedModel1D model = MixedModel1D::from_spec(spec);
    if (model.c0 < 0.0) throw ValidationError("model.c0 must be nonnegative");
    if (!init.point && !init.quantile) throw ValidationError("initial condition needs a point or a quantile function");
    if (init.point && !(*init.point >= 0.0 && *init.point <= 1.0))
        throw ValidationError("initial point must lie in [0,1]");

    const ParticleStream stream(opt.seed);
    const std::size_t n = opt.n_particles;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = init.point ? *init.point : init.quantile(stream.uniform(i + opt.particle_index_offset, kInitialSamplingStep));

    SchemeCounters1D total;
    std::uint64_t step = 0;
    for (double t_snap : cfg.snapshot_times) {
        const std::uint64_t target = cfg.step_index(t_snap);
        constexpr std::size_t kBlock = 4096;
        const std::size_t blocks = (n + kBlock - 1) / kBlock;
        std::vector<SchemeCounters1D> per_block(blocks);
        parallel_for(blocks, opt.threads, [&](std::size_t b0, std::size_t b1) {
            for (std::size_t b = b0; b < b1; ++b) {
                SchemeCounters1D& c = per_block[b];
                const std::size_t hi = std::min(n, (b + 1) * kBlock);
                for (std::size_t i = b * kBlock; i < hi; ++i) {
                    const std::uint64_t id = i + opt.particle_index_offset;
                    double xi = x[i];
                    for (std::uint64_t k = step; k < target && xi < 1.0; ++k) {
                        const double z = opt.zero_noise ? 0.0 : stream.normal(id, k);
                        CounterEngine engine = stream.engine(id, k);
                        try {
                            xi = advance_1d(xi, cfg.dt, model, cfg, z, c, opt.zero_noise ? nullptr : &engine);
                        } catch (const NegativeDiscriminantGuard& e) {
                            throw NegativeDiscriminantGuard(std::string(e.what()) + " (particle " +
                                                            std::to_string(id) + ", t = " +
                                                            std::to_string(static_cast<double>(k) * cfg.dt) + ")");
                        }
                    }
                    x[i] = xi;
                }
            }
        });
        for (const auto& c : per_block) total += c;
        step = std::max(step, target);
        observe(ParticleEnsemble{x, t_snap, opt.seed, opt.particle_index_offset});
    }
    return total;
}

/// Collects every snapshot in memory.
inline EnsembleRun1D simulate_ensemble_1d(const OperatorSpec1D& spec, const SchemeConfig1D& cfg,
                                          const InitialCondition1D& init, const EnsembleOptions& opt) {
    EnsembleRun1D run;
    run.counters = simulate_ensemble_1d(spec, cfg, init, opt,
                                        [&](ParticleEnsemble&& snap) { run.snapshots.push_back(std::move(snap)); });
    return run;
}

} // namespace kimura
