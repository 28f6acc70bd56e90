#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kimura/errors.hpp"
#include "kimura/parallel.hpp"
#include "kimura/rng.hpp"

namespace kimura {

namespace detail {

inline void require_order(double p) {
    if (!(p >= 1.0)) throw ValidationError("Wasserstein order p must be >= 1");
}

inline double power_mean(double sum_pow, std::size_t n, double p) {
    const double m = sum_pow / static_cast<double>(n);
    return p == 1.0 ? m : std::pow(m, 1.0 / p);
}

} // namespace detail

/// (N⁻¹ Σᵢ |xᵢ − F⁻¹((i−½)/N)|^p)^{1/p} for ascending samples x₁ ≤ … ≤ x_N.
template <class Quantile>
double wasserstein_p_vs_density(std::span<const double> sorted, Quantile&& quantile, double p = 1.0) {
    if (sorted.empty()) throw ValidationError("Wasserstein distance of an empty sample");
    detail::require_order(p);
    if (!std::is_sorted(sorted.begin(), sorted.end())) throw ValidationError("samples must be sorted ascending");
    const std::size_t n = sorted.size();
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double q = quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
        terms[i] = std::pow(std::abs(sorted[i] - q), p);
    }
    return detail::power_mean(pairwise_sum(terms), n, p);
}

/// (N⁻¹ Σ |target − xᵢ|^p)^{1/p}: distance from the empirical law to δ_target.
inline double wasserstein_p_to_dirac(std::span<const double> samples, double target = 1.0, double p = 1.0) {
    if (samples.empty()) throw ValidationError("Wasserstein distance of an empty sample");
    detail::require_order(p);
    std::vector<double> terms(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) terms[i] = std::pow(std::abs(target - samples[i]), p);
    return detail::power_mean(pairwise_sum(terms), samples.size(), p);
}

/// W^p between two equal-size empirical measures by matching order statistics.
inline double wasserstein_p_sample_sample(std::span<const double> a, std::span<const double> b, double p = 1.0) {
    if (a.size() != b.size()) throw ValidationError("sample sizes differ");
    if (a.empty()) throw ValidationError("Wasserstein distance of an empty sample");
    detail::require_order(p);
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::vector<double> terms(sa.size());
    for (std::size_t i = 0; i < sa.size(); ++i) terms[i] = std::pow(std::abs(sa[i] - sb[i]), p);
    return detail::power_mean(pairwise_sum(terms), sa.size(), p);
}

inline double wasserstein_1_sample_sample(std::span<const double> a, std::span<const double> b) {
    return wasserstein_p_sample_sample(a, b, 1.0);
}

inline constexpr std::size_t kBruteForceMaxSize = 8;

/// Exact min over permutations σ of (N⁻¹ Σ |aᵢ − b_σ(i)|^p)^{1/p}; n ≤ 8.
inline double ot_bruteforce_oracle(std::span<const double> a, std::span<const double> b, double p = 1.0) {
    if (a.size() != b.size()) throw ValidationError("sample sizes differ");
    if (a.empty()) throw ValidationError("Wasserstein distance of an empty sample");
    if (a.size() > kBruteForceMaxSize) throw ValidationError("brute-force transport is limited to 8 points");
    detail::require_order(p);
    std::vector<std::size_t> perm(a.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = INFINITY;
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(std::abs(a[i] - b[perm[i]]), p);
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return detail::power_mean(best, a.size(), p);
}

struct RateFitReport {
    double rate = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::pair<double, double> window{0.0, 0.0};
    std::size_t points_used = 0;
    std::size_t nonpositive_excluded = 0;
};

/// Least-squares line through (t, ln v) for points with t in `window` and
/// v > 0. The slope is the rate (negative for decay). Nonpositive values are
/// skipped and counted.
inline RateFitReport fit_exponential_rate(std::span<const double> t, std::span<const double> v,
                                          std::pair<double, double> window) {
    if (t.size() != v.size()) throw ValidationError("time and value series differ in length");
    RateFitReport rep;
    rep.window = window;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < window.first || t[i] > window.second) continue;
        if (!(v[i] > 0.0)) {
            ++rep.nonpositive_excluded;
            continue;
        }
        xs.push_back(t[i]);
        ys.push_back(std::log(v[i]));
    }
    if (xs.size() < 4)
        throw ValidationError("rate fit needs at least 4 positive points in the window, got " +
                              std::to_string(xs.size()));
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw ValidationError("rate fit needs at least two distinct times");
    rep.rate = sxy / sxx;
    rep.intercept = my - rep.rate * mx;
    rep.points_used = xs.size();
    if (syy > 0.0) {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double r = ys[i] - (rep.intercept + rep.rate * xs[i]);
            ss_res += r * r;
        }
        rep.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    }
    return rep;
}

/// Default fit window [T/4, T].
inline std::pair<double, double> default_rate_window(double t_final) { return {t_final / 4.0, t_final}; }

struct Histogram {
    std::vector<double> edges;
    std::vector<std::uint64_t> counts;
    std::uint64_t underflow = 0;
    std::uint64_t overflow = 0;
    std::uint64_t total = 0; ///< all samples, including under/overflow

    double bin_width() const { return edges.size() > 1 ? edges[1] - edges[0] : 0.0; }
    /// Divide a count by this to obtain a density estimate.
    double density_normalization() const { return static_cast<double>(total) * bin_width(); }
};

/// Equal-width bins on [lo, hi]; the right edge belongs to the last bin.
inline Histogram histogram(std::span<const double> samples, int bins, double lo, double hi) {
    if (bins < 1) throw ValidationError("histogram needs at least one bin");
    if (!(hi > lo)) throw ValidationError("histogram range is empty");
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int k = 0; k <= bins; ++k) h.edges[k] = lo + (hi - lo) * k / bins;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    const double scale = bins / (hi - lo);
    for (double x : samples) {
        ++h.total;
        if (x < lo) {
            ++h.underflow;
        } else if (x > hi) {
            ++h.overflow;
        } else {
            const auto k = std::min(static_cast<std::size_t>((x - lo) * scale), h.counts.size() - 1);
            ++h.counts[k];
        }
    }
    return h;
}

struct Histogram2D {
    int bins = 0;
    std::vector<std::uint64_t> counts; ///< row-major, index bin_x * bins + bin_y
    std::uint64_t outside = 0;

    std::uint64_t at(int bx, int by) const { return counts[static_cast<std::size_t>(bx) * bins + by]; }
};

/// Square bins on [0,1]²; points outside the unit square are counted separately.
inline Histogram2D histogram_2d(std::span<const double> xs, std::span<const double> ys, int bins) {
    if (bins < 1) throw ValidationError("histogram needs at least one bin");
    if (xs.size() != ys.size()) throw ValidationError("x and y samples differ in length");
    Histogram2D h;
    h.bins = bins;
    h.counts.assign(static_cast<std::size_t>(bins) * bins, 0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] < 0.0 || xs[i] > 1.0 || ys[i] < 0.0 || ys[i] > 1.0) {
            ++h.outside;
            continue;
        }
        const auto bx = std::min(static_cast<int>(xs[i] * bins), bins - 1);
        const auto by = std::min(static_cast<int>(ys[i] * bins), bins - 1);
        ++h.counts[static_cast<std::size_t>(bx) * bins + by];
    }
    return h;
}

/// i.i.d. draws F⁻¹(U) with uniforms from the counter-based stream `seed`.
template <class Quantile>
std::vector<double> sample_by_quantile(Quantile&& quantile, std::size_t n, std::uint64_t seed) {
    const ParticleStream stream(seed);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = quantile(stream.uniform(i, 0));
    return out;
}

/// Mean W¹ between two independent n-samples of the law with quantile F⁻¹:
/// the Monte Carlo resolution of an n-particle comparison.
template <class Quantile>
double sampling_noise_floor(Quantile&& quantile, std::size_t n, std::uint64_t seed, int repetitions = 8) {
    if (repetitions < 1) throw ValidationError("noise floor needs at least one repetition");
    double sum = 0.0;
    for (int r = 0; r < repetitions; ++r) {
        const auto a = sample_by_quantile(quantile, n, seed + 2 * static_cast<std::uint64_t>(r));
        const auto b = sample_by_quantile(quantile, n, seed + 2 * static_cast<std::uint64_t>(r) + 1);
        sum += wasserstein_1_sample_sample(a, b);
    }
    return sum / repetitions;
}

} // namespace kimura
