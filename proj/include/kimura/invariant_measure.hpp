#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "kimura/errors.hpp"
#include "kimura/operator_model.hpp"
#include "kimura/polynomial.hpp"
#include "kimura/quadrature.hpp"

namespace kimura {

/// Splits the drift ratio b̃/ã = b / (a x (1-x)) into its two endpoint poles
/// and a remainder that is smooth on [0,1]:
///
///     b̃/ã = h0/x + h1/(1-x) + R(x),  h0 = b(0)/a(0), h1 = b(1)/a(1)
///
/// so that ∫_{1/2}^x b̃/ã = h0 ln(2x) - h1 ln(2(1-x)) + ∫_{1/2}^x R.
class DriftSplit {
public:
    explicit DriftSplit(const OperatorSpec1D& spec) : a_(spec.a) {
        h0_ = spec.b(0.0) / spec.a(0.0);
        h1_ = spec.b(1.0) / spec.a(1.0);
        const Polynomial numer = spec.b - spec.a * Polynomial({h0_, h1_ - h0_});
        remainder_num_ = numer.divided_by_x_one_minus_x(1e-10);
        if (spec.a.degree() == 0) {
            // R is a polynomial: integrate exactly.
            const auto c = remainder_num_.coeffs();
            std::vector<double> anti(c.size() + 1, 0.0);
            for (std::size_t k = 0; k < c.size(); ++k) anti[k + 1] = c[k] / (static_cast<double>(k + 1) * spec.a(0.0));
            antiderivative_ = Polynomial(std::move(anti));
            exact_ = true;
        }
    }

    double h0() const { return h0_; }
    double h1() const { return h1_; }

    double remainder(double x) const { return remainder_num_(x) / a_(x); }

    /// ∫_{1/2}^x R(ξ) dξ
    double remainder_integral(double x) const {
        if (exact_) return antiderivative_(x) - antiderivative_(0.5);
        // R is smooth on [0,1]; composite Gauss-Legendre on pieces of length <= 1/8.
        const double lo = std::min(x, 0.5), hi = std::max(x, 0.5);
        const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) * 8.0)));
        const double h = (hi - lo) / pieces;
        double acc = 0.0;
        for (int i = 0; i < pieces; ++i)
            acc += quad::gauss20([this](double t) { return remainder(t); }, lo + i * h, lo + (i + 1) * h);
        return x < 0.5 ? -acc : acc;
    }

    /// ∫_{1/2}^x b̃/ã dξ, for x in (0,1).
    double drift_integral(double x) const {
        return h0_ * std::log(2.0 * x) - h1_ * std::log(2.0 * (1.0 - x)) + remainder_integral(x);
    }

private:
    Polynomial a_;
    Polynomial remainder_num_;
    Polynomial antiderivative_;
    bool exact_ = false;
    double h0_ = 0.0;
    double h1_ = 0.0;
};

/// S'(x) = exp(-∫_{1/2}^x b̃/ã).
inline double scale_derivative(const DriftSplit& split, double x) {
    return std::exp(-split.drift_integral(x));
}

/// S(x) - S(x_ref), the scale function based at x_ref.
///
/// Interior arguments always give a finite value. An argument equal to 0 or 1
/// requires integrability of S' ~ x^{-h0} (resp. (1-x)^{h1}) there and raises
/// DivergentIntegral otherwise.
inline double scale_function(const OperatorSpec1D& spec, double x, double x_ref,
                             double rel_tol = quad::kDefaultRelTol) {
    spec.validate();
    if (x < 0.0 || x > 1.0 || x_ref < 0.0 || x_ref > 1.0) throw ValidationError("scale_function: argument outside [0,1]");
    const DriftSplit split(spec);
    // Integral of S' from the nearest endpoint-free base point 1/2 to y.
    auto from_half = [&](double y) -> double {
        if (y > 0.0 && y < 1.0)
            return quad::adaptive([&](double t) { return scale_derivative(split, t); }, 0.5, y, rel_tol);
        // S' = (2x)^{-h0} (2(1-x))^{h1} e^{-IR}; the power at the endpoint is
        // handled by the weighted half-interval rule.
        if (y == 0.0) {
            const double e = -split.h0();
            if (!(e > -1.0)) throw DivergentIntegral("scale function diverges at x=0");
            auto g = [&](double t) {
                return std::pow(2.0, e) * std::pow(2.0 * (1.0 - t), split.h1()) * std::exp(-split.remainder_integral(t));
            };
            return -quad::half_weighted(g, e, rel_tol);
        }
        const double e = split.h1();
        if (!(e > -1.0)) throw DivergentIntegral("scale function diverges at x=1");
        auto g = [&](double z) {
            return std::pow(2.0, e) * std::pow(2.0 * (1.0 - z), -split.h0()) *
                   std::exp(-split.remainder_integral(1.0 - z));
        };
        return quad::half_weighted(g, e, rel_tol);
    };
    return from_half(x) - from_half(x_ref);
}

/// Normalized scale function S0 with S0(0) = 0 and S0(1) = 1, defined when S
/// is finite at both ends (in particular when both endpoints are tangent).
/// Started from x, the two-tangent process is absorbed at 1 with probability
/// S0(x).
inline double normalized_scale_function(const OperatorSpec1D& spec, double x) {
    const double total = scale_function(spec, 1.0, 0.0);
    return scale_function(spec, x, 0.0) / total;
}

/// Densities of the form x^e0 (1-x)^e1 smooth(x) / Z on (0,1).
template <class D>
concept WeightedDensity = requires(const D& d, double x) {
    { d.left_exponent() } -> std::convertible_to<double>;
    { d.right_exponent() } -> std::convertible_to<double>;
    { d.smooth(x) } -> std::convertible_to<double>;
    { d.Z() } -> std::convertible_to<double>;
};

/// Normalized stationary (speed) density of a transverse/transverse operator
///
///     m(x) = exp(∫_{1/2}^x b̃/ã) / ã(x) = x^e0 (1-x)^e1 s(x)
///
/// with e0 = b(0)/a(0) - m0, e1 = -b(1)/a(1) - m1 and s smooth and positive.
class DensityProfile {
public:
    DensityProfile(OperatorSpec1D spec, double rel_tol)
        : spec_(std::move(spec)), split_(spec_), tol_(rel_tol) {
        e0_ = split_.h0() - spec_.m0;
        e1_ = -split_.h1() - spec_.m1;
        log_const_ = (split_.h0() - split_.h1()) * std::numbers::ln2;
        if (!(e0_ > -1.0) || !(e1_ > -1.0))
            throw NonIntegrable("stationary density is not integrable (endpoint exponents " + std::to_string(e0_) +
                                ", " + std::to_string(e1_) + ")");
        Z_ = quad::weighted([this](double x) { return smooth_unnormalized(x); }, e0_, e1_, tol_);
        if (!(Z_ > 0.0) || !std::isfinite(Z_)) throw NonIntegrable("normalizing constant is not finite");
    }

    const OperatorSpec1D& spec() const { return spec_; }
    double left_exponent() const { return e0_; }
    double right_exponent() const { return e1_; }
    double Z() const { return Z_; }
    double quadrature_tol() const { return tol_; }

    /// s(x), the regular factor of the unnormalized density.
    double smooth_unnormalized(double x) const {
        return std::exp(log_const_ + split_.remainder_integral(x)) / spec_.a(x);
    }
    /// Regular factor of the *normalized* density, for WeightedDensity.
    double smooth(double x) const { return smooth_unnormalized(x) / Z_; }

    /// Unnormalized speed density at x in (0,1).
    double unnormalized(double x) const {
        return std::pow(x, e0_) * std::pow(1.0 - x, e1_) * smooth_unnormalized(x);
    }
    double operator()(double x) const { return unnormalized(x) / Z_; }

private:
    OperatorSpec1D spec_;
    DriftSplit split_;
    double tol_;
    double e0_ = 0.0, e1_ = 0.0, log_const_ = 0.0, Z_ = 1.0;
};

/// Both endpoints must be transverse; otherwise NonIntegrable.
inline DensityProfile stationary_density(const OperatorSpec1D& spec, double rel_tol = quad::kDefaultRelTol) {
    spec.validate();
    const auto l = classify_endpoint(spec, End::Left).kind;
    const auto r = classify_endpoint(spec, End::Right).kind;
    if (!is_transverse(l) || !is_transverse(r))
        throw NonIntegrable(std::string("no integrable stationary density: endpoints are ") +
                            std::string(to_string(l)) + " / " + std::string(to_string(r)));
    return DensityProfile(spec, rel_tol);
}

/// invariant_measure_set with the absolutely continuous member resolved.
inline std::vector<InvariantMeasureSpec> resolve_invariant_measures(const OperatorSpec1D& spec) {
    auto set = invariant_measure_set(spec);
    for (auto& m : set) {
        if (m.kind != MeasureKind::AbsolutelyContinuous) continue;
        auto profile = std::make_shared<DensityProfile>(stationary_density(spec));
        m.density = [profile](double x) { return profile->unnormalized(x); };
        m.Z = profile->Z();
    }
    return set;
}

/// Monotone CDF / quantile pair of a WeightedDensity.
///
/// The CDF is tabulated on a uniform grid in an auxiliary coordinate u in
/// which the endpoint power singularities are absorbed (x = ½(2u)^p on the
/// left half with p = 1/(1+e0) when e0 < 0, mirrored on the right), and
/// interpolated by monotone cubic Hermite splines using the exact density as
/// slope data. Quantiles are found by bisection inside the bracketing cell.
class CdfTable {
public:
    template <WeightedDensity D>
    CdfTable(const D& density, int grid_size = 4096) {
        if (grid_size < 64) throw ValidationError("CDF grid size must be at least 64");
        if (grid_size % 2) ++grid_size;
        e0_ = density.left_exponent();
        e1_ = density.right_exponent();
        if (!(e0_ > -1.0) || !(e1_ > -1.0)) throw NonIntegrable("density is not integrable");
        p0_ = e0_ < 0.0 ? 1.0 / (1.0 + e0_) : 1.0;
        p1_ = e1_ < 0.0 ? 1.0 / (1.0 + e1_) : 1.0;

        // dF/du with the singular factor cancelled analytically.
        auto rate = [&](double u) -> double {
            if (u <= 0.5) {
                const double w = 2.0 * u;
                const double x = 0.5 * std::pow(w, p0_);
                const double jac_sing = p0_ * std::pow(0.5, e0_) * std::pow(w, p0_ * (1.0 + e0_) - 1.0);
                return jac_sing * std::pow(1.0 - x, e1_) * density.smooth(x);
            }
            const double w = 2.0 * (1.0 - u);
            const double z = 0.5 * std::pow(w, p1_);
            const double jac_sing = p1_ * std::pow(0.5, e1_) * std::pow(w, p1_ * (1.0 + e1_) - 1.0);
            return jac_sing * std::pow(1.0 - z, e0_) * density.smooth(1.0 - z);
        };

        const int n = grid_size;
        h_ = 1.0 / n;
        G_.assign(n + 1, 0.0);
        D_.assign(n + 1, 0.0);
        for (int k = 0; k < n; ++k) G_[k + 1] = G_[k] + quad::gauss20(rate, k * h_, (k + 1) * h_);
        for (int k = 0; k <= n; ++k) D_[k] = rate(k * h_);
        total_mass_ = G_[n];
        if (!(total_mass_ > 0.0) || !std::isfinite(total_mass_)) throw NumericalError("CDF total mass not finite");
        for (int k = 0; k <= n; ++k) {
            G_[k] /= total_mass_;
            D_[k] /= total_mass_;
        }
        G_[n] = 1.0;
        limit_slopes();
    }

    /// ∫₀¹ density before renormalization; ~1 for a normalized input.
    double total_mass() const { return total_mass_; }
    int grid_size() const { return static_cast<int>(G_.size()) - 1; }

    double cdf(double x) const {
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return 1.0;
        return interp(u_of_x(x));
    }

    double quantile(double q) const {
        if (q <= 0.0) return 0.0;
        if (q >= 1.0) return 1.0;
        const auto it = std::upper_bound(G_.begin(), G_.end(), q);
        const auto k = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - G_.begin() - 1, 0,
                                                                         static_cast<std::ptrdiff_t>(G_.size()) - 2));
        double lo = k * h_, hi = (k + 1) * h_;
        for (int iter = 0; iter < 64 && hi - lo > 1e-17; ++iter) {
            const double mid = 0.5 * (lo + hi);
            if (interp_in_cell(k, mid) < q)
                lo = mid;
            else
                hi = mid;
        }
        return x_of_u(0.5 * (lo + hi));
    }

    double x_of_u(double u) const {
        if (u <= 0.5) return 0.5 * std::pow(2.0 * u, p0_);
        return 1.0 - 0.5 * std::pow(2.0 * (1.0 - u), p1_);
    }
    double u_of_x(double x) const {
        if (x <= 0.5) return 0.5 * std::pow(2.0 * x, 1.0 / p0_);
        return 1.0 - 0.5 * std::pow(2.0 * (1.0 - x), 1.0 / p1_);
    }

private:
    // Fritsch-Carlson limiter: guarantees a monotone Hermite interpolant.
    void limit_slopes() {
        for (std::size_t k = 0; k + 1 < G_.size(); ++k) {
            const double delta = (G_[k + 1] - G_[k]) / h_;
            if (delta <= 0.0) {
                D_[k] = 0.0;
                D_[k + 1] = 0.0;
                continue;
            }
            const double a = D_[k] / delta, b = D_[k + 1] / delta;
            const double s = a * a + b * b;
            if (s > 9.0) {
                const double tau = 3.0 / std::sqrt(s);
                D_[k] = tau * a * delta;
                D_[k + 1] = tau * b * delta;
            }
        }
    }

    double interp_in_cell(std::size_t k, double u) const {
        const double t = (u - k * h_) / h_;
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t, h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
        return h00 * G_[k] + h10 * h_ * D_[k] + h01 * G_[k + 1] + h11 * h_ * D_[k + 1];
    }

    double interp(double u) const {
        const auto n = G_.size() - 1;
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(u / h_), n - 1);
        return std::clamp(interp_in_cell(k, u), 0.0, 1.0);
    }

    std::vector<double> G_, D_;
    double h_ = 0.0;
    double e0_ = 0.0, e1_ = 0.0, p0_ = 1.0, p1_ = 1.0;
    double total_mass_ = 1.0;
};

inline CdfTable cdf_and_quantile(const DensityProfile& profile, int grid_size = 4096) {
    return CdfTable(profile, grid_size);
}

/// Invariant density along the diagonal edge x + y = 1 of the triangle model,
/// already normalized on [0,1].
inline std::function<double(double)> edge_invariant_2d(const TriangleSpec& tri) {
    tri.validate();
    const double num = (tri.gamma12 + tri.gamma13) * (tri.gamma12 + tri.gamma23);
    return [=](double x) {
        const double d = tri.gamma12 + tri.gamma13 * (1.0 - x) + tri.gamma23 * x;
        return num / (d * d);
    };
}

/// Quantile of edge_invariant_2d in closed form. With d(x) = γ12 + γ13 (1-x) + γ23 x
/// the CDF is (γ12 + γ23) x / d(x).
inline std::function<double(double)> edge_invariant_2d_quantile(const TriangleSpec& tri) {
    tri.validate();
    const double d0 = tri.gamma12 + tri.gamma13, slope = tri.gamma23 - tri.gamma13;
    const double top = tri.gamma12 + tri.gamma23;
    return [=](double q) { return q * d0 / (top - q * slope); };
}

/// The triangle generator restricted to the diagonal, parametrized by x:
/// ã = (1-x) x (γ12 + γ23 x + γ13 (1-x)), b̃ = γ12(1-2x) - γ23 x² + γ13 (1-x)².
inline OperatorSpec1D restricted_diagonal_operator(const TriangleSpec& tri) {
    tri.validate();
    const double g12 = tri.gamma12, g13 = tri.gamma13, g23 = tri.gamma23;
    Polynomial a({g12 + g13, g23 - g13});
    Polynomial b({g12 + g13, -2.0 * g12 - 2.0 * g13, g13 - g23});
    return {a, b, 1, 1};
}

/// ∫ (ã f'' + b̃ f') dμ by endpoint-aware quadrature; ~0 iff μ is invariant
/// against f.
template <WeightedDensity D>
double stationarity_residual(const OperatorSpec1D& spec, const D& density, const Polynomial& f,
                             double rel_tol = 1e-12) {
    const auto [at, bt] = coefficients_full(spec);
    const Polynomial lf = at * f.derivative().derivative() + bt * f.derivative();
    if (lf.is_zero()) return 0.0;
    auto g = [&](double x) { return lf(x) * density.smooth(x); };
    // Absolute tolerance scale: the integral can legitimately be ~0.
    return quad::weighted(g, density.left_exponent(), density.right_exponent(), rel_tol);
}

inline double stationarity_residual(const DensityProfile& profile, const Polynomial& f) {
    return stationarity_residual(profile.spec(), profile, f);
}

} // namespace kimura
