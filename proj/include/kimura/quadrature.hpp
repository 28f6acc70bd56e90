#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "kimura/errors.hpp"

namespace kimura::quad {

inline constexpr double kDefaultRelTol = 1e-10;

namespace detail {

struct Segment {
    double value;
    double error;
    double l1;
};

/// One 61-point Kronrod panel with its error estimate mapped to [lo, hi].
template <class F>
Segment kronrod_panel(F& f, double lo, double hi) {
    double err = 0.0;
    double l1 = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 0, 0.0, &err, &l1);
    // The single-panel estimate is reported in reference-interval units.
    return {v, err * std::abs(hi - lo) / 2.0, l1};
}

template <class F>
Segment bisect(F& f, double lo, double hi, const Segment& whole, double abs_tol, unsigned depth) {
    if (depth == 0 || whole.error <= abs_tol) return whole;
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) return whole;
    const Segment left = bisect(f, lo, mid, kronrod_panel(f, lo, mid), abs_tol / 2, depth - 1);
    const Segment right = bisect(f, mid, hi, kronrod_panel(f, mid, hi), abs_tol / 2, depth - 1);
    return {left.value + right.value, left.error + right.error, left.l1 + right.l1};
}

} // namespace detail

/// Adaptive Gauss-Kronrod (61 points) on [lo, hi] by recursive bisection.
/// Throws NumericalError when the result is not finite or the error estimate
/// exceeds both 100·rel_tol and 1e-7 relative to ∫|f|.
template <class F>
double adaptive(F&& f, double lo, double hi, double rel_tol = kDefaultRelTol, unsigned max_depth = 18) {
    if (lo == hi) return 0.0;
    const detail::Segment first = detail::kronrod_panel(f, lo, hi);
    const double abs_tol = rel_tol * std::max(first.l1, std::abs(first.value));
    const detail::Segment r = detail::bisect(f, lo, hi, first, abs_tol, max_depth);
    if (!std::isfinite(r.value) || !std::isfinite(r.error))
        throw NumericalError("quadrature produced a non-finite value on [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "]");
    if (r.error > std::max(100.0 * rel_tol, 1e-7) * r.l1 + 1e-15 * std::abs(hi - lo))
        throw NumericalError("quadrature did not converge on [" + std::to_string(lo) + ", " + std::to_string(hi) +
                             "], error estimate " + std::to_string(r.error));
    return r.value;
}

/// Fixed 20-point Gauss-Legendre rule; for short cells with smooth integrands.
template <class F>
double gauss20(F&& f, double lo, double hi) {
    return boost::math::quadrature::gauss<double, 20>::integrate(f, lo, hi);
}

/// Double-exponential rule on [lo, hi]; tolerates algebraic endpoint
/// singularities and non-smooth endpoint behaviour.
template <class F>
double endpoint_adaptive(F&& f, double lo, double hi, double rel_tol = kDefaultRelTol) {
    thread_local boost::math::quadrature::tanh_sinh<double> rule(15);
    double err = 0.0;
    double l1 = 0.0;
    auto fn = [&f](double x) -> double { return f(x); };
    const double v = rule.integrate(fn, lo, hi, rel_tol, &err, &l1);
    if (!std::isfinite(v))
        throw NumericalError("quadrature produced a non-finite value on [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "]");
    if (err > std::max(100.0 * rel_tol, 1e-7) * l1 + 1e-15 * std::abs(hi - lo))
        throw NumericalError("quadrature did not converge on [" + std::to_string(lo) + ", " + std::to_string(hi) +
                             "], error estimate " + std::to_string(err));
    return v;
}

/// ∫₀^{1/2} z^e g(z) dz for smooth g and e > -1. A negative exponent is
/// absorbed with z = t^{1/(1+e)} so the integrand stays bounded.
template <class G>
double half_weighted(G&& g, double e, double rel_tol = kDefaultRelTol) {
    if (!(e > -1.0)) throw NumericalError("endpoint exponent <= -1: integral diverges");
    if (e >= 0.0) return endpoint_adaptive([&](double z) { return std::pow(z, e) * g(z); }, 0.0, 0.5, rel_tol);
    const double p = 1.0 / (1.0 + e);
    return endpoint_adaptive([&](double t) { return p * g(std::pow(t, p)); }, 0.0, std::pow(0.5, 1.0 + e), rel_tol);
}

/// ∫₀¹ x^e0 (1-x)^e1 g(x) dx for smooth g and e0, e1 > -1, split at 1/2.
template <class G>
double weighted(G&& g, double e0, double e1, double rel_tol = kDefaultRelTol) {
    const double left = half_weighted([&](double x) { return std::pow(1.0 - x, e1) * g(x); }, e0, rel_tol);
    const double right = half_weighted([&](double z) { return std::pow(1.0 - z, e0) * g(1.0 - z); }, e1, rel_tol);
    return left + right;
}

} // namespace kimura::quad
