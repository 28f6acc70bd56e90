#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "kimura/errors.hpp"
#include "kimura/invariant_measure.hpp"
#include "kimura/operator_model.hpp"
#include "kimura/polynomial.hpp"
#include "kimura/quadrature.hpp"
#include "kimura/sde2d.hpp"

namespace kimura {

/// f(x) = A x^α (1-x)^β P(x), with P positive on (0,1).
struct LyapunovCandidate1D {
    double alpha = 0.0;
    double beta = 0.0;
    Polynomial factor = Polynomial::constant(1.0);
    double amplitude = 1.0;

    void validate(int grid = 257) const {
        if (!(amplitude > 0.0)) throw ValidationError("candidate amplitude must be positive");
        for (int i = 1; i < grid - 1; ++i) {
            const double x = static_cast<double>(i) / (grid - 1);
            if (!(factor(x) > 0.0)) throw ValidationError("candidate factor must be positive on (0,1)");
        }
    }

    double operator()(double x) const {
        return amplitude * std::pow(x, alpha) * std::pow(1.0 - x, beta) * factor(x);
    }

    /// The same function in the coordinate x' = 1 - x.
    LyapunovCandidate1D reflected() const { return {beta, alpha, factor.reflected(), amplitude}; }

    std::string describe() const {
        std::ostringstream os;
        os << amplitude << " * x^" << alpha << " * (1-x)^" << beta;
        if (factor.degree() > 0 || factor.coeff(0) != 1.0) {
            os << " * (";
            for (std::size_t k = 0; k <= factor.degree(); ++k) os << (k ? " + " : "") << factor.coeff(k) << "x^" << k;
            os << ")";
        }
        return os.str();
    }
};

/// (L f)/f at interior x from the closed-form logarithmic derivatives of f.
inline double apply_L_over_f(const OperatorSpec1D& spec, const LyapunovCandidate1D& cand, double x) {
    const double p = cand.factor(x);
    const double dp = cand.factor.derivative()(x);
    const double d2p = cand.factor.derivative().derivative()(x);
    const double g = cand.alpha / x - cand.beta / (1.0 - x) + dp / p;
    const double dg = -cand.alpha / (x * x) - cand.beta / ((1.0 - x) * (1.0 - x)) + (d2p * p - dp * dp) / (p * p);
    const double at = spec.a(x) * std::pow(x, spec.m0) * std::pow(1.0 - x, spec.m1);
    const double bt = spec.b(x) * std::pow(x, spec.m0 - 1) * std::pow(1.0 - x, spec.m1 - 1);
    return at * (g * g + dg) + bt * g;
}

/// lim (L f)/f at `end`; ±∞ when the leading 1/x term survives.
inline double endpoint_limit(const OperatorSpec1D& spec, const LyapunovCandidate1D& cand, End end) {
    if (end == End::Right) return endpoint_limit(spec.reflected(), cand.reflected(), End::Left);
    // Near 0 write f = x^α g and L = x^m0 A ∂² + x^(m0-1) B ∂ with
    // A = a (1-x)^m1, B = b (1-x)^(m1-1).
    const double al = cand.alpha;
    const Polynomial one_minus_x({1.0, -1.0});
    const Polynomial A = spec.a * one_minus_x.pow(static_cast<unsigned>(spec.m1));
    const Polynomial B = spec.b * one_minus_x.pow(static_cast<unsigned>(spec.m1 - 1));
    if (spec.m0 == 2) return al * (al - 1.0) * A(0.0) + al * B(0.0);
    const double lead = al * (al - 1.0) * A(0.0) + al * B(0.0);
    if (lead > 0.0) return std::numeric_limits<double>::infinity();
    if (lead < 0.0) return -std::numeric_limits<double>::infinity();
    // g'/g at 0 for g = (1-x)^β P.
    const double G0 = -cand.beta + cand.factor.derivative()(0.0) / cand.factor(0.0);
    return al * (al - 1.0) * A.derivative()(0.0) + al * B.derivative()(0.0) + (2.0 * al * A(0.0) + B(0.0)) * G0;
}

enum class CertificateStatus { Certified, PositiveSupremum };

inline constexpr std::string_view to_string(CertificateStatus s) {
    return s == CertificateStatus::Certified ? "certified" : "positive_supremum";
}

struct Lambda0Certificate {
    double lambda0_bound = 0.0;
    std::vector<double> grid;
    std::vector<double> values; ///< (L f)/f on the grid
    double worst_point = 0.0;   ///< argmax over grid and endpoints
    std::pair<double, double> endpoint_limits{0.0, 0.0};
    CertificateStatus status = CertificateStatus::PositiveSupremum;
};

/// n Chebyshev-Gauss points mapped to (0,1); they cluster at both ends.
inline std::vector<double> chebyshev_grid(int n) {
    if (n < 2) throw ValidationError("grid needs at least 2 points");
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) x[k] = 0.5 * (1.0 - std::cos(std::numbers::pi * (k + 0.5) / n));
    return x;
}

inline constexpr int kDefaultLyapunovGrid = 2048;

/// λ0 ≤ max(sup over a Chebyshev grid of (L f)/f, endpoint limits).
inline Lambda0Certificate certify_lambda0(const OperatorSpec1D& spec, const LyapunovCandidate1D& cand,
                                          int grid_size = kDefaultLyapunovGrid) {
    spec.validate();
    cand.validate();
    Lambda0Certificate cert;
    cert.grid = chebyshev_grid(grid_size);
    cert.values.resize(cert.grid.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cert.grid.size(); ++i) {
        cert.values[i] = apply_L_over_f(spec, cand, cert.grid[i]);
        if (cert.values[i] > best) {
            best = cert.values[i];
            cert.worst_point = cert.grid[i];
        }
    }
    cert.endpoint_limits = {endpoint_limit(spec, cand, End::Left), endpoint_limit(spec, cand, End::Right)};
    if (cert.endpoint_limits.first > best) {
        best = cert.endpoint_limits.first;
        cert.worst_point = 0.0;
    }
    if (cert.endpoint_limits.second > best) {
        best = cert.endpoint_limits.second;
        cert.worst_point = 1.0;
    }
    cert.lambda0_bound = best;
    cert.status = best < 0.0 ? CertificateStatus::Certified : CertificateStatus::PositiveSupremum;
    return cert;
}

/// Golden-section minimization of a unimodal function on [lo, hi].
template <class F>
std::pair<double, double> golden_section_minimize(F&& f, double lo, double hi, double tol = 1e-10) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    return {x, f(x)};
}

struct ExponentSearchResult {
    double exponent = 0.0;
    Lambda0Certificate certificate;
};

/// Minimizes the certified bound over a one-parameter family c -> family(c).
inline ExponentSearchResult optimize_exponent(const OperatorSpec1D& spec,
                                              const std::function<LyapunovCandidate1D(double)>& family, double lo,
                                              double hi, int grid_size = kDefaultLyapunovGrid) {
    auto bound = [&](double c) { return certify_lambda0(spec, family(c), grid_size).lambda0_bound; };
    const double c = golden_section_minimize(bound, lo, hi, 1e-9).first;
    return {c, certify_lambda0(spec, family(c), grid_size)};
}

/// Exponent recommended for a boundary piece u ~ dist^c at one endpoint.
struct BoundaryRecipe {
    End end = End::Left;
    EndpointKind kind = EndpointKind::KimuraTransverse;
    std::optional<double> exponent; ///< empty when no recipe exists
    std::string rationale;
};

/// Quadratic ends: with r = inward drift / a at the end, u = dist^c gives
/// Lu/u -> a c (c - 1 + r), minimized at c = (1 - r)/2 (negative for a
/// transverse end, capped at 1/2 for a tangent end so that c stays in (0,1)).
/// Kimura tangent: c = 1/2. Kimura transverse: exponent 0 (u tends to a
/// positive constant). Neutral quadratic: declined.
inline BoundaryRecipe construct_boundary_candidate(const OperatorSpec1D& spec, End end) {
    const auto cls = classify_endpoint(spec, end);
    BoundaryRecipe r{end, cls.kind, std::nullopt, {}};
    const double x = end == End::Left ? 0.0 : 1.0;
    const double inward = (end == End::Left ? spec.b(x) : -spec.b(x)) / spec.a(x);
    switch (cls.kind) {
    case EndpointKind::QuadraticTangent:
        r.exponent = std::min(0.5, 0.5 * (1.0 - inward));
        r.rationale = "quadratic tangent: c = min(1/2, (1 - r)/2)";
        break;
    case EndpointKind::QuadraticTransverse:
        r.exponent = 0.5 * (1.0 - inward);
        r.rationale = "quadratic transverse: c = (1 - r)/2 < 0";
        break;
    case EndpointKind::KimuraTangent:
        r.exponent = 0.5;
        r.rationale = "Kimura tangent: midpoint of (0,1)";
        break;
    case EndpointKind::KimuraTransverse:
        r.exponent = 0.0;
        r.rationale = "Kimura transverse: exponent 0";
        break;
    case EndpointKind::QuadraticNeutral:
        r.rationale = "neutral quadratic endpoint: no recipe";
        break;
    case EndpointKind::Inadmissible:
        throw ValidationError("inadmissible endpoint");
    }
    return r;
}

/// Interior solution of (e^B u_x)' = -f on [x1, x2], where B' = b̃/ã and f > 0,
/// so that L u = -ã e^{-B} f < 0 there.
///
/// f = ℓ(x) exp(k sin²(π s)), s = (x - x1)/(x2 - x1), with ℓ linear between
/// the prescribed end values; k is chosen so that ∫f equals the flux drop
/// e^{B(x1)} u_x(x1) - e^{B(x2)} u_x(x2).
class InteriorPatch {
public:
    InteriorPatch(const OperatorSpec1D& spec, double x1, double x2, double u_left, double slope_left,
                  double slope_right, double f_left, double f_right, int nodes = 801)
        : spec_(spec), split_(spec), x1_(x1), x2_(x2), f1_(f_left), f2_(f_right) {
        if (!(0.0 < x1 && x1 < x2 && x2 < 1.0)) throw ValidationError("patch interval must satisfy 0 < x1 < x2 < 1");
        if (!(f_left > 0.0) || !(f_right > 0.0)) throw ValidationError("patch source values must be positive");
        flux_left_ = std::exp(B(x1)) * slope_left;
        mass_ = flux_left_ - std::exp(B(x2)) * slope_right;
        if (!(mass_ > 0.0))
            throw NumericalError("infeasible slopes: e^B u_x must strictly decrease across the patch");
        solve_k();
        // u_x and u on a uniform grid; u by cumulative Gauss-Legendre of u_x.
        xs_.resize(static_cast<std::size_t>(nodes));
        ux_.resize(xs_.size());
        u_.resize(xs_.size());
        for (std::size_t i = 0; i < xs_.size(); ++i) xs_[i] = x1 + (x2 - x1) * static_cast<double>(i) / (nodes - 1);
        double F = 0.0;
        for (std::size_t i = 0; i < xs_.size(); ++i) {
            if (i > 0) F += quad::gauss20([&](double t) { return f(t); }, xs_[i - 1], xs_[i]);
            ux_[i] = std::exp(-B(xs_[i])) * (flux_left_ - F);
        }
        u_[0] = u_left;
        for (std::size_t i = 1; i < xs_.size(); ++i)
            u_[i] = u_[i - 1] + quad::gauss20([&](double t) { return ux(t); }, xs_[i - 1], xs_[i]);
    }

    double x1() const { return x1_; }
    double x2() const { return x2_; }
    double mass() const { return mass_; }
    double k() const { return k_; }

    double f(double x) const {
        const double s = (x - x1_) / (x2_ - x1_);
        const double l = f1_ + (f2_ - f1_) * s;
        const double sn = std::sin(std::numbers::pi * s);
        return l * std::exp(k_ * sn * sn);
    }

    /// u_x = e^{-B} (e^{B(x1)} u_x(x1) - ∫_{x1}^x f).
    double ux(double x) const {
        const std::size_t i = cell(x);
        const double F_node = flux_left_ - std::exp(B(xs_[i])) * ux_[i];
        const double F = F_node + quad::gauss20([&](double t) { return f(t); }, xs_[i], x);
        return std::exp(-B(x)) * (flux_left_ - F);
    }

    double u(double x) const {
        const std::size_t i = cell(x);
        return u_[i] + quad::gauss20([&](double t) { return ux(t); }, xs_[i], x);
    }

    /// Exact L u on the patch.
    double Lu(double x) const { return -spec_.a_full()(x) * std::exp(-B(x)) * f(x); }

    double u_right() const { return u_.back(); }
    /// Adds a constant to u; u_x and L u are unchanged.
    void shift(double delta) {
        for (double& v : u_) v += delta;
    }
    double slope_right() const { return ux_.back(); }

private:
    double B(double x) const { return split_.drift_integral(x); }

    std::size_t cell(double x) const {
        const double s = (x - x1_) / (x2_ - x1_) * static_cast<double>(xs_.size() - 1);
        return std::min(xs_.size() - 2, static_cast<std::size_t>(std::max(0.0, s)));
    }

    double mass_for(double k) const {
        const double saved = k_;
        k_ = k;
        const double m = quad::adaptive([&](double t) { return f(t); }, x1_, x2_, 1e-12);
        k_ = saved;
        return m;
    }

    void solve_k() {
        double lo = -1.0, hi = 1.0;
        while (mass_for(lo) > mass_) lo *= 2.0;
        while (mass_for(hi) < mass_) {
            hi *= 2.0;
            if (hi > 700.0) throw NumericalError("interior patch cannot carry the required mass");
        }
        boost::uintmax_t iters = 200;
        auto [a, b] = boost::math::tools::toms748_solve([&](double k) { return mass_for(k) - mass_; }, lo, hi,
                                                        boost::math::tools::eps_tolerance<double>(50), iters);
        k_ = 0.5 * (a + b);
    }

    OperatorSpec1D spec_;
    DriftSplit split_;
    double x1_, x2_, f1_, f2_;
    double flux_left_ = 0.0;
    double mass_ = 0.0;
    mutable double k_ = 0.0;
    std::vector<double> xs_, ux_, u_;
};

/// Boundary piece u = K + A d^c in the distance d to its endpoint.
struct BoundaryPiece {
    End end = End::Left;
    double K = 0.0;
    double A = 1.0;
    double c = 0.5;

    double dist(double x) const { return end == End::Left ? x : 1.0 - x; }
    double u(double x) const { return K + A * std::pow(dist(x), c); }
    double ux(double x) const {
        const double d = A * c * std::pow(dist(x), c - 1.0);
        return end == End::Left ? d : -d;
    }
    /// L u = A L(d^c), from the candidate formula with f = d^c.
    double Lu(const OperatorSpec1D& spec, double x) const {
        const LyapunovCandidate1D f = end == End::Left ? LyapunovCandidate1D{c, 0.0} : LyapunovCandidate1D{0.0, c};
        return A * std::pow(dist(x), c) * apply_L_over_f(spec, f, x);
    }
};

enum class PatchTopology { OneTangent, TwoTangent };

inline constexpr std::string_view to_string(PatchTopology t) {
    return t == PatchTopology::OneTangent ? "one_tangent_one_transverse" : "two_tangent";
}

/// Global Lyapunov function assembled from two boundary pieces and an
/// interior patch; C¹ at the junctions, with L u continuous.
class PatchedLyapunov1D {
public:
    PatchedLyapunov1D(const OperatorSpec1D& spec, PatchTopology topology, BoundaryPiece left, BoundaryPiece right,
                      InteriorPatch patch)
        : spec_(spec), topology_(topology), left_(left), right_(right), patch_(std::move(patch)) {}

    PatchTopology topology() const { return topology_; }
    const BoundaryPiece& left() const { return left_; }
    const BoundaryPiece& right() const { return right_; }
    const InteriorPatch& patch() const { return patch_; }

    double u(double x) const {
        if (x <= patch_.x1()) return left_.u(x);
        if (x >= patch_.x2()) return right_.u(x);
        return patch_.u(x);
    }
    double ux(double x) const {
        if (x <= patch_.x1()) return left_.ux(x);
        if (x >= patch_.x2()) return right_.ux(x);
        return patch_.ux(x);
    }
    double Lu(double x) const {
        if (x <= patch_.x1()) return left_.Lu(spec_, x);
        if (x >= patch_.x2()) return right_.Lu(spec_, x);
        return patch_.Lu(x);
    }

    /// L u at x by central differences of u_x: ã (u_x(x+h) - u_x(x-h))/2h + b̃ u_x.
    double Lu_finite_difference(double x, double h = 1e-6) const {
        const double d2 = (ux(x + h) - ux(x - h)) / (2.0 * h);
        return spec_.a_full()(x) * d2 + spec_.b_full()(x) * ux(x);
    }

    /// sup (L u)/u over a Chebyshev grid, with the boundary pieces' limits.
    Lambda0Certificate certify(int grid_size = kDefaultLyapunovGrid) const {
        Lambda0Certificate cert;
        cert.grid = chebyshev_grid(grid_size);
        cert.values.resize(cert.grid.size());
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < cert.grid.size(); ++i) {
            cert.values[i] = Lu(cert.grid[i]) / u(cert.grid[i]);
            if (cert.values[i] > best) {
                best = cert.values[i];
                cert.worst_point = cert.grid[i];
            }
        }
        cert.endpoint_limits = {piece_limit(left_), piece_limit(right_)};
        if (cert.endpoint_limits.first > best) {
            best = cert.endpoint_limits.first;
            cert.worst_point = 0.0;
        }
        if (cert.endpoint_limits.second > best) {
            best = cert.endpoint_limits.second;
            cert.worst_point = 1.0;
        }
        cert.lambda0_bound = best;
        cert.status = best < 0.0 ? CertificateStatus::Certified : CertificateStatus::PositiveSupremum;
        return cert;
    }

private:
    double piece_limit(const BoundaryPiece& p) const {
        const LyapunovCandidate1D f = p.end == End::Left ? LyapunovCandidate1D{p.c, 0.0} : LyapunovCandidate1D{0.0, p.c};
        if (p.K == 0.0 || p.c < 0.0) return endpoint_limit(spec_, f, p.end);
        // u -> K: (A d^c L(d^c)/d^c)/K, where d^c (L d^c)/d^c -> d^{c-1} times
        // the 1/d coefficient, which survives only for c = 1.
        const OperatorSpec1D s = p.end == End::Left ? spec_ : spec_.reflected();
        if (p.c == 1.0 && s.m0 == 1) return p.A * s.b(0.0) / p.K;
        return 0.0;
    }

    OperatorSpec1D spec_;
    PatchTopology topology_;
    BoundaryPiece left_, right_;
    InteriorPatch patch_;
};

namespace detail {

/// Boundary piece for an endpoint from its recipe; tangent pieces vanish at
/// the end, transverse pieces tend to the additive constant.
inline BoundaryPiece piece_for(const BoundaryRecipe& r) {
    BoundaryPiece p;
    p.end = r.end;
    if (!r.exponent) throw ValidationError("endpoint has no Lyapunov recipe (" + r.rationale + ")");
    if (r.kind == EndpointKind::KimuraTransverse) {
        // u = K - d: decreasing away from the end, L u = ∓b̃ < 0 near it.
        p.c = 1.0;
        p.A = -1.0;
    } else {
        p.c = *r.exponent;
        p.A = 1.0;
    }
    return p;
}

/// Largest junction distance δ ≤ 0.1 such that the piece has L u < 0 on (0, δ].
inline double junction_distance(const OperatorSpec1D& spec, const BoundaryPiece& p) {
    double delta = 0.1;
    for (int attempt = 0; attempt < 40; ++attempt, delta *= 0.5) {
        bool ok = true;
        for (int i = 1; i <= 200 && ok; ++i) {
            const double d = delta * i / 200.0;
            const double x = p.end == End::Left ? d : 1.0 - d;
            ok = p.Lu(spec, x) < 0.0;
        }
        if (ok) return delta;
    }
    throw NumericalError("no neighbourhood of the endpoint where the boundary piece is a supersolution");
}

inline double source_value(const OperatorSpec1D& spec, const BoundaryPiece& p, double x) {
    return -p.Lu(spec, x) * std::exp(DriftSplit(spec).drift_integral(x)) / spec.a_full()(x);
}

} // namespace detail

/// Assembles a global Lyapunov function for an operator with at least one
/// tangent endpoint: "one tangent, one transverse" (u decreasing toward the
/// tangent end, constant fixed by value continuity) or "two tangent" (u
/// rises then falls, right amplitude fixed by value continuity).
inline PatchedLyapunov1D assemble_global_lyapunov(const OperatorSpec1D& spec) {
    spec.validate();
    const auto lr = construct_boundary_candidate(spec, End::Left);
    const auto rr = construct_boundary_candidate(spec, End::Right);
    if (!lr.exponent || !rr.exponent) throw ValidationError("neutral quadratic endpoint: no Lyapunov recipe");
    const bool lt = !is_transverse(lr.kind), rt = !is_transverse(rr.kind);
    if (!lt && !rt) throw ValidationError("both endpoints transverse: no tangent endpoint to converge to");

    BoundaryPiece left = detail::piece_for(lr), right = detail::piece_for(rr);
    const double x1 = detail::junction_distance(spec, left);
    const double x2 = 1.0 - detail::junction_distance(spec, right);
    const DriftSplit split(spec);
    const double e1 = std::exp(split.drift_integral(x1)), e2 = std::exp(split.drift_integral(x2));
    auto make_patch = [&](const BoundaryPiece& l, const BoundaryPiece& r, int nodes = 801) {
        return InteriorPatch(spec, x1, x2, l.u(x1), l.ux(x1), r.ux(x2), detail::source_value(spec, l, x1),
                             detail::source_value(spec, r, x2), nodes);
    };

    if (lt != rt) {
        // u is monotone toward the tangent end. The tangent amplitude is
        // scaled until the flux e^B u_x drops across the patch by a factor
        // 2 margin; the transverse constant then matches the values.
        if (rt) {
            right.A = 2.0 * e1 * std::abs(left.ux(x1)) / (e2 * std::abs(right.ux(x2)));
        } else {
            left.A = 2.0 * e2 * std::abs(right.ux(x2)) / (e1 * std::abs(left.ux(x1)));
        }
        InteriorPatch patch = make_patch(left, right);
        if (rt) {
            left.K = right.u(x2) - patch.u_right();
            patch.shift(left.K);
        } else {
            right.K = patch.u_right() - right.A * std::pow(1.0 - x2, right.c);
        }
        return PatchedLyapunov1D(spec, PatchTopology::OneTangent, left, right, std::move(patch));
    }

    // Two tangent ends: bisection on the right amplitude for u continuity.
    auto mismatch = [&](double amp) {
        BoundaryPiece r = right;
        r.A = amp;
        return make_patch(left, r).u_right() - r.u(x2);
    };
    double lo = 1e-6, hi = 1.0;
    while (mismatch(hi) > 0.0) {
        hi *= 2.0;
        if (hi > 1e12) throw NumericalError("two-tangent patch: no amplitude matches the values");
    }
    boost::uintmax_t iters = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(mismatch, lo, hi, boost::math::tools::eps_tolerance<double>(45),
                                                          iters);
    right.A = 0.5 * (a + b);
    InteriorPatch patch = make_patch(left, right);
    return PatchedLyapunov1D(spec, PatchTopology::TwoTangent, left, right, std::move(patch));
}

/// Identity check for V = 1 - x - y on the triangle:
///     L V = -((1-x) γ13 + (1-y) γ23) V.
struct TriangleLyapunovCertificate {
    double max_identity_error = 0.0;
    TriangleState worst_point;
    double uniform_bound = 0.0; ///< -min(γ13, γ23)
    std::pair<double, double> rate_window{0.0, 0.0};
    std::size_t points_checked = 0;
};

/// Checks the identity on the grid {(i/n, j/n) : i + j ≤ n}.
inline TriangleLyapunovCertificate lyapunov_check_2d(const TriangleSpec& tri, int n = 100) {
    tri.validate();
    if (n < 1) throw ValidationError("grid must have at least one cell");
    TriangleLyapunovCertificate cert;
    const Vec2 grad{-1.0, -1.0};
    const std::array<Vec2, 2> hess{Vec2{0.0, 0.0}, Vec2{0.0, 0.0}};
    const double scale = tri.gamma12 + tri.gamma13 + tri.gamma23;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; i + j <= n; ++j) {
            const TriangleState s{static_cast<double>(i) / n, static_cast<double>(j) / n};
            const double V = 1.0 - s.x - s.y;
            const double lv = apply_triangle_generator(s, tri, grad, hess);
            const double expected = -((1.0 - s.x) * tri.gamma13 + (1.0 - s.y) * tri.gamma23) * V;
            const double err = std::abs(lv - expected);
            if (err > cert.max_identity_error) {
                cert.max_identity_error = err;
                cert.worst_point = s;
            }
            ++cert.points_checked;
        }
    if (cert.max_identity_error > 1e-12 * scale)
        throw NumericalError("triangle generator violates L V = -((1-x)g13 + (1-y)g23) V by " +
                             std::to_string(cert.max_identity_error));
    cert.uniform_bound = -std::min(tri.gamma13, tri.gamma23);
    cert.rate_window = {std::min(tri.gamma13, tri.gamma23), tri.gamma13 + tri.gamma23};
    return cert;
}

} // namespace kimura
