#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kimura/errors.hpp"
#include "kimura/polynomial.hpp"

namespace kimura {

enum class End { Left, Right };

/// One-dimensional generator on [0,1]
///
///     L = a(x) x^m0 (1-x)^m1 d²/dx² + b(x) x^(m0-1) (1-x)^(m1-1) d/dx
///
/// with polynomial a > 0 and degeneracy orders m0, m1 in {1, 2}
/// (1 = Kimura, 2 = quadratic).
struct OperatorSpec1D {
    Polynomial a;
    Polynomial b;
    int m0 = 1;
    int m1 = 1;

    /// Checks m0, m1 and positivity of a on a uniform grid including both
    /// endpoints. Throws ValidationError.
    void validate(int grid = 257) const {
        if ((m0 != 1 && m0 != 2) || (m1 != 1 && m1 != 2))
            throw ValidationError("degeneracy orders m0, m1 must be 1 or 2");
        if (a.is_zero()) throw ValidationError("coefficient a must be positive on [0,1]");
        for (int i = 0; i < grid; ++i) {
            const double x = static_cast<double>(i) / (grid - 1);
            if (!(a(x) > 0.0))
                throw ValidationError("coefficient a must be positive on [0,1] (fails at x=" +
                                      std::to_string(x) + ")");
        }
    }

    int order(End e) const { return e == End::Left ? m0 : m1; }

    /// ã(x) = a(x) x^m0 (1-x)^m1
    Polynomial a_full() const {
        return a * Polynomial::monomial(static_cast<std::size_t>(m0)) *
               Polynomial({1.0, -1.0}).pow(static_cast<unsigned>(m1));
    }
    /// b̃(x) = b(x) x^(m0-1) (1-x)^(m1-1)
    Polynomial b_full() const {
        return b * Polynomial::monomial(static_cast<std::size_t>(m0 - 1)) *
               Polynomial({1.0, -1.0}).pow(static_cast<unsigned>(m1 - 1));
    }

    /// The same operator in the coordinate x' = 1 - x.
    OperatorSpec1D reflected() const { return {a.reflected(), b.reflected() * -1.0, m1, m0}; }
};

struct FullCoefficients {
    Polynomial a_tilde;
    Polynomial b_tilde;
};

inline FullCoefficients coefficients_full(const OperatorSpec1D& spec) {
    return {spec.a_full(), spec.b_full()};
}

/// Callable form of a generator, for operators outside the polynomial family.
/// Endpoint classification is only defined for OperatorSpec1D.
struct GeneratorFunctions {
    std::function<double(double)> a_tilde;
    std::function<double(double)> b_tilde;

    /// (L f)(x) given f'(x), f''(x).
    double apply(double x, double df, double d2f) const { return a_tilde(x) * d2f + b_tilde(x) * df; }
};

inline GeneratorFunctions as_functions(const OperatorSpec1D& spec) {
    auto [at, bt] = coefficients_full(spec);
    return {[at](double x) { return at(x); }, [bt](double x) { return bt(x); }};
}

enum class EndpointKind {
    KimuraTangent,
    KimuraTransverse,
    QuadraticTangent,
    QuadraticTransverse,
    QuadraticNeutral,
    Inadmissible,
};

struct EndpointClass {
    EndpointKind kind;
    End which_end;

    friend bool operator==(const EndpointClass&, const EndpointClass&) = default;
};

inline constexpr std::string_view to_string(EndpointKind k) {
    switch (k) {
    case EndpointKind::KimuraTangent: return "KimuraTangent";
    case EndpointKind::KimuraTransverse: return "KimuraTransverse";
    case EndpointKind::QuadraticTangent: return "QuadraticTangent";
    case EndpointKind::QuadraticTransverse: return "QuadraticTransverse";
    case EndpointKind::QuadraticNeutral: return "QuadraticNeutral";
    case EndpointKind::Inadmissible: return "Inadmissible";
    }
    return "?";
}

inline constexpr bool is_transverse(EndpointKind k) {
    return k == EndpointKind::KimuraTransverse || k == EndpointKind::QuadraticTransverse;
}
inline constexpr bool is_quadratic(EndpointKind k) {
    return k == EndpointKind::QuadraticTangent || k == EndpointKind::QuadraticTransverse ||
           k == EndpointKind::QuadraticNeutral;
}
/// Dirac mass at the endpoint is invariant.
inline constexpr bool is_sticky(EndpointKind k) {
    return is_quadratic(k) || k == EndpointKind::KimuraTangent;
}

/// Endpoint type from (m, a(end), b(end)). The comparisons are exact on the
/// polynomial values: at the left end b(0) is the constant coefficient.
inline EndpointClass classify_endpoint(const OperatorSpec1D& spec, End end) {
    const double x = end == End::Left ? 0.0 : 1.0;
    const double a_end = spec.a(x);
    const double b_end = spec.b(x);
    if (!(a_end > 0.0)) throw ValidationError("a must be positive at the endpoint");
    // Orient so that "inward" is b > 0 at the left and b < 0 at the right.
    const double inward = end == End::Left ? b_end : -b_end;
    EndpointKind kind;
    if (spec.order(end) == 1) {
        if (inward == 0.0)
            kind = EndpointKind::KimuraTangent;
        else if (inward > 0.0)
            kind = EndpointKind::KimuraTransverse;
        else
            kind = EndpointKind::Inadmissible;
    } else {
        // Ratio test b/a against ±1 without dividing.
        if (inward < a_end)
            kind = EndpointKind::QuadraticTangent;
        else if (inward > a_end)
            kind = EndpointKind::QuadraticTransverse;
        else
            kind = EndpointKind::QuadraticNeutral;
    }
    return {kind, end};
}

enum class MeasureKind { DiracLeft, DiracRight, AbsolutelyContinuous };

inline constexpr std::string_view to_string(MeasureKind k) {
    switch (k) {
    case MeasureKind::DiracLeft: return "delta0";
    case MeasureKind::DiracRight: return "delta1";
    case MeasureKind::AbsolutelyContinuous: return "mu";
    }
    return "?";
}

/// One invariant measure. The density (unnormalized) and its normalizer Z
/// are filled only for the absolutely continuous measure, and only once
/// resolved by the invariant_measure module.
struct InvariantMeasureSpec {
    MeasureKind kind;
    std::function<double(double)> density;
    std::optional<double> Z;
};

/// Kinds of invariant measures implied by the terminal-boundary rule: a Dirac
/// at every sticky endpoint, plus a fully supported measure when both ends
/// are transverse. Neutral quadratic ends count as sticky and block μ.
inline std::vector<MeasureKind> terminal_boundary_measures(EndpointKind left, EndpointKind right) {
    if (left == EndpointKind::Inadmissible || right == EndpointKind::Inadmissible)
        throw ValidationError("inadmissible endpoint: Kimura drift points outward");
    std::vector<MeasureKind> out;
    if (is_transverse(left) && is_transverse(right)) out.push_back(MeasureKind::AbsolutelyContinuous);
    if (is_sticky(left)) out.push_back(MeasureKind::DiracLeft);
    if (is_sticky(right)) out.push_back(MeasureKind::DiracRight);
    return out;
}

/// Invariant measures of `spec`, density fields left empty.
inline std::vector<InvariantMeasureSpec> invariant_measure_set(const OperatorSpec1D& spec) {
    spec.validate();
    const auto left = classify_endpoint(spec, End::Left).kind;
    const auto right = classify_endpoint(spec, End::Right).kind;
    std::vector<InvariantMeasureSpec> out;
    for (MeasureKind k : terminal_boundary_measures(left, right)) out.push_back({k, {}, std::nullopt});
    return out;
}

/// Rates of the triangle generator; γ12 couples the two coordinates along
/// the diagonal direction, γ13 and γ23 drive the x and y Kimura edges.
struct TriangleSpec {
    double gamma12 = 1.0;
    double gamma13 = 1.0;
    double gamma23 = 1.0;

    void validate() const {
        if (!(gamma12 > 0.0) || !(gamma13 > 0.0) || !(gamma23 > 0.0))
            throw ValidationError("triangle rates gamma12, gamma13, gamma23 must be positive");
    }
};

} // namespace kimura
