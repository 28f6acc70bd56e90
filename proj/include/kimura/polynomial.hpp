#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace kimura {

/// Dense real polynomial, coefficients stored in ascending-degree order.
///
/// The zero polynomial is represented by an empty coefficient vector. All
/// arithmetic is exact up to floating-point rounding of the coefficient
/// products; evaluation uses Horner's rule.
class Polynomial {
public:
    Polynomial() = default;
    Polynomial(std::initializer_list<double> coeffs) : c_(coeffs) { trim(); }
    explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) { trim(); }

    static Polynomial constant(double v) { return Polynomial({v}); }
    /// x^k
    static Polynomial monomial(std::size_t k, double scale = 1.0) {
        std::vector<double> c(k + 1, 0.0);
        c[k] = scale;
        return Polynomial(std::move(c));
    }

    std::span<const double> coeffs() const { return c_; }
    bool is_zero() const { return c_.empty(); }
    /// Degree of the zero polynomial is reported as 0.
    std::size_t degree() const { return c_.empty() ? 0 : c_.size() - 1; }
    double coeff(std::size_t k) const { return k < c_.size() ? c_[k] : 0.0; }

    double operator()(double x) const {
        double acc = 0.0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
        return acc;
    }

    Polynomial derivative() const {
        if (c_.size() <= 1) return {};
        std::vector<double> d(c_.size() - 1);
        for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
        return Polynomial(std::move(d));
    }

    /// p(1 - x), used to reflect an operator about x = 1/2.
    Polynomial reflected() const {
        // Horner in the variable (1 - x).
        const Polynomial one_minus_x({1.0, -1.0});
        Polynomial acc;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * one_minus_x + constant(*it);
        return acc;
    }

    /// Exact quotient by x(1-x). Throws unless p(0) and p(1) vanish (to `tol`).
    Polynomial divided_by_x_one_minus_x(double tol = 1e-12) const {
        const double scale = std::max(1.0, max_abs());
        if (std::abs((*this)(0.0)) > tol * scale || std::abs((*this)(1.0)) > tol * scale)
            throw std::invalid_argument("polynomial does not vanish at 0 and 1");
        if (c_.size() <= 2) return {};
        // Divide by x: drop the (vanishing) constant term.
        std::vector<double> q(c_.begin() + 1, c_.end());
        // Synthetic division of q by (1 - x) = -(x - 1).
        const std::size_t n = q.size();
        std::vector<double> r(n - 1, 0.0);
        double carry = 0.0;
        for (std::size_t k = n; k-- > 1;) {
            carry = q[k] + carry;
            r[k - 1] = carry;
        }
        for (double& v : r) v = -v;
        return Polynomial(std::move(r));
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : c_) m = std::max(m, std::abs(v));
        return m;
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        std::vector<double> c(std::max(a.c_.size(), b.c_.size()), 0.0);
        for (std::size_t k = 0; k < a.c_.size(); ++k) c[k] += a.c_[k];
        for (std::size_t k = 0; k < b.c_.size(); ++k) c[k] += b.c_[k];
        return Polynomial(std::move(c));
    }
    friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + b * -1.0; }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        if (a.is_zero() || b.is_zero()) return {};
        std::vector<double> c(a.c_.size() + b.c_.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.c_.size(); ++i)
            for (std::size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
        return Polynomial(std::move(c));
    }
    friend Polynomial operator*(const Polynomial& a, double s) {
        std::vector<double> c(a.c_);
        for (double& v : c) v *= s;
        return Polynomial(std::move(c));
    }
    friend Polynomial operator*(double s, const Polynomial& a) { return a * s; }

    Polynomial pow(unsigned k) const {
        Polynomial r = constant(1.0);
        for (unsigned i = 0; i < k; ++i) r = r * *this;
        return r;
    }

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

private:
    void trim() {
        while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
    }

    std::vector<double> c_;
};

} // namespace kimura
