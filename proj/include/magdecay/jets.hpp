#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace magdecay {

/// Truncated Taylor expansion of a function of 3 variables, total degree <= 4.
/// Coefficients are Taylor coefficients c_a = d^a f / a! evaluated at the
/// expansion point, so arithmetic on jets tracks all mixed partials exactly.
struct Jet4 {
    static constexpr int kOrder = 4;
    static constexpr int kTerms = 35;  // multi-indices |a| <= 4 in 3 vars

    std::array<double, kTerms> c{};

    static const std::array<std::array<int, 3>, kTerms>& exponents();
    static int index_of(int ax, int ay, int az);

    double value() const { return c[0]; }

    Jet4& operator+=(const Jet4& o) {
        for (int i = 0; i < kTerms; ++i) c[i] += o.c[i];
        return *this;
    }
    Jet4& operator-=(const Jet4& o) {
        for (int i = 0; i < kTerms; ++i) c[i] -= o.c[i];
        return *this;
    }
    Jet4& operator*=(double s) {
        for (int i = 0; i < kTerms; ++i) c[i] *= s;
        return *this;
    }

    friend Jet4 operator+(Jet4 a, const Jet4& b) { return a += b; }
    friend Jet4 operator-(Jet4 a, const Jet4& b) { return a -= b; }
    friend Jet4 operator*(Jet4 a, double s) { return a *= s; }
    friend Jet4 operator*(double s, Jet4 a) { return a *= s; }

    friend Jet4 operator*(const Jet4& a, const Jet4& b);

    /// Jet of the constant v.
    static Jet4 constant(double v) {
        Jet4 j;
        j.c[0] = v;
        return j;
    }
    /// Jet of the coordinate function x_axis expanded at value x0.
    static Jet4 coordinate(int axis, double x0);

    /// exp(f), exact through order 4.
    Jet4 exp() const;
    /// 1/f; requires f(0) != 0.
    Jet4 recip() const;

    /// Mixed partial derivative d^(ax,ay,az) f at the expansion point.
    double derivative(int ax, int ay, int az) const;
};

}  // namespace magdecay
