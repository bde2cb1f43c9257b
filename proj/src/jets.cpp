#include "magdecay/jets.hpp"

namespace magdecay {

namespace {

std::array<std::array<int, 3>, Jet4::kTerms> make_exponents() {
    std::array<std::array<int, 3>, Jet4::kTerms> e{};
    int k = 0;
    for (int total = 0; total <= Jet4::kOrder; ++total)
        for (int ax = total; ax >= 0; --ax)
            for (int ay = total - ax; ay >= 0; --ay)
                e[k++] = {ax, ay, total - ax - ay};
    return e;
}

// product table: prod_index[i][j] = index of exponent sum, or -1 if degree > 4
std::array<std::array<int16_t, Jet4::kTerms>, Jet4::kTerms> make_prod_table() {
    const auto& e = Jet4::exponents();
    std::array<std::array<int16_t, Jet4::kTerms>, Jet4::kTerms> t{};
    for (int i = 0; i < Jet4::kTerms; ++i)
        for (int j = 0; j < Jet4::kTerms; ++j) {
            int ax = e[i][0] + e[j][0], ay = e[i][1] + e[j][1], az = e[i][2] + e[j][2];
            t[i][j] = static_cast<int16_t>(
                (ax + ay + az <= Jet4::kOrder) ? Jet4::index_of(ax, ay, az) : -1);
        }
    return t;
}

double factorial(int n) {
    double r = 1;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

}  // namespace

const std::array<std::array<int, 3>, Jet4::kTerms>& Jet4::exponents() {
    static const auto e = make_exponents();
    return e;
}

int Jet4::index_of(int ax, int ay, int az) {
    const auto& e = exponents();
    for (int i = 0; i < kTerms; ++i)
        if (e[i][0] == ax && e[i][1] == ay && e[i][2] == az) return i;
    throw std::out_of_range("Jet4::index_of: degree > 4");
}

Jet4 operator*(const Jet4& a, const Jet4& b) {
    static const auto table = make_prod_table();
    Jet4 r;
    for (int i = 0; i < Jet4::kTerms; ++i) {
        if (a.c[i] == 0.0) continue;
        for (int j = 0; j < Jet4::kTerms; ++j) {
            int k = table[i][j];
            if (k >= 0) r.c[k] += a.c[i] * b.c[j];
        }
    }
    return r;
}

Jet4 Jet4::coordinate(int axis, double x0) {
    Jet4 j;
    j.c[0] = x0;
    int a[3] = {0, 0, 0};
    a[axis] = 1;
    j.c[index_of(a[0], a[1], a[2])] = 1.0;
    return j;
}

Jet4 Jet4::exp() const {
    // e^{c0} * sum_k g^k / k!  with g nilpotent (no constant term)
    Jet4 g = *this;
    g.c[0] = 0.0;
    Jet4 r = constant(1.0), p = constant(1.0);
    double inv_fact = 1.0;
    for (int k = 1; k <= kOrder; ++k) {
        p = p * g;
        inv_fact /= k;
        r += p * inv_fact;
    }
    return r * std::exp(c[0]);
}

Jet4 Jet4::recip() const {
    if (c[0] == 0.0) throw std::domain_error("Jet4::recip at zero");
    Jet4 g = *this;
    g.c[0] = 0.0;
    g *= (-1.0 / c[0]);
    Jet4 r = constant(1.0), p = constant(1.0);
    for (int k = 1; k <= kOrder; ++k) {
        p = p * g;
        r += p;
    }
    return r * (1.0 / c[0]);
}

double Jet4::derivative(int ax, int ay, int az) const {
    return c[index_of(ax, ay, az)] * factorial(ax) * factorial(ay) * factorial(az);
}

}  // namespace magdecay
