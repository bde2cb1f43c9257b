#include "magdecay/free_resolvent.hpp"

#include <cmath>

#include "magdecay/fft3.hpp"

namespace magdecay {

namespace {
constexpr double kFourPi = 4.0 * M_PI;
const cplx kI{0.0, 1.0};
}  // namespace

std::array<cplx, 3> resolvent_kernel(ResolventKernelKind kind, cplx lambda,
                                     const Vec3& x, const Vec3& y) {
    Vec3 d = x - y;
    double s = d.norm();
    if (s == 0.0) throw SingularityError("resolvent kernel at x = y");
    cplx phase = std::exp(kI * lambda * s);
    switch (kind) {
        case ResolventKernelKind::R0:
            return {phase / (kFourPi * s), 0, 0};
        case ResolventKernelKind::DLAMBDA_R0:
            return {kI / kFourPi * phase, 0, 0};
        case ResolventKernelKind::R0_GRAD: {
            cplx radial = (kI * lambda * phase / s - phase / (s * s)) / kFourPi;
            Vec3 u = d / s;
            return {radial * u.x, radial * u.y, radial * u.z};
        }
        case ResolventKernelKind::GRAD_DLAMBDA_R0: {
            cplx radial = -lambda / kFourPi * phase;
            Vec3 u = d / s;
            return {radial * u.x, radial * u.y, radial * u.z};
        }
    }
    return {};
}

cplx truncated_r0_symbol(cplx lambda, double k, double T) {
    auto E = [&](cplx mu) -> cplx {
        if (std::abs(mu) < 1e-12) return cplx{T, 0};
        return (std::exp(kI * mu * T) - 1.0) / (kI * mu);
    };
    if (k < 1e-12) {
        if (std::abs(lambda) < 1e-12) return cplx{T * T / 2.0, 0};
        cplx elt = std::exp(kI * lambda * T);
        return T * elt / (kI * lambda) + (elt - 1.0) / (lambda * lambda);
    }
    return (E(lambda + k) - E(lambda - k)) / (2.0 * kI * k);
}

ScalarField r0_apply(cplx lambda, const ScalarField& f) {
    if (!f.finite()) throw std::invalid_argument("non-finite field");
    if (lambda.imag() < 0)
        throw std::invalid_argument("r0_apply needs Im lambda >= 0");
    if (lambda.imag() == 0) lambda += cplx{0, 1e-6};

    const Grid3D& g = f.grid;
    const int n = g.n, m = 2 * n;
    const double L = g.box_length;
    const double T = L;  // kernel truncation radius matches the padding margin
    const Fft3& fft = fft_for(m);

    std::vector<cplx> fp(std::size_t(m) * m * m, cplx{});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                fp[(std::size_t(i) * m + j) * m + k] = f.at(i, j, k);
    fft.forward(fp);

    double dk = 2.0 * M_PI / (2.0 * L);
    for (int i = 0; i < m; ++i) {
        double ki = dk * (i <= m / 2 ? i : i - m);
        for (int j = 0; j < m; ++j) {
            double kj = dk * (j <= m / 2 ? j : j - m);
            for (int k = 0; k < m; ++k) {
                double kk = dk * (k <= m / 2 ? k : k - m);
                double kn = std::sqrt(ki * ki + kj * kj + kk * kk);
                fp[(std::size_t(i) * m + j) * m + k] *=
                    truncated_r0_symbol(lambda, kn, T);
            }
        }
    }
    fft.backward(fp);

    ScalarField out(g);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                out.at(i, j, k) = fp[(std::size_t(i) * m + j) * m + k];
    return out;
}

SphereFourierCheck sphere_fourier_check(const Vec3& x, const Vec3& y, double rho_max) {
    double d = (x - y).norm();
    if (d == 0.0) throw SingularityError("sphere_fourier_check at x = y");
    if (rho_max <= d)
        throw WindowError("rho_max must exceed |x-y|");
    const int nr = 2048;
    double drho = rho_max / nr;
    double sigma = 4.0 * drho;
    double mass = 1.0 / (kFourPi * d);
    double lhs = 0;
    for (int i = 0; i < nr; ++i) {
        double rho = (i + 0.5) * drho;
        double u = (rho - d) / sigma;
        double val = mass * std::exp(-0.5 * u * u) / (sigma * std::sqrt(2.0 * M_PI));
        lhs += std::abs(val) * drho;
    }
    return {lhs, mass};
}

}  // namespace magdecay
