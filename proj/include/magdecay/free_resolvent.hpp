#pragma once

#include <complex>

#include "magdecay/grid.hpp"
#include "magdecay/vec3.hpp"

namespace magdecay {

enum class ResolventKernelKind { R0, R0_GRAD, DLAMBDA_R0, GRAD_DLAMBDA_R0 };

struct SingularityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct WindowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Closed-form kernels of the free resolvent R0(lambda^2) and derivatives.
/// Scalar kinds return the value in [0]; vector kinds fill all components.
std::array<cplx, 3> resolvent_kernel(ResolventKernelKind kind, cplx lambda,
                                     const Vec3& x, const Vec3& y);

inline cplx resolvent_kernel_scalar(ResolventKernelKind kind, cplx lambda,
                                    const Vec3& x, const Vec3& y) {
    return resolvent_kernel(kind, lambda, x, y)[0];
}

/// Fourier symbol of the radially truncated kernel e^{i lambda s}/(4 pi s),
/// s <= T, evaluated at |xi| = k. Closed form; finite at k = 0.
cplx truncated_r0_symbol(cplx lambda, double k, double T);

/// Applies R0(lambda^2) to f by free-space convolution on the padded grid
/// (truncated-kernel symbol, spectrally accurate for smooth decaying f).
/// Real lambda is regularized to lambda + i eps (limiting value semantics).
ScalarField r0_apply(cplx lambda, const ScalarField& f);

/// Checks the sphere-measure identity int |R0_hat(rho)(x,y)| d rho
/// = 1/(4 pi |x-y|) with a mollified delta on a rho grid.
struct SphereFourierCheck {
    double lhs;
    double rhs;
};
SphereFourierCheck sphere_fourier_check(const Vec3& x, const Vec3& y, double rho_max);

}  // namespace magdecay
