#pragma once

#include <map>
#include <optional>
#include <string>

#include "magdecay/grid.hpp"

namespace magdecay {

enum class NormKind {
    K,         // sup_y int |f(x)| / |x-y| dx
    K_LOG,     // weight <log|x-y|> / |x-y|
    K2,        // 1 / |x-y|^2
    K2_LOG,    // <log> / |x-y|^2
    K2_LOG2,   // <log>^2 / |x-y|^2
    L_LOG_L,   // int |f| <log|f|>
    L1,
    L32_1,     // Lorentz L^{3/2,1} via layer cake
    L3_1,      // Lorentz L^{3,1}
    W21_DOT,   // L^1 norm of the Hessian (spectral on the grid)
    KSTAR_SURR // min_{x0} sup_x |f(x)| |x-x0|, upper bound on the K* norm
};

std::string norm_kind_name(NormKind k);

/// <t> = sqrt(1 + t^2) applied to log s.
inline double log_bracket(double s) {
    double l = std::log(s);
    return std::sqrt(1.0 + l * l);
}

struct NormReport {
    std::map<NormKind, double> values;
    bool member_X = false;
    bool member_Y = false;

    double at(NormKind k) const { return values.at(k); }
};

/// Computes the requested norm of |field| on its grid.
/// Kato-type norms run a sup search over y: the weighted convolution is
/// evaluated at every grid point by FFT, then the best candidate is refined
/// off-grid by pattern search with direct singular quadrature.
double space_norm(const ScalarField& field, NormKind kind);

/// Same convolution, reported at every grid point (used by sup search and by
/// the operator-norm estimators in the rho algebra).
std::vector<double> kato_convolve_all(const ScalarField& absfield, NormKind kind);

/// Direct quadrature of int w(|x-y|)|f(x)| dx at an arbitrary point y
/// (y-centered ball handled analytically).
double kato_integral_at(const ScalarField& absfield, NormKind kind, const Vec3& y);

/// Self-cell weight of the singular kernel on a cubic lattice of spacing h:
/// analytic equal-volume-sphere integral plus the lattice residual.
double kato_self_weight(NormKind kind, double h);

/// Norm of the pointwise magnitude of a vector field.
double space_norm(const VectorField& field, NormKind kind);

/// Every norm entering the spaces X (for A) and Y (for V), with membership
/// flags; needs 4 derivatives of A and 2 of V.
NormReport membership_report(const PotentialSpec& A, const PotentialSpec& V,
                             const Grid3D& grid);

struct NormChain {
    double a_k2;        // ||A||_K2
    double grad_a_k;    // ||grad A||_K
    double hess_a_l1;   // ||grad^2 A||_L1
};

NormChain norm_chain_check(const PotentialSpec& A, const Grid3D& grid);

/// Magnitude field |grad^m A| sampled from analytic derivatives (Frobenius
/// norm over all multi-indices of order m and the 3 components of A).
ScalarField sample_vector_derivative_magnitude(const PotentialSpec& A,
                                               const Grid3D& grid, int order);
ScalarField sample_scalar_derivative_magnitude(const BumpSum& f, const Grid3D& grid,
                                               int order);

}  // namespace magdecay
