#pragma once

#include "magdecay/ellipsoid.hpp"
#include "magdecay/rho_kernel.hpp"

namespace magdecay {

/// Potentials entering the perturbed-resolvent kernels. A# and V# default to
/// copies of A and V in the driver.
struct AssemblyPotentials {
    PotentialSpec A;
    PotentialSpec Asharp;
    PotentialSpec V;
    PotentialSpec Vsharp;
};

enum class TPart { T1, T2, T3, T4, T, TTILDE };
enum class DLambdaPart { T11, T12, TTILDE1, TTILDE2 };

struct AssemblyOptions {
    double rho_max = 20.0;
    double cut_delta = 1e-6;   // kernel starts at rho0 = r (1 + cut_delta)
    int panels_per_decade = 3; // dyadic rho panels toward rho0
    int rho_gauss = 12;
    int uniform_panels = 24;   // panels on the smooth far range
    SurfaceQuadOptions surf{};
};

/// rho-space kernel of the requested part at fixed (x, z): regular samples on
/// a graded rho grid plus Dirac components at the cut rho0 carrying the exact
/// integration-by-parts boundary terms. The modulated hat of the result
/// reproduces the direct oscillatory integral of the part.
RhoKernel assemble_t_hat(TPart part, const AssemblyPotentials& pots, const Vec3& x,
                         const Vec3& z, const AssemblyOptions& opt = {});

RhoKernel assemble_dlambda_t(DLambdaPart part, const AssemblyPotentials& pots,
                             const Vec3& x, const Vec3& z,
                             const AssemblyOptions& opt = {});

/// Direct quadrature of the part's oscillatory integral at real lambda
/// (independent of the ellipsoid foliation; used as the assembly oracle).
cplx direct_t_lambda(TPart part, const AssemblyPotentials& pots, const Vec3& x,
                     const Vec3& z, double lambda, int radial_panels = 48,
                     int sphere_order = 24);
cplx direct_dlambda_t_lambda(DLambdaPart part, const AssemblyPotentials& pots,
                             const Vec3& x, const Vec3& z, double lambda,
                             int radial_panels = 48, int sphere_order = 24);

/// The seven products of the bilinear bound Bil(A, A#).
struct BilBreakdown {
    double terms[7] = {0, 0, 0, 0, 0, 0, 0};
    double total() const {
        double s = 0;
        for (double t : terms) s += t;
        return s;
    }
};

/// Norms of A entering Bil; computed once and reused.
struct BilNorms {
    double a_k2log2 = 0;
    double a_klog = 0;
    double grad_k2log2 = 0;
    double grad_klog = 0;
    double hess_l1 = 0;
    double hess_k2log2 = 0;
    double d3_llogl = 0;
    double d4_llogl = 0;
};

BilNorms bil_norms(const PotentialSpec& A, const Grid3D& grid);
BilBreakdown bil_bound(const BilNorms& a, const BilNorms& asharp);
BilBreakdown bil_bound(const PotentialSpec& A, const PotentialSpec& Asharp,
                       const Grid3D& grid);

}  // namespace magdecay
