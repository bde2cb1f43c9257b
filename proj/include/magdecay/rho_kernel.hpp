#pragma once

#include <string>
#include <vector>

#include "magdecay/grid.hpp"
#include "magdecay/vec3.hpp"

namespace magdecay {

struct KernelMatrix {
    int rows = 0, cols = 0;
    std::vector<cplx> a;

    KernelMatrix() = default;
    KernelMatrix(int r, int c) : rows(r), cols(c), a(std::size_t(r) * c) {}
    cplx& at(int r, int c) { return a[std::size_t(r) * cols + c]; }
    cplx at(int r, int c) const { return a[std::size_t(r) * cols + c]; }
};

/// Point cloud with quadrature weights for the spatial integrals.
struct SpatialCloud {
    std::vector<Vec3> points;
    std::vector<double> weights;

    int size() const { return int(points.size()); }
    bool matches(const SpatialCloud& o) const;

    /// Cubic lattice of m^3 points covering [-half, half]^3.
    static SpatialCloud lattice(int m, double half);
    static SpatialCloud single(const Vec3& p);
};

/// Dirac component w * delta^(order)(rho - rho0) * kernel matrix.
struct AtomicComponent {
    double rho0 = 0;
    int order = 0;  // 0 = delta, 1 = delta'
    KernelMatrix kernel;
};

/// Discretized operator-valued kernel T(rho, z, x). Regular part sampled on
/// rho_nodes with quadrature weights; optional Dirac components. Uniform
/// node spacing is required by the convolution algebra; assembled kernel
/// slices may carry graded nodes (hat and norms still work).
struct RhoKernel {
    std::vector<double> rho_nodes;
    std::vector<double> rho_weights;
    SpatialCloud out_cloud;  // z
    SpatialCloud in_cloud;   // x
    std::vector<KernelMatrix> values;  // one matrix per rho node
    std::vector<AtomicComponent> atoms;

    bool uniform = true;
    double drho = 0;

    static RhoKernel regular_uniform(double rho_max, int n_rho,
                                     const SpatialCloud& out,
                                     const SpatialCloud& in);
    double rho_max() const { return rho_nodes.empty() ? 0 : rho_nodes.back(); }
    bool finite() const;
};

enum class OpSpace { L1, LINF, K, KSTAR_SURR };

struct GridMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotContractive : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// rho-convolution composition [T o S](rho,z,x); truncates at T's rho_max.
RhoKernel compose(const RhoKernel& T, const RhoKernel& S);

/// Norm of int |T| drho as an operator between the requested spaces.
/// Supported pairs: L1->LINF, LINF->LINF, K->LINF, L1->KSTAR_SURR.
double u_norm(const RhoKernel& T, OpSpace in, OpSpace out);

/// Same, ignoring Dirac components (used for aggregate diagnostics on
/// assembled kernels that carry boundary atoms).
double u_norm_regular(const RhoKernel& T, OpSpace in, OpSpace out);

/// Modulated transform int T(rho) e^{i lambda rho} drho plus atomic parts.
KernelMatrix hat(const RhoKernel& T, double lambda);

struct WienerDiagnostics {
    std::vector<std::pair<double, double>> continuity;  // (delta, norm of shift diff)
    std::vector<std::pair<double, double>> tail;        // (R, norm of chi_{rho>=R} T)
};

WienerDiagnostics wiener_diagnostics(const RhoKernel& T);

/// Neumann series S with (I+T)^{-1} = I + S; requires contraction.
RhoKernel invert_neumann(const RhoKernel& T, double term_tol = 1e-10);

/// Residual kernel T + S + T o S (zero when S inverts I+T).
RhoKernel neumann_residual(const RhoKernel& T, const RhoKernel& S);

void save_rho_kernel(const RhoKernel& T, const std::string& path);
RhoKernel load_rho_kernel(const std::string& path);

}  // namespace magdecay
