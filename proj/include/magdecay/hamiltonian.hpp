#pragma once

#include "magdecay/grid.hpp"
#include "magdecay/potential.hpp"

namespace magdecay {

enum class MagneticForm {
    Symmetric,   // i (A.grad + div(A .))
    DivForm,     // i div(At .) + Vt,  At = 2A, Vt = V - i div A
    GradForm     // i At.grad + V#,   At = 2A, V# = V + i div A
};

/// H = -Delta + i(A grad + grad A) + V on the periodic box, with spectral
/// derivatives. A is band-limited to n/3 and products are 2/3-dealiased
/// inside a projector sandwich, which keeps the discrete operator hermitian
/// and makes the three operator rewritings agree to rounding.
class HamiltonianOperator {
  public:
    HamiltonianOperator(const Grid3D& grid, const PotentialSpec& A_spec,
                        const PotentialSpec& V_spec,
                        MagneticForm form = MagneticForm::Symmetric);

    const Grid3D& grid() const { return grid_; }
    bool has_magnetic() const { return has_magnetic_; }

    void apply(const std::vector<cplx>& in, std::vector<cplx>& out) const;
    ScalarField apply(const ScalarField& f) const;

    /// -Delta f (spectral), used by preconditioners.
    void apply_kinetic(const std::vector<cplx>& in, std::vector<cplx>& out) const;
    /// (-Delta + sigma)^{-1} f (spectral).
    void apply_inv_shifted_kinetic(const std::vector<cplx>& in, std::vector<cplx>& out,
                                   double sigma) const;
    /// U f = (H + Delta) f.
    void apply_u(const std::vector<cplx>& in, std::vector<cplx>& out) const;

    const std::vector<double>& v_values() const { return v_; }

  private:
    Grid3D grid_;
    bool has_magnetic_;
    MagneticForm form_;
    std::array<std::vector<cplx>, 3> a_band_;  // band-limited A (physical space)
    std::vector<double> div_a_;                // spectral div of the band-limited A
    std::vector<double> v_;
    std::vector<double> k2_;                   // |xi|^2 per mode
    std::array<std::vector<double>, 3> kvec_;  // derivative multipliers
    std::vector<uint8_t> dealias_;             // 2/3 mask

    void magnetic_term(const std::vector<cplx>& in, std::vector<cplx>& out) const;
};

}  // namespace magdecay
