#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include "magdecay/potential.hpp"
#include "magdecay/vec3.hpp"

namespace magdecay {

using cplx = std::complex<double>;

/// Periodic box [-L/2, L/2)^3 with n points per axis.
struct Grid3D {
    int n = 8;
    double box_length = 1.0;

    Grid3D() = default;
    Grid3D(int n_, double L_) : n(n_), box_length(L_) {
        if (n < 8 || (n & (n - 1)) != 0)
            throw std::invalid_argument("grid n must be a power of two >= 8");
        if (!(box_length > 0)) throw std::invalid_argument("box length must be > 0");
    }

    double h() const { return box_length / n; }
    std::size_t size() const { return std::size_t(n) * n * n; }
    double cell_volume() const { return h() * h() * h(); }

    std::size_t idx(int i, int j, int k) const {
        return (std::size_t(i) * n + j) * n + k;
    }
    Vec3 point(int i, int j, int k) const {
        double L = box_length;
        return {-L / 2 + i * h(), -L / 2 + j * h(), -L / 2 + k * h()};
    }
    /// Fourier wavenumber for index i along one axis (FFTW ordering).
    double wavenumber(int i) const {
        int m = (i <= n / 2) ? i : i - n;
        if (i == n / 2) m = n / 2;  // Nyquist kept positive; zeroed for odd ops
        return 2.0 * M_PI / box_length * m;
    }
    bool is_nyquist(int i) const { return i == n / 2; }

    bool operator==(const Grid3D& o) const {
        return n == o.n && box_length == o.box_length;
    }
};

struct ScalarField {
    Grid3D grid;
    std::vector<cplx> values;

    ScalarField() = default;
    explicit ScalarField(const Grid3D& g) : grid(g), values(g.size()) {}

    cplx& at(int i, int j, int k) { return values[grid.idx(i, j, k)]; }
    cplx at(int i, int j, int k) const { return values[grid.idx(i, j, k)]; }

    double norm_l2() const;    // sqrt(h^3 sum |f|^2)
    double norm_l1() const;    // h^3 sum |f|
    double norm_linf() const;  // max |f|
    bool finite() const;
};

struct VectorField {
    Grid3D grid;
    std::array<std::vector<cplx>, 3> comp;

    VectorField() = default;
    explicit VectorField(const Grid3D& g) : grid(g) {
        for (auto& c : comp) c.assign(g.size(), cplx{});
    }
};

cplx dot_l2(const ScalarField& a, const ScalarField& b);  // h^3 sum conj(a)*b

/// Samples the analytic profile at grid nodes. Indicator terms are
/// cell-averaged at edge cells so the discrete well shape converges fast.
ScalarField sample_scalar(const BumpSum& s, const Grid3D& g, bool antialias = true);
VectorField sample_vector(const PotentialSpec& spec, const Grid3D& g,
                          bool antialias = true);
/// Samples an exact mixed partial (requires smooth terms).
ScalarField sample_scalar_derivative(const BumpSum& s, const Grid3D& g, int ax, int ay,
                                     int az);

}  // namespace magdecay
