#include "magdecay/hamiltonian.hpp"

#include <cmath>

#include "magdecay/fft3.hpp"

namespace magdecay {

namespace {
const cplx kI{0, 1};
}

HamiltonianOperator::HamiltonianOperator(const Grid3D& grid,
                                         const PotentialSpec& A_spec,
                                         const PotentialSpec& V_spec,
                                         MagneticForm form)
    : grid_(grid), form_(form) {
    for (const auto& comp : A_spec.vector)
        for (const auto& t : comp.terms)
            if (t.kind == BumpKind::BallIndicator)
                throw std::invalid_argument("magnetic potential must be smooth");

    has_magnetic_ = !A_spec.vector_empty();
    const int n = grid_.n;
    const Fft3& fft = fft_for(n);

    // sampled V (real; complex-valued specs are rejected by construction,
    // bumps are real by definition)
    ScalarField vf = sample_scalar(V_spec.scalar, grid_, true);
    v_.resize(grid_.size());
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] = vf.values[i].real();

    k2_.resize(grid_.size());
    for (int c = 0; c < 3; ++c) kvec_[c].assign(grid_.size(), 0.0);
    dealias_.assign(grid_.size(), 1);
    int cutoff23 = n / 3;         // keep |m| <= n/3
    int cutoff13 = n / 6;         // band limit for A
    std::vector<uint8_t> aband_mask(grid_.size(), 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                std::size_t q = grid_.idx(i, j, k);
                int m[3] = {i <= n / 2 ? i : i - n, j <= n / 2 ? j : j - n,
                            k <= n / 2 ? k : k - n};
                double kx = 2 * M_PI / grid_.box_length;
                double kv[3] = {kx * m[0], kx * m[1], kx * m[2]};
                k2_[q] = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
                for (int c = 0; c < 3; ++c) {
                    int id[3] = {i, j, k};
                    kvec_[c][q] = grid_.is_nyquist(id[c]) ? 0.0 : kv[c];
                }
                int mmax = std::max({std::abs(m[0]), std::abs(m[1]), std::abs(m[2])});
                if (mmax > cutoff23) dealias_[q] = 0;
                if (mmax > cutoff13) aband_mask[q] = 0;
            }

    if (has_magnetic_) {
        VectorField af = sample_vector(A_spec, grid_, true);
        // band-limit A so that A * (2/3-band f) products are alias-free
        std::array<std::vector<cplx>, 3> ahat;
        for (int c = 0; c < 3; ++c) {
            ahat[c] = af.comp[c];
            fft.forward(ahat[c]);
            for (std::size_t q = 0; q < ahat[c].size(); ++q)
                if (!aband_mask[q]) ahat[c][q] = 0;
        }
        std::vector<cplx> divhat(grid_.size(), cplx{});
        for (std::size_t q = 0; q < divhat.size(); ++q)
            divhat[q] = kI * (kvec_[0][q] * ahat[0][q] + kvec_[1][q] * ahat[1][q] +
                              kvec_[2][q] * ahat[2][q]);
        fft.backward(divhat);
        div_a_.resize(grid_.size());
        for (std::size_t q = 0; q < div_a_.size(); ++q) div_a_[q] = divhat[q].real();
        for (int c = 0; c < 3; ++c) {
            fft.backward(ahat[c]);
            a_band_[c] = std::move(ahat[c]);
        }
    }
}

void HamiltonianOperator::magnetic_term(const std::vector<cplx>& in,
                                        std::vector<cplx>& out) const {
    const Fft3& fft = fft_for(grid_.n);
    // project input to the 2/3 band
    std::vector<cplx> fhat = in;
    fft.forward(fhat);
    for (std::size_t q = 0; q < fhat.size(); ++q)
        if (!dealias_[q]) fhat[q] = 0;
    std::vector<cplx> fb = fhat;
    fft.backward(fb);

    std::vector<cplx> acc(grid_.size(), cplx{});
    if (form_ == MagneticForm::Symmetric || form_ == MagneticForm::GradForm) {
        // A . grad f (doubled in GradForm)
        double fac = (form_ == MagneticForm::Symmetric) ? 1.0 : 2.0;
        for (int c = 0; c < 3; ++c) {
            std::vector<cplx> g = fhat;
            for (std::size_t q = 0; q < g.size(); ++q) g[q] *= kI * kvec_[c][q];
            fft.backward(g);
            for (std::size_t q = 0; q < g.size(); ++q)
                acc[q] += fac * a_band_[c][q] * g[q];
        }
    }
    if (form_ == MagneticForm::Symmetric || form_ == MagneticForm::DivForm) {
        // div(A f) (doubled in DivForm)
        double fac = (form_ == MagneticForm::Symmetric) ? 1.0 : 2.0;
        std::vector<cplx> dsum(grid_.size(), cplx{});
        for (int c = 0; c < 3; ++c) {
            std::vector<cplx> p(grid_.size());
            for (std::size_t q = 0; q < p.size(); ++q) p[q] = a_band_[c][q] * fb[q];
            fft.forward(p);
            for (std::size_t q = 0; q < p.size(); ++q)
                dsum[q] += kI * kvec_[c][q] * p[q];
        }
        fft.backward(dsum);
        for (std::size_t q = 0; q < acc.size(); ++q) acc[q] += fac * dsum[q];
    }
    if (form_ == MagneticForm::DivForm) {
        // Vt - V = -i div A; the overall factor i is applied below
        for (std::size_t q = 0; q < acc.size(); ++q) acc[q] -= div_a_[q] * fb[q];
    }
    if (form_ == MagneticForm::GradForm) {
        for (std::size_t q = 0; q < acc.size(); ++q) acc[q] += div_a_[q] * fb[q];
    }
    // multiply by i and project the output band
    fft.forward(acc);
    for (std::size_t q = 0; q < acc.size(); ++q)
        acc[q] = dealias_[q] ? kI * acc[q] : cplx{};
    fft.backward(acc);
    for (std::size_t q = 0; q < out.size(); ++q) out[q] += acc[q];
}

void HamiltonianOperator::apply(const std::vector<cplx>& in,
                                std::vector<cplx>& out) const {
    const Fft3& fft = fft_for(grid_.n);
    std::vector<cplx> hat = in;
    fft.forward(hat);
    for (std::size_t q = 0; q < hat.size(); ++q) hat[q] *= k2_[q];
    fft.backward(hat);
    out.resize(in.size());
    for (std::size_t q = 0; q < out.size(); ++q) out[q] = hat[q] + v_[q] * in[q];
    if (has_magnetic_) magnetic_term(in, out);
}

ScalarField HamiltonianOperator::apply(const ScalarField& f) const {
    ScalarField out(grid_);
    apply(f.values, out.values);
    return out;
}

void HamiltonianOperator::apply_kinetic(const std::vector<cplx>& in,
                                        std::vector<cplx>& out) const {
    const Fft3& fft = fft_for(grid_.n);
    out = in;
    fft.forward(out);
    for (std::size_t q = 0; q < out.size(); ++q) out[q] *= k2_[q];
    fft.backward(out);
}

void HamiltonianOperator::apply_inv_shifted_kinetic(const std::vector<cplx>& in,
                                                    std::vector<cplx>& out,
                                                    double sigma) const {
    const Fft3& fft = fft_for(grid_.n);
    out = in;
    fft.forward(out);
    for (std::size_t q = 0; q < out.size(); ++q) out[q] /= (k2_[q] + sigma);
    fft.backward(out);
}

void HamiltonianOperator::apply_u(const std::vector<cplx>& in,
                                  std::vector<cplx>& out) const {
    out.assign(in.size(), cplx{});
    for (std::size_t q = 0; q < out.size(); ++q) out[q] = v_[q] * in[q];
    if (has_magnetic_) magnetic_term(in, out);
}

}  // namespace magdecay
