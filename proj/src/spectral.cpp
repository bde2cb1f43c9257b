#include "magdecay/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>

#include "magdecay/fft3.hpp"
#include "magdecay/norms.hpp"
#include "magdecay/rho_kernel.hpp"

namespace magdecay {

namespace {

const cplx kI{0, 1};

using ApplyFn = std::function<void(const std::vector<cplx>&, std::vector<cplx>&)>;

struct Block {
    std::vector<std::vector<cplx>> cols;

    int size() const { return int(cols.size()); }
};

cplx vdot(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    cplx s{};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double vnorm(const std::vector<cplx>& a) { return std::sqrt(std::abs(vdot(a, a))); }

void block_axpy(std::vector<cplx>& dst, cplx w, const std::vector<cplx>& src) {
    if (w == cplx{}) return;
    for (std::size_t q = 0; q < dst.size(); ++q) dst[q] += w * src[q];
}

/// Lowest-k eigenpairs of a hermitian operator by LOBPCG with an optional
/// preconditioner; returns (values, vectors) sorted ascending. The trial
/// space [X | W | P] is whitened through its Gram matrix each iteration,
/// which absorbs the near-dependencies that appear at convergence.
std::pair<std::vector<double>, Block> lobpcg(const ApplyFn& apply,
                                             const ApplyFn& precond, std::size_t dim,
                                             int want, int block_extra, int max_iters,
                                             double tol, unsigned seed) {
    const int b = want + block_extra;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;

    Block X, P, HX, HP;
    for (int i = 0; i < b; ++i) {
        std::vector<cplx> v(dim);
        for (auto& x : v) x = cplx{gauss(rng), gauss(rng)};
        double n = vnorm(v);
        for (auto& x : v) x /= n;
        X.cols.push_back(std::move(v));
    }

    auto apply_block = [&](const Block& in) {
        Block out;
        out.cols.resize(in.size());
        for (int i = 0; i < in.size(); ++i) apply(in.cols[i], out.cols[i]);
        return out;
    };

    HX = apply_block(X);
    std::vector<double> evals(b, 0.0);

    for (int iter = 0; iter < max_iters; ++iter) {
        // residuals and preconditioned directions
        Block W;
        bool done = true;
        for (int i = 0; i < X.size(); ++i) {
            double xn2 = std::real(vdot(X.cols[i], X.cols[i]));
            evals[i] = std::real(vdot(X.cols[i], HX.cols[i])) / xn2;
            std::vector<cplx> r = HX.cols[i];
            for (std::size_t q = 0; q < dim; ++q) r[q] -= evals[i] * X.cols[i][q];
            double rn = vnorm(r) / std::sqrt(xn2);
            if (i < want && rn > tol * std::max(1.0, std::abs(evals[i])))
                done = false;
            std::vector<cplx> w;
            precond(r, w);
            double n = vnorm(w);
            if (n > 0)
                for (auto& v : w) v /= n;
            W.cols.push_back(std::move(w));
        }
        if (done && iter > 0) break;
        if (std::getenv("MAGDECAY_LOBPCG_TRACE")) {
            std::fprintf(stderr, "it %d evals:", iter);
            for (int i = 0; i < std::min(X.size(), 8); ++i)
                std::fprintf(stderr, " %.5f", evals[i]);
            std::fprintf(stderr, "\n");
        }

        Block HW = apply_block(W);

        std::vector<const std::vector<cplx>*> S, HS;
        for (int i = 0; i < X.size(); ++i) S.push_back(&X.cols[i]);
        for (int i = 0; i < W.size(); ++i) S.push_back(&W.cols[i]);
        for (int i = 0; i < P.size(); ++i) S.push_back(&P.cols[i]);
        for (int i = 0; i < X.size(); ++i) HS.push_back(&HX.cols[i]);
        for (int i = 0; i < W.size(); ++i) HS.push_back(&HW.cols[i]);
        for (int i = 0; i < P.size(); ++i) HS.push_back(&HP.cols[i]);
        const int m = int(S.size());
        const int bx = X.size();

        Eigen::MatrixXcd G(m, m), A(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = i; j < m; ++j) {
                cplx g = vdot(*S[i], *S[j]);
                cplx a = vdot(*S[i], *HS[j]);
                G(i, j) = g;
                G(j, i) = std::conj(g);
                A(i, j) = a;
                A(j, i) = std::conj(a);
            }
        // hermitize A against rounding
        A = cplx{0.5, 0} * (A + A.adjoint()).eval();

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ges(G);
        double gmax = ges.eigenvalues().maxCoeff();
        std::vector<int> keep;
        for (int i = 0; i < m; ++i)
            if (ges.eigenvalues()(i) > 1e-8 * gmax) keep.push_back(i);
        const int mk = int(keep.size());
        Eigen::MatrixXcd B(m, mk);
        for (int c = 0; c < mk; ++c)
            B.col(c) = ges.eigenvectors().col(keep[c]) /
                       std::sqrt(ges.eigenvalues()(keep[c]));

        Eigen::MatrixXcd Aw = B.adjoint() * A * B;
        Aw = cplx{0.5, 0} * (Aw + Aw.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> res(Aw);

        const int nb = std::min(b, mk);
        Block Xn, Pn, HXn, HPn;
        Xn.cols.assign(nb, std::vector<cplx>(dim, cplx{}));
        Pn.cols.assign(nb, std::vector<cplx>(dim, cplx{}));
        HXn.cols.assign(nb, std::vector<cplx>(dim, cplx{}));
        HPn.cols.assign(nb, std::vector<cplx>(dim, cplx{}));
        for (int c = 0; c < nb; ++c) {
            Eigen::VectorXcd d = B * res.eigenvectors().col(c);  // S coordinates
            for (int i = 0; i < m; ++i) {
                block_axpy(Xn.cols[c], d(i), *S[i]);
                block_axpy(HXn.cols[c], d(i), *HS[i]);
                if (i >= bx) {
                    block_axpy(Pn.cols[c], d(i), *S[i]);
                    block_axpy(HPn.cols[c], d(i), *HS[i]);
                }
            }
            evals[c] = res.eigenvalues()(c);
        }
        // drop insignificant P directions (converged columns)
        Block Pk, HPk;
        for (int c = 0; c < nb; ++c) {
            double n = vnorm(Pn.cols[c]);
            if (n > 1e-8) {
                for (auto& v : Pn.cols[c]) v /= n;
                for (auto& v : HPn.cols[c]) v /= n;
                Pk.cols.push_back(std::move(Pn.cols[c]));
                HPk.cols.push_back(std::move(HPn.cols[c]));
            }
        }
        X = std::move(Xn);
        HX = std::move(HXn);
        P = std::move(Pk);
        HP = std::move(HPk);
    }

    // final Rayleigh quotients and sort
    std::vector<std::pair<double, int>> order;
    for (int i = 0; i < X.size(); ++i) {
        double xn2 = std::real(vdot(X.cols[i], X.cols[i]));
        order.emplace_back(std::real(vdot(X.cols[i], HX.cols[i])) / xn2, i);
    }
    std::sort(order.begin(), order.end());
    std::vector<double> vals;
    Block out;
    for (int i = 0; i < want && i < int(order.size()); ++i) {
        vals.push_back(order[i].first);
        out.cols.push_back(std::move(X.cols[order[i].second]));
    }
    return {vals, out};
}

}  // namespace

int SpectrumReport::negative_count() const {
    int c = 0;
    for (const auto& p : pairs)
        if (p.cls == EigClass::Negative) ++c;
    return c;
}

std::vector<const Eigenpair*> SpectrumReport::bound_states() const {
    std::vector<const Eigenpair*> out;
    for (const auto& p : pairs)
        if (p.cls == EigClass::Negative) out.push_back(&p);
    return out;
}

HamiltonianOperator assemble_h(const Grid3D& grid, const PotentialSpec& A,
                               const PotentialSpec& V, MagneticForm form) {
    return HamiltonianOperator(grid, A, V, form);
}

SpectrumReport eigensolve(const HamiltonianOperator& H, int k, double zero_tol,
                          int max_iters, double residual_tol) {
    if (k < 1) throw std::invalid_argument("eigensolve needs k >= 1");
    const Grid3D& g = H.grid();
    ApplyFn apply = [&](const std::vector<cplx>& in, std::vector<cplx>& out) {
        H.apply(in, out);
    };
    ApplyFn prec = [&](const std::vector<cplx>& in, std::vector<cplx>& out) {
        H.apply_inv_shifted_kinetic(in, out, 1.0);
    };
    auto [vals, vecs] = lobpcg(apply, prec, g.size(), k, std::min(6, k + 2),
                               max_iters, residual_tol, 20250809u);
    if (int(vals.size()) < k)
        throw ConvergenceError("eigensolve: block collapsed");

    SpectrumReport rep;
    for (int i = 0; i < k; ++i) {
        Eigenpair p;
        p.value = vals[i];
        p.state = ScalarField(g);
        p.state.values = std::move(vecs.cols[i]);
        double nrm = p.state.norm_l2();
        for (auto& v : p.state.values) v /= nrm;
        std::vector<cplx> hx;
        H.apply(p.state.values, hx);
        double res = 0;
        for (std::size_t q = 0; q < hx.size(); ++q)
            res += std::norm(hx[q] - p.value * p.state.values[q]);
        p.residual = std::sqrt(res * g.cell_volume());
        if (p.value < -zero_tol) {
            p.cls = EigClass::Negative;
            p.lambda_n = std::sqrt(-p.value);
        } else if (p.value <= zero_tol) {
            p.cls = EigClass::NearZero;
        } else {
            p.cls = EigClass::PositiveEmbeddedCandidate;
        }
        rep.pairs.push_back(std::move(p));
    }
    return rep;
}

std::vector<Eigenpair> embedded_scan(const HamiltonianOperator& H, double e_max) {
    const Grid3D& g = H.grid();
    if (g.n > 16)
        throw std::invalid_argument("embedded scan runs on the dense path (n <= 16)");
    const int N = int(g.size());
    Eigen::MatrixXcd M(N, N);
    std::vector<cplx> e(N, cplx{}), col;
    for (int j = 0; j < N; ++j) {
        e[j] = 1.0;
        H.apply(e, col);
        for (int i = 0; i < N; ++i) M(i, j) = col[i];
        e[j] = 0.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
    std::vector<Eigenpair> found;
    for (int i = 0; i < N; ++i) {
        double ev = es.eigenvalues()(i);
        if (ev <= 0 || ev > e_max) continue;
        double inner = 0, total = 0;
        for (int a = 0; a < g.n; ++a)
            for (int b = 0; b < g.n; ++b)
                for (int c = 0; c < g.n; ++c) {
                    double w = std::norm(es.eigenvectors()(int(g.idx(a, b, c)), i));
                    total += w;
                    Vec3 p = g.point(a, b, c);
                    double half = g.box_length / 4;
                    if (std::abs(p.x) < half && std::abs(p.y) < half &&
                        std::abs(p.z) < half)
                        inner += w;
                }
        if (inner / total > 0.99) {
            Eigenpair p;
            p.value = ev;
            p.cls = EigClass::PositiveEmbeddedCandidate;
            p.state = ScalarField(g);
            for (int q = 0; q < N; ++q) p.state.values[q] = es.eigenvectors()(q, i);
            found.push_back(std::move(p));
        }
    }
    return found;
}

ScalarField pac_apply(const SpectrumReport& report, const ScalarField& f) {
    ScalarField out = f;
    for (const auto* b : report.bound_states()) {
        cplx c = dot_l2(b->state, out);
        for (std::size_t q = 0; q < out.values.size(); ++q)
            out.values[q] -= c * b->state.values[q];
    }
    return out;
}

int birman_schwinger_count(const Grid3D& grid, const PotentialSpec& A,
                           const PotentialSpec& V, int max_eigs) {
    HamiltonianOperator H(grid, A, V);
    const Fft3& fft = fft_for(grid.n);

    // multiplier 1/|xi| with the zero mode removed
    std::vector<double> inv_sqrt(grid.size());
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j)
            for (int k = 0; k < grid.n; ++k) {
                int m[3] = {i <= grid.n / 2 ? i : i - grid.n,
                            j <= grid.n / 2 ? j : j - grid.n,
                            k <= grid.n / 2 ? k : k - grid.n};
                double kx = 2 * M_PI / grid.box_length;
                double k2 = kx * kx * (double(m[0]) * m[0] + double(m[1]) * m[1] +
                                       double(m[2]) * m[2]);
                inv_sqrt[grid.idx(i, j, k)] = (k2 > 0) ? 1.0 / std::sqrt(k2) : 0.0;
            }

    ApplyFn apply = [&](const std::vector<cplx>& in, std::vector<cplx>& out) {
        std::vector<cplx> t = in;
        fft.forward(t);
        for (std::size_t q = 0; q < t.size(); ++q) t[q] *= inv_sqrt[q];
        fft.backward(t);
        std::vector<cplx> u;
        H.apply_u(t, u);
        fft.forward(u);
        for (std::size_t q = 0; q < u.size(); ++q) u[q] *= inv_sqrt[q];
        fft.backward(u);
        out = std::move(u);
    };
    ApplyFn prec = [&](const std::vector<cplx>& in, std::vector<cplx>& out) {
        out = in;
    };
    auto [vals, vecs] = lobpcg(apply, prec, grid.size(), max_eigs, 6, 500, 1e-7,
                               77001u);
    int count = 0;
    for (double v : vals)
        if (v < -1.0) ++count;
    return count;
}

namespace {

struct Patch {
    std::vector<Vec3> points;
    std::vector<std::array<int, 3>> lattice;
    std::map<std::array<int, 3>, int> index;
    double h;
};

Patch make_patch(double radius, double h) {
    Patch p;
    p.h = h;
    int m = int(std::ceil(radius / h));
    for (int i = -m; i <= m; ++i)
        for (int j = -m; j <= m; ++j)
            for (int k = -m; k <= m; ++k) {
                Vec3 q{i * h, j * h, k * h};
                if (q.norm() <= radius) {
                    p.index[{i, j, k}] = int(p.points.size());
                    p.points.push_back(q);
                    p.lattice.push_back({i, j, k});
                }
            }
    return p;
}

// dense U on the patch: V multiplication plus the symmetric magnetic term
// with 4th-order finite differences (fields vanish near the patch edge)
Eigen::MatrixXcd patch_u_matrix(const Patch& p, const PotentialSpec& A,
                                const PotentialSpec& V) {
    int m = int(p.points.size());
    Eigen::MatrixXcd U = Eigen::MatrixXcd::Zero(m, m);
    for (int i = 0; i < m; ++i) U(i, i) = V.scalar.eval_cell_average(p.points[i], p.h);
    if (A.vector_empty()) return U;

    std::vector<Vec3> a(m);
    std::vector<double> diva(m);
    for (int i = 0; i < m; ++i) {
        a[i] = A.eval_vector(p.points[i]);
        diva[i] = A.div_vector(p.points[i]);
    }
    // U += i (2 A . grad + div A); derivative by 4th-order central stencil
    // d/dx f(i) = (f(i-2) - 8 f(i-1) + 8 f(i+1) - f(i+2)) / (12 h)
    const int offs[4] = {-2, -1, 1, 2};
    const double stencil[4] = {1.0 / 12, -8.0 / 12, 8.0 / 12, -1.0 / 12};
    for (int i = 0; i < m; ++i) {
        U(i, i) += kI * diva[i];
        for (int axis = 0; axis < 3; ++axis) {
            if (a[i][axis] == 0.0) continue;
            for (int s = 0; s < 4; ++s) {
                std::array<int, 3> key = p.lattice[i];
                key[axis] += offs[s];
                auto it = p.index.find(key);
                if (it == p.index.end()) continue;
                U(i, it->second) += kI * 2.0 * a[i][axis] * stencil[s] / p.h;
            }
        }
    }
    // hermitian symmetrization absorbs the stencil asymmetry at the edge
    Eigen::MatrixXcd Us = 0.5 * (U + U.adjoint());
    return Us;
}

// cell-averaged 1/(4 pi |d|) for near-diagonal pairs (5-point Gauss per axis)
double near_cell_kernel(const Vec3& d, double h) {
    static const double gx[5] = {0.046910077030668, 0.230765344947158, 0.5,
                                 0.769234655052842, 0.953089922969332};
    static const double gw[5] = {0.118463442528095, 0.239314335249683,
                                 0.284444444444444, 0.239314335249683,
                                 0.118463442528095};
    double acc = 0;
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b)
            for (int c = 0; c < 5; ++c) {
                Vec3 q{d.x + h * (gx[a] - 0.5), d.y + h * (gx[b] - 0.5),
                       d.z + h * (gx[c] - 0.5)};
                acc += gw[a] * gw[b] * gw[c] / q.norm();
            }
    return acc * h * h * h / (4.0 * M_PI);
}

double patch_sigma_min(const Patch& p, const Eigen::MatrixXcd& U, double sign) {
    int m = int(p.points.size());
    double h3 = p.h * p.h * p.h;
    Eigen::MatrixXd G(m, m);
    double self = kato_self_weight(NormKind::K, p.h) / (4.0 * M_PI);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            if (i == j) {
                G(i, j) = self;
                continue;
            }
            Vec3 d = p.points[i] - p.points[j];
            double r = d.norm();
            G(i, j) = (r <= 3.01 * p.h) ? near_cell_kernel(d, p.h)
                                        : h3 / (4.0 * M_PI * r);
        }
    bool real_u = U.imag().cwiseAbs().maxCoeff() == 0.0;
    if (real_u) {
        Eigen::MatrixXd M =
            Eigen::MatrixXd::Identity(m, m) + sign * (G * U.real());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M.transpose() * M);
        return std::sqrt(std::max(0.0, es.eigenvalues()(0)));
    }
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(m, m) + sign * (G * U);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M.adjoint() * M);
    return std::sqrt(std::max(0.0, es.eigenvalues()(0)));
}

}  // namespace

RegularityDiagnostic zero_regularity(const PotentialSpec& A, const PotentialSpec& V,
                                     double h, double patch_radius) {
    if (patch_radius <= 0) {
        patch_radius = 1.0;
        for (const auto* bs : {&V.scalar, &A.vector[0], &A.vector[1], &A.vector[2]})
            for (const auto& t : bs->terms) {
                double reach =
                    (t.kind == BumpKind::Gaussian) ? 3.5 * t.width : t.width;
                patch_radius = std::max(patch_radius, t.center.norm() + reach);
            }
        patch_radius += 2 * h;
    }
    RegularityDiagnostic d;
    Patch p = make_patch(patch_radius, h);
    Eigen::MatrixXcd U = patch_u_matrix(p, A, V);
    d.sigma_min_h = patch_sigma_min(p, U, +1.0);
    d.sigma_min_hm1 = patch_sigma_min(p, U, -1.0);

    Patch pc = make_patch(patch_radius, 2 * h);
    Eigen::MatrixXcd Uc = patch_u_matrix(pc, A, V);
    double coarse_h = patch_sigma_min(pc, Uc, +1.0);
    double coarse_hm1 = patch_sigma_min(pc, Uc, -1.0);
    d.trend_ratio_h = (d.sigma_min_h > 0) ? coarse_h / d.sigma_min_h : 0.0;
    d.trend_ratio_hm1 = (d.sigma_min_hm1 > 0) ? coarse_hm1 / d.sigma_min_hm1 : 0.0;

    auto verdict = [&](double sigma, double trend) {
        if (sigma <= d.threshold) return false;
        bool shrinking_small = sigma < d.soft_threshold && trend >= d.trend_factor;
        return !shrinking_small;
    };
    d.regular_h = verdict(d.sigma_min_h, d.trend_ratio_h);
    d.regular_hm1 = verdict(d.sigma_min_hm1, d.trend_ratio_hm1);
    return d;
}

Eigen::MatrixXcd feshbach_invert(const Eigen::MatrixXcd& L,
                                 const std::vector<int>& split) {
    int n = int(L.rows());
    std::vector<char> in0(n, 0);
    for (int i : split) {
        if (i < 0 || i >= n) throw std::invalid_argument("split index out of range");
        in0[i] = 1;
    }
    std::vector<int> idx0, idx1;
    for (int i = 0; i < n; ++i) (in0[i] ? idx0 : idx1).push_back(i);
    int n0 = int(idx0.size()), n1 = int(idx1.size());

    auto pick = [&](const std::vector<int>& r, const std::vector<int>& c) {
        Eigen::MatrixXcd M(r.size(), c.size());
        for (std::size_t i = 0; i < r.size(); ++i)
            for (std::size_t j = 0; j < c.size(); ++j) M(i, j) = L(r[i], c[j]);
        return M;
    };
    Eigen::MatrixXcd L00 = pick(idx0, idx0), L01 = pick(idx0, idx1);
    Eigen::MatrixXcd L10 = pick(idx1, idx0), L11 = pick(idx1, idx1);

    Eigen::FullPivLU<Eigen::MatrixXcd> lu00(L00);
    if (!lu00.isInvertible())
        throw std::invalid_argument("feshbach_invert: L00 is singular");
    Eigen::MatrixXcd L00i = lu00.inverse();
    Eigen::MatrixXcd C = L11 - L10 * L00i * L01;
    Eigen::FullPivLU<Eigen::MatrixXcd> luc(C);
    if (!luc.isInvertible())
        throw FeshbachError("feshbach_invert: L is singular (Schur complement)");
    Eigen::MatrixXcd Ci = luc.inverse();

    Eigen::MatrixXcd B00 = L00i + L00i * L01 * Ci * L10 * L00i;
    Eigen::MatrixXcd B01 = -L00i * L01 * Ci;
    Eigen::MatrixXcd B10 = -Ci * L10 * L00i;

    Eigen::MatrixXcd out(n, n);
    for (int i = 0; i < n0; ++i)
        for (int j = 0; j < n0; ++j) out(idx0[i], idx0[j]) = B00(i, j);
    for (int i = 0; i < n0; ++i)
        for (int j = 0; j < n1; ++j) out(idx0[i], idx1[j]) = B01(i, j);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n0; ++j) out(idx1[i], idx0[j]) = B10(i, j);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n1; ++j) out(idx1[i], idx1[j]) = Ci(i, j);
    return out;
}

AgmonFit agmon_fit(const Eigenpair& pair, double r_lo, double r_hi) {
    if (pair.value >= 0)
        throw std::invalid_argument("agmon_fit needs a negative eigenvalue");
    const Grid3D& g = pair.state.grid;
    if (r_lo <= 0) r_lo = 2.0;
    if (r_hi <= 0) r_hi = 0.40 * g.box_length;

    double h = g.h();
    int nbins = int((r_hi - r_lo) / h);
    std::vector<double> sum(nbins, 0.0);
    std::vector<int> cnt(nbins, 0);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                double r = g.point(i, j, k).norm();
                int bin = int((r - r_lo) / h);
                if (bin < 0 || bin >= nbins) continue;
                sum[bin] += std::abs(pair.state.at(i, j, k));
                cnt[bin]++;
            }
    std::vector<double> xs, ys;
    for (int b = 0; b < nbins; ++b) {
        if (cnt[b] == 0) continue;
        double avg = sum[b] / cnt[b];
        if (avg <= 1e-14) continue;
        xs.push_back(r_lo + (b + 0.5) * h);
        ys.push_back(std::log(avg));
    }
    AgmonFit fit;
    fit.reference_lambda = std::sqrt(-pair.value);
    if (xs.size() < 4) return fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double nn = double(xs.size());
    double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    fit.fitted_rate = -slope;
    fit.reliable = fit.fitted_rate > 0;
    return fit;
}

namespace {

// right-preconditioned BiCGStab for (H - lambda^2) x = b
std::vector<cplx> solve_shifted(const HamiltonianOperator& H, cplx lambda2,
                                const std::vector<cplx>& b, double tol, int maxit) {
    const Grid3D& g = H.grid();
    const Fft3& fft = fft_for(g.n);
    std::vector<double> k2(g.size());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                int m[3] = {i <= g.n / 2 ? i : i - g.n, j <= g.n / 2 ? j : j - g.n,
                            k <= g.n / 2 ? k : k - g.n};
                double kx = 2 * M_PI / g.box_length;
                k2[g.idx(i, j, k)] = kx * kx * (double(m[0]) * m[0] +
                                                double(m[1]) * m[1] +
                                                double(m[2]) * m[2]);
            }
    auto op = [&](const std::vector<cplx>& v) {
        std::vector<cplx> pre = v, out;
        fft.forward(pre);
        for (std::size_t q = 0; q < pre.size(); ++q) pre[q] /= (k2[q] - lambda2);
        fft.backward(pre);
        H.apply(pre, out);
        for (std::size_t q = 0; q < out.size(); ++q) out[q] -= lambda2 * pre[q];
        return std::pair{out, pre};
    };

    std::vector<cplx> x(g.size(), cplx{});  // in preconditioned variables
    std::vector<cplx> r = b;
    std::vector<cplx> rhat = r, p = r, v(g.size()), s, t;
    cplx rho{1, 0}, alpha{1, 0}, omega{1, 0};
    cplx rho1 = vdot(rhat, r);
    double bnorm = vnorm(b);
    for (int it = 0; it < maxit; ++it) {
        auto [Ap, _p] = op(p);
        v = Ap;
        alpha = rho1 / vdot(rhat, v);
        s = r;
        for (std::size_t q = 0; q < s.size(); ++q) s[q] -= alpha * v[q];
        if (vnorm(s) < tol * bnorm) {
            for (std::size_t q = 0; q < x.size(); ++q) x[q] += alpha * p[q];
            break;
        }
        auto [As, _s] = op(s);
        t = As;
        omega = vdot(t, s) / vdot(t, t);
        for (std::size_t q = 0; q < x.size(); ++q)
            x[q] += alpha * p[q] + omega * s[q];
        r = s;
        for (std::size_t q = 0; q < r.size(); ++q) r[q] -= omega * t[q];
        if (vnorm(r) < tol * bnorm) break;
        rho = rho1;
        rho1 = vdot(rhat, r);
        cplx beta = (rho1 / rho) * (alpha / omega);
        for (std::size_t q = 0; q < p.size(); ++q)
            p[q] = r[q] + beta * (p[q] - omega * v[q]);
    }
    // undo the right preconditioner
    fft.forward(x);
    for (std::size_t q = 0; q < x.size(); ++q) x[q] /= (k2[q] - lambda2);
    fft.backward(x);
    return x;
}

}  // namespace

double resolvent_series_check(const Grid3D& grid, const PotentialSpec& A,
                              const PotentialSpec& V, cplx lambda, int probes,
                              unsigned seed) {
    cplx lambda2 = lambda * lambda;
    HamiltonianOperator H(grid, A, V);
    if (std::abs(lambda2.imag()) < 1e-9) {
        SpectrumReport rep = eigensolve(H, 6);
        for (const auto& p : rep.pairs)
            if (std::abs(lambda2.real() - p.value) <
                1e-6 * std::max(1.0, std::abs(p.value)))
                throw OnSpectrumError("lambda^2 is an eigenvalue of H");
        if (lambda2.real() >= 0)
            throw OnSpectrumError("lambda^2 on the continuous spectrum");
    }

    const Fft3& fft = fft_for(grid.n);
    std::vector<double> k2(grid.size());
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j)
            for (int k = 0; k < grid.n; ++k) {
                int m[3] = {i <= grid.n / 2 ? i : i - grid.n,
                            j <= grid.n / 2 ? j : j - grid.n,
                            k <= grid.n / 2 ? k : k - grid.n};
                double kx = 2 * M_PI / grid.box_length;
                k2[grid.idx(i, j, k)] = kx * kx * (double(m[0]) * m[0] +
                                                   double(m[1]) * m[1] +
                                                   double(m[2]) * m[2]);
            }
    auto r0 = [&](std::vector<cplx> v) {
        fft.forward(v);
        for (std::size_t q = 0; q < v.size(); ++q) v[q] /= (k2[q] - lambda2);
        fft.backward(v);
        return v;
    };
    auto K = [&](const std::vector<cplx>& v) {
        // R0 U R0 U v
        std::vector<cplx> u1;
        H.apply_u(v, u1);
        auto w = r0(std::move(u1));
        std::vector<cplx> u2;
        H.apply_u(w, u2);
        return r0(std::move(u2));
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    double worst = 0;
    for (int pr = 0; pr < probes; ++pr) {
        std::vector<cplx> b(grid.size());
        // smooth random probe: low-pass filtered noise
        for (auto& v : b) v = cplx{gauss(rng), gauss(rng)};
        fft.forward(b);
        for (std::size_t q = 0; q < b.size(); ++q)
            b[q] *= std::exp(-k2[q] / 4.0);
        fft.backward(b);

        // series side: (I - K)^{-1} (R0 - R0 U R0) b
        std::vector<cplx> u1;
        auto r0b = r0(b);
        H.apply_u(r0b, u1);
        auto r0ur0b = r0(std::move(u1));
        std::vector<cplx> y(grid.size());
        for (std::size_t q = 0; q < y.size(); ++q) y[q] = r0b[q] - r0ur0b[q];

        std::vector<cplx> x = y, term = y;
        double y0 = vnorm(y);
        double prev = y0;
        for (int n = 1; n <= 400; ++n) {
            term = K(term);
            double tn = vnorm(term);
            if (tn > 2 * prev && n > 4)
                throw NotContractive("resolvent series does not contract");
            for (std::size_t q = 0; q < x.size(); ++q) x[q] += term[q];
            if (tn < 1e-12 * y0) break;
            prev = tn;
        }

        auto xs = solve_shifted(H, lambda2, b, 1e-11, 600);
        double num = 0, den = 0;
        for (std::size_t q = 0; q < x.size(); ++q) {
            num += std::norm(x[q] - xs[q]);
            den += std::norm(xs[q]);
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    return worst;
}

}  // namespace magdecay
