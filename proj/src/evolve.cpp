#include "magdecay/evolve.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>

#include "magdecay/fft3.hpp"

namespace magdecay {

namespace {

const cplx kI{0, 1};

// one Lanczos-exponential step: f <- exp(i dt H) f
void krylov_step(const HamiltonianOperator& H, std::vector<cplx>& f, double dt,
                 double tol, int max_dim) {
    double beta0 = 0;
    for (const auto& v : f) beta0 += std::norm(v);
    beta0 = std::sqrt(beta0);
    if (beta0 == 0) return;

    std::vector<std::vector<cplx>> V;
    std::vector<double> alpha, beta;
    V.push_back(f);
    for (auto& v : V[0]) v /= beta0;

    std::vector<cplx> w;
    for (int j = 0; j < max_dim; ++j) {
        H.apply(V[j], w);
        cplx a{};
        for (std::size_t q = 0; q < w.size(); ++q)
            a += std::conj(V[j][q]) * w[q];
        alpha.push_back(a.real());
        for (std::size_t q = 0; q < w.size(); ++q) w[q] -= a.real() * V[j][q];
        if (j > 0)
            for (std::size_t q = 0; q < w.size(); ++q)
                w[q] -= beta[j - 1] * V[j - 1][q];
        // full reorthogonalization (cheap relative to the applies)
        for (int r = 0; r <= j; ++r) {
            cplx c{};
            for (std::size_t q = 0; q < w.size(); ++q)
                c += std::conj(V[r][q]) * w[q];
            for (std::size_t q = 0; q < w.size(); ++q) w[q] -= c * V[r][q];
        }
        double b = 0;
        for (const auto& v : w) b += std::norm(v);
        b = std::sqrt(b);

        int m = j + 1;
        // exp of the tridiagonal block
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(m);
        e1(0) = 1;
        Eigen::VectorXcd y =
            es.eigenvectors() *
            ((es.eigenvalues().array() * dt).unaryExpr([](double x) {
                return std::exp(cplx{0, 1} * x);
            }).matrix().asDiagonal() *
             (es.eigenvectors().transpose() * e1));

        double err = (m > 1) ? std::abs(b * std::abs(y(m - 1)) * dt) : 1.0;
        if (err < tol || b < 1e-14 || j + 1 == max_dim) {
            std::vector<cplx> out(f.size(), cplx{});
            for (int i = 0; i < m; ++i) {
                cplx c = beta0 * y(i);
                for (std::size_t q = 0; q < out.size(); ++q)
                    out[q] += c * V[i][q];
            }
            f = std::move(out);
            return;
        }
        beta.push_back(b);
        for (auto& v : w) v /= b;
        V.push_back(w);
    }
}

double shell_mass_fraction(const ScalarField& f, int cells) {
    const Grid3D& g = f.grid;
    double shell = 0, total = 0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                double w = std::norm(f.at(i, j, k));
                total += w;
                int d = std::min({i, j, k, g.n - 1 - i, g.n - 1 - j, g.n - 1 - k});
                if (d < cells) shell += w;
            }
    return total > 0 ? shell / total : 0.0;
}

}  // namespace

PropagateResult propagate(const HamiltonianOperator& H, const ScalarField& f0,
                          const std::vector<double>& t_grid,
                          const PropagateOptions& opt) {
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (t_grid[i] <= t_grid[i - 1])
            throw std::invalid_argument("t_grid must be strictly increasing");

    PropagateResult res;
    ScalarField f = f0;
    double t = 0;
    for (double target : t_grid) {
        while (t < target - 1e-12) {
            double dt = std::min(opt.max_step, target - t);
            krylov_step(H, f.values, dt, opt.krylov_tol, opt.krylov_max_dim);
            t += dt;
        }
        double shell = shell_mass_fraction(f, opt.shell_cells);
        if (shell > opt.shell_mass_limit) {
            res.truncated = true;
            res.breach_time = target;
            break;
        }
        res.times.push_back(target);
        res.sup_norms.push_back(f.norm_linf());
        res.l2_norms.push_back(f.norm_l2());
        res.boundary_mass.push_back(shell);
        if (opt.keep_snapshots) res.snapshots.push_back(f);
    }
    return res;
}

DecayFit decay_fit_series(const std::vector<double>& times,
                          const std::vector<double>& sup_norms, double window_lo,
                          double window_hi, double l1_norm) {
    DecayFit fit;
    fit.times = times;
    fit.sup_norms = sup_norms;
    fit.window_lo = window_lo;
    fit.window_hi = window_hi;
    std::vector<double> xs, ys;
    double last_t = 0, last_v = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < window_lo - 1e-12 || times[i] > window_hi + 1e-12) continue;
        if (sup_norms[i] <= 0) continue;
        xs.push_back(std::log(times[i]));
        ys.push_back(std::log(sup_norms[i]));
        last_t = times[i];
        last_v = sup_norms[i];
    }
    if (xs.size() < 2) throw std::invalid_argument("decay window has < 2 samples");
    fit.fit_lo = std::exp(xs.front());
    fit.fit_hi = std::exp(xs.back());
    double n = double(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double denom = n * sxx - sx * sx;
    fit.exponent = (n * sxy - sx * sy) / denom;
    double ss = 0;
    double intercept = (sy - fit.exponent * sx) / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double e = ys[i] - (intercept + fit.exponent * xs[i]);
        ss += e * e;
    }
    fit.exponent_stderr =
        (n > 2) ? std::sqrt(ss / (n - 2) / (sxx - sx * sx / n)) : 0.0;
    if (l1_norm > 0 && last_t > 0)
        fit.amplitude_ratio =
            last_v * std::pow(4.0 * M_PI * last_t, 1.5) / l1_norm;
    return fit;
}

DecayFit decay_experiment(const HamiltonianOperator& H, const SpectrumReport& report,
                          const ScalarField& f0, double window_lo, double window_hi,
                          double dt_sample, const PropagateOptions& opt) {
    ScalarField g = pac_apply(report, f0);
    std::vector<double> t_grid;
    for (double t = window_lo; t <= window_hi + 1e-9; t += dt_sample)
        t_grid.push_back(t);
    PropagateResult pr = propagate(H, g, t_grid, opt);
    if (pr.times.size() < 2)
        throw std::runtime_error("decay experiment: window fully truncated");
    DecayFit fit = decay_fit_series(pr.times, pr.sup_norms, window_lo, window_hi,
                                    g.norm_l1());
    fit.truncated = pr.truncated;
    fit.breach_time = pr.breach_time;
    return fit;
}

namespace {

void trace_integrals(WaveKernelTrace& tr) {
    double dt = tr.times.size() > 1 ? tr.times[1] - tr.times[0] : 0;
    tr.i1 = tr.i2 = 0;
    tr.peak = 0;
    tr.quiet_sup = 0;
    double half = tr.times.empty() ? 0 : tr.times.back() / 2;
    tr.i1_tail_first = tr.i1_tail_second = 0;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        double t = tr.times[i], v = tr.k_values[i];
        double w = dt * ((i == 0 || i + 1 == tr.times.size()) ? 0.5 : 1.0);
        tr.i2 += v * w;
        tr.i1 += t * v * w;
        if (t > half * 1.0 && t <= half * 1.5) tr.i1_tail_first += t * v * w;
        if (t > half * 1.5) tr.i1_tail_second += t * v * w;
        tr.peak = std::max(tr.peak, v);
        if (t < 0.9 * tr.dist)
            tr.quiet_sup = std::max(tr.quiet_sup, tr.k_full_values[i]);
    }
}

}  // namespace

WaveKernelTrace wave_sine_kernel_free(const Grid3D& grid, const Vec3& x, const Vec3& y,
                                      const WaveOptions& opt) {
    WaveKernelTrace tr;
    tr.x = x;
    tr.y = y;
    Vec3 d = x - y;
    tr.dist = d.norm();

    double ximax = M_PI * grid.n / grid.box_length;
    double lam_c = opt.smoothing > 0 ? opt.smoothing : ximax / 2.70;
    double sigma_t = 1.0 / lam_c;
    double tmax = opt.t_max > 0 ? opt.t_max : 1.15 * tr.dist + 8 * sigma_t;

    // direct lattice sum over modes, grouped by |xi| and xi.d
    const int n = grid.n;
    std::vector<double> knorm, kdot, weight;
    std::map<std::pair<long long, long long>, double> groups;
    // (an ordered map keeps the accumulation deterministic)
    double kx = 2 * M_PI / grid.box_length;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                int m[3] = {i <= n / 2 ? i : i - n, j <= n / 2 ? j : j - n,
                            k <= n / 2 ? k : k - n};
                double q2 = kx * kx * (double(m[0]) * m[0] + double(m[1]) * m[1] +
                                       double(m[2]) * m[2]);
                double qd = kx * (m[0] * d.x + m[1] * d.y + m[2] * d.z);
                long long key1 = llround(q2 * 1e9);
                long long key2 = llround(qd * 1e9);
                groups[{key1, key2}] += 1.0;
            }
    knorm.reserve(groups.size());
    for (const auto& [key, w] : groups) {
        knorm.push_back(std::sqrt(double(key.first) * 1e-9));
        kdot.push_back(double(key.second) * 1e-9);
        weight.push_back(w);
    }

    double vol = std::pow(grid.box_length, 3);
    int n_t = opt.n_t;
    for (int it = 0; it <= n_t; ++it) {
        double t = tmax * it / n_t;
        double acc_re = 0;
        for (std::size_t q = 0; q < knorm.size(); ++q) {
            double kn = knorm[q];
            double damp = std::exp(-(kn * kn) / (lam_c * lam_c));
            double s = (kn > 0) ? std::sin(t * kn) / kn : t;
            acc_re += weight[q] * damp * s * std::cos(kdot[q]);
        }
        double val = acc_re / vol;
        tr.times.push_back(t);
        tr.k_values.push_back(std::abs(val));
        tr.k_full_values.push_back(std::abs(val));
    }
    trace_integrals(tr);
    return tr;
}

DenseWaveCalculus::DenseWaveCalculus(const HamiltonianOperator& H, double zero_tol)
    : grid_(H.grid()), zero_tol_(zero_tol) {
    if (grid_.n > 16)
        throw std::invalid_argument("dense wave path needs n <= 16");
    const int N = int(grid_.size());
    Eigen::MatrixXcd M(N, N);
    std::vector<cplx> e(N, cplx{}), col;
    for (int j = 0; j < N; ++j) {
        e[j] = 1.0;
        H.apply(e, col);
        for (int i = 0; i < N; ++i) M(i, j) = col[i];
        e[j] = 0.0;
    }
    evals_.resize(N);
    if (!H.has_magnetic()) {
        // real symmetric path (V-only Hamiltonians)
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M.real());
        for (int i = 0; i < N; ++i) evals_[i] = es.eigenvalues()(i);
        evecs_ = es.eigenvectors().cast<cplx>();
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
        for (int i = 0; i < N; ++i) evals_[i] = es.eigenvalues()(i);
        evecs_ = es.eigenvectors();
    }
    for (double v : evals_)
        if (v < -zero_tol_) ++negatives_;
}

int DenseWaveCalculus::nearest_index(const Vec3& p) const {
    double h = grid_.h();
    auto clampi = [&](double c) {
        int i = int(std::lround((c + grid_.box_length / 2) / h));
        return std::clamp(i, 0, grid_.n - 1);
    };
    return int(grid_.idx(clampi(p.x), clampi(p.y), clampi(p.z)));
}

WaveKernelTrace DenseWaveCalculus::trace(const Vec3& x, const Vec3& y,
                                         const WaveOptions& opt) const {
    WaveKernelTrace tr;
    tr.x = x;
    tr.y = y;
    tr.dist = (x - y).norm();
    int ix = nearest_index(x), iy = nearest_index(y);

    double ximax = M_PI * grid_.n / grid_.box_length;
    double lam_c = opt.smoothing > 0 ? opt.smoothing : ximax / 2.70;
    double sigma_t = 1.0 / lam_c;
    double tmax = opt.t_max > 0 ? opt.t_max : 1.15 * tr.dist + 8 * sigma_t;
    // normalization: eigenvectors are l2-orthonormal; kernel needs L2
    double h3 = grid_.cell_volume();

    int n_t = opt.n_t;
    for (int it = 0; it <= n_t; ++it) {
        double t = tmax * it / n_t;
        cplx ac{}, full{};
        for (std::size_t q = 0; q < evals_.size(); ++q) {
            double E = evals_[q];
            cplx phi = evecs_(ix, q) * std::conj(evecs_(iy, q)) / h3;
            if (E < -zero_tol_) {
                double lam = std::sqrt(-E);
                full += std::sinh(t * lam) / lam * phi;
                continue;
            }
            double damp = std::exp(-std::max(E, 0.0) / (lam_c * lam_c));
            double s;
            if (E <= zero_tol_) {
                s = t;
            } else {
                double se = std::sqrt(E);
                s = std::sin(t * se) / se;
            }
            ac += damp * s * phi;
            full += damp * s * phi;
        }
        tr.times.push_back(t);
        tr.k_values.push_back(std::abs(ac));
        tr.k_full_values.push_back(std::abs(full));
    }
    trace_integrals(tr);
    return tr;
}

WaveBoundReport wave_bound_checks(const std::vector<WaveKernelTrace>& traces) {
    WaveBoundReport rep;
    rep.traces = traces;
    bool first = true;
    for (const auto& tr : traces) {
        double scaled = tr.i2 * 4.0 * M_PI * tr.dist;
        if (first) {
            rep.max_i2_scaled = rep.min_i2_scaled = scaled;
            first = false;
        } else {
            rep.max_i2_scaled = std::max(rep.max_i2_scaled, scaled);
            rep.min_i2_scaled = std::min(rep.min_i2_scaled, scaled);
        }
        if (tr.peak > 0)
            rep.max_quiet_rel = std::max(rep.max_quiet_rel, tr.quiet_sup / tr.peak);
        if (tr.i1_tail_second > tr.i1_tail_first && tr.i1_tail_first > 0)
            rep.i1_tail_decaying = false;
    }
    return rep;
}

}  // namespace magdecay
