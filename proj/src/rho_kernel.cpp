#include "magdecay/rho_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>

#include <nlohmann/json.hpp>

namespace magdecay {

bool SpatialCloud::matches(const SpatialCloud& o) const {
    if (points.size() != o.points.size()) return false;
    for (std::size_t i = 0; i < points.size(); ++i)
        if ((points[i] - o.points[i]).norm() > 1e-12 ||
            std::abs(weights[i] - o.weights[i]) > 1e-12)
            return false;
    return true;
}

SpatialCloud SpatialCloud::lattice(int m, double half) {
    SpatialCloud c;
    double step = 2 * half / m;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k) {
                c.points.push_back({-half + (i + 0.5) * step, -half + (j + 0.5) * step,
                                    -half + (k + 0.5) * step});
                c.weights.push_back(step * step * step);
            }
    return c;
}

SpatialCloud SpatialCloud::single(const Vec3& p) {
    SpatialCloud c;
    c.points.push_back(p);
    c.weights.push_back(1.0);
    return c;
}

RhoKernel RhoKernel::regular_uniform(double rho_max, int n_rho,
                                     const SpatialCloud& out, const SpatialCloud& in) {
    RhoKernel k;
    k.drho = rho_max / n_rho;
    k.uniform = true;
    k.out_cloud = out;
    k.in_cloud = in;
    for (int i = 0; i < n_rho; ++i) {
        k.rho_nodes.push_back(i * k.drho);
        k.rho_weights.push_back(k.drho);
        k.values.emplace_back(out.size(), in.size());
    }
    return k;
}

bool RhoKernel::finite() const {
    auto ok = [](const KernelMatrix& m) {
        for (const auto& v : m.a)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    };
    for (const auto& m : values)
        if (!ok(m)) return false;
    for (const auto& at : atoms)
        if (!ok(at.kernel)) return false;
    return true;
}

namespace {

KernelMatrix weighted_product(const KernelMatrix& a, const std::vector<double>& wy,
                              const KernelMatrix& b) {
    KernelMatrix r(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            cplx aik = a.at(i, k) * wy[k];
            if (aik == cplx{}) continue;
            for (int j = 0; j < b.cols; ++j) r.at(i, j) += aik * b.at(k, j);
        }
    return r;
}

int node_index(const RhoKernel& k, double rho) {
    double raw = rho / k.drho;
    int idx = int(std::lround(raw));
    if (std::abs(raw - idx) > 1e-9)
        throw GridMismatch("atomic rho0 is not on the rho grid");
    return idx;
}

}  // namespace

RhoKernel compose(const RhoKernel& T, const RhoKernel& S) {
    if (!T.uniform || !S.uniform || std::abs(T.drho - S.drho) > 1e-14)
        throw GridMismatch("compose requires matching uniform rho grids");
    if (!T.in_cloud.matches(S.out_cloud))
        throw GridMismatch("compose requires T.in == S.out clouds");
    for (const auto& at : T.atoms)
        if (at.order > 0) throw GridMismatch("cannot compose derivative atoms");
    for (const auto& at : S.atoms)
        if (at.order > 0) throw GridMismatch("cannot compose derivative atoms");

    int n = int(std::max(T.values.size(), S.values.size()));
    RhoKernel R = RhoKernel::regular_uniform(n * T.drho, n, T.out_cloud, S.in_cloud);
    const auto& wy = T.in_cloud.weights;

    // regular x regular
    int nt = int(T.values.size()), ns = int(S.values.size());
    for (int k = 0; k < n; ++k) {
        KernelMatrix& out = R.values[k];
        for (int j = 0; j <= k; ++j) {
            if (j >= nt || (k - j) >= ns) continue;
            KernelMatrix p = weighted_product(T.values[j], wy, S.values[k - j]);
            for (std::size_t q = 0; q < out.a.size(); ++q)
                out.a[q] += p.a[q] * T.drho;
        }
    }
    // atoms x regular and regular x atoms (exact shifts)
    for (const auto& at : T.atoms) {
        int shift = node_index(T, at.rho0);
        for (int j = 0; j + shift < n && j < ns; ++j) {
            KernelMatrix p = weighted_product(at.kernel, wy, S.values[j]);
            for (std::size_t q = 0; q < p.a.size(); ++q)
                R.values[j + shift].a[q] += p.a[q];
        }
    }
    for (const auto& at : S.atoms) {
        int shift = node_index(S, at.rho0);
        for (int j = 0; j + shift < n && j < nt; ++j) {
            KernelMatrix p = weighted_product(T.values[j], wy, at.kernel);
            for (std::size_t q = 0; q < p.a.size(); ++q)
                R.values[j + shift].a[q] += p.a[q];
        }
    }
    // atoms x atoms
    for (const auto& a1 : T.atoms)
        for (const auto& a2 : S.atoms) {
            AtomicComponent at;
            at.rho0 = a1.rho0 + a2.rho0;
            at.order = 0;
            at.kernel = weighted_product(a1.kernel, wy, a2.kernel);
            if (at.rho0 <= R.rho_max() + 1e-12) R.atoms.push_back(at);
        }
    return R;
}

namespace {

// merge Dirac components sharing (rho0, order) so cancellations are seen
std::vector<AtomicComponent> consolidated_atoms(const RhoKernel& T) {
    std::vector<AtomicComponent> out;
    for (const auto& at : T.atoms) {
        bool merged = false;
        for (auto& o : out)
            if (o.order == at.order && std::abs(o.rho0 - at.rho0) < 1e-12) {
                for (std::size_t q = 0; q < o.kernel.a.size(); ++q)
                    o.kernel.a[q] += at.kernel.a[q];
                merged = true;
                break;
            }
        if (!merged) out.push_back(at);
    }
    return out;
}

// M(z,x) = int |T(rho,z,x)| drho (+ |atom kernels|)
KernelMatrix abs_mass(const RhoKernel& T, bool include_atoms) {
    KernelMatrix M(T.out_cloud.size(), T.in_cloud.size());
    for (std::size_t k = 0; k < T.values.size(); ++k)
        for (std::size_t q = 0; q < M.a.size(); ++q)
            M.a[q] += std::abs(T.values[k].a[q]) * T.rho_weights[k];
    if (include_atoms)
        for (const auto& at : consolidated_atoms(T)) {
            if (at.order > 0)
                throw std::invalid_argument(
                    "u_norm: derivative atom is not a measure in rho");
            for (std::size_t q = 0; q < M.a.size(); ++q)
                M.a[q] += std::abs(at.kernel.a[q]);
        }
    return M;
}

double op_norm_from_mass(const KernelMatrix& M, const RhoKernel& T, OpSpace in,
                         OpSpace out) {
    const auto& zs = T.out_cloud;
    const auto& xs = T.in_cloud;
    if (in == OpSpace::L1 && out == OpSpace::LINF) {
        double m = 0;
        for (const auto& v : M.a) m = std::max(m, std::abs(v));
        return m;
    }
    if (in == OpSpace::LINF && out == OpSpace::LINF) {
        double m = 0;
        for (int i = 0; i < M.rows; ++i) {
            double row = 0;
            for (int j = 0; j < M.cols; ++j) row += std::abs(M.at(i, j)) * xs.weights[j];
            m = std::max(m, row);
        }
        return m;
    }
    if (in == OpSpace::K && out == OpSpace::LINF) {
        // surrogate K* norm of each row: min_x0 sup_x |M(z,x)| |x - x0|
        double m = 0;
        for (int i = 0; i < M.rows; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int c = 0; c < xs.size(); ++c) {
                double sup = 0;
                for (int j = 0; j < M.cols; ++j)
                    sup = std::max(sup, std::abs(M.at(i, j)) *
                                            (xs.points[j] - xs.points[c]).norm());
                best = std::min(best, sup);
            }
            m = std::max(m, best);
        }
        return m;
    }
    if (in == OpSpace::L1 && out == OpSpace::KSTAR_SURR) {
        double m = 0;
        for (int j = 0; j < M.cols; ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (int c = 0; c < zs.size(); ++c) {
                double sup = 0;
                for (int i = 0; i < M.rows; ++i)
                    sup = std::max(sup, std::abs(M.at(i, j)) *
                                            (zs.points[i] - zs.points[c]).norm());
                best = std::min(best, sup);
            }
            m = std::max(m, best);
        }
        return m;
    }
    throw std::invalid_argument("unsupported u_norm space pair");
}

}  // namespace

double u_norm(const RhoKernel& T, OpSpace in, OpSpace out) {
    return op_norm_from_mass(abs_mass(T, true), T, in, out);
}

double u_norm_regular(const RhoKernel& T, OpSpace in, OpSpace out) {
    return op_norm_from_mass(abs_mass(T, false), T, in, out);
}

KernelMatrix hat(const RhoKernel& T, double lambda) {
    KernelMatrix M(T.out_cloud.size(), T.in_cloud.size());
    const cplx I{0, 1};
    for (std::size_t k = 0; k < T.values.size(); ++k) {
        cplx ph = std::exp(I * lambda * T.rho_nodes[k]) * T.rho_weights[k];
        for (std::size_t q = 0; q < M.a.size(); ++q) M.a[q] += ph * T.values[k].a[q];
    }
    for (const auto& at : T.atoms) {
        cplx ph = std::exp(I * lambda * at.rho0);
        if (at.order == 1) ph *= -I * lambda;
        for (std::size_t q = 0; q < M.a.size(); ++q) M.a[q] += ph * at.kernel.a[q];
    }
    return M;
}

WienerDiagnostics wiener_diagnostics(const RhoKernel& T) {
    WienerDiagnostics d;
    if (!T.uniform || T.values.empty()) return d;
    int n = int(T.values.size());
    for (int mult : {1, 2, 4}) {
        RhoKernel diff = T;
        for (auto& at : diff.atoms) at.rho0 += mult * T.drho;
        for (int k = 0; k < n; ++k) {
            const KernelMatrix& shifted =
                (k - mult >= 0) ? T.values[k - mult] : KernelMatrix(T.out_cloud.size(),
                                                                    T.in_cloud.size());
            for (std::size_t q = 0; q < diff.values[k].a.size(); ++q)
                diff.values[k].a[q] = shifted.a[q] - T.values[k].a[q];
        }
        // shifted atoms that moved off-grid are measured separately below;
        // for the diagnostic both copies contribute their full mass
        double norm = u_norm_regular(diff, OpSpace::LINF, OpSpace::LINF);
        d.continuity.emplace_back(mult * T.drho, norm);
    }
    for (int frac = 1; frac <= 4; ++frac) {
        double R = T.rho_max() * frac / 4.0;
        RhoKernel tail = T;
        for (int k = 0; k < n; ++k)
            if (T.rho_nodes[k] < R)
                for (auto& v : tail.values[k].a) v = 0;
        tail.atoms.clear();
        for (const auto& at : T.atoms)
            if (at.rho0 >= R) tail.atoms.push_back(at);
        double norm = u_norm(tail, OpSpace::LINF, OpSpace::LINF);
        d.tail.emplace_back(R, norm);
    }
    return d;
}

RhoKernel invert_neumann(const RhoKernel& T, double term_tol) {
    double q = u_norm(T, OpSpace::LINF, OpSpace::LINF);
    if (!(q < 1.0))
        throw NotContractive("invert_neumann requires u_norm < 1, got " +
                             std::to_string(q));
    RhoKernel power = T;
    RhoKernel S = T;
    for (auto& m : S.values)
        for (auto& v : m.a) v = -v;
    for (auto& at : S.atoms)
        for (auto& v : at.kernel.a) v = -v;
    double sign = 1.0;
    for (int n = 2; n <= 200; ++n) {
        power = compose(power, T);
        double pn = u_norm(power, OpSpace::LINF, OpSpace::LINF);
        for (std::size_t k = 0; k < power.values.size(); ++k)
            for (std::size_t qq = 0; qq < power.values[k].a.size(); ++qq)
                S.values[k].a[qq] += sign * power.values[k].a[qq];
        for (const auto& at : power.atoms) {
            AtomicComponent copy = at;
            for (auto& v : copy.kernel.a) v *= sign;
            S.atoms.push_back(copy);
        }
        if (pn < term_tol) break;
        sign = -sign;
    }
    return S;
}

RhoKernel neumann_residual(const RhoKernel& T, const RhoKernel& S) {
    RhoKernel TS = compose(T, S);
    RhoKernel R = TS;
    auto add = [&](const RhoKernel& k) {
        for (std::size_t i = 0; i < k.values.size() && i < R.values.size(); ++i)
            for (std::size_t q = 0; q < k.values[i].a.size(); ++q)
                R.values[i].a[q] += k.values[i].a[q];
        for (const auto& at : k.atoms) R.atoms.push_back(at);
    };
    add(T);
    add(S);
    return R;
}

void save_rho_kernel(const RhoKernel& T, const std::string& path) {
    nlohmann::json header;
    header["rho_max"] = T.rho_max();
    header["n_rho"] = T.rho_nodes.size();
    header["uniform"] = T.uniform;
    header["rho_nodes"] = T.rho_nodes;
    header["rho_weights"] = T.rho_weights;
    auto cloud = [](const SpatialCloud& c) {
        nlohmann::json j;
        for (int i = 0; i < c.size(); ++i)
            j.push_back({c.points[i].x, c.points[i].y, c.points[i].z, c.weights[i]});
        return j;
    };
    header["out_cloud"] = cloud(T.out_cloud);
    header["in_cloud"] = cloud(T.in_cloud);
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& at : T.atoms)
        atoms.push_back({{"rho0", at.rho0}, {"order", at.order}});
    header["atomic"] = atoms;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    std::string h = header.dump();
    uint64_t hlen = h.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
    out.write(h.data(), std::streamsize(h.size()));
    auto dump_matrix = [&](const KernelMatrix& m) {
        out.write(reinterpret_cast<const char*>(m.a.data()),
                  std::streamsize(m.a.size() * sizeof(cplx)));
    };
    for (const auto& m : T.values) dump_matrix(m);
    for (const auto& at : T.atoms) dump_matrix(at.kernel);
}

RhoKernel load_rho_kernel(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
    std::string h(hlen, '\0');
    in.read(h.data(), std::streamsize(hlen));
    nlohmann::json header = nlohmann::json::parse(h);

    RhoKernel T;
    T.uniform = header["uniform"].get<bool>();
    T.rho_nodes = header["rho_nodes"].get<std::vector<double>>();
    T.rho_weights = header["rho_weights"].get<std::vector<double>>();
    if (T.rho_nodes.size() >= 2) T.drho = T.rho_nodes[1] - T.rho_nodes[0];
    auto cloud = [](const nlohmann::json& j) {
        SpatialCloud c;
        for (const auto& row : j) {
            c.points.push_back({row[0].get<double>(), row[1].get<double>(),
                                row[2].get<double>()});
            c.weights.push_back(row[3].get<double>());
        }
        return c;
    };
    T.out_cloud = cloud(header["out_cloud"]);
    T.in_cloud = cloud(header["in_cloud"]);
    auto read_matrix = [&]() {
        KernelMatrix m(T.out_cloud.size(), T.in_cloud.size());
        in.read(reinterpret_cast<char*>(m.a.data()),
                std::streamsize(m.a.size() * sizeof(cplx)));
        return m;
    };
    for (std::size_t k = 0; k < T.rho_nodes.size(); ++k) T.values.push_back(read_matrix());
    for (const auto& aj : header["atomic"]) {
        AtomicComponent at;
        at.rho0 = aj["rho0"].get<double>();
        at.order = aj["order"].get<int>();
        at.kernel = read_matrix();
        T.atoms.push_back(at);
    }
    return T;
}

}  // namespace magdecay
