#include "magdecay/assembly.hpp"

#include <cmath>

#include "magdecay/norms.hpp"

namespace magdecay {

namespace {

constexpr double kPref = 1.0 / (16.0 * M_PI * M_PI);
const cplx kI{0, 1};

enum class Numerator { AA, W, VA, VV };

struct TermSpec {
    cplx coef;       // multiplies (i lambda)^m int e^{i lambda rho} G(rho) drho
    int m;           // 0, 1 or 2
    Numerator num;
    int a, b;        // powers of 1/r1, 1/r2
    double sign;     // sign inside the surface family (C1, D1 carry a minus)
};

std::vector<TermSpec> term_list(TPart part) {
    switch (part) {
        case TPart::T1:
            return {{kPref, 0, Numerator::AA, 3, 3, +1},
                    {-kPref, 1, Numerator::AA, 3, 2, +1},
                    {-kPref, 1, Numerator::AA, 2, 3, +1},
                    {kPref, 2, Numerator::AA, 2, 2, +1}};
        case TPart::TTILDE:
        case TPart::T2:
            return {{kPref, 1, Numerator::W, 2, 1, +1},
                    {-kPref, 0, Numerator::W, 3, 1, +1}};
        case TPart::T3:
            return {{kPref, 1, Numerator::VA, 1, 2, +1},
                    {-kPref, 0, Numerator::VA, 1, 3, +1}};
        case TPart::T4:
            return {{kPref, 0, Numerator::VV, 1, 1, +1}};
        case TPart::T:
            throw std::logic_error("T assembled as a sum of parts");
    }
    return {};
}

std::vector<TermSpec> term_list(DLambdaPart part) {
    switch (part) {
        case DLambdaPart::T11:
            return {{kI * kPref, 2, Numerator::AA, 1, 2, +1},
                    {-kI * kPref, 1, Numerator::AA, 1, 3, +1}};
        case DLambdaPart::T12:
            return {{kI * kPref, 2, Numerator::AA, 2, 1, +1},
                    {-kI * kPref, 1, Numerator::AA, 3, 1, +1}};
        case DLambdaPart::TTILDE1:
            return {{kI * kPref, 1, Numerator::W, 1, 1, +1}};
        case DLambdaPart::TTILDE2:
            return {{kI * kPref, 1, Numerator::W, 2, 0, +1},
                    {-kI * kPref, 0, Numerator::W, 3, 0, +1}};
    }
    return {};
}

/// Numerator value and its first two derivatives along the rho flow.
struct FlowNumerators {
    double w = 0, w1 = 0, w2 = 0;     // r1.A(y)
    double ss = 0, ss1 = 0, ss2 = 0;  // r2.A#(z)
    double vv = 0, vv1 = 0, vv2 = 0;  // V(y)
    double vsharp_z = 0;              // V#(z)

    double value(Numerator n) const {
        switch (n) {
            case Numerator::AA: return w * ss;
            case Numerator::W: return w;
            case Numerator::VA: return vv * ss;
            case Numerator::VV: return vv * vsharp_z;
        }
        return 0;
    }
    double d1(Numerator n) const {
        switch (n) {
            case Numerator::AA: return w1 * ss + w * ss1;
            case Numerator::W: return w1;
            case Numerator::VA: return vv1 * ss + vv * ss1;
            case Numerator::VV: return vv1 * vsharp_z;
        }
        return 0;
    }
    double d2(Numerator n) const {
        switch (n) {
            case Numerator::AA: return w2 * ss + 2 * w1 * ss1 + w * ss2;
            case Numerator::W: return w2;
            case Numerator::VA: return vv2 * ss + 2 * vv1 * ss1 + vv * ss2;
            case Numerator::VV: return vv2 * vsharp_z;
        }
        return 0;
    }
};

struct PointContext {
    const AssemblyPotentials& pots;
    Vec3 x, z;
    Vec3 asharp_z;  // A#(z)
    double vsharp_z;
    bool need_w = false, need_ss = false, need_v = false;

    FlowNumerators numerators(const SurfacePoint& p) const {
        FlowNumerators f;
        f.vsharp_z = vsharp_z;
        Vec3 r1v = x - p.y_world;
        Vec3 r2v = p.y_world - z;
        const Vec3& v = p.v_world;
        const Vec3& dv = p.dv_drho_world;
        if (need_w) {
            for (int k = 0; k < 3; ++k) {
                SecondOrderEval so = pots.A.vector[k].eval_second_order(p.y_world);
                double ak = so.value;
                double ak1 = v.dot(so.grad);  // d A_k / d rho along the flow
                double vhv = 0;
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) vhv += v[i] * so.hess[i][j] * v[j];
                double ak2 = dv.dot(so.grad) + vhv;
                f.w += r1v[k] * ak;
                f.w1 += -v[k] * ak + r1v[k] * ak1;
                f.w2 += -dv[k] * ak - 2 * v[k] * ak1 + r1v[k] * ak2;
            }
        }
        if (need_ss) {
            f.ss = r2v.dot(asharp_z);
            f.ss1 = v.dot(asharp_z);
            f.ss2 = dv.dot(asharp_z);
        }
        if (need_v) {
            SecondOrderEval so = pots.V.scalar.eval_second_order(p.y_world);
            f.vv = so.value;
            f.vv1 = v.dot(so.grad);
            double vhv = 0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) vhv += v[i] * so.hess[i][j] * v[j];
            f.vv2 = dv.dot(so.grad) + vhv;
        }
        return f;
    }
};

PointContext make_context(const AssemblyPotentials& pots, const Vec3& x, const Vec3& z,
                          const std::vector<TermSpec>& terms) {
    PointContext ctx{pots, x, z, {}, 0};
    ctx.asharp_z = pots.Asharp.eval_vector(z);
    ctx.vsharp_z = pots.Vsharp.scalar.eval(z);
    for (const auto& t : terms) {
        if (t.num == Numerator::AA || t.num == Numerator::W) ctx.need_w = true;
        if (t.num == Numerator::AA || t.num == Numerator::VA) ctx.need_ss = true;
        if (t.num == Numerator::VA || t.num == Numerator::VV) ctx.need_v = true;
    }
    return ctx;
}

// value/first/second rho-derivative of Num * r1^-a r2^-b at a surface point
struct FamilyEval {
    double g, g1, g2;
};

FamilyEval family_eval(const TermSpec& t, const FlowNumerators& f,
                       const SurfacePoint& p) {
    double P = std::pow(p.r1, -t.a) * std::pow(p.r2, -t.b);
    double lp = -(t.a / (2 * p.r1) + t.b / (2 * p.r2));
    double lp1 = t.a / (4 * p.r1 * p.r1) + t.b / (4 * p.r2 * p.r2);
    double P1 = P * lp;
    double P2 = P * (lp * lp + lp1);
    double n0 = t.sign * f.value(t.num);
    double n1 = t.sign * f.d1(t.num);
    double n2 = t.sign * f.d2(t.num);
    return {n0 * P, n1 * P + n0 * P1, n2 * P + 2 * n1 * P1 + n0 * P2};
}

// rho panel edges: dyadic toward rho0, then uniform up to rho_max
std::vector<double> rho_panels(double rho0, double r, double rho_max,
                               const AssemblyOptions& opt) {
    std::vector<double> edges{rho0};
    double near_end = std::min(rho_max, std::max(2.5 * r, rho0 * 2) - r + rho0);
    double w = near_end - rho0;
    if (w > 0) {
        int levels = int(std::ceil(std::log10(w / (rho0 - r)) * opt.panels_per_decade));
        levels = std::clamp(levels, 4, 80);
        for (int k = levels - 1; k >= 0; --k)
            edges.push_back(rho0 + w / std::pow(2.0, k));
    }
    double far_start = edges.back();
    for (int i = 1; i <= opt.uniform_panels; ++i)
        edges.push_back(far_start + (rho_max - far_start) * i / opt.uniform_panels);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

RhoKernel assemble_terms(const std::vector<TermSpec>& terms,
                         const AssemblyPotentials& pots, const Vec3& x, const Vec3& z,
                         const AssemblyOptions& opt, double extra_scale) {
    EllipsoidFrame frame(x, z);
    double r = frame.r;
    double rho0 = r * (1 + opt.cut_delta);
    if (r == 0) rho0 = opt.cut_delta;

    PointContext ctx = make_context(pots, x, z, terms);

    // combined regular integrand: sum over terms of the IBP'd D^m forms
    auto regular_integrand = [&](const SurfacePoint& p) -> cplx {
        FlowNumerators f = ctx.numerators(p);
        double c = 1 / (2 * p.r1) + 1 / (2 * p.r2);
        cplx acc{};
        for (const auto& t : terms) {
            FamilyEval fe = family_eval(t, f, p);
            if (t.m == 0)
                acc += t.coef * fe.g;
            else if (t.m == 1)
                acc += -t.coef * (fe.g1 + c * fe.g);
            else
                acc += t.coef *
                       (fe.g2 + 2 * c * fe.g1 + fe.g / (2 * p.r1 * p.r2));
        }
        return acc;
    };
    // atom weights need per-term G(rho0) and DG(rho0)
    auto value_integrand = [&](const TermSpec& t) {
        return [&ctx, t](const SurfacePoint& p) -> cplx {
            FlowNumerators f = ctx.numerators(p);
            return family_eval(t, f, p).g;
        };
    };
    auto dvalue_integrand = [&](const TermSpec& t) {
        return [&ctx, t](const SurfacePoint& p) -> cplx {
            FlowNumerators f = ctx.numerators(p);
            double c = 1 / (2 * p.r1) + 1 / (2 * p.r2);
            FamilyEval fe = family_eval(t, f, p);
            return fe.g1 + c * fe.g;
        };
    };

    auto edges = rho_panels(rho0, r, opt.rho_max, opt);
    const auto& [gx, gw] = gauss_legendre(opt.rho_gauss);

    RhoKernel K;
    K.uniform = false;
    K.out_cloud = SpatialCloud::single(x);
    K.in_cloud = SpatialCloud::single(z);
    for (std::size_t p = 0; p + 1 < edges.size(); ++p)
        for (int q = 0; q < opt.rho_gauss; ++q) {
            double rho = edges[p] + (edges[p + 1] - edges[p]) * (gx[q] + 1) / 2;
            double w = gw[q] * (edges[p + 1] - edges[p]) / 2;
            K.rho_nodes.push_back(rho);
            K.rho_weights.push_back(w);
            KernelMatrix m(1, 1);
            m.at(0, 0) = extra_scale * kFoliationFactor *
                         surface_integral(frame, rho, regular_integrand, opt.surf);
            K.values.push_back(m);
        }

    cplx atom0{}, atom1{};
    for (const auto& t : terms) {
        if (t.m == 0) continue;
        cplx g0 = kFoliationFactor *
                  surface_integral(frame, rho0, value_integrand(t), opt.surf);
        if (t.m == 1) {
            atom0 += -t.coef * g0;
        } else {
            cplx dg0 = kFoliationFactor *
                       surface_integral(frame, rho0, dvalue_integrand(t), opt.surf);
            atom1 += t.coef * g0;
            atom0 += t.coef * dg0;
        }
    }
    if (atom0 != cplx{}) {
        AtomicComponent a;
        a.rho0 = rho0;
        a.order = 0;
        a.kernel = KernelMatrix(1, 1);
        a.kernel.at(0, 0) = extra_scale * atom0;
        K.atoms.push_back(a);
    }
    if (atom1 != cplx{}) {
        AtomicComponent a;
        a.rho0 = rho0;
        a.order = 1;
        a.kernel = KernelMatrix(1, 1);
        a.kernel.at(0, 0) = extra_scale * atom1;
        K.atoms.push_back(a);
    }
    return K;
}

RhoKernel add_slices(RhoKernel a, const RhoKernel& b) {
    if (a.rho_nodes.size() != b.rho_nodes.size())
        throw GridMismatch("slice sum needs identical rho grids");
    for (std::size_t k = 0; k < a.values.size(); ++k)
        for (std::size_t q = 0; q < a.values[k].a.size(); ++q)
            a.values[k].a[q] += b.values[k].a[q];
    for (const auto& at : b.atoms) a.atoms.push_back(at);
    return a;
}

}  // namespace

RhoKernel assemble_t_hat(TPart part, const AssemblyPotentials& pots, const Vec3& x,
                         const Vec3& z, const AssemblyOptions& opt) {
    if (part == TPart::T) {
        RhoKernel k = assemble_t_hat(TPart::T1, pots, x, z, opt);
        k = add_slices(k, assemble_t_hat(TPart::T2, pots, x, z, opt));
        k = add_slices(k, assemble_t_hat(TPart::T3, pots, x, z, opt));
        k = add_slices(k, assemble_t_hat(TPart::T4, pots, x, z, opt));
        return k;
    }
    double scale = 1.0;
    if (part == TPart::T2) scale = pots.Vsharp.scalar.eval(z);
    return assemble_terms(term_list(part), pots, x, z, opt, scale);
}

RhoKernel assemble_dlambda_t(DLambdaPart part, const AssemblyPotentials& pots,
                             const Vec3& x, const Vec3& z, const AssemblyOptions& opt) {
    return assemble_terms(term_list(part), pots, x, z, opt, 1.0);
}

namespace {

// direct oscillatory integral via two overlapping spherical charts (about x
// and about z) glued by a smooth partition of unity
cplx direct_terms(const std::vector<TermSpec>& terms, const AssemblyPotentials& pots,
                  const Vec3& x, const Vec3& z, double lambda, int radial_panels,
                  int sphere_order, double extra_scale) {
    PointContext ctx = make_context(pots, x, z, terms);
    double r = (x - z).norm();

    auto integrand = [&](const Vec3& y) -> cplx {
        double r1 = (x - y).norm(), r2 = (y - z).norm();
        if (r1 < 1e-12 || r2 < 1e-12) return {};
        SurfacePoint fake{};
        fake.y_world = y;
        fake.r1 = r1;
        fake.r2 = r2;
        fake.v_world = {};
        fake.dv_drho_world = {};
        FlowNumerators f = ctx.numerators(fake);
        double rho = r1 + r2;
        cplx acc{};
        for (const auto& t : terms) {
            double P = std::pow(r1, -t.a) * std::pow(r2, -t.b);
            cplx il = std::pow(kI * lambda, t.m);
            acc += t.coef * il * t.sign * f.value(t.num) * P;
        }
        return acc * std::exp(kI * lambda * rho);
    };

    double wz = std::max(0.25 * r, 0.35);  // blending radius about z
    // C^3 smoothstep partition of unity: 1 at z, 0 beyond wz
    auto blend = [&](const Vec3& y) {
        double s = (y - z).norm() / wz;
        if (s <= 0.25) return 1.0;
        if (s >= 1.0) return 0.0;
        double t = (s - 0.25) / 0.75;
        double t4 = t * t * t * t;
        return 1.0 - t4 * (35 - 84 * t + 70 * t * t - 20 * t * t * t);
    };

    const auto& [gx, gw] = gauss_legendre(sphere_order);
    const int nphi = 2 * sphere_order;
    double rmax = 0;
    for (const auto& comp : {&pots.A.vector[0], &pots.A.vector[1], &pots.A.vector[2],
                             &pots.V.scalar})
        for (const auto& t : comp->terms) {
            double reach = (t.kind == BumpKind::Gaussian) ? 7 * t.width : t.width;
            rmax = std::max(rmax, (t.center - x).norm() + reach);
        }
    rmax = std::max(rmax, r + 2 * wz);

    // chart-x radial panel edges: uniform, with the band [r-wz, r+wz] (where
    // the blend varies across the x-chart) refined explicitly
    std::vector<double> redges;
    for (int ir = 0; ir <= radial_panels; ++ir)
        redges.push_back(rmax * ir / radial_panels);
    for (int k = 0; k <= 12; ++k) {
        double e = r - wz + 2.0 * wz * k / 12;
        if (e > 0 && e < rmax) redges.push_back(e);
    }
    std::sort(redges.begin(), redges.end());
    redges.erase(std::unique(redges.begin(), redges.end()), redges.end());

    EllipsoidFrame fr(x, z);
    cplx total{};
    // chart about x: integrand * (1 - blend)
    for (std::size_t ir = 0; ir + 1 < redges.size(); ++ir)
        for (int a = 0; a < sphere_order; ++a) {
            double r0 = redges[ir], r1e = redges[ir + 1];
            double rr = r0 + (r1e - r0) * (gx[a] + 1) / 2;
            double wr = gw[a] * (r1e - r0) / 2;
            for (int b = 0; b < sphere_order; ++b) {
                double t = gx[b];
                double wt = gw[b];
                double st = std::sqrt(std::max(0.0, 1 - t * t));
                for (int m = 0; m < nphi; ++m) {
                    double ph = 2 * M_PI * (m + 0.5) / nphi;
                    Vec3 dir{t, st * std::cos(ph), st * std::sin(ph)};
                    // axis: x->z direction as first coordinate
                    Vec3 y = x + fr.vector_to_world(dir) * rr;
                    double bl = blend(y);
                    if (bl >= 1.0) continue;
                    cplx val = integrand(y) * (1 - bl);
                    total += wr * wt * (2 * M_PI / nphi) * rr * rr * val;
                }
            }
        }
    // chart about z: integrand * blend, radius wz
    for (int ir = 0; ir < radial_panels; ++ir)
        for (int a = 0; a < sphere_order; ++a) {
            double r0 = wz * ir / radial_panels, r1e = wz * (ir + 1) / radial_panels;
            double rr = r0 + (r1e - r0) * (gx[a] + 1) / 2;
            double wr = gw[a] * (r1e - r0) / 2;
            for (int b = 0; b < sphere_order; ++b) {
                double t = gx[b];
                double wt = gw[b];
                double st = std::sqrt(std::max(0.0, 1 - t * t));
                for (int m = 0; m < nphi; ++m) {
                    double ph = 2 * M_PI * (m + 0.5) / nphi;
                    Vec3 y = z + Vec3{t, st * std::cos(ph), st * std::sin(ph)} * rr;
                    double bl = blend(y);
                    if (bl <= 0.0) continue;
                    cplx val = integrand(y) * bl;
                    total += wr * wt * (2 * M_PI / nphi) * rr * rr * val;
                }
            }
        }
    return total * extra_scale;
}

}  // namespace

cplx direct_t_lambda(TPart part, const AssemblyPotentials& pots, const Vec3& x,
                     const Vec3& z, double lambda, int radial_panels,
                     int sphere_order) {
    if (part == TPart::T) {
        cplx s{};
        for (TPart p : {TPart::T1, TPart::T2, TPart::T3, TPart::T4})
            s += direct_t_lambda(p, pots, x, z, lambda, radial_panels, sphere_order);
        return s;
    }
    double scale = (part == TPart::T2) ? pots.Vsharp.scalar.eval(z) : 1.0;
    return direct_terms(term_list(part), pots, x, z, lambda, radial_panels,
                        sphere_order, scale);
}

cplx direct_dlambda_t_lambda(DLambdaPart part, const AssemblyPotentials& pots,
                             const Vec3& x, const Vec3& z, double lambda,
                             int radial_panels, int sphere_order) {
    return direct_terms(term_list(part), pots, x, z, lambda, radial_panels,
                        sphere_order, 1.0);
}

// Luxemburg-type L log L norm ||f||_1 + inf{c : int (|f|/c) log(|f|/c) - |f|/c <= 1};
// homogeneous, unlike the bare integral, so Bil stays bilinear.
static double luxemburg_llogl(const ScalarField& f) {
    double h3 = f.grid.cell_volume();
    double l1 = f.norm_l1();
    if (l1 == 0) return 0;
    auto phi = [&](double c) {
        double s = 0;
        for (const auto& v : f.values) {
            double a = std::abs(v);
            if (a == 0) continue;
            double t = a / c;
            s += t * std::log(t) - t;
        }
        return s * h3;
    };
    double lo = 1e-14 * l1, hi = 1e14 * l1;
    for (int it = 0; it < 200; ++it) {
        double mid = std::sqrt(lo * hi);
        (phi(mid) > 1.0 ? lo : hi) = mid;
    }
    return l1 + std::sqrt(lo * hi);
}

BilNorms bil_norms(const PotentialSpec& A, const Grid3D& grid) {
    BilNorms n;
    if (A.vector_empty()) return n;
    ScalarField a0 = sample_vector_derivative_magnitude(A, grid, 0);
    ScalarField a1 = sample_vector_derivative_magnitude(A, grid, 1);
    ScalarField a2 = sample_vector_derivative_magnitude(A, grid, 2);
    ScalarField a3 = sample_vector_derivative_magnitude(A, grid, 3);
    ScalarField a4 = sample_vector_derivative_magnitude(A, grid, 4);
    n.a_k2log2 = space_norm(a0, NormKind::K2_LOG2);
    n.a_klog = space_norm(a0, NormKind::K_LOG);
    n.grad_k2log2 = space_norm(a1, NormKind::K2_LOG2);
    n.grad_klog = space_norm(a1, NormKind::K_LOG);
    n.hess_l1 = a2.norm_l1();
    n.hess_k2log2 = space_norm(a2, NormKind::K2_LOG2);
    n.d3_llogl = luxemburg_llogl(a3);
    n.d4_llogl = luxemburg_llogl(a4);
    return n;
}

BilBreakdown bil_bound(const BilNorms& a, const BilNorms& s) {
    BilBreakdown b;
    b.terms[0] = a.a_k2log2 * s.a_k2log2;
    b.terms[1] = a.grad_k2log2 * s.a_klog;
    b.terms[2] = a.grad_klog * s.a_k2log2;
    b.terms[3] = a.hess_l1 * s.a_k2log2;
    b.terms[4] = a.hess_k2log2 * s.a_klog;
    b.terms[5] = a.d3_llogl * s.a_klog;
    b.terms[6] = a.d4_llogl * s.a_k2log2;
    return b;
}

BilBreakdown bil_bound(const PotentialSpec& A, const PotentialSpec& Asharp,
                       const Grid3D& grid) {
    return bil_bound(bil_norms(A, grid), bil_norms(Asharp, grid));
}

}  // namespace magdecay
