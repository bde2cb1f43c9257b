#include "magdecay/ellipsoid.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "magdecay/norms.hpp"

namespace magdecay {

const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
    static std::mutex mu;
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot.first.empty()) return slot;
    slot.first.resize(n);
    slot.second.resize(n);
    for (int i = 0; i < n; ++i) {
        // Newton from Chebyshev initial guess
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (x * p1 - p0) / (x * x - 1);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1);
        slot.first[n - 1 - i] = x;
        slot.second[n - 1 - i] = 2.0 / ((1 - x * x) * dp * dp);
    }
    return slot;
}

EllipsoidFrame::EllipsoidFrame(const Vec3& x_, const Vec3& z_) : x(x_), z(z_) {
    o = (x + z) * 0.5;
    Vec3 d = z - x;
    r = d.norm();
    if (r > 0) {
        e1 = d / r;
    } else {
        e1 = {1, 0, 0};
    }
    // pick the world axis least aligned with e1, Gram-Schmidt
    Vec3 trial = std::abs(e1.x) <= std::abs(e1.y)
                     ? (std::abs(e1.x) <= std::abs(e1.z) ? Vec3{1, 0, 0} : Vec3{0, 0, 1})
                     : (std::abs(e1.y) <= std::abs(e1.z) ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
    e2 = trial - e1 * trial.dot(e1);
    e2 = e2 / e2.norm();
    e3 = e1.cross(e2);
}

SurfacePoint elliptical_map(const EllipsoidFrame& f, double rho, double theta,
                            double phi) {
    if (rho <= f.r) throw DegenerateEllipsoid("rho must exceed |x-z|");
    SurfacePoint p;
    p.rho = rho;
    p.theta = theta;
    p.phi = phi;
    double t = std::cos(theta), st = std::sin(theta);
    p.cos_theta = t;
    p.sin_theta = st;
    double a = rho / 2;
    double disc = rho * rho - f.r * f.r;
    double b = std::sqrt(disc) / 2;
    double cphi = std::cos(phi), sphi = std::sin(phi);
    p.y = {a * t, b * st * cphi, b * st * sphi};
    p.y_world = f.to_world(p.y);
    p.r1 = (rho + f.r * t) / 2;
    p.r2 = (rho - f.r * t) / 2;
    p.jacobian = (rho * rho - f.r * f.r * t * t) * st;
    double vperp = rho * st / (2 * std::sqrt(disc));
    p.v = {t / 2, vperp * cphi, vperp * sphi};
    p.v_world = f.vector_to_world(p.v);
    double dvperp = -f.r * f.r * st / (2 * std::pow(disc, 1.5));
    p.dv_drho_world = f.vector_to_world({0, dvperp * cphi, dvperp * sphi});
    p.R = std::sqrt(p.y.y * p.y.y + p.y.z * p.y.z);
    return p;
}

namespace {

// panel edges in t = cos(theta), with dyadic refinement toward the poles
std::vector<double> t_panel_edges(const SurfaceQuadOptions& opt) {
    std::vector<double> edges;
    double inner_lo = -1, inner_hi = 1;
    std::vector<double> lo_side, hi_side;
    if (opt.pole_levels > 0) {
        double w = 2.0 / (opt.panels_t + 2);
        double lo = -1 + w, hi = 1 - w;
        // dyadic toward -1
        lo_side.push_back(-1);
        for (int k = opt.pole_levels; k >= 1; --k)
            lo_side.push_back(-1 + w / std::pow(2.0, k));
        hi_side.push_back(1);
        for (int k = opt.pole_levels; k >= 1; --k)
            hi_side.push_back(1 - w / std::pow(2.0, k));
        inner_lo = -1 + w;
        inner_hi = 1 - w;
    }
    for (double e : lo_side) edges.push_back(e);
    for (int i = 0; i <= opt.panels_t; ++i)
        edges.push_back(inner_lo + (inner_hi - inner_lo) * i / opt.panels_t);
    for (auto it = hi_side.rbegin(); it != hi_side.rend(); ++it) edges.push_back(*it);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

}  // namespace

cplx surface_integral(const EllipsoidFrame& f, double rho,
                      const std::function<cplx(const SurfacePoint&)>& integrand,
                      const SurfaceQuadOptions& opt) {
    if (rho <= f.r) throw DegenerateEllipsoid("rho must exceed |x-z|");
    auto edges = t_panel_edges(opt);
    const auto& [gx, gw] = gauss_legendre(opt.gauss_t);
    double dphi = 2.0 * M_PI / opt.n_phi;
    cplx total{};
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        double lo = edges[p], hi = edges[p + 1];
        for (int q = 0; q < opt.gauss_t; ++q) {
            double t = lo + (hi - lo) * (gx[q] + 1) / 2;
            double wt = gw[q] * (hi - lo) / 2;
            double theta = std::acos(std::clamp(t, -1.0, 1.0));
            // J dtheta = (rho^2 - r^2 t^2) dt; the sin(theta) cancels
            double jt = rho * rho - f.r * f.r * t * t;
            cplx phi_sum{};
            for (int m = 0; m < opt.n_phi; ++m) {
                SurfacePoint sp = elliptical_map(f, rho, theta, (m + 0.5) * dphi);
                phi_sum += integrand(sp);
            }
            total += wt * jt * dphi * phi_sum;
        }
    }
    return total;
}

cplx d_rho_surface_integral(
    const EllipsoidFrame& f, double rho,
    const std::function<cplx(const SurfacePoint&)>& integrand,
    const std::function<cplx(const SurfacePoint&)>& d_rho_integrand,
    const SurfaceQuadOptions& opt) {
    auto combined = [&](const SurfacePoint& p) {
        double corr = 2 * rho / (rho * rho - f.r * f.r * p.cos_theta * p.cos_theta);
        return d_rho_integrand(p) + corr * integrand(p);
    };
    return surface_integral(f, rho, combined, opt);
}

namespace {

double adaptive_rho(const EllipsoidFrame& f,
                    const std::function<double(double)>& shell, double lo, double hi,
                    double tol, int depth) {
    const auto& [gx, gw] = gauss_legendre(10);
    auto quad = [&](double a, double b) {
        double s = 0;
        for (int q = 0; q < 10; ++q)
            s += gw[q] * (b - a) / 2 * shell(a + (b - a) * (gx[q] + 1) / 2);
        return s;
    };
    double whole = quad(lo, hi);
    double mid = (lo + hi) / 2;
    double halves = quad(lo, mid) + quad(mid, hi);
    if (depth > 24 || std::abs(whole - halves) <= tol * (1 + std::abs(halves)))
        return halves;
    return adaptive_rho(f, shell, lo, mid, tol / 1.4, depth + 1) +
           adaptive_rho(f, shell, mid, hi, tol / 1.4, depth + 1);
}

}  // namespace

double foliated_integral(const EllipsoidFrame& f,
                         const std::function<double(const Vec3&)>& fn_world,
                         double rho_max, double rel_tol,
                         const SurfaceQuadOptions& opt) {
    auto shell = [&](double rho) {
        auto integrand = [&](const SurfacePoint& p) {
            return cplx{fn_world(p.y_world), 0};
        };
        return kFoliationFactor * surface_integral(f, rho, integrand, opt).real();
    };
    double lo = f.r * (1 + 1e-8) + (f.r == 0 ? 1e-12 : 0);
    return adaptive_rho(f, shell, lo, rho_max, rel_tol, 0);
}

namespace {

double support_radius(const BumpSum& s, const Vec3& origin) {
    double rmax = 1;
    for (const auto& t : s.terms) {
        double reach = (t.kind == BumpKind::Gaussian) ? 7.0 * t.width : t.width;
        rmax = std::max(rmax, (t.center - origin).norm() + reach);
    }
    return rmax;
}

// tensor Gauss integral over [ax,bx]x[ay,by]x[az,bz] with p panels per axis
double box_integral(const std::function<double(const Vec3&)>& fn, Vec3 lo, Vec3 hi,
                    int panels, int order) {
    const auto& [gx, gw] = gauss_legendre(order);
    double total = 0;
    for (int pi = 0; pi < panels; ++pi)
        for (int pj = 0; pj < panels; ++pj)
            for (int pk = 0; pk < panels; ++pk) {
                double x0 = lo.x + (hi.x - lo.x) * pi / panels;
                double x1 = lo.x + (hi.x - lo.x) * (pi + 1) / panels;
                double y0 = lo.y + (hi.y - lo.y) * pj / panels;
                double y1 = lo.y + (hi.y - lo.y) * (pj + 1) / panels;
                double z0 = lo.z + (hi.z - lo.z) * pk / panels;
                double z1 = lo.z + (hi.z - lo.z) * (pk + 1) / panels;
                for (int a = 0; a < order; ++a)
                    for (int b = 0; b < order; ++b)
                        for (int c = 0; c < order; ++c) {
                            Vec3 p{x0 + (x1 - x0) * (gx[a] + 1) / 2,
                                   y0 + (y1 - y0) * (gx[b] + 1) / 2,
                                   z0 + (z1 - z0) * (gx[c] + 1) / 2};
                            total += gw[a] * gw[b] * gw[c] * (x1 - x0) * (y1 - y0) *
                                     (z1 - z0) / 8 * fn(p);
                        }
            }
    return total;
}

// int over the cylinder R <= Rmax, |y1| <= Ymax of g(R, phi, y1) dR dphi dy1
// (cylindrical coordinates in the frame; Jacobian already divided out).
double cyl_integral(const EllipsoidFrame& fr,
                    const std::function<double(double, double, double)>& g,
                    double Rmax, double Ymax, bool log_refine_R) {
    const auto& [gx, gw] = gauss_legendre(12);
    const int nphi = 24, ny = 28;
    std::vector<double> redges;
    if (log_refine_R) {
        redges.push_back(0);
        for (int k = 14; k >= 1; --k) redges.push_back(Rmax / std::pow(2.0, k));
        redges.push_back(Rmax);
    } else {
        for (int i = 0; i <= 16; ++i) redges.push_back(Rmax * i / 16.0);
    }
    double total = 0;
    for (std::size_t p = 0; p + 1 < redges.size(); ++p) {
        double rlo = redges[p], rhi = redges[p + 1];
        for (int a = 0; a < 12; ++a) {
            double R = rlo + (rhi - rlo) * (gx[a] + 1) / 2;
            double wR = gw[a] * (rhi - rlo) / 2;
            for (int m = 0; m < nphi; ++m) {
                double phi = 2 * M_PI * (m + 0.5) / nphi;
                for (int iy = 0; iy < ny; ++iy)
                    for (int b = 0; b < 12; ++b) {
                        double ylo = -Ymax + 2 * Ymax * iy / ny;
                        double yhi = -Ymax + 2 * Ymax * (iy + 1) / ny;
                        double y1 = ylo + (yhi - ylo) * (gx[b] + 1) / 2;
                        double wy = gw[b] * (yhi - ylo) / 2;
                        total += wR * (2 * M_PI / nphi) * wy * g(R, phi, y1);
                    }
            }
        }
    }
    return total;
}

}  // namespace

LemmaCheck lemma_harness(LemmaId id, const PotentialSpec& fspec,
                         const EllipsoidFrame& frame) {
    LemmaCheck out;
    const BumpSum& f = fspec.scalar;
    if (f.empty()) {
        out.degenerate = true;
        return out;
    }
    bool needs_grad = (id != LemmaId::L1);
    if (needs_grad && !f.smooth())
        throw UnsupportedDerivative("lemma harness needs a derivative of f");

    double reach = support_radius(f, frame.o);
    Vec3 lo = frame.o - Vec3{reach, reach, reach};
    Vec3 hi = frame.o + Vec3{reach, reach, reach};

    auto fval = [&](const Vec3& pw) { return std::abs(f.eval(pw)); };
    auto gradmag = [&](const Vec3& pw) { return f.gradient(pw).norm(); };
    auto world = [&](double R, double phi, double y1) {
        return frame.to_world({y1, R * std::cos(phi), R * std::sin(phi)});
    };

    switch (id) {
        case LemmaId::L1: {
            // lhs: int_{rho <= 2r} |f| / (r sqrt(rho^2-r^2) sin theta) dy
            double r = frame.r;
            if (r <= 0) {
                out.degenerate = true;
                return out;
            }
            const auto& [gx, gw] = gauss_legendre(16);
            double qmax = std::sqrt(3.0) * r;  // rho = sqrt(r^2 + q^2) in (r, 2r]
            double lhs = 0;
            const int nq = 24, nu = 24, nphi = 16;
            for (int iq = 0; iq < nq; ++iq)
                for (int a = 0; a < 16; ++a) {
                    double q0 = qmax * iq / nq, q1 = qmax * (iq + 1) / nq;
                    double q = q0 + (q1 - q0) * (gx[a] + 1) / 2;
                    double wq = gw[a] * (q1 - q0) / 2;
                    double rho = std::sqrt(r * r + q * q);
                    for (int iu = 0; iu < nu; ++iu)
                        for (int b = 0; b < 16; ++b) {
                            // t = sin(u) absorbs the 1/sin(theta) singularity
                            double u0 = -M_PI / 2 + M_PI * iu / nu;
                            double u1 = -M_PI / 2 + M_PI * (iu + 1) / nu;
                            double u = u0 + (u1 - u0) * (gx[b] + 1) / 2;
                            double wu = gw[b] * (u1 - u0) / 2;
                            double t = std::sin(u);
                            double theta = std::acos(std::clamp(t, -1.0, 1.0));
                            for (int m = 0; m < nphi; ++m) {
                                SurfacePoint sp = elliptical_map(
                                    frame, rho, theta, 2 * M_PI * (m + 0.5) / nphi);
                                double jt = rho * rho - r * r * t * t;
                                // dy = (jt/8) dt dphi drho; dt = cos u du,
                                // dr = (q/rho) d q; integrand 1/(r*2R/sin(th))*...
                                double val = fval(sp.y_world) /
                                             (r * std::sqrt(rho * rho - r * r));
                                lhs += wq * wu * (2 * M_PI / nphi) * (q / rho) *
                                       (jt / 8.0) * val;
                            }
                        }
                }
            out.lhs = lhs;
            out.rhs = space_norm(
                sample_scalar_derivative_magnitude(f, Grid3D(64, 2 * reach), 0),
                NormKind::K2);
            break;
        }
        case LemmaId::L2: {
            out.lhs = cyl_integral(
                frame, [&](double R, double phi, double y1) { return fval(world(R, phi, y1)); },
                reach, reach, false);
            out.rhs = box_integral(gradmag, lo, hi, 10, 8);
            break;
        }
        case LemmaId::L2LOG: {
            double R0 = 1.0;
            out.lhs = cyl_integral(
                frame,
                [&](double R, double phi, double y1) {
                    return fval(world(R, phi, y1)) * std::abs(std::log(R));
                },
                R0, reach, true);
            double llogl = box_integral(
                [&](const Vec3& p) {
                    double g = gradmag(p);
                    return g > 0 ? g * log_bracket(g) : 0.0;
                },
                lo, hi, 10, 8);
            out.rhs = llogl + log_bracket(R0) * box_integral(gradmag, lo, hi, 10, 8);
            break;
        }
        case LemmaId::L3: {
            // lhs in spherical coordinates about x: Jacobian r1 R cancels
            const auto& [gx, gw] = gauss_legendre(12);
            const int nr = 24, nth = 20, nphi = 16;
            double rmax = reach + frame.r;
            double lhs = 0;
            for (int ir = 0; ir < nr; ++ir)
                for (int a = 0; a < 12; ++a) {
                    double r0 = rmax * ir / nr, r1e = rmax * (ir + 1) / nr;
                    double r1 = r0 + (r1e - r0) * (gx[a] + 1) / 2;
                    double w1 = gw[a] * (r1e - r0) / 2;
                    for (int it = 0; it < nth; ++it)
                        for (int b = 0; b < 12; ++b) {
                            double t0 = M_PI * it / nth, t1 = M_PI * (it + 1) / nth;
                            double th = t0 + (t1 - t0) * (gx[b] + 1) / 2;
                            double w2 = gw[b] * (t1 - t0) / 2;
                            for (int m = 0; m < nphi; ++m) {
                                double ph = 2 * M_PI * (m + 0.5) / nphi;
                                Vec3 fc{-frame.r / 2 + r1 * std::cos(th),
                                        r1 * std::sin(th) * std::cos(ph),
                                        r1 * std::sin(th) * std::sin(ph)};
                                lhs += w1 * w2 * (2 * M_PI / nphi) *
                                       fval(frame.to_world(fc));
                            }
                        }
                }
            out.lhs = lhs;
            out.rhs = cyl_integral(
                frame,
                [&](double R, double phi, double y1) { return gradmag(world(R, phi, y1)); },
                reach, reach, false);
            break;
        }
        case LemmaId::L3LOG: {
            double R0 = 1.0;
            // lhs = int_{cyl} |f| |log R| / r1 dR dphi dy1
            out.lhs = cyl_integral(
                frame,
                [&](double R, double phi, double y1) {
                    Vec3 fc{y1, R * std::cos(phi), R * std::sin(phi)};
                    double r1 = (fc - Vec3{-frame.r / 2, 0, 0}).norm();
                    if (r1 < 1e-9) return 0.0;
                    return fval(frame.to_world(fc)) * std::abs(std::log(R)) / r1;
                },
                R0, reach, true);
            double term1 = cyl_integral(
                frame,
                [&](double R, double phi, double y1) {
                    return gradmag(world(R, phi, y1)) * std::abs(std::log(R));
                },
                R0, reach, true);
            double term2 = cyl_integral(
                frame,
                [&](double R, double phi, double y1) { return gradmag(world(R, phi, y1)); },
                R0, reach, false);
            out.rhs = term1 + log_bracket(R0) * term2;
            break;
        }
    }
    if (out.rhs == 0 && out.lhs == 0) {
        out.degenerate = true;
    } else if (out.rhs > 0) {
        out.ratio = out.lhs / out.rhs;
    }
    return out;
}

}  // namespace magdecay
