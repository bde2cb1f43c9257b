#pragma once

#include <functional>

#include "magdecay/grid.hpp"
#include "magdecay/potential.hpp"
#include "magdecay/vec3.hpp"

namespace magdecay {

struct DegenerateEllipsoid : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Frame attached to the foci x, z: origin at the midpoint o, first axis along
/// z - x, so that in frame coordinates x = (-r/2,0,0), z = (r/2,0,0).
struct EllipsoidFrame {
    Vec3 x, z;
    double r;
    Vec3 e1, e2, e3;  // orthonormal; e1 = (z - x)/r
    Vec3 o;

    EllipsoidFrame(const Vec3& x_, const Vec3& z_);

    Vec3 to_world(const Vec3& frame_coords) const {
        return o + e1 * frame_coords.x + e2 * frame_coords.y + e3 * frame_coords.z;
    }
    Vec3 to_frame(const Vec3& world) const {
        Vec3 d = world - o;
        return {d.dot(e1), d.dot(e2), d.dot(e3)};
    }
    Vec3 vector_to_world(const Vec3& v) const {
        return e1 * v.x + e2 * v.y + e3 * v.z;
    }
};

/// Point of the rotation ellipsoid Sigma_rho in elliptical coordinates.
/// jacobian is the (rho^2 - r^2 cos^2 theta) sin(theta) factor; the true
/// volume element of the (rho,theta,phi) parametrization is jacobian/8.
struct SurfacePoint {
    double rho, theta, phi;
    double cos_theta, sin_theta;
    Vec3 y;        // frame coordinates
    Vec3 y_world;
    double r1, r2;
    double jacobian;      // 4 r1 r2 sin(theta)
    Vec3 v;               // d y / d rho at fixed (theta, phi), frame coords
    Vec3 v_world;
    Vec3 dv_drho_world;   // d^2 y / d rho^2
    double R;             // sqrt(y2^2 + y3^2)
};

/// Foliation volume factor: true volume element = jacobian/8 d(theta,phi,rho).
constexpr double kFoliationFactor = 0.125;

SurfacePoint elliptical_map(const EllipsoidFrame& f, double rho, double theta,
                            double phi);

struct SurfaceQuadOptions {
    int panels_t = 8;        // uniform panels in t = cos(theta)
    int gauss_t = 12;        // Gauss order per panel
    int pole_levels = 6;     // extra dyadic refinement levels toward t = +-1
    int n_phi = 32;          // trapezoid points in phi
};

/// Integral over Sigma_rho of f * J dmu (J in the paper normalization;
/// multiply by kFoliationFactor for the volume foliation).
cplx surface_integral(const EllipsoidFrame& f, double rho,
                      const std::function<cplx(const SurfacePoint&)>& integrand,
                      const SurfaceQuadOptions& opt = {});

/// Adaptive integral of f over R^3 through the ellipsoid foliation:
/// int_r^rho_max (1/8) [surface_integral of f] d rho.
double foliated_integral(const EllipsoidFrame& f,
                         const std::function<double(const Vec3&)>& fn_world,
                         double rho_max, double rel_tol = 1e-8,
                         const SurfaceQuadOptions& opt = {});

/// d/d rho of a surface integral via the moving-surface formula:
/// int (d_rho f + 2 rho/(rho^2 - r^2 cos^2 theta) f) J dmu.
cplx d_rho_surface_integral(
    const EllipsoidFrame& f, double rho,
    const std::function<cplx(const SurfacePoint&)>& integrand,
    const std::function<cplx(const SurfacePoint&)>& d_rho_integrand,
    const SurfaceQuadOptions& opt = {});

enum class LemmaId { L1, L2, L2LOG, L3, L3LOG };

struct LemmaCheck {
    double lhs = 0;
    double rhs = 0;
    double ratio = 0;       // lhs / rhs, 0 when degenerate
    bool degenerate = false;  // 0/0 case
};

/// Inequality harnesses for the coordinate lemmas; f is the scalar part of
/// the spec. Log variants use the unit cylinder radius R0 = 1.
LemmaCheck lemma_harness(LemmaId id, const PotentialSpec& f,
                         const EllipsoidFrame& frame);

/// Gauss-Legendre nodes/weights on [-1,1], cached per order.
const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n);

}  // namespace magdecay
