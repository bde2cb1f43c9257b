#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <magdecay/assembly.hpp>
#include <magdecay/norms.hpp>

using namespace magdecay;

namespace {

AssemblyPotentials corpus_potentials() {
    AssemblyPotentials p;
    p.A.vector[0].terms.push_back({BumpKind::Gaussian, {0.2, 0.1, -0.1}, 0.8, 1.2});
    p.A.vector[1].terms.push_back({BumpKind::Gaussian, {-0.1, 0.2, 0.0}, 0.5, 1.0});
    p.A.vector[2].terms.push_back({BumpKind::Gaussian, {0.0, -0.2, 0.3}, 0.3, 1.4});
    p.Asharp = p.A;
    p.V.scalar.terms.push_back({BumpKind::Gaussian, {-0.1, 0.2, 0.0}, -0.6, 1.0});
    p.Vsharp = p.V;
    return p;
}

const Vec3 kX{-1, 0, 0}, kZ{1, 0, 0};

cplx hat_of(const RhoKernel& k, double lam) { return hat(k, lam).at(0, 0); }

}  // namespace

TEST_CASE("zero potentials assemble to the zero kernel") {
    AssemblyPotentials zero;
    for (TPart part : {TPart::T1, TPart::T3, TPart::T4, TPart::TTILDE}) {
        RhoKernel k = assemble_t_hat(part, zero, kX, kZ);
        CHECK(u_norm_regular(k, OpSpace::L1, OpSpace::LINF) == 0.0);
        CHECK(k.atoms.empty());
    }
    for (DLambdaPart part : {DLambdaPart::T11, DLambdaPart::TTILDE1}) {
        RhoKernel k = assemble_dlambda_t(part, zero, kX, kZ);
        CHECK(u_norm_regular(k, OpSpace::L1, OpSpace::LINF) == 0.0);
    }
}

TEST_CASE("T4 matches an independent surface quadrature") {
    AssemblyPotentials pots = corpus_potentials();
    AssemblyOptions opt;
    RhoKernel k = assemble_t_hat(TPart::T4, pots, kX, kZ, opt);
    EllipsoidFrame fr(kX, kZ);
    // independent route: theta midpoint rule at high resolution
    for (std::size_t q : {std::size_t(40), std::size_t(200), std::size_t(400)}) {
        double rho = k.rho_nodes[q];
        const int nt = 1200, nphi = 64;
        double acc = 0;
        for (int it = 0; it < nt; ++it) {
            double theta = M_PI * (it + 0.5) / nt;
            for (int m = 0; m < nphi; ++m) {
                SurfacePoint p =
                    elliptical_map(fr, rho, theta, 2 * M_PI * (m + 0.5) / nphi);
                double vy = pots.V.scalar.eval(p.y_world);
                double vz = pots.Vsharp.scalar.eval(kZ);
                acc += vy * vz / (p.r1 * p.r2) * p.jacobian * (M_PI / nt) *
                       (2 * M_PI / nphi);
            }
        }
        acc *= kFoliationFactor / (16 * M_PI * M_PI);
        CHECK(k.values[q].at(0, 0).real() == doctest::Approx(acc).epsilon(1e-6));
    }
}

TEST_CASE("assembled kernels transform back to the direct oscillatory integrals") {
    AssemblyPotentials pots = corpus_potentials();
    AssemblyOptions opt;

    SUBCASE("T tilde") {
        RhoKernel k = assemble_t_hat(TPart::TTILDE, pots, kX, kZ, opt);
        for (double lam : {0.0, 1.0, 2.0}) {
            cplx got = hat_of(k, lam);
            cplx want = direct_t_lambda(TPart::TTILDE, pots, kX, kZ, lam, 72, 32);
            CAPTURE(lam);
            CHECK(std::abs(got - want) <= 1e-3 * std::abs(want));
        }
    }
    SUBCASE("T1") {
        RhoKernel k = assemble_t_hat(TPart::T1, pots, kX, kZ, opt);
        for (double lam : {0.0, 1.0, 2.0}) {
            cplx got = hat_of(k, lam);
            cplx want = direct_t_lambda(TPart::T1, pots, kX, kZ, lam, 72, 32);
            CAPTURE(lam);
            CHECK(std::abs(got - want) <= 1e-3 * std::abs(want));
        }
    }
    SUBCASE("T4") {
        RhoKernel k = assemble_t_hat(TPart::T4, pots, kX, kZ, opt);
        for (double lam : {0.0, 1.0, 2.0}) {
            cplx got = hat_of(k, lam);
            cplx want = direct_t_lambda(TPart::T4, pots, kX, kZ, lam, 96, 36);
            CAPTURE(lam);
            CHECK(std::abs(got - want) <= 1e-3 * std::abs(want));
        }
    }
}

TEST_CASE("d_lambda assembly is consistent with the lambda derivative") {
    AssemblyPotentials pots = corpus_potentials();
    AssemblyOptions opt;
    RhoKernel t1 = assemble_dlambda_t(DLambdaPart::TTILDE1, pots, kX, kZ, opt);
    RhoKernel t2 = assemble_dlambda_t(DLambdaPart::TTILDE2, pots, kX, kZ, opt);
    RhoKernel tt = assemble_t_hat(TPart::TTILDE, pots, kX, kZ, opt);
    double lam = 1.0, eps = 1e-4;
    cplx dl = hat_of(t1, lam) + hat_of(t2, lam);
    cplx fd = (hat_of(tt, lam + eps) - hat_of(tt, lam - eps)) / (2 * eps);
    CHECK(std::abs(dl - fd) <= 1e-3 * std::abs(fd));

    // and against the direct quadrature of (ttilde1) at lambda = 1
    cplx direct = direct_dlambda_t_lambda(DLambdaPart::TTILDE1, pots, kX, kZ, lam, 96, 36);
    CHECK(std::abs(hat_of(t1, lam) - direct) <= 1e-3 * std::abs(direct));
}

TEST_CASE("bilinear bound") {
    Grid3D g(64, 10.0);
    SUBCASE("zero A gives zero") {
        BilBreakdown b = bil_bound(PotentialSpec{}, PotentialSpec{}, g);
        CHECK(b.total() == 0.0);
    }
    SUBCASE("bilinearity: Bil(2A, 3A#) = 6 Bil(A, A#)") {
        PotentialSpec A;
        A.vector[0].terms.push_back({BumpKind::Gaussian, {}, 0.5, 1.0});
        A.vector[1].terms.push_back({BumpKind::Gaussian, {0.2, 0, 0}, -0.3, 1.2});
        BilNorms na = bil_norms(A, g);
        PotentialSpec A2 = A, A3 = A;
        for (auto& c : A2.vector)
            for (auto& t : c.terms) t.amplitude *= 2;
        for (auto& c : A3.vector)
            for (auto& t : c.terms) t.amplitude *= 3;
        BilNorms n2 = bil_norms(A2, g), n3 = bil_norms(A3, g);
        double b = bil_bound(na, na).total();
        double b6 = bil_bound(n2, n3).total();
        CHECK(b6 == doctest::Approx(6 * b).epsilon(1e-9));
    }
    SUBCASE("gaussian A gives a finite positive bound") {
        PotentialSpec A;
        A.vector[0].terms.push_back({BumpKind::Gaussian, {}, 0.5, 1.0});
        BilBreakdown b = bil_bound(A, A, g);
        CHECK(b.total() > 0);
        CHECK(std::isfinite(b.total()));
        for (double t : b.terms) CHECK(t >= 0);
    }
}
