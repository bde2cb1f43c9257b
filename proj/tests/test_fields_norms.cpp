#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <magdecay/norms.hpp>

#include "oracles.hpp"

using namespace magdecay;

namespace {

PotentialSpec gaussian_scalar(double amp, double w, Vec3 c = {}) {
    PotentialSpec s;
    s.scalar.terms.push_back({BumpKind::Gaussian, c, amp, w});
    return s;
}

PotentialSpec ball_scalar(double amp, double w, Vec3 c = {}) {
    PotentialSpec s;
    s.scalar.terms.push_back({BumpKind::BallIndicator, c, amp, w});
    return s;
}

}  // namespace

TEST_CASE("jets reproduce finite-difference derivatives of the bumps") {
    BumpSum g;
    g.terms.push_back({BumpKind::Gaussian, {0.3, -0.2, 0.1}, 1.4, 0.9});
    g.terms.push_back({BumpKind::CompactBump, {-0.1, 0.0, 0.2}, -0.7, 1.8});
    Vec3 p{0.15, 0.22, -0.31};
    double h = 1e-5;
    auto fd1 = [&](int axis) {
        Vec3 a = p, b = p;
        a[axis] += h;
        b[axis] -= h;
        return (g.eval(a) - g.eval(b)) / (2 * h);
    };
    for (int axis = 0; axis < 3; ++axis) {
        int ax = axis == 0, ay = axis == 1, az = axis == 2;
        CHECK(g.derivative(p, ax, ay, az) == doctest::Approx(fd1(axis)).epsilon(1e-6));
    }
    // a 4th-order mixed partial against nested differences
    auto f = [&](double dx, double dy) {
        return g.eval({p.x + dx, p.y + dy, p.z});
    };
    double h2 = 2e-3;
    double fd22 = (f(h2, h2) - 2 * f(h2, 0) + f(h2, -h2) - 2 * f(0, h2) +
                   4 * f(0, 0) - 2 * f(0, -h2) + f(-h2, h2) - 2 * f(-h2, 0) +
                   f(-h2, -h2)) /
                  (h2 * h2 * h2 * h2);
    CHECK(g.derivative(p, 2, 2, 0) == doctest::Approx(fd22).epsilon(1e-3));
}

TEST_CASE("build_field examples") {
    Grid3D g(16, 8.0);
    SUBCASE("zero spec gives the zero field") {
        BumpSum zero;
        ScalarField f = sample_scalar(zero, g);
        CHECK(f.norm_linf() == 0.0);
    }
    SUBCASE("unit gaussian first derivative at (1,0,0)") {
        BumpSum u;
        u.terms.push_back({BumpKind::Gaussian, {}, 1.0, 1.0});
        double d = u.derivative({1, 0, 0}, 1, 0, 0);
        CHECK(d == doctest::Approx(-2.0 * std::exp(-1.0)).epsilon(1e-12));
    }
    SUBCASE("ball indicator membership") {
        BumpSum b;
        b.terms.push_back({BumpKind::BallIndicator, {}, 1.0, 1.0});
        CHECK(b.eval({0.5, 0, 0}) == 1.0);
        CHECK(b.eval({1.5, 0, 0}) == 0.0);
        CHECK_THROWS_AS(b.derivative({0.5, 0, 0}, 1, 0, 0), UnsupportedDerivative);
    }
}

TEST_CASE("potential spec JSON round trip") {
    PotentialSpec s = gaussian_scalar(1.5, 0.8, {0.1, 0.2, 0.3});
    s.vector[1].terms.push_back({BumpKind::CompactBump, {0, 0, 1}, -0.5, 2.0});
    PotentialSpec t = PotentialSpec::from_json_string(s.to_json_string());
    CHECK(t.scalar.terms.size() == 1);
    CHECK(t.vector[1].terms.size() == 1);
    CHECK(t.scalar.terms[0].amplitude == doctest::Approx(1.5));
    CHECK(t.vector[1].terms[0].kind == BumpKind::CompactBump);
    CHECK_THROWS(PotentialSpec::from_json_string("{\"vector\": [[]]}"));
}

TEST_CASE("Kato norms of the unit ball indicator") {
    // closed forms: ||chi_B||_K = 2 pi (sup at the center), ||chi_B||_K2 = 4 pi
    Grid3D g(128, 4.0);
    ScalarField f = sample_scalar(ball_scalar(1.0, 1.0).scalar, g);
    double k = space_norm(f, NormKind::K);
    double k2 = space_norm(f, NormKind::K2);
    CHECK(k == doctest::Approx(2 * M_PI).epsilon(0.01));
    CHECK(k2 == doctest::Approx(4 * M_PI).epsilon(0.01));
}

TEST_CASE("zero field has zero norms") {
    Grid3D g(16, 4.0);
    ScalarField f(g);
    for (NormKind k : {NormKind::K, NormKind::K2, NormKind::L1, NormKind::L_LOG_L,
                       NormKind::L32_1, NormKind::L3_1, NormKind::KSTAR_SURR})
        CHECK(space_norm(f, k) == 0.0);
}

TEST_CASE("non-finite field is rejected") {
    Grid3D g(16, 4.0);
    ScalarField f(g);
    f.values[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(space_norm(f, NormKind::K), std::invalid_argument);
}

TEST_CASE("layer-cake Lorentz norms on the indicator") {
    // ||chi_B||_{p,1} = p |B|^{1/p}
    Grid3D g(64, 4.0);
    ScalarField f = sample_scalar(ball_scalar(1.0, 1.0).scalar, g);
    double vol = 4.0 * M_PI / 3.0;
    CHECK(space_norm(f, NormKind::L32_1) ==
          doctest::Approx(1.5 * std::pow(vol, 2.0 / 3.0)).epsilon(0.02));
    CHECK(space_norm(f, NormKind::L3_1) ==
          doctest::Approx(3.0 * std::pow(vol, 1.0 / 3.0)).epsilon(0.02));
    CHECK(space_norm(f, NormKind::L_LOG_L) == doctest::Approx(vol).epsilon(0.02));
    CHECK(space_norm(f, NormKind::KSTAR_SURR) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("log-weight monotonicity") {
    Grid3D g(64, 10.0);
    ScalarField f = sample_scalar(gaussian_scalar(1.0, 1.0).scalar, g);
    double k = space_norm(f, NormKind::K);
    double klog = space_norm(f, NormKind::K_LOG);
    double k2 = space_norm(f, NormKind::K2);
    double k2log = space_norm(f, NormKind::K2_LOG);
    double k2log2 = space_norm(f, NormKind::K2_LOG2);
    CHECK(klog >= k);
    CHECK(k2log >= k2);
    CHECK(k2log2 >= k2log);
}

TEST_CASE("scaling laws of the Kato and L1 norms") {
    // f_s(x) = f(x/s): K scales by s^2, K2 by s, L1 by s^3
    double w0 = 0.4;
    Grid3D g(128, 12.0);
    ScalarField base = sample_scalar(gaussian_scalar(1.0, w0).scalar, g);
    double k0 = space_norm(base, NormKind::K);
    double k20 = space_norm(base, NormKind::K2);
    double l10 = base.norm_l1();
    for (double s : {0.5, 2.0, 4.0}) {
        ScalarField fs = sample_scalar(gaussian_scalar(1.0, w0 * s).scalar, g);
        CHECK(space_norm(fs, NormKind::K) == doctest::Approx(s * s * k0).epsilon(0.01));
        CHECK(space_norm(fs, NormKind::K2) == doctest::Approx(s * k20).epsilon(0.01));
        CHECK(fs.norm_l1() == doctest::Approx(s * s * s * l10).epsilon(0.01));
    }
}

TEST_CASE("sup-search stability under candidate refinement") {
    Grid3D g(64, 8.0);
    PotentialSpec two;
    two.scalar.terms.push_back({BumpKind::Gaussian, {1.0, 0.4, 0}, 1.0, 0.7});
    two.scalar.terms.push_back({BumpKind::Gaussian, {-1.2, 0, 0.3}, 0.8, 0.9});
    ScalarField f = sample_scalar(two.scalar, g);
    double v1 = space_norm(f, NormKind::K);
    // denser grid = denser candidate lattice
    Grid3D g2(128, 8.0);
    ScalarField f2 = sample_scalar(two.scalar, g2);
    double v2 = space_norm(f2, NormKind::K);
    CHECK(std::abs(v1 - v2) / v2 < 0.005);
}

TEST_CASE("membership report") {
    Grid3D g(64, 10.0);
    SUBCASE("zero potentials belong to X and Y with zero norms") {
        PotentialSpec zero;
        NormReport rep = membership_report(zero, zero, g);
        CHECK(rep.member_X);
        CHECK(rep.member_Y);
        CHECK(rep.at(NormKind::W21_DOT) == 0.0);
    }
    SUBCASE("gaussian potentials are members with finite norms") {
        PotentialSpec A;
        A.vector[0].terms.push_back({BumpKind::Gaussian, {}, 0.5, 1.0});
        A.vector[2].terms.push_back({BumpKind::Gaussian, {0.3, 0, 0}, -0.2, 1.3});
        PotentialSpec V = gaussian_scalar(0.7, 1.1);
        NormReport rep = membership_report(A, V, g);
        CHECK(rep.member_X);
        CHECK(rep.member_Y);
        CHECK(rep.at(NormKind::K2_LOG2) > 0);
        CHECK(rep.at(NormKind::W21_DOT) > 0);
    }
    SUBCASE("indicator A propagates the derivative error") {
        PotentialSpec A;
        A.vector[0].terms.push_back({BumpKind::BallIndicator, {}, 1.0, 1.0});
        CHECK_THROWS_AS(membership_report(A, PotentialSpec{}, g),
                        UnsupportedDerivative);
    }
}

TEST_CASE("embedding smoke test: L^{3/2 -+ eps} proxies imply finite Kato norms") {
    Grid3D g(64, 10.0);
    for (double w : {0.6, 1.0, 1.7}) {
        ScalarField f = sample_scalar(gaussian_scalar(1.0, w).scalar, g);
        double p_minus = 0, p_plus = 0;
        for (const auto& v : f.values) {
            double a = std::abs(v);
            p_minus += std::pow(a, 1.4);
            p_plus += std::pow(a, 1.6);
        }
        p_minus *= g.cell_volume();
        p_plus *= g.cell_volume();
        REQUIRE(std::isfinite(p_minus));
        REQUIRE(std::isfinite(p_plus));
        CHECK(std::isfinite(space_norm(f, NormKind::K)));
        CHECK(std::isfinite(space_norm(f, NormKind::K_LOG)));
    }
}

TEST_CASE("norm chain: ||A||_K2 <= ||grad A||_K <= ||grad^2 A||_L1") {
    Grid3D g(64, 12.0);
    SUBCASE("zero A") {
        NormChain c = norm_chain_check(PotentialSpec{}, g);
        CHECK(c.a_k2 == 0.0);
        CHECK(c.grad_a_k == 0.0);
        CHECK(c.hess_a_l1 == 0.0);
    }
    SUBCASE("gaussian component is monotone") {
        PotentialSpec A;
        A.vector[0].terms.push_back({BumpKind::Gaussian, {}, 1.0, 1.0});
        NormChain c = norm_chain_check(A, g);
        CHECK(c.a_k2 <= c.grad_a_k * 1.05);
        CHECK(c.grad_a_k <= c.hess_a_l1 * 1.05);
    }
    SUBCASE("dilation scales all three entries together") {
        // A(./s): volume gives s^3, the kernel 1/|x-y|^2 (resp. one gradient,
        // two gradients) gives s^-2, so every entry scales by s and the chain
        // ordering is dilation-invariant
        PotentialSpec A;
        A.vector[1].terms.push_back({BumpKind::Gaussian, {}, 1.0, 1.0});
        NormChain c1 = norm_chain_check(A, Grid3D(64, 9.0));
        PotentialSpec As;
        double s = 2.0;
        As.vector[1].terms.push_back({BumpKind::Gaussian, {}, 1.0, 1.0 * s});
        NormChain c2 = norm_chain_check(As, Grid3D(64, 14.0));
        CHECK(c2.a_k2 == doctest::Approx(s * c1.a_k2).epsilon(0.015));
        CHECK(c2.grad_a_k == doctest::Approx(s * c1.grad_a_k).epsilon(0.015));
        CHECK(c2.hess_a_l1 == doctest::Approx(s * c1.hess_a_l1).epsilon(0.015));
    }
}
