#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <magdecay/spectral.hpp>

#include <random>

#include "oracles.hpp"

using namespace magdecay;

namespace {

PotentialSpec well(double v0, double radius = 1.0) {
    PotentialSpec V;
    V.scalar.terms.push_back({BumpKind::BallIndicator, {}, -v0, radius});
    return V;
}

PotentialSpec small_gaussian_a() {
    PotentialSpec A;
    A.vector[0].terms.push_back({BumpKind::Gaussian, {0.3, 0, 0}, 0.25, 1.1});
    A.vector[1].terms.push_back({BumpKind::Gaussian, {0, -0.2, 0.1}, -0.15, 0.9});
    return A;
}

ScalarField random_field(const Grid3D& g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    ScalarField f(g);
    for (auto& v : f.values) v = cplx{gauss(rng), gauss(rng)};
    return f;
}

}  // namespace

TEST_CASE("assemble_h basics") {
    Grid3D g(16, 8.0);
    SUBCASE("free H is the Fourier multiplier |xi|^2, exactly") {
        HamiltonianOperator H(g, PotentialSpec{}, PotentialSpec{});
        ScalarField f(g);
        double kx = 2 * M_PI / g.box_length;
        Vec3 xi{2 * kx, -kx, 3 * kx};
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                for (int k = 0; k < g.n; ++k)
                    f.at(i, j, k) = std::exp(cplx{0, 1} * xi.dot(g.point(i, j, k)));
        ScalarField hf = H.apply(f);
        double expect = xi.norm2();
        for (std::size_t q = 0; q < f.values.size(); q += 97)
            CHECK(std::abs(hf.values[q] - expect * f.values[q]) < 1e-10 * expect);
    }
    SUBCASE("hermiticity on random pairs") {
        PotentialSpec V;
        V.scalar.terms.push_back({BumpKind::Gaussian, {0.2, 0, 0}, -0.8, 1.0});
        HamiltonianOperator H(g, small_gaussian_a(), V);
        for (unsigned trial = 0; trial < 10; ++trial) {
            ScalarField f = random_field(g, 100 + trial);
            ScalarField h = random_field(g, 200 + trial);
            cplx hf_g = dot_l2(H.apply(f), h);
            cplx f_hg = dot_l2(f, H.apply(h));
            CHECK(std::abs(hf_g - f_hg) <=
                  1e-12 * f.norm_l2() * h.norm_l2() * 50);  // |<Hf,g>-<f,Hg>|
        }
    }
    SUBCASE("<Hf, f> is real for complex f") {
        HamiltonianOperator H(g, small_gaussian_a(), PotentialSpec{});
        ScalarField f = random_field(g, 7);
        cplx e = dot_l2(f, H.apply(f));
        CHECK(std::abs(e.imag()) < 1e-10 * std::abs(e.real()));
    }
    SUBCASE("non-smooth magnetic potential is rejected") {
        PotentialSpec A;
        A.vector[0].terms.push_back({BumpKind::BallIndicator, {}, 1.0, 1.0});
        CHECK_THROWS_AS(HamiltonianOperator(g, A, PotentialSpec{}),
                        std::invalid_argument);
    }
}

TEST_CASE("gauge consistency: the three operator rewritings agree") {
    Grid3D g(16, 8.0);
    PotentialSpec V;
    V.scalar.terms.push_back({BumpKind::Gaussian, {}, -0.5, 1.2});
    PotentialSpec A = small_gaussian_a();
    HamiltonianOperator Hs(g, A, V, MagneticForm::Symmetric);
    HamiltonianOperator Hd(g, A, V, MagneticForm::DivForm);
    HamiltonianOperator Hg(g, A, V, MagneticForm::GradForm);
    ScalarField f = random_field(g, 5);
    ScalarField a = Hs.apply(f), b = Hd.apply(f), c = Hg.apply(f);
    double scale = a.norm_l2();
    double dd = 0, dg = 0;
    for (std::size_t q = 0; q < f.values.size(); ++q) {
        dd += std::norm(a.values[q] - b.values[q]);
        dg += std::norm(a.values[q] - c.values[q]);
    }
    CHECK(std::sqrt(dd * g.cell_volume()) < 1e-10 * scale);
    CHECK(std::sqrt(dg * g.cell_volume()) < 1e-10 * scale);
}

TEST_CASE("eigensolve on the spherical well") {
    Grid3D g(32, 12.0);
    SUBCASE("free H: lowest mode is the zero constant") {
        HamiltonianOperator H(Grid3D(16, 8.0), PotentialSpec{}, PotentialSpec{});
        SpectrumReport rep = eigensolve(H, 1);
        CHECK(std::abs(rep.pairs[0].value) < 1e-9);
        CHECK(rep.pairs[0].cls == EigClass::NearZero);
        // constant mode
        cplx v0 = rep.pairs[0].state.values[0];
        for (std::size_t q = 0; q < rep.pairs[0].state.values.size(); q += 53)
            CHECK(std::abs(rep.pairs[0].state.values[q] - v0) < 1e-7);
    }
    SUBCASE("V0 = 5 binds exactly one state; V0 = 1 binds none") {
        REQUIRE(oracle::well_bound_state_count(5.0) == 1);
        REQUIRE(oracle::well_bound_state_count(1.0) == 0);
        HamiltonianOperator H5(g, PotentialSpec{}, well(5));
        SpectrumReport r5 = eigensolve(H5, 4, 0.02);
        CHECK(r5.negative_count() == 1);
        CHECK(r5.pairs[0].value ==
              doctest::Approx(oracle::well_ground_energy(5.0)).epsilon(0.08));
        CHECK(r5.pairs[0].residual < 1e-8);
        CHECK(r5.pairs[0].lambda_n ==
              doctest::Approx(std::sqrt(-r5.pairs[0].value)));
        HamiltonianOperator H1(g, PotentialSpec{}, well(1));
        SpectrumReport r1 = eigensolve(H1, 4, 0.02);
        CHECK(r1.negative_count() == 0);
    }
    SUBCASE("eigenpairs are orthonormal") {
        HamiltonianOperator H(g, PotentialSpec{}, well(15));
        SpectrumReport rep = eigensolve(H, 5, 0.02);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                cplx d = dot_l2(rep.pairs[i].state, rep.pairs[j].state);
                CHECK(std::abs(d - (i == j ? 1.0 : 0.0)) < 1e-9);
            }
    }
}

TEST_CASE("P_ac projector") {
    Grid3D g(32, 12.0);
    HamiltonianOperator H(g, PotentialSpec{}, well(5));
    SpectrumReport rep = eigensolve(H, 3, 0.02);
    REQUIRE(rep.negative_count() == 1);
    ScalarField f = random_field(g, 12);
    ScalarField p = pac_apply(rep, f);
    SUBCASE("orthogonal to every bound state") {
        for (const auto* b : rep.bound_states())
            CHECK(std::abs(dot_l2(b->state, p)) < 1e-10 * f.norm_l2());
    }
    SUBCASE("idempotent") {
        ScalarField pp = pac_apply(rep, p);
        double d = 0;
        for (std::size_t q = 0; q < p.values.size(); ++q)
            d += std::norm(pp.values[q] - p.values[q]);
        CHECK(std::sqrt(d * g.cell_volume()) < 1e-12 * f.norm_l2());
    }
    SUBCASE("no bound states leaves f unchanged") {
        SpectrumReport empty;
        ScalarField q = pac_apply(empty, f);
        for (std::size_t i = 0; i < f.values.size(); i += 101)
            CHECK(q.values[i] == f.values[i]);
    }
}

TEST_CASE("Birman-Schwinger count equals the negative eigenvalue count") {
    Grid3D g(32, 12.0);
    SUBCASE("U = 0") {
        CHECK(birman_schwinger_count(g, PotentialSpec{}, PotentialSpec{}, 4) == 0);
    }
    SUBCASE("V0 = 5: one state each way") {
        HamiltonianOperator H(g, PotentialSpec{}, well(5));
        SpectrumReport rep = eigensolve(H, 4, 0.02);
        int bs = birman_schwinger_count(g, PotentialSpec{}, well(5), 6);
        CHECK(bs == 1);
        CHECK(bs == rep.negative_count());
    }
    SUBCASE("V0 = 22: multiple states and agreement") {
        double v0 = 22.0;
        int expect = oracle::well_bound_state_count(v0);
        REQUIRE(expect >= 2);
        HamiltonianOperator H(g, PotentialSpec{}, well(v0));
        SpectrumReport rep = eigensolve(H, expect + 4, 0.02, 600);
        int bs = birman_schwinger_count(g, PotentialSpec{}, well(v0), expect + 4);
        CHECK(rep.negative_count() == expect);
        CHECK(bs == expect);
    }
}

TEST_CASE("zero-energy regularity diagnostic") {
    double v0star = M_PI * M_PI / 4;
    SUBCASE("U = 0 has sigma_min exactly 1") {
        RegularityDiagnostic d =
            zero_regularity(PotentialSpec{}, PotentialSpec{}, 0.5);
        CHECK(d.sigma_min_h == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(d.regular_h);
        CHECK(d.regular_hm1);
    }
    SUBCASE("small U obeys the Neumann bound sigma >= 1 - q") {
        PotentialSpec V;
        V.scalar.terms.push_back({BumpKind::Gaussian, {}, -0.3, 0.8});
        RegularityDiagnostic d = zero_regularity(PotentialSpec{}, V, 0.25);
        // ||R0(0) V|| <= ||V||_K / (4 pi) and the well is mild
        CHECK(d.sigma_min_h > 0.8);
        CHECK(d.regular_h);
    }
    SUBCASE("threshold well flagged non-regular, +-20% regular") {
        RegularityDiagnostic at =
            zero_regularity(PotentialSpec{}, well(v0star), 0.25);
        CHECK_FALSE(at.regular_h);
        RegularityDiagnostic lo =
            zero_regularity(PotentialSpec{}, well(0.8 * v0star), 0.25);
        CHECK(lo.regular_h);
        RegularityDiagnostic hi =
            zero_regularity(PotentialSpec{}, well(1.2 * v0star), 0.25);
        CHECK(hi.regular_h);
    }
}

TEST_CASE("Feshbach block inversion") {
    SUBCASE("identity") {
        Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(5, 5);
        Eigen::MatrixXcd inv = feshbach_invert(I, {0, 2});
        CHECK((inv - I).norm() < 1e-14);
    }
    SUBCASE("2x2 worked example") {
        Eigen::MatrixXcd L(2, 2);
        L << 2, 1, 1, 1;
        Eigen::MatrixXcd inv = feshbach_invert(L, {0});
        CHECK(std::abs(inv(0, 0) - cplx{1, 0}) < 1e-14);
        CHECK(std::abs(inv(0, 1) - cplx{-1, 0}) < 1e-14);
        CHECK(std::abs(inv(1, 0) - cplx{-1, 0}) < 1e-14);
        CHECK(std::abs(inv(1, 1) - cplx{2, 0}) < 1e-14);
    }
    SUBCASE("random hermitian matrices match the direct inverse") {
        std::mt19937_64 rng(2024);
        std::normal_distribution<double> gauss;
        for (int trial = 0; trial < 100; ++trial) {
            int n = 8;
            Eigen::MatrixXcd M(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) M(i, j) = cplx{gauss(rng), gauss(rng)};
            Eigen::MatrixXcd L = M + M.adjoint() +
                                 3.0 * Eigen::MatrixXcd::Identity(n, n);
            std::vector<int> split{0, 3, 5};
            Eigen::MatrixXcd inv = feshbach_invert(L, split);
            CHECK((inv - L.inverse()).norm() <= 1e-10 * L.inverse().norm() * 10);
        }
    }
    SUBCASE("singular L00 is a precondition error") {
        Eigen::MatrixXcd L = Eigen::MatrixXcd::Identity(3, 3);
        L(0, 0) = 0;
        CHECK_THROWS_AS(feshbach_invert(L, {0}), std::invalid_argument);
    }
    SUBCASE("singular Schur complement reports L singular") {
        Eigen::MatrixXcd L(2, 2);
        L << 1, 1, 1, 1;  // singular, L00 = 1 invertible
        CHECK_THROWS_AS(feshbach_invert(L, {0}), FeshbachError);
    }
}

TEST_CASE("Agmon tail fit") {
    SUBCASE("no negative eigenvalue is a precondition error") {
        Eigenpair p;
        p.value = 0.5;
        CHECK_THROWS_AS(agmon_fit(p), std::invalid_argument);
    }
    SUBCASE("ground-state rate tracks sqrt(|E0|) and deepens with the well") {
        Grid3D g(64, 14.0);
        double rate10 = 0, rate20 = 0;
        for (double v0 : {10.0, 20.0}) {
            HamiltonianOperator H(g, PotentialSpec{}, well(v0));
            SpectrumReport rep = eigensolve(H, 2, 0.02);
            REQUIRE(rep.negative_count() >= 1);
            AgmonFit fit = agmon_fit(rep.pairs[0], 2.2, 5.2);
            REQUIRE(fit.reliable);
            CHECK(fit.fitted_rate ==
                  doctest::Approx(fit.reference_lambda).epsilon(0.15));
            (v0 == 10.0 ? rate10 : rate20) = fit.fitted_rate;
        }
        CHECK(rate20 > rate10);
    }
}

TEST_CASE("embedded window scan finds no localized candidates") {
    Grid3D g(16, 8.0);
    PotentialSpec V;
    V.scalar.terms.push_back({BumpKind::Gaussian, {}, -2.0, 1.0});
    HamiltonianOperator H(g, small_gaussian_a(), V);
    auto found = embedded_scan(H, 3.0);
    CHECK(found.empty());
}

TEST_CASE("resolvent series identity") {
    Grid3D g(32, 14.0);
    SUBCASE("U = 0: both sides are R0, residual at solver tolerance") {
        double res = resolvent_series_check(g, PotentialSpec{}, PotentialSpec{},
                                            cplx{1.0, 1.0}, 2);
        CHECK(res < 1e-9);
    }
    SUBCASE("small gaussian U at lambda = 1 + i") {
        PotentialSpec V;
        V.scalar.terms.push_back({BumpKind::Gaussian, {0.2, 0, 0}, -0.4, 1.0});
        PotentialSpec A;
        A.vector[1].terms.push_back({BumpKind::Gaussian, {}, 0.2, 1.0});
        double res = resolvent_series_check(g, A, V, cplx{1.0, 1.0}, 5);
        CHECK(res < 1e-6);
    }
    SUBCASE("lambda^2 on the point spectrum is an error") {
        PotentialSpec V = well(5);
        HamiltonianOperator H(g, PotentialSpec{}, V);
        SpectrumReport rep = eigensolve(H, 2, 0.02);
        REQUIRE(rep.negative_count() == 1);
        cplx lambda = std::sqrt(cplx{rep.pairs[0].value, 0});
        CHECK_THROWS_AS(resolvent_series_check(g, PotentialSpec{}, V, lambda, 1),
                        OnSpectrumError);
    }
}
