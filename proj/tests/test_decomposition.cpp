#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fnsr/decomposition.hpp>
#include <fnsr/errors.hpp>
#include <fnsr/temporal.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

using namespace fnsr;

namespace {

Eigen::MatrixXd identity(int d) { return Eigen::MatrixXd::Identity(d, d); }

double op_norm(const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd random_direction(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd u(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) u(i, j) = u(j, i) = normal(rng);
    return u / op_norm(u);
}

double reconstruction_error(const GammaCoefficients& gc, const Eigen::MatrixXd& r) {
    return (gc.reconstruct() - r).cwiseAbs().maxCoeff();
}

// Off-diagonal pencil coefficients have the closed form
// c1 = c2 = (1 - eps^2)/2, c3/c4 = (1 + eps^2)/2 +- eps.
void check_offdiag_closed_form(double eps) {
    Eigen::MatrixXd r = identity(2);
    r(0, 1) = r(1, 0) = eps;
    auto gc = decompose(r, DirectionSet::defaults(2));
    CHECK(gc.c[0] == doctest::Approx((1 - eps * eps) / 2).epsilon(1e-12));
    CHECK(gc.c[1] == doctest::Approx((1 - eps * eps) / 2).epsilon(1e-12));
    CHECK(gc.c[2] == doctest::Approx((1 + eps * eps) / 2 + eps).epsilon(1e-12));
    CHECK(gc.c[3] == doctest::Approx((1 + eps * eps) / 2 - eps).epsilon(1e-12));
    CHECK(gc.c[2] - gc.c[3] == doctest::Approx(2 * eps).epsilon(1e-12));
    CHECK(reconstruction_error(gc, r) <= 1e-12);
}

} // namespace

TEST_CASE("identity anchor is reproduced exactly") {
    auto gc2 = decompose(identity(2), DirectionSet::defaults(2));
    REQUIRE(gc2.c.size() == 4);
    for (double c : gc2.c) CHECK(c == 0.5);
    CHECK(gc2.iterations == 0);
    CHECK(reconstruction_error(gc2, identity(2)) == 0.0);

    auto gc3 = decompose(identity(3), DirectionSet::defaults(3));
    REQUIRE(gc3.c.size() == 9);
    for (int k = 0; k < 3; ++k) CHECK(gc3.c[k] == 0.5);
    for (int k = 3; k < 9; ++k) CHECK(gc3.c[k] == 0.25);
    CHECK(gc3.iterations == 0);
    CHECK(reconstruction_error(gc3, identity(3)) == 0.0);
}

TEST_CASE("off-diagonal perturbation has closed-form coefficients") {
    check_offdiag_closed_form(1.0 / 8);
    check_offdiag_closed_form(-1.0 / 8);
    check_offdiag_closed_form(0.3);
}

TEST_CASE("matrices outside the half ball are rejected") {
    auto lam = DirectionSet::defaults(2);
    CHECK_THROWS_AS(decompose(2.0 * identity(2), lam), std::domain_error);

    Eigen::MatrixXd r = identity(2);
    r(0, 0) += 0.51;
    CHECK_THROWS_AS(decompose(r, lam), std::domain_error);

    // The closed boundary itself decomposes.
    r = identity(2);
    r(0, 0) += 0.5;
    r(1, 1) -= 0.5;
    auto gc = decompose(r, lam);
    CHECK(reconstruction_error(gc, r) <= 1e-12);
    for (double c : gc.c) CHECK(c > 0);

    Eigen::MatrixXd asym = identity(2);
    asym(0, 1) = 0.1;
    CHECK_THROWS_AS(decompose(asym, lam), std::invalid_argument);
    CHECK_THROWS_AS(decompose(identity(3), lam), std::invalid_argument);
}

TEST_CASE("coefficients stay positive and reconstruct across the ball") {
    std::mt19937_64 rng(0x5eed0001);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    for (int d : {2, 3}) {
        auto lam = DirectionSet::defaults(d);
        double worst_rec = 0, min_interior = 1, min_boundary = 1;
        int max_iters = 0;
        for (int trial = 0; trial < 400; ++trial) {
            Eigen::MatrixXd u = random_direction(rng, d);
            // Half the samples on the 0.49 sphere, half strictly inside.
            double radius = trial % 2 == 0 ? 0.49 : 0.49 * unif(rng);
            Eigen::MatrixXd r = identity(d) + radius * u;
            auto gc = decompose(r, lam);
            worst_rec = std::max(worst_rec, reconstruction_error(gc, r));
            double cmin = *std::min_element(gc.c.begin(), gc.c.end());
            (trial % 2 == 0 ? min_boundary : min_interior) =
                std::min(trial % 2 == 0 ? min_boundary : min_interior, cmin);
            max_iters = std::max(max_iters, gc.iterations);
        }
        CAPTURE(d);
        CHECK(worst_rec < 1e-10);
        CHECK(min_interior > 0);
        CHECK(min_boundary > (d == 2 ? 0.1 : 0.005));
        CHECK(max_iters <= 12);
    }

    // Structured extremes: diagonal sign patterns on the 0.49 sphere.
    for (int d : {2, 3}) {
        auto lam = DirectionSet::defaults(d);
        for (int mask = 0; mask < (1 << d); ++mask) {
            Eigen::MatrixXd r = identity(d);
            for (int i = 0; i < d; ++i) r(i, i) += (mask >> i & 1) ? 0.49 : -0.49;
            auto gc = decompose(r, lam);
            CHECK(reconstruction_error(gc, r) < 1e-10);
            for (double c : gc.c) CHECK(c > 1e-3);
        }
    }
}

TEST_CASE("coefficient curvature matches the closed form") {
    // Along R(t) = Id + t * offdiag the coefficients are analytic with
    // second derivative exactly -1/-1/+1/+1; central second differences
    // scale by 4 when h halves, and the gradient at t = 0 is (0, 0, 1, -1).
    auto lam = DirectionSet::defaults(2);
    auto coeff_at = [&](double t) {
        Eigen::MatrixXd r = identity(2);
        r(0, 1) = r(1, 0) = t;
        return decompose(r, lam).c;
    };
    double h = 1e-3;
    auto up = coeff_at(h), dn = coeff_at(-h), mid = coeff_at(0);
    auto up2 = coeff_at(h / 2), dn2 = coeff_at(-h / 2);
    for (int k = 0; k < 4; ++k) {
        double d2 = up[k] - 2 * mid[k] + dn[k];
        double d2h = up2[k] - 2 * mid[k] + dn2[k];
        CHECK(d2 / d2h == doctest::Approx(4.0).epsilon(1e-4));
        double expect2 = k < 2 ? -1.0 : 1.0;
        CHECK(d2 / (h * h) == doctest::Approx(expect2).epsilon(1e-6));
    }
    double fd = 1e-5;
    auto upd = coeff_at(fd), dnd = coeff_at(-fd);
    double grad[] = {0.0, 0.0, 1.0, -1.0};
    for (int k = 0; k < 4; ++k)
        CHECK((upd[k] - dnd[k]) / (2 * fd) == doctest::Approx(grad[k]).epsilon(1e-8));
}

TEST_CASE("gamma returns square roots of the coefficients") {
    auto lam = DirectionSet::defaults(2);
    for (int k = 0; k < 4; ++k)
        CHECK(gamma(identity(2), lam, k) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));

    Eigen::MatrixXd r = identity(2);
    r(0, 1) = r(1, 0) = 0.125;
    auto gc = decompose(r, lam);
    for (int k = 0; k < 4; ++k)
        CHECK(gamma(r, lam, k) == doctest::Approx(std::sqrt(gc.c[k])).epsilon(1e-14));
    CHECK_THROWS_AS(gamma(identity(2), lam, 4), std::out_of_range);
}

TEST_CASE("inadequate frames are reported") {
    // Axes alone express the identity but span no off-diagonal part.
    DirectionSet axes;
    axes.d = 2;
    axes.directions = {{1, 0, 0}, {0, 1, 0}};
    axes.points = {{0, 0.25, 0}, {0.75, 0, 0}};

    auto gc = decompose(identity(2), axes);
    CHECK(gc.c[0] == 1.0);
    CHECK(gc.c[1] == 1.0);

    Eigen::MatrixXd r = identity(2);
    r(0, 1) = r(1, 0) = 0.125;
    CHECK_THROWS_AS(decompose(r, axes), invariant_error);

    // A frame that cannot express the identity at all.
    DirectionSet skew;
    skew.d = 2;
    skew.directions = {{1, 0, 0}, {1, 1, 0}};
    skew.points = {{0, 0.25, 0}, {0.5, 0.125, 0}};
    CHECK_THROWS_AS(decompose(identity(2), skew), invariant_error);
    try {
        decompose(identity(2), skew);
    } catch (const invariant_error& e) {
        CHECK(std::string(e.what()).find("identity") != std::string::npos);
    }
}

TEST_CASE("pointwise field decomposition") {
    TorusGrid g{2, 32};
    auto lam = DirectionSet::defaults(2);

    // Zero stress: the argument is the identity everywhere and every
    // coefficient field is the constant anchor root.
    TorusTensorField zero(g);
    TorusField two(g, Eigen::ArrayXd::Constant(g.size(), 2.0));
    auto fields = pointwise_decompose_field(zero, two, lam);
    REQUIRE(fields.size() == 4);
    double root = std::sqrt(0.5);
    for (const auto& f : fields) {
        CHECK((f.values() == root).all());
    }

    // Smooth small stress through the saturating cutoff: rho stays exactly
    // 2 while |rbar|_F <= 1/2, and the reconstruction holds pointwise.
    TorusTensorField rbar(g);
    Eigen::ArrayXd a(g.size()), b(g.size());
    for_each_point(g, [&](std::ptrdiff_t idx, const std::array<double, 3>& x) {
        a[idx] = 0.15 * std::sin(x[0]) * std::cos(x[1]);
        b[idx] = 0.10 * std::cos(x[0] + 2 * x[1]);
    });
    rbar(0, 0) = TorusField(g, a);
    rbar(1, 1) = TorusField(g, -a);
    rbar(0, 1) = TorusField(g, b);
    rbar(1, 0) = TorusField(g, b);

    auto rho = stress_cutoff_rho(rbar);
    CHECK((rho.values() == 2.0).all());

    auto gf = pointwise_decompose_field(rbar, rho, lam);
    double worst = 0;
    auto e3 = lam.unit(2), e4 = lam.unit(3);
    for (std::ptrdiff_t idx = 0; idx < g.size(); ++idx) {
        double s00 = 1.0 - rbar(0, 0).values()[idx] / 2.0;
        double s11 = 1.0 - rbar(1, 1).values()[idx] / 2.0;
        double s01 = -rbar(0, 1).values()[idx] / 2.0;
        double c0 = gf[0].values()[idx] * gf[0].values()[idx];
        double c1 = gf[1].values()[idx] * gf[1].values()[idx];
        double c2 = gf[2].values()[idx] * gf[2].values()[idx];
        double c3 = gf[3].values()[idx] * gf[3].values()[idx];
        worst = std::max(worst, std::abs(c0 + c2 * e3[0] * e3[0] + c3 * e4[0] * e4[0] - s00));
        worst = std::max(worst, std::abs(c1 + c2 * e3[1] * e3[1] + c3 * e4[1] * e4[1] - s11));
        worst = std::max(worst, std::abs(c2 * e3[0] * e3[1] + c3 * e4[0] * e4[1] - s01));
    }
    CHECK(worst < 1e-10);

    // rho below 2 is rejected; so is a stress pushing past the half ball.
    TorusField one(g, Eigen::ArrayXd::Constant(g.size(), 1.0));
    CHECK_THROWS_AS(pointwise_decompose_field(zero, one, lam), std::domain_error);

    TorusTensorField big(g);
    Eigen::ArrayXd bump = Eigen::ArrayXd::Zero(g.size());
    bump[5] = 1.4;
    big(0, 0) = TorusField(g, bump);
    try {
        pointwise_decompose_field(big, two, lam);
        CHECK(false);
    } catch (const std::domain_error& e) {
        CHECK(std::string(e.what()).find("grid point") != std::string::npos);
    }
}
