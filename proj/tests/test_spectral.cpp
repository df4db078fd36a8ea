#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fnsr/field.hpp>
#include <fnsr/spectral_ops.hpp>
#include <fnsr/random_fields.hpp>

#include <cmath>
#include <numbers>

using namespace fnsr;
using std::numbers::pi;

namespace {

TorusField sample_scalar(const TorusGrid& g, auto f) {
    Eigen::ArrayXd v(g.size());
    for_each_point(g, [&](std::ptrdiff_t idx, const std::array<double, 3>& x) {
        v[idx] = f(x);
    });
    return TorusField(g, std::move(v));
}

double max_abs(const TorusField& a, const TorusField& b) {
    return (a.values() - b.values()).abs().maxCoeff();
}

} // namespace

TEST_CASE("fractional laplacian reproduces single-mode eigenvalues") {
    TorusGrid g{2, 32};
    auto u = sample_scalar(g, [](auto& x) { return std::sin(x[0]); });

    SUBCASE("theta=1 acts as -Laplace on sin(x1)") {
        auto v = frac_laplacian(u, 1.0);
        CHECK(max_abs(v, u) < 1e-12);
    }
    SUBCASE("theta=1/2 on cos(2 x1) multiplies by 2") {
        auto c = sample_scalar(g, [](auto& x) { return std::cos(2 * x[0]); });
        auto v = frac_laplacian(c, 0.5);
        CHECK((v.values() - 2 * c.values()).abs().maxCoeff() < 1e-12);
    }
    SUBCASE("theta=0 is the identity") {
        auto v = frac_laplacian(u, 0.0);
        CHECK(max_abs(v, u) == 0.0);
    }
    SUBCASE("negative order is rejected") {
        CHECK_THROWS_AS((void)frac_laplacian(u, -0.25), std::invalid_argument);
    }
    SUBCASE("semigroup composition") {
        auto w = random_scalar_field(g, /*band=*/5, /*seed=*/11);
        auto a = frac_laplacian(frac_laplacian(w, 0.3), 0.45);
        auto b = frac_laplacian(w, 0.75);
        CHECK(max_abs(a, b) < 1e-10);
    }
}

TEST_CASE("inverse laplacian inverts on the mean-free complement") {
    TorusGrid g{2, 32};
    SUBCASE("sin maps to -sin") {
        auto u = sample_scalar(g, [](auto& x) { return std::sin(x[0]); });
        auto v = inv_laplacian(u);
        CHECK((v.values() + u.values()).abs().maxCoeff() < 1e-12);
    }
    SUBCASE("constants map to zero") {
        auto u = TorusField(g, Eigen::ArrayXd::Constant(g.size(), 3.5));
        auto v = inv_laplacian(u);
        CHECK(v.values().abs().maxCoeff() < 1e-14);
    }
    SUBCASE("frequency rescaling scales the inverse by 1/sigma^2") {
        auto u1 = sample_scalar(g, [](auto& x) { return std::cos(x[0]); });
        auto u2 = sample_scalar(g, [](auto& x) { return std::cos(2 * x[0]); });
        auto v1 = inv_laplacian(u1);
        auto v2 = inv_laplacian(u2);
        // cos(2x) has eigenvalue 4: inverse is -cos(2x)/4
        CHECK((v2.values() + u2.values() / 4).abs().maxCoeff() < 1e-13);
        CHECK((v1.values() + u1.values()).abs().maxCoeff() < 1e-13);
    }
    SUBCASE("laplacian of inverse returns the mean-free part") {
        auto w = random_scalar_field(g, 6, 7);
        // frac_laplacian(., 1) is minus the Laplacian
        auto rt = frac_laplacian(inv_laplacian(w), 1.0);
        Eigen::ArrayXd mf = w.values() - w.values().mean();
        CHECK((rt.values() + mf).abs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("Leray projection") {
    TorusGrid g{2, 32};
    SUBCASE("gradients are annihilated") {
        auto p = sample_scalar(g, [](auto& x) { return std::sin(x[0] + x[1]); });
        auto gp = gradient(p);
        auto v = leray_project(gp);
        for (int i = 0; i < g.d; ++i)
            CHECK(v[i].values().abs().maxCoeff() < 1e-13);
    }
    SUBCASE("solenoidal fields are fixed points") {
        TorusVectorField v(g);
        v[0] = sample_scalar(g, [](auto& x) { return std::sin(x[1]); });
        v[1] = sample_scalar(g, [](auto& x) { return std::sin(x[0]); });
        auto w = leray_project(v);
        for (int i = 0; i < g.d; ++i)
            CHECK(max_abs(w[i], v[i]) < 1e-13);
    }
    SUBCASE("result is divergence-free, projection idempotent and self-adjoint") {
        auto v = random_vector_field(g, 6, 3);
        auto w = random_vector_field(g, 6, 4);
        auto pv = leray_project(v);
        auto pw = leray_project(w);
        CHECK(lebesgue_norm(divergence(pv), 2.0) < 1e-11);
        auto ppv = leray_project(pv);
        for (int i = 0; i < g.d; ++i)
            CHECK(max_abs(ppv[i], pv[i]) < 1e-12);
        double a = 0, b = 0;
        for (int i = 0; i < g.d; ++i) {
            a += (pv[i].values() * w.comp(i).values()).mean();
            b += (v.comp(i).values() * pw[i].values()).mean();
        }
        CHECK(a == doctest::Approx(b).epsilon(1e-11));
    }
    SUBCASE("mean flow is preserved") {
        TorusVectorField v(g);
        v[0] = TorusField(g, Eigen::ArrayXd::Constant(g.size(), 2.0));
        v[1] = TorusField(g, Eigen::ArrayXd::Constant(g.size(), -1.0));
        auto w = leray_project(v);
        CHECK(w[0].values().mean() == doctest::Approx(2.0));
        CHECK(w[1].values().mean() == doctest::Approx(-1.0));
    }
}

TEST_CASE("Lebesgue norms") {
    TorusGrid g{2, 64};
    SUBCASE("constant one has unit norm for every exponent") {
        auto u = TorusField(g, Eigen::ArrayXd::Ones(g.size()));
        for (double p : {1.0, 1.5, 2.0, 3.0}) CHECK(lebesgue_norm(u, p) == doctest::Approx(1.0));
        CHECK(lebesgue_norm_inf(u) == doctest::Approx(1.0));
    }
    SUBCASE("sin has L2 norm 1/sqrt(2) and sup norm 1") {
        auto u = sample_scalar(g, [](auto& x) { return std::sin(x[0]); });
        CHECK(lebesgue_norm(u, 2.0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
        CHECK(lebesgue_norm_inf(u) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("exponents below 1 are rejected") {
        auto u = TorusField(g, Eigen::ArrayXd::Ones(g.size()));
        CHECK_THROWS_AS((void)lebesgue_norm(u, 0.5), std::invalid_argument);
    }
}

TEST_CASE("Sobolev norms via Bessel multiplier") {
    TorusGrid g{2, 64};
    auto u = sample_scalar(g, [](auto& x) { return std::sin(x[0]); });
    SUBCASE("sin with gamma=1, q=2 has norm 1") {
        // (1+|k|^2)^{1/2} = sqrt(2) on the active modes
        CHECK(sobolev_norm(u, 1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("gamma=0 coincides with the Lebesgue norm") {
        auto w = random_scalar_field(g, 8, 21);
        CHECK(sobolev_norm(w, 0.0, 2.0) ==
              doctest::Approx(lebesgue_norm(w, 2.0)).epsilon(1e-11));
    }
}

TEST_CASE("Parseval identity ties grid mean-square to spectral mass") {
    TorusGrid g{2, 32};
    auto w = random_scalar_field(g, 9, 5);
    double grid_side = w.values().square().mean();
    double spec_side = w.spectrum().abs2().sum();
    CHECK(grid_side == doctest::Approx(spec_side).epsilon(1e-12));
}

TEST_CASE("gradient and divergence are consistent") {
    TorusGrid g{2, 32};
    auto p = random_scalar_field(g, 7, 9);
    auto gp = gradient(p);
    auto lap = frac_laplacian(p, 1.0);
    auto div_grad = divergence(gp);
    // div grad = Laplace = -(-Laplace)
    CHECK((div_grad.values() + lap.values()).abs().maxCoeff() < 1e-10);
}

TEST_CASE("dimension three round trips") {
    TorusGrid g{3, 16};
    auto u = sample_scalar(g, [](auto& x) {
        return std::sin(x[0]) * std::cos(x[1]) + std::sin(2 * x[2]);
    });
    auto v = frac_laplacian(inv_laplacian(u), 1.0);
    Eigen::ArrayXd mf = u.values() - u.values().mean();
    CHECK((v.values() + mf).abs().maxCoeff() < 1e-11);

    auto vec = random_vector_field(g, 4, 13);
    auto pv = leray_project(vec);
    CHECK(lebesgue_norm(divergence(pv), 2.0) < 1e-11);
}

TEST_CASE("spectral interpolation evaluates off-grid points") {
    TorusGrid g{2, 32};
    auto u = sample_scalar(g, [](auto& x) { return std::sin(x[0]) * std::cos(2 * x[1]); });
    double x0 = 0.7231, x1 = 2.113;
    double exact = std::sin(x0) * std::cos(2 * x1);
    CHECK(evaluate_at(u, {x0, x1, 0.0}) == doctest::Approx(exact).epsilon(1e-10));
}
