#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fnsr/antidiv.hpp>
#include <fnsr/errors.hpp>
#include <fnsr/random_fields.hpp>
#include <fnsr/spectral_ops.hpp>

#include <cmath>

using namespace fnsr;

namespace {

TorusVectorField sample_vector(const TorusGrid& g, auto f0, auto f1) {
    TorusVectorField v(g);
    Eigen::ArrayXd a(g.size()), b(g.size());
    for_each_point(g, [&](std::ptrdiff_t idx, const std::array<double, 3>& x) {
        a[idx] = f0(x);
        b[idx] = f1(x);
    });
    v[0] = TorusField(g, std::move(a));
    v[1] = TorusField(g, std::move(b));
    return v;
}

double rel_div_error(const TorusTensorField& R, const TorusVectorField& v) {
    auto dv = divergence(R);
    double num = 0, den = 0;
    for (int i = 0; i < v.grid().d; ++i) {
        Eigen::ArrayXd target = v[i].values() - v[i].values().mean();
        num = std::max(num, (dv[i].values() - target).abs().maxCoeff());
        den = std::max(den, target.abs().maxCoeff());
    }
    return num / std::max(den, 1e-30);
}

double max_trace(const TorusTensorField& R) {
    Eigen::ArrayXd tr = Eigen::ArrayXd::Zero(R.grid().size());
    for (int i = 0; i < R.grid().d; ++i) tr += R(i, i).values();
    return tr.abs().maxCoeff();
}

} // namespace

TEST_CASE("antidiv of a constant field is zero") {
    TorusGrid g{2, 32};
    TorusVectorField v(g);
    v[0] = TorusField(g, Eigen::ArrayXd::Constant(g.size(), 2.0));
    v[1] = TorusField(g, Eigen::ArrayXd::Constant(g.size(), -0.5));
    auto R = antidiv(v);
    CHECK(lebesgue_norm_inf(R) < 1e-13);
}

TEST_CASE("antidiv inverts divergence on a single mode") {
    TorusGrid g{2, 32};
    auto v = sample_vector(
        g, [](auto& x) { return std::sin(x[1]); }, [](auto&) { return 0.0; });
    auto R = antidiv(v);
    CHECK(rel_div_error(R, v) < 1e-12);
    CHECK(max_trace(R) < 1e-13);
    CHECK((R(0, 1).values() - R(1, 0).values()).abs().maxCoeff() == 0.0);
}

TEST_CASE("antidiv identities on random smooth fields") {
    for (int d : {2, 3}) {
        TorusGrid g{d, d == 2 ? 32 : 16};
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            auto v = random_vector_field(g, 5, seed);
            auto R = antidiv(v);
            CHECK(rel_div_error(R, v) < 1e-10);
            CHECK(max_trace(R) < 1e-10 * std::max(1.0, lebesgue_norm_inf(R)));
            for (int i = 0; i < d; ++i)
                for (int j = i + 1; j < d; ++j)
                    CHECK((R(i, j).values() - R(j, i).values()).abs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("antidiv of laplacian equals the symmetric gradient") {
    for (int d : {2, 3}) {
        TorusGrid g{d, d == 2 ? 32 : 16};
        for (std::uint64_t seed : {4u, 5u}) {
            auto v = random_solenoidal_field(g, 5, seed);
            auto R = antidiv_of_laplacian(v);
            double worst = 0;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    auto sym = partial_derivative(v[j], i) + partial_derivative(v[i], j);
                    worst = std::max(worst,
                                     (R(i, j).values() - sym.values()).abs().maxCoeff());
                }
            CHECK(worst < 1e-9 * std::max(1.0, lebesgue_norm_inf(R)));
        }
    }
}

TEST_CASE("antidiv of laplacian on explicit shear flows") {
    TorusGrid g{2, 32};
    SUBCASE("zero maps to zero") {
        auto R = antidiv_of_laplacian(TorusVectorField(g));
        CHECK(lebesgue_norm_inf(R) == 0.0);
    }
    SUBCASE("(sin x2, 0) and (-sin x2, sin x1)") {
        for (auto [f0, f1] : {std::pair<double (*)(double, double), double (*)(double, double)>
                                  {[](double, double y) { return std::sin(y); },
                                   [](double, double) { return 0.0; }},
                              {[](double, double y) { return -std::sin(y); },
                               [](double x, double) { return std::sin(x); }}}) {
            auto v = sample_vector(
                g, [&](auto& x) { return f0(x[0], x[1]); },
                [&](auto& x) { return f1(x[0], x[1]); });
            auto R = antidiv_of_laplacian(v);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    auto sym = partial_derivative(v[j], i) + partial_derivative(v[i], j);
                    CHECK((R(i, j).values() - sym.values()).abs().maxCoeff() < 1e-11);
                }
        }
    }
    SUBCASE("non-solenoidal input is rejected") {
        auto v = sample_vector(
            g, [](auto& x) { return std::sin(x[0]); }, [](auto&) { return 0.0; });
        CHECK_THROWS_AS((void)antidiv_of_laplacian(v), invariant_error);
    }
}

TEST_CASE("bilinear antidivergence") {
    TorusGrid g{2, 32};
    SUBCASE("A = 0 gives 0") {
        auto v = random_vector_field(g, 4, 8);
        auto B = bilinear_antidiv(v, TorusTensorField(g));
        CHECK(lebesgue_norm_inf(B) == 0.0);
    }
    SUBCASE("constant v reduces to plain antidivergence rows") {
        TorusVectorField e1(g);
        e1[0] = TorusField(g, Eigen::ArrayXd::Ones(g.size()));
        auto A = random_symmetric_tensor_field(g, 4, 17);
        // remove the mean
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                A(i, j) = TorusField(g, A(i, j).values() - A(i, j).mean());
        auto B = bilinear_antidiv(e1, A);
        auto dB = divergence(B);
        // div B = (vA)_i = A_0i, mean-free since A is
        for (int i = 0; i < 2; ++i)
            CHECK((dB[i].values() - A(0, i).values()).abs().maxCoeff() <
                  1e-10 * std::max(1.0, lebesgue_norm_inf(A)));
    }
    SUBCASE("divergence identity on random data") {
        for (int d : {2, 3}) {
            // bands chosen so products stay strictly below the Nyquist mode
            TorusGrid gg{d, 32};
            auto v = random_vector_field(gg, 4, 23);
            auto A = random_symmetric_tensor_field(gg, 4, 29);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    A(i, j) = TorusField(gg, A(i, j).values() - A(i, j).mean());
            auto B = bilinear_antidiv(v, A);
            auto dB = divergence(B);
            double worst = 0, scale = 0;
            for (int i = 0; i < d; ++i) {
                Eigen::ArrayXd target = Eigen::ArrayXd::Zero(gg.size());
                for (int l = 0; l < d; ++l) target += v[l].values() * A(l, i).values();
                target -= target.mean();
                worst = std::max(worst, (dB[i].values() - target).abs().maxCoeff());
                scale = std::max(scale, target.abs().maxCoeff());
            }
            CHECK(worst / scale < 1e-9);
        }
    }
    SUBCASE("tensor with nonzero mean is rejected") {
        auto v = random_vector_field(g, 4, 31);
        TorusTensorField A(g);
        A(0, 0) = TorusField(g, Eigen::ArrayXd::Ones(g.size()));
        CHECK_THROWS_AS((void)bilinear_antidiv(v, A), invariant_error);
    }
}

TEST_CASE("Lebesgue boundedness of antidiv across a random corpus") {
    TorusGrid g{2, 64};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto v = random_vector_field(g, 8, seed * 7);
        // mean-free input so the ratio is meaningful
        for (int i = 0; i < 2; ++i) v[i] = TorusField(g, v[i].values() - v[i].mean());
        auto R = antidiv(v);
        for (double p : {1.0, 4.0 / 3.0, 2.0, 4.0}) {
            double ratio = lebesgue_norm(R, p) / lebesgue_norm(v, p);
            CHECK(ratio < 10.0);
        }
        CHECK(lebesgue_norm_inf(R) / lebesgue_norm_inf(v) < 10.0);
    }
}

TEST_CASE("oscillation gain: antidiv contracts by 1/sigma on dilated input") {
    TorusGrid g{2, 128};
    auto base = sample_vector(
        g, [](auto&) { return 0.0; }, [](auto& x) { return std::sin(x[0]); });
    double n1 = lebesgue_norm(antidiv(base), 2.0);
    std::vector<double> logs, logsig;
    for (int sigma : {1, 2, 4, 8, 16}) {
        TorusVectorField vs(g);
        vs[0] = TorusField::zero(g);
        vs[1] = dilate(base[1], sigma);
        double ns = lebesgue_norm(antidiv(vs), 2.0);
        logs.push_back(std::log2(ns / n1));
        logsig.push_back(std::log2(double(sigma)));
    }
    // least-squares slope
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        mx += logsig[i];
        my += logs[i];
    }
    mx /= logs.size();
    my /= logs.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        num += (logsig[i] - mx) * (logs[i] - my);
        den += (logsig[i] - mx) * (logsig[i] - mx);
    }
    CHECK(std::abs(num / den + 1.0) < 0.1);
}
