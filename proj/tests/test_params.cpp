#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fnsr/params.hpp>

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

using namespace fnsr;

namespace {

Rational rat(long long n, long long d = 1) { return Rational(n, d); }

ParamPoint point(int d, Rational theta, Rational p, Rational q, Rational s,
                 Rational gamma) {
    ParamPoint pt;
    pt.d = d;
    pt.theta = theta;
    pt.p = p;
    pt.q = q;
    pt.s = s;
    pt.gamma = gamma;
    return pt;
}

// The scheme preset operating point and its stored witness.
ParamPoint preset_point() { return point(2, rat(1, 2), 1, 3, 1, rat(1, 2)); }

ExponentWitness preset_witness() {
    ExponentWitness w;
    w.beta = rat(3, 5);
    w.delta = rat(2, 3);
    w.zeta = rat(5, 2);
    w.margin = rat(1, 4);
    return w;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

} // namespace

TEST_CASE("rational strings round-trip") {
    CHECK(parse_rational("3/5") == rat(3, 5));
    CHECK(parse_rational("-7/3") == rat(-7, 3));
    CHECK(parse_rational("4") == rat(4));
    CHECK(parse_rational("0") == rat(0));
    CHECK(rational_to_string(rat(3, 5)) == "3/5");
    CHECK(rational_to_string(rat(-7, 3)) == "-7/3");
    CHECK(rational_to_string(rat(4)) == "4");
    CHECK(parse_rational(rational_to_string(rat(22, 7))) == rat(22, 7));
    CHECK_THROWS_AS(parse_rational(""), std::invalid_argument);
    CHECK_THROWS_AS(parse_rational("1/0"), std::invalid_argument);
    CHECK_THROWS_AS(parse_rational("x/y"), std::invalid_argument);
}

TEST_CASE("parameter points are validated") {
    CHECK_NOTHROW(preset_point().validate());
    CHECK_THROWS_AS(point(1, 0, 1, 2, 1, 0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(point(2, 0, rat(1, 2), 2, 1, 0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(point(2, 0, 1, 1, 1, 0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(point(2, 0, 1, 2, rat(1, 2), 0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(point(2, 0, 1, 2, 1, -1).validate(), std::invalid_argument);
    CHECK_THROWS_AS(point(2, -1, 1, 2, 1, 0).validate(), std::invalid_argument);
}

TEST_CASE("closed-form bounds match hand calculations") {
    auto b1 = closed_form(point(3, 1, 1, 2, 1, 1));
    CHECK(b1.q0 == rat(1));
    CHECK(b1.S2 == rat(4, 3));
    CHECK(!b1.Q.finite);

    auto b2 = closed_form(point(2, 0, 1, 2, 1, 0));
    CHECK(b2.q0 == rat(2));
    CHECK(b2.S3 == rat(2));
    CHECK(b2.S1.finite);
    CHECK(b2.S1.value == rat(2));

    // Finite Q above the dissipation order one.
    auto b3 = closed_form(point(2, 0, 1, 2, 1, rat(3, 2)));
    CHECK(b3.Q.finite);
    CHECK(b3.Q.value == rat(2));

    // Witness-dependent block at the preset witness.
    auto bw = closed_form(preset_point(), preset_witness());
    REQUIRE(bw.has_witness_block);
    CHECK(bw.K == rat(9, 4));
    CHECK(bw.s_max.finite);
    CHECK(bw.s_max.value == rat(10, 9));
    CHECK(bw.H == rat(1, 6));
    CHECK(bw.q_max.finite);
    CHECK(bw.q_max.value == rat(12));
    CHECK(bw.q_min == rat(12, 31));
    CHECK(bw.q_min < 1);
}

TEST_CASE("feasibility margins are exact at pinned points") {
    auto r1 = reduced_feasible(preset_point());
    REQUIRE(r1.feasible());
    CHECK(r1.witness->margin == rat(5, 12));
    CHECK(witness_slack(preset_point(), *r1.witness) == rat(5, 12));

    auto r2 = reduced_feasible(point(3, 1, 1, 3, 1, 1));
    REQUIRE(r2.feasible());
    CHECK(r2.witness->margin == rat(4, 15));
    CHECK(witness_slack(point(3, 1, 1, 3, 1, 1), *r2.witness) == rat(4, 15));

    auto r3 = reduced_feasible(point(2, rat(1, 2), 1, 3, 1, 0));
    REQUIRE(r3.feasible());
    CHECK(r3.witness->margin > 0);

    // The stored preset witness is feasible but not margin-optimal.
    CHECK(witness_slack(preset_point(), preset_witness()) == rat(1, 4));
}

TEST_CASE("infeasible points name the violated constraints") {
    auto r1 = reduced_feasible(point(2, 0, 2, 3, 1, 0));
    CHECK(!r1.feasible());
    REQUIRE(r1.infeasible_subsystem.size() == 1);
    CHECK(r1.infeasible_subsystem[0] == "perturbation-lp");

    auto r2 = reduced_feasible(point(2, 0, rat(5, 2), 3, 1, 0));
    CHECK(!r2.feasible());
    CHECK(r2.infeasible_subsystem == std::vector<std::string>{"perturbation-lp"});

    auto r3 = reduced_feasible(point(2, 2, 1, 3, 1, 1));
    CHECK(r3.infeasible_subsystem == std::vector<std::string>{"dissipation-order"});

    auto r4 = reduced_feasible(point(2, 0, 1, 3, 1, rat(5, 2)));
    CHECK(r4.infeasible_subsystem == std::vector<std::string>{"smoothness-cap"});

    auto r5 = reduced_feasible(point(2, 0, 1, 5, 1, rat(3, 2)));
    CHECK(r5.infeasible_subsystem == std::vector<std::string>{"integrability-cap"});
}

TEST_CASE("irreducible infeasible subsystems are minimal") {
    // s = 10 with gamma = 1 makes the regularity row unsatisfiable against
    // positivity of delta' and zeta', independently of beta'.
    auto r = reduced_feasible(point(2, 0, 1, rat(3, 2), 10, 1));
    CHECK(!r.feasible());
    std::vector<std::string> expect = {"delta-positive", "perturbation-lp",
                                       "perturbation-sobolev"};
    CHECK(r.infeasible_subsystem == expect);
}

TEST_CASE("corollary regions classify boundary examples") {
    CHECK(corollary_region(point(3, 1, 1, 3, rat(11, 10), 1)) == CorollaryRegion::r4);
    CHECK(corollary_region(point(3, 1, 1, 3, rat(5, 4), 1)) == CorollaryRegion::none);
    CHECK(closed_form(point(3, 1, 1, 3, 1, 1)).S2 == rat(6, 5));

    // The integrability gate is strict.
    CHECK(corollary_region(point(3, 1, rat(4, 3), 3, rat(11, 10), 1)) ==
          CorollaryRegion::none);

    CHECK(corollary_region(point(2, rat(1, 2), 1, 3, 1, 0)) == CorollaryRegion::r1);

    // Below q0 the region splits on p.
    CHECK(corollary_region(point(2, 0, 1, rat(5, 4), 2, rat(1, 4))) ==
          CorollaryRegion::r2);
    CHECK(corollary_region(point(2, 0, rat(5, 4), rat(5, 4), 2, rat(1, 4))) ==
          CorollaryRegion::r3);
    CHECK(corollary_region(point(2, 0, rat(5, 4), rat(5, 4), rat(100, 47), rat(1, 4))) ==
          CorollaryRegion::none);

    // Time-cutoff gate.
    CHECK(corollary_region(point(2, 1, 1, rat(5, 4), 2, rat(1, 4))) ==
          CorollaryRegion::none);

    CHECK(region_name(CorollaryRegion::r2) == "R2");
    CHECK(region_name(CorollaryRegion::none) == "none");
}

TEST_CASE("sweep confirms region points are feasible") {
    SweepGrid grid;
    grid.dims = {2, 3};
    grid.thetas = {0, rat(1, 2)};
    // 8/5 sits between the classifier gate 1 + 1/d and the hard limit 2.
    grid.ps = {1, rat(11, 10), rat(8, 5)};
    grid.qs = {rat(11, 10), rat(3, 2), 2, 3};
    grid.ss = {1, rat(9, 8), rat(3, 2)};
    grid.gammas = {0, rat(1, 4), 1, rat(3, 2)};

    auto report = soundness_sweep(grid, true);
    CHECK(report.total == 2 * 2 * 3 * 4 * 3 * 4);
    CHECK(report.in_region > 0);
    CHECK(report.counterexamples.empty());
    CHECK(report.feasible_in_region == report.in_region);
    CHECK(report.converse_checked);
    // The theorem region strictly contains the corollary region.
    CHECK(report.feasible_outside_region > 0);

    // The alternative regularity reading only enlarges the feasible set.
    auto alt = soundness_sweep(grid, false, Rel2Reading::two_over_s);
    CHECK(alt.counterexamples.empty());
    CHECK(alt.feasible_in_region == alt.in_region);
}

TEST_CASE("default sweep grid is large and spans both dimensions") {
    auto grid = default_sweep_grid();
    CHECK(grid.dims == std::vector<int>{2, 3});
    long long total = (long long)grid.dims.size() * grid.thetas.size() *
                      grid.ps.size() * grid.qs.size() * grid.ss.size() *
                      grid.gammas.size();
    CHECK(total >= 10000);
}

TEST_CASE("bounds are monotone where the derivation says so") {
    // s_max falls as delta' grows (positive smoothness order).
    auto pt = preset_point();
    auto w1 = preset_witness();
    auto w2 = w1;
    w2.delta += rat(1, 10);
    CHECK(closed_form(pt, w2).s_max.value < closed_form(pt, w1).s_max.value);

    // At q = q0 the zero-delta bound is exactly 2, independent of zeta'.
    for (int d : {2, 3}) {
        for (Rational gamma : {rat(1, 4), rat(1, 3)}) {
            auto base = point(d, 0, 1, 2, 1, gamma);
            Rational q0 = closed_form(base).q0;
            for (Rational zeta : {rat(2), rat(3), rat(7, 2)}) {
                ExponentWitness w;
                w.beta = 1;
                w.delta = 0;
                w.zeta = zeta;
                w.margin = 0;
                auto b = closed_form(point(d, 0, 1, q0, 1, gamma), w);
                CHECK(b.s_max.finite);
                CHECK(b.s_max.value == rat(2));
            }
        }
    }

    // Above q0 the bound grows with zeta', below it falls.
    auto at = [&](Rational q, Rational zeta) {
        ExponentWitness w;
        w.beta = 1;
        w.delta = 0;
        w.zeta = zeta;
        w.margin = 0;
        return closed_form(point(2, 0, 1, q, 1, rat(1, 4)), w).s_max.value;
    };
    CHECK(at(rat(3, 2), 3) > at(rat(3, 2), 2));  // q0(2, 1/4) = 4/3 < 3/2
    CHECK(at(rat(5, 4), 3) < at(rat(5, 4), 2));

    // The low-q regularity cap grows with d and falls with p.
    auto s1 = [&](int d, Rational p) {
        return closed_form(point(d, 0, p, rat(5, 4), 1, rat(1, 4))).S1.value;
    };
    CHECK(s1(2, rat(5, 4)) == rat(100, 47));
    CHECK(s1(3, rat(5, 4)) == rat(200, 79));
    CHECK(s1(2, 1) == rat(20, 9));
    CHECK(s1(2, rat(5, 4)) < s1(2, 1));

    // The regularity denominator stays positive across the admissible box.
    for (int d : {2, 3})
        for (Rational gamma : {rat(0), rat(1, 2), rat(3, 2), rat(3)})
            for (Rational q : {rat(21, 20), rat(3, 2), rat(3), rat(6)}) {
                Rational x = gamma - Rational(d - 1) / q;
                Rational f1 = (d - 1) + x;
                Rational f2 = (d - 1) + (1 - Rational(1, d)) * x;
                CHECK(std::min(f1, f2) > 0);
            }
}

TEST_CASE("synthesized integers respect the frequency ladder") {
    auto pt = preset_point();
    auto w = preset_witness();
    Rational alpha = rat(33, 100);

    struct Expect {
        long long lambda, mu, nu, sigma, kappa;
    };
    std::vector<Expect> table = {{8, 2, 2, 2, 6},
                                 {16, 3, 2, 2, 10},
                                 {32, 4, 2, 4, 18},
                                 {64, 4, 3, 4, 31}};
    for (const auto& e : table) {
        auto m = integer_map(pt, w, BigInt(e.lambda), alpha);
        CHECK(m.mu == BigInt(e.mu));
        CHECK(m.nu == BigInt(e.nu));
        CHECK(m.sigma == BigInt(e.sigma));
        CHECK(m.kappa == BigInt(e.kappa));
        CHECK(m.alpha == alpha);
        CHECK(m.r == rat(17, 16));
        CHECK(m.eta == rat(33, 800));
    }

    CHECK(ceil_pow(BigInt(8), rat(33, 100)) == BigInt(2));
    CHECK(ceil_pow(BigInt(1) << 40, rat(15, 4)) == BigInt(1) << 150);
    CHECK(pow2_at_least(BigInt(3)) == BigInt(4));
    CHECK(pow2_at_least(BigInt(4)) == BigInt(4));
    CHECK(pow2_at_least(BigInt(1)) == BigInt(1));
}

TEST_CASE("relation checks gate the synthesis") {
    auto pt = preset_point();
    auto w = preset_witness();

    auto big = synthesize_integers(pt, w, BigInt(1) << 40);
    REQUIRE(big.ok());
    CHECK(big.synthesis->alpha == rat(3, 2));
    CHECK(big.synthesis->mu == BigInt(1) << 60);
    CHECK(big.synthesis->nu == BigInt(1) << 36);
    CHECK(big.synthesis->sigma == BigInt(1) << 40);
    CHECK(big.synthesis->kappa == BigInt(1) << 150);
    CHECK(big.synthesis->r == rat(17, 16));
    CHECK(big.synthesis->eta == rat(3, 16));
    CHECK(violated_relations(pt, *big.synthesis, ConstantTable{}).empty());

    auto small = synthesize_integers(pt, w, BigInt(2));
    CHECK(!small.ok());
    CHECK(contains(small.violated, "perturbation-lp"));

    // The time-shifted regularity relation is implied by the primary one
    // whenever sigma * mu >= 1: its left side only loses a sigma * mu factor.
    const auto& s = *big.synthesis;
    std::vector<std::pair<BigInt, Rational>> shifted = {
        {s.sigma, pt.gamma - 1},
        {s.kappa, rat(1, 2) - 1 / pt.s},
        {s.mu, pt.gamma - 1 + Rational(pt.d - 1) / 2 - Rational(pt.d - 1) / pt.q}};
    CHECK(power_product_leq(shifted, 100, s.lambda, -s.eta));
}

TEST_CASE("witnesses are checked before synthesis") {
    auto pt = preset_point();
    ExponentWitness bad;
    bad.beta = rat(1, 10);
    bad.delta = rat(4, 10); // violates the temporal-capacity row
    bad.zeta = 2;
    bad.margin = rat(1, 100);
    CHECK_THROWS_AS(integer_map(pt, bad, BigInt(16), rat(1, 3)),
                    std::invalid_argument);
}
