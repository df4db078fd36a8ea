#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fnsr {

// Exact-arithmetic feasibility engine for the exponent system that drives the
// iteration's frequency ladder.  Everything in this module is computed over
// the rationals; no floating point enters any code path.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// "a/b" (or plain "a") with arbitrary precision.  Throws std::invalid_argument
// on malformed input or a zero denominator.
Rational parse_rational(const std::string& text);
std::string rational_to_string(const Rational& value);

// Operating point of the iteration: dimension, dissipation order theta,
// integrability p (perturbation) and q (stress), regularity s, smoothness
// order gamma.  validate() enforces d >= 2, p >= 1, s >= 1, q > 1,
// gamma >= 0, theta >= 0.
struct ParamPoint {
    int d = 2;
    Rational theta = 0;
    Rational p = 1;
    Rational q = 2;
    Rational s = 1;
    Rational gamma = 0;

    void validate() const;
};

// Normalized exponents (beta', delta', zeta') of the oscillation, time
// concentration and time oscillation frequencies, relative to the spatial
// one.  margin is a lower bound for the slack of every strict row of the
// reduced system at this witness.
struct ExponentWitness {
    Rational beta = 0;
    Rational delta = 0;
    Rational zeta = 0;
    Rational margin = 0;
};

// Two readings of the regularity row differing in the time-concentration
// exponent carried by the kappa factor; one_over_s is the primary one.
enum class Rel2Reading { one_over_s, two_over_s };

// Outcome of the reduced-system feasibility decision.  On success a
// maximum-margin witness is produced; otherwise infeasible_subsystem names an
// irreducible set of rows that cannot hold together.
struct FeasibilityResult {
    std::optional<ExponentWitness> witness;
    std::vector<std::string> infeasible_subsystem;

    bool feasible() const { return witness.has_value(); }
};

// Decides strict feasibility of the reduced exponent system at pt by exact
// linear programming (the common slack is maximized, capped at 1).
FeasibilityResult reduced_feasible(const ParamPoint& pt,
                                   Rel2Reading reading = Rel2Reading::one_over_s);

// Smallest slack of the strict reduced-system rows at the witness exponents
// (the margin field is ignored).
Rational witness_slack(const ParamPoint& pt, const ExponentWitness& w,
                       Rel2Reading reading = Rel2Reading::one_over_s);

// A rational extended with +infinity, used for bounds that can be vacuous.
struct Bound {
    bool finite = true;
    Rational value = 0;

    static Bound of(Rational v) { return {true, std::move(v)}; }
    static Bound infinity() { return {false, 0}; }
};

// Closed forms attached to an operating point: the integrability threshold
// q0, the upper integrability limit Q, and the regularity caps S1 (low q),
// S2 (high q) and S3 (low q, small p).  The overload taking a witness also
// fills the witness block: the regularity cap s_max = zeta'/K, the
// integrability window (q_min, q_max) and the quantities K and H behind them.
struct ClosedFormBounds {
    Rational q0;
    Bound Q;
    Bound S1;
    Rational S2;
    Rational S3;

    bool has_witness_block = false;
    Rational K;
    Rational H;
    Rational q_min;
    Bound s_max;
    Bound q_max;
};

ClosedFormBounds closed_form(const ParamPoint& pt);
// Accepts boundary exponents (delta' >= 0, zeta' > 0); the margin is ignored.
ClosedFormBounds closed_form(const ParamPoint& pt, const ExponentWitness& w);

// First matching bullet of the explicit feasible-region description, or none.
// All bullets require p < 1 + 1/d and 2 theta <= gamma + 1; r1-r3 cover
// gamma < 1 (split by q against q0 and p against 1 + gamma/(gamma + d - 1)),
// r4 covers gamma in [1, d) above q0, r5 the residual low-q range.
enum class CorollaryRegion { none, r1, r2, r3, r4, r5 };

CorollaryRegion corollary_region(const ParamPoint& pt);
std::string region_name(CorollaryRegion region);

// Cartesian sweep grid; every combination is visited.
struct SweepGrid {
    std::vector<int> dims;
    std::vector<Rational> thetas;
    std::vector<Rational> ps;
    std::vector<Rational> qs;
    std::vector<Rational> ss;
    std::vector<Rational> gammas;
};

// Grid of more than 10^4 points spanning d in {2, 3}.
SweepGrid default_sweep_grid();

// Soundness report: every classified point must be feasible; counterexamples
// would indicate a transcription bug in one of the two descriptions.  The
// converse direction (feasible points outside every bullet) is only counted,
// and only when requested.
struct SweepReport {
    long long total = 0;
    long long in_region = 0;
    long long feasible_in_region = 0;
    long long feasible_outside_region = 0;
    bool converse_checked = false;
    std::vector<ParamPoint> counterexamples;
};

SweepReport soundness_sweep(const SweepGrid& grid, bool check_converse = false,
                            Rel2Reading reading = Rel2Reading::one_over_s);

// Multiplicative constants measured by the scheme for each quantitative
// relation; the all-100 default is a conservative stand-in.
struct ConstantTable {
    Rational temporal_capacity = 100;
    Rational perturbation_lp = 100;
    Rational perturbation_sobolev = 100;
    Rational stress_time_derivative = 100;
    Rational oscillation_decay = 100;
    Rational stress_oscillation = 100;
    Rational stress_interaction = 100;
};

// Concrete frequencies for one iteration step at base frequency lambda:
// mu = ceil(lambda^alpha), nu = ceil(mu^beta'), sigma = ceil(mu^delta')
// rounded up to a power of two, kappa = ceil(mu^zeta'), expressed directly in
// lambda exponents.  r > 1 is the stress integrability actually used and eta
// the decay rate margin * alpha / 2.
struct IntegerSynthesis {
    BigInt lambda;
    BigInt mu;
    BigInt nu;
    BigInt sigma;
    BigInt kappa;
    Rational alpha = 0;
    Rational r = 1;
    Rational eta = 0;
};

// Pure frequency map at a fixed exponent scale alpha.  Throws
// std::invalid_argument if the witness violates the reduced system or claims
// a margin above its true slack.
IntegerSynthesis integer_map(const ParamPoint& pt, const ExponentWitness& w,
                             const BigInt& lambda, const Rational& alpha);

struct SynthesisResult {
    std::optional<IntegerSynthesis> synthesis;
    std::vector<std::string> violated;

    bool ok() const { return synthesis.has_value(); }
};

// Searches a fixed ladder of scales alpha and returns the first synthesis for
// which every quantitative relation holds against the constant table; when
// lambda is too small to absorb the constants, reports the relations that
// still fail at the least-violating scale.
SynthesisResult synthesize_integers(const ParamPoint& pt, const ExponentWitness& w,
                                    const BigInt& lambda,
                                    const ConstantTable& constants = {},
                                    std::optional<Rational> alpha_override = {});

// Names of the quantitative relations violated by a synthesized frequency
// tuple, in canonical order; empty means all hold.
std::vector<std::string> violated_relations(const ParamPoint& pt,
                                            const IntegerSynthesis& synth,
                                            const ConstantTable& constants);

// Exact check of prod_i base_i^{exp_i} <= c * lambda^{lambda_exp} over the
// integers (bases must be >= 1, c > 0).
bool power_product_leq(const std::vector<std::pair<BigInt, Rational>>& lhs,
                       const Rational& c, const BigInt& lambda,
                       const Rational& lambda_exp);

// Smallest integer n with n^denominator(e) >= base^numerator(e), that is
// ceil(base^e) for base >= 1 and e >= 0.
BigInt ceil_pow(const BigInt& base, const Rational& e);

// Smallest power of two that is >= x (x >= 1).
BigInt pow2_at_least(const BigInt& x);

} // namespace fnsr
