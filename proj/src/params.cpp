#include <fnsr/params.hpp>

#include <fnsr/errors.hpp>

#include <algorithm>
#include <array>
#include <cstddef>
#include <stdexcept>

namespace fnsr {

namespace {

// One inequality a . (beta', delta', zeta', t) >= rhs of the margin LP.
struct Row {
    std::array<Rational, 4> a;
    Rational rhs;
    const char* name;
};

// The seven strict rows of the reduced system, each relaxed by the common
// slack variable t.  Positivity rows come first so that infeasible subsystems
// are reported in a stable order.
std::vector<Row> strict_rows(const ParamPoint& pt, Rel2Reading reading) {
    const Rational d1 = pt.d - 1;
    const Rational lp_rhs = pt.p * d1 / (2 - pt.p);
    const Rational sobolev_zeta =
        (reading == Rel2Reading::one_over_s ? 1 : 2) - pt.s / 2;
    const Rational sobolev_rhs = pt.s * (pt.gamma + d1 / 2 - d1 / pt.q);
    return {
        {{1, 0, 0, -1}, 0, "beta-positive"},
        {{0, 1, 0, -1}, 0, "delta-positive"},
        {{0, 0, 1, -1}, 0, "zeta-positive"},
        {{2, -1, 0, -1}, 0, "temporal-capacity"},
        {{0, 0, 1, -1}, lp_rhs, "perturbation-lp"},
        {{0, -pt.s * pt.gamma, sobolev_zeta, -1}, sobolev_rhs, "perturbation-sobolev"},
        {{-2, 2, -1, -1}, -(pt.d + 1), "stress-time-derivative"},
    };
}

Row cap_row() { return {{0, 0, 0, -1}, -1, "margin-cap"}; }

struct LpSolution {
    Rational tmax;
    std::array<Rational, 3> x;
};

// Maximizes t over the rows by Fourier-Motzkin elimination of the three
// exponent variables, then back-substitutes a canonical witness (each
// variable at its lowest feasible value).  nullopt means the rows are
// contradictory even without the positivity of t.
std::optional<LpSolution> maximize_margin(std::vector<Row> rows) {
    rows.push_back(cap_row());

    std::array<std::vector<Row>, 3> stages;
    for (int v = 0; v < 3; ++v) {
        stages[v] = rows;
        std::vector<Row> lower, upper, next;
        for (const auto& row : rows) {
            if (row.a[v] > 0)
                lower.push_back(row);
            else if (row.a[v] < 0)
                upper.push_back(row);
            else
                next.push_back(row);
        }
        for (const auto& lo : lower)
            for (const auto& up : upper) {
                Row combined{{0, 0, 0, 0}, 0, "combined"};
                const Rational cl = -up.a[v];
                const Rational cu = lo.a[v];
                for (int w = 0; w < 4; ++w)
                    combined.a[w] = cl * lo.a[w] + cu * up.a[w];
                combined.rhs = cl * lo.rhs + cu * up.rhs;
                next.push_back(combined);
            }
        rows = std::move(next);
    }

    bool has_upper = false;
    Rational tmax;
    for (const auto& row : rows) {
        if (row.a[3] == 0) {
            if (row.rhs > 0) return std::nullopt;
            continue;
        }
        const Rational bound = row.rhs / row.a[3];
        if (row.a[3] < 0) {
            if (!has_upper || bound < tmax) tmax = bound;
            has_upper = true;
        }
    }
    if (!has_upper)
        throw invariant_error("params: margin cap lost during elimination");
    for (const auto& row : rows)
        if (row.a[3] > 0 && row.rhs / row.a[3] > tmax) return std::nullopt;

    LpSolution sol;
    sol.tmax = tmax;
    std::array<Rational, 4> point{0, 0, 0, tmax};
    for (int v = 2; v >= 0; --v) {
        bool has_lo = false, has_hi = false;
        Rational lo, hi;
        for (const auto& row : stages[v]) {
            if (row.a[v] == 0) continue;
            Rational rest = row.rhs;
            for (int w = v + 1; w < 4; ++w) rest -= row.a[w] * point[w];
            const Rational bound = rest / row.a[v];
            if (row.a[v] > 0) {
                if (!has_lo || bound > lo) lo = bound;
                has_lo = true;
            } else {
                if (!has_hi || bound < hi) hi = bound;
                has_hi = true;
            }
        }
        point[v] = has_lo ? lo : (has_hi ? hi : Rational(0));
    }
    sol.x = {point[0], point[1], point[2]};
    return sol;
}

bool margin_positive(const std::vector<Row>& rows) {
    auto sol = maximize_margin(rows);
    return sol && sol->tmax > 0;
}

std::vector<std::string> gate_violations(const ParamPoint& pt) {
    if (pt.p >= 2) return {"perturbation-lp"};
    if (2 * pt.theta > pt.gamma + 1) return {"dissipation-order"};
    if (pt.gamma > pt.d) return {"smoothness-cap"};
    if (2 * pt.gamma > pt.d && pt.q * (2 * pt.gamma - pt.d) > 2 * pt.d)
        return {"integrability-cap"};
    return {};
}

void require_witness(const ParamPoint& pt, const ExponentWitness& w) {
    if (w.beta <= 0 || w.delta <= 0 || w.zeta <= 0 || w.margin <= 0)
        throw std::invalid_argument("params: witness exponents and margin must be positive");
    if (witness_slack(pt, w) < w.margin)
        throw std::invalid_argument("params: witness margin exceeds its actual slack");
}

// Stress integrability r = 1 + 2^-k, small enough to keep r below both q and
// d/(d-1) and to leave the time-derivative row half of its headroom over the
// margin.
Rational choose_r(const ParamPoint& pt, const ExponentWitness& w) {
    const Rational d1 = pt.d - 1;
    Rational x = (pt.q - 1) / 2;
    const Rational box_cap = Rational(1) / (4 * d1);
    if (box_cap < x) x = box_cap;
    const Rational slack_d = 2 * w.delta + pt.d + 1 - 2 * w.beta - w.zeta;
    if (slack_d > w.margin) {
        const Rational headroom = (slack_d - w.margin) / (4 * d1);
        if (headroom < x) x = headroom;
    }
    Rational step(1, 2);
    for (int k = 1; k < 40 && step > x; ++k) step /= 2;
    return 1 + step;
}

struct PowerRelation {
    const char* name;
    std::vector<std::pair<BigInt, Rational>> lhs;
    Rational c;
    Rational lambda_exp;
};

// Decay relations assert C * (frequency product) <= lambda^-eta for the
// measured constant C, so the comparator sees 1/C on the right; the capacity
// relation sigma <= C * nu^2 keeps its constant there.
std::vector<PowerRelation> quantitative_relations(const ParamPoint& pt,
                                                  const IntegerSynthesis& s,
                                                  const ConstantTable& table) {
    const Rational d1 = pt.d - 1;
    const Rational half(1, 2);
    const Rational neta = -s.eta;
    return {
        {"temporal-capacity", {{s.sigma, 1}, {s.nu, -2}}, table.temporal_capacity, 0},
        {"perturbation-lp",
         {{s.mu, d1 / 2}, {s.kappa, half - 1 / pt.p}},
         1 / table.perturbation_lp,
         neta},
        {"perturbation-sobolev",
         {{s.sigma, pt.gamma},
          {s.kappa, half - 1 / pt.s},
          {s.mu, pt.gamma + d1 / 2 - d1 / pt.q}},
         1 / table.perturbation_sobolev,
         neta},
        {"stress-time-derivative",
         {{s.nu, 1}, {s.kappa, half}, {s.sigma, -1}, {s.mu, -1 + d1 / 2 - d1 / s.r}},
         1 / table.stress_time_derivative,
         neta},
        {"oscillation-decay", {{s.nu, -1}}, 1 / table.oscillation_decay, neta},
        {"stress-oscillation",
         {{s.sigma, -1}, {s.mu, d1 - d1 / s.r}},
         1 / table.stress_oscillation,
         neta},
        {"stress-interaction",
         {{s.mu, d1 - pt.d / s.r}},
         1 / table.stress_interaction,
         neta},
    };
}

unsigned checked_exponent(const BigInt& e) {
    if (e < 0 || e > 1000000)
        throw invariant_error("params: integer exponent out of range");
    return e.convert_to<unsigned>();
}

} // namespace

Rational parse_rational(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("empty rational literal");
    for (char ch : text)
        if (!(ch == '-' || ch == '/' || (ch >= '0' && ch <= '9')))
            throw std::invalid_argument("malformed rational literal: " + text);
    try {
        Rational value(text);
        return value;
    } catch (const std::exception&) {
        throw std::invalid_argument("malformed rational literal: " + text);
    }
}

std::string rational_to_string(const Rational& value) { return value.str(); }

void ParamPoint::validate() const {
    if (d < 2) throw std::invalid_argument("params: dimension must be at least 2");
    if (p < 1) throw std::invalid_argument("params: p must be at least 1");
    if (s < 1) throw std::invalid_argument("params: s must be at least 1");
    if (q <= 1) throw std::invalid_argument("params: q must exceed 1");
    if (gamma < 0) throw std::invalid_argument("params: gamma must be nonnegative");
    if (theta < 0) throw std::invalid_argument("params: theta must be nonnegative");
}

FeasibilityResult reduced_feasible(const ParamPoint& pt, Rel2Reading reading) {
    pt.validate();
    FeasibilityResult result;
    result.infeasible_subsystem = gate_violations(pt);
    if (!result.infeasible_subsystem.empty()) return result;

    const auto rows = strict_rows(pt, reading);
    auto sol = maximize_margin(rows);
    if (sol && sol->tmax > 0) {
        ExponentWitness w;
        w.beta = sol->x[0];
        w.delta = sol->x[1];
        w.zeta = sol->x[2];
        w.margin = sol->tmax;
        result.witness = std::move(w);
        return result;
    }

    // Greedy deletion filter: a row is kept exactly when removing it makes
    // the rest strictly feasible, so the survivors are irreducible.
    std::vector<Row> active = rows;
    for (std::size_t i = 0; i < active.size();) {
        std::vector<Row> trial = active;
        trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
        if (!margin_positive(trial))
            active = std::move(trial);
        else
            ++i;
    }
    for (const auto& row : active) result.infeasible_subsystem.push_back(row.name);
    return result;
}

Rational witness_slack(const ParamPoint& pt, const ExponentWitness& w,
                       Rel2Reading reading) {
    pt.validate();
    bool first = true;
    Rational slack;
    for (const auto& row : strict_rows(pt, reading)) {
        const Rational value =
            row.a[0] * w.beta + row.a[1] * w.delta + row.a[2] * w.zeta - row.rhs;
        if (first || value < slack) slack = value;
        first = false;
    }
    return slack;
}

ClosedFormBounds closed_form(const ParamPoint& pt) {
    pt.validate();
    const Rational d1 = pt.d - 1;
    ClosedFormBounds b;
    b.q0 = (2 * d1) / (d1 + 2 * pt.gamma);
    b.Q = pt.gamma > 1 ? Bound::of(d1 / (pt.gamma - 1)) : Bound::infinity();
    const Rational f = d1 + (2 - pt.p) * (pt.gamma - d1 / pt.q);
    b.S1 = f > 0 ? Bound::of(pt.p * d1 / f) : Bound::infinity();
    b.S2 = (pt.d + 1) / (pt.d + pt.gamma - d1 / pt.q);
    b.S3 = (2 * pt.gamma + d1) / (2 * pt.gamma + d1 - d1 / pt.q);
    return b;
}

ClosedFormBounds closed_form(const ParamPoint& pt, const ExponentWitness& w) {
    if (w.delta < 0 || w.zeta <= 0)
        throw std::invalid_argument("params: witness block needs delta' >= 0 and zeta' > 0");
    ClosedFormBounds b = closed_form(pt);
    const Rational d1 = pt.d - 1;
    b.has_witness_block = true;
    b.K = w.delta * pt.gamma + w.zeta / 2 + pt.gamma + d1 / 2 - d1 / pt.q;
    b.H = 2 * w.delta * pt.gamma + d1 + 2 * pt.gamma - w.zeta;
    b.q_min = (2 * d1) / (2 * w.delta * pt.gamma + w.zeta + d1 + 2 * pt.gamma);
    b.s_max = b.K > 0 ? Bound::of(w.zeta / b.K) : Bound::infinity();
    b.q_max = b.H > 0 ? Bound::of((2 * d1) / b.H) : Bound::infinity();
    return b;
}

CorollaryRegion corollary_region(const ParamPoint& pt) {
    pt.validate();
    if (pt.p * pt.d >= pt.d + 1) return CorollaryRegion::none;
    if (2 * pt.theta > pt.gamma + 1) return CorollaryRegion::none;

    const auto b = closed_form(pt);
    const auto below = [&](const Bound& cap) {
        return !cap.finite || pt.s < cap.value;
    };
    if (pt.gamma < 1) {
        if (pt.q > b.q0) return pt.s < b.S2 ? CorollaryRegion::r1 : CorollaryRegion::none;
        const Rational p_split = 1 + pt.gamma / (pt.gamma + pt.d - 1);
        if (pt.p < p_split)
            return pt.s < b.S3 ? CorollaryRegion::r2 : CorollaryRegion::none;
        return below(b.S1) ? CorollaryRegion::r3 : CorollaryRegion::none;
    }
    if (pt.gamma < pt.d) {
        const bool under_Q = !b.Q.finite || pt.q < b.Q.value;
        if (pt.q > b.q0 && under_Q && pt.s < b.S2) return CorollaryRegion::r4;
        if (2 * pt.gamma < pt.d - 1 && pt.q <= b.q0 && below(b.S1))
            return CorollaryRegion::r5;
    }
    return CorollaryRegion::none;
}

std::string region_name(CorollaryRegion region) {
    switch (region) {
        case CorollaryRegion::r1: return "R1";
        case CorollaryRegion::r2: return "R2";
        case CorollaryRegion::r3: return "R3";
        case CorollaryRegion::r4: return "R4";
        case CorollaryRegion::r5: return "R5";
        default: return "none";
    }
}

SweepGrid default_sweep_grid() {
    SweepGrid grid;
    grid.dims = {2, 3};
    grid.thetas = {0, Rational(1, 2), 1};
    grid.ps = {1, Rational(21, 20), Rational(11, 10), Rational(6, 5), Rational(5, 4),
               Rational(4, 3)};
    grid.qs = {Rational(21, 20), Rational(11, 10), Rational(6, 5), Rational(3, 2), 2,
               Rational(5, 2), 3, 4};
    grid.ss = {1, Rational(21, 20), Rational(9, 8), Rational(6, 5), Rational(4, 3), 2};
    grid.gammas = {0, Rational(1, 4), Rational(1, 2), Rational(3, 4), 1,
                   Rational(3, 2), 2};
    return grid;
}

SweepReport soundness_sweep(const SweepGrid& grid, bool check_converse,
                            Rel2Reading reading) {
    SweepReport report;
    report.converse_checked = check_converse;
    for (int d : grid.dims)
        for (const auto& theta : grid.thetas)
            for (const auto& p : grid.ps)
                for (const auto& q : grid.qs)
                    for (const auto& s : grid.ss)
                        for (const auto& gamma : grid.gammas) {
                            ParamPoint pt;
                            pt.d = d;
                            pt.theta = theta;
                            pt.p = p;
                            pt.q = q;
                            pt.s = s;
                            pt.gamma = gamma;
                            ++report.total;
                            const auto region = corollary_region(pt);
                            if (region != CorollaryRegion::none) {
                                ++report.in_region;
                                if (reduced_feasible(pt, reading).feasible())
                                    ++report.feasible_in_region;
                                else
                                    report.counterexamples.push_back(pt);
                            } else if (check_converse &&
                                       reduced_feasible(pt, reading).feasible()) {
                                ++report.feasible_outside_region;
                            }
                        }
    return report;
}

BigInt pow2_at_least(const BigInt& x) {
    if (x < 1) throw std::invalid_argument("params: pow2_at_least needs x >= 1");
    if (x == 1) return 1;
    return BigInt(1) << (boost::multiprecision::msb(x - 1) + 1);
}

BigInt ceil_pow(const BigInt& base, const Rational& e) {
    if (base < 1) throw std::invalid_argument("params: ceil_pow needs base >= 1");
    if (e < 0) throw std::invalid_argument("params: ceil_pow needs e >= 0");
    if (e == 0 || base == 1) return 1;
    const unsigned a = checked_exponent(numerator(e));
    const unsigned b = checked_exponent(denominator(e));
    const BigInt target = boost::multiprecision::pow(base, a);
    BigInt lo = 1;
    BigInt hi = BigInt(1) << (boost::multiprecision::msb(target) / b + 2);
    while (lo < hi) {
        const BigInt mid = (lo + hi) / 2;
        if (boost::multiprecision::pow(mid, b) >= target)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

bool power_product_leq(const std::vector<std::pair<BigInt, Rational>>& lhs,
                       const Rational& c, const BigInt& lambda,
                       const Rational& lambda_exp) {
    if (c <= 0) throw std::invalid_argument("params: constant must be positive");
    if (lambda < 1) throw std::invalid_argument("params: lambda must be >= 1");
    BigInt scale = denominator(lambda_exp);
    for (const auto& [base, e] : lhs) {
        if (base < 1) throw std::invalid_argument("params: bases must be >= 1");
        scale = boost::multiprecision::lcm(scale, denominator(e));
    }
    // Raise both sides to the common denominator and split by exponent sign:
    // left * c_den^scale * lambda_neg <= c_num^scale * lambda_pos * right.
    BigInt left = 1, right = 1;
    for (const auto& [base, e] : lhs) {
        const BigInt k = numerator(Rational(e * scale));
        if (k > 0)
            left *= boost::multiprecision::pow(base, checked_exponent(k));
        else if (k < 0)
            right *= boost::multiprecision::pow(base, checked_exponent(-k));
    }
    const BigInt lk = numerator(Rational(lambda_exp * scale));
    if (lk > 0)
        right *= boost::multiprecision::pow(lambda, checked_exponent(lk));
    else if (lk < 0)
        left *= boost::multiprecision::pow(lambda, checked_exponent(-lk));
    const unsigned us = checked_exponent(scale);
    left *= boost::multiprecision::pow(BigInt(denominator(c)), us);
    right *= boost::multiprecision::pow(BigInt(numerator(c)), us);
    return left <= right;
}

IntegerSynthesis integer_map(const ParamPoint& pt, const ExponentWitness& w,
                             const BigInt& lambda, const Rational& alpha) {
    pt.validate();
    require_witness(pt, w);
    if (alpha <= 0) throw std::invalid_argument("params: alpha must be positive");
    if (lambda < 2) throw std::invalid_argument("params: lambda must be at least 2");
    IntegerSynthesis s;
    s.lambda = lambda;
    s.alpha = alpha;
    s.mu = ceil_pow(lambda, alpha);
    s.nu = ceil_pow(lambda, alpha * w.beta);
    s.sigma = pow2_at_least(ceil_pow(lambda, alpha * w.delta));
    s.kappa = ceil_pow(lambda, alpha * w.zeta);
    s.r = choose_r(pt, w);
    s.eta = w.margin * alpha / 2;
    return s;
}

std::vector<std::string> violated_relations(const ParamPoint& pt,
                                            const IntegerSynthesis& synth,
                                            const ConstantTable& constants) {
    pt.validate();
    std::vector<std::string> violated;
    if (2 * pt.theta > pt.gamma + 1) violated.push_back("dissipation-order");
    if (synth.r > pt.q) violated.push_back("stress-exponent");
    for (const auto& rel : quantitative_relations(pt, synth, constants))
        if (!power_product_leq(rel.lhs, rel.c, synth.lambda, rel.lambda_exp))
            violated.push_back(rel.name);
    return violated;
}

SynthesisResult synthesize_integers(const ParamPoint& pt, const ExponentWitness& w,
                                    const BigInt& lambda,
                                    const ConstantTable& constants,
                                    std::optional<Rational> alpha_override) {
    static const std::vector<Rational> ladder = {
        Rational(1, 4), Rational(1, 3), Rational(1, 2), Rational(2, 3), 1,
        Rational(3, 2), 2,              3,              4,              6,
        8};
    std::vector<Rational> candidates =
        alpha_override ? std::vector<Rational>{*alpha_override} : ladder;

    SynthesisResult result;
    bool have_best = false;
    IntegerSynthesis best_synth;
    std::vector<std::string> best_violated;
    for (const auto& alpha : candidates) {
        IntegerSynthesis s = integer_map(pt, w, lambda, alpha);
        auto violated = violated_relations(pt, s, constants);
        if (violated.empty()) {
            result.synthesis = std::move(s);
            return result;
        }
        if (!have_best || violated.size() < best_violated.size()) {
            have_best = true;
            best_synth = std::move(s);
            best_violated = std::move(violated);
        }
    }
    result.violated = std::move(best_violated);
    return result;
}

} // namespace fnsr
