#pragma once

#include <array>
#include <vector>

#include <fnsr/field.hpp>

namespace fnsr {

// Intermittent time oscillator: the 1-periodic extension of
// kappa^{1/2} g(kappa t), one compactly supported bump per unit period,
// where g is a fixed polynomial bump on [1/4, 3/4] with int_0^1 g^2 = 1.
// The norm law ||g_kappa||_p = kappa^{1/2 - 1/p} ||g||_p holds exactly.
class PeriodicProfile {
public:
    explicit PeriodicProfile(int kappa);

    int kappa() const { return kappa_; }

    // g_kappa and its corrector h_kappa(t) = -t + int_0^t g_kappa^2,
    // both 1-periodic; h has closed form, no quadrature.
    double g(double t) const;
    double h(double t) const;

    // Composite-Simpson L^p norm over one period, nodes mapped with the
    // bump so the kappa scaling law is exact to round-off.
    double g_norm(double p) const;
    double g_norm_inf() const;

    // The base bump and the exact cumulative integral F(x) = int_0^x g^2.
    static double g_base(double s);
    static double g_base_sq_cumulative(double x);

private:
    int kappa_;
};

// Saturating smoothstep: exactly 0 for x <= 0, exactly 1 for x >= 1,
// C-infinity in between.
double smoothstep(double x);
double smoothstep_prime(double x);

// Gluing cutoffs on [0,1]: t_i = i/m with m = tau^(-eps) an integer,
// xi_i = 1 on [t_i + tau, t_{i+1} - tau], supported in
// [t_i + tau/2, t_{i+1} - tau/2]; the first/last cutoffs are uncut at the
// domain endpoints. Supports are pairwise disjoint.
class TimePartition {
public:
    TimePartition(double tau, double eps, int m) : tau_(tau), eps_(eps), m_(m) {}

    double tau() const { return tau_; }
    double eps() const { return eps_; }
    int count() const { return m_; }
    double node(int i) const { return double(i) / m_; }

    double xi(int i, double t) const;
    double xi_prime(int i, double t) const;

private:
    double tau_, eps_;
    int m_;
};

// Validates tau^(-eps) integrality and tau < tau^eps / 4.
TimePartition build_glue_cutoffs(double tau, double eps);

// Smooth monotone envelope of max(1, x): equal to 1 for x <= 1/2, equal
// to x for x >= 3/2, and >= max(1, x) everywhere, so that
// |Rbar| / (2 chi(|Rbar|)) <= 1/2 pointwise.
double chi(double x);

// rho = 2 chi(|Rbar|_F) pointwise.
TorusField stress_cutoff_rho(const TorusTensorField& rbar);

// Union of closed time intervals, each of length 5 tau, within [0,1].
struct WellPreparedSet {
    std::vector<std::array<double, 2>> intervals;
    double tau = 0;

    // Merged, sorted copy of the intervals.
    std::vector<std::array<double, 2>> merged() const;
    // Complement within [0,1] of the merged union.
    std::vector<std::array<double, 2>> complement() const;
    bool contains(double t) const;
    // Distance from t to the complement; +infinity when I covers [0,1].
    double dist_to_complement(double t) const;
    bool is_nested_in(const WellPreparedSet& outer) const;
    // Checks interval lengths (= 5 tau), bounds, and when eps >= 0 the
    // count bound tau^(-eps); throws invariant_error on failure.
    void validate(double eps = -1) const;
};

// theta(t): 0 where dist(t, I^c) <= tau, 1 where dist >= 3 tau / 2,
// smooth monotone in between. Exact plateaus.
double time_cutoff_theta(const WellPreparedSet& I, double tau, double t);

struct HolderGap {
    double gap;          // | ||f g_lambda||_p - ||f||_p ||g||_p |
    double bound_factor; // lambda^{-s/p'} * ||f||_{C^s} * ||g||_p
};

// Measures the improved Holder inequality gap for g_lambda = g(lambda x).
// p in [1,2] (larger p rejected), s in (0,1), lambda >= 1.
HolderGap improved_holder_gap(const TorusField& f, const TorusField& g, int lambda,
                              double p, double s);

// Grid proxy for the C^s norm: sup |f| plus the max difference quotient
// over axis-adjacent samples. A lower bound on the true norm.
double holder_norm(const TorusField& f, double s);

} // namespace fnsr
