#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <fnsr/field.hpp>
#include <fnsr/mikado.hpp>
#include <fnsr/params.hpp>
#include <fnsr/temporal.hpp>

namespace fnsr {

// Uniformly sampled flow of the forced fractional system
//   d_t u + (-Delta)^theta u + div(u (x) u) + grad p = div R,   div u = 0,
// on [0,1], with R symmetric trace-free and p of zero mean. The prepared
// set records where the stress is known to vanish: R(t) = 0 whenever
// dist(t, prepared^c) <= prepared.tau.
struct NSRState {
    TorusGrid grid{2, 4};
    double theta = 0.5;
    std::vector<double> times;
    std::vector<TorusVectorField> u;
    std::vector<TorusTensorField> R;
    std::vector<TorusField> p;
    WellPreparedSet prepared;

    int slices() const { return int(times.size()); }
    double dt() const;

    // Slice invariants: uniform times, div u = 0, R symmetric trace-free,
    // p mean-free with Delta p = div div (R - u (x) u). Throws
    // invariant_error naming the first failing slice.
    void validate(double tol = 1e-8) const;
};

// Max over interior slices of the L2 norm of the momentum defect
//   FD_t u + (-Delta)^theta u + div(u (x) u) + grad p - div R,
// centred differences in time. pre: at least three slices.
double residual(const NSRState& state);

// Decaying shear that solves the system exactly, plus a solenoidal pulse
// whose stress is compactly supported deep inside a prepared set covering
// all of [0,1]. The pulse envelope is a smoothstep plateau: identically
// pulse_amplitude on [center - halfwidth + rise, center + halfwidth - rise]
// and identically zero outside (center - halfwidth, center + halfwidth).
// Dimension two.
struct ManufacturedOptions {
    int n = 64;
    int slices = 501;
    double theta = 0.5;
    double shear_amplitude = 1e-2;
    double pulse_amplitude = 1e-9;
    double pulse_center = 37.0 / 96.0;
    double pulse_halfwidth = 3.0 / 32.0;
    double pulse_rise = 0.05;
    int pulse_mode = 1; // axis-0 wavenumber of the pulse stream function
};

NSRState manufactured_state(const ManufacturedOptions& opt = {});

struct GlueOptions {
    double tau = 1.0 / 25.0;
    double eps = 0.5;          // tau^(-eps) subdivision intervals
    int substeps = 1;          // integrator steps per stored slice
    bool second_order = false; // Adams-Bashforth transport, trapezoidal dissipation
    double cfl_limit = 0.5;    // refusal threshold for sup|u| dt / h
    double residual_tol = 1e-4;
    double r_exponent = 1.25;  // L^r used in the stress norms below
};

struct CorrectorDiagnostics {
    int interval = 0;
    bool active = false;  // corrector or forcing not identically zero
    double v_sup_hd = 0;  // sup over the interval of the H^d norm of v_i
    double rv_sup_lr = 0; // sup over the interval of the L^r norm of antidiv(v_i)
};

// Output of one gluing pass. The corrector v_i absorbs div R from rest on
// the i-th subdivision interval; the blended stress vanishes identically
// whenever dist(t, prepared^c) <= 3 tau / 2.
struct GlueResult {
    NSRState glued;
    WellPreparedSet prepared;
    TimePartition partition;
    std::vector<CorrectorDiagnostics> correctors;
    double input_l1lr = 0;
    double glued_l1lr = 0;
    double concentration = 0; // glued over input, 0 when the input stress vanishes
    double r_exponent = 1.25;
};

// pre: at least three uniform slices, (slices - 1) divisible by the
// interval count, advective CFL below cfl_limit. Throws invariant_error
// when the glued state fails its own residual check at residual_tol
// (pass +infinity to skip, e.g. when tau outruns the time resolution).
GlueResult glue_step(const NSRState& state, const GlueOptions& opt = {});

struct PerturbOptions {
    std::int64_t nu = 2;     // temporal oscillation frequency
    double r_exponent = 1.25;
    double p_exponent = 1.0; // remaining norm-table exponents
    double q_exponent = 3.0;
    double s_exponent = 1.0;
    double gamma = 0.5;
};

struct NormRow {
    std::string name;
    double value = 0;     // measured norm
    double reference = 0; // frequency power product it is compared against
    double constant = 0;  // value / reference, 0 when the reference vanishes
};

struct NormTable {
    std::vector<NormRow> rows;
    const NormRow* find(const std::string& name) const;
};

// One convex-integration pass on a glued state. Amplitudes
// a_k = theta(t) g_kappa(nu t) rho^{1/2} Gamma_k(Id - Rbar/rho) ride the
// Mikado family dilated by family.sigma; the quadratic identity cancels
// g^2 Rbar pointwise up to the decomposition residual, and the temporal
// part trades the remaining (1 - g^2) Rbar for an inverse power of nu.
struct PerturbResult {
    NSRState next;
    NormTable norms;
    double propak_residual = 0; // sup pointwise defect of the quadratic identity
    double div_w_max = 0;
    double support_leak = 0;    // sup |w| over slices outside the prepared set
    double rbar_l1l1 = 0;
    double rbar_l1lr = 0;
    double r1_l1lr = 0;
    double w_l2l2 = 0;
    double measured_m = 0;      // w_l2l2 / rbar_l1l1, 0 when the stress vanishes
};

// pre: family fits the grid (required_resolution(mu, sigma) <= n) and the
// glued slices are uniform. The returned state keeps the prepared set of
// the input; its stress vanishes on every slice whose centred stencil
// stays within distance tau of the complement.
PerturbResult perturb_step(const GlueResult& glued, const MikadoFamily& family,
                           const PeriodicProfile& profile,
                           const PerturbOptions& opt = {});

// Norm-table constants folded into the exact-arithmetic table consumed by
// the relation system; rows with vanishing reference keep the defaults.
ConstantTable measured_constants(const NormTable& norms);

struct IterateOptions {
    double tau = 1.0 / 25.0;
    double eps = 0.5;
    int substeps = 1;
    bool second_order = false;
    double glue_residual_tol = 1e-4;
    Rational alpha{3, 10}; // integer_map scale when the ladder has no margin
};

struct IterateResult {
    IntegerSynthesis integers;
    bool ladder_used = false;          // synthesize_integers succeeded at lambda
    GlueResult glue;
    PerturbResult perturb;
    std::vector<std::string> violated; // relations failing at the measured constants
    double target = 0;                 // the delta handed in
    bool target_met = false;           // r1_l1lr <= target
    bool nested = false;               // new prepared set sits inside the old one
};

// Full step at frequency lambda: exact integer synthesis (margin ladder
// first, integer_map at opt.alpha as fallback), gluing, perturbation, and
// the comparison of the measured constants against the relation system.
// Desk-scale guard: frequencies beyond the grid throw resolution_error.
IterateResult iterate(const NSRState& state, const ParamPoint& pt,
                      const ExponentWitness& witness, const BigInt& lambda,
                      double delta, const IterateOptions& opt = {});

} // namespace fnsr
