#include <fnsr/scheme.hpp>

#include <fnsr/antidiv.hpp>
#include <fnsr/decomposition.hpp>
#include <fnsr/errors.hpp>
#include <fnsr/fft.hpp>
#include <fnsr/spectral_ops.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace fnsr {
namespace {

bool is_zero(const TorusField& f) { return f.values().abs().maxCoeff() == 0.0; }

bool is_zero(const TorusVectorField& v) {
    for (int i = 0; i < v.grid().d; ++i)
        if (!is_zero(v[i])) return false;
    return true;
}

bool is_zero(const TorusTensorField& t) {
    for (int i = 0; i < t.grid().d; ++i)
        for (int j = 0; j < t.grid().d; ++j)
            if (!is_zero(t(i, j))) return false;
    return true;
}

void add_scaled(TorusVectorField& acc, double s, const TorusVectorField& v) {
    for (int i = 0; i < acc.grid().d; ++i)
        acc[i] = TorusField(acc.grid(), acc[i].values() + s * v[i].values());
}

void add(TorusVectorField& acc, const TorusVectorField& v) {
    for (int i = 0; i < acc.grid().d; ++i) acc[i] = acc[i] + v[i];
}

void add_scaled(TorusTensorField& acc, double s, const TorusTensorField& t) {
    const int d = acc.grid().d;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            acc(i, j) = TorusField(acc.grid(), acc(i, j).values() + s * t(i, j).values());
}

void add(TorusTensorField& acc, const TorusTensorField& t) {
    const int d = acc.grid().d;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) acc(i, j) = acc(i, j) + t(i, j);
}

TorusVectorField scaled(double s, const TorusVectorField& v) {
    TorusVectorField out(v.grid());
    for (int i = 0; i < v.grid().d; ++i) out[i] = TorusField(v.grid(), s * v[i].values());
    return out;
}

TorusVectorField lerp(const TorusVectorField& a, const TorusVectorField& b, double al) {
    TorusVectorField out(a.grid());
    for (int i = 0; i < a.grid().d; ++i)
        out[i] = TorusField(a.grid(), (1.0 - al) * a[i].values() + al * b[i].values());
    return out;
}

TorusTensorField lerp(const TorusTensorField& a, const TorusTensorField& b, double al) {
    const int d = a.grid().d;
    TorusTensorField out(a.grid());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            out(i, j) = TorusField(a.grid(), (1.0 - al) * a(i, j).values() + al * b(i, j).values());
    return out;
}

TorusTensorField outer(const TorusVectorField& a, const TorusVectorField& b) {
    const int d = a.grid().d;
    TorusTensorField t(a.grid());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) t(i, j) = a[i] * b[j];
    return t;
}

// a (x) b + b (x) a
TorusTensorField sym_outer(const TorusVectorField& a, const TorusVectorField& b) {
    const int d = a.grid().d;
    TorusTensorField t(a.grid());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            t(i, j) = TorusField(a.grid(),
                                 a[i].values() * b[j].values() + b[i].values() * a[j].values());
    return t;
}

Eigen::ArrayXd trace_values(const TorusTensorField& t) {
    Eigen::ArrayXd tr = t(0, 0).values();
    for (int i = 1; i < t.grid().d; ++i) tr += t(i, i).values();
    return tr;
}

TorusTensorField deviatoric(const TorusTensorField& t) {
    const int d = t.grid().d;
    Eigen::ArrayXd tr = trace_values(t) / double(d);
    TorusTensorField out(t.grid());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            out(i, j) = (i == j) ? TorusField(t.grid(), t(i, j).values() - tr) : t(i, j);
    return out;
}

std::string slice_tag(std::size_t j) { return " at slice " + std::to_string(j); }

// Spectrally produced fields arrive with a populated spectrum cache that
// doubles their footprint. Rewrapping the values drops the cache; do this
// before storing a field in a per-slice array, and when handing a long-lived
// field to an operator that would lazily cache into it.
TorusField stripped(const TorusField& f) { return TorusField(f.grid(), f.values()); }

TorusVectorField stripped(const TorusVectorField& v) {
    TorusVectorField out(v.grid());
    for (int i = 0; i < v.grid().d; ++i) out[i] = stripped(v[i]);
    return out;
}

TorusTensorField stripped(const TorusTensorField& t) {
    const int d = t.grid().d;
    TorusTensorField out(t.grid());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out(i, j) = stripped(t(i, j));
    return out;
}

} // namespace

double NSRState::dt() const {
    if (times.size() < 2)
        throw std::invalid_argument("NSRState::dt: needs at least two slices");
    return (times.back() - times.front()) / double(times.size() - 1);
}

void NSRState::validate(double tol) const {
    const std::size_t N = times.size();
    if (N < 2) throw std::invalid_argument("NSRState::validate: needs at least two slices");
    if (u.size() != N || R.size() != N || p.size() != N)
        throw std::invalid_argument("NSRState::validate: slice arrays disagree");
    const double h = dt();
    const int d = grid.d;
    for (std::size_t j = 0; j < N; ++j) {
        if (std::abs(times[j] - times[0] - double(j) * h) > 1e-12)
            throw invariant_error("NSRState::validate: nonuniform times" + slice_tag(j));

        const double usup = lebesgue_norm_inf(u[j]);
        if (lebesgue_norm(divergence(stripped(u[j])), 2.0) > tol * (1.0 + usup))
            throw invariant_error("NSRState::validate: flow not solenoidal" + slice_tag(j));

        const double rsup = lebesgue_norm_inf(R[j]);
        double asym = 0;
        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b)
                asym = std::max(asym,
                                (R[j](a, b).values() - R[j](b, a).values()).abs().maxCoeff());
        if (asym > tol * (1.0 + rsup))
            throw invariant_error("NSRState::validate: stress not symmetric" + slice_tag(j));
        if (trace_values(R[j]).abs().maxCoeff() > tol * (1.0 + rsup))
            throw invariant_error("NSRState::validate: stress not trace-free" + slice_tag(j));

        if (std::abs(p[j].mean()) > tol)
            throw invariant_error("NSRState::validate: pressure not mean-free" + slice_tag(j));
        TorusTensorField flux(grid);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                flux(a, b) = TorusField(grid,
                                        R[j](a, b).values() - u[j][a].values() * u[j][b].values());
        TorusField rhs = divergence(divergence(flux));
        TorusField defect = frac_laplacian(stripped(p[j]), 1.0) + rhs;
        if (lebesgue_norm(defect, 2.0) > tol * (1.0 + lebesgue_norm_inf(rhs)))
            throw invariant_error("NSRState::validate: pressure identity fails" + slice_tag(j));
    }
}

double residual(const NSRState& state) {
    if (state.slices() < 3)
        throw std::invalid_argument("residual: needs at least three slices");
    const double h = state.dt();
    double worst = 0;
    for (int j = 1; j + 1 < state.slices(); ++j) {
        TorusVectorField def = scaled(0.5 / h, state.u[j + 1]);
        add_scaled(def, -0.5 / h, state.u[j - 1]);
        add(def, frac_laplacian(stripped(state.u[j]), state.theta));
        add(def, divergence(outer(state.u[j], state.u[j])));
        add(def, gradient(stripped(state.p[j])));
        if (!is_zero(state.R[j]))
            add_scaled(def, -1.0, divergence(stripped(state.R[j])));
        worst = std::max(worst, lebesgue_norm(def, 2.0));
    }
    return worst;
}

NSRState manufactured_state(const ManufacturedOptions& opt) {
    if (opt.slices < 2)
        throw std::invalid_argument("manufactured_state: needs at least two slices");
    if (opt.pulse_mode < 1 || 2 * opt.pulse_mode >= opt.n / 2)
        throw std::invalid_argument("manufactured_state: pulse mode outside the resolved band");
    if (opt.pulse_rise <= 0 || opt.pulse_halfwidth <= 0)
        throw std::invalid_argument("manufactured_state: pulse shape must be positive");

    const TorusGrid g{2, opt.n};
    const int M = opt.pulse_mode;
    Eigen::ArrayXd s0(g.size()), ub0(g.size()), ub1(g.size());
    for_each_point(g, [&](std::ptrdiff_t idx, const std::array<double, 3>& x) {
        s0[idx] = std::sin(x[1]);
        ub0[idx] = -std::sin(double(M) * x[0]) * std::cos(x[1]) / double(M);
        ub1[idx] = std::cos(double(M) * x[0]) * std::sin(x[1]);
    });
    TorusVectorField pulse(g);
    pulse[0] = TorusField(g, ub0);
    pulse[1] = TorusField(g, ub1);
    const TorusVectorField frac_pulse = frac_laplacian(pulse, opt.theta);

    const double lo = opt.pulse_center - opt.pulse_halfwidth;
    const double hi = opt.pulse_center + opt.pulse_halfwidth;

    NSRState st;
    st.grid = g;
    st.theta = opt.theta;
    const int N = opt.slices;
    st.times.resize(N);
    st.u.reserve(N);
    st.R.reserve(N);
    st.p.reserve(N);
    for (int j = 0; j < N; ++j) {
        const double t = double(j) / double(N - 1);
        st.times[j] = t;
        const double sfac = opt.shear_amplitude * std::exp(-t);
        const double x1 = (t - lo) / opt.pulse_rise;
        const double x2 = (hi - t) / opt.pulse_rise;
        const double beta = opt.pulse_amplitude * smoothstep(x1) * smoothstep(x2);
        const double beta_prime =
            opt.pulse_amplitude *
            (smoothstep_prime(x1) * smoothstep(x2) - smoothstep(x1) * smoothstep_prime(x2)) /
            opt.pulse_rise;

        if (beta == 0.0 && beta_prime == 0.0) {
            // The decaying shear alone: an exact solution with zero stress.
            TorusVectorField uj(g);
            uj[0] = TorusField(g, sfac * s0);
            st.u.push_back(std::move(uj));
            st.R.emplace_back(g);
            st.p.push_back(TorusField::zero(g));
            continue;
        }

        TorusVectorField uj(g);
        uj[0] = TorusField(g, sfac * s0 + beta * ub0);
        uj[1] = TorusField(g, beta * ub1);
        TorusVectorField forcing = divergence(outer(uj, uj));
        forcing[0] = TorusField(g, forcing[0].values() + beta_prime * ub0 +
                                       beta * frac_pulse[0].values());
        forcing[1] = TorusField(g, forcing[1].values() + beta_prime * ub1 +
                                       beta * frac_pulse[1].values());
        st.R.push_back(stripped(antidiv(leray_project(forcing))));
        st.p.push_back(-inv_laplacian(divergence(forcing)));
        st.u.push_back(std::move(uj));
    }

    st.prepared.tau = 0.05;
    st.prepared.intervals = {{0.0, 0.25}, {0.25, 0.5}, {0.5, 0.75}, {0.75, 1.0}};
    return st;
}

GlueResult glue_step(const NSRState& state, const GlueOptions& opt) {
    const TorusGrid& g = state.grid;
    const int d = g.d;
    const int N = state.slices();
    if (N < 3) throw std::invalid_argument("glue_step: needs at least three slices");
    if (state.u.size() != std::size_t(N) || state.R.size() != std::size_t(N) ||
        state.p.size() != std::size_t(N))
        throw std::invalid_argument("glue_step: slice arrays disagree");
    const double h = state.dt();
    if (std::abs(state.times.front()) > 1e-12 || std::abs(state.times.back() - 1.0) > 1e-12)
        throw std::invalid_argument("glue_step: flow must live on [0,1]");
    for (int j = 0; j < N; ++j)
        if (std::abs(state.times[j] - state.times[0] - double(j) * h) > 1e-12)
            throw std::invalid_argument("glue_step: nonuniform time samples");
    if (opt.substeps < 1) throw std::invalid_argument("glue_step: substeps must be >= 1");

    TimePartition part = build_glue_cutoffs(opt.tau, opt.eps);
    const int m = part.count();
    if ((N - 1) % m != 0)
        throw std::invalid_argument("glue_step: slice count minus one must be divisible by " +
                                    std::to_string(m));
    const int K = (N - 1) / m;

    double umax = 0;
    for (int j = 0; j < N; ++j) umax = std::max(umax, lebesgue_norm_inf(state.u[j]));
    const double dti = h / opt.substeps;
    const double cfl = umax * dti / g.spacing();
    if (cfl > opt.cfl_limit)
        throw invariant_error("glue_step: advective CFL " + std::to_string(cfl) +
                              " above limit " + std::to_string(opt.cfl_limit));

    std::vector<char> rzero(N);
    for (int j = 0; j < N; ++j) rzero[j] = is_zero(state.R[j]) ? 1 : 0;

    // Implicit-explicit multipliers for the dissipation (-Delta)^theta.
    Eigen::ArrayXd dis(g.size());
    for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& mm) {
        const double s2 =
            double(mm[0]) * mm[0] + double(mm[1]) * mm[1] + double(mm[2]) * mm[2];
        dis[idx] = std::pow(s2, state.theta);
    });
    const Eigen::ArrayXcd mult_euler =
        (1.0 + dti * dis).inverse().cast<std::complex<double>>();
    const Eigen::ArrayXcd cn_keep =
        ((1.0 - 0.5 * dti * dis) * (1.0 + 0.5 * dti * dis).inverse())
            .cast<std::complex<double>>();
    const Eigen::ArrayXcd cn_force =
        (1.0 + 0.5 * dti * dis).inverse().cast<std::complex<double>>();

    // -P[ div(v (x) (v + u) + u (x) v) + div R ]
    auto flow_rhs = [&](const TorusVectorField& v, const TorusVectorField& uu,
                        const TorusVectorField* divr) {
        TorusTensorField T(g);
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k)
                T(i, k) = TorusField(g, v[i].values() * (v[k].values() + uu[k].values()) +
                                            uu[i].values() * v[k].values());
        TorusVectorField f = divergence(T);
        if (divr) add(f, *divr);
        f = leray_project(f);
        for (int i = 0; i < d; ++i) f[i] = -f[i];
        return f;
    };

    std::vector<std::vector<TorusVectorField>> tracks(m);
    std::vector<CorrectorDiagnostics> diags(m);
    for (int i = 0; i < m; ++i) {
        diags[i].interval = i;
        bool act = false;
        for (int j = i * K; j <= i * K + K && !act; ++j)
            if (!rzero[j]) act = true;
        diags[i].active = act;
        if (!act) continue;

        auto& track = tracks[i];
        track.reserve(K + 1);
        track.emplace_back(g); // v_i vanishes at its node
        TorusVectorField vcur(g);
        bool vzero = true;
        TorusVectorField eprev(g);
        bool have_eprev = false;
        for (int j = i * K; j < i * K + K; ++j) {
            for (int s = 0; s < opt.substeps; ++s) {
                const double al = double(s) / opt.substeps;
                const bool fzero = (al == 0.0) ? bool(rzero[j]) : (rzero[j] && rzero[j + 1]);
                if (vzero && fzero) {
                    have_eprev = false;
                    continue;
                }
                const TorusVectorField* ubg = &state.u[j];
                TorusVectorField utmp(g);
                if (al != 0.0) {
                    utmp = lerp(state.u[j], state.u[j + 1], al);
                    ubg = &utmp;
                }
                TorusVectorField dr(g);
                bool have_dr = false;
                if (!fzero) {
                    dr = (al == 0.0) ? divergence(state.R[j])
                                     : divergence(lerp(state.R[j], state.R[j + 1], al));
                    have_dr = true;
                }
                TorusVectorField E = flow_rhs(vcur, *ubg, have_dr ? &dr : nullptr);
                if (!opt.second_order || !have_eprev) {
                    for (int c = 0; c < d; ++c) {
                        Eigen::ArrayXcd spec =
                            dft_forward(g, vcur[c].values() + dti * E[c].values());
                        Eigen::ArrayXcd upd = spec * mult_euler;
                        vcur[c] = TorusField::from_spectrum(g, upd);
                    }
                } else {
                    for (int c = 0; c < d; ++c) {
                        Eigen::ArrayXcd sv = dft_forward(g, vcur[c].values());
                        Eigen::ArrayXcd sf =
                            dft_forward(g, 1.5 * E[c].values() - 0.5 * eprev[c].values());
                        Eigen::ArrayXcd upd = sv * cn_keep + dti * (sf * cn_force);
                        vcur[c] = TorusField::from_spectrum(g, upd);
                    }
                }
                if (opt.second_order) {
                    eprev = std::move(E);
                    have_eprev = true;
                }
                vzero = false;
            }
            track.push_back(vcur);
        }

        double shd = 0, slr = 0;
        for (const auto& vj : track) {
            if (is_zero(vj)) continue;
            shd = std::max(shd, sobolev_norm(vj, double(d), 2.0));
            slr = std::max(slr, lebesgue_norm(antidiv(vj), opt.r_exponent));
        }
        diags[i].v_sup_hd = shd;
        diags[i].rv_sup_lr = slr;
    }

    // Nodes needing a window: corrector activity on either side, or input
    // stress within tau of the node.
    WellPreparedSet prepared;
    prepared.tau = opt.tau;
    for (int i = 1; i < m; ++i) {
        bool in_e = diags[i - 1].active || diags[i].active;
        for (int j = 0; j < N && !in_e; ++j)
            if (!rzero[j] && std::abs(state.times[j] - part.node(i)) < opt.tau) in_e = true;
        if (in_e) {
            const double left = part.node(i) - 2.5 * opt.tau;
            prepared.intervals.push_back({left, left + 5.0 * opt.tau});
        }
    }
    prepared.validate(opt.eps);

    NSRState glued;
    glued.grid = g;
    glued.theta = state.theta;
    glued.times = state.times;
    glued.prepared = prepared;
    glued.u.reserve(N);
    glued.R.reserve(N);
    glued.p.reserve(N);

    double in_acc = 0, out_acc = 0;
    for (int j = 0; j < N; ++j) {
        const double t = state.times[j];
        const double wq = h * ((j == 0 || j == N - 1) ? 0.5 : 1.0);
        const int i = std::min(j / K, m - 1);
        const double xv = part.xi(i, t);
        const double xp = part.xi_prime(i, t);
        const bool act = diags[i].active;
        const TorusVectorField* vloc = act ? &tracks[i][std::size_t(j - i * K)] : nullptr;
        const bool vnz = vloc && !is_zero(*vloc);

        TorusVectorField ub = state.u[j];
        if (vnz && xv != 0.0) add_scaled(ub, xv, *vloc);

        TorusTensorField rb(g);
        bool rb_zero = true;
        if (!rzero[j] && 1.0 - xv != 0.0) {
            add_scaled(rb, 1.0 - xv, state.R[j]);
            rb_zero = false;
        }
        if (vnz && xp != 0.0) {
            add(rb, antidiv(scaled(xp, *vloc)));
            rb_zero = false;
        }
        const double xq = xv * xv - xv;
        if (vnz && xq != 0.0) {
            add_scaled(rb, xq, deviatoric(outer(*vloc, *vloc)));
            rb_zero = false;
        }

        TorusTensorField flux(g);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                flux(a, b) = TorusField(g, rb(a, b).values() - ub[a].values() * ub[b].values());
        TorusField pb = inv_laplacian(divergence(divergence(flux)));

        if (!rzero[j]) in_acc += wq * lebesgue_norm(state.R[j], opt.r_exponent);
        if (!rb_zero) out_acc += wq * lebesgue_norm(rb, opt.r_exponent);

        glued.u.push_back(std::move(ub));
        glued.R.push_back(std::move(rb));
        glued.p.push_back(std::move(pb));
    }

    GlueResult out{std::move(glued),
                   std::move(prepared),
                   part,
                   std::move(diags),
                   in_acc,
                   out_acc,
                   in_acc > 0 ? out_acc / in_acc : 0.0,
                   opt.r_exponent};

    if (std::isfinite(opt.residual_tol)) {
        const double res = residual(out.glued);
        if (res > opt.residual_tol)
            throw invariant_error("glue_step: glued residual " + std::to_string(res) +
                                  " above tolerance " + std::to_string(opt.residual_tol));
    }
    return out;
}

PerturbResult perturb_step(const GlueResult& glued, const MikadoFamily& family,
                           const PeriodicProfile& profile, const PerturbOptions& opt) {
    const NSRState& gs = glued.glued;
    const TorusGrid& g = gs.grid;
    const int d = g.d;
    const int N = gs.slices();
    if (N < 3) throw std::invalid_argument("perturb_step: needs at least three slices");
    if (gs.u.size() != std::size_t(N) || gs.R.size() != std::size_t(N) ||
        gs.p.size() != std::size_t(N))
        throw std::invalid_argument("perturb_step: slice arrays disagree");
    if (opt.nu < 1) throw std::invalid_argument("perturb_step: nu must be positive");
    const double r = opt.r_exponent;
    if (!(r >= 1.0 && r < 2.0))
        throw std::invalid_argument("perturb_step: r_exponent must lie in [1,2)");
    family.validate();
    if (required_resolution(family.mu, family.sigma) > g.n)
        throw resolution_error("perturb_step: family needs resolution " +
                               std::to_string(required_resolution(family.mu, family.sigma)) +
                               ", grid has " + std::to_string(g.n));
    const double h = gs.dt();
    for (int j = 0; j < N; ++j)
        if (std::abs(gs.times[j] - gs.times[0] - double(j) * h) > 1e-12)
            throw std::invalid_argument("perturb_step: nonuniform time samples");

    const WellPreparedSet& I = gs.prepared;
    const DirectionSet& dirs = family.directions;
    const int Kd = dirs.size();
    const double sd = double(family.sigma);
    const double mud = double(family.mu);
    const double kd = double(profile.kappa());
    const double nud = double(opt.nu);
    const double dd = double(d - 1);
    const double pp = opt.p_exponent, qq = opt.q_exponent, ss = opt.s_exponent;
    const double gg = opt.gamma;
    const double bb = 2.0 * r / (2.0 - r);

    // Dilated pencil, its potentials, and the mean-free quadratic frames.
    std::vector<TorusVectorField> Wd;
    std::vector<TorusTensorField> Od;
    std::vector<TorusVectorField> divOd;
    std::vector<TorusTensorField> Gk;
    std::vector<std::array<double, 3>> ek(Kd);
    Wd.reserve(Kd);
    Od.reserve(Kd);
    divOd.reserve(Kd);
    Gk.reserve(Kd);
    for (int k = 0; k < Kd; ++k) {
        MikadoField mf = mikado_field(g, family, k);
        ek[k] = mf.e;
        TorusVectorField wd(g);
        for (int c = 0; c < d; ++c) wd[c] = dilate(mf.w[c], family.sigma);
        TorusTensorField od(g);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) od(a, b) = dilate(mf.omega(a, b), family.sigma);
        TorusTensorField gk(g);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                gk(a, b) = TorusField(g, wd[a].values() * wd[b].values() - mf.e[a] * mf.e[b]);
        divOd.push_back(divergence(od));
        Wd.push_back(std::move(wd));
        Od.push_back(std::move(od));
        Gk.push_back(std::move(gk));
    }

    std::vector<std::pair<int, int>> pairs;
    std::vector<TorusTensorField> pairT;
    for (int k = 0; k < Kd; ++k)
        for (int k2 = k + 1; k2 < Kd; ++k2) {
            pairs.emplace_back(k, k2);
            pairT.push_back(sym_outer(Wd[k], Wd[k2]));
        }

    GammaCoefficients anchor = decompose(Eigen::MatrixXd::Identity(d, d), dirs);
    std::vector<double> anchor_sqrt(Kd);
    for (int k = 0; k < Kd; ++k) anchor_sqrt[k] = std::sqrt(anchor.c[k]);
    const double rho0 = 2.0; // stress cutoff floor at vanishing stress

    std::vector<char> rzero(N);
    for (int j = 0; j < N; ++j) rzero[j] = is_zero(gs.R[j]) ? 1 : 0;

    std::vector<TorusVectorField> wpc_s, wt_s, divrb_s;
    std::vector<TorusTensorField> sloc_s;
    std::vector<TorusField> ploc_s;
    std::vector<char> wpc_nz(N, 0), wt_nz(N, 0), divrb_nz(N, 0), sloc_nz(N, 0), ploc_nz(N, 0);
    std::vector<double> gv(N);
    wpc_s.reserve(N);
    wt_s.reserve(N);
    divrb_s.reserve(N);
    sloc_s.reserve(N);
    ploc_s.reserve(N);

    double acc_wp_l2 = 0, acc_wp_lp = 0, acc_wp_ls = 0;
    double acc_wc_lp = 0, acc_wc_l2b = 0, acc_wc_ls = 0;
    double max_wt_inf = 0, max_wt_w1 = 0;
    double acc_w_l2 = 0, acc_w_lp = 0, acc_w_ls = 0;
    double acc_diss = 0, acc_adv = 0, acc_cor = 0, acc_oscx = 0, acc_far = 0;
    double acc_rbar1 = 0, acc_rbarr = 0, tfac2 = 0;
    double propak = 0, divw = 0, leak = 0;

    for (int j = 0; j < N; ++j) {
        const double t = gs.times[j];
        const double wq = h * ((j == 0 || j == N - 1) ? 0.5 : 1.0);
        const double th = time_cutoff_theta(I, I.tau, t);
        gv[j] = profile.g(nud * t);
        const double hval = profile.h(nud * t);
        const double tg = th * gv[j];
        const bool rz = rzero[j];
        tfac2 += wq * tg * tg;
        if (!rz) {
            acc_rbar1 += wq * lebesgue_norm(gs.R[j], 1.0);
            acc_rbarr += wq * lebesgue_norm(gs.R[j], r);
        }

        TorusVectorField wt(g);
        bool wtnz = false;
        if (!rz) {
            divrb_s.push_back(divergence(gs.R[j]));
            divrb_nz[j] = 1;
            if (hval != 0.0) {
                wt = scaled(hval / nud, leray_project(divrb_s.back()));
                wtnz = true;
            }
        } else {
            divrb_s.emplace_back(g);
        }

        TorusVectorField wp(g), wpc(g);
        bool wpnz = false;
        const bool const_amp = rz;
        std::vector<double> akc;
        std::vector<Eigen::ArrayXd> akv;
        TorusField rho = TorusField::zero(g);
        if (tg != 0.0) {
            wpnz = true;
            if (const_amp) {
                akc.resize(Kd);
                for (int k = 0; k < Kd; ++k) {
                    akc[k] = tg * std::sqrt(rho0) * anchor_sqrt[k];
                    add_scaled(wp, akc[k], Wd[k]);
                    add_scaled(wpc, akc[k] / sd, divOd[k]);
                }
            } else {
                rho = stress_cutoff_rho(gs.R[j]);
                std::vector<TorusField> gam = pointwise_decompose_field(gs.R[j], rho, dirs);
                const Eigen::ArrayXd base = tg * rho.values().sqrt();
                akv.resize(Kd);
                for (int k = 0; k < Kd; ++k) akv[k] = base * gam[k].values();
                for (int c = 0; c < d; ++c) {
                    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(g.size());
                    for (int k = 0; k < Kd; ++k) acc += akv[k] * Wd[k][c].values();
                    wp[c] = TorusField(g, acc);
                }
                TorusTensorField T(g);
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) {
                        Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(g.size());
                        for (int k = 0; k < Kd; ++k) acc += akv[k] * Od[k](a, b).values();
                        T(a, b) = TorusField(g, acc);
                    }
                wpc = scaled(1.0 / sd, divergence(T));
            }
        }

        TorusVectorField wc(g);
        if (wpnz) {
            wc = wpc;
            add_scaled(wc, -1.0, wp);
        }
        TorusVectorField w = wpc;
        if (wtnz) add(w, wt);
        const bool wnz = wpnz || wtnz;

        if (wpnz) {
            const double l2 = lebesgue_norm(wp, 2.0);
            acc_wp_l2 += wq * l2 * l2;
            acc_wp_lp += wq * std::pow(lebesgue_norm_inf(wp), pp);
            acc_wp_ls += wq * std::pow(sobolev_norm(wp, gg, qq), ss);
            acc_wc_lp += wq * std::pow(lebesgue_norm_inf(wc), pp);
            const double clb = lebesgue_norm(wc, bb);
            acc_wc_l2b += wq * clb * clb;
            acc_wc_ls += wq * std::pow(sobolev_norm(wc, gg, qq), ss);
        }
        if (wtnz) {
            max_wt_inf = std::max(max_wt_inf, lebesgue_norm_inf(wt));
            max_wt_w1 = std::max(max_wt_w1, c1_norm(wt));
        }
        if (wnz) {
            const double l2 = lebesgue_norm(w, 2.0);
            acc_w_l2 += wq * l2 * l2;
            acc_w_lp += wq * std::pow(lebesgue_norm_inf(w), pp);
            acc_w_ls += wq * std::pow(sobolev_norm(w, gg, qq), ss);
            divw = std::max(divw, lebesgue_norm_inf(divergence(w)));
            if (!I.contains(t)) leak = std::max(leak, lebesgue_norm_inf(w));
        }

        // Slice-local stress pieces that need no time stencil.
        TorusTensorField sloc(g);
        TorusField ploc = TorusField::zero(g);
        bool snz = false, pnz = false;
        if (wnz) {
            TorusTensorField diss = antidiv(frac_laplacian(w, gs.theta));
            acc_diss += wq * lebesgue_norm(diss, r);
            add(sloc, diss);
            TorusTensorField adv = antidiv(divergence(sym_outer(gs.u[j], w)));
            acc_adv += wq * lebesgue_norm(adv, r);
            add(sloc, adv);
            TorusVectorField wct = wc;
            if (wtnz) add(wct, wt);
            TorusTensorField mix(g);
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    mix(a, b) = TorusField(g, wct[a].values() * w[b].values() +
                                                  wp[a].values() * wct[b].values());
            TorusTensorField cor = antidiv(divergence(mix));
            acc_cor += wq * lebesgue_norm(cor, r);
            add(sloc, cor);
            snz = true;
        }
        if (wpnz && !const_amp) {
            TorusTensorField oscx(g);
            for (int k = 0; k < Kd; ++k) {
                TorusField a2(g, akv[k].square());
                add(oscx, bilinear_antidiv(gradient(a2), Gk[k]));
            }
            acc_oscx += wq * lebesgue_norm(oscx, r);
            add(sloc, oscx);
        }
        if (wpnz && !pairs.empty()) {
            TorusTensorField far(g);
            for (std::size_t q = 0; q < pairs.size(); ++q) {
                const int k = pairs[q].first, k2 = pairs[q].second;
                if (const_amp) {
                    add_scaled(far, akc[k] * akc[k2], pairT[q]);
                } else {
                    const Eigen::ArrayXd cc = akv[k] * akv[k2];
                    for (int a = 0; a < d; ++a)
                        for (int b = 0; b < d; ++b)
                            far(a, b) = TorusField(g, far(a, b).values() +
                                                          cc * pairT[q](a, b).values());
                }
            }
            const Eigen::ArrayXd tr = trace_values(far) / double(d);
            TorusTensorField fdev(g);
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    fdev(a, b) = (a == b) ? TorusField(g, far(a, b).values() - tr)
                                          : far(a, b);
            acc_far += wq * lebesgue_norm(fdev, r);
            add(sloc, fdev);
            ploc = TorusField(g, ploc.values() + tr);
            pnz = true;
        }
        if (wpnz) {
            if (const_amp)
                ploc = TorusField(g, ploc.values() + tg * tg * rho0);
            else
                ploc = TorusField(g, ploc.values() + tg * tg * rho.values());
            pnz = true;

            // sum a_k^2 e_k (x) e_k - theta^2 g^2 (rho Id - Rbar)
            if (const_amp) {
                Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(d, d);
                for (int k = 0; k < Kd; ++k)
                    for (int a = 0; a < d; ++a)
                        for (int b = 0; b < d; ++b)
                            dm(a, b) += akc[k] * akc[k] * ek[k][a] * ek[k][b];
                for (int a = 0; a < d; ++a) dm(a, a) -= tg * tg * rho0;
                propak = std::max(propak, dm.norm());
            } else {
                Eigen::ArrayXd fro = Eigen::ArrayXd::Zero(g.size());
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) {
                        Eigen::ArrayXd entry = Eigen::ArrayXd::Zero(g.size());
                        for (int k = 0; k < Kd; ++k)
                            entry += akv[k].square() * (ek[k][a] * ek[k][b]);
                        if (a == b) entry -= tg * tg * rho.values();
                        entry += tg * tg * gs.R[j](a, b).values();
                        fro += entry.square();
                    }
                propak = std::max(propak, std::sqrt(fro.maxCoeff()));
            }
        }

        wpc_nz[j] = wpnz;
        wt_nz[j] = wtnz;
        sloc_nz[j] = snz || pnz; // pieces may be added in the second pass
        ploc_nz[j] = pnz;
        wpc_s.push_back(std::move(wpc));
        wt_s.push_back(std::move(wt));
        sloc_s.push_back(std::move(sloc));
        ploc_s.push_back(std::move(ploc));
    }

    // Second pass: time stencils, the temporal-oscillation split, and the
    // assembled state. The stencil matches the one residual() applies.
    auto fd_time = [&](const std::vector<TorusVectorField>& f, const std::vector<char>& nz,
                       int j, bool& out_nz) {
        TorusVectorField out(g);
        int ja, jb;
        double sc;
        if (j == 0) {
            ja = 0, jb = 1, sc = 1.0 / h;
        } else if (j == N - 1) {
            ja = N - 2, jb = N - 1, sc = 1.0 / h;
        } else {
            ja = j - 1, jb = j + 1, sc = 0.5 / h;
        }
        out_nz = nz[ja] || nz[jb];
        if (out_nz)
            for (int c = 0; c < d; ++c)
                out[c] = TorusField(g, sc * (f[jb][c].values() - f[ja][c].values()));
        return out;
    };

    NSRState next;
    next.grid = g;
    next.theta = gs.theta;
    next.times = gs.times;
    next.prepared = I;
    next.u.reserve(N);
    next.R.reserve(N);
    next.p.reserve(N);

    double acc_dtw = 0, acc_osct = 0, acc_r1 = 0;
    for (int j = 0; j < N; ++j) {
        const double wq = h * ((j == 0 || j == N - 1) ? 0.5 : 1.0);

        bool fd_nz = false;
        TorusVectorField fdw = fd_time(wpc_s, wpc_nz, j, fd_nz);
        TorusTensorField r1 = std::move(sloc_s[j]);
        if (fd_nz) {
            TorusTensorField lin = antidiv(fdw);
            acc_dtw += wq * lebesgue_norm(lin, r);
            add(r1, lin);
        }

        bool fdt_nz = false;
        TorusVectorField X = fd_time(wt_s, wt_nz, j, fdt_nz);
        const double gfac = 1.0 - gv[j] * gv[j];
        bool xnz = fdt_nz;
        if (divrb_nz[j] && gfac != 0.0) {
            add_scaled(X, gfac, divrb_s[j]);
            xnz = true;
        }
        TorusField pi = TorusField::zero(g);
        bool pinz = false;
        if (xnz) {
            TorusTensorField osct = antidiv(leray_project(X));
            acc_osct += wq * lebesgue_norm(osct, r);
            add(r1, osct);
            pi = inv_laplacian(divergence(X));
            pinz = true;
        }

        acc_r1 += wq * lebesgue_norm(r1, r);

        TorusVectorField u1 = gs.u[j];
        if (wpc_nz[j]) add(u1, wpc_s[j]);
        if (wt_nz[j]) add(u1, wt_s[j]);

        TorusField p1 = gs.p[j];
        if (ploc_nz[j] || pinz) {
            Eigen::ArrayXd P = ploc_s[j].values();
            if (pinz) P += pi.values();
            p1 = TorusField(g, gs.p[j].values() - (P - P.mean()));
        }

        next.u.push_back(std::move(u1));
        next.R.push_back(std::move(r1));
        next.p.push_back(std::move(p1));
    }

    const double w_l2l2 = std::sqrt(acc_w_l2);
    const double wc_l2b = std::sqrt(acc_wc_l2b);

    NormTable table;
    auto push = [&](const char* name, double value, double ref) {
        table.rows.push_back({name, value, ref, ref != 0.0 ? value / ref : 0.0});
    };
    const double lr_shape = std::pow(mud, dd / 2.0 - dd / r);
    const double wp_lp_ref = std::pow(kd, 0.5 - 1.0 / pp) * std::pow(mud, dd / 2.0);
    const double wp_ls_ref = std::pow(sd * mud, gg) * std::pow(mud, dd / 2.0 - dd / qq) *
                             std::pow(kd, 0.5 - 1.0 / ss);
    push("wp_L2L2", std::sqrt(acc_wp_l2), std::sqrt(2.0 * d * tfac2));
    push("wp_LpLinf", std::pow(acc_wp_lp, 1.0 / pp), wp_lp_ref);
    push("wp_LsWgq", std::pow(acc_wp_ls, 1.0 / ss), wp_ls_ref);
    push("wc_LpLinf", std::pow(acc_wc_lp, 1.0 / pp),
         std::pow(kd, 0.5 - 1.0 / pp) * std::pow(mud, dd / 2.0 - 1.0) / sd);
    push("wc_L2Lb", wc_l2b, std::pow(mud, dd / 2.0 - 1.0 - dd / bb) / sd);
    push("wc_LsWgq", std::pow(acc_wc_ls, 1.0 / ss),
         std::pow(sd, gg - 1.0) * std::pow(mud, gg + dd / 2.0 - 1.0 - dd / qq) *
             std::pow(kd, 0.5 - 1.0 / ss));
    push("wt_LinfLinf", max_wt_inf, 1.0 / nud);
    push("wt_LinfW1inf", max_wt_w1, 1.0 / nud);
    push("w_L2L2", w_l2l2, acc_rbar1);
    push("w_LpLinf", std::pow(acc_w_lp, 1.0 / pp), wp_lp_ref);
    push("w_LsWgq", std::pow(acc_w_ls, 1.0 / ss), wp_ls_ref);
    push("Rlin_dt_L1Lr", acc_dtw, nud * std::sqrt(kd) / (sd * mud) * lr_shape);
    push("Rlin_diss_L1Lr", acc_diss,
         std::pow(sd * mud, 2.0 * gs.theta - 1.0) / std::sqrt(kd) * lr_shape);
    push("Rlin_adv_L1Lr", acc_adv, 1.0 / (sd * mud * std::sqrt(kd)) * lr_shape);
    push("Rcor_L1Lr", acc_cor, (wc_l2b + max_wt_inf) * w_l2l2);
    push("RoscX_L1Lr", acc_oscx, std::pow(mud, dd - dd / r) / sd);
    push("RoscT_L1Lr", acc_osct, 1.0 / nud);
    push("Rfar_L1Lr", acc_far, std::pow(mud, dd - double(d) / r));
    push("R1_L1Lr", acc_r1, 0.0);
    push("Rbar_L1L1", acc_rbar1, 0.0);
    push("Rbar_L1Lr", acc_rbarr, 0.0);
    push("temporal_capacity", sd, nud * nud);

    PerturbResult out{std::move(next),
                      std::move(table),
                      propak,
                      divw,
                      leak,
                      acc_rbar1,
                      acc_rbarr,
                      acc_r1,
                      w_l2l2,
                      acc_rbar1 > 0 ? w_l2l2 / acc_rbar1 : 0.0};
    return out;
}

const NormRow* NormTable::find(const std::string& name) const {
    for (const auto& row : rows)
        if (row.name == name) return &row;
    return nullptr;
}

ConstantTable measured_constants(const NormTable& norms) {
    ConstantTable table;
    auto put = [&](const char* name, Rational ConstantTable::* field) {
        const NormRow* row = norms.find(name);
        if (!row) return;
        const double c = row->constant;
        if (!(c > 0.0) || !std::isfinite(c) || c >= 1e12) return;
        long long num = std::llround(c * 1e6);
        if (num <= 0) num = 1;
        table.*field = Rational(num, 1000000);
    };
    put("temporal_capacity", &ConstantTable::temporal_capacity);
    put("w_LpLinf", &ConstantTable::perturbation_lp);
    put("w_LsWgq", &ConstantTable::perturbation_sobolev);
    put("Rlin_dt_L1Lr", &ConstantTable::stress_time_derivative);
    put("wt_LinfW1inf", &ConstantTable::oscillation_decay);
    put("RoscX_L1Lr", &ConstantTable::stress_oscillation);
    put("Rfar_L1Lr", &ConstantTable::stress_interaction);
    return table;
}

IterateResult iterate(const NSRState& state, const ParamPoint& pt,
                      const ExponentWitness& witness, const BigInt& lambda, double delta,
                      const IterateOptions& opt) {
    if (state.grid.d != pt.d)
        throw std::invalid_argument("iterate: state dimension differs from the parameter point");
    if (std::abs(state.theta - pt.theta.convert_to<double>()) > 1e-12)
        throw std::invalid_argument("iterate: state theta differs from the parameter point");

    SynthesisResult ladder = synthesize_integers(pt, witness, lambda);
    IntegerSynthesis ints =
        ladder.ok() ? *ladder.synthesis : integer_map(pt, witness, lambda, opt.alpha);
    const BigInt desk_cap(1000000);
    if (ints.mu > desk_cap || ints.nu > desk_cap || ints.sigma > desk_cap ||
        ints.kappa > desk_cap)
        throw resolution_error("iterate: synthesized frequencies exceed the desk scale");
    const long long mu = ints.mu.convert_to<long long>();
    const long long nu = ints.nu.convert_to<long long>();
    const long long sigma = ints.sigma.convert_to<long long>();
    const long long kappa = ints.kappa.convert_to<long long>();
    if (required_resolution(int(mu), int(sigma)) > state.grid.n)
        throw resolution_error("iterate: family mu=" + std::to_string(mu) +
                               " sigma=" + std::to_string(sigma) + " needs resolution " +
                               std::to_string(required_resolution(int(mu), int(sigma))) +
                               ", grid has " + std::to_string(state.grid.n));

    GlueOptions gopt;
    gopt.tau = opt.tau;
    gopt.eps = opt.eps;
    gopt.substeps = opt.substeps;
    gopt.second_order = opt.second_order;
    gopt.residual_tol = opt.glue_residual_tol;
    gopt.r_exponent = ints.r.convert_to<double>();
    GlueResult glue = glue_step(state, gopt);

    MikadoFamily family{DirectionSet::defaults(pt.d), ProfilePair{}, int(mu), int(sigma)};
    PerturbOptions popt;
    popt.nu = nu;
    popt.r_exponent = ints.r.convert_to<double>();
    popt.p_exponent = pt.p.convert_to<double>();
    popt.q_exponent = pt.q.convert_to<double>();
    popt.s_exponent = pt.s.convert_to<double>();
    popt.gamma = pt.gamma.convert_to<double>();
    PerturbResult pert = perturb_step(glue, family, PeriodicProfile(int(kappa)), popt);

    ConstantTable measured = measured_constants(pert.norms);
    std::vector<std::string> violated = violated_relations(pt, ints, measured);
    const bool nested = glue.prepared.is_nested_in(state.prepared);
    const bool met = pert.r1_l1lr <= delta;
    IterateResult out{std::move(ints),     ladder.ok(), std::move(glue), std::move(pert),
                      std::move(violated), delta,       met,             nested};
    return out;
}

} // namespace fnsr
