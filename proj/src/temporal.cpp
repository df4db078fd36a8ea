#include <fnsr/temporal.hpp>

#include <fnsr/errors.hpp>
#include <fnsr/spectral_ops.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace fnsr {
namespace {

// Bump exponent of g and the resulting closed-form constants.
constexpr int kBumpPow = 6;

// int_{-1}^{1} (1-u^2)^n du by the recurrence I_n = I_{n-1} * 2n/(2n+1).
double bump_integral(int n) {
    double I = 2.0;
    for (int k = 1; k <= n; ++k) I *= 2.0 * k / (2.0 * k + 1.0);
    return I;
}

// Amplitude making int_0^1 g^2 = 1 with g = c (1-u^2)^kBumpPow, u = 4t-2.
double g_amplitude() {
    static const double c = 2.0 / std::sqrt(bump_integral(2 * kBumpPow));
    return c;
}

// Antiderivative of (1-u^2)^(2*kBumpPow) evaluated from -1 to z, |z| <= 1.
double bump_sq_cumulative(double z) {
    constexpr int n = 2 * kBumpPow;
    // (1-u^2)^n = sum_k binom(n,k) (-1)^k u^{2k}
    double acc = 0;
    double binom = 1;
    for (int k = 0; k <= n; ++k) {
        double term = (std::pow(z, 2 * k + 1) + 1.0) / (2 * k + 1);
        acc += (k % 2 == 0 ? binom : -binom) * term;
        binom = binom * (n - k) / (k + 1);
    }
    return acc;
}

double frac_unit(double t) {
    double f = t - std::floor(t);
    return f;
}

} // namespace

double PeriodicProfile::g_base(double s) {
    if (s <= 0.25 || s >= 0.75) return 0.0;
    double u = 4.0 * s - 2.0;
    return g_amplitude() * std::pow(1.0 - u * u, kBumpPow);
}

double PeriodicProfile::g_base_sq_cumulative(double x) {
    if (x <= 0.25) return 0.0;
    if (x >= 0.75) return 1.0;
    double c = g_amplitude();
    return c * c / 4.0 * bump_sq_cumulative(4.0 * x - 2.0);
}

PeriodicProfile::PeriodicProfile(int kappa) : kappa_(kappa) {
    if (kappa < 1) throw std::invalid_argument("PeriodicProfile: kappa must be >= 1");
}

double PeriodicProfile::g(double t) const {
    double f = frac_unit(t);
    if (f > 1.0 / kappa_) return 0.0;
    return std::sqrt(double(kappa_)) * g_base(kappa_ * f);
}

double PeriodicProfile::h(double t) const {
    double f = frac_unit(t);
    return g_base_sq_cumulative(std::min(kappa_ * f, 1.0)) - f;
}

double PeriodicProfile::g_norm(double p) const {
    if (p < 1.0) throw std::invalid_argument("g_norm: p must be >= 1");
    // Simpson nodes on [0, 1/kappa], mapped from the kappa = 1 nodes so
    // the scaling law is exact.
    constexpr int N = 4096;
    const double hstep = 1.0 / (double(N) * kappa_);
    double acc = 0;
    for (int j = 0; j <= N; ++j) {
        double w = (j == 0 || j == N) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
        acc += w * std::pow(std::abs(g(j * hstep)), p);
    }
    acc *= hstep / 3.0;
    return std::pow(acc, 1.0 / p);
}

double PeriodicProfile::g_norm_inf() const {
    constexpr int N = 4096;
    double m = 0;
    for (int j = 0; j <= N; ++j)
        m = std::max(m, std::abs(g(double(j) / (double(N) * kappa_))));
    return m;
}

namespace {

double efun(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }

} // namespace

double smoothstep(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double a = efun(x), b = efun(1.0 - x);
    return a / (a + b);
}

double smoothstep_prime(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    double a = efun(x), b = efun(1.0 - x);
    double ap = a / (x * x), bp = b / ((1.0 - x) * (1.0 - x));
    // d/dx [a/(a+b)] with b' = -bp
    return (ap * b + a * bp) / ((a + b) * (a + b));
}

double TimePartition::xi(int i, double t) const {
    const double lo = node(i), hi = node(i + 1);
    double up = (i == 0) ? 1.0 : smoothstep((t - (lo + tau_ / 2)) / (tau_ / 2));
    double down = (i == m_ - 1) ? 1.0 : smoothstep(((hi - tau_ / 2) - t) / (tau_ / 2));
    return up * down;
}

double TimePartition::xi_prime(int i, double t) const {
    const double lo = node(i), hi = node(i + 1);
    const double w = tau_ / 2;
    double up = 1.0, upp = 0.0, down = 1.0, downp = 0.0;
    if (i != 0) {
        up = smoothstep((t - (lo + w)) / w);
        upp = smoothstep_prime((t - (lo + w)) / w) / w;
    }
    if (i != m_ - 1) {
        down = smoothstep(((hi - w) - t) / w);
        downp = -smoothstep_prime(((hi - w) - t) / w) / w;
    }
    return upp * down + up * downp;
}

TimePartition build_glue_cutoffs(double tau, double eps) {
    if (tau <= 0 || eps <= 0 || eps >= 1)
        throw invariant_error("build_glue_cutoffs: need tau > 0 and eps in (0,1)");
    double mf = std::pow(tau, -eps);
    int m = int(std::lround(mf));
    if (m < 1 || std::abs(mf - m) > 1e-9 * mf)
        throw invariant_error("build_glue_cutoffs: tau^(-eps) must be an integer");
    if (!(tau < 1.0 / (4.0 * m)))
        throw invariant_error("build_glue_cutoffs: need tau < tau^eps / 4");
    return TimePartition(tau, eps, m);
}

namespace {

// Mollifier eta(y) = c_eta (1-y^2)^4 on [-1,1]; chi is the convolution of
// max(1, x) with eta scaled to half-width 1/2. Closed form below uses
// A(z) = int_{-1}^z eta, B(z) = int_{-1}^z y eta(y) dy.
double eta_cdf(double z) {
    // c_eta = 315/256; antiderivative of (1-y^2)^4 = 1 -4y^2 +6y^4 -4y^6 +y^8
    double P = z - 4.0 * z * z * z / 3 + 1.2 * std::pow(z, 5) -
               4.0 * std::pow(z, 7) / 7 + std::pow(z, 9) / 9;
    const double P1 = 1.0 - 4.0 / 3 + 1.2 - 4.0 / 7 + 1.0 / 9;
    return (315.0 / 256.0) * (P + P1);
}

double eta_first_moment(double z) {
    // int_{-1}^z y eta = -c_eta (1-z^2)^5 / 10
    double q = 1.0 - z * z;
    return -(315.0 / 256.0) * q * q * q * q * q / 10.0;
}

} // namespace

double chi(double x) {
    // chi(x) = 1 + (relu(. - 1) * eta_{1/2})(x); z = (x - 1) / (1/2)
    double z = (x - 1.0) * 2.0;
    if (z <= -1.0) return 1.0;
    if (z >= 1.0) return x;
    // int_{-1}^{z} (z - y) eta(y) dy, back in x units (factor 1/2)
    double conv = z * eta_cdf(z) - eta_first_moment(z);
    return 1.0 + 0.5 * conv;
}

TorusField stress_cutoff_rho(const TorusTensorField& rbar) {
    TorusField mag = frobenius_magnitude(rbar);
    Eigen::ArrayXd v = mag.values();
    for (std::ptrdiff_t i = 0; i < v.size(); ++i) v[i] = 2.0 * chi(v[i]);
    return TorusField(rbar.grid(), std::move(v));
}

std::vector<std::array<double, 2>> WellPreparedSet::merged() const {
    auto sorted = intervals;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::array<double, 2>> out;
    for (const auto& iv : sorted) {
        if (!out.empty() && iv[0] <= out.back()[1])
            out.back()[1] = std::max(out.back()[1], iv[1]);
        else
            out.push_back(iv);
    }
    return out;
}

std::vector<std::array<double, 2>> WellPreparedSet::complement() const {
    std::vector<std::array<double, 2>> out;
    double cursor = 0.0;
    for (const auto& iv : merged()) {
        if (iv[0] > cursor) out.push_back({cursor, iv[0]});
        cursor = std::max(cursor, iv[1]);
    }
    if (cursor < 1.0) out.push_back({cursor, 1.0});
    return out;
}

bool WellPreparedSet::contains(double t) const {
    for (const auto& iv : merged())
        if (t >= iv[0] && t <= iv[1]) return true;
    return false;
}

double WellPreparedSet::dist_to_complement(double t) const {
    auto comp = complement();
    if (comp.empty()) return std::numeric_limits<double>::infinity();
    double d = std::numeric_limits<double>::infinity();
    for (const auto& iv : comp) {
        if (t >= iv[0] && t <= iv[1]) return 0.0;
        d = std::min(d, std::min(std::abs(t - iv[0]), std::abs(t - iv[1])));
    }
    return d;
}

bool WellPreparedSet::is_nested_in(const WellPreparedSet& outer) const {
    auto big = outer.merged();
    for (const auto& iv : merged()) {
        bool ok = false;
        for (const auto& o : big)
            if (iv[0] >= o[0] - 1e-12 && iv[1] <= o[1] + 1e-12) {
                ok = true;
                break;
            }
        if (!ok) return false;
    }
    return true;
}

void WellPreparedSet::validate(double eps) const {
    for (const auto& iv : intervals) {
        if (iv[0] < -1e-12 || iv[1] > 1 + 1e-12 || iv[0] >= iv[1])
            throw invariant_error("WellPreparedSet: interval out of [0,1]");
        if (std::abs((iv[1] - iv[0]) - 5 * tau) > 1e-12)
            throw invariant_error("WellPreparedSet: interval length differs from 5 tau");
    }
    if (eps >= 0) {
        double bound = std::pow(tau, -eps);
        if (double(intervals.size()) > bound + 1e-9)
            throw invariant_error("WellPreparedSet: interval count exceeds tau^(-eps)");
    }
}

double time_cutoff_theta(const WellPreparedSet& I, double tau, double t) {
    double d = I.dist_to_complement(t);
    if (std::isinf(d)) return 1.0;
    return smoothstep((d - tau) / (tau / 2));
}

HolderGap improved_holder_gap(const TorusField& f, const TorusField& g, int lambda,
                              double p, double s) {
    if (p < 1.0 || p > 2.0)
        throw std::invalid_argument("improved_holder_gap: p must lie in [1,2]");
    if (s <= 0.0 || s >= 1.0)
        throw std::invalid_argument("improved_holder_gap: s must lie in (0,1)");
    if (lambda < 1) throw std::invalid_argument("improved_holder_gap: lambda >= 1");
    TorusField gl = dilate(g, lambda);
    double lhs = lebesgue_norm(f * gl, p);
    double rhs = lebesgue_norm(f, p) * lebesgue_norm(g, p);
    double pprime_inv = 1.0 - 1.0 / p; // 1/p'
    double factor = std::pow(double(lambda), -s * pprime_inv) * holder_norm(f, s) *
                    lebesgue_norm(g, p);
    return {std::abs(lhs - rhs), factor};
}

double holder_norm(const TorusField& f, double s) {
    const TorusGrid& g = f.grid();
    const double h = g.spacing();
    const Eigen::ArrayXd& v = f.values();
    double semi = 0;
    // axis-adjacent difference quotients, periodic wrap
    if (g.d == 2) {
        for (int i0 = 0; i0 < g.n; ++i0)
            for (int i1 = 0; i1 < g.n; ++i1) {
                std::ptrdiff_t idx = std::ptrdiff_t(i0) * g.n + i1;
                std::ptrdiff_t r0 = std::ptrdiff_t((i0 + 1) % g.n) * g.n + i1;
                std::ptrdiff_t r1 = std::ptrdiff_t(i0) * g.n + (i1 + 1) % g.n;
                semi = std::max(semi, std::abs(v[r0] - v[idx]));
                semi = std::max(semi, std::abs(v[r1] - v[idx]));
            }
    } else {
        for (int i0 = 0; i0 < g.n; ++i0)
            for (int i1 = 0; i1 < g.n; ++i1)
                for (int i2 = 0; i2 < g.n; ++i2) {
                    auto at = [&](int a, int b, int c) {
                        return (std::ptrdiff_t(a) * g.n + b) * g.n + c;
                    };
                    std::ptrdiff_t idx = at(i0, i1, i2);
                    semi = std::max(semi, std::abs(v[at((i0 + 1) % g.n, i1, i2)] - v[idx]));
                    semi = std::max(semi, std::abs(v[at(i0, (i1 + 1) % g.n, i2)] - v[idx]));
                    semi = std::max(semi, std::abs(v[at(i0, i1, (i2 + 1) % g.n)] - v[idx]));
                }
    }
    return lebesgue_norm_inf(f) + semi / std::pow(h, s);
}

} // namespace fnsr
