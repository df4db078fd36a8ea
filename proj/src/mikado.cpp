#include <fnsr/mikado.hpp>

#include <fnsr/errors.hpp>
#include <fnsr/fft.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fnsr {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.1415926535897932384626433832795;

int gcd3(const std::array<int, 3>& k) {
    int g = 0;
    for (int v : k) g = std::gcd(g, std::abs(v));
    return g;
}

std::array<int, 3> primitive(const std::array<int, 3>& k) {
    int g = gcd3(k);
    return {k[0] / g, k[1] / g, k[2] / g};
}

double wrap_unit(double t) {
    t -= std::floor(t);
    if (t >= 1.0) t -= 1.0;
    return t;
}

// Distance machinery for one periodic line {t*k + p mod 1}, unit-box
// coordinates. d = 2: the translates of the line cut the perpendicular
// axis in steps of gcd(|k1|,|k2|)/|k|. d = 3: the integer translates
// project onto the plane k-perp as a rank-2 lattice; a reduced basis makes
// the closest-vector search a 5x5 candidate scan.
class LineGeometry {
public:
    LineGeometry(const std::array<int, 3>& k, const std::array<double, 3>& p, int d)
        : d_(d), p_(p) {
        if (d != 2 && d != 3) throw std::invalid_argument("line_distance: d must be 2 or 3");
        if (k[0] == 0 && k[1] == 0 && k[2] == 0)
            throw std::invalid_argument("line_distance: direction must be nonzero");
        for (int i = d; i < 3; ++i)
            if (k[i] != 0)
                throw std::invalid_argument("line_distance: direction exceeds dimension");

        double len = std::sqrt(double(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]));
        for (int i = 0; i < 3; ++i) e_[i] = k[i] / len;

        if (d == 2) {
            perp_[0] = -k[1] / len;
            perp_[1] = k[0] / len;
            period_ = std::gcd(std::abs(k[0]), std::abs(k[1])) / len;
            return;
        }

        auto kp = primitive(k);
        std::array<std::array<double, 3>, 2> basis{};
        if (!unimodular_complement(kp, basis))
            throw std::invalid_argument("line_distance: no lattice complement found");
        for (int i = 0; i < 2; ++i) b_[i] = project(basis[i]);
        reduce_basis();
        g11_ = dot(b_[0], b_[0]);
        g12_ = dot(b_[0], b_[1]);
        g22_ = dot(b_[1], b_[1]);
        det_ = g11_ * g22_ - g12_ * g12_;
        if (det_ <= 0) throw std::invalid_argument("line_distance: degenerate lattice");
    }

    // y in unit-box coordinates.
    double distance(const std::array<double, 3>& y) const {
        if (d_ == 2) {
            double t = (y[0] - p_[0]) * perp_[0] + (y[1] - p_[1]) * perp_[1];
            t -= period_ * std::floor(t / period_);
            return std::min(t, period_ - t);
        }
        std::array<double, 3> w{};
        for (int i = 0; i < 3; ++i) w[i] = y[i] - p_[i];
        w = project(w);
        double c1 = (dot(w, b_[0]) * g22_ - dot(w, b_[1]) * g12_) / det_;
        double c2 = (dot(w, b_[1]) * g11_ - dot(w, b_[0]) * g12_) / det_;
        double r1 = std::round(c1), r2 = std::round(c2);
        double best = std::numeric_limits<double>::infinity();
        for (int i = -2; i <= 2; ++i)
            for (int j = -2; j <= 2; ++j) {
                double a = r1 + i, b = r2 + j;
                double dx = w[0] - a * b_[0][0] - b * b_[1][0];
                double dy = w[1] - a * b_[0][1] - b * b_[1][1];
                double dz = w[2] - a * b_[0][2] - b * b_[1][2];
                best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
        return std::sqrt(best);
    }

private:
    static double dot(const std::array<double, 3>& a, const std::array<double, 3>& b) {
        return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    }

    std::array<double, 3> project(const std::array<double, 3>& v) const {
        double s = dot(v, {e_[0], e_[1], e_[2]});
        return {v[0] - s * e_[0], v[1] - s * e_[1], v[2] - s * e_[2]};
    }

    static bool unimodular_complement(const std::array<int, 3>& kp,
                                      std::array<std::array<double, 3>, 2>& out) {
        // A +-1 component pairs with the other two axes; otherwise scan a
        // small box of integer candidates.
        for (int i = 0; i < 3; ++i)
            if (kp[i] == 1 || kp[i] == -1) {
                out[0] = out[1] = {0, 0, 0};
                out[0][(i + 1) % 3] = 1;
                out[1][(i + 2) % 3] = 1;
                return true;
            }
        for (int a0 = -2; a0 <= 2; ++a0)
            for (int a1 = -2; a1 <= 2; ++a1)
                for (int a2 = -2; a2 <= 2; ++a2)
                    for (int b0 = -2; b0 <= 2; ++b0)
                        for (int b1 = -2; b1 <= 2; ++b1)
                            for (int b2 = -2; b2 <= 2; ++b2) {
                                long det = long(kp[0]) * (long(a1) * b2 - long(a2) * b1) -
                                           long(kp[1]) * (long(a0) * b2 - long(a2) * b0) +
                                           long(kp[2]) * (long(a0) * b1 - long(a1) * b0);
                                if (det == 1 || det == -1) {
                                    out[0] = {double(a0), double(a1), double(a2)};
                                    out[1] = {double(b0), double(b1), double(b2)};
                                    return true;
                                }
                            }
        return false;
    }

    void reduce_basis() {
        for (int iter = 0; iter < 64; ++iter) {
            if (dot(b_[1], b_[1]) < dot(b_[0], b_[0])) std::swap(b_[0], b_[1]);
            double m = std::round(dot(b_[0], b_[1]) / dot(b_[0], b_[0]));
            if (m == 0) break;
            std::array<double, 3> next;
            for (int i = 0; i < 3; ++i) next[i] = b_[1][i] - m * b_[0][i];
            if (dot(next, next) >= dot(b_[1], b_[1])) break;
            b_[1] = next;
        }
    }

    int d_;
    std::array<double, 3> p_;
    std::array<double, 3> e_{};
    // d = 2
    std::array<double, 2> perp_{};
    double period_ = 1;
    // d = 3
    std::array<std::array<double, 3>, 2> b_{};
    double g11_ = 0, g12_ = 0, g22_ = 0, det_ = 0;
};

// Smooth spectral taper in max-norm radius x = |m|_inf / (3 mu): full
// weight up to half the band, cos^2 roll-off to the band edge. A sharp
// cutoff would ring with slowly decaying transverse tails and bias the
// L^1 scaling; the taper width grows with mu, so the construction is
// self-similar across concentrations.
double spectral_window(double x) {
    if (x <= 0.5) return 1.0;
    if (x >= 1.0) return 0.0;
    double c = std::cos(kPi * (x - 0.5));
    return c * c;
}

struct ScalarBuild {
    Eigen::ArrayXd psi;        // normalized samples
    Eigen::ArrayXcd phi_spec;  // normalized band-limited potential spectrum
    double c = 0;              // normalization constant
};

ScalarBuild build_scalar(const TorusGrid& g, const MikadoFamily& family, int index) {
    family.validate();
    if (g.d != family.directions.d)
        throw std::invalid_argument("mikado: grid and direction set dimensions differ");
    if (index < 0 || index >= family.directions.size())
        throw std::out_of_range("mikado: direction index out of range");

    int need = required_resolution(family.mu, family.sigma);
    if (g.n < need) {
        std::ostringstream msg;
        msg << "mikado: mu = " << family.mu << ", sigma = " << family.sigma
            << " needs grid resolution n >= " << need << ", got n = " << g.n;
        throw resolution_error(msg.str());
    }

    const auto& k = family.directions.directions[index];
    const auto& p = family.directions.points[index];
    LineGeometry geom(k, p, g.d);

    double mu = family.mu;
    double prefactor = std::pow(mu, 0.5 * (g.d - 1) - 2.0);
    const ProfilePair& prof = family.profiles;

    Eigen::ArrayXd raw(g.size());
    for_each_point(g, [&](std::ptrdiff_t idx, const std::array<double, 3>& x) {
        std::array<double, 3> y = {x[0] / kTwoPi, x[1] / kTwoPi, x[2] / kTwoPi};
        raw[idx] = prefactor * prof.phi(mu * geom.distance(y));
    });

    Eigen::ArrayXcd phi_spec = dft_forward(g, raw);
    Eigen::ArrayXcd psi_spec(g.size());
    double band = 3.0 * mu;
    for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
        long mdotk = long(m[0]) * k[0] + long(m[1]) * k[1] + long(m[2]) * k[2];
        double m_inf = std::max({std::abs(m[0]), std::abs(m[1]), std::abs(m[2])});
        double weight = mdotk == 0 ? spectral_window(m_inf / band) : 0.0;
        phi_spec[idx] *= weight;
        double m2 = double(m[0]) * m[0] + double(m[1]) * m[1] + double(m[2]) * m[2];
        psi_spec[idx] = -m2 * phi_spec[idx];
    });

    ScalarBuild out;
    out.psi = dft_inverse_real(g, psi_spec);
    double c2 = out.psi.square().mean();
    if (!(c2 > 1e-300)) throw invariant_error("mikado: profile produced an empty field");
    out.c = std::sqrt(c2);
    out.psi /= out.c;
    out.phi_spec = phi_spec / out.c;
    return out;
}

double lp_mean(const Eigen::ArrayXd& v, double p) {
    if (std::isinf(p)) return v.abs().maxCoeff();
    if (p == 2.0) return std::sqrt(v.square().mean());
    if (p == 1.0) return v.abs().mean();
    return std::pow(v.abs().pow(p).mean(), 1.0 / p);
}

double fit_slope(const std::vector<double>& logx, const std::vector<double>& logy) {
    double n = double(logx.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < logx.size(); ++i) {
        sx += logx[i];
        sy += logy[i];
        sxx += logx[i] * logx[i];
        sxy += logx[i] * logy[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void check_mu_list(const std::vector<int>& mu) {
    if (mu.size() < 3)
        throw std::invalid_argument("scaling report: need at least three concentrations");
    for (size_t i = 0; i + 1 < mu.size(); ++i)
        if (mu[i + 1] <= mu[i])
            throw std::invalid_argument("scaling report: concentrations must increase");
    double ratio = double(mu[1]) / mu[0];
    for (size_t i = 0; i + 1 < mu.size(); ++i)
        if (std::abs(double(mu[i + 1]) / mu[i] - ratio) > 1e-9 * ratio)
            throw std::invalid_argument("scaling report: concentrations must be geometric");
}

// Gradient magnitude |grad psi| from the potential spectrum.
Eigen::ArrayXd gradient_magnitude_sq(const TorusGrid& g, const Eigen::ArrayXcd& psi_spec) {
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(g.size());
    Eigen::ArrayXcd comp(g.size());
    for (int axis = 0; axis < g.d; ++axis) {
        for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
            comp[idx] = std::complex<double>(0, m[axis]) * psi_spec[idx];
        });
        acc += dft_inverse_real(g, comp).square();
    }
    return acc;
}

} // namespace

DirectionSet DirectionSet::defaults(int d) {
    DirectionSet s;
    s.d = d;
    if (d == 2) {
        s.directions = {{1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, -1, 0}};
        s.points = {{0, 0.25, 0}, {0.75, 0, 0}, {0.5, 0.125, 0}, {0.125, 0.625, 0}};
    } else if (d == 3) {
        s.directions = {{1, 0, 0}, {0, 1, 0},  {0, 0, 1},  {1, 1, 0}, {0, 1, 1},
                        {1, 0, 1}, {1, -1, 0}, {0, 1, -1}, {1, 0, -1}};
        s.points = {{0, 0.25, 0.25},    {0.25, 0, 0.25},  {0.625, 0.625, 0},
                    {0, 0.125, 0.75},   {0.75, 0, 0.125}, {0, 0.875, 0.125},
                    {0, 0.375, 0.625},  {0.375, 0, 0.875}, {0, 0.625, 0.375}};
    } else {
        throw std::invalid_argument("direction set: d must be 2 or 3");
    }
    return s;
}

std::array<double, 3> DirectionSet::unit(int i) const {
    if (i < 0 || i >= size()) throw std::out_of_range("direction set: index out of range");
    const auto& k = directions[i];
    double len = std::sqrt(double(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]));
    return {k[0] / len, k[1] / len, k[2] / len};
}

void DirectionSet::validate() const {
    if (d != 2 && d != 3) throw std::invalid_argument("direction set: d must be 2 or 3");
    if (directions.size() != points.size())
        throw std::invalid_argument("direction set: directions and points differ in size");
    if (directions.empty()) throw std::invalid_argument("direction set: empty");

    for (int i = 0; i < size(); ++i) {
        const auto& k = directions[i];
        if (k[0] == 0 && k[1] == 0 && k[2] == 0)
            throw std::invalid_argument("direction set: zero direction");
        for (int a = d; a < 3; ++a) {
            if (k[a] != 0)
                throw std::invalid_argument("direction set: direction exceeds dimension");
            if (points[i][a] != 0)
                throw std::invalid_argument("direction set: point exceeds dimension");
        }
        for (int a = 0; a < d; ++a)
            if (!(points[i][a] >= 0 && points[i][a] < 1))
                throw std::invalid_argument("direction set: points must lie in [0,1)");
    }

    for (int i = 0; i < size(); ++i)
        for (int j = i + 1; j < size(); ++j) {
            if (directions[i] == directions[j])
                throw invariant_error("direction set: duplicate direction vector");
            auto ki = primitive(directions[i]);
            auto kj = primitive(directions[j]);
            bool parallel = (ki == kj) || (ki[0] == -kj[0] && ki[1] == -kj[1] && ki[2] == -kj[2]);
            if (!parallel) continue;
            std::array<double, 3> x = {kTwoPi * points[i][0], kTwoPi * points[i][1],
                                       kTwoPi * points[i][2]};
            if (line_distance(x, directions[j], points[j], d) <= 1e-9)
                throw invariant_error("direction set: parallel directions share a line");
        }
}

int DirectionSet::max_crossings() const {
    validate();
    int worst = 0;
    for (int i = 0; i < size(); ++i)
        for (int j = i + 1; j < size(); ++j) {
            auto ki = primitive(directions[i]);
            auto kj = primitive(directions[j]);
            bool parallel = (ki == kj) || (ki[0] == -kj[0] && ki[1] == -kj[1] && ki[2] == -kj[2]);
            if (parallel) continue; // validated disjoint

            if (d == 2) {
                int det = std::abs(ki[0] * kj[1] - ki[1] * kj[0]);
                worst = std::max(worst, det);
                continue;
            }

            // Scan one period of line i against line j, refine the local
            // minima, and count the distinct touch points.
            LineGeometry other(directions[j], points[j], 3);
            const int samples = 4096;
            auto dist_at = [&](double t) {
                std::array<double, 3> y = {wrap_unit(points[i][0] + t * ki[0]),
                                           wrap_unit(points[i][1] + t * ki[1]),
                                           wrap_unit(points[i][2] + t * ki[2])};
                return other.distance(y);
            };
            std::vector<double> dvals(samples);
            for (int s = 0; s < samples; ++s) dvals[s] = dist_at(double(s) / samples);
            std::vector<double> hits;
            for (int s = 0; s < samples; ++s) {
                double prev = dvals[(s + samples - 1) % samples];
                double next = dvals[(s + 1) % samples];
                if (dvals[s] > prev || dvals[s] > next || dvals[s] > 0.05) continue;
                double lo = (s - 1.0) / samples, hi = (s + 1.0) / samples;
                for (int it = 0; it < 200; ++it) {
                    double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
                    if (dist_at(m1) < dist_at(m2))
                        hi = m2;
                    else
                        lo = m1;
                }
                double t = 0.5 * (lo + hi);
                if (dist_at(t) > 1e-9) continue;
                bool dup = false;
                for (double h : hits) {
                    double dt = std::abs(wrap_unit(t) - wrap_unit(h));
                    if (std::min(dt, 1.0 - dt) < 1e-6) dup = true;
                }
                if (!dup) hits.push_back(t);
            }
            worst = std::max(worst, int(hits.size()));
        }
    return worst;
}

double ProfilePair::phi(double r) const {
    if (r <= 0.5 || r >= 1.0) return 0.0;
    double c = std::cos(kPi * (4 * r - 3) / 2);
    double c2 = c * c;
    return c2 * c2 * c2 * c2;
}

double ProfilePair::phi_prime(double r) const {
    if (r <= 0.5 || r >= 1.0) return 0.0;
    double th = kPi * (4 * r - 3) / 2;
    double c = std::cos(th), s = std::sin(th);
    double c3 = c * c * c;
    return -16 * kPi * s * c3 * c3 * c;
}

double ProfilePair::phi_second(double r) const {
    if (r <= 0.5 || r >= 1.0) return 0.0;
    double th = kPi * (4 * r - 3) / 2;
    double c = std::cos(th), s = std::sin(th);
    double c2 = c * c;
    double c6 = c2 * c2 * c2;
    return -32 * kPi * kPi * c6 * (c2 - 7 * s * s);
}

double ProfilePair::psi(double r, int d) const {
    if (r <= 0.5 || r >= 1.0) return 0.0;
    double out = phi_second(r);
    if (d == 3) out += phi_prime(r) / r;
    return out;
}

void MikadoFamily::validate() const {
    directions.validate();
    if (mu < 2) throw std::invalid_argument("mikado family: mu must be at least 2");
    if (sigma < 1) throw std::invalid_argument("mikado family: sigma must be at least 1");
}

int required_resolution(int mu, int sigma) {
    if (mu < 2 || sigma < 1)
        throw std::invalid_argument("required_resolution: mu >= 2 and sigma >= 1");
    long target = 8L * mu * sigma;
    int n = 4;
    while (n < target) n *= 2;
    return n;
}

double line_distance(const std::array<double, 3>& x, const std::array<int, 3>& k,
                     const std::array<double, 3>& p, int d) {
    LineGeometry geom(k, p, d);
    std::array<double, 3> y = {x[0] / kTwoPi, x[1] / kTwoPi, x[2] / kTwoPi};
    return geom.distance(y);
}

MikadoField mikado_field(const TorusGrid& g, const MikadoFamily& family, int index) {
    ScalarBuild sb = build_scalar(g, family, index);
    auto e = family.directions.unit(index);

    MikadoField f{TorusField::from_spectrum(g, sb.phi_spec),
                  TorusField(g, sb.psi),
                  TorusVectorField(g),
                  TorusTensorField(g),
                  e,
                  sb.c};

    for (int i = 0; i < g.d; ++i) f.w[i] = TorusField(g, e[i] * sb.psi);

    std::array<Eigen::ArrayXd, 3> grad;
    Eigen::ArrayXcd comp(g.size());
    for (int axis = 0; axis < g.d; ++axis) {
        for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
            comp[idx] = std::complex<double>(0, m[axis]) * sb.phi_spec[idx];
        });
        grad[axis] = dft_inverse_real(g, comp);
    }

    for (int i = 0; i < g.d; ++i)
        for (int j = i + 1; j < g.d; ++j) {
            Eigen::ArrayXd vals = e[i] * grad[j] - grad[i] * e[j];
            f.omega(j, i) = TorusField(g, -vals);
            f.omega(i, j) = TorusField(g, std::move(vals));
        }
    return f;
}

EulerResidual pressureless_euler_residual(const TorusGrid& g, const MikadoFamily& family,
                                          int index) {
    ScalarBuild sb = build_scalar(g, family, index);
    auto e = family.directions.unit(index);

    Eigen::ArrayXd q = sb.psi.square();
    double scale = family.mu * q.maxCoeff();
    Eigen::ArrayXcd qs = dft_forward(g, q);

    int band = 3 * family.mu;
    int safe = std::min(g.n - 2 * band - 1, g.n / 2 - 1);

    Eigen::ArrayXcd full(g.size()), masked(g.size());
    for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
        double me = m[0] * e[0] + m[1] * e[1] + m[2] * e[2];
        full[idx] = std::complex<double>(0, me) * qs[idx];
        int m_inf = std::max({std::abs(m[0]), std::abs(m[1]), std::abs(m[2])});
        masked[idx] = m_inf <= safe ? full[idx] : 0.0;
    });

    EulerResidual r;
    r.raw = dft_inverse_real(g, full).abs().maxCoeff() / scale;
    r.alias_free = dft_inverse_real(g, masked).abs().maxCoeff() / scale;
    return r;
}

ScalingReport scaling_report(const DirectionSet& dirs, const ProfilePair& profiles,
                             int index, const std::vector<int>& mu,
                             const std::vector<int>& orders,
                             const std::vector<double>& lebesgue_exponents,
                             const std::vector<double>& sobolev_orders, int sigma) {
    check_mu_list(mu);
    for (int m : orders)
        if (m != 0 && m != 1)
            throw std::invalid_argument("scaling report: derivative orders are 0 or 1");
    for (double p : lebesgue_exponents)
        if (!(p >= 1))
            throw std::invalid_argument("scaling report: integrability exponents are >= 1");
    for (double s : sobolev_orders)
        if (!(s > 0 && s < 2))
            throw std::invalid_argument("scaling report: smoothness orders lie in (0,2)");

    ScalingReport rep;
    rep.mu = mu;
    double dm1 = dirs.d - 1;

    // norms[mu][key] with keys laid out as (order, p) for w, then omega,
    // then (s, p) fractional.
    size_t nrows = orders.size() * lebesgue_exponents.size();
    size_t nfrac = sobolev_orders.size() * lebesgue_exponents.size();
    std::vector<std::vector<double>> w_norms(nrows), o_norms(nrows), f_norms(nfrac);

    for (int m : mu) {
        TorusGrid g{dirs.d, required_resolution(m, sigma)};
        MikadoFamily fam{dirs, profiles, m, sigma};
        ScalarBuild sb = build_scalar(g, fam, index);
        auto e = dirs.unit(index);
        rep.normalization.push_back(sb.c);

        Eigen::ArrayXcd psi_spec(g.size());
        for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& mm) {
            double m2 = double(mm[0]) * mm[0] + double(mm[1]) * mm[1] + double(mm[2]) * mm[2];
            psi_spec[idx] = -m2 * sb.phi_spec[idx];
        });

        // |omega| and |grad omega| reduce to the potential: with
        // G = grad phi and H its Hessian, |omega|^2 = 2(|G|^2 - (e.G)^2)
        // and |grad omega|^2 = 2(|H|^2 - |H e|^2).
        Eigen::ArrayXd omega_mag, grad_omega_mag;
        {
            Eigen::ArrayXd gsq = Eigen::ArrayXd::Zero(g.size());
            Eigen::ArrayXd ge = Eigen::ArrayXd::Zero(g.size());
            Eigen::ArrayXcd comp(g.size());
            for (int axis = 0; axis < g.d; ++axis) {
                for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& mm) {
                    comp[idx] = std::complex<double>(0, mm[axis]) * sb.phi_spec[idx];
                });
                Eigen::ArrayXd gi = dft_inverse_real(g, comp);
                gsq += gi.square();
                ge += e[axis] * gi;
            }
            omega_mag = (2.0 * (gsq - ge.square()).max(0.0)).sqrt();
        }
        {
            Eigen::ArrayXd hsq = Eigen::ArrayXd::Zero(g.size());
            std::array<Eigen::ArrayXd, 3> he;
            for (int i = 0; i < g.d; ++i) he[i] = Eigen::ArrayXd::Zero(g.size());
            Eigen::ArrayXcd comp(g.size());
            for (int i = 0; i < g.d; ++i)
                for (int j = i; j < g.d; ++j) {
                    for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& mm) {
                        comp[idx] = -double(mm[i]) * double(mm[j]) * sb.phi_spec[idx];
                    });
                    Eigen::ArrayXd hij = dft_inverse_real(g, comp);
                    hsq += (i == j ? 1.0 : 2.0) * hij.square();
                    he[i] += hij * e[j];
                    if (i != j) he[j] += hij * e[i];
                }
            Eigen::ArrayXd hesq = Eigen::ArrayXd::Zero(g.size());
            for (int i = 0; i < g.d; ++i) hesq += he[i].square();
            grad_omega_mag = (2.0 * (hsq - hesq).max(0.0)).sqrt();
        }

        Eigen::ArrayXd grad_psi_mag;
        size_t row = 0;
        for (int order : orders) {
            if (order == 1 && grad_psi_mag.size() == 0)
                grad_psi_mag = gradient_magnitude_sq(g, psi_spec).sqrt();
            for (double p : lebesgue_exponents) {
                const Eigen::ArrayXd& wv = order == 0 ? sb.psi : grad_psi_mag;
                const Eigen::ArrayXd& ov = order == 0 ? omega_mag : grad_omega_mag;
                w_norms[row].push_back(lp_mean(wv, p));
                o_norms[row].push_back(lp_mean(ov, p));
                ++row;
            }
        }

        size_t frow = 0;
        for (double s : sobolev_orders) {
            Eigen::ArrayXcd bessel(g.size());
            for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& mm) {
                double m2 = double(mm[0]) * mm[0] + double(mm[1]) * mm[1] + double(mm[2]) * mm[2];
                bessel[idx] = std::pow(1.0 + m2, 0.5 * s) * psi_spec[idx];
            });
            Eigen::ArrayXd bv = dft_inverse_real(g, bessel);
            for (double p : lebesgue_exponents) {
                f_norms[frow].push_back(lp_mean(bv, p));
                ++frow;
            }
        }
    }

    std::vector<double> logmu;
    for (int m : mu) logmu.push_back(std::log(double(m)));
    auto slope_of = [&](const std::vector<double>& vals) {
        std::vector<double> logv;
        for (double v : vals) logv.push_back(std::log(v));
        return fit_slope(logmu, logv);
    };

    size_t row = 0;
    for (int order : orders)
        for (double p : lebesgue_exponents) {
            ScalingRow r;
            r.order = order;
            r.p = p;
            r.predicted_w = order + 0.5 * dm1 - (std::isinf(p) ? 0.0 : dm1 / p);
            r.predicted_omega = r.predicted_w - 1.0;
            r.slope_w = slope_of(w_norms[row]);
            r.slope_omega = slope_of(o_norms[row]);
            rep.rows.push_back(r);
            ++row;
        }

    size_t frow = 0;
    for (double s : sobolev_orders)
        for (double p : lebesgue_exponents) {
            FractionalRow r;
            r.s = s;
            r.p = p;
            r.predicted = s + 0.5 * dm1 - (std::isinf(p) ? 0.0 : dm1 / p);
            r.slope = slope_of(f_norms[frow]);
            rep.fractional.push_back(r);
            ++frow;
        }

    return rep;
}

double cross_interaction_norm(const TorusGrid& g, const MikadoFamily& family, int i,
                              int j, double p) {
    if (i < 0 || i >= family.directions.size() || j < 0 || j >= family.directions.size())
        throw std::out_of_range("cross interaction: index out of range");
    if (i == j || family.directions.directions[i] == family.directions.directions[j])
        throw std::invalid_argument(
            "cross interaction: requires two distinct directions");
    ScalarBuild a = build_scalar(g, family, i);
    ScalarBuild b = build_scalar(g, family, j);
    return lp_mean(a.psi * b.psi, p);
}

CrossInteractionReport cross_interaction_report(const DirectionSet& dirs,
                                                const ProfilePair& profiles, int i, int j,
                                                const std::vector<int>& mu, double p,
                                                int sigma) {
    check_mu_list(mu);
    CrossInteractionReport rep;
    rep.mu = mu;
    rep.p = p;
    rep.predicted = dirs.d - 1 - (std::isinf(p) ? 0.0 : dirs.d / p);
    for (int m : mu) {
        TorusGrid g{dirs.d, required_resolution(m, sigma)};
        rep.value.push_back(cross_interaction_norm(g, {dirs, profiles, m, sigma}, i, j, p));
    }
    std::vector<double> logmu, logv;
    for (int m : mu) logmu.push_back(std::log(double(m)));
    for (double v : rep.value) logv.push_back(std::log(v));
    rep.slope = fit_slope(logmu, logv);
    return rep;
}

} // namespace fnsr
