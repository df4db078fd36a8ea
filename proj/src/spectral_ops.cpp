#include <fnsr/spectral_ops.hpp>

#include <cmath>
#include <stdexcept>

namespace fnsr {
namespace {

using cplx = std::complex<double>;

// Applies a real, even-in-m multiplier to the spectrum.
template <class Mult>
TorusField apply_even_multiplier(const TorusField& u, Mult mult) {
    Eigen::ArrayXcd coef = u.spectrum();
    for_each_mode(u.grid(), [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
        coef[idx] *= mult(m);
    });
    return TorusField::from_spectrum(u.grid(), coef);
}

double mode_sq(const std::array<int, 3>& m) {
    return double(m[0]) * m[0] + double(m[1]) * m[1] + double(m[2]) * m[2];
}

} // namespace

TorusField frac_laplacian(const TorusField& u, double theta) {
    if (theta < 0) throw std::invalid_argument("frac_laplacian: theta must be >= 0");
    if (theta == 0.0) return u;
    return apply_even_multiplier(u, [theta](const std::array<int, 3>& m) {
        double s = mode_sq(m);
        return s == 0.0 ? 0.0 : std::pow(s, theta);
    });
}

TorusVectorField frac_laplacian(const TorusVectorField& u, double theta) {
    TorusVectorField out(u.grid());
    for (int i = 0; i < u.grid().d; ++i) out[i] = frac_laplacian(u[i], theta);
    return out;
}

TorusField inv_laplacian(const TorusField& f) {
    return apply_even_multiplier(f, [](const std::array<int, 3>& m) {
        double s = mode_sq(m);
        return s == 0.0 ? 0.0 : -1.0 / s;
    });
}

TorusField partial_derivative(const TorusField& u, int axis) {
    if (axis < 0 || axis >= u.grid().d)
        throw std::invalid_argument("partial_derivative: axis out of range");
    const int nyq = -u.grid().n / 2;
    Eigen::ArrayXcd coef = u.spectrum();
    for_each_mode(u.grid(), [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
        coef[idx] *= (m[axis] == nyq) ? cplx(0, 0) : cplx(0, m[axis]);
    });
    return TorusField::from_spectrum(u.grid(), coef);
}

TorusVectorField gradient(const TorusField& u) {
    TorusVectorField out(u.grid());
    for (int i = 0; i < u.grid().d; ++i) out[i] = partial_derivative(u, i);
    return out;
}

TorusField divergence(const TorusVectorField& v) {
    const TorusGrid& g = v.grid();
    const int nyq = -g.n / 2;
    Eigen::ArrayXcd coef = Eigen::ArrayXcd::Zero(g.size());
    for (int a = 0; a < g.d; ++a) {
        const Eigen::ArrayXcd& s = v[a].spectrum();
        for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
            if (m[a] != nyq) coef[idx] += cplx(0, m[a]) * s[idx];
        });
    }
    return TorusField::from_spectrum(g, coef);
}

TorusVectorField divergence(const TorusTensorField& t) {
    TorusVectorField out(t.grid());
    for (int i = 0; i < t.grid().d; ++i) {
        TorusVectorField row(t.grid());
        for (int j = 0; j < t.grid().d; ++j) row[j] = t(i, j);
        out[i] = divergence(row);
    }
    return out;
}

TorusVectorField leray_project(const TorusVectorField& v) {
    const TorusGrid& g = v.grid();
    std::vector<Eigen::ArrayXcd> coef(g.d);
    for (int a = 0; a < g.d; ++a) coef[a] = v[a].spectrum();
    for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
        double s = mode_sq(m);
        if (s == 0.0) return;
        cplx dot(0, 0);
        for (int a = 0; a < g.d; ++a) dot += double(m[a]) * coef[a][idx];
        dot /= s;
        for (int a = 0; a < g.d; ++a) coef[a][idx] -= double(m[a]) * dot;
    });
    TorusVectorField out(g);
    for (int a = 0; a < g.d; ++a) out[a] = TorusField::from_spectrum(g, coef[a]);
    return out;
}

TorusField truncate_to_band(const TorusField& u, int band) {
    if (band < 0) throw std::invalid_argument("truncate_to_band: band must be >= 0");
    Eigen::ArrayXcd coef = u.spectrum();
    for_each_mode(u.grid(), [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
        for (int a = 0; a < u.grid().d; ++a)
            if (std::abs(m[a]) > band) {
                coef[idx] = 0.0;
                return;
            }
    });
    return TorusField::from_spectrum(u.grid(), coef);
}

TorusField dilate(const TorusField& u, int sigma) {
    if (sigma < 1) throw std::invalid_argument("dilate: sigma must be >= 1");
    const TorusGrid& g = u.grid();
    const Eigen::ArrayXcd& src = u.spectrum();
    Eigen::ArrayXcd coef = Eigen::ArrayXcd::Zero(g.size());
    const int lim = g.n / 2;
    // Transform round-off leaves dust on inactive modes; ignore it.
    const double floor = 1e-13 * src.abs().maxCoeff();
    bool lost = false;
    for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
        if (std::abs(src[idx]) <= floor) return;
        std::array<int, 3> sm{sigma * m[0], sigma * m[1], sigma * m[2]};
        std::ptrdiff_t tgt = 0;
        for (int a = 0; a < g.d; ++a) {
            if (sm[a] < -lim || sm[a] >= lim) {
                lost = true;
                return;
            }
            int bin = sm[a] >= 0 ? sm[a] : sm[a] + g.n;
            tgt = tgt * g.n + bin;
        }
        coef[tgt] = src[idx];
    });
    if (lost)
        throw std::domain_error("dilate: dilated mode leaves the resolved range; "
                                "refine the grid or reduce sigma");
    return TorusField::from_spectrum(g, coef);
}

double lebesgue_norm(const TorusField& u, double p) {
    if (p < 1.0) throw std::invalid_argument("lebesgue_norm: p must be >= 1");
    return std::pow(u.values().abs().pow(p).mean(), 1.0 / p);
}

double lebesgue_norm_inf(const TorusField& u) { return u.values().abs().maxCoeff(); }

double lebesgue_norm(const TorusVectorField& u, double p) {
    return lebesgue_norm(magnitude(u), p);
}

double lebesgue_norm_inf(const TorusVectorField& u) {
    return lebesgue_norm_inf(magnitude(u));
}

double lebesgue_norm(const TorusTensorField& t, double p) {
    return lebesgue_norm(frobenius_magnitude(t), p);
}

double lebesgue_norm_inf(const TorusTensorField& t) {
    return lebesgue_norm_inf(frobenius_magnitude(t));
}

double sobolev_norm(const TorusField& u, double gamma, double q) {
    if (gamma == 0.0) return lebesgue_norm(u, q);
    Eigen::ArrayXcd coef = u.spectrum();
    for_each_mode(u.grid(), [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
        coef[idx] *= std::pow(1.0 + mode_sq(m), gamma / 2.0);
    });
    return lebesgue_norm(TorusField::from_spectrum(u.grid(), coef), q);
}

double sobolev_norm(const TorusVectorField& u, double gamma, double q) {
    TorusVectorField b(u.grid());
    for (int i = 0; i < u.grid().d; ++i) {
        Eigen::ArrayXcd coef = u[i].spectrum();
        for_each_mode(u.grid(), [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
            coef[idx] *= std::pow(1.0 + mode_sq(m), gamma / 2.0);
        });
        b[i] = TorusField::from_spectrum(u.grid(), coef);
    }
    return lebesgue_norm(b, q);
}

TorusField frobenius_magnitude(const TorusTensorField& t) {
    const TorusGrid& g = t.grid();
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(g.size());
    for (int i = 0; i < g.d; ++i)
        for (int j = 0; j < g.d; ++j) acc += t(i, j).values().square();
    return TorusField(g, acc.sqrt());
}

TorusField magnitude(const TorusVectorField& v) {
    const TorusGrid& g = v.grid();
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(g.size());
    for (int i = 0; i < g.d; ++i) acc += v[i].values().square();
    return TorusField(g, acc.sqrt());
}

double evaluate_at(const TorusField& u, const std::array<double, 3>& x) {
    const Eigen::ArrayXcd& coef = u.spectrum();
    cplx acc(0, 0);
    for_each_mode(u.grid(), [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
        if (std::abs(coef[idx]) == 0.0) return;
        double phase = 0;
        for (int a = 0; a < u.grid().d; ++a) phase += m[a] * x[a];
        acc += coef[idx] * std::polar(1.0, phase);
    });
    return acc.real();
}

} // namespace fnsr
