#include <fnsr/antidiv.hpp>

#include <fnsr/errors.hpp>
#include <fnsr/spectral_ops.hpp>

#include <cmath>

namespace fnsr {
namespace {

using cplx = std::complex<double>;

bool is_nyquist(const std::array<int, 3>& m, int d, int n) {
    for (int a = 0; a < d; ++a)
        if (m[a] == -n / 2) return true;
    return false;
}

} // namespace

TorusTensorField antidiv(const TorusVectorField& v) {
    const TorusGrid& g = v.grid();
    const int d = g.d;
    // First kernel coefficient is -(d-2)/(d-1): the sign that makes the
    // operator trace-free and a right inverse of div simultaneously.
    const double a = -double(d - 2) / (d - 1);
    const double b = -1.0 / (d - 1);

    std::vector<const Eigen::ArrayXcd*> vs(d);
    for (int i = 0; i < d; ++i) vs[i] = &v[i].spectrum();

    std::vector<Eigen::ArrayXcd> out(std::size_t(d) * d);
    for (auto& c : out) c = Eigen::ArrayXcd::Zero(g.size());

    for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
        double s = double(m[0]) * m[0] + double(m[1]) * m[1] + double(m[2]) * m[2];
        if (s == 0.0 || is_nyquist(m, d, g.n)) return;
        cplx mdotv(0, 0);
        for (int k = 0; k < d; ++k) mdotv += double(m[k]) * (*vs[k])[idx];
        // (Rv)_ij = (i/s) [ -a m_i m_j (m.v)/s - b delta_ij (m.v)
        //                   - m_i v_j - m_j v_i ]
        const cplx i_over_s(0, 1.0 / s);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                cplx val = -a * m[i] * m[j] * mdotv / s - (*vs[j])[idx] * double(m[i]) -
                           (*vs[i])[idx] * double(m[j]);
                if (i == j) val -= b * mdotv;
                out[std::size_t(i) * d + j][idx] = i_over_s * val;
            }
    });

    TorusTensorField R(g);
    for (int i = 0; i < d; ++i) {
        R(i, i) = TorusField::from_spectrum(g, out[std::size_t(i) * d + i]);
        for (int j = i + 1; j < d; ++j) {
            auto f = TorusField::from_spectrum(g, out[std::size_t(i) * d + j]);
            R(i, j) = f;
            R(j, i) = f;
        }
    }
    return R;
}

TorusTensorField antidiv_of_laplacian(const TorusVectorField& v) {
    double dv = lebesgue_norm_inf(divergence(v));
    double scale = 0;
    for (int i = 0; i < v.grid().d; ++i)
        scale = std::max(scale, lebesgue_norm_inf(gradient(v[i])));
    if (dv > 1e-8 * std::max(1.0, scale))
        throw invariant_error("antidiv_of_laplacian: input is not solenoidal "
                              "(relative divergence " +
                              std::to_string(dv / std::max(1.0, scale)) + ")");
    // Laplace v = -frac_laplacian(v, 1)
    TorusVectorField lap(v.grid());
    auto fl = frac_laplacian(v, 1.0);
    for (int i = 0; i < v.grid().d; ++i) lap[i] = -fl[i];
    return antidiv(lap);
}

TorusTensorField bilinear_antidiv(const TorusVectorField& v, const TorusTensorField& A) {
    const TorusGrid& g = v.grid();
    const int d = g.d;
    double amax = lebesgue_norm_inf(A);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (std::abs(A(i, j).mean()) > 1e-10 * std::max(1.0, amax))
                throw invariant_error("bilinear_antidiv: A must be mean-free");

    // T[l] = antidiv applied to row l of A.
    std::vector<TorusTensorField> T;
    T.reserve(d);
    for (int l = 0; l < d; ++l) {
        TorusVectorField row(g);
        for (int k = 0; k < d; ++k) row[k] = A(l, k);
        T.push_back(antidiv(row));
    }

    // B1_ij = sum_l v_l T_lij, M_i = sum_{j,l} (d_j v_l) T_lij.
    TorusTensorField B1(g);
    TorusVectorField M(g);
    std::vector<TorusVectorField> gradv;
    gradv.reserve(d);
    for (int l = 0; l < d; ++l) gradv.push_back(gradient(v[l]));

    for (int i = 0; i < d; ++i) {
        Eigen::ArrayXd mi = Eigen::ArrayXd::Zero(g.size());
        for (int j = 0; j < d; ++j) {
            Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(g.size());
            for (int l = 0; l < d; ++l) {
                acc += v[l].values() * T[l](i, j).values();
                mi += gradv[l][j].values() * T[l](i, j).values();
            }
            B1(i, j) = TorusField(g, std::move(acc));
        }
        M[i] = TorusField(g, std::move(mi));
    }

    TorusTensorField RM = antidiv(M);
    TorusTensorField B(g);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            B(i, j) = TorusField(g, B1(i, j).values() - RM(i, j).values());
    return B;
}

double c1_norm(const TorusVectorField& v) {
    double m = lebesgue_norm_inf(v);
    const TorusGrid& g = v.grid();
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(g.size());
    for (int l = 0; l < g.d; ++l) {
        auto gl = gradient(v[l]);
        for (int j = 0; j < g.d; ++j) acc += gl[j].values().square();
    }
    return m + acc.sqrt().maxCoeff();
}

} // namespace fnsr
