#include <fnsr/decomposition.hpp>

#include <fnsr/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fnsr {
namespace {

// Symmetric d x d matrices in packed (i <= j) coordinates. Off-diagonal
// coordinates carry weight 2 in the Frobenius pairing.
struct SymCoords {
    int d = 2;
    int m = 3;
    std::array<std::array<int, 2>, 6> ij{};
    std::array<double, 6> w{};

    explicit SymCoords(int dim) : d(dim), m(dim * (dim + 1) / 2) {
        int a = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                ij[a] = {i, j};
                w[a] = i == j ? 1.0 : 2.0;
                ++a;
            }
    }

    void pack(const Eigen::MatrixXd& s, double* out) const {
        for (int a = 0; a < m; ++a) out[a] = s(ij[a][0], ij[a][1]);
    }

    Eigen::MatrixXd unpack(const double* in) const {
        Eigen::MatrixXd s(d, d);
        for (int a = 0; a < m; ++a) s(ij[a][0], ij[a][1]) = s(ij[a][1], ij[a][0]) = in[a];
        return s;
    }
};

struct Frame {
    SymCoords sc;
    int K = 0;
    std::vector<std::array<double, 6>> p; // packed entries of e_k (x) e_k
    std::vector<double> anchor;
    std::vector<std::array<double, 3>> units;
    std::vector<std::array<int, 3>> directions;

    explicit Frame(const DirectionSet& lambda) : sc(lambda.d) {
        lambda.validate();
        K = lambda.size();
        for (int k = 0; k < K; ++k) {
            units.push_back(lambda.unit(k));
            const auto& dir = lambda.directions[k];
            directions.push_back(dir);
            // e_i e_j as the exact rational k_i k_j / |k|^2; dyadic for the
            // default frames, so the anchor residual at Id vanishes bitwise.
            double nsq = double(dir[0]) * dir[0] + double(dir[1]) * dir[1] +
                         double(dir[2]) * dir[2];
            std::array<double, 6> pk{};
            for (int a = 0; a < sc.m; ++a)
                pk[a] = double(dir[sc.ij[a][0]]) * dir[sc.ij[a][1]] / nsq;
            p.push_back(pk);
        }
        anchor = anchor_for(lambda);
    }

    std::vector<double> anchor_for(const DirectionSet& lambda) const {
        for (int d : {2, 3}) {
            auto def = DirectionSet::defaults(d);
            if (lambda.d == d && lambda.directions == def.directions) {
                std::vector<double> a(K, 0.5);
                if (d == 3)
                    for (int k = 3; k < K; ++k) a[k] = 0.25;
                return a;
            }
        }
        // General frame: minimum-norm weights expressing the identity.
        Eigen::MatrixXd M(sc.m, K);
        Eigen::VectorXd idv(sc.m);
        for (int a = 0; a < sc.m; ++a) {
            idv[a] = sc.ij[a][0] == sc.ij[a][1] ? 1.0 : 0.0;
            for (int k = 0; k < K; ++k) M(a, k) = p[k][a];
        }
        Eigen::VectorXd c = M.completeOrthogonalDecomposition().solve(idv);
        if ((M * c - idv).cwiseAbs().maxCoeff() > 1e-12)
            throw invariant_error("decomposition: frame cannot express the identity");
        std::vector<double> a(K);
        for (int k = 0; k < K; ++k) {
            if (!(c[k] > 0))
                throw invariant_error(
                    "decomposition: frame anchor is not strictly positive");
            a[k] = c[k];
        }
        return a;
    }
};

enum class SolveStatus { converged, singular, stalled };

struct DualSolve {
    std::vector<double> c;
    Eigen::VectorXd g;
    int iterations = 0;
    SolveStatus status = SolveStatus::converged;
};

// Damped Newton on F(G) = sum_k anchor_k exp(<P_k, G>) P_k - target.
DualSolve solve_dual(const Frame& fr, const double* target, const Eigen::VectorXd& g0) {
    const int m = fr.sc.m, K = fr.K;
    DualSolve out;
    out.g = g0;
    out.c.assign(K, 0.0);

    auto coeffs = [&](const Eigen::VectorXd& g, std::vector<double>& c) {
        for (int k = 0; k < K; ++k) {
            double s = 0;
            for (int a = 0; a < m; ++a) s += fr.sc.w[a] * fr.p[k][a] * g[a];
            c[k] = fr.anchor[k] * std::exp(s);
        }
    };
    auto residual = [&](const std::vector<double>& c, Eigen::VectorXd& f) {
        for (int a = 0; a < m; ++a) {
            double s = 0;
            for (int k = 0; k < K; ++k) s += c[k] * fr.p[k][a];
            f[a] = s - target[a];
        }
        return f.cwiseAbs().maxCoeff();
    };

    double scale = 1.0;
    for (int a = 0; a < m; ++a) scale = std::max(scale, std::abs(target[a]));
    const double tol = 1e-13 * scale;

    Eigen::VectorXd f(m), fnew(m);
    std::vector<double> cnew(K);
    coeffs(out.g, out.c);
    double res = residual(out.c, f);

    for (int iter = 0; iter < 100; ++iter) {
        if (res <= tol) {
            out.iterations = iter;
            return out;
        }
        Eigen::MatrixXd J(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                double s = 0;
                for (int k = 0; k < K; ++k) s += out.c[k] * fr.p[k][a] * fr.p[k][b];
                J(a, b) = fr.sc.w[b] * s;
            }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible()) {
            out.status = SolveStatus::singular;
            return out;
        }
        Eigen::VectorXd step = lu.solve(-f);

        double t = 1.0;
        bool accepted = false;
        while (t > 1e-10) {
            Eigen::VectorXd gtry = out.g + t * step;
            coeffs(gtry, cnew);
            double rnew = residual(cnew, fnew);
            if (rnew < (1.0 - 0.25 * t) * res) {
                out.g = gtry;
                out.c = cnew;
                f = fnew;
                res = rnew;
                accepted = true;
                break;
            }
            t /= 2;
        }
        if (!accepted) {
            out.status = SolveStatus::stalled;
            return out;
        }
    }
    out.status = SolveStatus::stalled;
    return out;
}

int smallest_coefficient(const std::vector<double>& c) {
    return int(std::min_element(c.begin(), c.end()) - c.begin());
}

[[noreturn]] void throw_frame_error(const Frame& fr, const DualSolve& ds) {
    if (ds.status == SolveStatus::singular)
        throw invariant_error(
            "decomposition: frame does not span the symmetric matrices");
    int k = smallest_coefficient(ds.c);
    std::ostringstream msg;
    msg << "decomposition: frame inadequate near direction (" << fr.directions[k][0]
        << ", " << fr.directions[k][1] << ", " << fr.directions[k][2]
        << "); smallest coefficient " << ds.c[k];
    throw invariant_error(msg.str());
}

void check_ball(const Eigen::MatrixXd& s, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s - Eigen::MatrixXd::Identity(s.rows(), s.cols()));
    double dist = es.eigenvalues().cwiseAbs().maxCoeff();
    if (dist > 0.5 + 1e-9) {
        std::ostringstream msg;
        msg << what << ": operator distance to the identity is " << dist
            << ", outside the half ball";
        throw std::domain_error(msg.str());
    }
}

GammaCoefficients finish(const Frame& fr, const DualSolve& ds) {
    if (ds.status != SolveStatus::converged) throw_frame_error(fr, ds);
    int k = smallest_coefficient(ds.c);
    if (!(ds.c[k] > 1e-12)) throw_frame_error(fr, ds);

    GammaCoefficients gc;
    gc.c = ds.c;
    gc.anchor = fr.anchor;
    gc.dual = fr.sc.unpack(ds.g.data());
    gc.iterations = ds.iterations;
    gc.d = fr.sc.d;
    gc.units = fr.units;
    gc.directions = fr.directions;
    return gc;
}

} // namespace

Eigen::MatrixXd GammaCoefficients::reconstruct() const {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(d, d);
    for (size_t k = 0; k < c.size(); ++k) {
        const auto& dir = directions[k];
        double nsq = double(dir[0]) * dir[0] + double(dir[1]) * dir[1] +
                     double(dir[2]) * dir[2];
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                r(i, j) += c[k] * (double(dir[i]) * dir[j] / nsq);
    }
    return r;
}

GammaCoefficients decompose(const Eigen::MatrixXd& R, const DirectionSet& lambda) {
    Frame fr(lambda);
    if (R.rows() != lambda.d || R.cols() != lambda.d)
        throw std::invalid_argument("decompose: matrix size does not match the frame");
    double scale = 1.0 + R.cwiseAbs().maxCoeff();
    if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw std::invalid_argument("decompose: matrix is not symmetric");
    check_ball(R, "decompose");

    double target[6];
    fr.sc.pack(R, target);
    DualSolve ds = solve_dual(fr, target, Eigen::VectorXd::Zero(fr.sc.m));
    return finish(fr, ds);
}

double gamma(const Eigen::MatrixXd& R, const DirectionSet& lambda, int k) {
    if (k < 0 || k >= lambda.size())
        throw std::out_of_range("gamma: direction index out of range");
    return std::sqrt(decompose(R, lambda).c[k]);
}

std::vector<TorusField> pointwise_decompose_field(const TorusTensorField& rbar,
                                                  const TorusField& rho,
                                                  const DirectionSet& lambda) {
    const TorusGrid& g = rbar.grid();
    if (rho.grid().d != g.d || rho.grid().n != g.n)
        throw std::invalid_argument("pointwise decomposition: grid mismatch");
    if (g.d != lambda.d)
        throw std::invalid_argument("pointwise decomposition: dimension mismatch");
    Frame fr(lambda);
    const int m = fr.sc.m;

    std::vector<Eigen::ArrayXd> out(fr.K, Eigen::ArrayXd::Zero(g.size()));
    Eigen::MatrixXd s(g.d, g.d);
    double target[6];
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(m);

    for (std::ptrdiff_t idx = 0; idx < g.size(); ++idx) {
        double r = rho.values()[idx];
        if (!(r >= 2.0 - 1e-12)) {
            std::ostringstream msg;
            msg << "pointwise decomposition: rho = " << r << " below 2 at grid point "
                << idx;
            throw std::domain_error(msg.str());
        }
        for (int i = 0; i < g.d; ++i)
            for (int j = 0; j < g.d; ++j)
                s(i, j) = (i == j ? 1.0 : 0.0) - rbar(i, j).values()[idx] / r;

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            s - Eigen::MatrixXd::Identity(g.d, g.d));
        if (es.eigenvalues().cwiseAbs().maxCoeff() > 0.5 + 1e-9) {
            std::ostringstream msg;
            msg << "pointwise decomposition: argument outside the half ball at grid point "
                << idx;
            throw std::domain_error(msg.str());
        }

        fr.sc.pack(s, target);
        DualSolve ds = solve_dual(fr, target, warm);
        if (ds.status != SolveStatus::converged)
            ds = solve_dual(fr, target, Eigen::VectorXd::Zero(m));
        GammaCoefficients gc = finish(fr, ds);
        warm = ds.g;
        for (int k = 0; k < fr.K; ++k) out[k][idx] = std::sqrt(gc.c[k]);
    }

    std::vector<TorusField> fields;
    fields.reserve(fr.K);
    for (int k = 0; k < fr.K; ++k) fields.emplace_back(g, std::move(out[k]));
    return fields;
}

} // namespace fnsr
