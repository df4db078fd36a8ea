#include <fnsr/fft.hpp>

#include <fftw3.h>

#include <map>
#include <mutex>

namespace fnsr {
namespace {

// Plans are cached per (d, n, sign) and executed on caller buffers via the
// new-array interface. FFTW_UNALIGNED keeps the plans valid for arbitrary
// caller alignment; plan creation is serialized because the FFTW planner is
// not thread safe.
class PlanCache {
public:
    fftw_plan get(const TorusGrid& g, int sign) {
        std::lock_guard<std::mutex> lk(mu_);
        auto key = std::tuple(g.d, g.n, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;

        std::vector<int> dims(g.d, g.n);
        Eigen::ArrayXcd in(g.size()), out(g.size());
        fftw_plan p = fftw_plan_dft(
            g.d, dims.data(), reinterpret_cast<fftw_complex*>(in.data()),
            reinterpret_cast<fftw_complex*>(out.data()), sign,
            FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, p);
        return p;
    }

private:
    std::mutex mu_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

Eigen::ArrayXcd run(const TorusGrid& g, const Eigen::ArrayXcd& in, int sign) {
    Eigen::ArrayXcd tmp = in;
    Eigen::ArrayXcd out(g.size());
    fftw_execute_dft(cache().get(g, sign),
                     reinterpret_cast<fftw_complex*>(tmp.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

} // namespace

Eigen::ArrayXcd dft_forward_complex(const TorusGrid& g, const Eigen::ArrayXcd& values) {
    return run(g, values, FFTW_FORWARD) / double(g.size());
}

Eigen::ArrayXcd dft_forward(const TorusGrid& g, const Eigen::ArrayXd& values) {
    return dft_forward_complex(g, values.cast<std::complex<double>>());
}

Eigen::ArrayXcd dft_inverse(const TorusGrid& g, const Eigen::ArrayXcd& coef) {
    return run(g, coef, FFTW_BACKWARD);
}

Eigen::ArrayXd dft_inverse_real(const TorusGrid& g, const Eigen::ArrayXcd& coef) {
    return dft_inverse(g, coef).real();
}

} // namespace fnsr
