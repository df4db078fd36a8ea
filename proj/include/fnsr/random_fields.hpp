#pragma once

#include <random>

#include <fnsr/field.hpp>
#include <fnsr/spectral_ops.hpp>

namespace fnsr {

// Band-limited random fields with a fixed seed, used by tests and the CLI
// verification corpus. Coefficients are drawn i.i.d. uniform in [-1,1] for
// every mode with max_i |m_i| <= band, then symmetrized to keep values real.
inline TorusField random_scalar_field(const TorusGrid& g, int band, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::ArrayXcd coef = Eigen::ArrayXcd::Zero(g.size());
    for_each_mode(g, [&](std::ptrdiff_t idx, const std::array<int, 3>& m) {
        int mx = 0;
        for (int a = 0; a < g.d; ++a) mx = std::max(mx, std::abs(m[a]));
        if (mx > band) return;
        coef[idx] = std::complex<double>(unif(rng), unif(rng));
    });
    // Realize by synthesizing and discarding the imaginary part: equivalent
    // to Hermitian symmetrization of the coefficients.
    Eigen::ArrayXd vals = dft_inverse(g, coef).real();
    return TorusField(g, std::move(vals));
}

inline TorusVectorField random_vector_field(const TorusGrid& g, int band, std::uint64_t seed) {
    TorusVectorField v(g);
    for (int i = 0; i < g.d; ++i) v[i] = random_scalar_field(g, band, seed * 131 + i);
    return v;
}

inline TorusVectorField random_solenoidal_field(const TorusGrid& g, int band,
                                                std::uint64_t seed) {
    return leray_project(random_vector_field(g, band, seed));
}

// Random symmetric tensor field.
inline TorusTensorField random_symmetric_tensor_field(const TorusGrid& g, int band,
                                                      std::uint64_t seed) {
    TorusTensorField t(g);
    std::uint64_t k = 0;
    for (int i = 0; i < g.d; ++i)
        for (int j = i; j < g.d; ++j) {
            auto f = random_scalar_field(g, band, seed * 977 + k++);
            t(i, j) = f;
            t(j, i) = f;
        }
    return t;
}

} // namespace fnsr
