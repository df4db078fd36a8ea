#pragma once

#include <array>
#include <cstddef>
#include <numbers>
#include <stdexcept>

namespace fnsr {

// Uniform periodic grid on [0, 2pi)^d, row-major with axis 0 slowest.
// n must be a power of two so dyadic frequency rescalings stay on-grid.
struct TorusGrid {
    int d = 2;
    int n = 0;

    TorusGrid(int d_, int n_) : d(d_), n(n_) {
        if (d < 2 || d > 3) throw std::invalid_argument("TorusGrid: d must be 2 or 3");
        if (n < 4 || (n & (n - 1)) != 0)
            throw std::invalid_argument("TorusGrid: n must be a power of two, n >= 4");
    }

    std::ptrdiff_t size() const {
        std::ptrdiff_t s = 1;
        for (int i = 0; i < d; ++i) s *= n;
        return s;
    }

    double spacing() const { return 2.0 * std::numbers::pi / n; }

    bool operator==(const TorusGrid&) const = default;
};

// Signed frequency for storage index i on one axis: 0..n/2-1, then -n/2..-1.
inline int signed_freq(int i, int n) { return i < n / 2 ? i : i - n; }

// Visits every grid point as f(flat_index, coordinates). Unused coordinate
// slots (axis >= d) are zero.
template <class F>
void for_each_point(const TorusGrid& g, F&& f) {
    const double h = g.spacing();
    std::array<double, 3> x{0.0, 0.0, 0.0};
    if (g.d == 2) {
        std::ptrdiff_t idx = 0;
        for (int i0 = 0; i0 < g.n; ++i0) {
            x[0] = h * i0;
            for (int i1 = 0; i1 < g.n; ++i1, ++idx) {
                x[1] = h * i1;
                f(idx, x);
            }
        }
    } else {
        std::ptrdiff_t idx = 0;
        for (int i0 = 0; i0 < g.n; ++i0) {
            x[0] = h * i0;
            for (int i1 = 0; i1 < g.n; ++i1) {
                x[1] = h * i1;
                for (int i2 = 0; i2 < g.n; ++i2, ++idx) {
                    x[2] = h * i2;
                    f(idx, x);
                }
            }
        }
    }
}

// Visits every spectral bin as f(flat_index, signed mode vector). Unused
// slots (axis >= d) are zero.
template <class F>
void for_each_mode(const TorusGrid& g, F&& f) {
    std::array<int, 3> m{0, 0, 0};
    if (g.d == 2) {
        std::ptrdiff_t idx = 0;
        for (int i0 = 0; i0 < g.n; ++i0) {
            m[0] = signed_freq(i0, g.n);
            for (int i1 = 0; i1 < g.n; ++i1, ++idx) {
                m[1] = signed_freq(i1, g.n);
                f(idx, m);
            }
        }
    } else {
        std::ptrdiff_t idx = 0;
        for (int i0 = 0; i0 < g.n; ++i0) {
            m[0] = signed_freq(i0, g.n);
            for (int i1 = 0; i1 < g.n; ++i1) {
                m[1] = signed_freq(i1, g.n);
                for (int i2 = 0; i2 < g.n; ++i2, ++idx) {
                    m[2] = signed_freq(i2, g.n);
                    f(idx, m);
                }
            }
        }
    }
}

} // namespace fnsr
