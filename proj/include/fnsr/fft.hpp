#pragma once

#include <Eigen/Core>
#include <complex>

#include <fnsr/grid.hpp>

namespace fnsr {

// Coefficients follow the synthesis convention
//   u(x_j) = sum_m c(m) exp(i m . x_j),
// so the forward transform carries the 1/N normalization. Bins are laid out
// in FFTW order (index i holds signed frequency signed_freq(i, n) per axis).
Eigen::ArrayXcd dft_forward(const TorusGrid& g, const Eigen::ArrayXd& values);
Eigen::ArrayXcd dft_forward_complex(const TorusGrid& g, const Eigen::ArrayXcd& values);

// Unnormalized synthesis of the coefficient array back to grid samples.
Eigen::ArrayXcd dft_inverse(const TorusGrid& g, const Eigen::ArrayXcd& coef);

// Synthesis followed by taking the real part; valid for Hermitian spectra.
Eigen::ArrayXd dft_inverse_real(const TorusGrid& g, const Eigen::ArrayXcd& coef);

} // namespace fnsr
