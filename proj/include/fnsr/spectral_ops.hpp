#pragma once

#include <fnsr/field.hpp>

namespace fnsr {

// (-Laplace)^theta, theta >= 0. theta = 0 returns the input unchanged. The
// zero mode is annihilated for theta > 0.
TorusField frac_laplacian(const TorusField& u, double theta);
TorusVectorField frac_laplacian(const TorusVectorField& u, double theta);

// Zero-mean inverse of the Laplacian: Laplace(inv_laplacian(f)) = f - mean(f).
TorusField inv_laplacian(const TorusField& f);

// Partial derivative along one axis. The Nyquist bin of that axis is zeroed,
// keeping the multiplier odd and the output real.
TorusField partial_derivative(const TorusField& u, int axis);

TorusVectorField gradient(const TorusField& u);
TorusField divergence(const TorusVectorField& v);
// Row divergence: (div T)_i = sum_j d_j T_ij.
TorusVectorField divergence(const TorusTensorField& t);

// L2-orthogonal projection onto divergence-free fields; the mean flow is kept.
TorusVectorField leray_project(const TorusVectorField& v);

// Zeroes every mode with max_i |m_i| > band. Used to keep products of
// band-limited factors alias-free under the 2/3 rule.
TorusField truncate_to_band(const TorusField& u, int band);

// Frequency dilation u(x) -> u(sigma x): mode m moves to sigma*m. Requires
// every active mode to stay strictly inside the resolved range.
TorusField dilate(const TorusField& u, int sigma);

// Grid-quadrature Lebesgue norm on the normalized torus (volume weight
// (2pi)^-d), p >= 1.
double lebesgue_norm(const TorusField& u, double p);
double lebesgue_norm_inf(const TorusField& u);
double lebesgue_norm(const TorusVectorField& u, double p);
double lebesgue_norm_inf(const TorusVectorField& u);
double lebesgue_norm(const TorusTensorField& t, double p);
double lebesgue_norm_inf(const TorusTensorField& t);

// Bessel-potential Sobolev norm: || (1 - Laplace)^{gamma/2} u ||_Lq.
double sobolev_norm(const TorusField& u, double gamma, double q);
double sobolev_norm(const TorusVectorField& u, double gamma, double q);

// Pointwise Frobenius magnitude |T(x)|_F as a scalar field.
TorusField frobenius_magnitude(const TorusTensorField& t);
TorusField magnitude(const TorusVectorField& v);

// Trigonometric interpolation of u at an arbitrary point of [0, 2pi)^d.
double evaluate_at(const TorusField& u, const std::array<double, 3>& x);

} // namespace fnsr
