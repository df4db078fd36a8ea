#pragma once

#include <fnsr/field.hpp>

namespace fnsr {

// Tensor antidivergence: symmetric, trace-free, with
// div(antidiv(v)) = v - mean(v). The mean of v is subtracted internally.
TorusTensorField antidiv(const TorusVectorField& v);

// The composition antidiv(Laplace v) for solenoidal v, which equals the
// symmetric gradient grad v + (grad v)^T. Computed as the literal
// composition; throws invariant_error if the relative divergence of v
// exceeds 1e-8.
TorusTensorField antidiv_of_laplacian(const TorusVectorField& v);

// Bilinear antidivergence: div(bilinear_antidiv(v, A)) = vA - mean(vA)
// with (vA)_i = sum_l v_l A_li. Requires mean(A) = 0 componentwise
// (invariant_error otherwise). Gains a factor sigma^-1 over the naive
// product when A oscillates at frequency sigma and v is slow.
TorusTensorField bilinear_antidiv(const TorusVectorField& v, const TorusTensorField& A);

// Grid proxy for the C^1 norm: max |v| + max |grad v| over samples.
// A lower bound on the true sup norm.
double c1_norm(const TorusVectorField& v);

} // namespace fnsr
