#pragma once

#include <Eigen/Core>

#include <array>
#include <vector>

#include <fnsr/field.hpp>
#include <fnsr/mikado.hpp>

namespace fnsr {

// Geometric decomposition of symmetric matrices near the identity over a
// fixed direction frame: R = sum_k c_k e_k (x) e_k with smooth, strictly
// positive coefficients. The coefficients are the exponential-family
// projection onto the frame, c_k = anchor_k exp(<e_k (x) e_k, G>), with the
// symmetric dual G solved by damped Newton. At R = Id the anchor already
// has zero residual and is returned bitwise; elsewhere the map is analytic
// on the interior of the frame's cone, which for the default frames
// contains the closed operator-norm ball of radius 1/2 around Id.
struct GammaCoefficients {
    std::vector<double> c;      // c_k = Gamma_k^2, ordered like the frame
    std::vector<double> anchor; // coefficients at R = Id
    Eigen::MatrixXd dual;       // symmetric certificate G
    int iterations = 0;         // Newton steps taken
    int d = 2;
    std::vector<std::array<double, 3>> units;
    std::vector<std::array<int, 3>> directions;

    // sum_k c_k e_k (x) e_k, with e_i e_j evaluated as the exact rational
    // k_i k_j / |k|^2 so dyadic frames reconstruct the identity bitwise.
    Eigen::MatrixXd reconstruct() const;
};

// pre: R symmetric, ||R - Id||_op <= 1/2 (std::domain_error outside).
// The frame must span the symmetric matrices and express the identity with
// positive weights; defects throw invariant_error naming the failure, and
// a negative or vanishing coefficient names the offending direction.
GammaCoefficients decompose(const Eigen::MatrixXd& R, const DirectionSet& lambda);

// sqrt(c_k) >= 0 for the k-th direction of the frame.
double gamma(const Eigen::MatrixXd& R, const DirectionSet& lambda, int k);

// Gamma_k(Id - rbar/rho) at every grid point, one field per direction,
// warm-starting each solve from the neighboring point. pre: rho >= 2
// pointwise and the argument inside the half ball everywhere; violations
// throw std::domain_error naming the first offending grid point.
std::vector<TorusField> pointwise_decompose_field(const TorusTensorField& rbar,
                                                  const TorusField& rho,
                                                  const DirectionSet& lambda);

} // namespace fnsr
