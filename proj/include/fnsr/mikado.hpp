#pragma once

#include <array>
#include <vector>

#include <fnsr/field.hpp>

namespace fnsr {

// Mikado flows: pencils of pipe flows concentrated around periodic lines.
//
// Coordinate convention used throughout this module: lines, base points and
// distances live on the unit torus [0,1)^d, while fields and differential
// operators live on the simulation torus [0,2*pi)^d. line_distance accepts a
// point in grid coordinates and returns the unit-box distance; the
// normalization constant of each field absorbs the 2*pi scale factors.

// Directions k (integer vectors) and base points p (unit-box coordinates)
// of the pencil. Lines are ell_k = {t*k + p_k mod 1}. Two entries may be
// parallel only if their lines are disjoint.
struct DirectionSet {
    int d = 2;
    std::vector<std::array<int, 3>> directions;
    std::vector<std::array<double, 3>> points;

    // d = 2: axes plus the two diagonals. d = 3: axes plus the six face
    // diagonals; six directions alone pin the diagonal stress coefficients
    // to zero and leave no room around the identity, so the default carries
    // nine. Base points are dyadic and chosen so parallel lines stay apart.
    static DirectionSet defaults(int d);

    int size() const { return int(directions.size()); }
    std::array<double, 3> unit(int i) const;

    // Checks dimension, nonzero in-range directions, unit-box points,
    // distinct direction vectors, and that parallel lines are disjoint.
    void validate() const;

    // Largest number of crossings between any two lines of the set.
    // d = 2 uses the determinant count; d = 3 scans one period and refines.
    int max_crossings() const;
};

// Transverse bump phi(r) = cos^8(pi*(4r-3)/2) on [1/2, 1], zero elsewhere,
// and its radial Laplacian psi in the (d-1)-dimensional transverse plane.
struct ProfilePair {
    double phi(double r) const;
    double phi_prime(double r) const;
    double phi_second(double r) const;
    // psi = phi'' + (d-2)/r * phi'
    double psi(double r, int d) const;
};

// A pencil of flows with concentration mu (tube width ~ 1/mu) and
// oscillation factor sigma (fields are later dilated by sigma).
struct MikadoFamily {
    DirectionSet directions;
    ProfilePair profiles;
    int mu = 2;
    int sigma = 1;

    void validate() const;
};

// Smallest power-of-two grid size that resolves the family: n >= 8*mu*sigma.
int required_resolution(int mu, int sigma);

// Unit-box distance from the point x (grid coordinates in [0,2*pi)^d) to
// the periodic line {t*k + p mod 1}. d = 2 reduces to a closed form; d = 3
// solves the closest-vector problem in the projected lattice.
double line_distance(const std::array<double, 3>& x, const std::array<int, 3>& k,
                     const std::array<double, 3>& p, int d);

// One flow of the pencil. The scalar profile is band-limited to the modes
// orthogonal to k (so div w = 0 and div omega = w hold exactly on the grid)
// and normalized so that the grid mean of psi^2 is exactly 1; the spectral
// window tapers smoothly between 1.5*mu and 3*mu, which keeps the family
// self-similar across mu on grids n >= 8*mu*sigma.
struct MikadoField {
    TorusField phi;          // potential, Delta phi = psi on the grid
    TorusField psi;          // normalized tube profile
    TorusVectorField w;      // w = psi * e
    TorusTensorField omega;  // omega_ij = e_i d_j phi - d_i phi e_j
    std::array<double, 3> e; // unit direction
    double normalization;    // constant dividing the raw sampled profile
};

MikadoField mikado_field(const TorusGrid& g, const MikadoFamily& family, int index);

// Size of div(w (x) w) = e (e . grad psi^2), relative to mu * sup psi^2.
// alias_free restricts the divergence to modes the grid represents without
// wrap-around from squaring; raw keeps the full band and so also measures
// the sampling alias.
struct EulerResidual {
    double alias_free = 0;
    double raw = 0;
};

EulerResidual pressureless_euler_residual(const TorusGrid& g, const MikadoFamily& family,
                                          int index);

// Log-log slopes of the norms ||grad^m w||_p and ||grad^m omega||_p across
// a geometric list of concentrations, next to the predicted exponents
// m + (d-1)/2 - (d-1)/p and the omega value shifted by -1.
struct ScalingRow {
    int order = 0;
    double p = 2;
    double slope_w = 0;
    double predicted_w = 0;
    double slope_omega = 0;
    double predicted_omega = 0;
};

// Same for the fractional norm ||w||_{s,p}, prediction s + (d-1)/2 - (d-1)/p.
struct FractionalRow {
    double s = 0;
    double p = 2;
    double slope = 0;
    double predicted = 0;
};

struct ScalingReport {
    std::vector<int> mu;
    std::vector<ScalingRow> rows;
    std::vector<FractionalRow> fractional;
    std::vector<double> normalization; // per mu; nearly constant by design
};

// Builds each concentration on its own grid n = required_resolution(mu,
// sigma) and fits the slopes. mu must be a geometric list of at least three
// values; derivative orders are limited to {0, 1}.
ScalingReport scaling_report(const DirectionSet& dirs, const ProfilePair& profiles,
                             int index, const std::vector<int>& mu,
                             const std::vector<int>& orders,
                             const std::vector<double>& lebesgue_exponents,
                             const std::vector<double>& sobolev_orders, int sigma = 1);

// ||psi_i psi_j||_p for two distinct directions of the family. Equal
// indices or equal direction vectors are rejected; the self-interaction
// has no smallness and is handled by the stress decomposition instead.
double cross_interaction_norm(const TorusGrid& g, const MikadoFamily& family, int i,
                              int j, double p);

struct CrossInteractionReport {
    std::vector<int> mu;
    std::vector<double> value;
    double p = 1;
    double slope = 0;
    double predicted = 0; // d - 1 - d/p
};

CrossInteractionReport cross_interaction_report(const DirectionSet& dirs,
                                                const ProfilePair& profiles, int i, int j,
                                                const std::vector<int>& mu, double p,
                                                int sigma = 1);

} // namespace fnsr
