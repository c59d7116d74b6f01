#pragma once

#include <Eigen/Dense>
#include <utility>

namespace pulseforge {

// Quadratic B-spline basis on [0, duration] with a clamped uniform knot
// vector (end knots repeated 3x). The basis is a partition of unity, each
// function is supported on at most 3 consecutive knot spans, and the two
// clamped ends interpolate the first/last coefficient.
struct SplineBasis {
    int n_coeff = 0;
    double duration_ns = 0.0;
    Eigen::VectorXd knots;  // size n_coeff + 3, non-decreasing

    static constexpr int kDegree = 2;
};

SplineBasis build_basis(int n_coeff, double duration_ns);

// All n_coeff basis values at time t (Cox-de Boor triangle; only the
// degree+1 functions covering t's span are nonzero).
Eigen::VectorXd basis_values(const SplineBasis& basis, double t_ns);

// Rows of basis values for a vector of sample times; the workhorse for
// simulator time grids (u(t) over a grid is then one matrix-vector product).
Eigen::MatrixXd basis_matrix(const SplineBasis& basis, const Eigen::VectorXd& ts_ns);

// One control envelope: 10 real-quadrature and 10 imaginary-quadrature
// B-spline coefficients, in MHz.
struct PulseCoefficients {
    Eigen::VectorXd re;
    Eigen::VectorXd im;

    // Packs as (re0..re9, im0..im9), the on-disk column order.
    Eigen::VectorXd stacked() const;
    static PulseCoefficients from_stacked(const Eigen::VectorXd& c20);
};

// Envelope quadratures (u, v) in MHz at time t. Throws ValidationError for
// t outside [0, duration].
std::pair<double, double> envelope(const SplineBasis& basis, const PulseCoefficients& coeffs,
                                   double t_ns);

// Verifies sqrt(u^2 + v^2) <= max_amp_mhz on a dense sample grid. Violations
// are reported, never clipped.
void validate_amplitude(const SplineBasis& basis, const PulseCoefficients& coeffs,
                        double max_amp_mhz, int samples = 1024);

}  // namespace pulseforge
