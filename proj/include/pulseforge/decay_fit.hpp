#pragma once

#include <Eigen/Dense>
#include <utility>

namespace pulseforge {

// Result of the bounded weighted fit of avg_p = A + B * f^m.
struct DecayFit {
    double a = 0.0;
    double b = 0.0;
    double f = 0.0;
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // order (A, B, f)
    double chi2 = 0.0;
    int dof = 0;
    bool converged = false;
};

// Weighted least squares of A + B*f^m with box bounds [0,1]^3 on all three
// parameters (Levenberg-Marquardt with projection). errs enter as 1/err^2
// weights; the covariance is (J'WJ)^-1 scaled by the reduced chi-square, so
// under- or over-stated per-point errors still give calibrated intervals.
// Initialization: A0 = min(y), B0 = max(y)-min(y), f0 from a log-linear
// regression on y - A0; flat data pins f0 at the boundary 1.
DecayFit fit_decay(const Eigen::VectorXd& ms, const Eigen::VectorXd& avg_ps,
                   const Eigen::VectorXd& errs);

// Two-tailed Student-t interval f_hat +/- t_{alpha,dof} * sqrt(cov(f,f)),
// clamped to [0, 1].
std::pair<double, double> confidence_interval(double f_hat, const Eigen::Matrix3d& cov, int dof,
                                              double alpha);

}  // namespace pulseforge
