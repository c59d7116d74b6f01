#include "pulseforge/decay_fit.hpp"

#include <algorithm>
#include <cmath>

#include "pulseforge/errors.hpp"
#include "pulseforge/student_t.hpp"

namespace pulseforge {

namespace {

Eigen::Vector3d clamp_box(Eigen::Vector3d p) {
    for (int i = 0; i < 3; ++i) p[i] = std::min(1.0, std::max(0.0, p[i]));
    return p;
}

Eigen::VectorXd residuals(const Eigen::VectorXd& ms, const Eigen::VectorXd& ys,
                          const Eigen::VectorXd& w, const Eigen::Vector3d& p) {
    Eigen::VectorXd r(ms.size());
    for (Eigen::Index i = 0; i < ms.size(); ++i)
        r[i] = w[i] * (ys[i] - (p[0] + p[1] * std::pow(p[2], ms[i])));
    return r;
}

Eigen::MatrixXd jacobian(const Eigen::VectorXd& ms, const Eigen::VectorXd& w,
                         const Eigen::Vector3d& p) {
    Eigen::MatrixXd j(ms.size(), 3);
    for (Eigen::Index i = 0; i < ms.size(); ++i) {
        const double m = ms[i];
        const double fm1 = m >= 1.0 ? std::pow(p[2], m - 1.0) : std::pow(p[2], m) / p[2];
        j(i, 0) = w[i];
        j(i, 1) = w[i] * fm1 * p[2];
        j(i, 2) = w[i] * p[1] * m * fm1;
    }
    return j;
}

double initial_f(const Eigen::VectorXd& ms, const Eigen::VectorXd& ys, double a0, double b0) {
    if (b0 < 1e-9) return 1.0;  // flat data: no resolvable decay
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (Eigen::Index i = 0; i < ms.size(); ++i) {
        const double z = ys[i] - a0;
        if (z < 0.05 * b0) continue;
        const double ly = std::log(z);
        sx += ms[i];
        sy += ly;
        sxx += ms[i] * ms[i];
        sxy += ms[i] * ly;
        ++n;
    }
    if (n < 2) return 0.9;
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-30) return 0.9;
    const double slope = (n * sxy - sx * sy) / denom;
    return std::min(1.0, std::max(1e-6, std::exp(slope)));
}

}  // namespace

DecayFit fit_decay(const Eigen::VectorXd& ms, const Eigen::VectorXd& avg_ps,
                   const Eigen::VectorXd& errs) {
    const Eigen::Index n = ms.size();
    if (avg_ps.size() != n || errs.size() != n)
        throw ValidationError("arb: fit_decay inputs must have equal length");
    if (n < 4) throw ValidationError("arb: fit needs at least 4 points for positive dof");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(errs[i] > 0.0)) throw ValidationError("arb: fit errors must be positive");

    const Eigen::VectorXd w = errs.cwiseInverse();

    Eigen::Vector3d p;
    p[0] = std::min(1.0, std::max(0.0, avg_ps.minCoeff()));
    p[1] = std::min(1.0, std::max(0.0, avg_ps.maxCoeff() - avg_ps.minCoeff()));
    p[2] = initial_f(ms, avg_ps, p[0], p[1]);

    Eigen::VectorXd r = residuals(ms, avg_ps, w, p);
    double chi2 = r.squaredNorm();
    double lambda = 1e-3;
    bool converged = false;

    for (int iter = 0; iter < 300 && !converged; ++iter) {
        const Eigen::MatrixXd j = jacobian(ms, w, p);
        const Eigen::Matrix3d jtj = j.transpose() * j;
        const Eigen::Vector3d jtr = j.transpose() * r;
        if (!jtj.allFinite()) throw NumericError("arb: fit Jacobian is not finite");

        bool stepped = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Eigen::Matrix3d damped = jtj;
            for (int k = 0; k < 3; ++k)
                damped(k, k) += lambda * std::max(jtj(k, k), 1e-30);
            const Eigen::Vector3d delta = damped.ldlt().solve(jtr);
            const Eigen::Vector3d trial = clamp_box(p + delta);
            const Eigen::VectorXd tr = residuals(ms, avg_ps, w, trial);
            const double tchi2 = tr.squaredNorm();
            if (tchi2 <= chi2) {
                const double rel_drop = (chi2 - tchi2) / std::max(chi2, 1e-300);
                const double move = (trial - p).norm();
                p = trial;
                r = tr;
                chi2 = tchi2;
                lambda = std::max(lambda / 3.0, 1e-15);
                stepped = true;
                if (rel_drop < 1e-14 || move < 1e-15 || chi2 < 1e-28) converged = true;
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e15) break;
        }
        if (!stepped) converged = true;  // no descent direction left within bounds
    }

    DecayFit fit;
    fit.a = p[0];
    fit.b = p[1];
    fit.f = p[2];
    fit.chi2 = chi2;
    fit.dof = static_cast<int>(n) - 3;
    fit.converged = converged;

    // Covariance (J'WJ)^-1 * reduced chi-square. Unidentifiable directions
    // (rank-deficient Jacobian, e.g. B = 0 leaving f free) get a large capped
    // variance that is not deflated by a tiny chi-square, so degenerate fits
    // report themselves as such.
    const Eigen::MatrixXd j = jacobian(ms, w, p);
    const Eigen::Matrix3d jtj = j.transpose() * j;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(jtj);
    const double ev_max = std::max(es.eigenvalues().maxCoeff(), 1e-300);
    const double chi2_red = chi2 / fit.dof;
    Eigen::Vector3d scaled_inv;
    for (int k = 0; k < 3; ++k) {
        const double ev = es.eigenvalues()[k];
        const bool capped = ev < 1e-12 * ev_max;
        if (capped) {
            // Parameters live in [0,1]; 1e6 is "unbounded" on that scale.
            scaled_inv[k] = std::max(1.0 / (1e-12 * ev_max), 1e6) * std::max(chi2_red, 1.0);
        } else {
            scaled_inv[k] = chi2_red / ev;
        }
    }
    fit.covariance =
        es.eigenvectors() * scaled_inv.asDiagonal() * es.eigenvectors().transpose();
    return fit;
}

std::pair<double, double> confidence_interval(double f_hat, const Eigen::Matrix3d& cov, int dof,
                                              double alpha) {
    if (dof < 1) throw ValidationError("arb: confidence interval needs dof >= 1");
    const double t = student_t_critical(alpha, dof);
    const double half = t * std::sqrt(std::max(cov(2, 2), 0.0));
    const double lo = std::min(1.0, std::max(0.0, f_hat - half));
    const double hi = std::min(1.0, std::max(0.0, f_hat + half));
    return {lo, hi};
}

}  // namespace pulseforge
