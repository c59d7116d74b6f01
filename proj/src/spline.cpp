#include "pulseforge/spline.hpp"

#include <cmath>
#include <sstream>

#include "pulseforge/errors.hpp"

namespace pulseforge {

SplineBasis build_basis(int n_coeff, double duration_ns) {
    if (n_coeff < 3)
        throw ValidationError("splinepulse: quadratic splines need at least 3 basis functions, got " +
                              std::to_string(n_coeff));
    if (!(duration_ns > 0.0)) throw ValidationError("splinepulse: duration must be positive");

    SplineBasis basis;
    basis.n_coeff = n_coeff;
    basis.duration_ns = duration_ns;

    const int p = SplineBasis::kDegree;
    const int n_knots = n_coeff + p + 1;
    const int n_spans = n_coeff - p;  // interior spans between distinct knots
    basis.knots.resize(n_knots);
    for (int i = 0; i < n_knots; ++i) {
        const int clamped = std::min(std::max(i - p, 0), n_spans);
        basis.knots[i] = duration_ns * static_cast<double>(clamped) / n_spans;
    }
    return basis;
}

namespace {

// Knot span index for t: largest i with knots[i] <= t, restricted so that
// degree+1 basis functions are defined; t == duration maps into the last span.
int find_span(const SplineBasis& basis, double t) {
    const int p = SplineBasis::kDegree;
    const int n = basis.n_coeff;
    if (t >= basis.knots[n]) return n - 1;
    int lo = p, hi = n;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (t < basis.knots[mid])
            hi = mid;
        else
            lo = mid;
    }
    return lo;
}

void check_domain(const SplineBasis& basis, double t) {
    if (!(t >= 0.0 && t <= basis.duration_ns)) {
        std::ostringstream msg;
        msg << "splinepulse: t = " << t << " ns outside [0, " << basis.duration_ns << "]";
        throw ValidationError(msg.str());
    }
}

}  // namespace

Eigen::VectorXd basis_values(const SplineBasis& basis, double t_ns) {
    check_domain(basis, t_ns);
    const int p = SplineBasis::kDegree;
    const int span = find_span(basis, t_ns);
    const auto& u = basis.knots;

    // Cox-de Boor triangle for the p+1 nonzero functions on this span.
    double vals[SplineBasis::kDegree + 1] = {1.0, 0.0, 0.0};
    double left[SplineBasis::kDegree + 1];
    double right[SplineBasis::kDegree + 1];
    for (int j = 1; j <= p; ++j) {
        left[j] = t_ns - u[span + 1 - j];
        right[j] = u[span + j] - t_ns;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double temp = denom != 0.0 ? vals[r] / denom : 0.0;
            vals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        vals[j] = saved;
    }

    Eigen::VectorXd out = Eigen::VectorXd::Zero(basis.n_coeff);
    for (int r = 0; r <= p; ++r) out[span - p + r] = vals[r];
    return out;
}

Eigen::MatrixXd basis_matrix(const SplineBasis& basis, const Eigen::VectorXd& ts_ns) {
    Eigen::MatrixXd out(ts_ns.size(), basis.n_coeff);
    for (Eigen::Index i = 0; i < ts_ns.size(); ++i) out.row(i) = basis_values(basis, ts_ns[i]);
    return out;
}

Eigen::VectorXd PulseCoefficients::stacked() const {
    Eigen::VectorXd c(re.size() + im.size());
    c << re, im;
    return c;
}

PulseCoefficients PulseCoefficients::from_stacked(const Eigen::VectorXd& c20) {
    if (c20.size() % 2 != 0)
        throw ValidationError("splinepulse: stacked coefficient vector must have even length");
    const Eigen::Index n = c20.size() / 2;
    return PulseCoefficients{c20.head(n), c20.tail(n)};
}

std::pair<double, double> envelope(const SplineBasis& basis, const PulseCoefficients& coeffs,
                                   double t_ns) {
    if (coeffs.re.size() != basis.n_coeff || coeffs.im.size() != basis.n_coeff)
        throw ValidationError("splinepulse: coefficient count does not match basis");
    const Eigen::VectorXd b = basis_values(basis, t_ns);
    return {coeffs.re.dot(b), coeffs.im.dot(b)};
}

void validate_amplitude(const SplineBasis& basis, const PulseCoefficients& coeffs,
                        double max_amp_mhz, int samples) {
    for (int i = 0; i < samples; ++i) {
        const double t = basis.duration_ns * i / (samples - 1);
        const auto [u, v] = envelope(basis, coeffs, t);
        const double amp = std::hypot(u, v);
        if (amp > max_amp_mhz) {
            std::ostringstream msg;
            msg << "splinepulse: envelope magnitude " << amp << " MHz exceeds bound " << max_amp_mhz
                << " MHz at t = " << t << " ns";
            throw ValidationError(msg.str());
        }
    }
}

}  // namespace pulseforge
