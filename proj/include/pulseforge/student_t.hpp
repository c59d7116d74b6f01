#pragma once

#include <cmath>
#include <limits>

#include "pulseforge/errors.hpp"

namespace pulseforge {

namespace detail {

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    // Use the symmetry relation so the continued fraction converges fast.
    if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta(b, a, 1.0 - x);

    const double tiny = 1e-300;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return std::exp(ln_front) * h / a;
}

}  // namespace detail

// P(T <= t) for Student's t with dof degrees of freedom.
inline double student_t_cdf(double t, int dof) {
    if (dof < 1) throw ValidationError("student_t_cdf: dof must be >= 1");
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * detail::incomplete_beta(0.5 * dof, 0.5, x);
    return t >= 0.0 ? 1.0 - tail : tail;
}

// Two-tailed critical value: t such that P(|T| > t) = alpha.
inline double student_t_critical(double alpha, int dof) {
    if (dof < 1) throw ValidationError("student_t_critical: dof must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw ValidationError("student_t_critical: alpha must be in (0, 1]");
    if (alpha >= 1.0) return 0.0;

    // P(|T| > t) = I_x(dof/2, 1/2) with x = dof/(dof + t^2); bisect on t.
    auto two_tail = [dof](double t) {
        return detail::incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
    };
    double lo = 0.0, hi = 1.0;
    while (two_tail(hi) > alpha && hi < 1e12) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (two_tail(mid) > alpha)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-13 * (1.0 + hi)) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace pulseforge
