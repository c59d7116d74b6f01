#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "pulseforge/errors.hpp"
#include "pulseforge/rng.hpp"
#include "pulseforge/spline.hpp"

using namespace pulseforge;

namespace {

// Oracle 1: the Cox-de Boor recursion written out literally (0/0 := 0),
// independent of the triangular evaluation in the library.
double naive_basis(const Eigen::VectorXd& knots, int j, int degree, double t, double t_max) {
    if (degree == 0) {
        const bool last = knots[j + 1] >= t_max && t == t_max;  // close the final span
        return (t >= knots[j] && t < knots[j + 1]) || last ? 1.0 : 0.0;
    }
    double left = 0.0, right = 0.0;
    const double dl = knots[j + degree] - knots[j];
    if (dl > 0.0) left = (t - knots[j]) / dl * naive_basis(knots, j, degree - 1, t, t_max);
    const double dr = knots[j + degree + 1] - knots[j + 1];
    if (dr > 0.0)
        right = (knots[j + degree + 1] - t) / dr * naive_basis(knots, j + 1, degree - 1, t, t_max);
    return left + right;
}

// Oracle 2: de Boor's algorithm evaluating S(t) = sum_j c_j B_j(t) by
// repeated knot insertion; a different algorithm from summing basis values.
double de_boor_point(const SplineBasis& basis, const Eigen::VectorXd& c, double t) {
    const int p = SplineBasis::kDegree;
    const auto& u = basis.knots;
    int k = basis.n_coeff - 1;  // span: largest k with u[k] <= t
    if (t < u[basis.n_coeff]) {
        k = p;
        while (!(t >= u[k] && t < u[k + 1])) ++k;
    }
    Eigen::VectorXd d(p + 1);
    for (int j = 0; j <= p; ++j) d[j] = c[j + k - p];
    for (int r = 1; r <= p; ++r)
        for (int j = p; j >= r; --j) {
            const double denom = u[j + 1 + k - r] - u[j + k - p];
            const double alpha = denom != 0.0 ? (t - u[j + k - p]) / denom : 0.0;
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
        }
    return d[p];
}

}  // namespace

TEST_SUITE("spline") {

TEST_CASE("build_basis dimensions and clamped ends") {
    const SplineBasis basis = build_basis(10, 125.0);
    CHECK(basis.n_coeff == 10);
    CHECK(basis.knots.size() == 13);
    CHECK(basis.knots[0] == 0.0);
    CHECK(basis.knots[2] == 0.0);
    CHECK(basis.knots[10] == 125.0);
    CHECK(basis.knots[12] == 125.0);
    for (int i = 1; i < basis.knots.size(); ++i) CHECK(basis.knots[i] >= basis.knots[i - 1]);

    const SplineBasis tiny = build_basis(3, 1.0);
    const Eigen::VectorXd at0 = basis_values(tiny, 0.0);
    CHECK(at0[0] == doctest::Approx(1.0));
    CHECK(at0[1] == doctest::Approx(0.0));
    CHECK(at0[2] == doctest::Approx(0.0));
}

TEST_CASE("degree guard") {
    CHECK_THROWS_AS(build_basis(2, 10.0), ValidationError);
    CHECK_THROWS_AS(build_basis(10, 0.0), ValidationError);
}

TEST_CASE("partition of unity") {
    const SplineBasis basis = build_basis(10, 125.0);
    for (double t : {0.0, 31.25, 62.5, 125.0})
        CHECK(std::abs(basis_values(basis, t).sum() - 1.0) < 1e-12);
    for (int i = 0; i < 1000; ++i) {
        const double t = 125.0 * i / 999.0;
        CHECK(std::abs(basis_values(basis, t).sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("values match the literal recursion") {
    const SplineBasis basis = build_basis(10, 125.0);
    for (int i = 0; i <= 200; ++i) {
        const double t = 125.0 * i / 200.0;
        const Eigen::VectorXd v = basis_values(basis, t);
        for (int j = 0; j < 10; ++j)
            CHECK(v[j] == doctest::Approx(naive_basis(basis.knots, j, 2, t, 125.0)).epsilon(1e-12));
    }
}

TEST_CASE("local support spans at most 3 knot intervals") {
    const SplineBasis basis = build_basis(10, 125.0);
    for (int j = 0; j < 10; ++j) {
        for (int i = 0; i < 2000; ++i) {
            const double t = 125.0 * i / 1999.0;
            if (t < basis.knots[j] - 1e-12 || t > basis.knots[j + 3] + 1e-12)
                CHECK(basis_values(basis, t)[j] == 0.0);
        }
    }
}

TEST_CASE("envelope trivials") {
    const SplineBasis basis = build_basis(10, 125.0);
    PulseCoefficients zero{Eigen::VectorXd::Zero(10), Eigen::VectorXd::Zero(10)};
    for (double t : {0.0, 10.0, 77.7, 125.0}) {
        const auto [u, v] = envelope(basis, zero, t);
        CHECK(u == 0.0);
        CHECK(v == 0.0);
    }
    // Partition of unity makes an all-equal coefficient vector a constant drive.
    PulseCoefficients flat{Eigen::VectorXd::Constant(10, 2.5), Eigen::VectorXd::Zero(10)};
    for (double t : {0.0, 13.9, 125.0}) {
        const auto [u, v] = envelope(basis, flat, t);
        CHECK(u == doctest::Approx(2.5).epsilon(1e-13));
        CHECK(v == doctest::Approx(0.0));
    }
}

TEST_CASE("envelope matches de Boor curve evaluation") {
    const SplineBasis basis = build_basis(10, 125.0);
    Rng rng(101);
    PulseCoefficients coeffs;
    coeffs.re.resize(10);
    coeffs.im.resize(10);
    // A pi/2-like profile: baseline 2 MHz plus structure.
    for (int j = 0; j < 10; ++j) {
        coeffs.re[j] = 2.0 + rng.uniform(-1.0, 1.0);
        coeffs.im[j] = rng.uniform(-0.5, 0.5);
    }
    for (int i = 0; i < 1000; ++i) {
        const double t = 125.0 * i / 999.0;
        const auto [u, v] = envelope(basis, coeffs, t);
        CHECK(u == doctest::Approx(de_boor_point(basis, coeffs.re, t)).epsilon(1e-12));
        CHECK(v == doctest::Approx(de_boor_point(basis, coeffs.im, t)).epsilon(1e-12));
    }
}

TEST_CASE("envelope is linear in the coefficients") {
    const SplineBasis basis = build_basis(10, 125.0);
    Rng rng(55);
    PulseCoefficients c1, c2, mix;
    c1.re.resize(10); c1.im.resize(10);
    c2.re.resize(10); c2.im.resize(10);
    for (int j = 0; j < 10; ++j) {
        c1.re[j] = rng.uniform(-3, 3); c1.im[j] = rng.uniform(-3, 3);
        c2.re[j] = rng.uniform(-3, 3); c2.im[j] = rng.uniform(-3, 3);
    }
    const double a = 1.7, b = -0.4;
    mix.re = a * c1.re + b * c2.re;
    mix.im = a * c1.im + b * c2.im;
    for (int i = 0; i < 100; ++i) {
        const double t = 125.0 * i / 99.0;
        const auto [mu, mv] = envelope(basis, mix, t);
        const auto [u1, v1] = envelope(basis, c1, t);
        const auto [u2, v2] = envelope(basis, c2, t);
        CHECK(std::abs(mu - (a * u1 + b * u2)) < 1e-12);
        CHECK(std::abs(mv - (a * v1 + b * v2)) < 1e-12);
    }
}

TEST_CASE("domain errors") {
    const SplineBasis basis = build_basis(10, 125.0);
    PulseCoefficients zero{Eigen::VectorXd::Zero(10), Eigen::VectorXd::Zero(10)};
    CHECK_THROWS_AS(envelope(basis, zero, -0.001), ValidationError);
    CHECK_THROWS_AS(envelope(basis, zero, 125.001), ValidationError);
}

TEST_CASE("amplitude bound is reported, not clipped") {
    const SplineBasis basis = build_basis(10, 125.0);
    PulseCoefficients ok{Eigen::VectorXd::Constant(10, 5.0), Eigen::VectorXd::Zero(10)};
    CHECK_NOTHROW(validate_amplitude(basis, ok, 20.0));
    PulseCoefficients hot{Eigen::VectorXd::Constant(10, 21.0), Eigen::VectorXd::Zero(10)};
    CHECK_THROWS_AS(validate_amplitude(basis, hot, 20.0), ValidationError);
    // Coefficients are untouched by the check.
    CHECK(hot.re[0] == 21.0);
}

}  // TEST_SUITE
