#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "pulseforge/dataset.hpp"
#include "pulseforge/errors.hpp"
#include "pulseforge/rng.hpp"

using namespace pulseforge;

namespace {

std::vector<RawRecord> make_raw(int n_angles, int n_seeds,
                                const std::function<Eigen::VectorXd(double, int)>& gen) {
    std::vector<RawRecord> raw;
    for (int a = 0; a < n_angles; ++a) {
        const double angle = -M_PI + 2.0 * M_PI * a / (n_angles - 1);
        for (int s = 0; s < n_seeds; ++s) {
            RawRecord rec;
            rec.angle = angle;
            rec.seed = static_cast<std::uint64_t>(a * 1000 + s);
            rec.coeffs = gen(angle, s);
            rec.fidelity = 1.0;
            rec.converged = true;
            raw.push_back(rec);
        }
    }
    return raw;
}

AngleDataset linear_dataset(int n_angles, int n_cols, double slope) {
    AngleDataset ds;
    ds.angles.resize(n_angles);
    ds.coeffs.resize(n_angles, n_cols);
    for (int i = 0; i < n_angles; ++i) {
        ds.angles[i] = -M_PI + 2.0 * M_PI * i / (n_angles - 1);
        for (int c = 0; c < n_cols; ++c) ds.coeffs(i, c) = slope * ds.angles[i] + c;
    }
    return ds;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("averaging a single seed is the identity") {
    const auto raw = make_raw(8, 1, [](double angle, int) {
        return Eigen::VectorXd::Constant(20, angle);
    });
    const AngleDataset ds = average_over_seeds(raw);
    CHECK(ds.n_angles() == 8);
    for (Eigen::Index i = 0; i < 8; ++i)
        CHECK(ds.coeffs(i, 3) == doctest::Approx(ds.angles[i]));
}

TEST_CASE("opposite seeds cancel") {
    const auto raw = make_raw(5, 2, [](double, int s) {
        return Eigen::VectorXd::Constant(20, s == 0 ? 1.7 : -1.7);
    });
    const AngleDataset ds = average_over_seeds(raw);
    CHECK(ds.coeffs.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("averaging 100 noisy seeds shrinks the spread about 10x") {
    // Monte Carlo oracle: truth + N(0, sigma) noise per seed; the averaged
    // column should sit within ~sigma/10 of the truth.
    const double sigma = 0.5;
    Rng rng(404);
    const auto raw = make_raw(40, 100, [&](double angle, int) {
        Eigen::VectorXd c = Eigen::VectorXd::Constant(20, angle);
        for (Eigen::Index j = 0; j < c.size(); ++j) c[j] += sigma * rng.normal();
        return c;
    });
    const AngleDataset ds = average_over_seeds(raw);
    double sq = 0.0;
    for (Eigen::Index i = 0; i < ds.n_angles(); ++i)
        for (Eigen::Index c = 0; c < 20; ++c) {
            const double err = ds.coeffs(i, c) - ds.angles[i];
            sq += err * err;
        }
    const double rms = std::sqrt(sq / (40.0 * 20.0));
    CHECK(rms == doctest::Approx(sigma / 10.0).epsilon(0.15));
}

TEST_CASE("partial seed coverage is a hole error") {
    auto raw = make_raw(6, 3, [](double, int) { return Eigen::VectorXd::Zero(20); });
    raw.pop_back();  // last angle now has 2 of 3 seeds
    CHECK_THROWS_AS(average_over_seeds(raw), ValidationError);
}

TEST_CASE("smoothing leaves constants and window-1 untouched") {
    AngleDataset ds = linear_dataset(30, 4, 0.0);  // constant columns
    const AngleDataset s = smooth(ds, 7);
    CHECK((s.coeffs - ds.coeffs).cwiseAbs().maxCoeff() < 1e-14);

    AngleDataset lin = linear_dataset(30, 4, 2.0);
    const AngleDataset id = smooth(lin, 1);
    CHECK((id.coeffs - lin.coeffs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("symmetric shrinking windows keep linear trends exact at the edges") {
    const AngleDataset lin = linear_dataset(64, 3, 1.3);
    const AngleDataset s = smooth(lin, 50);
    CHECK((s.coeffs - lin.coeffs).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.angles == lin.angles);
    CHECK(s.n_out() == lin.n_out());
}

TEST_CASE("window larger than the dataset is an error") {
    const AngleDataset ds = linear_dataset(10, 2, 1.0);
    CHECK_THROWS_AS(smooth(ds, 11), ValidationError);
    CHECK_THROWS_AS(smooth(ds, 0), ValidationError);
}

TEST_CASE("total variation basics") {
    AngleDataset ds = linear_dataset(11, 1, 0.0);
    CHECK(total_variation(ds)[0] == doctest::Approx(0.0));

    // Monotone ramp 0 -> 1.
    for (int i = 0; i < 11; ++i) ds.coeffs(i, 0) = i / 10.0;
    CHECK(total_variation(ds)[0] == doctest::Approx(1.0));
}

TEST_CASE("smoothing a sawtooth strictly lowers total variation") {
    AngleDataset ds = linear_dataset(50, 1, 0.0);
    for (int i = 0; i < 50; ++i) ds.coeffs(i, 0) = (i % 2 == 0) ? 1.0 : -1.0;
    const double tv_raw = total_variation(ds)[0];
    const double tv_smooth = total_variation(smooth(ds, 50))[0];
    CHECK(tv_smooth < tv_raw);

    // Random walk vs its smoothed self.
    Rng rng(8);
    AngleDataset walk = linear_dataset(200, 1, 0.0);
    double x = 0.0;
    for (int i = 0; i < 200; ++i) walk.coeffs(i, 0) = (x += rng.normal());
    CHECK(total_variation(smooth(walk, 50))[0] < total_variation(walk)[0]);
}

TEST_CASE("reduction keeps the five loud columns of the fixture") {
    // 5 distinct high-variation columns + 15 near-constant ones.
    const int n = 40;
    AngleDataset ds = linear_dataset(n, 20, 0.0);
    Rng rng(17);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 5; ++c) ds.coeffs(i, c) = (c + 1.0) * ds.angles[i];
        for (int c = 5; c < 20; ++c) ds.coeffs(i, c) = 0.01 * c + 1e-4 * rng.normal();
    }
    const ReducedDataset red = reduce_coefficients(ds, 0.05, 5);
    CHECK(red.ds.n_out() == 5);
    const auto outputs = red.map.output_groups();
    REQUIRE(outputs.size() == 5);
    for (int k = 0; k < 5; ++k) {
        const auto& g = red.map.groups[outputs[k]];
        REQUIRE(g.columns.size() == 1);
        CHECK(g.columns[0] == k);
        CHECK(red.ds.coeffs.col(k) == ds.coeffs.col(k));
    }
}

TEST_CASE("all-constant data cannot reach five outputs") {
    AngleDataset ds = linear_dataset(20, 20, 0.0);
    try {
        reduce_coefficients(ds, 0.05, 5);
        FAIL("expected ReductionError");
    } catch (const ReductionError& e) {
        CHECK(e.achievable < 5);
    }
}

TEST_CASE("similar trajectories merge into one shared output") {
    const int n = 40;
    AngleDataset ds = linear_dataset(n, 20, 0.0);
    Rng rng(23);
    for (int i = 0; i < n; ++i) {
        const double t = ds.angles[i];
        for (int c = 0; c < 4; ++c) ds.coeffs(i, c) = (2.0 + c) * t;    // 4 distinct
        for (int c = 4; c < 10; ++c) ds.coeffs(i, c) = 1.3 * t + 1e-3 * rng.normal();
        for (int c = 10; c < 20; ++c) ds.coeffs(i, c) = 0.02 + 1e-4 * rng.normal();
    }
    const ReducedDataset red = reduce_to_target(ds, 5);
    CHECK(red.map.output_count() == 5);
    // The six near-identical columns form one output group.
    bool found_merge = false;
    for (const auto& g : red.map.groups)
        if (g.is_output && g.columns.size() == 6) found_merge = true;
    CHECK(found_merge);
}

TEST_CASE("expand round-trips a reduced record") {
    const int n = 30;
    AngleDataset ds = linear_dataset(n, 20, 0.0);
    Rng rng(31);
    for (int i = 0; i < n; ++i) {
        const double t = ds.angles[i];
        for (int c = 0; c < 5; ++c) ds.coeffs(i, c) = (1.0 + c) * t;
        for (int c = 5; c < 20; ++c) ds.coeffs(i, c) = 0.3 + 1e-5 * rng.normal();
    }
    const ReducedDataset red = reduce_coefficients(ds, 0.05, 5);
    for (Eigen::Index i = 0; i < n; i += 7) {
        const Eigen::VectorXd full =
            expand_coefficients(red.ds.coeffs.row(i).transpose(), red.map);
        REQUIRE(full.size() == 20);
        // Free columns reproduce exactly; grouped ones within the threshold.
        for (int c = 0; c < 5; ++c) CHECK(full[c] == doctest::Approx(ds.coeffs(i, c)));
        for (int c = 5; c < 20; ++c) CHECK(std::abs(full[c] - ds.coeffs(i, c)) < 0.05);
    }

    // Zero model output leaves stored means in constant slots.
    const Eigen::VectorXd zeroed = expand_coefficients(Eigen::VectorXd::Zero(5), red.map);
    for (int c = 5; c < 20; ++c) CHECK(zeroed[c] == doctest::Approx(0.3).epsilon(1e-3));

    CHECK_THROWS_AS(expand_coefficients(Eigen::VectorXd::Zero(4), red.map), ValidationError);
}

TEST_CASE("split is deterministic and obeys the rounding rule") {
    AngleDataset big = linear_dataset(4096, 2, 1.0);
    const AngleDataset a = split_dataset(big, 0.8, 0.1, 0.1, 12345);
    const AngleDataset b = split_dataset(big, 0.8, 0.1, 0.1, 12345);
    CHECK(a.split == b.split);
    CHECK(a.rows_with(Split::train).size() == 3277);
    CHECK(a.rows_with(Split::val).size() == 409);
    CHECK(a.rows_with(Split::test).size() == 410);

    const AngleDataset all_train = split_dataset(big, 1.0, 0.0, 0.0, 1);
    CHECK(all_train.rows_with(Split::train).size() == 4096);

    CHECK_THROWS_AS(split_dataset(big, 0.5, 0.2, 0.2, 1), ValidationError);  // sums to 0.9
    AngleDataset tiny = linear_dataset(3, 2, 1.0);
    // A positive fraction that rounds to zero rows must be rejected.
    CHECK_THROWS_AS(split_dataset(tiny, 0.9, 0.05, 0.05, 1), ValidationError);
}

}  // TEST_SUITE
