#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pulseforge {

enum class Split { train, val, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

// One optimizer output: angle, seed, the 20 stacked coefficients, and how
// well the optimizer did.
struct RawRecord {
    double angle = 0.0;
    std::uint64_t seed = 0;
    Eigen::VectorXd coeffs;  // stacked (re, im)
    double fidelity = 0.0;
    bool converged = false;
};

// A set of columns collapsed into one entity. Output groups track a shared
// per-angle trajectory and contribute one model output; constant groups are
// frozen at their stored mean and contribute none.
struct ReductionGroup {
    std::vector<int> columns;
    double mean = 0.0;
    bool is_output = false;
};

struct ReductionMap {
    int n_columns = 20;
    std::vector<ReductionGroup> groups;  // partition of all columns

    int output_count() const;
    // Indices into groups, one per model output, ordered by smallest member.
    std::vector<int> output_groups() const;
    void validate() const;
};

struct AngleDataset {
    Eigen::VectorXd angles;   // strictly increasing in [-pi, pi]
    Eigen::MatrixXd coeffs;   // n_angles x n_out
    std::vector<Split> split;  // empty until split() tags rows
    std::optional<ReductionMap> reduction;

    Eigen::Index n_angles() const { return angles.size(); }
    Eigen::Index n_out() const { return coeffs.cols(); }
    std::vector<Eigen::Index> rows_with(Split s) const;
    void validate() const;
};

// Per-angle mean over seeds: A_i = (s_i1 + ... + s_ik) / k. Throws when some
// angle is missing seeds that other angles have (a partial checkpoint).
AngleDataset average_over_seeds(const std::vector<RawRecord>& raw);

// Centered moving average per column; the half-width shrinks symmetrically
// near the edges so linear trends pass through unchanged at the endpoints.
AngleDataset smooth(const AngleDataset& ds, int window = 50);

// Sum of |c_{i+1} - c_i| per column.
Eigen::VectorXd total_variation(const AngleDataset& ds);

struct ReducedDataset {
    AngleDataset ds;  // n_out = target columns
    ReductionMap map;
};

// Collapses the 20 columns to `target_outputs` model outputs: near-constant
// columns (max-min below threshold * global scale) freeze to stored means;
// mutually similar varying columns merge into shared-trajectory outputs.
// Throws ReductionError (with the achievable count) when the threshold does
// not land on exactly the target.
ReducedDataset reduce_coefficients(const AngleDataset& ds, double variation_threshold,
                                   int target_outputs = 5);

// Threshold scan wrapper: finds a threshold achieving the target arity.
ReducedDataset reduce_to_target(const AngleDataset& ds, int target_outputs = 5);

// Reconstructs the 20-column vector from model outputs plus stored means.
Eigen::VectorXd expand_coefficients(const Eigen::VectorXd& reduced, const ReductionMap& map);

// Deterministic seeded train/val/test assignment; fractions must sum to 1.
AngleDataset split_dataset(const AngleDataset& ds, double train_frac, double val_frac,
                           double test_frac, std::uint64_t seed);

}  // namespace pulseforge
