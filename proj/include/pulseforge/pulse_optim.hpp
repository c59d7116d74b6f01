#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pulseforge/dataset.hpp"
#include "pulseforge/spline.hpp"
#include "pulseforge/transmon.hpp"

namespace pulseforge {

// One pulse-synthesis task: optimize the 20 B-spline coefficients so the
// simulated gate matches Rx(theta). The initial guess carries a fixed
// positive or negative baseline chosen by the sign of theta, which keeps the
// optimized coefficient sign consistent across the angle range.
struct OptimJob {
    double theta = 0.0;           // radians, |theta| <= pi
    std::uint64_t seed = 0;
    double baseline_amp_mhz = 2.0;
    int max_iters = 400;
    double target_infidelity = 1e-4;

    void validate() const;
};

// re_j = sign(theta) * baseline + uniform(-0.1, 0.1) * baseline per
// coefficient; im_j carries the seeded noise only.
PulseCoefficients initial_guess(const OptimJob& job, int n_coeff = 10);

struct OptimResult {
    PulseCoefficients coeffs;
    double fidelity = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> best_infidelity;  // running best per iteration, non-increasing
};

// Gradient descent with momentum on 1 - trace_fidelity plus a quadratic
// amplitude penalty beyond the bound; gradients are central finite
// differences over the 20 coefficients (40 simulations per iteration).
OptimResult optimize_pulse(const OptimJob& job, const TransmonConfig& config);

// Per-job deterministic seed stream for the dataset generator.
std::uint64_t dataset_job_seed(std::uint64_t base_seed, int angle_index, int seed_index);

struct DatasetGenOptions {
    int n_angles = 64;
    int n_seeds = 5;
    std::uint64_t base_seed = 1;
    double baseline_amp_mhz = 2.0;
    int max_iters = 400;
    double target_infidelity = 1e-4;
    int threads = 1;
};

// Uniform angle grid on [-pi, pi] times n_seeds jobs; rows append to the CSV
// as they complete (in order), and rows already present are not recomputed,
// so an interrupted run resumes from its own output file.
std::vector<RawRecord> generate_raw_dataset(const DatasetGenOptions& opts,
                                            const TransmonConfig& config,
                                            const std::string& csv_path);

}  // namespace pulseforge
