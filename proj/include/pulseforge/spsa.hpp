#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "pulseforge/arb.hpp"
#include "pulseforge/mlp.hpp"
#include "pulseforge/rng.hpp"
#include "pulseforge/transmon.hpp"

namespace pulseforge {

// Simultaneous perturbation stochastic approximation: every parameter is
// perturbed at once by epsilon with a random sign, so a gradient estimate
// costs two loss evaluations regardless of dimension.
struct SpsaParams {
    double epsilon = 1e-6;
    double learning_rate = 1e-6;  // 0 freezes the model (measurement-only runs)
    int epochs = 0;
    enum class Mode { one_sided, two_sided } mode = Mode::one_sided;

    void validate() const;
};

struct SpsaGradient {
    Eigen::VectorXd grad;
    double loss_at_theta = 0.0;  // base evaluation (one-sided mode only)
    int evaluations = 0;
};

using LossFn = std::function<double(const Eigen::VectorXd&)>;

// g = ((L(theta + eps*Delta) - L(theta)) / eps) * Delta with Delta in
// {+1,-1}^n (Delta is its own element-wise reciprocal). Exactly two loss
// evaluations in either mode.
SpsaGradient spsa_gradient(const LossFn& loss, const Eigen::VectorXd& theta,
                           const SpsaParams& params, Rng& rng);

enum class AngleMode { resample_each_epoch, fixed_grid };
enum class FinetuneLoss { mean_infidelity, arb };

// Fine-tune a bootstrapped model against mismatched physics (e.g. one guard
// level and 10x anharmonicity) with the SPSA update theta <- theta - alpha*g.
struct FinetuneJob {
    MlpModel model;
    ReductionMap map;
    TransmonConfig physics;
    int n_train_angles = 500;
    int batches = 10;
    int n_val_angles = 100;
    AngleMode angle_mode = AngleMode::fixed_grid;
    FinetuneLoss loss = FinetuneLoss::mean_infidelity;
    ArbConfig arb_cfg;  // used in arb mode; callers shrink it to taste
    std::uint64_t seed = 1;
    int threads = 1;
    int patience = 0;  // stop after this many epochs without a val improvement; 0 = off

    void validate() const;
};

struct FinetuneResult {
    MlpModel model;       // best validation checkpoint
    MlpModel final_model;
    std::vector<double> train_loss;  // per-epoch mean over batches
    std::vector<double> val_loss;    // entry 0 is the pre-training loss
    int best_epoch = -1;
    int skipped_batches = 0;  // batches dropped because the simulator failed
};

FinetuneResult finetune(const FinetuneJob& job, const SpsaParams& params);

// Sample variance of successive differences; the instability measure used to
// compare resampled and fixed training sets.
double epoch_to_epoch_variance(const std::vector<double>& series);

}  // namespace pulseforge
