#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "pulseforge/dataset.hpp"
#include "pulseforge/spline.hpp"
#include "pulseforge/transmon.hpp"

namespace pulseforge {

// Fixed-point format for quantization-aware behavior: W total bits, I of
// them integer, signed two's complement, so the grid step is 2^-(W-I).
// qnoise_factor blends between float (0) and fully quantized (1) values;
// alpha_neg is the deployed leaky-rectifier slope for negative inputs.
struct FixedPointFormat {
    int total_bits = 16;
    int integer_bits = 5;
    double alpha_neg = 1.0;
    double qnoise_factor = 1.0;

    double step() const;
    double grid_min() const;
    double grid_max() const;
    void validate() const;
};

double quantize(double x, const FixedPointFormat& fmt);

// Angle -> coefficients multilayer perceptron. Hidden layers use a leaky
// rectifier with slope hidden_alpha for negative inputs, the output layer is
// linear. When quant is set, weights, biases, and activations pass through
// quantize() in the forward pass.
struct MlpModel {
    std::vector<int> layer_sizes{1, 4, 5};
    std::vector<Eigen::MatrixXd> weights;  // weights[l] is (out x in)
    std::vector<Eigen::VectorXd> biases;
    double hidden_alpha = 1.0;
    std::optional<FixedPointFormat> quant;

    int parameter_count() const;
    int n_outputs() const { return layer_sizes.back(); }
    void validate() const;

    Eigen::VectorXd flatten_parameters() const;
    void set_parameters(const Eigen::VectorXd& theta);
};

int parameter_count(const std::vector<int>& layer_sizes);

// Seeded uniform Glorot-style initialization.
MlpModel make_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed,
                  double hidden_alpha = 1.0);

Eigen::VectorXd forward(const MlpModel& model, double angle);

struct MseTrainResult {
    MlpModel model;          // best validation checkpoint
    MlpModel final_model;    // parameters after the last completed epoch
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int best_epoch = -1;
    bool diverged = false;
};

// Full-batch gradient descent on mean squared error with analytic backprop.
// Quantized models train with a straight-through estimator: the forward pass
// sees quantized values, gradients update the float master weights.
MseTrainResult train_mse(const MlpModel& model, const AngleDataset& ds, int epochs, double lr);

// Everything infidelity training needs to reach the simulator.
struct SimContext {
    ReductionMap map;
    TransmonConfig config;
    int threads = 1;
};

// Per-angle infidelities 1 - F(evolve(expand(row)), angle), fanned out over
// threads and reduced in angle order.
Eigen::VectorXd infidelity_loss(const Eigen::VectorXd& angles, const Eigen::MatrixXd& coeff_rows,
                                const SimContext& ctx);

double mean_model_infidelity(const MlpModel& model, const Eigen::VectorXd& angles,
                             const SimContext& ctx);

struct InfidGrad {
    Eigen::VectorXd grad;
    double base_loss = 0.0;
};

// One-sided finite difference over every parameter: g_j = (L(w + eps e_j) -
// L(w)) / eps with L the mean infidelity over the given angles. central=true
// is the test oracle variant.
InfidGrad infid_grad(const Eigen::VectorXd& angles, const MlpModel& model, double epsilon,
                     const SimContext& ctx, bool central = false);

struct InfidTrainOptions {
    int epochs = 10;
    double lr = 1e-3;
    int batch_size = 16;
    double epsilon = 1e-6;
    std::uint64_t seed = 1;
    int start_epoch = 0;  // offset for resumed runs so streams line up
};

struct InfidTrainResult {
    MlpModel model;        // checkpoint with the best epoch loss
    MlpModel final_model;
    std::vector<double> epoch_loss;
    int best_epoch = -1;
    bool aborted = false;  // a simulator failure ended training early
    std::string abort_reason;
};

// The simulation-in-the-loop refinement stage: per batch, estimate the
// gradient by finite differences and take an SGD step; checkpoint per epoch.
InfidTrainResult train_infidelity(const MlpModel& model, const AngleDataset& reduced_ds,
                                  const InfidTrainOptions& opts, const SimContext& ctx);

struct QuantizeReport {
    MlpModel model;
    long saturated = 0;  // weights clamped to the grid edge
};

// Snaps weights onto the fixed-point grid and switches the forward pass to
// quantized arithmetic.
QuantizeReport quantize_model(const MlpModel& model, const FixedPointFormat& fmt);

}  // namespace pulseforge
