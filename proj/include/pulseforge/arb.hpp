#pragma once

#include <Eigen/Dense>
#include <memory>
#include <utility>
#include <vector>

#include "pulseforge/dataset.hpp"
#include "pulseforge/decay_fit.hpp"
#include "pulseforge/mlp.hpp"
#include "pulseforge/rng.hpp"
#include "pulseforge/transmon.hpp"

namespace pulseforge {

// Adapted randomized benchmarking for non-Clifford Rx gates: random
// sequences of imperfect rotations closed by an inverse rotation, survival
// probability fit to A + B*f^m, with a t-based confidence interval on f.

struct ArbConfig {
    std::vector<int> lengths;            // default range(2, 150, 10)
    int sequences_per_length = 500;      // K
    long shots_per_sequence = 1000;      // N
    double alpha_level = 0.05;
    std::uint64_t base_seed = 1;
    SeConvention se_convention = SeConvention::standard;

    ArbConfig();
    void validate() const;
};

std::vector<int> length_range(int start, int stop, int step);

// A gate set of angles plus the rule realizing each as a unitary. realize()
// may draw noise from the per-sequence stream; implementations must be
// deterministic given (gate index, stream state). The inverse closes the
// sequence with Rx of minus the summed exact angles.
class GateProvider {
public:
    virtual ~GateProvider() = default;
    virtual int dim() const = 0;
    virtual int gate_count() const = 0;
    virtual double gate_angle(int index) const = 0;
    virtual Eigen::MatrixXcd realize(int index, Rng& rng) const = 0;
    virtual Eigen::MatrixXcd inverse_gate(double inverse_angle, Rng& rng) const = 0;
    virtual bool inverse_is_exact() const = 0;
    // Salt folded into every sequence stream so distinct providers with the
    // same ArbConfig do not share noise.
    virtual std::uint64_t stream_salt() const { return 0; }
};

// m-1 gate indices, iid uniform over [0, gate_count).
std::vector<int> sample_sequence(int m, int gate_count, Rng& rng);

// Applies the sequence to |0>, closes with the inverse gate, and measures.
ShotRecord run_sequence(const GateProvider& provider, const std::vector<int>& indices,
                        long shots, Rng& rng, SeConvention convention = SeConvention::standard);

struct LengthStat {
    int m = 0;
    double avg_p = 0.0;
    double se = 0.0;
};

// avg SE over K sequences: sqrt(sum SE_k^2) / K.
double propagate_se(const std::vector<double>& per_sequence_se);

struct ArbResult {
    std::vector<LengthStat> per_length;
    DecayFit fit;
    std::pair<double, double> f_ci{0.0, 0.0};
    double t_crit = 0.0;
    int dof = 0;
};

ArbResult arb_estimate(const GateProvider& provider, const ArbConfig& cfg, int threads = 1);

// Direct 2x2 rotations with angle noise ~ N(0, sigma) drawn fresh at every
// gate use; the inverse uses the exact angle sum (optionally perturbed too).
class GaussianPerturbedProvider final : public GateProvider {
public:
    GaussianPerturbedProvider(int n_angles, double sigma, std::uint64_t seed,
                              bool noisy_inverse = false);
    int dim() const override { return 2; }
    int gate_count() const override { return static_cast<int>(angles_.size()); }
    double gate_angle(int index) const override { return angles_.at(index); }
    Eigen::MatrixXcd realize(int index, Rng& rng) const override;
    Eigen::MatrixXcd inverse_gate(double inverse_angle, Rng& rng) const override;
    bool inverse_is_exact() const override { return !noisy_inverse_; }
    std::uint64_t stream_salt() const override { return seed_; }

private:
    std::vector<double> angles_;
    double sigma_;
    std::uint64_t seed_;
    bool noisy_inverse_;
};

// Gates realized through the full stack: angle -> model -> expanded
// coefficients -> pulse -> simulated unitary. Gate unitaries are cached;
// the inverse is realized the same way from the wrapped angle sum.
class ModelProvider final : public GateProvider {
public:
    ModelProvider(const MlpModel& model, const ReductionMap& map, const TransmonConfig& config,
                  std::vector<double> gate_angles);
    int dim() const override { return config_.dim(); }
    int gate_count() const override { return static_cast<int>(angles_.size()); }
    double gate_angle(int index) const override { return angles_.at(index); }
    Eigen::MatrixXcd realize(int index, Rng& rng) const override;
    Eigen::MatrixXcd inverse_gate(double inverse_angle, Rng& rng) const override;
    bool inverse_is_exact() const override { return false; }

    Eigen::MatrixXcd realize_angle(double theta) const;

private:
    MlpModel model_;
    ReductionMap map_;
    TransmonConfig config_;
    SplineBasis basis_;
    std::vector<double> angles_;
    std::vector<Eigen::MatrixXcd> cache_;
};

// Wraps to [-pi, pi).
double wrap_angle(double theta);

// Uniform gate-set grid over [-pi, pi], endpoints included.
std::vector<double> angle_grid(int n_angles);

}  // namespace pulseforge
