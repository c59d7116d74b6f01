#include "pulseforge/spsa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pulseforge/errors.hpp"

namespace pulseforge {

void SpsaParams::validate() const {
    if (!(epsilon > 0.0)) throw ValidationError("spsatune: epsilon must be positive");
    if (!(learning_rate >= 0.0))
        throw ValidationError("spsatune: learning rate must be non-negative");
    if (epochs < 0) throw ValidationError("spsatune: epochs must be non-negative");
}

SpsaGradient spsa_gradient(const LossFn& loss, const Eigen::VectorXd& theta,
                           const SpsaParams& params, Rng& rng) {
    params.validate();
    const Eigen::Index n = theta.size();
    Eigen::VectorXd delta(n);
    for (Eigen::Index i = 0; i < n; ++i) delta[i] = rng.next_u64() & 1 ? 1.0 : -1.0;

    SpsaGradient result;
    double directional;
    if (params.mode == SpsaParams::Mode::one_sided) {
        const double up = loss(theta + params.epsilon * delta);
        const double base = loss(theta);
        result.loss_at_theta = base;
        directional = (up - base) / params.epsilon;
        result.evaluations = 2;
    } else {
        const double up = loss(theta + params.epsilon * delta);
        const double down = loss(theta - params.epsilon * delta);
        result.loss_at_theta = 0.5 * (up + down);
        directional = (up - down) / (2.0 * params.epsilon);
        result.evaluations = 2;
    }
    if (!std::isfinite(directional))
        throw NumericError("spsatune: non-finite loss in gradient evaluation");
    result.grad = directional * delta;  // Delta^-1 == Delta for sign vectors
    return result;
}

void FinetuneJob::validate() const {
    model.validate();
    map.validate();
    physics.validate();
    if (n_train_angles < 1 || n_val_angles < 1)
        throw ValidationError("spsatune: need at least one training and one validation angle");
    if (batches < 1 || batches > n_train_angles)
        throw ValidationError("spsatune: batches must be in [1, n_train_angles]");
    if (model.n_outputs() != map.output_count())
        throw ValidationError("spsatune: model outputs do not match reduction map");
}

namespace {

Eigen::VectorXd sampled_angles(int n, Rng rng) {
    Eigen::VectorXd angles(n);
    for (int i = 0; i < n; ++i) angles[i] = rng.uniform(-M_PI, M_PI);
    std::sort(angles.begin(), angles.end());
    return angles;
}

Eigen::VectorXd grid_angles(int n) {
    Eigen::VectorXd angles(n);
    for (int i = 0; i < n; ++i)
        angles[i] = n == 1 ? 0.0 : -M_PI + 2.0 * M_PI * i / (n - 1.0);
    return angles;
}

double model_loss(const FinetuneJob& job, const MlpModel& model, const Eigen::VectorXd& angles,
                  int epoch_salt) {
    const SimContext ctx{job.map, job.physics, job.threads};
    if (job.loss == FinetuneLoss::mean_infidelity)
        return mean_model_infidelity(model, angles, ctx);
    std::vector<double> gate_angles(angles.data(), angles.data() + angles.size());
    ModelProvider provider(model, job.map, job.physics, gate_angles);
    ArbConfig cfg = job.arb_cfg;
    cfg.base_seed = detail::mix64(job.seed ^ static_cast<std::uint64_t>(epoch_salt));
    const ArbResult res = arb_estimate(provider, cfg, job.threads);
    return 1.0 - res.fit.f;
}

}  // namespace

FinetuneResult finetune(const FinetuneJob& job, const SpsaParams& params) {
    job.validate();
    params.validate();

    const Rng root(job.seed);
    const Eigen::VectorXd val_angles = sampled_angles(job.n_val_angles, root.split(0x7a1));
    const Eigen::VectorXd fixed_train = grid_angles(job.n_train_angles);

    MlpModel current = job.model;
    FinetuneResult result;
    result.model = current;
    result.val_loss.push_back(model_loss(job, current, val_angles, -1));
    result.best_epoch = 0;
    double best_val = result.val_loss.back();
    int epochs_since_best = 0;

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        const Eigen::VectorXd train_angles =
            job.angle_mode == AngleMode::fixed_grid
                ? fixed_train
                : sampled_angles(job.n_train_angles, root.split(0x5a3, epoch));

        // Even batch split (sizes differ by at most 1).
        const int n = job.n_train_angles;
        double epoch_loss = 0.0;
        int good_batches = 0;
        int offset = 0;
        Rng epoch_rng = root.split(0x9e1, epoch);
        for (int b = 0; b < job.batches; ++b) {
            const int size = n / job.batches + (b < n % job.batches ? 1 : 0);
            const Eigen::VectorXd batch = train_angles.segment(offset, size);
            offset += size;

            auto loss_fn = [&](const Eigen::VectorXd& theta) {
                MlpModel probe = current;
                probe.set_parameters(theta);
                return model_loss(job, probe, batch, epoch);
            };
            try {
                const SpsaGradient g =
                    spsa_gradient(loss_fn, current.flatten_parameters(), params, epoch_rng);
                current.set_parameters(current.flatten_parameters() -
                                       params.learning_rate * g.grad);
                epoch_loss += g.loss_at_theta;
                ++good_batches;
            } catch (const NumericError&) {
                ++result.skipped_batches;
            }
        }
        result.train_loss.push_back(
            good_batches > 0 ? epoch_loss / good_batches
                             : std::numeric_limits<double>::quiet_NaN());

        const double vl = model_loss(job, current, val_angles, epoch);
        result.val_loss.push_back(vl);
        if (vl < best_val) {
            best_val = vl;
            result.model = current;
            result.best_epoch = epoch + 1;
            epochs_since_best = 0;
        } else if (job.patience > 0 && ++epochs_since_best >= job.patience) {
            break;
        }
    }
    result.final_model = params.epochs > 0 ? current : job.model;
    return result;
}

double epoch_to_epoch_variance(const std::vector<double>& series) {
    if (series.size() < 3)
        throw ValidationError("spsatune: variance needs at least 3 epochs of losses");
    std::vector<double> diffs;
    for (std::size_t i = 1; i < series.size(); ++i) diffs.push_back(series[i] - series[i - 1]);
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= diffs.size();
    double var = 0.0;
    for (double d : diffs) var += (d - mean) * (d - mean);
    return var / (diffs.size() - 1);
}

}  // namespace pulseforge
