#include "pulseforge/mlp.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "pulseforge/errors.hpp"
#include "pulseforge/parallel.hpp"
#include "pulseforge/rng.hpp"

namespace pulseforge {

double FixedPointFormat::step() const { return std::ldexp(1.0, integer_bits - total_bits); }
double FixedPointFormat::grid_min() const { return -std::ldexp(1.0, integer_bits - 1); }
double FixedPointFormat::grid_max() const { return std::ldexp(1.0, integer_bits - 1) - step(); }

void FixedPointFormat::validate() const {
    if (!(1 <= integer_bits && integer_bits < total_bits && total_bits <= 64))
        throw ValidationError("gatenet: fixed-point format requires 1 <= I < W <= 64");
    if (!(qnoise_factor >= 0.0 && qnoise_factor <= 1.0))
        throw ValidationError("gatenet: qnoise_factor must lie in [0, 1]");
}

double quantize(double x, const FixedPointFormat& fmt) {
    const double s = fmt.step();
    double grid = std::round(x / s) * s;
    grid = std::min(fmt.grid_max(), std::max(fmt.grid_min(), grid));  // saturating clamp
    return x + fmt.qnoise_factor * (grid - x);
}

int parameter_count(const std::vector<int>& layer_sizes) {
    if (layer_sizes.size() < 2) throw ValidationError("gatenet: need at least input and output layers");
    int count = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        if (layer_sizes[l] < 1 || layer_sizes[l + 1] < 1)
            throw ValidationError("gatenet: layer sizes must be positive");
        count += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
    }
    return count;
}

int MlpModel::parameter_count() const { return pulseforge::parameter_count(layer_sizes); }

void MlpModel::validate() const {
    if (weights.size() + 1 != layer_sizes.size() || biases.size() != weights.size())
        throw ValidationError("gatenet: weight/bias arity does not match layer sizes");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
            biases[l].size() != layer_sizes[l + 1])
            throw ValidationError("gatenet: weight matrix shape mismatch at layer " +
                                  std::to_string(l));
    }
    if (quant) quant->validate();
}

Eigen::VectorXd MlpModel::flatten_parameters() const {
    Eigen::VectorXd theta(parameter_count());
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < weights[l].cols(); ++c) theta[at++] = weights[l](r, c);
        for (Eigen::Index r = 0; r < biases[l].size(); ++r) theta[at++] = biases[l][r];
    }
    return theta;
}

void MlpModel::set_parameters(const Eigen::VectorXd& theta) {
    if (theta.size() != parameter_count())
        throw ValidationError("gatenet: parameter vector has wrong length");
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < weights[l].cols(); ++c) weights[l](r, c) = theta[at++];
        for (Eigen::Index r = 0; r < biases[l].size(); ++r) biases[l][r] = theta[at++];
    }
}

MlpModel make_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed, double hidden_alpha) {
    parameter_count(layer_sizes);  // validates shape
    MlpModel model;
    model.layer_sizes = layer_sizes;
    model.hidden_alpha = hidden_alpha;
    Rng rng = Rng(seed).split(0x1417);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int in = layer_sizes[l], out = layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / (in + out));
        Eigen::MatrixXd w(out, in);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
        model.weights.push_back(std::move(w));
        model.biases.push_back(Eigen::VectorXd::Zero(out));
    }
    return model;
}

namespace {

double leaky(double z, double alpha) { return z >= 0.0 ? z : alpha * z; }
double leaky_grad(double z, double alpha) { return z >= 0.0 ? 1.0 : alpha; }

struct ForwardTrace {
    std::vector<Eigen::VectorXd> inputs;   // activation fed into each layer
    std::vector<Eigen::VectorXd> pre;      // pre-activation per layer
    Eigen::VectorXd output;
};

ForwardTrace forward_trace(const MlpModel& model, double angle) {
    const bool q = model.quant.has_value();
    auto maybe_q = [&](const Eigen::VectorXd& v) {
        if (!q) return v;
        Eigen::VectorXd out = v;
        for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = quantize(out[i], *model.quant);
        return out;
    };

    ForwardTrace trace;
    Eigen::VectorXd a(1);
    a << angle;
    a = maybe_q(a);
    const std::size_t n_layers = model.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd w = model.weights[l];
        Eigen::VectorXd b = model.biases[l];
        if (q) {
            for (Eigen::Index r = 0; r < w.rows(); ++r) {
                for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = quantize(w(r, c), *model.quant);
                b[r] = quantize(b[r], *model.quant);
            }
        }
        trace.inputs.push_back(a);
        Eigen::VectorXd z = w * a + b;
        trace.pre.push_back(z);
        if (l + 1 < n_layers) {
            a = z.unaryExpr([&](double v) { return leaky(v, model.hidden_alpha); });
            a = maybe_q(a);
        } else {
            a = z;  // linear output layer: pulse coefficients are signed reals
        }
    }
    trace.output = a;
    return trace;
}

}  // namespace

Eigen::VectorXd forward(const MlpModel& model, double angle) {
    model.validate();
    return forward_trace(model, angle).output;
}

namespace {

double dataset_mse(const MlpModel& model, const AngleDataset& ds,
                   const std::vector<Eigen::Index>& rows) {
    double total = 0.0;
    for (const auto i : rows) {
        const Eigen::VectorXd pred = forward_trace(model, ds.angles[i]).output;
        total += (pred - ds.coeffs.row(i).transpose()).squaredNorm() / pred.size();
    }
    return total / static_cast<double>(rows.size());
}

// Gradient of the mean squared error over the given rows. Quantized models
// use the straight-through estimator: quantized values in the forward pass,
// identity in the backward pass.
void mse_gradient(const MlpModel& model, const AngleDataset& ds,
                  const std::vector<Eigen::Index>& rows, std::vector<Eigen::MatrixXd>& grad_w,
                  std::vector<Eigen::VectorXd>& grad_b) {
    const std::size_t n_layers = model.weights.size();
    grad_w.clear();
    grad_b.clear();
    for (std::size_t l = 0; l < n_layers; ++l) {
        grad_w.emplace_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
        grad_b.emplace_back(Eigen::VectorXd::Zero(model.biases[l].size()));
    }
    for (const auto i : rows) {
        const ForwardTrace trace = forward_trace(model, ds.angles[i]);
        Eigen::VectorXd delta =
            2.0 * (trace.output - ds.coeffs.row(i).transpose()) / trace.output.size();
        for (std::size_t l = n_layers; l-- > 0;) {
            if (l + 1 < n_layers) {
                Eigen::VectorXd dact = trace.pre[l].unaryExpr(
                    [&](double z) { return leaky_grad(z, model.hidden_alpha); });
                delta = delta.cwiseProduct(dact);
            }
            grad_w[l] += delta * trace.inputs[l].transpose();
            grad_b[l] += delta;
            if (l > 0) delta = model.weights[l].transpose() * delta;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    for (std::size_t l = 0; l < n_layers; ++l) {
        grad_w[l] *= inv_n;
        grad_b[l] *= inv_n;
    }
}

}  // namespace

MseTrainResult train_mse(const MlpModel& model, const AngleDataset& ds, int epochs, double lr) {
    model.validate();
    ds.validate();
    if (ds.n_out() != model.n_outputs())
        throw ValidationError("gatenet: dataset arity does not match model outputs");

    std::vector<Eigen::Index> train_rows, val_rows;
    if (ds.split.empty()) {
        train_rows.resize(ds.n_angles());
        std::iota(train_rows.begin(), train_rows.end(), 0);
        val_rows = train_rows;
    } else {
        train_rows = ds.rows_with(Split::train);
        val_rows = ds.rows_with(Split::val);
        if (train_rows.empty() || val_rows.empty())
            throw ValidationError("gatenet: train_mse needs non-empty train and val splits");
    }

    MseTrainResult result;
    MlpModel current = model;
    result.train_loss.push_back(dataset_mse(current, ds, train_rows));
    result.val_loss.push_back(dataset_mse(current, ds, val_rows));
    result.model = current;
    result.best_epoch = 0;
    double best_val = result.val_loss.back();

    std::vector<Eigen::MatrixXd> gw;
    std::vector<Eigen::VectorXd> gb;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        mse_gradient(current, ds, train_rows, gw, gb);
        for (std::size_t l = 0; l < current.weights.size(); ++l) {
            current.weights[l] -= lr * gw[l];
            current.biases[l] -= lr * gb[l];
        }
        const double tl = dataset_mse(current, ds, train_rows);
        const double vl = dataset_mse(current, ds, val_rows);
        if (!std::isfinite(tl) || !std::isfinite(vl)) {
            result.diverged = true;  // keep the last good checkpoint
            break;
        }
        result.train_loss.push_back(tl);
        result.val_loss.push_back(vl);
        if (vl < best_val) {
            best_val = vl;
            result.model = current;
            result.best_epoch = epoch;
        }
    }
    result.final_model = result.diverged ? result.model : current;
    return result;
}

Eigen::VectorXd infidelity_loss(const Eigen::VectorXd& angles, const Eigen::MatrixXd& coeff_rows,
                                const SimContext& ctx) {
    if (coeff_rows.rows() != angles.size())
        throw ValidationError("gatenet: coefficient rows must match angle count");
    const SplineBasis basis = build_basis(ctx.map.n_columns / 2, ctx.config.duration_ns);
    Eigen::VectorXd out(angles.size());
    parallel_for(static_cast<int>(angles.size()), ctx.threads, [&](int i) {
        try {
            const PulseCoefficients pc =
                PulseCoefficients::from_stacked(coeff_rows.row(i).transpose());
            const GateUnitary u = evolve(ctx.config, basis, pc);
            out[i] = 1.0 - trace_fidelity(u, angles[i]);
        } catch (const std::exception& e) {
            throw NumericError("gatenet: simulation failed at angle index " + std::to_string(i) +
                               ": " + e.what());
        }
    });
    return out;
}

namespace {

Eigen::MatrixXd predict_rows(const MlpModel& model, const Eigen::VectorXd& angles,
                             const ReductionMap& map) {
    Eigen::MatrixXd rows(angles.size(), map.n_columns);
    for (Eigen::Index i = 0; i < angles.size(); ++i)
        rows.row(i) = expand_coefficients(forward_trace(model, angles[i]).output, map).transpose();
    return rows;
}

}  // namespace

double mean_model_infidelity(const MlpModel& model, const Eigen::VectorXd& angles,
                             const SimContext& ctx) {
    return infidelity_loss(angles, predict_rows(model, angles, ctx.map), ctx).mean();
}

InfidGrad infid_grad(const Eigen::VectorXd& angles, const MlpModel& model, double epsilon,
                     const SimContext& ctx, bool central) {
    if (epsilon == 0.0) throw ValidationError("gatenet: epsilon must be nonzero");
    MlpModel probe = model;
    const Eigen::VectorXd theta = model.flatten_parameters();
    InfidGrad result;
    result.base_loss = mean_model_infidelity(model, angles, ctx);
    result.grad.resize(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        Eigen::VectorXd t = theta;
        t[j] += epsilon;
        probe.set_parameters(t);
        const double up = mean_model_infidelity(probe, angles, ctx);
        if (central) {
            t[j] = theta[j] - epsilon;
            probe.set_parameters(t);
            const double down = mean_model_infidelity(probe, angles, ctx);
            result.grad[j] = (up - down) / (2.0 * epsilon);
        } else {
            result.grad[j] = (up - result.base_loss) / epsilon;
        }
    }
    return result;
}

InfidTrainResult train_infidelity(const MlpModel& model, const AngleDataset& reduced_ds,
                                  const InfidTrainOptions& opts, const SimContext& ctx) {
    model.validate();
    reduced_ds.validate();
    std::vector<Eigen::Index> train_rows;
    if (reduced_ds.split.empty()) {
        train_rows.resize(reduced_ds.n_angles());
        std::iota(train_rows.begin(), train_rows.end(), 0);
    } else {
        train_rows = reduced_ds.rows_with(Split::train);
    }
    if (train_rows.empty()) throw ValidationError("gatenet: no training rows");

    InfidTrainResult result;
    MlpModel current = model;
    result.model = current;
    double best = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        Rng rng = Rng(opts.seed).split(0xba7c, static_cast<std::uint64_t>(opts.start_epoch + epoch));
        std::vector<Eigen::Index> order = train_rows;
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[rng.below(i + 1)]);

        // A simulator failure aborts the epoch; the pre-epoch parameters and
        // the best checkpoint so far survive.
        const MlpModel epoch_start = current;
        double epoch_loss = 0.0;
        int n_batches = 0;
        try {
            for (std::size_t at = 0; at < order.size(); at += opts.batch_size) {
                const std::size_t end = std::min(order.size(), at + opts.batch_size);
                Eigen::VectorXd batch_angles(static_cast<Eigen::Index>(end - at));
                for (std::size_t i = at; i < end; ++i)
                    batch_angles[static_cast<Eigen::Index>(i - at)] = reduced_ds.angles[order[i]];
                const InfidGrad g = infid_grad(batch_angles, current, opts.epsilon, ctx);
                Eigen::VectorXd theta = current.flatten_parameters();
                theta -= opts.lr * g.grad;
                current.set_parameters(theta);
                epoch_loss += g.base_loss;
                ++n_batches;
            }
        } catch (const NumericError& e) {
            current = epoch_start;
            result.aborted = true;
            result.abort_reason = e.what();
            break;
        }
        epoch_loss /= n_batches;
        result.epoch_loss.push_back(epoch_loss);
        if (epoch_loss < best) {
            best = epoch_loss;
            result.model = current;
            result.best_epoch = epoch;
        }
    }
    result.final_model = opts.epochs > 0 ? current : model;
    if (opts.epochs == 0) result.model = model;
    return result;
}

QuantizeReport quantize_model(const MlpModel& model, const FixedPointFormat& fmt) {
    model.validate();
    fmt.validate();
    QuantizeReport report;
    report.model = model;
    report.model.quant = fmt;
    report.model.hidden_alpha = fmt.alpha_neg;
    auto snap = [&](double& x) {
        if (x < fmt.grid_min() || x > fmt.grid_max()) ++report.saturated;
        x = quantize(x, fmt);
    };
    for (std::size_t l = 0; l < report.model.weights.size(); ++l) {
        for (Eigen::Index r = 0; r < report.model.weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < report.model.weights[l].cols(); ++c)
                snap(report.model.weights[l](r, c));
        for (Eigen::Index r = 0; r < report.model.biases[l].size(); ++r)
            snap(report.model.biases[l][r]);
    }
    return report;
}

}  // namespace pulseforge
