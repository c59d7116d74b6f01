#include "pulseforge/pulse_optim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>

#include "pulseforge/errors.hpp"
#include "pulseforge/io.hpp"
#include "pulseforge/parallel.hpp"
#include "pulseforge/rng.hpp"

namespace pulseforge {

void OptimJob::validate() const {
    if (!(std::abs(theta) <= M_PI + 1e-12))
        throw ValidationError("pulseoptim: |theta| must not exceed pi");
    if (!(target_infidelity > 0.0))
        throw ValidationError("pulseoptim: target infidelity must be positive");
    if (max_iters < 1) throw ValidationError("pulseoptim: max_iters must be >= 1");
}

PulseCoefficients initial_guess(const OptimJob& job, int n_coeff) {
    job.validate();
    const double sign = job.theta > 0.0 ? 1.0 : (job.theta < 0.0 ? -1.0 : 0.0);
    Rng rng = Rng(job.seed).split(0x1297);
    PulseCoefficients coeffs;
    coeffs.re.resize(n_coeff);
    coeffs.im.resize(n_coeff);
    for (int j = 0; j < n_coeff; ++j)
        coeffs.re[j] = sign * job.baseline_amp_mhz +
                       rng.uniform(-0.1, 0.1) * job.baseline_amp_mhz;
    for (int j = 0; j < n_coeff; ++j) coeffs.im[j] = rng.uniform(-0.1, 0.1) * job.baseline_amp_mhz;
    return coeffs;
}

namespace {

// Quadratic penalty beyond the amplitude bound keeps the objective smooth;
// violations at the solution are rejected later by validate_amplitude.
double amplitude_penalty(const Eigen::MatrixXd& samples, const Eigen::VectorXd& c,
                         double max_amp) {
    const Eigen::Index n = samples.rows();
    const Eigen::Index ncoef = samples.cols();
    double pen = 0.0;
    const Eigen::VectorXd us = samples * c.head(ncoef);
    const Eigen::VectorXd vs = samples * c.tail(ncoef);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double over = std::hypot(us[i], vs[i]) - max_amp;
        if (over > 0.0) pen += over * over;
    }
    return 10.0 * pen / static_cast<double>(n);
}

}  // namespace

OptimResult optimize_pulse(const OptimJob& job, const TransmonConfig& config) {
    job.validate();
    config.validate();
    const SplineBasis basis = build_basis(10, config.duration_ns);
    const PulsePropagator prop(config, basis);

    Eigen::VectorXd amp_ts(256);
    for (Eigen::Index i = 0; i < amp_ts.size(); ++i)
        amp_ts[i] = config.duration_ns * i / (amp_ts.size() - 1.0);
    const Eigen::MatrixXd amp_samples = basis_matrix(basis, amp_ts);

    auto objective = [&](const Eigen::VectorXd& c) {
        const PulseCoefficients pc = PulseCoefficients::from_stacked(c);
        const double infid = 1.0 - trace_fidelity(prop.evolve(pc), job.theta);
        return infid + amplitude_penalty(amp_samples, c, config.max_amp_mhz);
    };

    Eigen::VectorXd c = initial_guess(job).stacked();
    double loss = objective(c);
    Eigen::VectorXd best_c = c;
    double best_loss = loss;

    OptimResult result;
    result.best_infidelity.push_back(best_loss);

    const double fd_eps = 1e-4;
    Eigen::VectorXd grad(c.size()), velocity = Eigen::VectorXd::Zero(c.size());
    double lr = 0.0;  // calibrated from the first gradient
    const double momentum = 0.85;

    int iter = 0;
    for (; iter < job.max_iters && best_loss > job.target_infidelity; ++iter) {
        for (Eigen::Index j = 0; j < c.size(); ++j) {
            Eigen::VectorXd probe = c;
            probe[j] = c[j] + fd_eps;
            const double up = objective(probe);
            probe[j] = c[j] - fd_eps;
            const double down = objective(probe);
            grad[j] = (up - down) / (2.0 * fd_eps);
        }
        const double gmax = grad.lpNorm<Eigen::Infinity>();
        if (gmax < 1e-16) break;  // flat to machine precision
        if (lr == 0.0) lr = 0.25 / gmax;

        velocity = momentum * velocity - lr * grad;
        const Eigen::VectorXd trial = c + velocity;
        const double trial_loss = objective(trial);
        if (trial_loss <= loss) {
            c = trial;
            loss = trial_loss;
            lr = std::min(lr * 1.15, 1e4);
        } else {
            velocity.setZero();
            lr *= 0.5;
            if (lr < 1e-12) {
                result.best_infidelity.push_back(best_loss);
                ++iter;
                break;
            }
        }
        if (trial_loss < best_loss) {
            best_loss = trial_loss;
            best_c = trial;
        }
        result.best_infidelity.push_back(best_loss);
    }

    result.coeffs = PulseCoefficients::from_stacked(best_c);
    result.fidelity = trace_fidelity(prop.evolve(result.coeffs), job.theta);
    result.converged = best_loss <= job.target_infidelity;
    result.iterations = iter;
    return result;
}

std::uint64_t dataset_job_seed(std::uint64_t base_seed, int angle_index, int seed_index) {
    return detail::mix64(detail::mix64(base_seed ^ detail::mix64(angle_index)) ^
                         detail::mix64(static_cast<std::uint64_t>(seed_index) + 0x9131));
}

std::vector<RawRecord> generate_raw_dataset(const DatasetGenOptions& opts,
                                            const TransmonConfig& config,
                                            const std::string& csv_path) {
    if (opts.n_angles < 2) throw ValidationError("pulseoptim: need at least 2 angles");
    if (opts.n_seeds < 1) throw ValidationError("pulseoptim: need at least 1 seed");
    config.validate();

    // A job is identified by its derived seed; rows already in the file are
    // kept as-is, which makes an interrupted run resumable.
    std::map<std::uint64_t, RawRecord> done;
    const bool file_exists = std::filesystem::exists(csv_path);
    if (file_exists)
        for (auto& rec : load_raw_records(csv_path)) done.emplace(rec.seed, std::move(rec));

    struct JobRef {
        int angle_index;
        int seed_index;
        double angle;
        std::uint64_t seed;
    };
    std::vector<JobRef> jobs;
    for (int ai = 0; ai < opts.n_angles; ++ai) {
        const double angle = -M_PI + 2.0 * M_PI * ai / (opts.n_angles - 1);
        for (int si = 0; si < opts.n_seeds; ++si) {
            const std::uint64_t seed = dataset_job_seed(opts.base_seed, ai, si);
            if (!done.count(seed)) jobs.push_back(JobRef{ai, si, angle, seed});
        }
    }

    bool header_needed = !file_exists;
    const int batch = std::max(1, resolve_threads(opts.threads) * 4);
    for (std::size_t at = 0; at < jobs.size(); at += batch) {
        const std::size_t end = std::min(jobs.size(), at + batch);
        std::vector<RawRecord> batch_records(end - at);
        parallel_for(static_cast<int>(end - at), opts.threads, [&](int i) {
            const JobRef& ref = jobs[at + i];
            OptimJob job;
            job.theta = ref.angle;
            job.seed = ref.seed;
            job.baseline_amp_mhz = opts.baseline_amp_mhz;
            job.max_iters = opts.max_iters;
            job.target_infidelity = opts.target_infidelity;
            const OptimResult res = optimize_pulse(job, config);
            RawRecord rec;
            rec.angle = ref.angle;
            rec.seed = ref.seed;
            rec.coeffs = res.coeffs.stacked();
            rec.fidelity = res.fidelity;
            rec.converged = res.converged;
            batch_records[i] = std::move(rec);
        });
        append_raw_records(csv_path, batch_records, header_needed);
        header_needed = false;
        for (auto& rec : batch_records) done.emplace(rec.seed, std::move(rec));
    }

    // Hand back in grid order.
    std::vector<RawRecord> out;
    out.reserve(static_cast<std::size_t>(opts.n_angles) * opts.n_seeds);
    for (int ai = 0; ai < opts.n_angles; ++ai)
        for (int si = 0; si < opts.n_seeds; ++si) {
            const auto it = done.find(dataset_job_seed(opts.base_seed, ai, si));
            if (it == done.end())
                throw ValidationError("pulseoptim: missing record after generation");
            out.push_back(it->second);
        }
    return out;
}

}  // namespace pulseforge
