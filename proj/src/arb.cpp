#include "pulseforge/arb.hpp"

#include <cmath>
#include <sstream>

#include "pulseforge/errors.hpp"
#include "pulseforge/parallel.hpp"
#include "pulseforge/student_t.hpp"

namespace pulseforge {

ArbConfig::ArbConfig() : lengths(length_range(2, 150, 10)) {}

std::vector<int> length_range(int start, int stop, int step) {
    std::vector<int> out;
    for (int m = start; m < stop; m += step) out.push_back(m);
    return out;
}

void ArbConfig::validate() const {
    if (static_cast<int>(lengths.size()) <= 3)
        throw ValidationError("arb: need more than 3 sequence lengths for positive fit dof");
    for (int m : lengths)
        if (m < 2) throw ValidationError("arb: sequence lengths must be >= 2");
    if (sequences_per_length < 2) throw ValidationError("arb: K must be >= 2");
    if (shots_per_sequence < 1) throw ValidationError("arb: N must be >= 1");
    if (!(alpha_level > 0.0 && alpha_level < 1.0))
        throw ValidationError("arb: alpha level must be in (0, 1)");
}

std::vector<int> sample_sequence(int m, int gate_count, Rng& rng) {
    if (m < 2) throw ValidationError("arb: sequence length must be >= 2");
    if (gate_count < 1) throw ValidationError("arb: gate set must be non-empty");
    std::vector<int> indices(m - 1);
    for (auto& idx : indices) idx = static_cast<int>(rng.below(gate_count));
    return indices;
}

ShotRecord run_sequence(const GateProvider& provider, const std::vector<int>& indices, long shots,
                        Rng& rng, SeConvention convention) {
    const int d = provider.dim();
    Eigen::VectorXcd state = Eigen::VectorXcd::Zero(d);
    state[0] = 1.0;
    double angle_sum = 0.0;
    for (std::size_t pos = 0; pos < indices.size(); ++pos) {
        try {
            state = provider.realize(indices[pos], rng) * state;
        } catch (const std::exception& e) {
            throw NumericError("arb: gate realization failed at sequence position " +
                               std::to_string(pos) + ": " + e.what());
        }
        angle_sum += provider.gate_angle(indices[pos]);
    }
    state = provider.inverse_gate(-angle_sum, rng) * state;
    const double p0 = std::min(1.0, std::max(0.0, std::norm(state[0])));
    const long zeros = rng.binomial(shots, p0);
    return make_shot_record(shots, zeros, convention);
}

double propagate_se(const std::vector<double>& per_sequence_se) {
    double sum_sq = 0.0;
    for (double se : per_sequence_se) sum_sq += se * se;
    return std::sqrt(sum_sq) / static_cast<double>(per_sequence_se.size());
}

ArbResult arb_estimate(const GateProvider& provider, const ArbConfig& cfg, int threads) {
    cfg.validate();
    const Rng root = Rng(cfg.base_seed ^ detail::mix64(provider.stream_salt()));

    ArbResult result;
    result.per_length.resize(cfg.lengths.size());
    const int n_lengths = static_cast<int>(cfg.lengths.size());
    const int k_total = cfg.sequences_per_length;

    // (m, k) pairs flattened so both lengths and sequences share the pool;
    // results land by index, making the reduction order-independent.
    std::vector<std::pair<double, double>> per_k(
        static_cast<std::size_t>(n_lengths) * k_total);
    parallel_for(n_lengths * k_total, threads, [&](int flat) {
        const int mi = flat / k_total;
        const int k = flat % k_total;
        const int m = cfg.lengths[mi];
        Rng rng = root.split(0xa5b, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(k));
        const auto indices = sample_sequence(m, provider.gate_count(), rng);
        const ShotRecord rec =
            run_sequence(provider, indices, cfg.shots_per_sequence, rng, cfg.se_convention);
        per_k[flat] = {rec.p_hat, rec.se};
    });

    for (int mi = 0; mi < n_lengths; ++mi) {
        double sum_p = 0.0;
        std::vector<double> ses(k_total);
        for (int k = 0; k < k_total; ++k) {
            sum_p += per_k[mi * k_total + k].first;
            ses[k] = per_k[mi * k_total + k].second;
        }
        result.per_length[mi] =
            LengthStat{cfg.lengths[mi], sum_p / k_total, propagate_se(ses)};
    }

    Eigen::VectorXd ms(n_lengths), ps(n_lengths), errs(n_lengths);
    for (int mi = 0; mi < n_lengths; ++mi) {
        ms[mi] = result.per_length[mi].m;
        ps[mi] = result.per_length[mi].avg_p;
        errs[mi] = std::max(result.per_length[mi].se, 1e-12);  // guard exact-zero SEs
    }
    try {
        result.fit = fit_decay(ms, ps, errs);
    } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "arb: decay fit failed: " << e.what() << "; per-length table (m, avg_p, se):";
        for (const auto& stat : result.per_length)
            msg << " (" << stat.m << ", " << stat.avg_p << ", " << stat.se << ")";
        throw NumericError(msg.str());
    }
    result.dof = result.fit.dof;
    result.t_crit = student_t_critical(cfg.alpha_level, result.dof);
    result.f_ci = confidence_interval(result.fit.f, result.fit.covariance, result.dof,
                                      cfg.alpha_level);
    return result;
}

GaussianPerturbedProvider::GaussianPerturbedProvider(int n_angles, double sigma,
                                                     std::uint64_t seed, bool noisy_inverse)
    : angles_(angle_grid(n_angles)), sigma_(sigma), seed_(seed), noisy_inverse_(noisy_inverse) {
    if (sigma < 0.0) throw ValidationError("arb: sigma must be non-negative");
}

Eigen::MatrixXcd GaussianPerturbedProvider::realize(int index, Rng& rng) const {
    return rx_unitary(angles_.at(index) + sigma_ * rng.normal()).u;
}

Eigen::MatrixXcd GaussianPerturbedProvider::inverse_gate(double inverse_angle, Rng& rng) const {
    const double noise = noisy_inverse_ ? sigma_ * rng.normal() : 0.0;
    return rx_unitary(inverse_angle + noise).u;
}

ModelProvider::ModelProvider(const MlpModel& model, const ReductionMap& map,
                             const TransmonConfig& config, std::vector<double> gate_angles)
    : model_(model),
      map_(map),
      config_(config),
      basis_(build_basis(map.n_columns / 2, config.duration_ns)),
      angles_(std::move(gate_angles)) {
    if (angles_.empty()) throw ValidationError("arb: model provider needs a non-empty gate set");
    cache_.reserve(angles_.size());
    for (double theta : angles_) cache_.push_back(realize_angle(theta));
}

Eigen::MatrixXcd ModelProvider::realize_angle(double theta) const {
    const Eigen::VectorXd reduced = forward(model_, theta);
    const PulseCoefficients coeffs =
        PulseCoefficients::from_stacked(expand_coefficients(reduced, map_));
    try {
        return evolve(config_, basis_, coeffs).u;
    } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "arb: model gate simulation failed at angle " << theta << ": " << e.what();
        throw NumericError(msg.str());
    }
}

Eigen::MatrixXcd ModelProvider::realize(int index, Rng&) const { return cache_.at(index); }

Eigen::MatrixXcd ModelProvider::inverse_gate(double inverse_angle, Rng&) const {
    return realize_angle(wrap_angle(inverse_angle));
}

double wrap_angle(double theta) {
    double w = std::fmod(theta + M_PI, 2.0 * M_PI);
    if (w < 0.0) w += 2.0 * M_PI;
    return w - M_PI;
}

std::vector<double> angle_grid(int n_angles) {
    if (n_angles < 2) throw ValidationError("arb: angle grid needs at least 2 angles");
    std::vector<double> angles(n_angles);
    for (int i = 0; i < n_angles; ++i)
        angles[i] = -M_PI + 2.0 * M_PI * i / (n_angles - 1);
    return angles;
}

}  // namespace pulseforge
