#include "pulseforge/transmon.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <sstream>

#include "pulseforge/errors.hpp"

namespace pulseforge {

using std::complex;

void TransmonConfig::validate() const {
    if (dim() < 2) throw ValidationError("qusim: need at least the two computational levels");
    if (guard_levels < 0) throw ValidationError("qusim: guard_levels must be non-negative");
    if (!(dt_ns > 0.0)) throw ValidationError("qusim: dt must be positive");
    if (!(duration_ns > 0.0)) throw ValidationError("qusim: duration must be positive");
    if (duration_ns / dt_ns < 500.0 - 1e-9)
        throw ValidationError("qusim: resolution floor violated, duration/dt must be >= 500");
    if (!(anharmonicity_mhz > 0.0)) throw ValidationError("qusim: anharmonicity must be positive");
    if (!(max_amp_mhz > 0.0)) throw ValidationError("qusim: max_amp must be positive");
}

double suggested_dt(const TransmonConfig& config) {
    const int d = config.dim();
    const double drift_rate =
        kRadPerNsPerMhz * 0.5 * config.anharmonicity_mhz * (d - 1) * (d - 2);
    const double drive_rate = kRadPerNsPerMhz * config.max_amp_mhz;
    const double rate = drift_rate + drive_rate;
    const double steps = std::max(2000.0, std::ceil(config.duration_ns * rate / 0.05));
    return config.duration_ns / steps;
}

TransmonConfig load_transmon_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("qusim: cannot open config file " + path);
    std::map<std::string, double> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        double value;
        if (!(ls >> key)) continue;
        if (key.front() == '[') continue;  // section marker, purely cosmetic
        if (!(ls >> value)) throw ValidationError("qusim: bad config line: " + line);
        kv[key] = value;
    }
    TransmonConfig cfg;
    for (const auto& [key, value] : kv) {
        if (key == "anharmonicity_mhz")
            cfg.anharmonicity_mhz = value;
        else if (key == "guard_levels")
            cfg.guard_levels = static_cast<int>(value);
        else if (key == "duration_ns")
            cfg.duration_ns = value;
        else if (key == "max_amp_mhz")
            cfg.max_amp_mhz = value;
        else if (key == "dt_ns")
            cfg.dt_ns = value;
        else
            throw ValidationError("qusim: unknown config key " + key);
    }
    cfg.validate();
    return cfg;
}

void save_transmon_config(const TransmonConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("qusim: cannot write config file " + path);
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "[transmon]\n"
                  "anharmonicity_mhz %.17g\n"
                  "guard_levels %d\n"
                  "duration_ns %.17g\n"
                  "max_amp_mhz %.17g\n"
                  "dt_ns %.17g\n",
                  config.anharmonicity_mhz, config.guard_levels, config.duration_ns,
                  config.max_amp_mhz, config.dt_ns);
    out << buf;
}

namespace {

// RK4 on the propagator with fixed-size matrices for the hot 2- and 3-level
// cases. Envelope values arrive on the half-step grid: node 2j is t_j,
// node 2j+1 the midpoint.
template <typename Mat>
Mat rk4_propagate(const Eigen::MatrixXcd& m_drift, const Eigen::MatrixXcd& m_x,
                  const Eigen::MatrixXcd& m_y, const Eigen::VectorXd& us,
                  const Eigen::VectorXd& vs, int n_steps, double dt) {
    const int d = static_cast<int>(m_drift.rows());
    Mat drift = m_drift, mx = m_x, my = m_y;
    Mat u = Mat::Identity(d, d);
    Mat m0(d, d), mh(d, d), m1(d, d), k1(d, d), k2(d, d), k3(d, d), k4(d, d);
    for (int s = 0; s < n_steps; ++s) {
        m0 = drift + us[2 * s] * mx + vs[2 * s] * my;
        mh = drift + us[2 * s + 1] * mx + vs[2 * s + 1] * my;
        m1 = drift + us[2 * s + 2] * mx + vs[2 * s + 2] * my;
        k1.noalias() = m0 * u;
        k2.noalias() = mh * (u + (0.5 * dt) * k1);
        k3.noalias() = mh * (u + (0.5 * dt) * k2);
        k4.noalias() = m1 * (u + dt * k3);
        u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return u;
}

}  // namespace

PulsePropagator::PulsePropagator(const TransmonConfig& config, const SplineBasis& basis)
    : config_(config) {
    config.validate();
    n_steps_ = static_cast<int>(std::ceil(config.duration_ns / config.dt_ns - 1e-9));
    dt_ = config.duration_ns / n_steps_;

    const int d = config.dim();
    const complex<double> mi(0.0, -1.0);
    Eigen::MatrixXcd number_term = Eigen::MatrixXcd::Zero(d, d);
    Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(d, d);
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(d, d);
    for (int n = 0; n < d; ++n)
        number_term(n, n) = -0.5 * config.anharmonicity_mhz * n * (n - 1.0);
    for (int n = 0; n + 1 < d; ++n) {
        const double g = std::sqrt(n + 1.0);  // <n|a|n+1>
        x(n, n + 1) = g;
        x(n + 1, n) = g;
        y(n, n + 1) = complex<double>(0.0, -g);
        y(n + 1, n) = complex<double>(0.0, g);
    }
    m_drift_ = mi * kRadPerNsPerMhz * number_term;
    m_x_ = mi * kRadPerNsPerMhz * 0.5 * x;
    m_y_ = mi * kRadPerNsPerMhz * 0.5 * y;

    Eigen::VectorXd nodes(2 * n_steps_ + 1);
    for (Eigen::Index j = 0; j < nodes.size(); ++j) nodes[j] = 0.5 * dt_ * j;
    nodes[nodes.size() - 1] = config.duration_ns;  // guard against roundoff past the domain
    basis_nodes_ = basis_matrix(basis, nodes);
}

Eigen::MatrixXcd PulsePropagator::evolve_raw(const PulseCoefficients& coeffs) const {
    if (coeffs.re.size() != basis_nodes_.cols() || coeffs.im.size() != basis_nodes_.cols())
        throw ValidationError("qusim: coefficient count does not match basis");
    const Eigen::VectorXd us = basis_nodes_ * coeffs.re;
    const Eigen::VectorXd vs = basis_nodes_ * coeffs.im;

    Eigen::MatrixXcd raw;
    switch (config_.dim()) {
        case 2:
            raw = rk4_propagate<Eigen::Matrix2cd>(m_drift_, m_x_, m_y_, us, vs, n_steps_, dt_);
            break;
        case 3:
            raw = rk4_propagate<Eigen::Matrix3cd>(m_drift_, m_x_, m_y_, us, vs, n_steps_, dt_);
            break;
        default:
            raw = rk4_propagate<Eigen::MatrixXcd>(m_drift_, m_x_, m_y_, us, vs, n_steps_, dt_);
            break;
    }
    if (!raw.allFinite()) {
        std::ostringstream msg;
        msg << "qusim: integration produced non-finite entries (dim " << config_.dim()
            << ", n_steps " << n_steps_ << ", dt " << dt_ << " ns)";
        throw NumericError(msg.str());
    }
    return raw;
}

GateUnitary PulsePropagator::evolve(const PulseCoefficients& coeffs) const {
    return unitarize(evolve_raw(coeffs));
}

GateUnitary evolve(const TransmonConfig& config, const SplineBasis& basis,
                   const PulseCoefficients& coeffs) {
    return PulsePropagator(config, basis).evolve(coeffs);
}

GateUnitary unitarize(const Eigen::MatrixXcd& m) {
    if (m.rows() != m.cols()) throw ValidationError("qusim: unitarize needs a square matrix");
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || !(sv(0) > 0.0) || sv(sv.size() - 1) < 1e-12 * sv(0))
        throw NumericError("qusim: polar projection failed, matrix is numerically singular");
    return GateUnitary{svd.matrixU() * svd.matrixV().adjoint()};
}

double trace_fidelity(const GateUnitary& u, double target_theta) {
    if (u.dim() < 2) throw ValidationError("qusim: trace_fidelity needs dim >= 2");
    const Eigen::Matrix2cd essential = u.u.topLeftCorner<2, 2>();
    const Eigen::Matrix2cd target = rx_unitary(target_theta).u;
    const complex<double> tr = (essential * target.adjoint()).trace();
    return std::norm(tr) / 4.0;
}

GateUnitary rx_unitary(double theta) {
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    Eigen::Matrix2cd u;
    u << complex<double>(c, 0.0), complex<double>(0.0, -s), complex<double>(0.0, -s),
        complex<double>(c, 0.0);
    return GateUnitary{u};
}

ShotRecord make_shot_record(long n_shots, long zeros, SeConvention convention) {
    if (n_shots < 1) throw ValidationError("qusim: n_shots must be >= 1");
    ShotRecord rec;
    rec.n_shots = n_shots;
    rec.zeros = zeros;
    rec.p_hat = static_cast<double>(zeros) / n_shots;
    const double spread = std::sqrt(rec.p_hat * (1.0 - rec.p_hat));
    rec.se = convention == SeConvention::standard ? spread / std::sqrt(double(n_shots))
                                                  : spread / n_shots;
    return rec;
}

ShotRecord measure_survival(const GateUnitary& u, long n_shots, Rng& rng,
                            SeConvention convention) {
    const double p0 = std::norm(u.u(0, 0));
    const long zeros = rng.binomial(n_shots, std::min(1.0, std::max(0.0, p0)));
    return make_shot_record(n_shots, zeros, convention);
}

ShotRecord measure_survival(const GateUnitary& u, long n_shots, std::uint64_t rng_seed,
                            SeConvention convention) {
    Rng rng(rng_seed);
    return measure_survival(u, n_shots, rng, convention);
}

}  // namespace pulseforge
