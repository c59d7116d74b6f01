#pragma once

#include <Eigen/Dense>
#include <string>

#include "pulseforge/rng.hpp"
#include "pulseforge/spline.hpp"

namespace pulseforge {

// Unit convention, used everywhere: frequencies in MHz, times in ns. One MHz
// drives 2*pi*1e-3 rad of phase per ns; kRadPerNsPerMhz is that factor and is
// the only place the conversion lives.
inline constexpr double kRadPerNsPerMhz = 2.0 * M_PI * 1e-3;

// Rotating-frame Duffing transmon with G guard levels above the qubit pair:
// H(t)/2pi = -(eta/2) N(N-1) + u(t) (a+a')/2 + v(t) i(a'-a)/2 on 2+G levels,
// drive resonant with the qubit.
struct TransmonConfig {
    double anharmonicity_mhz = 200.0;
    int guard_levels = 0;
    double duration_ns = 125.0;
    double max_amp_mhz = 20.0;
    double dt_ns = 125.0 / 2000.0;

    int dim() const { return 2 + guard_levels; }
    void validate() const;
};

// Step that keeps the fastest Hamiltonian phase (drift + drive bound) well
// resolved by RK4; never coarser than duration/2000.
double suggested_dt(const TransmonConfig& config);

TransmonConfig load_transmon_config(const std::string& path);
void save_transmon_config(const TransmonConfig& config, const std::string& path);

struct GateUnitary {
    Eigen::MatrixXcd u;
    int dim() const { return static_cast<int>(u.rows()); }
};

// Precomputed RK4 propagator for one (config, basis) pair: the Hamiltonian
// pieces and the basis values on the half-step time grid are built once, so
// repeated evolutions with fresh coefficients (the optimizer's hot loop) cost
// only two matrix-vector products plus the time stepping.
class PulsePropagator {
public:
    PulsePropagator(const TransmonConfig& config, const SplineBasis& basis);

    // Raw RK4 solution of i dU/dt = H(t) U, U(0) = I. Throws NumericError
    // with step diagnostics on integration blow-up.
    Eigen::MatrixXcd evolve_raw(const PulseCoefficients& coeffs) const;

    // evolve_raw followed by polar projection.
    GateUnitary evolve(const PulseCoefficients& coeffs) const;

    const TransmonConfig& config() const { return config_; }
    int n_steps() const { return n_steps_; }

private:
    TransmonConfig config_;
    int n_steps_;
    double dt_;
    Eigen::MatrixXcd m_drift_, m_x_, m_y_;  // -iH pieces, prescaled
    Eigen::MatrixXd basis_nodes_;           // (2*n_steps+1) x n_coeff
};

// One-shot convenience wrapper around PulsePropagator.
GateUnitary evolve(const TransmonConfig& config, const SplineBasis& basis,
                   const PulseCoefficients& coeffs);

// Nearest unitary in Frobenius norm (polar projection via SVD). Idempotent on
// unitaries; throws NumericError when the input is numerically singular.
GateUnitary unitarize(const Eigen::MatrixXcd& m);

// Overlap with the ideal rotation on the essential subspace:
// F = |Tr(P U P Rx(theta)')|^2 / 4 with P the projector onto levels {0, 1}.
double trace_fidelity(const GateUnitary& u, double target_theta);

GateUnitary rx_unitary(double theta);

enum class SeConvention {
    standard,       // sqrt(p(1-p)/N)
    paper_literal,  // sqrt(p(1-p))/N
};

struct ShotRecord {
    long n_shots = 0;
    long zeros = 0;
    double p_hat = 0.0;
    double se = 0.0;
};

ShotRecord make_shot_record(long n_shots, long zeros, SeConvention convention);

// N projective Pauli-Z measurements of U|0>: outcome 0 with probability
// |<0|U|0>|^2, all leakage lumped into outcome 1.
ShotRecord measure_survival(const GateUnitary& u, long n_shots, Rng& rng,
                            SeConvention convention = SeConvention::standard);
ShotRecord measure_survival(const GateUnitary& u, long n_shots, std::uint64_t rng_seed,
                            SeConvention convention = SeConvention::standard);

}  // namespace pulseforge
