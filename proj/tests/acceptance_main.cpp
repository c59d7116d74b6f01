// Acceptance suite: one self-contained check per criterion, each printing a
// single PASS/FAIL line (plus indented detail lines). Run one criterion with
// --criterion N or everything with --all. Every constant, seed, and tolerance
// is frozen here; reruns are deterministic.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <vector>

#include "pulseforge/arb.hpp"
#include "pulseforge/dataset.hpp"
#include "pulseforge/decay_fit.hpp"
#include "pulseforge/errors.hpp"
#include "pulseforge/mlp.hpp"
#include "pulseforge/pulse_optim.hpp"
#include "pulseforge/rng.hpp"
#include "pulseforge/spsa.hpp"
#include "pulseforge/transmon.hpp"

using namespace pulseforge;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct CheckList {
    bool ok = true;
    void expect(bool cond, const char* fmt, ...) {
        va_list args;
        va_start(args, fmt);
        char buf[512];
        std::vsnprintf(buf, sizeof buf, fmt, args);
        va_end(args);
        std::printf("    [%s] %s\n", cond ? "ok" : "FAIL", buf);
        ok = ok && cond;
    }
};

fs::path scratch_dir() {
    // Per-process so parallel ctest invocations never share partial files.
    const fs::path dir = fs::temp_directory_path() /
                         ("pulseforge_acceptance_" + std::to_string(getpid()));
    fs::create_directories(dir);
    return dir;
}

TransmonConfig optimizer_config() {
    TransmonConfig cfg;
    cfg.dt_ns = 125.0 / 500.0;  // resolution floor; plenty for 2-level drives
    return cfg;
}

// The 16-angle job set shared by criteria 3 and 4.
std::vector<OptimResult> optimize_sixteen() {
    std::vector<OptimResult> results;
    for (int i = 0; i < 16; ++i) {
        OptimJob job;
        job.theta = -M_PI + 2.0 * M_PI * i / 15.0;
        job.seed = 500 + i;
        job.max_iters = 600;
        job.target_infidelity = 1e-5;
        results.push_back(optimize_pulse(job, optimizer_config()));
    }
    return results;
}

double mean_dataset_infidelity(const AngleDataset& ds, const PulsePropagator& prop) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < ds.n_angles(); ++i) {
        const auto coeffs = PulseCoefficients::from_stacked(ds.coeffs.row(i).transpose());
        acc += 1.0 - trace_fidelity(prop.evolve(coeffs), ds.angles[i]);
    }
    return acc / static_cast<double>(ds.n_angles());
}

// Bootstrap chain shared by criteria 5, 6, and 7: desk dataset -> pipeline ->
// MSE pre-training. Deterministic in (n_angles, n_seeds, base_seed).
struct Bootstrap {
    ReducedDataset reduced;
    AngleDataset tagged;
    AngleDataset averaged;
    AngleDataset smoothed;
    MlpModel model;
};

Bootstrap make_bootstrap(int n_angles, int n_seeds, std::uint64_t base_seed, int window) {
    DatasetGenOptions opts;
    opts.n_angles = n_angles;
    opts.n_seeds = n_seeds;
    opts.base_seed = base_seed;
    opts.target_infidelity = 1e-4;
    opts.max_iters = 400;
    const fs::path csv = scratch_dir() / ("raw_" + std::to_string(n_angles) + "x" +
                                          std::to_string(n_seeds) + "_" +
                                          std::to_string(base_seed) + ".csv");
    const auto raw = generate_raw_dataset(opts, optimizer_config(), csv.string());

    Bootstrap boot;
    boot.averaged = average_over_seeds(raw);
    boot.smoothed = smooth(boot.averaged, window);
    boot.reduced = reduce_to_target(boot.smoothed, 5);
    boot.tagged = split_dataset(boot.reduced.ds, 0.8, 0.1, 0.1, 99);
    const MseTrainResult mse = train_mse(make_mlp({1, 4, 5}, 2024, 1.0), boot.tagged, 2000, 0.01);
    boot.model = mse.model;
    return boot;
}

Eigen::VectorXd split_angles(const AngleDataset& ds, Split s) {
    const auto rows = ds.rows_with(s);
    Eigen::VectorXd angles(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) angles[i] = ds.angles[rows[i]];
    return angles;
}

// ---------------------------------------------------------------------------

bool criterion1() {
    // Gaussian-perturbed gates, K=500, N=1000, M=range(2,150,10): the fitted
    // f must lie inside its own reported 95% CI around exp(-sigma^2/2).
    const auto t0 = Clock::now();
    CheckList checks;
    Rng mc_rng(414243);
    for (double sigma : {0.05, 0.1, 0.5}) {
        const double truth = std::exp(-sigma * sigma / 2.0);
        // Independent Monte Carlo oracle for the closed form.
        double acc = 0.0;
        const int n_mc = 1000000;
        for (int i = 0; i < n_mc; ++i) acc += std::cos(sigma * mc_rng.normal());
        checks.expect(std::abs(acc / n_mc - truth) < 4.0 * sigma / std::sqrt(double(n_mc)),
                      "MC oracle confirms exp(-sigma^2/2) = %.6f at sigma %.2f", truth, sigma);

        ArbConfig cfg;  // defaults: K=500, N=1000, M=range(2,150,10)
        cfg.base_seed = 20240229;
        GaussianPerturbedProvider provider(1000, sigma, 1);
        const ArbResult res = arb_estimate(provider, cfg);
        checks.expect(res.f_ci.first <= truth && truth <= res.f_ci.second,
                      "sigma %.2f: f = %.6f, CI [%.6f, %.6f] contains %.6f", sigma, res.fit.f,
                      res.f_ci.first, res.f_ci.second, truth);
    }
    // K=1000 variant of the sigma = 0.5 experiment.
    {
        ArbConfig cfg;
        cfg.base_seed = 20240229;
        cfg.sequences_per_length = 1000;
        GaussianPerturbedProvider provider(1000, 0.5, 1);
        const ArbResult res = arb_estimate(provider, cfg);
        const double truth = std::exp(-0.125);
        checks.expect(res.f_ci.first <= truth && truth <= res.f_ci.second,
                      "K=1000 variant: f = %.6f, CI [%.6f, %.6f]", res.fit.f, res.f_ci.first,
                      res.f_ci.second);
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    checks.expect(secs < 600.0, "runtime %.1f s (budget 600 s)", secs);
    return checks.ok;
}

bool criterion2() {
    // 100 synthetic decays, (A,B,f) = (0.5, 0.3, 0.97), binomial N=1000 noise:
    // the 95% t-interval covers the true f in at least 88 runs.
    Eigen::VectorXd ms(15);
    for (int i = 0; i < 15; ++i) ms[i] = 2 + 10 * i;
    const double a = 0.5, b = 0.3, f = 0.97;
    const long shots = 1000;
    Rng rng(20240517);
    int covered = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd ys(15), errs(15);
        for (int i = 0; i < 15; ++i) {
            const double p = a + b * std::pow(f, ms[i]);
            const double p_hat = static_cast<double>(rng.binomial(shots, p)) / shots;
            ys[i] = p_hat;
            errs[i] = std::max(std::sqrt(p_hat * (1.0 - p_hat) / shots), 1e-6);
        }
        const DecayFit fit = fit_decay(ms, ys, errs);
        const auto [lo, hi] = confidence_interval(fit.f, fit.covariance, fit.dof, 0.05);
        if (lo <= f && f <= hi) ++covered;
    }
    CheckList checks;
    checks.expect(covered >= 88, "covered %d/100 (need >= 88)", covered);
    return checks.ok;
}

bool criterion3() {
    // 16 angles across [-pi, pi], G=0, eta=200 MHz, T=125 ns: every optimized
    // pulse reaches trace fidelity >= 0.999 at evaluation resolution.
    const auto results = optimize_sixteen();
    const SplineBasis basis = build_basis(10, 125.0);
    const PulsePropagator eval(TransmonConfig{}, basis);
    CheckList checks;
    double worst = 1.0;
    int converged = 0;
    for (int i = 0; i < 16; ++i) {
        const double theta = -M_PI + 2.0 * M_PI * i / 15.0;
        const double fid = trace_fidelity(eval.evolve(results[i].coeffs), theta);
        worst = std::min(worst, fid);
        converged += results[i].converged ? 1 : 0;
    }
    checks.expect(worst >= 0.999, "worst per-angle fidelity %.6f (need >= 0.999)", worst);
    checks.expect(converged == 16, "%d/16 jobs converged to the 1e-5 target", converged);
    return checks.ok;
}

bool criterion4() {
    // Pulses optimized at G=0: adding one guard level at eta = 200 MHz must
    // cost at least 10x in mean infidelity, and eta x10 must bring it back to
    // within 10x of the G=0 value.
    const auto results = optimize_sixteen();
    const SplineBasis basis = build_basis(10, 125.0);
    const PulsePropagator eval_g0(TransmonConfig{}, basis);

    TransmonConfig g1;
    g1.guard_levels = 1;
    g1.dt_ns = suggested_dt(g1);
    const PulsePropagator eval_g1(g1, basis);

    TransmonConfig g1x10;
    g1x10.guard_levels = 1;
    g1x10.anharmonicity_mhz = 2000.0;
    g1x10.dt_ns = suggested_dt(g1x10);
    const PulsePropagator eval_g1x10(g1x10, basis);

    double m0 = 0.0, m1 = 0.0, m10 = 0.0;
    for (int i = 0; i < 16; ++i) {
        const double theta = -M_PI + 2.0 * M_PI * i / 15.0;
        m0 += (1.0 - trace_fidelity(eval_g0.evolve(results[i].coeffs), theta)) / 16.0;
        m1 += (1.0 - trace_fidelity(eval_g1.evolve(results[i].coeffs), theta)) / 16.0;
        m10 += (1.0 - trace_fidelity(eval_g1x10.evolve(results[i].coeffs), theta)) / 16.0;
    }
    CheckList checks;
    checks.expect(m1 >= 10.0 * m0, "guard level costs %.1fx (G0 %.3e -> G1 %.3e, need >= 10x)",
                  m1 / m0, m0, m1);
    checks.expect(m10 <= 10.0 * m0,
                  "eta x10 recovers to %.1fx of G0 (G1x10 %.3e, need <= 10x)", m10 / m0, m10);
    return checks.ok;
}

bool criterion5() {
    // Full bootstrap: 64-angle desk dataset -> average -> smooth -> reduce to
    // 5 -> split -> [1,4,5] MSE training -> infidelity training; the mean
    // validation fidelity must reach 0.999.
    Bootstrap boot = make_bootstrap(64, 5, 7, 9);
    CheckList checks;
    checks.expect(boot.model.parameter_count() == 33, "model has %d parameters (need 33)",
                  boot.model.parameter_count());

    const PulsePropagator eval(TransmonConfig{}, build_basis(10, 125.0));
    const double infid_avg = mean_dataset_infidelity(boot.averaged, eval);
    const double infid_smooth = mean_dataset_infidelity(boot.smoothed, eval);
    checks.expect(infid_smooth - infid_avg < 2e-5,
                  "smoothing fidelity drop %.2e (need < 2e-5)", infid_smooth - infid_avg);

    // reduce/expand round-trip cost per angle.
    double worst_delta = 0.0;
    for (Eigen::Index i = 0; i < boot.reduced.ds.n_angles(); ++i) {
        const auto original =
            PulseCoefficients::from_stacked(boot.smoothed.coeffs.row(i).transpose());
        const auto rebuilt = PulseCoefficients::from_stacked(
            expand_coefficients(boot.reduced.ds.coeffs.row(i).transpose(), boot.reduced.map));
        const double theta = boot.smoothed.angles[i];
        worst_delta = std::max(worst_delta,
                               std::abs(trace_fidelity(eval.evolve(original), theta) -
                                        trace_fidelity(eval.evolve(rebuilt), theta)));
    }
    checks.expect(worst_delta < 1e-4, "reduce/expand fidelity delta %.2e (need < 1e-4)",
                  worst_delta);

    // Simulation-in-the-loop refinement, then the validation bar.
    TransmonConfig train_cfg = optimizer_config();
    const SimContext train_ctx{boot.reduced.map, train_cfg, 1};
    InfidTrainOptions opts;
    opts.epochs = 10;
    opts.lr = 0.1;
    opts.batch_size = 16;
    opts.seed = 5;
    const InfidTrainResult refined = train_infidelity(boot.model, boot.tagged, opts, train_ctx);

    const SimContext eval_ctx{boot.reduced.map, TransmonConfig{}, 1};
    const Eigen::VectorXd val = split_angles(boot.tagged, Split::val);
    const double val_infid = mean_model_infidelity(refined.model, val, eval_ctx);
    checks.expect(1.0 - val_infid >= 0.999, "mean validation fidelity %.6f (need >= 0.999)",
                  1.0 - val_infid);

    // ARB through the full model->pulse->simulator stack, matched physics.
    ArbConfig arb_cfg;
    arb_cfg.lengths = length_range(2, 30, 7);
    arb_cfg.sequences_per_length = 20;
    arb_cfg.shots_per_sequence = 1000;
    arb_cfg.base_seed = 61;
    const ModelProvider matched(refined.model, boot.reduced.map, TransmonConfig{},
                                angle_grid(33));
    const ArbResult arb_matched = arb_estimate(matched, arb_cfg);
    checks.expect(arb_matched.fit.f >= 0.999, "ARB on matched physics: f = %.6f (need >= 0.999)",
                  arb_matched.fit.f);

    // Same model benchmarked with one guard level: the ARB-visible infidelity
    // grows by at least an order of magnitude.
    TransmonConfig g1;
    g1.guard_levels = 1;
    g1.dt_ns = suggested_dt(g1);
    const ModelProvider mismatched(refined.model, boot.reduced.map, g1, angle_grid(33));
    const ArbResult arb_g1 = arb_estimate(mismatched, arb_cfg);
    checks.expect((1.0 - arb_g1.fit.f) >= 10.0 * (1.0 - arb_matched.fit.f),
                  "ARB at G=1: 1-f = %.3e vs matched %.3e (need >= 10x)", 1.0 - arb_g1.fit.f,
                  1.0 - arb_matched.fit.f);
    return checks.ok;
}

bool criterion6() {
    // Fixed-point behavior of the bootstrap model: W=16/I=5 costs at most
    // 1e-3 of validation fidelity; W=8 costs strictly more than W=16.
    Bootstrap boot = make_bootstrap(64, 5, 7, 9);
    const SimContext ctx{boot.reduced.map, TransmonConfig{}, 1};
    const Eigen::VectorXd val = split_angles(boot.tagged, Split::val);
    const double float_infid = mean_model_infidelity(boot.model, val, ctx);

    FixedPointFormat w16;  // defaults: W=16, I=5
    const double q16_infid =
        mean_model_infidelity(quantize_model(boot.model, w16).model, val, ctx);
    FixedPointFormat w8 = w16;
    w8.total_bits = 8;
    const double q8_infid =
        mean_model_infidelity(quantize_model(boot.model, w8).model, val, ctx);

    const double delta16 = q16_infid - float_infid;
    const double delta8 = q8_infid - float_infid;
    CheckList checks;
    checks.expect(delta16 <= 1e-3, "W=16 degrades fidelity by %.2e (need <= 1e-3)", delta16);
    checks.expect(delta8 > delta16, "W=8 degrades more: %.2e > %.2e", delta8, delta16);
    return checks.ok;
}

bool criterion7() {
    // SPSA fine-tuning toward G=1, eta=2 GHz: fixed-grid mode must improve
    // the validation loss at its best checkpoint, and resampling the training
    // set each epoch must be measurably less stable epoch to epoch.
    Bootstrap boot = make_bootstrap(32, 3, 11, 5);

    TransmonConfig target;
    target.guard_levels = 1;
    target.anharmonicity_mhz = 2000.0;
    target.dt_ns = 125.0 / 16000.0;

    FinetuneJob job;
    job.model = boot.model;
    job.map = boot.reduced.map;
    job.physics = target;
    job.n_train_angles = 50;
    job.batches = 5;
    job.n_val_angles = 10;
    job.angle_mode = AngleMode::fixed_grid;
    job.seed = 31;
    SpsaParams params;
    params.epsilon = 1e-4;  // alpha = epsilon = 1e-6 x100 for desk-scale epochs
    params.learning_rate = 1e-4;
    params.epochs = 40;

    const FinetuneResult fixed = finetune(job, params);
    job.angle_mode = AngleMode::resample_each_epoch;
    const FinetuneResult resampled = finetune(job, params);

    const double v_fixed = epoch_to_epoch_variance(fixed.train_loss);
    const double v_resampled = epoch_to_epoch_variance(resampled.train_loss);
    CheckList checks;
    checks.expect(fixed.val_loss[fixed.best_epoch] < fixed.val_loss.front(),
                  "fixed-grid val loss %.6e -> %.6e at best epoch %d",
                  fixed.val_loss.front(), fixed.val_loss[fixed.best_epoch], fixed.best_epoch);
    checks.expect(v_resampled > v_fixed,
                  "epoch-to-epoch variance: resample %.3e > fixed %.3e (%.0fx)", v_resampled,
                  v_fixed, v_resampled / v_fixed);
    return checks.ok;
}

bool criterion8() {
    // The standalone property suite: spline partition of unity, projector
    // unitarity, RK4 step-halving, trace-fidelity identity, SPSA evaluation
    // count, SE propagation exactness, and seeded byte-identical determinism.
    CheckList checks;

    const SplineBasis basis = build_basis(10, 125.0);
    double worst_pu = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double t = 125.0 * i / 999.0;
        worst_pu = std::max(worst_pu, std::abs(basis_values(basis, t).sum() - 1.0));
    }
    checks.expect(worst_pu < 1e-12, "partition of unity off by %.2e (need < 1e-12)", worst_pu);

    Rng rng(2024);
    const PulsePropagator coarse(TransmonConfig{}, basis);
    TransmonConfig fine_cfg;
    fine_cfg.dt_ns /= 2.0;
    const PulsePropagator fine(fine_cfg, basis);
    double worst_unitarity = 0.0, worst_step = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        PulseCoefficients c;
        c.re.resize(10);
        c.im.resize(10);
        for (int j = 0; j < 10; ++j) {
            c.re[j] = rng.uniform(-5.0, 5.0);
            c.im[j] = rng.uniform(-5.0, 5.0);
        }
        const double theta = rng.uniform(-M_PI, M_PI);
        const GateUnitary u = unitarize(coarse.evolve_raw(c));
        worst_unitarity = std::max(
            worst_unitarity,
            (u.u.adjoint() * u.u - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff());
        worst_step = std::max(worst_step, std::abs(trace_fidelity(coarse.evolve(c), theta) -
                                                   trace_fidelity(fine.evolve(c), theta)));
    }
    checks.expect(worst_unitarity < 1e-8, "projected unitarity off by %.2e (need < 1e-8)",
                  worst_unitarity);
    checks.expect(worst_step < 1e-9, "step halving moves fidelity by %.2e (need < 1e-9)",
                  worst_step);

    double worst_identity = 0.0;
    for (double theta : {-2.0, 0.0, 1.1})
        for (double eps : {1e-3, 0.1, 0.5}) {
            const double expected = std::cos(eps / 2.0) * std::cos(eps / 2.0);
            worst_identity = std::max(
                worst_identity,
                std::abs(trace_fidelity(rx_unitary(theta + eps), theta) - expected));
        }
    checks.expect(worst_identity < 1e-10,
                  "trace fidelity identity off by %.2e (need < 1e-10)", worst_identity);

    int evals = 0;
    SpsaParams params;
    Rng spsa_rng(3);
    spsa_gradient(
        [&evals](const Eigen::VectorXd& t) {
            ++evals;
            return t.squaredNorm();
        },
        Eigen::VectorXd::Ones(33), params, spsa_rng);
    checks.expect(evals == 2, "SPSA used %d loss evaluations (need exactly 2)", evals);

    const std::vector<double> ses{0.01, 0.02, 0.005};
    const double expected_se =
        std::sqrt(0.01 * 0.01 + 0.02 * 0.02 + 0.005 * 0.005) / 3.0;
    checks.expect(propagate_se(ses) == expected_se, "SE propagation is bit-exact");

    ArbConfig cfg;
    cfg.lengths = length_range(2, 40, 9);
    cfg.sequences_per_length = 8;
    cfg.shots_per_sequence = 100;
    cfg.base_seed = 77;
    GaussianPerturbedProvider provider(64, 0.1, 5);
    const ArbResult r1 = arb_estimate(provider, cfg);
    const ArbResult r2 = arb_estimate(provider, cfg, 4);
    bool identical = r1.fit.f == r2.fit.f && r1.fit.a == r2.fit.a && r1.fit.b == r2.fit.b;
    for (std::size_t i = 0; i < r1.per_length.size(); ++i)
        identical = identical && r1.per_length[i].avg_p == r2.per_length[i].avg_p &&
                    r1.per_length[i].se == r2.per_length[i].se;
    checks.expect(identical, "fixed-seed reruns (serial vs 4 threads) are byte-identical");

    return checks.ok;
}

}  // namespace

int main(int argc, char** argv) {
    int which = 0;
    bool all = false;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
            which = std::atoi(argv[++i]);
        else if (std::strcmp(argv[i], "--all") == 0)
            all = true;
        else {
            std::fprintf(stderr, "usage: acceptance [--criterion N | --all]\n");
            return 2;
        }
    }
    if (!all && (which < 1 || which > 8)) {
        std::fprintf(stderr, "usage: acceptance [--criterion N | --all]\n");
        return 2;
    }

    const std::function<bool()> criteria[8] = {criterion1, criterion2, criterion3, criterion4,
                                               criterion5, criterion6, criterion7, criterion8};
    const char* names[8] = {
        "ARB oracle vs exp(-sigma^2/2) at paper constants",
        "fit coverage on 100 binomial-noised decays",
        "pulse optimization reaches 0.999 on 16 angles",
        "guard-level infidelity ordering",
        "bootstrap model reaches 0.999 validation fidelity",
        "16-bit quantization within 1e-3, 8-bit strictly worse",
        "SPSA fine-tuning improves; resampling is less stable",
        "standalone property suites",
    };

    bool ok = true;
    for (int c = 1; c <= 8; ++c) {
        if (!all && c != which) continue;
        const auto t0 = Clock::now();
        bool pass = false;
        try {
            pass = criteria[c - 1]();
        } catch (const std::exception& e) {
            std::printf("    [FAIL] unexpected exception: %s\n", e.what());
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        std::printf("criterion %d: %s - %s (%.1f s)\n", c, pass ? "PASS" : "FAIL", names[c - 1],
                    secs);
        ok = ok && pass;
    }
    std::error_code ec;
    fs::remove_all(scratch_dir(), ec);
    return ok ? 0 : 1;
}
