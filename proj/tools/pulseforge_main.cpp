// pulseforge: synthesize, benchmark, and fine-tune single-qubit Rx pulses on
// a simulated transmon. Every subcommand writes its artifacts plus a
// manifest.json (command line, seed, config snapshot, file digests) into the
// --out directory, and reruns with the same seed reproduce the numeric
// artifacts byte for byte.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "pulseforge/arb.hpp"
#include "pulseforge/dataset.hpp"
#include "pulseforge/errors.hpp"
#include "pulseforge/io.hpp"
#include "pulseforge/manifest.hpp"
#include "pulseforge/mlp.hpp"
#include "pulseforge/parallel.hpp"
#include "pulseforge/pulse_optim.hpp"
#include "pulseforge/spsa.hpp"
#include "pulseforge/transmon.hpp"

namespace fs = std::filesystem;
using namespace pulseforge;
using Clock = std::chrono::steady_clock;

namespace {

struct ArtifactDir {
    fs::path dir;
    RunManifest manifest;
    Clock::time_point start = Clock::now();

    explicit ArtifactDir(const std::string& out, int argc, char** argv) : dir(out) {
        fs::create_directories(dir);
        std::ostringstream cmd;
        for (int i = 0; i < argc; ++i) cmd << (i ? " " : "") << argv[i];
        manifest.command = cmd.str();
        manifest.timestamp = iso_timestamp_now();
    }

    std::string file(const std::string& name) const { return (dir / name).string(); }

    void add_input(const std::string& path) {
        manifest.inputs.push_back(digest_file(path, fs::path(path).filename().string()));
    }
    void add_output(const std::string& name) {
        manifest.outputs.push_back(digest_file(file(name), name));
    }
    void finish() {
        manifest.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
        save_manifest(dir.string(), manifest);
    }
};

TransmonConfig config_from(const std::string& path, ArtifactDir* art = nullptr) {
    if (path.empty()) return TransmonConfig{};
    if (art) art->add_input(path);
    return load_transmon_config(path);
}

std::string config_snapshot(const TransmonConfig& cfg) {
    std::ostringstream out;
    out << "anharmonicity_mhz " << format_g17(cfg.anharmonicity_mhz) << "; guard_levels "
        << cfg.guard_levels << "; duration_ns " << format_g17(cfg.duration_ns) << "; max_amp_mhz "
        << format_g17(cfg.max_amp_mhz) << "; dt_ns " << format_g17(cfg.dt_ns);
    return out.str();
}

Eigen::VectorXd angles_of(const AngleDataset& ds, Split split) {
    const auto rows = ds.rows_with(split);
    Eigen::VectorXd angles(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) angles[i] = ds.angles[rows[i]];
    return angles;
}

void dump_defaults() {
    TransmonConfig cfg;
    ArbConfig arb;
    FixedPointFormat fmt;
    SpsaParams spsa;
    std::printf("[transmon]\n");
    std::printf("anharmonicity_mhz %s\n", format_g17(cfg.anharmonicity_mhz).c_str());
    std::printf("guard_levels %d\n", cfg.guard_levels);
    std::printf("duration_ns %s\n", format_g17(cfg.duration_ns).c_str());
    std::printf("max_amp_mhz %s\n", format_g17(cfg.max_amp_mhz).c_str());
    std::printf("dt_ns %s\n", format_g17(cfg.dt_ns).c_str());
    std::printf("[arb]\n");
    std::printf("lengths range(2,150,10)\n");
    std::printf("sequences_per_length %d\n", arb.sequences_per_length);
    std::printf("shots_per_sequence %ld\n", arb.shots_per_sequence);
    std::printf("alpha_level %s\n", format_g17(arb.alpha_level).c_str());
    std::printf("se_convention standard\n");
    std::printf("[quantization]\n");
    std::printf("total_bits %d\n", fmt.total_bits);
    std::printf("integer_bits %d\n", fmt.integer_bits);
    std::printf("alpha_neg %s\n", format_g17(fmt.alpha_neg).c_str());
    std::printf("qnoise_factor %s\n", format_g17(fmt.qnoise_factor).c_str());
    std::printf("[spsa]\n");
    std::printf("epsilon %s\n", format_g17(spsa.epsilon).c_str());
    std::printf("learning_rate %s\n", format_g17(spsa.learning_rate).c_str());
    std::printf("[model]\n");
    std::printf("layer_sizes 1,4,5\n");
    std::printf("hidden_alpha 1\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pulse synthesis, benchmarking, and fine-tuning toolkit"};
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    app.require_subcommand(0, 1);

    bool dump = false;
    app.add_flag("--dump-config", dump, "print all built-in defaults and exit");

    // ---- gen-data ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "optimize pulses over an angle grid");
    struct {
        std::string out, config;
        int angles = 64, seeds = 5, max_iters = 400, threads = 0;
        std::uint64_t seed = 1;
        double baseline = 2.0, target_infid = 1e-4;
    } g;
    gen->add_option("--out", g.out, "artifact directory")->required();
    gen->add_option("--config", g.config, "transmon config file");
    gen->add_option("--angles", g.angles, "grid size over [-pi, pi]");
    gen->add_option("--seeds", g.seeds, "optimizer seeds per angle");
    gen->add_option("--seed", g.seed, "base seed");
    gen->add_option("--baseline-amp", g.baseline, "baseline amplitude in MHz");
    gen->add_option("--max-iters", g.max_iters, "optimizer iteration cap");
    gen->add_option("--target-infid", g.target_infid, "per-pulse stopping infidelity");
    gen->add_option("--threads", g.threads, "worker threads (0 = auto)");

    // ---- pipeline ----------------------------------------------------------
    auto* pipe = app.add_subcommand("pipeline", "average, smooth, reduce, and split raw data");
    struct {
        std::string raw, out;
        int window = 50, outputs = 5;
        double threshold = 0.0;  // 0 = scan automatically
        double train = 0.8, val = 0.1, test = 0.1;
        std::uint64_t seed = 1;
    } p;
    pipe->add_option("--raw", p.raw, "raw dataset CSV from gen-data")->required();
    pipe->add_option("--out", p.out, "artifact directory")->required();
    pipe->add_option("--window", p.window, "smoothing window (samples)");
    pipe->add_option("--outputs", p.outputs, "target model outputs");
    pipe->add_option("--variation-threshold", p.threshold,
                     "reduction threshold (omit to scan for one)");
    pipe->add_option("--train-frac", p.train, "training fraction");
    pipe->add_option("--val-frac", p.val, "validation fraction");
    pipe->add_option("--test-frac", p.test, "test fraction");
    pipe->add_option("--seed", p.seed, "split seed");

    // ---- train-mse ---------------------------------------------------------
    auto* tmse = app.add_subcommand("train-mse", "bootstrap the model on coefficient MSE");
    struct {
        std::string dataset, out, init_model;
        std::vector<int> layers{1, 4, 5};
        int epochs = 10000;
        double lr = 1e-4, alpha = 1.0;
        std::uint64_t seed = 1;
    } tm;
    tmse->add_option("--dataset", tm.dataset, "reduced dataset CSV")->required();
    tmse->add_option("--out", tm.out, "artifact directory")->required();
    tmse->add_option("--layers", tm.layers, "layer sizes")->delimiter(',');
    tmse->add_option("--epochs", tm.epochs, "training epochs");
    tmse->add_option("--lr", tm.lr, "learning rate");
    tmse->add_option("--alpha", tm.alpha, "hidden leaky-rectifier negative slope");
    tmse->add_option("--seed", tm.seed, "weight init seed");
    tmse->add_option("--init-model", tm.init_model, "start from this model instead of random init");

    // ---- train-infid -------------------------------------------------------
    auto* tinf = app.add_subcommand("train-infid", "refine with simulated infidelity loss");
    struct {
        std::string model, dataset, map, out, config;
        int epochs = 20, batch = 16, threads = 0;
        double lr = 0.1, epsilon = 1e-6;
        std::uint64_t seed = 1;
    } ti;
    tinf->add_option("--model", ti.model, "bootstrap model JSON")->required();
    tinf->add_option("--dataset", ti.dataset, "reduced dataset CSV")->required();
    tinf->add_option("--map", ti.map, "reduction map JSON")->required();
    tinf->add_option("--out", ti.out, "artifact directory")->required();
    tinf->add_option("--config", ti.config, "transmon config file");
    tinf->add_option("--epochs", ti.epochs, "training epochs");
    tinf->add_option("--batch", ti.batch, "batch size");
    tinf->add_option("--lr", ti.lr, "learning rate");
    tinf->add_option("--epsilon", ti.epsilon, "finite-difference perturbation");
    tinf->add_option("--seed", ti.seed, "shuffle seed");
    tinf->add_option("--threads", ti.threads, "worker threads (0 = auto)");

    // ---- quantize ----------------------------------------------------------
    auto* quant = app.add_subcommand("quantize", "snap a model to fixed point");
    struct {
        std::string model, out, dataset, map, config;
        int bits = 16, integer = 5;
        double alpha_neg = 1.0, qnoise = 1.0;
    } q;
    quant->add_option("--model", q.model, "model JSON")->required();
    quant->add_option("--out", q.out, "artifact directory")->required();
    quant->add_option("--bits", q.bits, "total fixed-point bits W");
    quant->add_option("--integer", q.integer, "integer bits I");
    quant->add_option("--alpha-neg", q.alpha_neg, "deployed negative slope");
    quant->add_option("--qnoise", q.qnoise, "quantization noise factor");
    quant->add_option("--eval-dataset", q.dataset, "reduced dataset CSV for before/after eval");
    quant->add_option("--map", q.map, "reduction map JSON (for eval)");
    quant->add_option("--config", q.config, "transmon config (for eval)");

    // ---- arb ---------------------------------------------------------------
    auto* arb_cmd = app.add_subcommand("arb", "adapted randomized benchmarking");
    struct {
        std::string provider = "gaussian", out, model, map, config, se = "standard";
        double sigma = 0.1, alpha_level = 0.05;
        int gate_angles = 1000, k = 500, m_start = 2, m_stop = 150, m_step = 10, threads = 0;
        long n = 1000;
        std::uint64_t seed = 1;
        bool noisy_inverse = false;
    } a;
    arb_cmd->add_option("--provider", a.provider, "gaussian | model")
        ->check(CLI::IsMember({"gaussian", "model"}));
    arb_cmd->add_option("--out", a.out, "artifact directory")->required();
    arb_cmd->add_option("--sigma", a.sigma, "gaussian angle noise (rad)");
    arb_cmd->add_option("--gate-angles", a.gate_angles, "gate set size over [-pi, pi]");
    arb_cmd->add_option("--k", a.k, "sequences per length K");
    arb_cmd->add_option("--n", a.n, "shots per sequence N");
    arb_cmd->add_option("--m-start", a.m_start, "first sequence length");
    arb_cmd->add_option("--m-stop", a.m_stop, "stop length (exclusive)");
    arb_cmd->add_option("--m-step", a.m_step, "length stride");
    arb_cmd->add_option("--alpha-level", a.alpha_level, "two-tailed t-test alpha");
    arb_cmd->add_option("--seed", a.seed, "base seed");
    arb_cmd->add_option("--se-convention", a.se, "standard | paper-literal")
        ->check(CLI::IsMember({"standard", "paper-literal"}));
    arb_cmd->add_flag("--noisy-inverse", a.noisy_inverse,
                      "perturb the closing gate too (gaussian provider)");
    arb_cmd->add_option("--model", a.model, "model JSON (model provider)");
    arb_cmd->add_option("--map", a.map, "reduction map JSON (model provider)");
    arb_cmd->add_option("--config", a.config, "transmon config (model provider)");
    arb_cmd->add_option("--threads", a.threads, "worker threads (0 = auto)");

    // ---- finetune ----------------------------------------------------------
    auto* fine = app.add_subcommand("finetune", "SPSA fine-tuning against mismatched physics");
    struct {
        std::string model, map, physics, out, angles = "fixed";
        int n_angles = 500, batches = 10, epochs = 40, n_val = 100, threads = 0;
        int patience = 0;
        double alpha = 1e-6, epsilon = 1e-6;
        bool arb_loss = false;
        std::uint64_t seed = 1;
    } f;
    fine->add_option("--model", f.model, "bootstrap model JSON")->required();
    fine->add_option("--map", f.map, "reduction map JSON")->required();
    fine->add_option("--physics", f.physics, "target transmon config file")->required();
    fine->add_option("--out", f.out, "artifact directory")->required();
    fine->add_option("--angles", f.angles, "resample | fixed")
        ->check(CLI::IsMember({"resample", "fixed"}));
    fine->add_option("--n-angles", f.n_angles, "training angles per epoch");
    fine->add_option("--batches", f.batches, "batches per epoch");
    fine->add_option("--epochs", f.epochs, "epochs");
    fine->add_option("--alpha", f.alpha, "SPSA learning rate");
    fine->add_option("--epsilon", f.epsilon, "SPSA perturbation");
    fine->add_option("--n-val", f.n_val, "validation angles");
    fine->add_option("--patience", f.patience,
                     "early stop after this many stale epochs (0 = off)");
    fine->add_flag("--arb-loss", f.arb_loss, "score batches with a reduced ARB run");
    fine->add_option("--seed", f.seed, "base seed");
    fine->add_option("--threads", f.threads, "worker threads (0 = auto)");

    // ---- eval --------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "per-angle fidelity of a model");
    struct {
        std::string model, map, out, config, dataset, split = "val";
        int n_angles = 0;  // 0: use the dataset split
    } e;
    ev->add_option("--model", e.model, "model JSON")->required();
    ev->add_option("--map", e.map, "reduction map JSON")->required();
    ev->add_option("--out", e.out, "artifact directory")->required();
    ev->add_option("--config", e.config, "transmon config file");
    ev->add_option("--dataset", e.dataset, "reduced dataset CSV with split tags");
    ev->add_option("--split", e.split, "train | val | test")
        ->check(CLI::IsMember({"train", "val", "test"}));
    ev->add_option("--n-angles", e.n_angles, "evaluate on a fresh uniform grid instead");

    // ---- report ------------------------------------------------------------
    auto* rep = app.add_subcommand("report", "consolidate manifests under a directory");
    struct {
        std::string from, out;
    } r;
    rep->add_option("--from", r.from, "directory to scan")->required();
    rep->add_option("--out", r.out, "artifact directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage error
    }

    try {
        if (dump) {
            dump_defaults();
            return 0;
        }
        if (app.get_subcommands().empty()) {
            std::cerr << app.help() << '\n';
            return 2;
        }

        if (gen->parsed()) {
            ArtifactDir art(g.out, argc, argv);
            TransmonConfig cfg = config_from(g.config, &art);
            art.manifest.base_seed = g.seed;
            art.manifest.config_snapshot = config_snapshot(cfg);
            DatasetGenOptions opts;
            opts.n_angles = g.angles;
            opts.n_seeds = g.seeds;
            opts.base_seed = g.seed;
            opts.baseline_amp_mhz = g.baseline;
            opts.max_iters = g.max_iters;
            opts.target_infidelity = g.target_infid;
            opts.threads = resolve_threads(g.threads);
            const auto records = generate_raw_dataset(opts, cfg, art.file("raw.csv"));
            double mean_fid = 0.0;
            long converged = 0;
            for (const auto& rec : records) {
                mean_fid += rec.fidelity / records.size();
                converged += rec.converged ? 1 : 0;
            }
            art.add_output("raw.csv");
            art.finish();
            std::printf("gen-data: %zu records, mean fidelity %.6f, %ld/%zu converged\n",
                        records.size(), mean_fid, converged, records.size());
        } else if (pipe->parsed()) {
            ArtifactDir art(p.out, argc, argv);
            art.add_input(p.raw);
            art.manifest.base_seed = p.seed;
            const auto raw = load_raw_records(p.raw);
            const AngleDataset averaged = average_over_seeds(raw);
            const AngleDataset smoothed = smooth(averaged, p.window);
            const ReducedDataset reduced =
                p.threshold > 0.0 ? reduce_coefficients(smoothed, p.threshold, p.outputs)
                                  : reduce_to_target(smoothed, p.outputs);
            const AngleDataset tagged =
                split_dataset(reduced.ds, p.train, p.val, p.test, p.seed);
            save_dataset_csv(art.file("dataset.csv"), tagged);
            save_reduction_map(art.file("reduction_map.json"), reduced.map);
            save_dataset_csv(art.file("averaged.csv"), averaged);
            save_dataset_csv(art.file("smoothed.csv"), smoothed);
            {
                const Eigen::VectorXd tv_raw = total_variation(averaged);
                const Eigen::VectorXd tv_smooth = total_variation(smoothed);
                std::ofstream tv(art.file("total_variation.csv"));
                tv << "column,tv_averaged,tv_smoothed\n";
                for (Eigen::Index c = 0; c < tv_raw.size(); ++c)
                    tv << c << ',' << format_g17(tv_raw[c]) << ',' << format_g17(tv_smooth[c])
                       << '\n';
            }
            for (const char* name : {"dataset.csv", "reduction_map.json", "averaged.csv",
                                     "smoothed.csv", "total_variation.csv"})
                art.add_output(name);
            art.finish();
            std::printf("pipeline: %lld angles, %lld outputs, %zu groups\n",
                        static_cast<long long>(tagged.n_angles()),
                        static_cast<long long>(tagged.n_out()), reduced.map.groups.size());
        } else if (tmse->parsed()) {
            ArtifactDir art(tm.out, argc, argv);
            art.add_input(tm.dataset);
            art.manifest.base_seed = tm.seed;
            const AngleDataset ds = load_dataset_csv(tm.dataset);
            MlpModel init;
            if (tm.init_model.empty()) {
                std::vector<int> layers = tm.layers;
                layers.back() = static_cast<int>(ds.n_out());
                init = make_mlp(layers, tm.seed, tm.alpha);
            } else {
                art.add_input(tm.init_model);
                init = load_model(tm.init_model);
            }
            save_model(art.file("init_model.json"), init);
            const MseTrainResult res = train_mse(init, ds, tm.epochs, tm.lr);
            save_model(art.file("model.json"), res.model);
            save_loss_csv(art.file("loss.csv"), res.train_loss, res.val_loss);
            for (const char* name : {"init_model.json", "model.json", "loss.csv"})
                art.add_output(name);
            art.finish();
            std::printf("train-mse: val loss %.6e -> %.6e (best epoch %d)%s\n",
                        res.val_loss.front(), res.val_loss[res.best_epoch], res.best_epoch,
                        res.diverged ? " [diverged, checkpoint kept]" : "");
        } else if (tinf->parsed()) {
            ArtifactDir art(ti.out, argc, argv);
            art.add_input(ti.model);
            art.add_input(ti.dataset);
            art.add_input(ti.map);
            art.manifest.base_seed = ti.seed;
            const TransmonConfig cfg = config_from(ti.config, &art);
            art.manifest.config_snapshot = config_snapshot(cfg);
            const MlpModel model = load_model(ti.model);
            const AngleDataset ds = load_dataset_csv(ti.dataset);
            const SimContext ctx{load_reduction_map(ti.map), cfg, resolve_threads(ti.threads)};
            InfidTrainOptions opts;
            opts.epochs = ti.epochs;
            opts.lr = ti.lr;
            opts.batch_size = ti.batch;
            opts.epsilon = ti.epsilon;
            opts.seed = ti.seed;
            const InfidTrainResult res = train_infidelity(model, ds, opts, ctx);
            save_model(art.file("model.json"), res.model);
            save_loss_csv(art.file("loss.csv"), res.epoch_loss);
            for (const char* name : {"model.json", "loss.csv"}) art.add_output(name);
            art.finish();
            std::printf("train-infid: loss %.6e -> %.6e (best epoch %d)\n",
                        res.epoch_loss.empty() ? 0.0 : res.epoch_loss.front(),
                        res.epoch_loss.empty() ? 0.0 : res.epoch_loss[res.best_epoch],
                        res.best_epoch);
        } else if (quant->parsed()) {
            ArtifactDir art(q.out, argc, argv);
            art.add_input(q.model);
            const MlpModel model = load_model(q.model);
            FixedPointFormat fmt;
            fmt.total_bits = q.bits;
            fmt.integer_bits = q.integer;
            fmt.alpha_neg = q.alpha_neg;
            fmt.qnoise_factor = q.qnoise;
            const QuantizeReport rep_q = quantize_model(model, fmt);
            save_model(art.file("model.json"), rep_q.model);
            art.add_output("model.json");
            std::printf("quantize: W=%d I=%d, %ld weights saturated\n", q.bits, q.integer,
                        rep_q.saturated);
            if (!q.dataset.empty()) {
                if (q.map.empty())
                    throw ValidationError("cli: --eval-dataset requires --map");
                art.add_input(q.dataset);
                art.add_input(q.map);
                const TransmonConfig cfg = config_from(q.config, &art);
                const AngleDataset ds = load_dataset_csv(q.dataset);
                const SimContext ctx{load_reduction_map(q.map), cfg, 1};
                const Eigen::VectorXd val = angles_of(ds, Split::val);
                const double before = mean_model_infidelity(model, val, ctx);
                const double after = mean_model_infidelity(rep_q.model, val, ctx);
                std::ofstream cmp(art.file("quantization_eval.csv"));
                cmp << "model,mean_val_infidelity\nfloat," << format_g17(before) << "\nquantized,"
                    << format_g17(after) << '\n';
                cmp.close();
                art.add_output("quantization_eval.csv");
                std::printf("quantize: val infidelity float %.3e -> quantized %.3e\n", before,
                            after);
            }
            art.finish();
        } else if (arb_cmd->parsed()) {
            ArtifactDir art(a.out, argc, argv);
            art.manifest.base_seed = a.seed;
            ArbConfig cfg;
            cfg.lengths = length_range(a.m_start, a.m_stop, a.m_step);
            cfg.sequences_per_length = a.k;
            cfg.shots_per_sequence = a.n;
            cfg.alpha_level = a.alpha_level;
            cfg.base_seed = a.seed;
            cfg.se_convention =
                a.se == "standard" ? SeConvention::standard : SeConvention::paper_literal;
            std::unique_ptr<GateProvider> provider;
            if (a.provider == "gaussian") {
                provider = std::make_unique<GaussianPerturbedProvider>(a.gate_angles, a.sigma,
                                                                       a.seed, a.noisy_inverse);
            } else {
                if (a.model.empty() || a.map.empty())
                    throw ValidationError("cli: model provider requires --model and --map");
                art.add_input(a.model);
                art.add_input(a.map);
                const TransmonConfig sim_cfg = config_from(a.config, &art);
                art.manifest.config_snapshot = config_snapshot(sim_cfg);
                provider = std::make_unique<ModelProvider>(
                    load_model(a.model), load_reduction_map(a.map), sim_cfg,
                    angle_grid(a.gate_angles));
            }
            const ArbResult res = arb_estimate(*provider, cfg, resolve_threads(a.threads));
            save_arb_lengths_csv(art.file("lengths.csv"), res);
            save_arb_fit_json(art.file("fit.json"), res, cfg);
            save_arb_curve_csv(art.file("curve.csv"), res);
            for (const char* name : {"lengths.csv", "fit.json", "curve.csv"})
                art.add_output(name);
            art.finish();
            std::printf("arb: f = %.6f, 95%% CI [%.6f, %.6f], A = %.4f, B = %.4f, dof = %d\n",
                        res.fit.f, res.f_ci.first, res.f_ci.second, res.fit.a, res.fit.b,
                        res.dof);
        } else if (fine->parsed()) {
            ArtifactDir art(f.out, argc, argv);
            art.add_input(f.model);
            art.add_input(f.map);
            art.add_input(f.physics);
            art.manifest.base_seed = f.seed;
            FinetuneJob job;
            job.model = load_model(f.model);
            job.map = load_reduction_map(f.map);
            job.physics = load_transmon_config(f.physics);
            art.manifest.config_snapshot = config_snapshot(job.physics);
            job.n_train_angles = f.n_angles;
            job.batches = f.batches;
            job.n_val_angles = f.n_val;
            job.angle_mode =
                f.angles == "fixed" ? AngleMode::fixed_grid : AngleMode::resample_each_epoch;
            job.loss = f.arb_loss ? FinetuneLoss::arb : FinetuneLoss::mean_infidelity;
            job.arb_cfg.lengths = length_range(2, 30, 7);
            job.arb_cfg.sequences_per_length = 20;
            job.arb_cfg.shots_per_sequence = 200;
            job.seed = f.seed;
            job.threads = resolve_threads(f.threads);
            job.patience = f.patience;
            SpsaParams params;
            params.epsilon = f.epsilon;
            params.learning_rate = f.alpha;
            params.epochs = f.epochs;
            const FinetuneResult res = finetune(job, params);
            save_model(art.file("model.json"), res.model);
            save_loss_csv(art.file("loss.csv"), res.train_loss, res.val_loss);
            for (const char* name : {"model.json", "loss.csv"}) art.add_output(name);
            art.finish();
            std::printf("finetune: val loss %.6e -> best %.6e (epoch %d)%s\n",
                        res.val_loss.front(), res.val_loss[res.best_epoch], res.best_epoch,
                        res.skipped_batches
                            ? (" [" + std::to_string(res.skipped_batches) + " batches skipped]").c_str()
                            : "");
        } else if (ev->parsed()) {
            ArtifactDir art(e.out, argc, argv);
            art.add_input(e.model);
            art.add_input(e.map);
            const TransmonConfig cfg = config_from(e.config, &art);
            art.manifest.config_snapshot = config_snapshot(cfg);
            const MlpModel model = load_model(e.model);
            const SimContext ctx{load_reduction_map(e.map), cfg, 1};
            Eigen::VectorXd angles;
            if (e.n_angles > 0) {
                angles.resize(e.n_angles);
                for (int i = 0; i < e.n_angles; ++i)
                    angles[i] = -M_PI + 2.0 * M_PI * i / (e.n_angles - 1.0);
            } else {
                if (e.dataset.empty())
                    throw ValidationError("cli: eval needs --dataset or --n-angles");
                art.add_input(e.dataset);
                angles = angles_of(load_dataset_csv(e.dataset), split_from_name(e.split));
            }
            Eigen::MatrixXd rows(angles.size(), ctx.map.n_columns);
            for (Eigen::Index i = 0; i < angles.size(); ++i)
                rows.row(i) =
                    expand_coefficients(forward(model, angles[i]), ctx.map).transpose();
            const Eigen::VectorXd infid = infidelity_loss(angles, rows, ctx);
            std::ofstream out(art.file("fidelity.csv"));
            out << "angle,fidelity,infidelity\n";
            for (Eigen::Index i = 0; i < angles.size(); ++i)
                out << format_g17(angles[i]) << ',' << format_g17(1.0 - infid[i]) << ','
                    << format_g17(infid[i]) << '\n';
            out.close();
            art.add_output("fidelity.csv");
            art.finish();
            std::printf("eval: %lld angles, mean fidelity %.6f, worst %.6f\n",
                        static_cast<long long>(angles.size()), 1.0 - infid.mean(),
                        1.0 - infid.maxCoeff());
        } else if (rep->parsed()) {
            ArtifactDir art(r.out, argc, argv);
            const auto rows = scan_manifests(r.from);
            write_report_csv(art.file("report.csv"), rows);
            write_report_markdown(art.file("report.md"), rows);
            for (const char* name : {"report.csv", "report.md"}) art.add_output(name);
            art.finish();
            std::printf("report: %zu manifests consolidated\n", rows.size());
        }
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
