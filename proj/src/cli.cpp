#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "amc/harness.hpp"

namespace fs = std::filesystem;

namespace amc {

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
    auto* c = cmd->add_option("--config", opts.config_path, "key=value config file");
    if (config_required) c->required();
    cmd->add_option("--seed", opts.seed, "override the master seed");
    cmd->add_option("--mode", opts.mode, "override the feature mode (polar|iq|cumulants|ccn)");
    cmd->add_option("--out", opts.out_dir, "override the output directory");
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
    ExperimentConfig cfg =
        opts.config_path.empty() ? ExperimentConfig{} : load_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.mode) cfg.mode = mode_from_name(*opts.mode);
    if (opts.out_dir) cfg.out_dir = *opts.out_dir;
    cfg.validate();
    return cfg;
}

std::ofstream open_out(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    return out;
}

fs::path checkpoint_path(const ExperimentConfig& cfg) {
    return fs::path(cfg.out_dir) / (std::string("model_") + mode_name(cfg.mode) + ".bin");
}

void cmd_gen_data(const CommonOpts& opts) {
    const ExperimentConfig cfg = resolve_config(opts);
    const std::string dir = generate_dataset(cfg);
    std::cout << "dataset written to " << dir << "\n";
}

void cmd_train(const CommonOpts& opts) {
    ExperimentConfig cfg = resolve_config(opts);
    if (cfg.mode == FeatureMode::Cumulants)
        throw DataError("cumulants mode has no trainable model; use `sweep --mode cumulants`");

    const StoredDataset ds = load_dataset(cfg);
    const fs::path model_path = checkpoint_path(cfg);
    fs::create_directories(model_path.parent_path());

    if (cfg.mode == FeatureMode::Ccn) {
        FrameDataset train_set, val_set;
        split_train_val_frames(ds.train.frames, cfg.val_fraction, cfg.seed, train_set, val_set);
        CcnSpec spec;
        spec.input_grid = cfg.ccn_grid();
        CcnPipeline pipeline(spec, cfg.polar_grid(), derive_seed(cfg.seed, {0xCC2u}));
        if (cfg.ccn_warm_start && !cfg.warm_start_checkpoint.empty()) {
            std::ifstream ckpt(cfg.warm_start_checkpoint, std::ios::binary);
            if (!ckpt)
                throw DataError("cannot open warm-start checkpoint: " + cfg.warm_start_checkpoint);
            std::vector<Network> nets = load_networks(ckpt);
            if (nets.empty() || nets.back().net_kind() != kNetKindCnn)
                throw DataError("warm-start checkpoint does not contain a classifier network");
            pipeline.cnn().restore_params(nets.back().snapshot_params());
        }
        const JointTrainReport report = train_joint(pipeline, train_set, val_set, cfg.train);
        std::ofstream model(model_path, std::ios::binary);
        pipeline.save(model);
        auto csv = open_out(fs::path(cfg.out_dir) / "train_report_ccn.csv");
        report.write_csv(csv);
    } else {
        LabeledImages train_set, val_set;
        split_train_val(ds.train.images, cfg.val_fraction, cfg.seed, train_set, val_set);
        const GridSpec grid =
            cfg.mode == FeatureMode::Iq ? cfg.iq_grid() : cfg.polar_grid();
        Network net = build_amc_cnn(grid.rows, grid.cols, derive_seed(cfg.seed, {0xCCC1u}));
        const TrainReport report = train(net, train_set, val_set, cfg.train);
        std::ofstream model(model_path, std::ios::binary);
        save_networks(model, {&net});
        auto csv = open_out(fs::path(cfg.out_dir) /
                            (std::string("train_report_") + mode_name(cfg.mode) + ".csv"));
        report.write_csv(csv);
    }
    std::cout << "checkpoint written to " << model_path.string() << "\n";
}

void cmd_eval(const CommonOpts& opts, const std::string& checkpoint,
              const std::string& dump_compensation_path) {
    ExperimentConfig cfg = resolve_config(opts);
    if (cfg.mode == FeatureMode::Cumulants)
        throw DataError("cumulants mode has no checkpoint; use `sweep --mode cumulants`");

    const StoredDataset ds = load_dataset(cfg);
    const fs::path model_path =
        checkpoint.empty() ? checkpoint_path(cfg) : fs::path(checkpoint);
    std::ifstream model(model_path, std::ios::binary);
    if (!model)
        throw DataError("cannot open checkpoint: " + model_path.string() + " (run train first)");

    SweepResult result;
    result.mode = cfg.mode;
    if (cfg.mode == FeatureMode::Ccn) {
        CcnSpec spec;
        spec.input_grid = cfg.ccn_grid();
        CcnPipeline pipeline = CcnPipeline::load(model, spec, cfg.polar_grid());
        for (int k = 0; k < static_cast<int>(cfg.snr_list.size()); ++k) {
            FrameDataset sub = frames_for_snr(ds.test.frames, cfg, cfg.test_per_class, k);
            result.rows.push_back(
                SweepRow{cfg.snr_list[static_cast<std::size_t>(k)], evaluate_pipeline(pipeline, sub)});
        }
        if (!dump_compensation_path.empty()) {
            auto dump = open_out(dump_compensation_path);
            dump_compensation(pipeline, ds.test.frames, dump);
        }
    } else {
        std::vector<Network> nets = load_networks(model);
        if (nets.size() != 1 || nets[0].net_kind() != kNetKindCnn)
            throw DataError("checkpoint does not contain a single classifier network");
        for (int k = 0; k < static_cast<int>(cfg.snr_list.size()); ++k) {
            LabeledImages sub = images_for_snr(ds.test.images, cfg, cfg.test_per_class, k);
            result.rows.push_back(
                SweepRow{cfg.snr_list[static_cast<std::size_t>(k)], evaluate(nets[0], sub)});
        }
    }

    auto csv = open_out(fs::path(cfg.out_dir) /
                        (std::string("eval_") + mode_name(cfg.mode) + ".csv"));
    write_sweep_csv(csv, {&result});
    auto conf = open_out(fs::path(cfg.out_dir) /
                         (std::string("eval_confusion_") + mode_name(cfg.mode) + ".csv"));
    write_confusion_csv(conf, {&result});
    write_sweep_csv(std::cout, {&result});
}

void cmd_sweep(const CommonOpts& opts) {
    const ExperimentConfig cfg = resolve_config(opts);
    const SweepResult result = run_sweep(cfg);

    auto csv = open_out(fs::path(cfg.out_dir) /
                        (std::string("sweep_") + mode_name(cfg.mode) + ".csv"));
    write_sweep_csv(csv, {&result});
    auto conf = open_out(fs::path(cfg.out_dir) /
                         (std::string("confusion_") + mode_name(cfg.mode) + ".csv"));
    write_confusion_csv(conf, {&result});
    if (!result.train_report.epochs.empty()) {
        auto report = open_out(fs::path(cfg.out_dir) /
                               (std::string("train_report_") + mode_name(cfg.mode) + ".csv"));
        result.train_report.write_csv(report);
    }
    write_sweep_csv(std::cout, {&result});
}

void cmd_compare_convergence(const CommonOpts& opts) {
    const ExperimentConfig cfg = resolve_config(opts);
    const ConvergenceResult result = compare_convergence(cfg);
    auto csv = open_out(fs::path(cfg.out_dir) / "convergence.csv");
    write_convergence_csv(csv, result);
    write_convergence_csv(std::cout, result);
}

void cmd_fading_experiment(const CommonOpts& opts) {
    ExperimentConfig cfg = resolve_config(opts);
    cfg.fading = true;
    const FadingExperimentResult result = run_fading_experiment(cfg);
    auto csv = open_out(fs::path(cfg.out_dir) / "fading_sweep.csv");
    write_sweep_csv(csv, {&result.iq, &result.polar, &result.polar_ccn});
    auto conf = open_out(fs::path(cfg.out_dir) / "fading_confusion.csv");
    write_confusion_csv(conf, {&result.iq, &result.polar, &result.polar_ccn});
    write_sweep_csv(std::cout, {&result.iq, &result.polar, &result.polar_ccn});
}

void cmd_render(const std::string& scheme_name_str, double snr_db, const std::string& mode,
                bool noiseless, bool fading, std::uint64_t seed, int symbols,
                const std::string& out_path) {
    const ModulationScheme scheme = scheme_from_name(scheme_name_str);
    Rng rng(derive_seed(seed, {0x9E4De7u}));
    SymbolFrame tx = generate_frame(scheme, static_cast<std::size_t>(symbols), rng);

    ChannelParams params;
    if (fading) params = sample_fading(FadingDistribution{}, rng);
    params.snr_db = snr_db;
    params.noiseless = noiseless;
    const SymbolFrame rx = apply_channel(tx, params, rng);

    ConstellationImage img;
    if (mode == "iq")
        img = rasterize_iq(rx, GridSpec::iq_default());
    else if (mode == "polar")
        img = rasterize_polar(to_polar(rx), GridSpec::polar_default());
    else
        throw DataError("render: mode must be polar or iq");

    fs::path path(out_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + out_path);
    write_pgm(out, img);
    std::cout << "wrote " << out_path << "\n";
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"modulation classification lab: channel simulation, polar features, "
                 "cumulant baseline, CNN training, channel compensation"};
    app.require_subcommand(1);

    CommonOpts gen_opts, train_opts, eval_opts, sweep_opts, conv_opts, fade_opts;

    auto* gen = app.add_subcommand("gen-data", "generate and persist a dataset");
    add_common(gen, gen_opts);

    auto* tr = app.add_subcommand("train", "train a model on a persisted dataset");
    add_common(tr, train_opts);

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint per SNR");
    add_common(ev, eval_opts);
    std::string eval_checkpoint, dump_comp;
    ev->add_option("--checkpoint", eval_checkpoint, "checkpoint file (default per config)");
    ev->add_option("--dump-compensation", dump_comp,
                   "write per-frame (delta_r, delta_theta, a, theta0) CSV (ccn mode)");

    auto* sw = app.add_subcommand("sweep", "train once, evaluate across the SNR list");
    add_common(sw, sweep_opts);

    auto* cc = app.add_subcommand("compare-convergence",
                                  "epochs/seconds to the validation threshold, polar vs iq");
    add_common(cc, conv_opts);

    auto* fe = app.add_subcommand("fading-experiment",
                                  "iq CNN vs polar CNN vs polar CNN+CCN under fading");
    add_common(fe, fade_opts);

    auto* ct = app.add_subcommand("cumulants-table",
                                  "print the theoretical cumulant table as CSV");

    auto* rn = app.add_subcommand("render", "rasterize one frame to a PGM image");
    std::string rn_scheme = "QPSK", rn_mode = "polar", rn_out = "constellation.pgm";
    double rn_snr = 10.0;
    bool rn_noiseless = false, rn_fading = false;
    int rn_symbols = 1000;
    std::uint64_t rn_seed = 1;
    rn->add_option("--scheme", rn_scheme, "QPSK|8PSK|16QAM|64QAM");
    rn->add_option("--snr", rn_snr, "SNR in dB");
    rn->add_option("--mode", rn_mode, "polar|iq");
    rn->add_flag("--noiseless", rn_noiseless, "skip the noise term");
    rn->add_flag("--fading", rn_fading, "draw fading parameters");
    rn->add_option("--symbols", rn_symbols, "symbols per frame");
    rn->add_option("--seed", rn_seed, "seed");
    rn->add_option("--out", rn_out, "output PGM path");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) cmd_gen_data(gen_opts);
        if (tr->parsed()) cmd_train(train_opts);
        if (ev->parsed()) cmd_eval(eval_opts, eval_checkpoint, dump_comp);
        if (sw->parsed()) cmd_sweep(sweep_opts);
        if (cc->parsed()) cmd_compare_convergence(conv_opts);
        if (fe->parsed()) cmd_fading_experiment(fade_opts);
        if (ct->parsed()) write_cumulants_table(std::cout);
        if (rn->parsed())
            cmd_render(rn_scheme, rn_snr, rn_mode, rn_noiseless, rn_fading, rn_seed, rn_symbols,
                       rn_out);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help
        app.exit(e);
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace amc
