#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "amc/harness.hpp"

namespace amc {

namespace {

EvalResult evaluate_hoc(const ExperimentConfig& cfg, const std::vector<SymbolFrame>& frames,
                        const std::vector<std::uint8_t>& labels) {
    EvalResult result;
    const long long n = static_cast<long long>(frames.size());
    std::vector<std::uint8_t> guesses(frames.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        const HocResult hoc = classify_hoc(frames[static_cast<std::size_t>(i)],
                                           cfg.hoc_phase_invariant);
        guesses[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(hoc.scheme);
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        // classify_hoc reports a ModulationScheme; map it back to the
        // configured class index.
        int guess_idx = 0;
        for (std::size_t s = 0; s < cfg.schemes.size(); ++s)
            if (static_cast<std::uint8_t>(cfg.schemes[s]) == guesses[i])
                guess_idx = static_cast<int>(s);
        ++result.confusion[labels[i]][guess_idx];
    }
    std::int64_t trace = 0, total = 0;
    for (int t = 0; t < kSchemeCount; ++t) {
        std::int64_t row = 0;
        for (int g = 0; g < kSchemeCount; ++g) row += result.confusion[t][g];
        if (row > 0)
            result.per_class[t] =
                static_cast<double>(result.confusion[t][t]) / static_cast<double>(row);
        trace += result.confusion[t][t];
        total += row;
    }
    result.accuracy = total ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
    return result;
}

std::vector<std::uint8_t> labels_of(const std::vector<SymbolFrame>& frames,
                                    const ExperimentConfig& cfg) {
    std::vector<std::uint8_t> labels(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i)
        for (std::size_t s = 0; s < cfg.schemes.size(); ++s)
            if (cfg.schemes[s] == frames[i].scheme) labels[i] = static_cast<std::uint8_t>(s);
    return labels;
}

SweepResult sweep_images(const ExperimentConfig& cfg, FeatureMode mode,
                         std::vector<std::vector<double>>* trained_params_out = nullptr) {
    SweepResult result;
    result.mode = mode;

    SplitData train_split = build_split(cfg, mode, /*test_split=*/false);
    SplitData test_split = build_split(cfg, mode, /*test_split=*/true);
    result.frame_hash_train = train_split.frame_hash;
    result.frame_hash_test = test_split.frame_hash;

    LabeledImages train_set, val_set;
    split_train_val(train_split.images, cfg.val_fraction, cfg.seed, train_set, val_set);

    const GridSpec grid = mode == FeatureMode::Iq ? cfg.iq_grid() : cfg.polar_grid();
    Network net = build_amc_cnn(grid.rows, grid.cols, derive_seed(cfg.seed, {0xCCC1u}));
    result.train_report = train(net, train_set, val_set, cfg.train);
    result.train_seconds = result.train_report.epochs.empty()
                               ? 0.0
                               : result.train_report.epochs.back().seconds;
    result.epochs_to_threshold = result.train_report.epochs_to_threshold(cfg.threshold_val_acc);

    for (int k = 0; k < static_cast<int>(cfg.snr_list.size()); ++k) {
        LabeledImages sub = images_for_snr(test_split.images, cfg, cfg.test_per_class, k);
        SweepRow row;
        row.snr_db = cfg.snr_list[static_cast<std::size_t>(k)];
        row.eval = evaluate(net, sub);
        result.rows.push_back(row);
    }
    if (trained_params_out) *trained_params_out = net.snapshot_params();
    return result;
}

SweepResult sweep_cumulants(const ExperimentConfig& cfg) {
    SweepResult result;
    result.mode = FeatureMode::Cumulants;
    SplitData test_split = build_split(cfg, FeatureMode::Cumulants, /*test_split=*/true);
    result.frame_hash_test = test_split.frame_hash;

    const int per = cfg.test_per_class;
    const int n_snr = static_cast<int>(cfg.snr_list.size());
    for (int k = 0; k < n_snr; ++k) {
        std::vector<SymbolFrame> frames;
        for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
            const std::size_t base =
                (s * n_snr + static_cast<std::size_t>(k)) * static_cast<std::size_t>(per);
            for (int i = 0; i < per; ++i)
                frames.push_back(test_split.raw[base + static_cast<std::size_t>(i)]);
        }
        SweepRow row;
        row.snr_db = cfg.snr_list[static_cast<std::size_t>(k)];
        row.eval = evaluate_hoc(cfg, frames, labels_of(frames, cfg));
        result.rows.push_back(row);
    }
    return result;
}

SweepResult sweep_ccn(const ExperimentConfig& cfg,
                      const std::vector<std::vector<double>>* warm_cnn_params) {
    SweepResult result;
    result.mode = FeatureMode::Ccn;

    SplitData train_split = build_split(cfg, FeatureMode::Ccn, /*test_split=*/false);
    SplitData test_split = build_split(cfg, FeatureMode::Ccn, /*test_split=*/true);
    result.frame_hash_train = train_split.frame_hash;
    result.frame_hash_test = test_split.frame_hash;

    FrameDataset train_set, val_set;
    split_train_val_frames(train_split.frames, cfg.val_fraction, cfg.seed, train_set, val_set);

    CcnSpec spec;
    spec.input_grid = cfg.ccn_grid();
    CcnPipeline pipeline(spec, cfg.polar_grid(), derive_seed(cfg.seed, {0xCC2u}));

    std::vector<std::vector<double>> loaded_warm;
    if (warm_cnn_params == nullptr && cfg.ccn_warm_start && !cfg.warm_start_checkpoint.empty()) {
        std::ifstream ckpt(cfg.warm_start_checkpoint, std::ios::binary);
        if (!ckpt) throw DataError("cannot open warm-start checkpoint: " +
                                   cfg.warm_start_checkpoint);
        std::vector<Network> nets = load_networks(ckpt);
        if (nets.empty() || nets.back().net_kind() != kNetKindCnn)
            throw DataError("warm-start checkpoint does not contain a classifier network");
        loaded_warm = nets.back().snapshot_params();
        warm_cnn_params = &loaded_warm;
    }
    if (warm_cnn_params != nullptr) pipeline.cnn().restore_params(*warm_cnn_params);

    JointTrainReport joint = train_joint(pipeline, train_set, val_set, cfg.train);
    for (const JointEpochStats& e : joint.epochs) result.train_report.epochs.push_back(e.base);
    result.train_report.best_epoch = joint.best_epoch;
    result.train_report.best_val_acc = joint.best_val_acc;
    result.train_seconds =
        joint.epochs.empty() ? 0.0 : joint.epochs.back().base.seconds;
    result.epochs_to_threshold = joint.epochs_to_threshold(cfg.threshold_val_acc);

    for (int k = 0; k < static_cast<int>(cfg.snr_list.size()); ++k) {
        FrameDataset sub = frames_for_snr(test_split.frames, cfg, cfg.test_per_class, k);
        SweepRow row;
        row.snr_db = cfg.snr_list[static_cast<std::size_t>(k)];
        row.eval = evaluate_pipeline(pipeline, sub);
        result.rows.push_back(row);
    }
    return result;
}

}  // namespace

double SweepResult::mean_accuracy() const {
    if (rows.empty()) return 0.0;
    double sum = 0.0;
    for (const SweepRow& r : rows) sum += r.eval.accuracy;
    return sum / static_cast<double>(rows.size());
}

std::optional<double> SweepResult::accuracy_at(double snr_db) const {
    for (const SweepRow& r : rows)
        if (r.snr_db == snr_db) return r.eval.accuracy;
    return std::nullopt;
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    switch (cfg.mode) {
        case FeatureMode::Cumulants:
            return sweep_cumulants(cfg);
        case FeatureMode::Ccn:
            return sweep_ccn(cfg, nullptr);
        case FeatureMode::Polar:
            return sweep_images(cfg, FeatureMode::Polar);
        case FeatureMode::Iq:
            return sweep_images(cfg, FeatureMode::Iq);
    }
    throw DataError("run_sweep: bad mode");
}

ConvergenceResult compare_convergence(const ExperimentConfig& cfg) {
    cfg.validate();
    ConvergenceResult result;

    for (FeatureMode mode : {FeatureMode::Polar, FeatureMode::Iq}) {
        SplitData split = build_split(cfg, mode, /*test_split=*/false);
        LabeledImages train_set, val_set;
        split_train_val(split.images, cfg.val_fraction, cfg.seed, train_set, val_set);

        const GridSpec grid = mode == FeatureMode::Iq ? cfg.iq_grid() : cfg.polar_grid();
        Network net = build_amc_cnn(grid.rows, grid.cols, derive_seed(cfg.seed, {0xCCC1u}));
        TrainReport report = train(net, train_set, val_set, cfg.train, cfg.threshold_val_acc);

        ConvergenceEntry entry;
        entry.mode = mode;
        entry.epochs = static_cast<int>(report.epochs.size());
        entry.reached = report.epochs_to_threshold(cfg.threshold_val_acc) > 0;
        entry.seconds = report.epochs.empty() ? 0.0 : report.epochs.back().seconds;
        (mode == FeatureMode::Polar ? result.polar : result.iq) = entry;
    }
    return result;
}

FadingExperimentResult run_fading_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    if (!cfg.fading) throw DataError("fading-experiment requires fading=1");

    FadingExperimentResult result;
    result.iq = sweep_images(cfg, FeatureMode::Iq);
    std::vector<std::vector<double>> polar_params;
    result.polar = sweep_images(cfg, FeatureMode::Polar,
                                cfg.ccn_warm_start ? &polar_params : nullptr);
    result.polar_ccn = sweep_ccn(cfg, cfg.ccn_warm_start ? &polar_params : nullptr);

    // The three systems must have consumed identical channel realizations.
    if (result.iq.frame_hash_test != result.polar.frame_hash_test ||
        result.polar.frame_hash_test != result.polar_ccn.frame_hash_test ||
        result.iq.frame_hash_train != result.polar.frame_hash_train ||
        result.polar.frame_hash_train != result.polar_ccn.frame_hash_train)
        throw DataError("fading-experiment: frame hash mismatch between systems");
    return result;
}

void write_sweep_csv(std::ostream& out, const std::vector<const SweepResult*>& results) {
    out << "mode,snr_db,accuracy,acc_QPSK,acc_8PSK,acc_16QAM,acc_64QAM\n";
    char line[200];
    for (const SweepResult* res : results) {
        for (const SweepRow& row : res->rows) {
            std::snprintf(line, sizeof line, "%s,%g,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                          mode_name(res->mode), row.snr_db, row.eval.accuracy,
                          row.eval.per_class[0], row.eval.per_class[1], row.eval.per_class[2],
                          row.eval.per_class[3]);
            out << line;
        }
    }
}

void write_confusion_csv(std::ostream& out, const std::vector<const SweepResult*>& results) {
    out << "mode,snr_db,true_scheme,pred_scheme,count\n";
    char line[160];
    const char* names[kSchemeCount] = {"QPSK", "8PSK", "16QAM", "64QAM"};
    for (const SweepResult* res : results)
        for (const SweepRow& row : res->rows)
            for (int t = 0; t < kSchemeCount; ++t)
                for (int g = 0; g < kSchemeCount; ++g) {
                    std::snprintf(line, sizeof line, "%s,%g,%s,%s,%lld\n", mode_name(res->mode),
                                  row.snr_db, names[t], names[g],
                                  static_cast<long long>(row.eval.confusion[t][g]));
                    out << line;
                }
}

void write_convergence_csv(std::ostream& out, const ConvergenceResult& result) {
    out << "mode,epochs,reached_threshold,seconds\n";
    char line[120];
    for (const ConvergenceEntry* e : {&result.polar, &result.iq}) {
        std::snprintf(line, sizeof line, "%s,%d,%s,%.3f\n", mode_name(e->mode), e->epochs,
                      e->reached ? "yes" : "not_reached", e->seconds);
        out << line;
    }
}

void write_cumulants_table(std::ostream& out) {
    out << "scheme,C20_re,C20_im,C21,C40_re,C40_im,C41_re,C41_im,C42\n";
    char line[240];
    for (int k = 0; k < kSchemeCount; ++k) {
        const auto scheme = static_cast<ModulationScheme>(k);
        const CumulantVector c = theoretical_cumulants(scheme);
        std::snprintf(line, sizeof line, "%s,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      scheme_name(scheme), c.c20.real(), c.c20.imag(), c.c21.real(),
                      c.c40.real(), c.c40.imag(), c.c41.real(), c.c41.imag(), c.c42.real());
        out << line;
    }
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman: need two equal-length series");

    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(),
                  [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> rank(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
            for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
            i = j + 1;
        }
        return rank;
    };

    const std::vector<double> rx = ranks(x), ry = ranks(y);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(rx.size());
    my /= static_cast<double>(ry.size());
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if (vx == 0.0 || vy == 0.0) return 0.0;
    return cov / std::sqrt(vx * vy);
}

}  // namespace amc
