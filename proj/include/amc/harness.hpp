#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "amc/ccn.hpp"
#include "amc/cumulants.hpp"
#include "amc/features.hpp"
#include "amc/modem.hpp"
#include "amc/nn_train.hpp"

namespace amc {

// Dataset/config problems the CLI maps to exit code 3.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class FeatureMode { Polar, Iq, Cumulants, Ccn };

const char* mode_name(FeatureMode m);
FeatureMode mode_from_name(const std::string& name);

struct ExperimentConfig {
    std::vector<ModulationScheme> schemes = {
        ModulationScheme::QPSK, ModulationScheme::PSK8,
        ModulationScheme::QAM16, ModulationScheme::QAM64};
    int symbol_length = 1000;
    int train_per_class = 5000;  // per scheme per SNR
    int test_per_class = 1000;
    std::vector<double> snr_list = {-4, -2, 0, 2, 4, 6, 8, 10, 12};
    FeatureMode mode = FeatureMode::Polar;
    bool fading = false;
    FadingDistribution fading_dist{};
    double f0 = 0.0;  // supported by the simulator; experiment configs keep 0
    int polar_res = 36;
    int iq_res = 64;
    int ccn_input_res = 16;
    double val_fraction = 0.1;
    double threshold_val_acc = 0.85;
    bool hoc_phase_invariant = false;
    bool ccn_warm_start = false;
    std::string warm_start_checkpoint;
    std::uint64_t seed = 1;
    TrainConfig train{};
    std::string out_dir = "runs/out";

    GridSpec polar_grid() const { return GridSpec::polar_default(polar_res); }
    GridSpec iq_grid() const { return GridSpec::iq_default(iq_res); }
    GridSpec ccn_grid() const { return GridSpec::ccn_input_default(ccn_input_res); }

    void validate() const;  // throws DataError
};

// Plain key=value config file; '#' starts a comment. profile=desk|paper
// applies the two shipped scale presets before the remaining keys.
ExperimentConfig load_config(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void apply_profile(ExperimentConfig& cfg, const std::string& profile);

// Canonical serialization (sorted key=value lines) and its hash; manifests
// embed the hash and re-verify it when a dataset is loaded.
std::string canonical_config(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

// --- in-memory generation -------------------------------------------------

// One received frame, fully determined by (seed, scheme, snr index, split,
// frame index): symbols, then the fading draw when enabled, then noise, all
// from the frame's derived stream.
SymbolFrame make_received_frame(const ExperimentConfig& cfg, ModulationScheme scheme,
                                int snr_idx, bool test_split, int frame_idx,
                                ChannelTruth* truth_out = nullptr);

struct SplitData {
    LabeledImages images;           // polar / iq modes
    FrameDataset frames;            // ccn mode (polar pairs)
    std::vector<SymbolFrame> raw;   // cumulants mode (test split only)
    std::vector<ChannelTruth> truth;
    std::uint64_t frame_hash = 0;   // over the underlying received frames
};

// Layout is scheme-major, then SNR, then frame index.
SplitData build_split(const ExperimentConfig& cfg, FeatureMode mode, bool test_split);

LabeledImages images_for_snr(const LabeledImages& all, const ExperimentConfig& cfg,
                             int per_class, int snr_idx);
FrameDataset frames_for_snr(const FrameDataset& all, const ExperimentConfig& cfg,
                            int per_class, int snr_idx);

// Deterministic validation carve-out (val_fraction of the pool).
void split_train_val(const LabeledImages& all, double fraction, std::uint64_t seed,
                     LabeledImages& train_out, LabeledImages& val_out);
void split_train_val_frames(const FrameDataset& all, double fraction, std::uint64_t seed,
                            FrameDataset& train_out, FrameDataset& val_out);

// --- persistence ------------------------------------------------------------

// Writes the dataset for cfg.mode under cfg.out_dir/dataset_<mode>/ with a
// manifest; regeneration with the same config is bit-identical. Partial
// outputs are removed on failure.
std::string generate_dataset(const ExperimentConfig& cfg);

struct StoredDataset {
    SplitData train;
    SplitData test;
};
// Verifies the manifest's config hash against cfg before loading.
StoredDataset load_dataset(const ExperimentConfig& cfg);

// --- experiments ------------------------------------------------------------

struct SweepRow {
    double snr_db = 0.0;
    EvalResult eval;
};

struct SweepResult {
    FeatureMode mode = FeatureMode::Polar;
    std::vector<SweepRow> rows;
    TrainReport train_report;          // empty for cumulants mode
    double train_seconds = 0.0;
    int epochs_to_threshold = -1;      // -1 = never reached
    std::uint64_t frame_hash_train = 0;
    std::uint64_t frame_hash_test = 0;

    double mean_accuracy() const;
    std::optional<double> accuracy_at(double snr_db) const;
};

// Trains one model on the pooled multi-SNR training set (or classifies
// directly in cumulants mode) and evaluates per SNR.
SweepResult run_sweep(const ExperimentConfig& cfg);

struct ConvergenceEntry {
    FeatureMode mode = FeatureMode::Polar;
    int epochs = 0;         // epochs run; equals max epochs when not reached
    bool reached = false;
    double seconds = 0.0;   // cumulative wall time at stop
};

struct ConvergenceResult {
    ConvergenceEntry polar;
    ConvergenceEntry iq;
};

// Identical frames and TrainConfig for both feature modes; training stops
// at the first epoch whose validation accuracy reaches the threshold.
ConvergenceResult compare_convergence(const ExperimentConfig& cfg);

struct FadingExperimentResult {
    SweepResult iq;
    SweepResult polar;
    SweepResult polar_ccn;
};

// Three systems on identical faded frames: I-Q CNN, polar CNN, polar
// CNN + CCN (joint training through the soft rasterizer).
FadingExperimentResult run_fading_experiment(const ExperimentConfig& cfg);

// --- reporting ---------------------------------------------------------------

void write_sweep_csv(std::ostream& out, const std::vector<const SweepResult*>& results);
void write_confusion_csv(std::ostream& out, const std::vector<const SweepResult*>& results);
void write_convergence_csv(std::ostream& out, const ConvergenceResult& result);
void write_cumulants_table(std::ostream& out);

// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& x, const std::vector<double>& y);

int run_cli(int argc, char** argv);

}  // namespace amc
