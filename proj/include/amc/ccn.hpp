#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "amc/features.hpp"
#include "amc/nn_train.hpp"

namespace amc {

struct CompensationParams {
    double delta_r = 1.0;      // multiplicative radius correction, > 0
    double delta_theta = 0.0;  // additive phase correction, radians
};

struct CcnSpec {
    // Coarse summary of the raw received symbols; the radius range is
    // doubled relative to the classifier grid so amplitude factors up to 2
    // stay in view.
    GridSpec input_grid = GridSpec::ccn_input_default();
    std::array<int, 3> hidden{256, 128, 64};  // plus the 2-wide output head
};

// Four dense layers with ReLU between, zero-initialized head so the
// untouched network emits the identity compensation.
Network build_ccn(const CcnSpec& spec, std::uint64_t seed);

// Head outputs (u, v) map to delta_r = exp(u), delta_theta = pi*tanh(v):
// positive radius correction and bounded phase by construction.
CompensationParams head_to_params(double u, double v);

// Max-normalized soft histogram of the raw polar pairs on the CCN grid.
Tensor ccn_input_summary(const PolarFrame& polar, const GridSpec& grid);

CompensationParams ccn_forward(const PolarFrame& polar, Network& ccn, const CcnSpec& spec);

// r' = r * delta_r, theta' = wrap(theta + delta_theta) into [-pi, pi].
PolarFrame compensate(const PolarFrame& polar, const CompensationParams& params);

double wrap_angle(double theta);  // into [-pi, pi]

// Polar frames in trainable form, with the channel ground truth kept as a
// diagnostic sidecar (never used in the loss).
struct ChannelTruth {
    double a = 1.0;
    double theta0 = 0.0;
    double snr_db = 0.0;
};

struct FrameDataset {
    int symbols_per_frame = 0;
    std::vector<float> pairs;  // count * L * 2, interleaved (r, theta)
    std::vector<std::uint8_t> labels;
    std::vector<ChannelTruth> truth;

    std::size_t count() const { return labels.size(); }
    PolarFrame frame(std::size_t i) const;
};

// CCN + classifier trained end to end through the soft rasterizer.
class CcnPipeline {
  public:
    CcnPipeline(CcnSpec spec, GridSpec cnn_grid, std::uint64_t seed);
    CcnPipeline(CcnSpec spec, GridSpec cnn_grid, Network ccn, Network cnn);

    // to_polar input -> ccn -> compensate -> soft rasterize -> classifier.
    Tensor forward(const std::vector<PolarFrame>& frames, bool training);
    // Backpropagates through the classifier, the normalization, the splat,
    // the compensation, and the CCN. Parameter grads accumulate.
    void backward(const Tensor& dprobs);

    // Class probabilities for one frame (inference mode).
    std::vector<double> predict(const PolarFrame& polar);
    CompensationParams compensation_for(const PolarFrame& polar);

    Network& ccn() { return ccn_; }
    Network& cnn() { return cnn_; }
    const CcnSpec& spec() const { return spec_; }
    const GridSpec& cnn_grid() const { return cnn_grid_; }

    void save(std::ostream& out) const;
    static CcnPipeline load(std::istream& in, const CcnSpec& spec, const GridSpec& cnn_grid);

  private:
    CcnSpec spec_;
    GridSpec cnn_grid_;
    Network ccn_;
    Network cnn_;

    // per-frame state from the last training forward
    struct FrameState {
        std::vector<double> raw_r;
        SoftImage splat;
        std::vector<double> raw_grid;
        int argmax = -1;
        std::vector<double> map_dr, map_dtheta;  // dS/d(delta_r), dS/d(delta_theta)
        double delta_r = 1.0, delta_theta = 0.0, v = 0.0;
    };
    std::vector<FrameState> state_;
};

struct JointEpochStats {
    EpochStats base;
    double mean_abs_dtheta_err = 0.0;  // vs -theta0, wrapped mod constellation symmetry
    double mean_abs_dr_err = 0.0;      // |delta_r * a - 1|
};

struct JointTrainReport {
    std::vector<JointEpochStats> epochs;
    int best_epoch = 0;
    double best_val_acc = 0.0;

    int epochs_to_threshold(double threshold) const;
    void write_csv(std::ostream& out) const;
};

JointTrainReport train_joint(CcnPipeline& pipeline, const FrameDataset& train_set,
                             const FrameDataset& val_set, const TrainConfig& config);

EvalResult evaluate_pipeline(CcnPipeline& pipeline, const FrameDataset& test_set);

// CSV rows of (delta_r, delta_theta, a, theta0) per frame.
void dump_compensation(CcnPipeline& pipeline, const FrameDataset& set, std::ostream& out);

}  // namespace amc
