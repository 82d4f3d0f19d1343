#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "amc/modem.hpp"
#include "amc/nn.hpp"

namespace amc {

struct TrainConfig {
    enum class Optimizer { Sgd, Adam };

    double learning_rate = 1e-3;
    int batch_size = 64;
    int epochs = 20;
    Optimizer optimizer = Optimizer::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
};

// Mean over the batch of -sum_i y_i log(max(p_i, 1e-12)). labels must be
// one-hot rows; otherwise throws std::invalid_argument. When dpred is
// non-null it receives dLoss/dpred for the recorded batch.
double cross_entropy(const Tensor& pred, const Tensor& labels, Tensor* dpred = nullptr);

// Optimizer state lives outside the network so a training loop owns it.
class Optimizer {
  public:
    explicit Optimizer(const TrainConfig& config) : config_(config) {}
    // w <- w - lr*g for SGD, bias-corrected moments for Adam. Parameter
    // order is the network's; deterministic.
    void step(const std::vector<Tensor*>& params);

  private:
    TrainConfig config_;
    long long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// In-memory labeled image set (single channel).
struct LabeledImages {
    int rows = 0, cols = 0;
    std::vector<float> images;        // count * rows * cols, row-major
    std::vector<std::uint8_t> labels; // class ids < kSchemeCount

    std::size_t count() const { return labels.size(); }
    std::size_t image_size() const { return static_cast<std::size_t>(rows) * cols; }
    const float* image(std::size_t i) const { return images.data() + image_size() * i; }
};

struct EpochStats {
    int epoch = 0;          // 1-based
    double loss = 0.0;      // mean batch loss over the epoch
    double train_acc = 0.0; // running accuracy over training batches
    double val_acc = 0.0;
    double seconds = 0.0;   // cumulative wall time since training started
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;  // 1-based epoch of the retained snapshot
    double best_val_acc = 0.0;

    // First epoch whose validation accuracy reaches the threshold, or -1.
    int epochs_to_threshold(double threshold) const;
    void write_csv(std::ostream& out) const;  // epoch,loss,train_acc,val_acc,seconds
};

struct EvalResult {
    double accuracy = 0.0;
    std::array<double, kSchemeCount> per_class{};
    std::array<std::array<std::int64_t, kSchemeCount>, kSchemeCount> confusion{};  // [true][pred]
};

// Mini-batch training with per-epoch seeded shuffling. The parameters of
// the best-validation epoch are restored into the network on return.
// stop_at_val_acc > 0 ends training after the first epoch reaching that
// validation accuracy (used by the convergence comparison).
// Throws std::invalid_argument on an empty training set and NumericError
// if the loss goes non-finite.
TrainReport train(Network& net, const LabeledImages& train_set, const LabeledImages& val_set,
                  const TrainConfig& config, double stop_at_val_acc = -1.0);

EvalResult evaluate(Network& net, const LabeledImages& test_set);

// Four conv + three dense stack from the classifier design:
// conv16-conv16-pool-conv32-conv32-pool, dense 128/64/4, dropout 0.5,
// softmax head; He-uniform init, zero biases.
Network build_amc_cnn(int rows, int cols, std::uint64_t seed);

// Batch assembly helpers shared by training and the experiment harness.
Tensor batch_images(const LabeledImages& set, const std::vector<std::uint32_t>& idx,
                    std::size_t begin, std::size_t end);
Tensor batch_onehot(const LabeledImages& set, const std::vector<std::uint32_t>& idx,
                    std::size_t begin, std::size_t end);

}  // namespace amc
