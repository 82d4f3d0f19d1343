#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "amc/rng.hpp"
#include "amc/tensor.hpp"

namespace amc {

// Loss went NaN/Inf; the CLI maps this to its numeric-failure exit code.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Shape3 {
    int c = 0, h = 0, w = 0;
    std::size_t numel() const { return static_cast<std::size_t>(c) * h * w; }
    bool operator==(const Shape3&) const = default;
};

enum class LayerKind : std::uint32_t {
    Conv2d = 1,
    ReLU = 2,
    MaxPool = 3,
    Dense = 4,
    Dropout = 5,
    Softmax = 6,
};

class Layer {
  public:
    virtual ~Layer() = default;
    virtual LayerKind kind() const = 0;
    // Validates the incoming shape and fixes parameter shapes; called once
    // when the layer is added to a network.
    virtual Shape3 attach(Shape3 in, Rng& init_rng) = 0;
    virtual void forward(const Tensor& in, Tensor& out, bool training, Rng& dropout_rng) = 0;
    // in/out are the activations recorded by the owning network's forward
    // pass; parameter grads accumulate, din is overwritten.
    virtual void backward(const Tensor& in, const Tensor& out, const Tensor& dout,
                          Tensor& din) = 0;
    virtual std::vector<Tensor*> params() { return {}; }
    virtual void save_config(std::ostream& out) const = 0;
};

std::unique_ptr<Layer> make_conv2d(int out_channels, int kh, int kw, int stride = 1, int pad = 0);
std::unique_ptr<Layer> make_relu();
std::unique_ptr<Layer> make_maxpool(int ph, int pw);
// Dense flattens whatever shape it receives. zero_init gives exactly-zero
// weights and biases (identity head for the compensation network).
std::unique_ptr<Layer> make_dense(int out_dim, bool zero_init = false);
std::unique_ptr<Layer> make_dropout(double p);
std::unique_ptr<Layer> make_softmax();

// Network kinds stored in checkpoints.
inline constexpr std::uint32_t kNetKindCnn = 1;
inline constexpr std::uint32_t kNetKindCcn = 2;

class Network {
  public:
    Network() = default;
    // seed drives both parameter initialization (per-layer derived streams)
    // and the dropout mask stream.
    Network(Shape3 input, std::uint32_t net_kind, std::uint64_t seed);

    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    void add(std::unique_ptr<Layer> layer);

    // batch shape must be {B, c, h, w} matching the input spec.
    // Output has shape {B, out.c, out.h, out.w}.
    Tensor forward(const Tensor& batch, bool training);
    // dout matches the last forward's output; returns the input gradient
    // and accumulates parameter gradients. Throws std::logic_error if no
    // forward pass is recorded.
    Tensor backward(const Tensor& dout);

    std::vector<Tensor*> parameters();
    void zero_grad();
    std::size_t parameter_count();

    // Deep copy / restore of parameter values (best-validation snapshots).
    std::vector<std::vector<double>> snapshot_params();
    void restore_params(const std::vector<std::vector<double>>& snap);

    Shape3 input_shape() const { return input_; }
    Shape3 output_shape() const { return current_; }
    std::uint32_t net_kind() const { return net_kind_; }
    bool training_mode() const { return training_; }

    void save(std::ostream& out) const;
    static Network load(std::istream& in);

  private:
    friend void save_networks(std::ostream&, const std::vector<const Network*>&);
    Shape3 input_{};
    Shape3 current_{};
    std::uint32_t net_kind_ = kNetKindCnn;
    std::uint64_t seed_ = 0;
    int layers_added_ = 0;
    bool training_ = false;
    bool forward_recorded_ = false;
    Rng init_rng_{0};
    Rng dropout_rng_{0};
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<Tensor> acts_;    // activations between layers, kept for backward
    std::vector<Tensor> bgrads_;  // persistent gradient slots, one per boundary
};

// Checkpoint container: magic, version, network count, then each network.
void save_networks(std::ostream& out, const std::vector<const Network*>& nets);
std::vector<Network> load_networks(std::istream& in);

}  // namespace amc
