#include <cstring>
#include <istream>
#include <ostream>

#include "amc/nn.hpp"

namespace amc {

namespace {

constexpr char kMagic[4] = {'A', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("checkpoint: truncated");
    return v;
}

double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("checkpoint: truncated");
    return v;
}

}  // namespace

Network::Network(Shape3 input, std::uint32_t net_kind, std::uint64_t seed)
    : input_(input),
      current_(input),
      net_kind_(net_kind),
      seed_(seed),
      init_rng_(derive_seed(seed, {0x1217u})),
      dropout_rng_(derive_seed(seed, {0xD60Fu})) {
    if (input.c < 1 || input.h < 1 || input.w < 1)
        throw std::invalid_argument("Network: bad input shape");
}

void Network::add(std::unique_ptr<Layer> layer) {
    // Per-layer init stream keyed by position, so a prefix of layers always
    // initializes identically.
    Rng layer_rng(derive_seed(seed_, {0x11A7u, static_cast<std::uint64_t>(layers_added_)}));
    current_ = layer->attach(current_, layer_rng);
    layers_.push_back(std::move(layer));
    ++layers_added_;
}

Tensor Network::forward(const Tensor& batch, bool training) {
    if (batch.shape[1] != input_.c || batch.shape[2] != input_.h || batch.shape[3] != input_.w)
        throw std::invalid_argument("Network::forward: batch shape mismatch");
    training_ = training;
    acts_.resize(layers_.size() + 1);
    acts_[0] = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->forward(acts_[i], acts_[i + 1], training, dropout_rng_);
    forward_recorded_ = true;
    return acts_.back();
}

Tensor Network::backward(const Tensor& dout) {
    if (!forward_recorded_)
        throw std::logic_error("Network::backward: no forward pass recorded");
    if (dout.shape != acts_.back().shape)
        throw std::invalid_argument("Network::backward: gradient shape mismatch");
    bgrads_.resize(layers_.size() + 1);
    bgrads_[layers_.size()] = dout;
    for (std::size_t i = layers_.size(); i-- > 0;)
        layers_[i]->backward(acts_[i], acts_[i + 1], bgrads_[i + 1], bgrads_[i]);
    forward_recorded_ = false;
    return bgrads_.front();
}

std::vector<Tensor*> Network::parameters() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_)
        for (Tensor* p : layer->params()) out.push_back(p);
    return out;
}

void Network::zero_grad() {
    for (Tensor* p : parameters()) {
        p->ensure_grad();
        p->zero_grad();
    }
}

std::size_t Network::parameter_count() {
    std::size_t n = 0;
    for (Tensor* p : parameters()) n += p->numel();
    return n;
}

std::vector<std::vector<double>> Network::snapshot_params() {
    std::vector<std::vector<double>> snap;
    for (Tensor* p : parameters()) snap.push_back(p->data);
    return snap;
}

void Network::restore_params(const std::vector<std::vector<double>>& snap) {
    auto ps = parameters();
    if (snap.size() != ps.size())
        throw std::invalid_argument("restore_params: snapshot mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (snap[i].size() != ps[i]->data.size())
            throw std::invalid_argument("restore_params: snapshot mismatch");
        ps[i]->data = snap[i];
    }
}

void Network::save(std::ostream& out) const {
    write_u32(out, net_kind_);
    write_u32(out, static_cast<std::uint32_t>(input_.c));
    write_u32(out, static_cast<std::uint32_t>(input_.h));
    write_u32(out, static_cast<std::uint32_t>(input_.w));
    write_u32(out, static_cast<std::uint32_t>(layers_.size()));
    for (const auto& layer : layers_) {
        write_u32(out, static_cast<std::uint32_t>(layer->kind()));
        layer->save_config(out);
        for (Tensor* p : const_cast<Layer&>(*layer).params())
            out.write(reinterpret_cast<const char*>(p->data.data()),
                      static_cast<std::streamsize>(p->data.size() * sizeof(double)));
    }
}

Network Network::load(std::istream& in) {
    const std::uint32_t kind = read_u32(in);
    const int c = static_cast<int>(read_u32(in));
    const int h = static_cast<int>(read_u32(in));
    const int w = static_cast<int>(read_u32(in));
    const std::uint32_t n_layers = read_u32(in);

    Network net({c, h, w}, kind, /*seed=*/0);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const auto lk = static_cast<LayerKind>(read_u32(in));
        std::unique_ptr<Layer> layer;
        switch (lk) {
            case LayerKind::Conv2d: {
                const int oc = static_cast<int>(read_u32(in));
                const int kh = static_cast<int>(read_u32(in));
                const int kw = static_cast<int>(read_u32(in));
                const int stride = static_cast<int>(read_u32(in));
                const int pad = static_cast<int>(read_u32(in));
                layer = make_conv2d(oc, kh, kw, stride, pad);
                break;
            }
            case LayerKind::ReLU:
                layer = make_relu();
                break;
            case LayerKind::MaxPool: {
                const int ph = static_cast<int>(read_u32(in));
                const int pw = static_cast<int>(read_u32(in));
                layer = make_maxpool(ph, pw);
                break;
            }
            case LayerKind::Dense: {
                const int od = static_cast<int>(read_u32(in));
                const bool zero = read_u32(in) != 0;
                layer = make_dense(od, zero);
                break;
            }
            case LayerKind::Dropout:
                layer = make_dropout(read_f64(in));
                break;
            case LayerKind::Softmax:
                layer = make_softmax();
                break;
            default:
                throw std::runtime_error("checkpoint: unknown layer kind");
        }
        net.add(std::move(layer));
        for (Tensor* p : net.layers_.back()->params()) {
            in.read(reinterpret_cast<char*>(p->data.data()),
                    static_cast<std::streamsize>(p->data.size() * sizeof(double)));
            if (!in) throw std::runtime_error("checkpoint: truncated parameters");
        }
    }
    return net;
}

void save_networks(std::ostream& out, const std::vector<const Network*>& nets) {
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(nets.size()));
    for (const Network* n : nets) n->save(out);
}

std::vector<Network> load_networks(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    const std::uint32_t version = read_u32(in);
    if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version");
    const std::uint32_t count = read_u32(in);
    std::vector<Network> nets;
    nets.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) nets.push_back(Network::load(in));
    return nets;
}

}  // namespace amc
