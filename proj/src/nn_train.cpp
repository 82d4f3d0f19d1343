#include "amc/nn_train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "amc/modem.hpp"

namespace amc {

namespace {

constexpr double kLogClamp = 1e-12;

int argmax_row(const double* row, int dim) {
    int best = 0;
    for (int c = 1; c < dim; ++c)
        if (row[c] > row[best]) best = c;
    return best;
}

}  // namespace

double cross_entropy(const Tensor& pred, const Tensor& labels, Tensor* dpred) {
    if (pred.shape != labels.shape || pred.shape[2] != 1 || pred.shape[3] != 1)
        throw std::invalid_argument("cross_entropy: shape mismatch");
    const int batch = pred.shape[0];
    const int dim = pred.shape[1];
    if (batch < 1) throw std::invalid_argument("cross_entropy: empty batch");

    if (dpred) {
        *dpred = Tensor(batch, dim, 1, 1);
    }
    const double inv_b = 1.0 / batch;
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
        const double* y = labels.item(b);
        const double* p = pred.item(b);
        int ones = 0;
        for (int c = 0; c < dim; ++c) {
            if (y[c] == 1.0)
                ++ones;
            else if (y[c] != 0.0)
                throw std::invalid_argument("cross_entropy: labels must be one-hot");
            if (y[c] == 0.0) continue;
            const double clamped = std::max(p[c], kLogClamp);
            total -= std::log(clamped);
            if (dpred && p[c] > kLogClamp)
                dpred->item(b)[c] = -inv_b / p[c];
        }
        if (ones != 1) throw std::invalid_argument("cross_entropy: labels must be one-hot");
    }
    return total * inv_b;
}

void Optimizer::step(const std::vector<Tensor*>& params) {
    if (config_.optimizer == TrainConfig::Optimizer::Sgd) {
        for (Tensor* p : params) {
            if (p->grad.empty()) continue;
            for (std::size_t i = 0; i < p->data.size(); ++i)
                p->data[i] -= config_.learning_rate * p->grad[i];
        }
        return;
    }

    if (m_.empty()) {
        for (Tensor* p : params) {
            m_.emplace_back(p->data.size(), 0.0);
            v_.emplace_back(p->data.size(), 0.0);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor* p = params[k];
        if (p->grad.empty()) continue;
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p->data.size(); ++i) {
            const double g = p->grad[i];
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
            const double mh = m[i] / bc1;
            const double vh = v[i] / bc2;
            p->data[i] -= config_.learning_rate * mh / (std::sqrt(vh) + config_.adam_eps);
        }
    }
}

int TrainReport::epochs_to_threshold(double threshold) const {
    for (const EpochStats& e : epochs)
        if (e.val_acc >= threshold) return e.epoch;
    return -1;
}

void TrainReport::write_csv(std::ostream& out) const {
    out << "epoch,loss,train_acc,val_acc,seconds\n";
    char line[160];
    for (const EpochStats& e : epochs) {
        std::snprintf(line, sizeof line, "%d,%.9f,%.6f,%.6f,%.3f\n", e.epoch, e.loss,
                      e.train_acc, e.val_acc, e.seconds);
        out << line;
    }
}

Tensor batch_images(const LabeledImages& set, const std::vector<std::uint32_t>& idx,
                    std::size_t begin, std::size_t end) {
    const int b = static_cast<int>(end - begin);
    Tensor t(b, 1, set.rows, set.cols);
    const std::size_t sz = set.image_size();
    for (int k = 0; k < b; ++k) {
        const float* src = set.image(idx[begin + k]);
        double* dst = t.item(k);
        for (std::size_t i = 0; i < sz; ++i) dst[i] = static_cast<double>(src[i]);
    }
    return t;
}

Tensor batch_onehot(const LabeledImages& set, const std::vector<std::uint32_t>& idx,
                    std::size_t begin, std::size_t end) {
    const int b = static_cast<int>(end - begin);
    Tensor t(b, kSchemeCount, 1, 1);
    for (int k = 0; k < b; ++k) t.item(k)[set.labels[idx[begin + k]]] = 1.0;
    return t;
}

TrainReport train(Network& net, const LabeledImages& train_set, const LabeledImages& val_set,
                  const TrainConfig& config, double stop_at_val_acc) {
    if (train_set.count() == 0) throw std::invalid_argument("train: empty dataset");
    if (config.batch_size < 1 || config.epochs < 1 || !(config.learning_rate > 0.0))
        throw std::invalid_argument("train: bad config");

    Optimizer opt(config);
    Rng shuffle_rng(derive_seed(config.seed, {0x5AFFu}));

    std::vector<std::uint32_t> order(train_set.count());
    std::iota(order.begin(), order.end(), 0u);

    TrainReport report;
    std::vector<std::vector<double>> best_snapshot;
    const auto t0 = std::chrono::steady_clock::now();

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        // Fisher-Yates with the dedicated stream; one pass per epoch.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = shuffle_rng.uniform_int(i);
            std::swap(order[i - 1], order[j]);
        }

        double loss_sum = 0.0;
        std::size_t batches = 0, correct = 0, seen = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(begin + config.batch_size, order.size());
            Tensor x = batch_images(train_set, order, begin, end);
            Tensor y = batch_onehot(train_set, order, begin, end);

            Tensor pred = net.forward(x, /*training=*/true);
            Tensor dpred;
            const double loss = cross_entropy(pred, y, &dpred);
            if (!std::isfinite(loss)) throw NumericError("train: loss is not finite");
            loss_sum += loss;
            ++batches;

            for (int b = 0; b < pred.shape[0]; ++b) {
                const int hit = argmax_row(pred.item(b), kSchemeCount);
                if (y.item(b)[hit] == 1.0) ++correct;
                ++seen;
            }

            net.zero_grad();
            net.backward(dpred);
            opt.step(net.parameters());
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = loss_sum / static_cast<double>(batches);
        stats.train_acc = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
        stats.val_acc = val_set.count() ? evaluate(net, val_set).accuracy : stats.train_acc;
        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(stats);

        if (report.best_epoch == 0 || stats.val_acc > report.best_val_acc) {
            report.best_epoch = epoch;
            report.best_val_acc = stats.val_acc;
            best_snapshot = net.snapshot_params();
        }

        if (stop_at_val_acc > 0.0 && stats.val_acc >= stop_at_val_acc) break;
    }

    net.restore_params(best_snapshot);
    return report;
}

EvalResult evaluate(Network& net, const LabeledImages& test_set) {
    EvalResult result;
    if (test_set.count() == 0) return result;

    std::vector<std::uint32_t> order(test_set.count());
    std::iota(order.begin(), order.end(), 0u);

    constexpr std::size_t kEvalBatch = 128;
    for (std::size_t begin = 0; begin < order.size(); begin += kEvalBatch) {
        const std::size_t end = std::min(begin + kEvalBatch, order.size());
        Tensor x = batch_images(test_set, order, begin, end);
        Tensor pred = net.forward(x, /*training=*/false);
        for (int b = 0; b < pred.shape[0]; ++b) {
            const int truth = test_set.labels[order[begin + b]];
            const int guess = argmax_row(pred.item(b), kSchemeCount);
            ++result.confusion[truth][guess];
        }
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

Network build_amc_cnn(int rows, int cols, std::uint64_t seed) {
    Network net({1, rows, cols}, kNetKindCnn, seed);
    net.add(make_conv2d(16, 3, 3));
    net.add(make_relu());
    net.add(make_conv2d(16, 3, 3));
    net.add(make_relu());
    net.add(make_maxpool(2, 2));
    net.add(make_conv2d(32, 3, 3));
    net.add(make_relu());
    net.add(make_conv2d(32, 3, 3));
    net.add(make_relu());
    net.add(make_maxpool(2, 2));
    net.add(make_dense(128));
    net.add(make_relu());
    net.add(make_dropout(0.5));
    net.add(make_dense(64));
    net.add(make_relu());
    net.add(make_dense(kSchemeCount));
    net.add(make_softmax());
    return net;
}

}  // namespace amc
