#include "amc/ccn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace amc {

namespace {

constexpr double kPi = 3.14159265358979323846;

int argmax_row(const double* row, int dim) {
    int best = 0;
    for (int c = 1; c < dim; ++c)
        if (row[c] > row[best]) best = c;
    return best;
}

}  // namespace

Network build_ccn(const CcnSpec& spec, std::uint64_t seed) {
    Network net({1, spec.input_grid.rows, spec.input_grid.cols}, kNetKindCcn, seed);
    for (int width : spec.hidden) {
        net.add(make_dense(width));
        net.add(make_relu());
    }
    net.add(make_dense(2, /*zero_init=*/true));
    return net;
}

CompensationParams head_to_params(double u, double v) {
    // tanh rounds to exactly +-1 for |v| > ~19; keep |delta_theta| strictly
    // below pi even there.
    constexpr double kNearOne = 1.0 - 1e-15;
    const double t = std::clamp(std::tanh(v), -kNearOne, kNearOne);
    return CompensationParams{std::exp(u), kPi * t};
}

double wrap_angle(double theta) {
    return std::remainder(theta, 2.0 * kPi);
}

Tensor ccn_input_summary(const PolarFrame& polar, const GridSpec& grid) {
    SoftImage soft = soft_rasterize_polar(polar, grid);
    normalize_by_max(soft.image);
    Tensor t(1, 1, grid.rows, grid.cols);
    t.data = std::move(soft.image.grid);
    return t;
}

CompensationParams ccn_forward(const PolarFrame& polar, Network& ccn, const CcnSpec& spec) {
    Tensor in = ccn_input_summary(polar, spec.input_grid);
    Tensor out = ccn.forward(in, /*training=*/false);
    return head_to_params(out.data[0], out.data[1]);
}

PolarFrame compensate(const PolarFrame& polar, const CompensationParams& params) {
    PolarFrame out;
    out.scheme = polar.scheme;
    out.pairs.resize(polar.size());
    for (std::size_t i = 0; i < polar.size(); ++i) {
        out.pairs[i].r = polar.pairs[i].r * params.delta_r;
        out.pairs[i].theta = wrap_angle(polar.pairs[i].theta + params.delta_theta);
    }
    return out;
}

PolarFrame FrameDataset::frame(std::size_t i) const {
    PolarFrame f;
    f.scheme = static_cast<ModulationScheme>(labels[i]);
    f.pairs.resize(symbols_per_frame);
    const float* src = pairs.data() + static_cast<std::size_t>(symbols_per_frame) * 2 * i;
    for (int k = 0; k < symbols_per_frame; ++k) {
        f.pairs[k].r = static_cast<double>(src[2 * k]);
        f.pairs[k].theta = static_cast<double>(src[2 * k + 1]);
    }
    return f;
}

CcnPipeline::CcnPipeline(CcnSpec spec, GridSpec cnn_grid, std::uint64_t seed)
    : spec_(spec),
      cnn_grid_(cnn_grid),
      ccn_(build_ccn(spec, derive_seed(seed, {0xCC0u}))),
      cnn_(build_amc_cnn(cnn_grid.rows, cnn_grid.cols, derive_seed(seed, {0xC22u}))) {}

CcnPipeline::CcnPipeline(CcnSpec spec, GridSpec cnn_grid, Network ccn, Network cnn)
    : spec_(spec), cnn_grid_(cnn_grid), ccn_(std::move(ccn)), cnn_(std::move(cnn)) {}

Tensor CcnPipeline::forward(const std::vector<PolarFrame>& frames, bool training) {
    const int batch = static_cast<int>(frames.size());
    if (batch == 0) throw std::invalid_argument("CcnPipeline::forward: empty batch");

    Tensor summaries(batch, 1, spec_.input_grid.rows, spec_.input_grid.cols);
    for (int b = 0; b < batch; ++b) {
        Tensor s = ccn_input_summary(frames[b], spec_.input_grid);
        std::copy(s.data.begin(), s.data.end(), summaries.item(b));
    }

    Tensor head = ccn_.forward(summaries, training);

    state_.assign(batch, {});
    Tensor images(batch, 1, cnn_grid_.rows, cnn_grid_.cols);
    const std::size_t cells = cnn_grid_.cells();
    for (int b = 0; b < batch; ++b) {
        FrameState& st = state_[b];
        st.v = head.item(b)[1];
        const CompensationParams params = head_to_params(head.item(b)[0], st.v);
        st.delta_r = params.delta_r;
        st.delta_theta = params.delta_theta;

        st.raw_r.resize(frames[b].size());
        for (std::size_t k = 0; k < frames[b].size(); ++k) st.raw_r[k] = frames[b].pairs[k].r;

        const PolarFrame comp = compensate(frames[b], params);
        st.splat = soft_rasterize_polar(comp, cnn_grid_, /*want_partials=*/training);

        if (training) {
            // dS/d(delta_r) and dS/d(delta_theta): the splat partials are
            // w.r.t. the compensated pair, and dr'/d(delta_r) = raw r,
            // dtheta'/d(delta_theta) = 1.
            st.map_dr.assign(cells, 0.0);
            st.map_dtheta.assign(cells, 0.0);
            for (std::size_t k = 0; k < st.splat.partials.size(); ++k) {
                for (const SplatEntry& e : st.splat.partials[k]) {
                    if (e.cell < 0) continue;
                    st.map_dr[static_cast<std::size_t>(e.cell)] += e.d_r * st.raw_r[k];
                    st.map_dtheta[static_cast<std::size_t>(e.cell)] += e.d_theta;
                }
            }
            st.raw_grid = st.splat.image.grid;
        }

        st.argmax = normalize_by_max(st.splat.image);
        std::copy(st.splat.image.grid.begin(), st.splat.image.grid.end(), images.item(b));
    }

    return cnn_.forward(images, training);
}

void CcnPipeline::backward(const Tensor& dprobs) {
    if (state_.empty()) throw std::logic_error("CcnPipeline::backward: no forward recorded");
    Tensor dimages = cnn_.backward(dprobs);

    const int batch = dimages.shape[0];
    const std::size_t cells = cnn_grid_.cells();
    Tensor dhead(batch, 2, 1, 1);
    std::vector<double> upstream(cells), d_raw(cells);
    for (int b = 0; b < batch; ++b) {
        FrameState& st = state_[b];
        std::copy(dimages.item(b), dimages.item(b) + cells, upstream.begin());
        normalize_by_max_backward(upstream, st.raw_grid, st.argmax, d_raw);

        double d_dr = 0.0, d_dth = 0.0;
        for (std::size_t c = 0; c < cells; ++c) {
            d_dr += d_raw[c] * st.map_dr[c];
            d_dth += d_raw[c] * st.map_dtheta[c];
        }
        // delta_r = exp(u), delta_theta = pi*tanh(v)
        const double th = std::tanh(st.v);
        dhead.item(b)[0] = d_dr * st.delta_r;
        dhead.item(b)[1] = d_dth * kPi * (1.0 - th * th);
    }

    ccn_.backward(dhead);
    state_.clear();
}

std::vector<double> CcnPipeline::predict(const PolarFrame& polar) {
    Tensor probs = forward({polar}, /*training=*/false);
    return {probs.data.begin(), probs.data.end()};
}

CompensationParams CcnPipeline::compensation_for(const PolarFrame& polar) {
    return ccn_forward(polar, ccn_, spec_);
}

void CcnPipeline::save(std::ostream& out) const {
    save_networks(out, {&ccn_, &cnn_});
}

CcnPipeline CcnPipeline::load(std::istream& in, const CcnSpec& spec, const GridSpec& cnn_grid) {
    std::vector<Network> nets = load_networks(in);
    if (nets.size() != 2 || nets[0].net_kind() != kNetKindCcn || nets[1].net_kind() != kNetKindCnn)
        throw std::runtime_error("pipeline checkpoint: expected CCN + CNN pair");
    return CcnPipeline(spec, cnn_grid, std::move(nets[0]), std::move(nets[1]));
}

int JointTrainReport::epochs_to_threshold(double threshold) const {
    for (const JointEpochStats& e : epochs)
        if (e.base.val_acc >= threshold) return e.base.epoch;
    return -1;
}

void JointTrainReport::write_csv(std::ostream& out) const {
    out << "epoch,loss,train_acc,val_acc,seconds,mean_abs_dtheta_err,mean_abs_dr_err\n";
    char line[200];
    for (const JointEpochStats& e : epochs) {
        std::snprintf(line, sizeof line, "%d,%.9f,%.6f,%.6f,%.3f,%.6f,%.6f\n", e.base.epoch,
                      e.base.loss, e.base.train_acc, e.base.val_acc, e.base.seconds,
                      e.mean_abs_dtheta_err, e.mean_abs_dr_err);
        out << line;
    }
}

namespace {

Tensor onehot_for(const FrameDataset& set, const std::vector<std::uint32_t>& idx,
                  std::size_t begin, std::size_t end) {
    const int b = static_cast<int>(end - begin);
    Tensor t(b, kSchemeCount, 1, 1);
    for (int k = 0; k < b; ++k) t.item(k)[set.labels[idx[begin + k]]] = 1.0;
    return t;
}

// Compensation-quality diagnostics against the recorded channel truth.
// Phase error is measured modulo the constellation's rotational symmetry.
void compensation_diagnostics(CcnPipeline& pipeline, const FrameDataset& set,
                              double& mean_dtheta, double& mean_dr) {
    mean_dtheta = 0.0;
    mean_dr = 0.0;
    if (set.count() == 0) return;
    for (std::size_t i = 0; i < set.count(); ++i) {
        const PolarFrame f = set.frame(i);
        const CompensationParams p = pipeline.compensation_for(f);
        const ChannelTruth& t = set.truth[i];
        const double sym = rotational_symmetry(static_cast<ModulationScheme>(set.labels[i]));
        double phase_err = std::remainder(p.delta_theta + t.theta0, sym);
        mean_dtheta += std::abs(phase_err);
        mean_dr += std::abs(p.delta_r * t.a - 1.0);
    }
    mean_dtheta /= static_cast<double>(set.count());
    mean_dr /= static_cast<double>(set.count());
}

}  // namespace

JointTrainReport train_joint(CcnPipeline& pipeline, const FrameDataset& train_set,
                             const FrameDataset& val_set, const TrainConfig& config) {
    if (train_set.count() == 0) throw std::invalid_argument("train_joint: empty dataset");
    if (config.batch_size < 1 || config.epochs < 1 || !(config.learning_rate > 0.0))
        throw std::invalid_argument("train_joint: bad config");

    Optimizer opt(config);
    Rng shuffle_rng(derive_seed(config.seed, {0x5AFFu}));

    std::vector<std::uint32_t> order(train_set.count());
    std::iota(order.begin(), order.end(), 0u);

    auto all_params = [&pipeline] {
        std::vector<Tensor*> ps = pipeline.ccn().parameters();
        for (Tensor* p : pipeline.cnn().parameters()) ps.push_back(p);
        return ps;
    };

    JointTrainReport report;
    std::vector<std::vector<double>> best_ccn, best_cnn;
    const auto t0 = std::chrono::steady_clock::now();

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = shuffle_rng.uniform_int(i);
            std::swap(order[i - 1], order[j]);
        }

        double loss_sum = 0.0;
        std::size_t batches = 0, correct = 0, seen = 0;
        std::vector<PolarFrame> frames;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(begin + config.batch_size, order.size());
            frames.clear();
            for (std::size_t k = begin; k < end; ++k) frames.push_back(train_set.frame(order[k]));
            Tensor y = onehot_for(train_set, order, begin, end);

            Tensor pred = pipeline.forward(frames, /*training=*/true);
            Tensor dpred;
            const double loss = cross_entropy(pred, y, &dpred);
            if (!std::isfinite(loss)) throw NumericError("train_joint: loss is not finite");
            loss_sum += loss;
            ++batches;

            for (int b = 0; b < pred.shape[0]; ++b) {
                if (y.item(b)[argmax_row(pred.item(b), kSchemeCount)] == 1.0) ++correct;
                ++seen;
            }

            pipeline.ccn().zero_grad();
            pipeline.cnn().zero_grad();
            pipeline.backward(dpred);
            opt.step(all_params());
        }

        JointEpochStats stats;
        stats.base.epoch = epoch;
        stats.base.loss = loss_sum / static_cast<double>(batches);
        stats.base.train_acc =
            seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
        stats.base.val_acc =
            val_set.count() ? evaluate_pipeline(pipeline, val_set).accuracy : stats.base.train_acc;
        stats.base.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        compensation_diagnostics(pipeline, val_set, stats.mean_abs_dtheta_err,
                                 stats.mean_abs_dr_err);
        report.epochs.push_back(stats);

        if (report.best_epoch == 0 || stats.base.val_acc > report.best_val_acc) {
            report.best_epoch = epoch;
            report.best_val_acc = stats.base.val_acc;
            best_ccn = pipeline.ccn().snapshot_params();
            best_cnn = pipeline.cnn().snapshot_params();
        }
    }

    pipeline.ccn().restore_params(best_ccn);
    pipeline.cnn().restore_params(best_cnn);
    return report;
}

EvalResult evaluate_pipeline(CcnPipeline& pipeline, const FrameDataset& test_set) {
    EvalResult result;
    if (test_set.count() == 0) return result;

    constexpr std::size_t kEvalBatch = 128;
    std::vector<PolarFrame> frames;
    for (std::size_t begin = 0; begin < test_set.count(); begin += kEvalBatch) {
        const std::size_t end = std::min(begin + kEvalBatch, test_set.count());
        frames.clear();
        for (std::size_t k = begin; k < end; ++k) frames.push_back(test_set.frame(k));
        Tensor pred = pipeline.forward(frames, /*training=*/false);
        for (int b = 0; b < pred.shape[0]; ++b) {
            const int truth = test_set.labels[begin + b];
            ++result.confusion[truth][argmax_row(pred.item(b), kSchemeCount)];
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

void dump_compensation(CcnPipeline& pipeline, const FrameDataset& set, std::ostream& out) {
    out << "index,delta_r,delta_theta,a,theta0\n";
    char line[160];
    for (std::size_t i = 0; i < set.count(); ++i) {
        const CompensationParams p = pipeline.compensation_for(set.frame(i));
        std::snprintf(line, sizeof line, "%zu,%.9f,%.9f,%.9f,%.9f\n", i, p.delta_r,
                      p.delta_theta, set.truth[i].a, set.truth[i].theta0);
        out << line;
    }
}

}  // namespace amc
