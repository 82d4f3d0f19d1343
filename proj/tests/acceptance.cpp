// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. The desk-scale profile (500 train / 200 test per modulation per SNR,
// 36x36 polar, 64x64 iq, pooled training, 20 epochs) drives the heavy
// criteria; tolerances are pinned in code.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "amc/harness.hpp"
#include "oracles.hpp"

using namespace amc;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

int g_failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
    std::printf("%s %s - %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double now_seconds() {
    static const auto t0 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig desk_config() {
    ExperimentConfig cfg;
    apply_profile(cfg, "desk");
    cfg.symbol_length = 1000;
    cfg.snr_list = {-4, -2, 0, 2, 4, 6, 8, 10, 12};
    cfg.train.epochs = 20;
    cfg.train.batch_size = 64;
    cfg.train.learning_rate = 1e-3;
    cfg.seed = 1;
    cfg.threshold_val_acc = 0.85;
    return cfg;
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return std::string(buf);
}

// ---------------------------------------------------------------- A1
void criterion_a1() {
    bool pass = true;
    std::string detail;
    double worst_theory = 0.0;
    for (int k = 0; k < kSchemeCount; ++k) {
        const auto scheme = static_cast<ModulationScheme>(k);
        const CumulantVector got = theoretical_cumulants(scheme);
        const oracle::Cumulants want = oracle::cumulants_brute_force(constellation(scheme));
        worst_theory = std::max({worst_theory, std::abs(got.c20 - want.c20),
                                 std::abs(got.c21 - want.c21), std::abs(got.c40 - want.c40),
                                 std::abs(got.c41 - want.c41), std::abs(got.c42 - want.c42)});
    }
    if (worst_theory >= 1e-12) pass = false;

    int hits = 0, trials = 0;
    for (int k = 0; k < kSchemeCount; ++k) {
        const auto scheme = static_cast<ModulationScheme>(k);
        const CumulantVector theory = theoretical_cumulants(scheme);
        for (int t = 0; t < 50; ++t) {
            Rng rng(derive_seed(0xA1, {static_cast<std::uint64_t>(k),
                                       static_cast<std::uint64_t>(t)}));
            const SymbolFrame f = generate_frame(scheme, 100000, rng);
            const CumulantVector emp = empirical_cumulants(f);
            ++trials;
            if (std::abs(emp.c40 - theory.c40) < 0.05 &&
                std::abs(emp.c42.real() - theory.c42.real()) < 0.05)
                ++hits;
        }
    }
    if (hits != trials) pass = false;
    report("A1", pass,
           fmt("theoretical vs brute-force max err %.2e (<1e-12); empirical within 0.05: "
               "%d/%d trials",
               worst_theory, hits, trials));
}

// ---------------------------------------------------------------- A2
double layer_grad_error(const std::function<Network()>& make, const Tensor& x, const Tensor& w,
                        bool training) {
    Network net = make();
    std::vector<std::vector<double>> params = net.snapshot_params();
    net.restore_params(params);
    net.forward(x, training);
    net.zero_grad();
    const Tensor dx = net.backward(w);

    auto loss_with = [&](const std::vector<std::vector<double>>& p, const Tensor& input) {
        Network n2 = make();
        n2.restore_params(p);
        const Tensor out = n2.forward(input, training);
        double total = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) total += out.data[i] * w.data[i];
        return total;
    };

    double worst = 0.0;
    auto ps = net.parameters();
    for (std::size_t pi = 0; pi < ps.size(); ++pi)
        for (std::size_t i = 0; i < params[pi].size(); ++i) {
            const double fd =
                oracle::central_diff(&params[pi][i], 1e-4, [&] { return loss_with(params, x); });
            const double an = ps[pi]->grad[i];
            if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
            worst = std::max(worst, oracle::rel_err(an, fd));
        }
    Tensor xm = x;
    for (std::size_t i = 0; i < xm.data.size(); ++i) {
        const double fd =
            oracle::central_diff(&xm.data[i], 1e-4, [&] { return loss_with(params, xm); });
        if (std::abs(fd) < 1e-10 && std::abs(dx.data[i]) < 1e-10) continue;
        worst = std::max(worst, oracle::rel_err(dx.data[i], fd));
    }
    return worst;
}

void criterion_a2() {
    const double t_start = now_seconds();
    Rng rng(0xA2);
    auto rand_tensor = [&rng](int n, int c, int h, int w) {
        Tensor t(n, c, h, w);
        for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
        return t;
    };

    double worst_layers = 0.0;
    {  // conv (plain and strided/padded)
        worst_layers = std::max(
            worst_layers, layer_grad_error(
                              [] {
                                  Network net({1, 8, 8}, kNetKindCnn, 1);
                                  net.add(make_conv2d(3, 3, 3));
                                  return net;
                              },
                              rand_tensor(2, 1, 8, 8), rand_tensor(2, 3, 6, 6), false));
        worst_layers = std::max(
            worst_layers, layer_grad_error(
                              [] {
                                  Network net({2, 7, 7}, kNetKindCnn, 2);
                                  net.add(make_conv2d(2, 3, 3, 2, 1));
                                  return net;
                              },
                              rand_tensor(2, 2, 7, 7), rand_tensor(2, 2, 4, 4), false));
    }
    {  // relu + maxpool + dense stack, dropout, softmax
        worst_layers = std::max(
            worst_layers, layer_grad_error(
                              [] {
                                  Network net({1, 6, 6}, kNetKindCnn, 3);
                                  net.add(make_conv2d(2, 3, 3));
                                  net.add(make_relu());
                                  net.add(make_maxpool(2, 2));
                                  net.add(make_dense(5));
                                  return net;
                              },
                              rand_tensor(2, 1, 6, 6), rand_tensor(2, 5, 1, 1), false));
        worst_layers = std::max(
            worst_layers, layer_grad_error(
                              [] {
                                  Network net({5, 1, 1}, kNetKindCnn, 4);
                                  net.add(make_dense(6));
                                  net.add(make_dropout(0.5));
                                  net.add(make_dense(3));
                                  return net;
                              },
                              rand_tensor(2, 5, 1, 1), rand_tensor(2, 3, 1, 1), true));
        worst_layers = std::max(
            worst_layers, layer_grad_error(
                              [] {
                                  Network net({4, 1, 1}, kNetKindCnn, 5);
                                  net.add(make_dense(4));
                                  net.add(make_softmax());
                                  return net;
                              },
                              rand_tensor(2, 4, 1, 1), rand_tensor(2, 4, 1, 1), false));
    }
    const bool layers_ok = worst_layers < 1e-4;

    // soft rasterizer against central differences
    double worst_soft = 0.0;
    {
        const GridSpec grid{-kPi, kPi, 0.0, 3.0, 8, 8};
        PolarFrame f;
        for (int i = 0; i < 30; ++i)
            f.pairs.push_back({rng.uniform(0.45, 2.55), rng.uniform(-3.0, 3.0)});
        SoftImage soft = soft_rasterize_polar(f, grid, true);
        for (std::size_t k = 0; k < f.size(); ++k) {
            std::vector<double> d_r(grid.cells(), 0.0), d_t(grid.cells(), 0.0);
            for (const SplatEntry& e : soft.partials[k]) {
                if (e.cell < 0) continue;
                d_r[static_cast<std::size_t>(e.cell)] += e.d_r;
                d_t[static_cast<std::size_t>(e.cell)] += e.d_theta;
            }
            for (int axis = 0; axis < 2; ++axis) {
                double* coord = axis == 0 ? &f.pairs[k].r : &f.pairs[k].theta;
                const double saved = *coord;
                *coord = saved + 1e-5;
                const SoftImage hi = soft_rasterize_polar(f, grid);
                *coord = saved - 1e-5;
                const SoftImage lo = soft_rasterize_polar(f, grid);
                *coord = saved;
                for (std::size_t c = 0; c < grid.cells(); ++c) {
                    const double fd = (hi.image.grid[c] - lo.image.grid[c]) / 2e-5;
                    const double an = axis == 0 ? d_r[c] : d_t[c];
                    if (std::abs(fd) < 1e-12 && std::abs(an) < 1e-12) continue;
                    worst_soft = std::max(worst_soft, oracle::rel_err(an, fd));
                }
            }
        }
    }
    const bool soft_ok = worst_soft < 1e-6;

    // compensation op: dr'/dr = delta_r, dr'/d(delta_r) = r, dtheta' slopes = 1
    double worst_comp = 0.0;
    {
        for (int t = 0; t < 200; ++t) {
            PolarFrame f;
            f.pairs = {{rng.uniform(0.1, 3.0), rng.uniform(-3.0, 3.0)}};
            CompensationParams p{rng.uniform(0.5, 2.0), rng.uniform(-2.0, 2.0)};
            const double eps = 1e-6;

            auto r_out = [&] { return compensate(f, p).pairs[0].r; };
            auto t_out = [&] { return compensate(f, p).pairs[0].theta; };

            const double fd_r_dr = oracle::central_diff(&f.pairs[0].r, eps, r_out);
            worst_comp = std::max(worst_comp, oracle::rel_err(p.delta_r, fd_r_dr));
            const double fd_r_ddr = oracle::central_diff(&p.delta_r, eps, r_out);
            worst_comp = std::max(worst_comp, oracle::rel_err(f.pairs[0].r, fd_r_ddr));
            const double fd_t_dt = oracle::central_diff(&f.pairs[0].theta, eps, t_out);
            const double fd_t_ddt = oracle::central_diff(&p.delta_theta, eps, t_out);
            // skip the measure-zero wrap seam where the finite difference
            // straddles +-pi
            if (std::abs(std::abs(std::remainder(f.pairs[0].theta + p.delta_theta, 2 * kPi)) -
                         kPi) > 1e-4) {
                worst_comp = std::max(worst_comp, oracle::rel_err(1.0, fd_t_dt));
                worst_comp = std::max(worst_comp, oracle::rel_err(1.0, fd_t_ddt));
            }
        }
    }
    const bool comp_ok = worst_comp < 1e-4;

    // full tiny pipeline
    double worst_pipe = 0.0;
    {
        CcnSpec spec;
        spec.input_grid = GridSpec::ccn_input_default(8);
        spec.hidden = {8, 8, 8};
        Network ccn = build_ccn(spec, 31);
        Network cnn({1, 8, 8}, kNetKindCnn, 32);
        cnn.add(make_conv2d(2, 3, 3));
        cnn.add(make_relu());
        cnn.add(make_dense(4));
        cnn.add(make_softmax());
        CcnPipeline pipeline(spec, GridSpec::polar_default(8), std::move(ccn), std::move(cnn));
        {
            auto ps = pipeline.ccn().parameters();
            for (double& v : ps[6]->data) v = rng.uniform(-0.1, 0.1);
            for (double& v : ps[7]->data) v = rng.uniform(-0.1, 0.1);
        }
        std::vector<PolarFrame> frames(2);
        for (auto& f : frames)
            for (int i = 0; i < 25; ++i)
                f.pairs.push_back({rng.uniform(0.5, 2.4), rng.uniform(-3.0, 3.0)});
        Tensor labels(2, 4, 1, 1);
        labels.item(0)[0] = 1.0;
        labels.item(1)[2] = 1.0;

        auto loss_now = [&] {
            const Tensor probs = pipeline.forward(frames, true);
            return cross_entropy(probs, labels);
        };
        const Tensor probs = pipeline.forward(frames, true);
        Tensor dpred;
        cross_entropy(probs, labels, &dpred);
        pipeline.ccn().zero_grad();
        pipeline.cnn().zero_grad();
        pipeline.backward(dpred);

        for (Network* net : {&pipeline.ccn(), &pipeline.cnn()}) {
            for (Tensor* p : net->parameters()) {
                const std::vector<double> grad = p->grad;
                const std::size_t stride = std::max<std::size_t>(1, p->data.size() / 19);
                for (std::size_t i = 0; i < p->data.size(); i += stride) {
                    const double fd = oracle::central_diff(&p->data[i], 1e-5, loss_now);
                    if (std::abs(fd) < 1e-9 && std::abs(grad[i]) < 1e-9) continue;
                    worst_pipe = std::max(worst_pipe, oracle::rel_err(grad[i], fd));
                }
            }
        }
    }
    const bool pipe_ok = worst_pipe < 1e-3;

    const double elapsed = now_seconds() - t_start;
    const bool time_ok = elapsed < 120.0;
    report("A2", layers_ok && soft_ok && comp_ok && pipe_ok && time_ok,
           fmt("layers %.2e (<1e-4), soft raster %.2e (<1e-6), compensation %.2e (<1e-4), "
               "pipeline %.2e (<1e-3), %.1fs (<120s)",
               worst_layers, worst_soft, worst_comp, worst_pipe, elapsed));
}

// ---------------------------------------------------------------- A7
void criterion_a7() {
    Rng rng(0xA7);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto scheme = static_cast<ModulationScheme>(trial % kSchemeCount);
        const SymbolFrame tx = generate_frame(scheme, 100, rng);
        ChannelParams ch;
        ch.a = rng.uniform(0.5, 2.0);
        ch.theta0 = rng.uniform(-kPi, kPi);
        ch.noiseless = true;
        Rng noise(1);
        const SymbolFrame rx = apply_channel(tx, ch, noise);
        const PolarFrame rec =
            compensate(to_polar(rx), CompensationParams{1.0 / ch.a, -ch.theta0});
        const PolarFrame want = to_polar(tx);
        for (std::size_t i = 0; i < want.size(); ++i) {
            worst = std::max(worst, std::abs(rec.pairs[i].r - want.pairs[i].r));
            worst = std::max(worst, std::abs(std::remainder(
                                        rec.pairs[i].theta - want.pairs[i].theta, 2.0 * kPi)));
        }
    }
    report("A7", worst < 1e-12,
           fmt("inverse compensation max error %.2e over 1000 faded frames (<1e-12)", worst));
}

// ---------------------------------------------------------------- A9
void criterion_a9() {
    Rng rng(0xA9);
    const GridSpec grid = GridSpec::polar_default();
    bool hard_exact = true;
    double worst_soft = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        PolarFrame f;
        const int n = 1 + static_cast<int>(rng.uniform_int(256));
        for (int i = 0; i < n; ++i)
            f.pairs.push_back({rng.uniform(0.0, 4.0), rng.uniform(-kPi, kPi)});

        const ConstellationImage hist = histogram_polar(f, grid);
        double sum = 0.0;
        for (double v : hist.grid) sum += v;
        if (sum != static_cast<double>(hist.in_range_count)) hard_exact = false;

        const SoftImage soft = soft_rasterize_polar(f, grid);
        double soft_sum = 0.0;
        for (double v : soft.image.grid) soft_sum += v;
        worst_soft = std::max(
            worst_soft, std::abs(soft_sum - static_cast<double>(soft.image.in_range_count)));
    }
    report("A9", hard_exact && worst_soft < 1e-9,
           fmt("hard conservation exact on 10^4 frames: %s; soft max |mass err| %.2e (<1e-9)",
               hard_exact ? "yes" : "NO", worst_soft));
}

// ---------------------------------------------------------------- A8
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string strip_last_column(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        const auto comma = line.rfind(',');
        out << (comma == std::string::npos ? line : line.substr(0, comma)) << '\n';
    }
    return out.str();
}

void criterion_a8() {
    const fs::path base = fs::temp_directory_path() / "amc_accept_a8";
    fs::remove_all(base);
    fs::create_directories(base);
    const fs::path cfg_path = base / "tiny.cfg";
    {
        std::ofstream out(cfg_path);
        out << "mode = polar\nsymbol_length = 300\ntrain_per_class = 40\ntest_per_class = 10\n"
            << "snr_list = 0, 10\npolar_res = 20\niq_res = 20\nepochs = 2\nbatch_size = 16\n"
            << "seed = 9\n";
    }

    bool ok = true;
    std::string why = "byte-identical manifests, datasets, checkpoints, eval CSVs";
    for (const char* run : {"a", "b"}) {
        const std::string out_dir = (base / run).string();
        for (const char* cmd : {"gen-data", "train", "eval"}) {
            const std::string cfg_str = cfg_path.string();
            const char* argv[] = {"amc", cmd, "--config", cfg_str.c_str(), "--out",
                                  out_dir.c_str()};
            if (run_cli(6, const_cast<char**>(argv)) != 0) {
                ok = false;
                why = std::string("CLI ") + cmd + " failed";
            }
        }
    }

    if (ok) {
        const std::vector<std::string> exact = {
            "dataset_polar/manifest.txt",    "dataset_polar/train_images.f32",
            "dataset_polar/train_labels.u8", "dataset_polar/test_images.f32",
            "dataset_polar/test_labels.u8",  "dataset_polar/train_channel.csv",
            "dataset_polar/test_channel.csv", "model_polar.bin",
            "eval_polar.csv",                "eval_confusion_polar.csv"};
        for (const std::string& rel : exact) {
            if (slurp(base / "a" / rel) != slurp(base / "b" / rel)) {
                ok = false;
                why = "mismatch in " + rel;
                break;
            }
        }
        // wall-clock seconds column is the one nondeterministic field
        if (ok && strip_last_column(slurp(base / "a" / "train_report_polar.csv")) !=
                      strip_last_column(slurp(base / "b" / "train_report_polar.csv"))) {
            ok = false;
            why = "mismatch in train_report_polar.csv (excluding seconds)";
        }
    }
    fs::remove_all(base);
    report("A8", ok, why + " across two gen-data+train+eval runs");
}

// ---------------------------------------------------------------- A5 (part 1)
bool hoc_noiseless_sanity(std::string& detail) {
    int correct = 0;
    const int per_scheme = 100;
    for (int k = 0; k < kSchemeCount; ++k) {
        const auto scheme = static_cast<ModulationScheme>(k);
        for (int t = 0; t < per_scheme; ++t) {
            Rng rng(derive_seed(0xA5, {static_cast<std::uint64_t>(k),
                                       static_cast<std::uint64_t>(t)}));
            const SymbolFrame f = generate_frame(scheme, 100000, rng);
            if (classify_hoc(f).scheme == scheme) ++correct;
        }
    }
    detail = fmt("noiseless HOC %d/%d", correct, kSchemeCount * per_scheme);
    return correct == kSchemeCount * per_scheme;
}

}  // namespace

int main() {
    std::printf("acceptance suite (desk profile, seed %d)\n", 1);
    criterion_a1();
    criterion_a2();
    criterion_a7();
    criterion_a9();
    criterion_a8();

    // --- heavy desk-scale experiments, shared across A3/A4/A5/A6 ---
    ExperimentConfig cfg = desk_config();

    double t0 = now_seconds();
    cfg.mode = FeatureMode::Polar;
    const SweepResult polar = run_sweep(cfg);
    std::fprintf(stderr, "[acceptance] polar sweep done in %.0fs\n", now_seconds() - t0);

    t0 = now_seconds();
    cfg.mode = FeatureMode::Iq;
    const SweepResult iq = run_sweep(cfg);
    std::fprintf(stderr, "[acceptance] iq sweep done in %.0fs\n", now_seconds() - t0);

    t0 = now_seconds();
    cfg.mode = FeatureMode::Cumulants;
    const SweepResult hoc = run_sweep(cfg);
    std::fprintf(stderr, "[acceptance] cumulants sweep done in %.0fs\n", now_seconds() - t0);

    // A3: high-SNR plateau and monotone trend for the polar CNN
    {
        const double acc12 = polar.accuracy_at(12.0).value_or(0.0);
        std::vector<double> snrs, accs;
        for (const SweepRow& row : polar.rows) {
            snrs.push_back(row.snr_db);
            accs.push_back(row.eval.accuracy);
        }
        const double rho = spearman(snrs, accs);
        report("A3", acc12 >= 0.90 && rho >= 0.9,
               fmt("polar acc@12dB %.3f (>=0.90), spearman %.3f (>=0.9), train %.0fs",
                   acc12, rho, polar.train_seconds));
    }

    // A4: polar vs iq on identical frames - accuracy direction + convergence
    {
        const bool frames_match = polar.frame_hash_test == iq.frame_hash_test &&
                                  polar.frame_hash_train == iq.frame_hash_train;
        const double p0 = polar.accuracy_at(0.0).value_or(0.0);
        const double i0 = iq.accuracy_at(0.0).value_or(0.0);
        const double pm = polar.mean_accuracy();
        const double im = iq.mean_accuracy();
        const int pe = polar.epochs_to_threshold > 0 ? polar.epochs_to_threshold
                                                     : cfg.train.epochs;
        const int ie = iq.epochs_to_threshold > 0 ? iq.epochs_to_threshold : cfg.train.epochs;
        const bool pass = frames_match && p0 >= i0 - 0.01 && pm >= im && pe <= ie;
        report("A4", pass,
               fmt("identical frames %s; acc@0dB polar %.3f vs iq %.3f (>= -1pt), mean %.3f vs "
                   "%.3f, epochs-to-85%% %d vs %d",
                   frames_match ? "yes" : "NO", p0, i0, pm, im, pe, ie));
    }

    // A5: HOC baseline beaten by the polar CNN at 0 dB
    {
        std::string noiseless_detail;
        const bool sanity = hoc_noiseless_sanity(noiseless_detail);
        const double h0 = hoc.accuracy_at(0.0).value_or(1.0);
        const double p0 = polar.accuracy_at(0.0).value_or(0.0);
        report("A5", sanity && h0 < p0,
               fmt("%s (need all); cumulants acc@0dB %.3f < polar %.3f", noiseless_detail.c_str(),
                   h0, p0));
    }

    // property check: nested-constellation confusion dominates at low SNR
    {
        std::array<std::array<std::int64_t, 4>, 4> sum{};
        for (const SweepRow& row : polar.rows)
            if (row.snr_db <= 0.0)
                for (int t = 0; t < 4; ++t)
                    for (int g = 0; g < 4; ++g) sum[t][g] += row.eval.confusion[t][g];

        // symmetric off-diagonal pair masses
        struct Pair {
            int a, b;
            std::int64_t mass;
        };
        std::vector<Pair> pairs;
        for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b) pairs.push_back({a, b, sum[a][b] + sum[b][a]});
        std::sort(pairs.begin(), pairs.end(),
                  [](const Pair& x, const Pair& y) { return x.mass > y.mass; });
        auto is_nested = [](const Pair& p) {
            return (p.a == 0 && p.b == 1) || (p.a == 2 && p.b == 3);
        };
        const bool top2_nested = is_nested(pairs[0]) && is_nested(pairs[1]);

        const std::int64_t within_correct = sum[0][0] + sum[1][1] + sum[2][2] + sum[3][3];
        std::int64_t cross_pair = 0;
        for (int a : {0, 1})
            for (int b : {2, 3}) cross_pair += sum[a][b] + sum[b][a];
        const bool correct_dominates = within_correct > cross_pair;

        report("P1", top2_nested && correct_dominates,
               fmt("top-2 low-SNR confusion pairs nested: %s (QPSK<->8PSK %lld, 16<->64QAM "
                   "%lld); diagonal %lld > cross-pair %lld",
                   top2_nested ? "yes" : "NO",
                   static_cast<long long>(sum[0][1] + sum[1][0]),
                   static_cast<long long>(sum[2][3] + sum[3][2]),
                   static_cast<long long>(within_correct),
                   static_cast<long long>(cross_pair)));
    }

    // A6: CCN benefit under fading
    {
        t0 = now_seconds();
        ExperimentConfig fade = desk_config();
        fade.fading = true;
        const FadingExperimentResult fading = run_fading_experiment(fade);
        std::fprintf(stderr, "[acceptance] fading experiment done in %.0fs\n",
                     now_seconds() - t0);

        const double ccn8 = fading.polar_ccn.accuracy_at(8.0).value_or(0.0);
        const double polar8 = fading.polar.accuracy_at(8.0).value_or(1.0);
        const double iq8 = fading.iq.accuracy_at(8.0).value_or(1.0);
        report("A6", ccn8 >= polar8 + 0.05 && ccn8 >= iq8 + 0.05,
               fmt("fading acc@8dB: polar+CCN %.3f vs polar %.3f and iq %.3f (both +5pts)",
                   ccn8, polar8, iq8));
    }

    std::printf("%s (%d failure%s, %.0fs total)\n", g_failures == 0 ? "ALL PASS" : "FAILURES",
                g_failures, g_failures == 1 ? "" : "s", now_seconds());
    return g_failures == 0 ? 0 : 1;
}
