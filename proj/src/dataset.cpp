#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "amc/harness.hpp"

namespace fs = std::filesystem;

namespace amc {

namespace {

constexpr std::uint64_t kTagFrame = 0xF7A3Eu;
constexpr std::uint64_t kTagValSplit = 0x7A15u;
constexpr std::uint32_t kManifestVersion = 1;

int scheme_index_of(const ExperimentConfig& cfg, ModulationScheme s) {
    for (std::size_t i = 0; i < cfg.schemes.size(); ++i)
        if (cfg.schemes[i] == s) return static_cast<int>(i);
    return -1;
}

void append_image(LabeledImages& set, const ConstellationImage& img, std::uint8_t label) {
    for (double v : img.grid) set.images.push_back(static_cast<float>(v));
    set.labels.push_back(label);
}

}  // namespace

SymbolFrame make_received_frame(const ExperimentConfig& cfg, ModulationScheme scheme,
                                int snr_idx, bool test_split, int frame_idx,
                                ChannelTruth* truth_out) {
    Rng rng(derive_seed(cfg.seed, {kTagFrame, static_cast<std::uint64_t>(scheme),
                                   static_cast<std::uint64_t>(snr_idx),
                                   test_split ? 1ull : 0ull,
                                   static_cast<std::uint64_t>(frame_idx)}));
    SymbolFrame tx = generate_frame(scheme, static_cast<std::size_t>(cfg.symbol_length), rng);

    ChannelParams params;
    if (cfg.fading) params = sample_fading(cfg.fading_dist, rng);
    params.f0 = cfg.f0;
    params.snr_db = cfg.snr_list[static_cast<std::size_t>(snr_idx)];

    if (truth_out) *truth_out = ChannelTruth{params.a, params.theta0, params.snr_db};
    return apply_channel(tx, params, rng);
}

SplitData build_split(const ExperimentConfig& cfg, FeatureMode mode, bool test_split) {
    const int per = test_split ? cfg.test_per_class : cfg.train_per_class;
    const int n_schemes = static_cast<int>(cfg.schemes.size());
    const int n_snr = static_cast<int>(cfg.snr_list.size());
    const std::size_t total = static_cast<std::size_t>(n_schemes) * n_snr * per;

    SplitData out;
    out.truth.resize(total);
    std::vector<std::uint64_t> hashes(total);

    const GridSpec grid = mode == FeatureMode::Iq ? cfg.iq_grid() : cfg.polar_grid();
    const std::size_t cells = grid.cells();

    if (mode == FeatureMode::Polar || mode == FeatureMode::Iq) {
        out.images.rows = grid.rows;
        out.images.cols = grid.cols;
        out.images.images.resize(total * cells);
        out.images.labels.resize(total);
    } else if (mode == FeatureMode::Ccn) {
        out.frames.symbols_per_frame = cfg.symbol_length;
        out.frames.pairs.resize(total * static_cast<std::size_t>(cfg.symbol_length) * 2);
        out.frames.labels.resize(total);
        out.frames.truth.resize(total);
    } else {
        out.raw.resize(total);
    }

    const long long totals = static_cast<long long>(total);
#pragma omp parallel for schedule(static)
    for (long long flat = 0; flat < totals; ++flat) {
        const int idx = static_cast<int>(flat % per);
        const int snr_idx = static_cast<int>((flat / per) % n_snr);
        const int scheme_idx = static_cast<int>(flat / (static_cast<long long>(per) * n_snr));
        const ModulationScheme scheme = cfg.schemes[static_cast<std::size_t>(scheme_idx)];

        ChannelTruth truth;
        SymbolFrame rx = make_received_frame(cfg, scheme, snr_idx, test_split, idx, &truth);
        hashes[static_cast<std::size_t>(flat)] = frame_hash(rx);
        out.truth[static_cast<std::size_t>(flat)] = truth;

        const auto label = static_cast<std::uint8_t>(scheme_idx);
        if (mode == FeatureMode::Polar) {
            const ConstellationImage img = rasterize_polar(to_polar(rx), grid);
            out.images.labels[static_cast<std::size_t>(flat)] = label;
            float* dst = out.images.images.data() + static_cast<std::size_t>(flat) * cells;
            for (std::size_t c = 0; c < cells; ++c) dst[c] = static_cast<float>(img.grid[c]);
        } else if (mode == FeatureMode::Iq) {
            const ConstellationImage img = rasterize_iq(rx, grid);
            out.images.labels[static_cast<std::size_t>(flat)] = label;
            float* dst = out.images.images.data() + static_cast<std::size_t>(flat) * cells;
            for (std::size_t c = 0; c < cells; ++c) dst[c] = static_cast<float>(img.grid[c]);
        } else if (mode == FeatureMode::Ccn) {
            const PolarFrame polar = to_polar(rx);
            out.frames.labels[static_cast<std::size_t>(flat)] = label;
            out.frames.truth[static_cast<std::size_t>(flat)] = truth;
            float* dst = out.frames.pairs.data() +
                         static_cast<std::size_t>(flat) * cfg.symbol_length * 2;
            for (int k = 0; k < cfg.symbol_length; ++k) {
                dst[2 * k] = static_cast<float>(polar.pairs[static_cast<std::size_t>(k)].r);
                dst[2 * k + 1] =
                    static_cast<float>(polar.pairs[static_cast<std::size_t>(k)].theta);
            }
        } else {
            out.raw[static_cast<std::size_t>(flat)] = std::move(rx);
        }
    }

    std::uint64_t combined = 0xCBF29CE484222325ULL;
    for (std::uint64_t h : hashes) combined = hash_combine(combined, h);
    out.frame_hash = combined;
    return out;
}

LabeledImages images_for_snr(const LabeledImages& all, const ExperimentConfig& cfg,
                             int per_class, int snr_idx) {
    LabeledImages sub;
    sub.rows = all.rows;
    sub.cols = all.cols;
    const int n_snr = static_cast<int>(cfg.snr_list.size());
    const std::size_t cells = all.image_size();
    for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
        const std::size_t base =
            (s * n_snr + static_cast<std::size_t>(snr_idx)) * static_cast<std::size_t>(per_class);
        for (int i = 0; i < per_class; ++i) {
            const float* src = all.image(base + i);
            sub.images.insert(sub.images.end(), src, src + cells);
            sub.labels.push_back(all.labels[base + i]);
        }
    }
    return sub;
}

FrameDataset frames_for_snr(const FrameDataset& all, const ExperimentConfig& cfg,
                            int per_class, int snr_idx) {
    FrameDataset sub;
    sub.symbols_per_frame = all.symbols_per_frame;
    const int n_snr = static_cast<int>(cfg.snr_list.size());
    const std::size_t stride = static_cast<std::size_t>(all.symbols_per_frame) * 2;
    for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
        const std::size_t base =
            (s * n_snr + static_cast<std::size_t>(snr_idx)) * static_cast<std::size_t>(per_class);
        for (int i = 0; i < per_class; ++i) {
            const float* src = all.pairs.data() + (base + i) * stride;
            sub.pairs.insert(sub.pairs.end(), src, src + stride);
            sub.labels.push_back(all.labels[base + i]);
            sub.truth.push_back(all.truth[base + i]);
        }
    }
    return sub;
}

namespace {

std::vector<std::uint32_t> val_permutation(std::size_t count, std::uint64_t seed) {
    std::vector<std::uint32_t> order(count);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(derive_seed(seed, {kTagValSplit}));
    for (std::size_t i = count; i > 1; --i) {
        const std::size_t j = rng.uniform_int(i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

}  // namespace

void split_train_val(const LabeledImages& all, double fraction, std::uint64_t seed,
                     LabeledImages& train_out, LabeledImages& val_out) {
    const auto order = val_permutation(all.count(), seed);
    const std::size_t n_val = static_cast<std::size_t>(fraction * static_cast<double>(all.count()));
    train_out = LabeledImages{all.rows, all.cols, {}, {}};
    val_out = LabeledImages{all.rows, all.cols, {}, {}};
    const std::size_t cells = all.image_size();
    for (std::size_t k = 0; k < order.size(); ++k) {
        LabeledImages& dst = k < n_val ? val_out : train_out;
        const float* src = all.image(order[k]);
        dst.images.insert(dst.images.end(), src, src + cells);
        dst.labels.push_back(all.labels[order[k]]);
    }
}

void split_train_val_frames(const FrameDataset& all, double fraction, std::uint64_t seed,
                            FrameDataset& train_out, FrameDataset& val_out) {
    const auto order = val_permutation(all.count(), seed);
    const std::size_t n_val = static_cast<std::size_t>(fraction * static_cast<double>(all.count()));
    train_out = FrameDataset{all.symbols_per_frame, {}, {}, {}};
    val_out = FrameDataset{all.symbols_per_frame, {}, {}, {}};
    const std::size_t stride = static_cast<std::size_t>(all.symbols_per_frame) * 2;
    for (std::size_t k = 0; k < order.size(); ++k) {
        FrameDataset& dst = k < n_val ? val_out : train_out;
        const float* src = all.pairs.data() + order[k] * stride;
        dst.pairs.insert(dst.pairs.end(), src, src + stride);
        dst.labels.push_back(all.labels[order[k]]);
        dst.truth.push_back(all.truth[order[k]]);
    }
}

// --- persistence -------------------------------------------------------------

namespace {

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("cannot open dataset file: " + path.string() +
                             " (run gen-data first)");
    const std::streamsize n = in.tellg();
    in.seekg(0);
    std::vector<char> buf(static_cast<std::size_t>(n));
    in.read(buf.data(), n);
    if (!in) throw DataError("read failed: " + path.string());
    return buf;
}

void write_channel_csv(const fs::path& path, const ExperimentConfig& cfg,
                       const std::vector<ChannelTruth>& truth,
                       const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << "index,scheme,snr_db,a,theta0\n";
    char line[160];
    for (std::size_t i = 0; i < truth.size(); ++i) {
        std::snprintf(line, sizeof line, "%zu,%s,%g,%.17g,%.17g\n", i,
                      scheme_name(cfg.schemes[labels[i]]), truth[i].snr_db, truth[i].a,
                      truth[i].theta0);
        out << line;
    }
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<ChannelTruth> read_channel_csv(const fs::path& path, std::vector<std::uint8_t>* labels,
                                           const ExperimentConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path.string());
    std::string line;
    std::getline(in, line);  // header
    std::vector<ChannelTruth> truth;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::getline(row, field, ',');  // index
        std::getline(row, field, ',');
        if (labels) {
            const ModulationScheme s = scheme_from_name(field);
            labels->push_back(static_cast<std::uint8_t>(scheme_index_of(cfg, s)));
        }
        ChannelTruth t;
        std::getline(row, field, ',');
        t.snr_db = std::stod(field);
        std::getline(row, field, ',');
        t.a = std::stod(field);
        std::getline(row, field, ',');
        t.theta0 = std::stod(field);
        truth.push_back(t);
    }
    return truth;
}

fs::path dataset_dir(const ExperimentConfig& cfg) {
    return fs::path(cfg.out_dir) / (std::string("dataset_") + mode_name(cfg.mode));
}

void write_split_files(const fs::path& dir, const ExperimentConfig& cfg, FeatureMode mode,
                       const SplitData& split, const char* prefix) {
    if (mode == FeatureMode::Polar || mode == FeatureMode::Iq) {
        write_bytes(dir / (std::string(prefix) + "_images.f32"), split.images.images.data(),
                    split.images.images.size() * sizeof(float));
        write_bytes(dir / (std::string(prefix) + "_labels.u8"), split.images.labels.data(),
                    split.images.labels.size());
        write_channel_csv(dir / (std::string(prefix) + "_channel.csv"), cfg, split.truth,
                          split.images.labels);
    } else if (mode == FeatureMode::Ccn) {
        write_bytes(dir / (std::string(prefix) + "_frames.f32"), split.frames.pairs.data(),
                    split.frames.pairs.size() * sizeof(float));
        write_bytes(dir / (std::string(prefix) + "_labels.u8"), split.frames.labels.data(),
                    split.frames.labels.size());
        write_channel_csv(dir / (std::string(prefix) + "_channel.csv"), cfg, split.truth,
                          split.frames.labels);
    } else {
        std::ofstream out(dir / (std::string(prefix) + "_frames.bin"), std::ios::binary);
        if (!out) throw DataError("cannot open for writing: " + dir.string());
        for (const SymbolFrame& f : split.raw) write_frame(out, f);
        if (!out) throw DataError("write failed: frames");
        std::vector<std::uint8_t> labels;
        for (const SymbolFrame& f : split.raw)
            labels.push_back(static_cast<std::uint8_t>(scheme_index_of(cfg, f.scheme)));
        write_channel_csv(dir / (std::string(prefix) + "_channel.csv"), cfg, split.truth, labels);
    }
}

}  // namespace

std::string generate_dataset(const ExperimentConfig& cfg) {
    cfg.validate();
    const fs::path final_dir = dataset_dir(cfg);
    const fs::path tmp_dir = final_dir.string() + ".partial";

    std::error_code ec;
    fs::remove_all(tmp_dir, ec);
    fs::create_directories(tmp_dir);

    try {
        // Cumulants mode persists test frames only; nothing trains on it.
        SplitData train;
        if (cfg.mode != FeatureMode::Cumulants)
            train = build_split(cfg, cfg.mode, /*test_split=*/false);
        SplitData test = build_split(cfg, cfg.mode, /*test_split=*/true);

        if (cfg.mode != FeatureMode::Cumulants)
            write_split_files(tmp_dir, cfg, cfg.mode, train, "train");
        write_split_files(tmp_dir, cfg, cfg.mode, test, "test");

        std::ostringstream manifest;
        manifest << "format_version=" << kManifestVersion << '\n';
        char hex[32];
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(config_hash(cfg)));
        manifest << "config_hash=" << hex << '\n';
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(train.frame_hash));
        manifest << "frame_hash_train=" << (cfg.mode == FeatureMode::Cumulants ? "0" : hex)
                 << '\n';
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(test.frame_hash));
        manifest << "frame_hash_test=" << hex << '\n';
        manifest << canonical_config(cfg);
        const std::string text = manifest.str();
        write_bytes(tmp_dir / "manifest.txt", text.data(), text.size());
    } catch (...) {
        fs::remove_all(tmp_dir, ec);
        throw;
    }

    fs::remove_all(final_dir, ec);
    fs::rename(tmp_dir, final_dir);
    return final_dir.string();
}

StoredDataset load_dataset(const ExperimentConfig& cfg) {
    const fs::path dir = dataset_dir(cfg);
    if (!fs::exists(dir / "manifest.txt"))
        throw DataError("dataset not found at " + dir.string() + " (run gen-data first)");

    const std::vector<char> manifest_bytes = read_bytes(dir / "manifest.txt");
    const std::string manifest(manifest_bytes.begin(), manifest_bytes.end());
    char expect[32];
    std::snprintf(expect, sizeof expect, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
    if (manifest.find(std::string("config_hash=") + expect + "\n") == std::string::npos)
        throw DataError("dataset at " + dir.string() +
                        " was generated from a different config (hash mismatch)");

    auto manifest_hash = [&manifest](const char* key) {
        const std::string needle = std::string(key) + "=";
        const auto pos = manifest.find(needle);
        if (pos == std::string::npos) return std::uint64_t{0};
        return static_cast<std::uint64_t>(
            std::stoull(manifest.substr(pos + needle.size(), 16), nullptr, 16));
    };

    StoredDataset ds;
    ds.train.frame_hash = manifest_hash("frame_hash_train");
    ds.test.frame_hash = manifest_hash("frame_hash_test");

    auto load_split = [&](SplitData& split, const char* prefix) {
        if (cfg.mode == FeatureMode::Polar || cfg.mode == FeatureMode::Iq) {
            const GridSpec grid =
                cfg.mode == FeatureMode::Iq ? cfg.iq_grid() : cfg.polar_grid();
            split.images.rows = grid.rows;
            split.images.cols = grid.cols;
            auto img = read_bytes(dir / (std::string(prefix) + "_images.f32"));
            split.images.images.resize(img.size() / sizeof(float));
            std::memcpy(split.images.images.data(), img.data(), img.size());
            auto lab = read_bytes(dir / (std::string(prefix) + "_labels.u8"));
            split.images.labels.assign(lab.begin(), lab.end());
            split.truth = read_channel_csv(dir / (std::string(prefix) + "_channel.csv"),
                                           nullptr, cfg);
        } else if (cfg.mode == FeatureMode::Ccn) {
            split.frames.symbols_per_frame = cfg.symbol_length;
            auto pairs = read_bytes(dir / (std::string(prefix) + "_frames.f32"));
            split.frames.pairs.resize(pairs.size() / sizeof(float));
            std::memcpy(split.frames.pairs.data(), pairs.data(), pairs.size());
            auto lab = read_bytes(dir / (std::string(prefix) + "_labels.u8"));
            split.frames.labels.assign(lab.begin(), lab.end());
            split.frames.truth = read_channel_csv(dir / (std::string(prefix) + "_channel.csv"),
                                                  nullptr, cfg);
            split.truth = split.frames.truth;
        } else {
            std::ifstream in(dir / (std::string(prefix) + "_frames.bin"), std::ios::binary);
            if (!in) throw DataError("cannot open dataset frames");
            while (in.peek() != EOF) split.raw.push_back(read_frame(in));
            split.truth = read_channel_csv(dir / (std::string(prefix) + "_channel.csv"),
                                           nullptr, cfg);
        }
    };

    if (cfg.mode != FeatureMode::Cumulants) load_split(ds.train, "train");
    load_split(ds.test, "test");
    return ds;
}

}  // namespace amc
