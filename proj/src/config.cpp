#include <algorithm>
#include <fstream>
#include <sstream>

#include "amc/harness.hpp"

namespace amc {

const char* mode_name(FeatureMode m) {
    switch (m) {
        case FeatureMode::Polar: return "polar";
        case FeatureMode::Iq: return "iq";
        case FeatureMode::Cumulants: return "cumulants";
        case FeatureMode::Ccn: return "ccn";
    }
    return "?";
}

FeatureMode mode_from_name(const std::string& name) {
    if (name == "polar") return FeatureMode::Polar;
    if (name == "iq") return FeatureMode::Iq;
    if (name == "cumulants") return FeatureMode::Cumulants;
    if (name == "ccn") return FeatureMode::Ccn;
    throw DataError("unknown feature mode: " + name);
}

void ExperimentConfig::validate() const {
    if (schemes.empty()) throw DataError("config: schemes must be non-empty");
    if (symbol_length < 1) throw DataError("config: symbol_length must be >= 1");
    if (train_per_class < 1 || test_per_class < 1)
        throw DataError("config: per-class counts must be >= 1");
    if (snr_list.empty()) throw DataError("config: snr_list must be non-empty");
    if (polar_res < 1 || iq_res < 1 || ccn_input_res < 1)
        throw DataError("config: image resolutions must be >= 1");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw DataError("config: val_fraction must be in [0,1)");
    if (!(fading_dist.a_min > 0.0 && fading_dist.a_min <= fading_dist.a_max))
        throw DataError("config: need 0 < a_min <= a_max");
    if (train.batch_size < 1 || train.epochs < 1 || !(train.learning_rate > 0.0))
        throw DataError("config: bad training parameters");
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream stream(s);
    while (std::getline(stream, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw DataError("config: bad boolean value: " + v);
}

}  // namespace

void apply_profile(ExperimentConfig& cfg, const std::string& profile) {
    if (profile == "paper") {
        cfg.train_per_class = 5000;
        cfg.test_per_class = 1000;
    } else if (profile == "desk") {
        cfg.train_per_class = 500;
        cfg.test_per_class = 200;
    } else {
        throw DataError("config: unknown profile: " + profile);
    }
    cfg.polar_res = 36;
    cfg.iq_res = 64;
}

void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "profile") apply_profile(cfg, value);
        else if (key == "mode") cfg.mode = mode_from_name(value);
        else if (key == "schemes") {
            cfg.schemes.clear();
            for (const auto& name : split_list(value)) cfg.schemes.push_back(scheme_from_name(name));
        } else if (key == "symbol_length") cfg.symbol_length = std::stoi(value);
        else if (key == "train_per_class") cfg.train_per_class = std::stoi(value);
        else if (key == "test_per_class") cfg.test_per_class = std::stoi(value);
        else if (key == "snr_list") {
            cfg.snr_list.clear();
            for (const auto& v : split_list(value)) cfg.snr_list.push_back(std::stod(v));
        } else if (key == "fading") cfg.fading = parse_bool(value);
        else if (key == "a_min") cfg.fading_dist.a_min = std::stod(value);
        else if (key == "a_max") cfg.fading_dist.a_max = std::stod(value);
        else if (key == "f0") cfg.f0 = std::stod(value);
        else if (key == "polar_res") cfg.polar_res = std::stoi(value);
        else if (key == "iq_res") cfg.iq_res = std::stoi(value);
        else if (key == "ccn_input_res") cfg.ccn_input_res = std::stoi(value);
        else if (key == "val_fraction") cfg.val_fraction = std::stod(value);
        else if (key == "threshold_val_acc") cfg.threshold_val_acc = std::stod(value);
        else if (key == "hoc_phase_invariant") cfg.hoc_phase_invariant = parse_bool(value);
        else if (key == "ccn_warm_start") cfg.ccn_warm_start = parse_bool(value);
        else if (key == "warm_start_checkpoint") cfg.warm_start_checkpoint = value;
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "epochs") cfg.train.epochs = std::stoi(value);
        else if (key == "batch_size") cfg.train.batch_size = std::stoi(value);
        else if (key == "learning_rate") cfg.train.learning_rate = std::stod(value);
        else if (key == "optimizer") {
            if (value == "sgd") cfg.train.optimizer = TrainConfig::Optimizer::Sgd;
            else if (value == "adam") cfg.train.optimizer = TrainConfig::Optimizer::Adam;
            else throw DataError("config: unknown optimizer: " + value);
        } else if (key == "beta1") cfg.train.beta1 = std::stod(value);
        else if (key == "beta2") cfg.train.beta2 = std::stod(value);
        else if (key == "adam_eps") cfg.train.adam_eps = std::stod(value);
        else if (key == "out_dir") cfg.out_dir = value;
        else throw DataError("config: unknown key: " + key);
    } catch (const std::invalid_argument&) {
        throw DataError("config: bad value for " + key + ": " + value);
    } catch (const std::out_of_range&) {
        throw DataError("config: value out of range for " + key + ": " + value);
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);

    // profile first so explicit keys override it regardless of file order
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected key=value");
        pairs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }

    ExperimentConfig cfg;
    for (const auto& [k, v] : pairs)
        if (k == "profile") apply_config_line(cfg, k, v);
    for (const auto& [k, v] : pairs)
        if (k != "profile") apply_config_line(cfg, k, v);
    cfg.validate();
    return cfg;
}

std::string canonical_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "a_max=" << cfg.fading_dist.a_max << '\n';
    out << "a_min=" << cfg.fading_dist.a_min << '\n';
    out << "adam_eps=" << cfg.train.adam_eps << '\n';
    out << "batch_size=" << cfg.train.batch_size << '\n';
    out << "beta1=" << cfg.train.beta1 << '\n';
    out << "beta2=" << cfg.train.beta2 << '\n';
    out << "ccn_input_res=" << cfg.ccn_input_res << '\n';
    out << "ccn_warm_start=" << (cfg.ccn_warm_start ? 1 : 0) << '\n';
    out << "epochs=" << cfg.train.epochs << '\n';
    out << "f0=" << cfg.f0 << '\n';
    out << "fading=" << (cfg.fading ? 1 : 0) << '\n';
    out << "hoc_phase_invariant=" << (cfg.hoc_phase_invariant ? 1 : 0) << '\n';
    out << "iq_res=" << cfg.iq_res << '\n';
    out << "learning_rate=" << cfg.train.learning_rate << '\n';
    out << "mode=" << mode_name(cfg.mode) << '\n';
    out << "optimizer="
        << (cfg.train.optimizer == TrainConfig::Optimizer::Adam ? "adam" : "sgd") << '\n';
    out << "polar_res=" << cfg.polar_res << '\n';
    out << "schemes=";
    for (std::size_t i = 0; i < cfg.schemes.size(); ++i)
        out << (i ? "," : "") << scheme_name(cfg.schemes[i]);
    out << '\n';
    out << "seed=" << cfg.seed << '\n';
    out << "snr_list=";
    for (std::size_t i = 0; i < cfg.snr_list.size(); ++i) out << (i ? "," : "") << cfg.snr_list[i];
    out << '\n';
    out << "symbol_length=" << cfg.symbol_length << '\n';
    out << "test_per_class=" << cfg.test_per_class << '\n';
    out << "threshold_val_acc=" << cfg.threshold_val_acc << '\n';
    out << "train_per_class=" << cfg.train_per_class << '\n';
    out << "val_fraction=" << cfg.val_fraction << '\n';
    return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string canon = canonical_config(cfg);
    return fnv1a64(canon.data(), canon.size());
}

}  // namespace amc
