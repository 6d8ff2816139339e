// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ftpkit/errors.hpp"

namespace ftpkit {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    s = trim(s);
    if (s.empty()) return out;
    while (true) {
        const auto comma = s.find(',');
        const auto item = trim(s.substr(0, comma));
        if (item.empty()) throw ConfigError("empty item in list");
        out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        s = s.substr(comma + 1);
    }
    return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError(fmt::format("{}: cannot parse '{}'", key, text));
    }
    return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, text));
}

struct Entry {
    std::string_view key;
    std::function<void(std::string_view)> set;
    std::function<std::string()> get;
};

template <typename T>
Entry number(std::string_view key, T& field) {
    return {key, [key, &field](std::string_view v) { field = parse_number<T>(key, v); },
            [&field] { return fmt::format("{}", field); }};
}

std::vector<Entry> entries(ExperimentConfig& c) {
    return {
        number("dataset.dim", c.dataset.dim),
        number("dataset.classes", c.dataset.classes),
        number("dataset.clusters_per_class", c.dataset.clusters_per_class),
        number("dataset.train_size", c.dataset.train_size),
        number("dataset.test_size", c.dataset.test_size),
        number("dataset.separation", c.dataset.separation),
        number("dataset.noise", c.dataset.noise),
        number("dataset.finetune_size", c.dataset.finetune_size),
        number("dataset.val_size", c.dataset.val_size),
        number("dataset.finetune_fraction", c.dataset.finetune_fraction),
        number("dataset.label_skew", c.dataset.label_skew),
        number("dataset.rotation_step", c.dataset.rotation_step),
        number("dataset.translation_step", c.dataset.translation_step),
        number("dataset.noise_step", c.dataset.noise_step),
        number("dataset.dropout_step", c.dataset.dropout_step),
        {"model.hidden",
         [&c](std::string_view v) {
             c.hidden.clear();
             for (const auto& item : split_list(v)) {
                 c.hidden.push_back(parse_number<std::size_t>("model.hidden", item));
             }
         },
         [&c] { return fmt::format("{}", fmt::join(c.hidden, ",")); }},
        {"model.activation", [&c](std::string_view v) { c.activation = parse_activation(v); },
         [&c] { return std::string(to_string(c.activation)); }},
        number("pretrain.iterations", c.pretrain.iterations),
        number("pretrain.batch_size", c.pretrain.batch_size),
        number("pretrain.lr", c.pretrain.lr),
        number("pretrain.momentum", c.pretrain.momentum),
        {"method", [&c](std::string_view v) { c.method = parse_method(v); },
         [&c] { return std::string(to_string(c.method)); }},
        {"optimizer", [&c](std::string_view v) { c.optimizer = std::string(v); },
         [&c] { return c.optimizer; }},
        number("lr", c.opt.lr),
        number("weight_decay", c.opt.weight_decay),
        number("momentum", c.opt.momentum),
        {"nesterov", [&c](std::string_view v) { c.opt.nesterov = parse_bool("nesterov", v); },
         [&c] { return std::string(c.opt.nesterov ? "true" : "false"); }},
        number("k", c.kappa),
        {"exclude_set", [&c](std::string_view v) { c.exclude_set = split_list(v); },
         [&c] { return fmt::format("{}", fmt::join(c.exclude_set, ",")); }},
        number("tpgm.inner_iters", c.tpgm_inner_iters),
        {"mars_sp.gamma",
         [&c](std::string_view v) {
             c.mars_sp_gamma = (v == "inf") ? INFINITY : parse_number<double>("mars_sp.gamma", v);
         },
         [&c] { return std::isinf(c.mars_sp_gamma) ? std::string("inf")
                                                   : fmt::format("{}", c.mars_sp_gamma); }},
        number("l2_sp.lambda", c.l2_sp_lambda),
        number("wise.ratio", c.wise_ratio),
        number("hyper.alpha0", c.hyper_alpha0),
        number("hyper.kappa", c.hyper_kappa),
        number("lp_ft.probe_iterations", c.lp_ft_probe_iterations),
        number("iterations", c.iterations),
        number("epochs", c.epochs),
        number("batch_size", c.batch_size),
        number("seed", c.seed),
        {"output_dir", [&c](std::string_view v) { c.output_dir = std::string(v); },
         [&c] { return c.output_dir; }},
        {"pretrained_path", [&c](std::string_view v) { c.pretrained_path = std::string(v); },
         [&c] { return c.pretrained_path; }},
        number("checkpoint_every", c.checkpoint_every),
    };
}

}  // namespace

std::string_view to_string(Method m) {
    switch (m) {
        case Method::kFt: return "ft";
        case Method::kLinearProbe: return "linear-probe";
        case Method::kLpFt: return "lp-ft";
        case Method::kL2Sp: return "l2-sp";
        case Method::kMarsSp: return "mars-sp";
        case Method::kTpgm: return "tpgm";
        case Method::kFtp: return "ftp";
        case Method::kHyperSgd: return "hyper-sgd";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (Method m : kAllMethods) {
        if (to_string(m) == name) return m;
    }
    throw ConfigError(fmt::format("unknown method '{}'", name));
}

MlpSpec ExperimentConfig::model_spec() const {
    MlpSpec spec;
    spec.widths.push_back(dataset.dim);
    spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
    spec.widths.push_back(dataset.classes);
    spec.activations.assign(hidden.size(), activation);
    spec.loss = LossKind::kSoftmaxCrossEntropy;
    return spec;
}

std::size_t ExperimentConfig::total_iterations() const {
    if (epochs == 0) return iterations;
    const std::size_t per_epoch = (dataset.finetune_size + batch_size - 1) / batch_size;
    return epochs * per_epoch;
}

std::filesystem::path ExperimentConfig::pretrained_checkpoint() const {
    if (!pretrained_path.empty()) return pretrained_path;
    return std::filesystem::path(output_dir) / "pretrained.ckpt";
}

std::string ExperimentConfig::pretrain_fingerprint() const {
    return fmt::format("{}|{}|pre={},{},{},{}|seed={}", dataset.canonical_string(),
                       model_spec().canonical_string(), pretrain.iterations, pretrain.batch_size,
                       pretrain.lr, pretrain.momentum, seed);
}

std::string ExperimentConfig::run_fingerprint() const {
    ExperimentConfig copy = *this;
    copy.output_dir.clear();
    copy.pretrained_path.clear();
    copy.checkpoint_every = 0;
    copy.iterations = 0;
    copy.epochs = 0;
    return to_config_text(copy);
}

void ExperimentConfig::validate() const {
    dataset.validate();
    model_spec().validate();
    if (pretrain.iterations == 0 || pretrain.batch_size == 0 || !(pretrain.lr > 0.0) ||
        !(pretrain.momentum >= 0.0 && pretrain.momentum < 1.0)) {
        throw ConfigError("pretrain settings must be positive with momentum in [0, 1)");
    }
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (total_iterations() == 0) throw ConfigError("iterations must be >= 1");
    if (optimizer != "sgd" && optimizer != "adamw") {
        throw ConfigError(fmt::format("unknown optimizer '{}'", optimizer));
    }
    make_base_optimizer(optimizer, opt);
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("k must be in [0, 1]");
    if (!(mars_sp_gamma >= 0.0)) throw ConfigError("mars_sp.gamma must be >= 0");
    if (!(l2_sp_lambda >= 0.0)) throw ConfigError("l2_sp.lambda must be >= 0");
    if (!(wise_ratio >= 0.0 && wise_ratio <= 1.0)) throw ConfigError("wise.ratio must be in [0, 1]");
    if (!(hyper_alpha0 > 0.0)) throw ConfigError("hyper.alpha0 must be > 0");
    if (!std::isfinite(hyper_kappa)) throw ConfigError("hyper.kappa must be finite");
}

void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value) {
    for (auto& e : entries(config)) {
        if (e.key == key) {
            e.set(trim(value));
            return;
        }
    }
    throw ConfigError(fmt::format("unknown configuration key '{}'", key));
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig config;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
        }
        try {
            apply_setting(config, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("line {}: {}", line_no, e.what()));
        }
    }
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string to_config_text(const ExperimentConfig& config) {
    ExperimentConfig copy = config;
    std::string out;
    for (const auto& e : entries(copy)) out += fmt::format("{} = {}\n", e.key, e.get());
    return out;
}

}  // namespace ftpkit
