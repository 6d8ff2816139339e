// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration. The file format is one `key = value` per line;
// `#` starts a comment, lists are comma separated and unknown keys are
// rejected.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ftpkit/dataset.hpp"
#include "ftpkit/model.hpp"
#include "ftpkit/optimizers.hpp"

namespace ftpkit {

enum class Method { kFt, kLinearProbe, kLpFt, kL2Sp, kMarsSp, kTpgm, kFtp, kHyperSgd };

inline constexpr Method kAllMethods[] = {Method::kFt,    Method::kLinearProbe, Method::kLpFt,
                                         Method::kL2Sp,  Method::kMarsSp,      Method::kTpgm,
                                         Method::kFtp,   Method::kHyperSgd};

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct PretrainSettings {
    std::size_t iterations = 3000;
    std::size_t batch_size = 64;
    double lr = 0.05;
    double momentum = 0.9;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    std::vector<std::size_t> hidden = {64, 64};
    Activation activation = Activation::kRelu;
    PretrainSettings pretrain;

    Method method = Method::kFtp;
    std::string optimizer = "sgd";
    OptimizerSettings opt{0.05, 0.0, 0.9, false, 0.9, 0.999, 1e-8};
    double kappa = 1.0;                      // key: k
    std::vector<std::string> exclude_set;    // "*" selects every tensor
    std::size_t tpgm_inner_iters = 1;
    double mars_sp_gamma = 1.0;
    double l2_sp_lambda = 0.01;
    double wise_ratio = 1.0;
    double hyper_alpha0 = 0.01;
    double hyper_kappa = 1e-4;
    std::size_t lp_ft_probe_iterations = 100;

    std::size_t iterations = 1000;
    std::size_t epochs = 0;  // when set, overrides iterations
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    std::string output_dir = "runs/default";
    std::string pretrained_path;  // defaults to <output_dir>/pretrained.ckpt
    std::size_t checkpoint_every = 0;

    MlpSpec model_spec() const;
    std::size_t total_iterations() const;
    std::filesystem::path pretrained_checkpoint() const;

    /// Identifies everything that determines the pretrained weights.
    std::string pretrain_fingerprint() const;
    /// Identifies everything that determines a fine-tuning run.
    std::string run_fingerprint() const;

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

/// Sets one key; throws ConfigError for unknown keys or malformed values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, in a form parse_config accepts.
std::string to_config_text(const ExperimentConfig& config);

}  // namespace ftpkit
