// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pretraining, fine-tuning with any of the supported methods, evaluation and
// per-run output files.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "ftpkit/baselines.hpp"
#include "ftpkit/checkpoint.hpp"
#include "ftpkit/config.hpp"
#include "ftpkit/dataset.hpp"
#include "ftpkit/ftp_optimizer.hpp"
#include "ftpkit/hyper_optim.hpp"
#include "ftpkit/metrics.hpp"

namespace ftpkit {

/// Training-time loss/gradient evaluations. Every evaluation runs one
/// forward and one backward pass, so the two counts always agree.
struct PassCounter {
    std::uint64_t forward = 0;
    std::uint64_t backward = 0;
};

/// Plain SGD on the broad train split from a seeded initialisation.
NamedParams pretrain(const ExperimentConfig& config, const ShiftDataset& data,
                     PassCounter* counter = nullptr);

Checkpoint make_pretrained_checkpoint(const ExperimentConfig& config, const NamedParams& params);

/// Loads pretrained weights, checking that they were produced for `config`.
/// Throws RunError if the file is missing or belongs to another setup.
NamedParams load_pretrained(const ExperimentConfig& config, const std::filesystem::path& path);

class FinetuneSession {
public:
    /// Called after every iteration with the freshly appended row.
    using Observer = std::function<void(const FinetuneSession&, const IterationRow&)>;

    FinetuneSession(ExperimentConfig config, std::shared_ptr<const ShiftDataset> data,
                    const NamedParams& pretrained);

    /// One fine-tuning iteration. Throws RunError on a non-finite loss or
    /// weights; the offending row is still appended to the record.
    void step();
    void run_until(std::uint64_t iteration, const Observer& observer = {});

    std::uint64_t iteration() const { return iteration_; }
    const RunRecord& record() const { return record_; }
    const ParamSet& params() const { return params_; }
    const PassCounter& passes() const { return passes_; }
    const ExperimentConfig& config() const { return config_; }
    const ShiftDataset& data() const { return *data_; }

    /// Names and current radii of the tensors carrying a constraint.
    std::vector<std::string> constrained_names() const;
    std::vector<double> current_gammas() const;

    /// Largest mars_norm(W - W0) - gamma over constrained tensors; <= 0 means
    /// every constraint holds exactly.
    double worst_constraint_excess() const;

    /// Weights used for evaluation (WiSE interpolation applied).
    NamedParams evaluation_weights() const;
    AccuracyTable evaluate_now() const;

    Checkpoint checkpoint() const;
    /// Throws PersistenceError if the checkpoint belongs to another setup.
    void restore(const Checkpoint& checkpoint);

private:
    Batch next_batch();
    NamedParams counted_grads(const NamedParams& params, const Batch& batch, double* loss);
    std::vector<std::string> last_layer_names() const;
    BaseOptimizer* base_optimizer();
    const BaseOptimizer* base_optimizer() const;
    std::vector<GammaState> gamma_states() const;
    void set_gamma_states(std::vector<GammaState> states);

    ExperimentConfig config_;
    std::shared_ptr<const ShiftDataset> data_;
    MlpSpec spec_;
    ParamSet params_;
    std::uint64_t iteration_ = 0;
    PassCounter passes_;
    SeededRng batch_rng_;
    SeededRng val_rng_;

    std::unique_ptr<BaseOptimizer> base_;
    std::optional<FtpOptimizer> ftp_;
    std::optional<TpgmOptimizer> tpgm_;
    std::optional<MarsSpOptimizer> mars_;
    HyperLrState hyper_;
    std::vector<std::size_t> constrained_;  // slots carrying a gamma

    RunRecord record_;
};

struct RunOptions {
    bool pretrain_if_missing = true;
    bool resume = false;
    bool write_outputs = true;
    FinetuneSession::Observer observer;
};

/// Pretrain (when needed), fine-tune, evaluate. Writes metrics.csv,
/// metrics.json, summary.json and finetune.ckpt under config.output_dir.
RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace ftpkit
