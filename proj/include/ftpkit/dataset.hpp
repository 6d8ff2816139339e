// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic classification data with parametric distribution shifts.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ftpkit/model.hpp"
#include "ftpkit/numerics.hpp"

namespace ftpkit {

enum class ShiftKind { kRotation, kTranslation, kAdditiveNoise, kFeatureDropout };

inline constexpr std::array<ShiftKind, 4> kShiftKinds = {
    ShiftKind::kRotation, ShiftKind::kTranslation, ShiftKind::kAdditiveNoise,
    ShiftKind::kFeatureDropout};
inline constexpr int kSeverityLevels = 5;

std::string_view to_string(ShiftKind kind);
ShiftKind parse_shift_kind(std::string_view name);

struct LabeledSet {
    DenseMatrix inputs;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    Batch as_batch() const { return Batch{inputs, labels, {}}; }
};

struct DatasetSpec {
    std::size_t dim = 16;
    std::size_t classes = 4;
    std::size_t clusters_per_class = 2;
    std::size_t train_size = 4000;
    std::size_t test_size = 2000;
    double separation = 3.0;  // norm of each cluster centre
    double noise = 1.0;       // within-cluster standard deviation

    // Fine-tuning subset drawn from the train split: only the closest
    // `finetune_fraction` of each class to its cluster centre is eligible and
    // class c is weighted by label_skew^c.
    std::size_t finetune_size = 200;
    std::size_t val_size = 100;
    double finetune_fraction = 1.0;
    double label_skew = 0.3;

    // Shift magnitude per severity level.
    double rotation_step = 0.15;  // radians
    double translation_step = 0.5;
    double noise_step = 0.3;
    double dropout_step = 0.08;

    /// Throws ConfigError on an unusable spec.
    void validate() const;
    std::string canonical_string() const;
};

struct ShiftDataset {
    DatasetSpec spec;
    std::uint64_t seed = 0;
    LabeledSet train;       // broad clean split used for pretraining
    LabeledSet finetune;    // narrow, label-skewed subsample of train
    LabeledSet validation;  // held out from the same pool as finetune
    LabeledSet test;        // clean in-distribution split
    std::map<std::pair<ShiftKind, int>, LabeledSet> ood;

    /// Severity 0 is the clean test split; 1..5 the shifted copies.
    const LabeledSet& split(ShiftKind kind, int severity) const;
};

ShiftDataset generate_shift_dataset(const DatasetSpec& spec, std::uint64_t seed);

/// Applies one shift to `clean`. Noise and dropout draw from `rng`.
LabeledSet apply_shift(const LabeledSet& clean, ShiftKind kind, int severity,
                       const DatasetSpec& spec, const std::vector<double>& direction,
                       SeededRng& rng);

/// Uniform draws with replacement.
Batch sample_batch(const LabeledSet& set, std::size_t batch_size, SeededRng& rng);

}  // namespace ftpkit
