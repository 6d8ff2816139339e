// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ftpkit/dataset.hpp"
#include "ftpkit/model.hpp"

namespace ftpkit {

struct IterationRow {
    std::uint64_t iter = 0;
    double loss = 0.0;
    double secs_per_iter = 0.0;
    std::uint64_t fwd_count = 0;  // cumulative
    std::uint64_t bwd_count = 0;  // cumulative
    std::vector<double> gammas;   // one per RunRecord::gamma_names entry
};

struct AccuracyTable {
    double id = 0.0;
    // keyed "<shift>@<severity>", e.g. "rotation@3"
    std::map<std::string, double> ood;
    std::map<std::string, double> per_shift;  // mean over severities
    double ood_average = 0.0;                 // mean over shift kinds
};

struct RunRecord {
    std::string method;
    std::uint64_t seed = 0;
    std::vector<std::string> gamma_names;
    std::vector<IterationRow> rows;
    std::optional<AccuracyTable> final_metrics;
};

double accuracy(const MlpSpec& spec, const NamedParams& params, const LabeledSet& split);

/// Throws DomainError if the model's output width differs from the class count.
AccuracyTable evaluate(const MlpSpec& spec, const NamedParams& params, const ShiftDataset& data);

enum class MetricsFormat { kCsv, kJson };

/// Column order: iter, loss, secs_per_iter, fwd_count, bwd_count, gamma.<name>...
std::vector<std::string> metric_columns(const RunRecord& record);

/// Throws IoError if the file cannot be written.
void emit_metrics(const RunRecord& record, MetricsFormat format,
                  const std::filesystem::path& path);
void emit_summary(const RunRecord& record, const std::filesystem::path& path);

nlohmann::json to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const AccuracyTable& table);
void from_json(const nlohmann::json& j, AccuracyTable& table);

}  // namespace ftpkit
