// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/metrics.hpp"

#include <fstream>

#include <fmt/format.h>

#include "ftpkit/errors.hpp"

namespace ftpkit {
namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

}  // namespace

double accuracy(const MlpSpec& spec, const NamedParams& params, const LabeledSet& split) {
    if (split.size() == 0) throw DomainError("accuracy of an empty split");
    const std::vector<int> pred = predict(spec, params, split.inputs);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == split.labels[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

AccuracyTable evaluate(const MlpSpec& spec, const NamedParams& params, const ShiftDataset& data) {
    if (spec.output_width() != data.spec.classes) {
        throw DomainError(fmt::format("model emits {} logits for {} classes", spec.output_width(),
                                      data.spec.classes));
    }
    if (spec.input_width() != data.spec.dim) {
        throw DomainError(fmt::format("model expects {} inputs, data has {}", spec.input_width(),
                                      data.spec.dim));
    }
    AccuracyTable table;
    table.id = accuracy(spec, params, data.test);
    double total = 0.0;
    for (ShiftKind kind : kShiftKinds) {
        double sum = 0.0;
        for (int sev = 1; sev <= kSeverityLevels; ++sev) {
            const double acc = accuracy(spec, params, data.split(kind, sev));
            table.ood[fmt::format("{}@{}", to_string(kind), sev)] = acc;
            sum += acc;
        }
        const double mean = sum / kSeverityLevels;
        table.per_shift[std::string(to_string(kind))] = mean;
        total += mean;
    }
    table.ood_average = total / static_cast<double>(kShiftKinds.size());
    return table;
}

std::vector<std::string> metric_columns(const RunRecord& record) {
    std::vector<std::string> cols = {"iter", "loss", "secs_per_iter", "fwd_count", "bwd_count"};
    for (const auto& name : record.gamma_names) cols.push_back("gamma." + name);
    return cols;
}

nlohmann::json to_json(const RunRecord& record) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : record.rows) {
        nlohmann::json r = {{"iter", row.iter},
                            {"loss", row.loss},
                            {"secs_per_iter", row.secs_per_iter},
                            {"fwd_count", row.fwd_count},
                            {"bwd_count", row.bwd_count}};
        for (std::size_t g = 0; g < record.gamma_names.size(); ++g) {
            r["gamma." + record.gamma_names[g]] = row.gammas.at(g);
        }
        rows.push_back(std::move(r));
    }
    nlohmann::json j = {{"method", record.method},
                        {"seed", record.seed},
                        {"columns", metric_columns(record)},
                        {"gamma_names", record.gamma_names},
                        {"rows", std::move(rows)}};
    if (record.final_metrics) j["final"] = *record.final_metrics;
    return j;
}

RunRecord record_from_json(const nlohmann::json& j) {
    RunRecord record;
    record.method = j.at("method").get<std::string>();
    record.seed = j.at("seed").get<std::uint64_t>();
    record.gamma_names = j.at("gamma_names").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
        IterationRow row;
        row.iter = r.at("iter").get<std::uint64_t>();
        row.loss = r.at("loss").get<double>();
        row.secs_per_iter = r.at("secs_per_iter").get<double>();
        row.fwd_count = r.at("fwd_count").get<std::uint64_t>();
        row.bwd_count = r.at("bwd_count").get<std::uint64_t>();
        for (const auto& name : record.gamma_names) {
            row.gammas.push_back(r.at("gamma." + name).get<double>());
        }
        record.rows.push_back(std::move(row));
    }
    if (j.contains("final")) record.final_metrics = j.at("final").get<AccuracyTable>();
    return record;
}

void to_json(nlohmann::json& j, const AccuracyTable& t) {
    j = nlohmann::json{{"id_accuracy", t.id},
                       {"ood_accuracy", t.ood},
                       {"ood_per_shift", t.per_shift},
                       {"ood_average", t.ood_average}};
}

void from_json(const nlohmann::json& j, AccuracyTable& t) {
    t.id = j.at("id_accuracy").get<double>();
    t.ood = j.at("ood_accuracy").get<std::map<std::string, double>>();
    t.per_shift = j.at("ood_per_shift").get<std::map<std::string, double>>();
    t.ood_average = j.at("ood_average").get<double>();
}

void emit_metrics(const RunRecord& record, MetricsFormat format,
                  const std::filesystem::path& path) {
    std::ofstream out = open_for_write(path);
    if (format == MetricsFormat::kJson) {
        out << to_json(record).dump(2) << '\n';
    } else {
        const auto cols = metric_columns(record);
        for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
        out << '\n';
        for (const auto& row : record.rows) {
            out << fmt::format("{},{},{},{},{}", row.iter, row.loss, row.secs_per_iter,
                               row.fwd_count, row.bwd_count);
            for (double g : row.gammas) out << fmt::format(",{}", g);
            out << '\n';
        }
    }
    finish(out, path);
}

void emit_summary(const RunRecord& record, const std::filesystem::path& path) {
    nlohmann::json j = {{"method", record.method},
                        {"seed", record.seed},
                        {"iterations", record.rows.size()}};
    if (!record.rows.empty()) {
        const auto& last = record.rows.back();
        j["final_loss"] = last.loss;
        j["fwd_count"] = last.fwd_count;
        j["bwd_count"] = last.bwd_count;
        double secs = 0.0;
        for (const auto& row : record.rows) secs += row.secs_per_iter;
        j["mean_secs_per_iter"] = secs / static_cast<double>(record.rows.size());
        nlohmann::json gammas = nlohmann::json::object();
        for (std::size_t g = 0; g < record.gamma_names.size(); ++g) {
            gammas[record.gamma_names[g]] = last.gammas.at(g);
        }
        j["final_gamma"] = std::move(gammas);
    }
    if (record.final_metrics) j["accuracy"] = *record.final_metrics;
    std::ofstream out = open_for_write(path);
    out << j.dump(2) << '\n';
    finish(out, path);
}

}  // namespace ftpkit
