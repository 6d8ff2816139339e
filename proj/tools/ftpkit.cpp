// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: pretrain, finetune, evaluate, audit and sweep.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ftpkit/checkpoint.hpp"
#include "ftpkit/config.hpp"
#include "ftpkit/errors.hpp"
#include "ftpkit/experiment.hpp"
#include "ftpkit/robustness_audit.hpp"

namespace fs = std::filesystem;
using namespace ftpkit;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("-c,--config", common.config_path, "experiment config file");
    cmd->add_option("-s,--set", common.overrides, "override a key, e.g. --set lr=0.05");
}

ExperimentConfig build_config(const Common& common) {
    ExperimentConfig config =
        common.config_path.empty() ? ExperimentConfig{} : load_config(common.config_path);
    for (const auto& kv : common.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError(fmt::format("--set expects key=value, got '{}'", kv));
        apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    config.validate();
    return config;
}

void print_accuracy(const AccuracyTable& t) {
    fmt::print("id_accuracy  {:.4f}\n", t.id);
    for (const auto& [kind, acc] : t.per_shift) fmt::print("ood {:<16} {:.4f}\n", kind, acc);
    fmt::print("ood_average  {:.4f}\n", t.ood_average);
}

int cmd_pretrain(const Common& common) {
    const ExperimentConfig config = build_config(common);
    const ShiftDataset data = generate_shift_dataset(config.dataset, config.seed);
    const NamedParams params = pretrain(config, data);
    const fs::path path = config.pretrained_checkpoint();
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_checkpoint(make_pretrained_checkpoint(config, params), path);
    fmt::print("wrote {}\n", path.string());
    print_accuracy(evaluate(config.model_spec(), params, data));
    return 0;
}

int cmd_finetune(const Common& common, bool resume, bool pretrain_if_missing) {
    const ExperimentConfig config = build_config(common);
    RunOptions options;
    options.resume = resume;
    options.pretrain_if_missing = pretrain_if_missing;
    const RunRecord record = run_experiment(config, options);
    const auto& last = record.rows.back();
    fmt::print("method {}  iterations {}  final loss {:.6g}  passes {}\n", record.method,
               last.iter, last.loss, last.bwd_count);
    for (std::size_t g = 0; g < record.gamma_names.size(); ++g) {
        fmt::print("gamma.{} {:.6g}\n", record.gamma_names[g], last.gammas[g]);
    }
    print_accuracy(*record.final_metrics);
    fmt::print("outputs in {}\n", config.output_dir);
    return 0;
}

int cmd_evaluate(const Common& common, const std::string& checkpoint_path) {
    const ExperimentConfig config = build_config(common);
    const ShiftDataset data = generate_shift_dataset(config.dataset, config.seed);
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    NamedParams weights = ck.values;
    if (!ck.anchors.empty()) weights = wise_interpolate(ck.values, ck.anchors, config.wise_ratio);
    const AccuracyTable table = evaluate(config.model_spec(), weights, data);
    fmt::print("{}\n", nlohmann::json(table).dump(2));
    return 0;
}

int cmd_audit(const Common& common, const std::string& checkpoint_path, std::size_t pairs) {
    const ExperimentConfig config = build_config(common);
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const NamedParams& fine = ck.values;
    const NamedParams& anchor = ck.anchors.empty() ? ck.values : ck.anchors;
    PairSampler sampler(config.dataset.dim, config.seed);
    sampler.add_sign_directions(fine.at(weight_name(0)));
    sampler.add_sign_directions(fine.at(weight_name(0)) - anchor.at(weight_name(0)));
    const LipschitzReport report =
        verify_lemma1_bound(config.model_spec(), fine, anchor, sampler, pairs);
    fmt::print("{}\n", nlohmann::json(report).dump(2));
    return report.holds ? 0 : 3;
}

int cmd_sweep(const Common& common, const std::vector<std::string>& methods,
              const std::vector<std::uint64_t>& seeds) {
    const ExperimentConfig base = build_config(common);
    const fs::path root = base.output_dir;
    fs::create_directories(root);
    std::ofstream table(root / "sweep.csv");
    if (!table) throw IoError(fmt::format("cannot write '{}'", (root / "sweep.csv").string()));
    table << "method,seed,id_accuracy,ood_average,final_loss,mean_secs_per_iter,bwd_count\n";

    std::map<std::string, std::pair<double, double>> totals;
    for (std::uint64_t seed : seeds) {
        for (const auto& m : methods) {
            ExperimentConfig config = base;
            config.seed = seed;
            config.method = parse_method(m);
            const fs::path seed_dir = root / fmt::format("seed-{}", seed);
            config.output_dir = (seed_dir / m).string();
            if (base.pretrained_path.empty()) {
                config.pretrained_path = (seed_dir / "pretrained.ckpt").string();
            }
            const RunRecord r = run_experiment(config);
            if (&m == &methods.front()) {
                const ShiftDataset data = generate_shift_dataset(config.dataset, seed);
                const AccuracyTable pre = evaluate(
                    config.model_spec(), load_pretrained(config, config.pretrained_checkpoint()), data);
                table << fmt::format("pretrained,{},{},{},,,\n", seed, pre.id, pre.ood_average);
                totals["pretrained"].first += pre.id;
                totals["pretrained"].second += pre.ood_average;
            }
            double secs = 0.0;
            for (const auto& row : r.rows) secs += row.secs_per_iter;
            secs /= static_cast<double>(r.rows.size());
            table << fmt::format("{},{},{},{},{},{},{}\n", m, seed, r.final_metrics->id,
                                 r.final_metrics->ood_average, r.rows.back().loss, secs,
                                 r.rows.back().bwd_count);
            totals[m].first += r.final_metrics->id;
            totals[m].second += r.final_metrics->ood_average;
            fmt::print("seed {:<3} {:<13} id {:.4f}  ood {:.4f}\n", seed, m, r.final_metrics->id,
                       r.final_metrics->ood_average);
        }
    }
    const double n = static_cast<double>(seeds.size());
    fmt::print("\nmean over {} seeds\n", seeds.size());
    for (const auto& m : methods) {
        if (&m == &methods.front()) {
            fmt::print("{:<13} id {:.4f}  ood {:.4f}\n", "pretrained", totals["pretrained"].first / n,
                       totals["pretrained"].second / n);
        }
        fmt::print("{:<13} id {:.4f}  ood {:.4f}\n", m, totals[m].first / n, totals[m].second / n);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ftpkit: projection-constrained fine-tuning experiments"};
    app.require_subcommand(1);

    Common pre_opts, ft_opts, eval_opts, audit_opts, sweep_opts;
    auto* pre = app.add_subcommand("pretrain", "train the anchor model on the broad split");
    add_common(pre, pre_opts);

    auto* ft = app.add_subcommand("finetune", "fine-tune from a pretrained checkpoint");
    add_common(ft, ft_opts);
    bool resume = false, pretrain_if_missing = false;
    ft->add_flag("--resume", resume, "continue from <output_dir>/finetune.ckpt");
    ft->add_flag("--pretrain-if-missing", pretrain_if_missing,
                 "pretrain first when no pretrained checkpoint exists");

    auto* ev = app.add_subcommand("evaluate", "ID and OOD accuracy of a checkpoint");
    add_common(ev, eval_opts);
    std::string eval_ckpt;
    ev->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();

    auto* au = app.add_subcommand("audit", "Lipschitz audit of fine-tuned vs anchor weights");
    add_common(au, audit_opts);
    std::string audit_ckpt;
    std::size_t pairs = 10000;
    au->add_option("--checkpoint", audit_ckpt, "fine-tuning checkpoint")->required();
    au->add_option("--pairs", pairs, "number of sampled input pairs");

    auto* sw = app.add_subcommand("sweep", "grid over methods and seeds");
    add_common(sw, sweep_opts);
    std::vector<std::string> methods = {"ft", "ftp"};
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    sw->add_option("--methods", methods, "methods to run")->delimiter(',');
    sw->add_option("--seeds", seeds, "seeds to run")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (*pre) return cmd_pretrain(pre_opts);
        if (*ft) return cmd_finetune(ft_opts, resume, pretrain_if_missing);
        if (*ev) return cmd_evaluate(eval_opts, eval_ckpt);
        if (*au) return cmd_audit(audit_opts, audit_ckpt, pairs);
        if (*sw) return cmd_sweep(sweep_opts, methods, seeds);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
