// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/experiment.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "ftpkit/errors.hpp"
#include "ftpkit/projection.hpp"

namespace ftpkit {
namespace {

// Independent random streams derived from the run seed.
enum Stream : std::uint64_t {
    kInitStream = 9,
    kPretrainBatches = 10,
    kFinetuneBatches = 11,
    kValidationBatches = 12,
};

ExcludeSet resolve_exclude(const std::vector<std::string>& names, const ParamSet& params) {
    ExcludeSet out;
    for (const auto& n : names) {
        if (n == "*") {
            for (const auto& p : params) out.insert(p.name);
        } else {
            out.insert(n);
        }
    }
    validate_exclude_set(params, out);
    return out;
}

void check_layout(const MlpSpec& spec, const NamedParams& params, std::string_view what) {
    const NamedParams expected = zero_params(spec);
    bool ok = expected.size() == params.size();
    for (std::size_t i = 0; ok && i < params.size(); ++i) {
        ok = expected[i].name == params[i].name && expected[i].value.same_shape(params[i].value);
    }
    if (!ok) throw RunError(fmt::format("{} does not match the configured model", what));
}

DenseMatrix scalar(double v) { return DenseMatrix(1, 1, v); }

}  // namespace

NamedParams pretrain(const ExperimentConfig& config, const ShiftDataset& data,
                     PassCounter* counter) {
    config.validate();
    const MlpSpec spec = config.model_spec();
    const SeededRng root(config.seed);
    SeededRng init = root.derive(kInitStream);
    ParamSet params = make_param_set(init_params(spec, init));
    OptimizerSettings settings;
    settings.lr = config.pretrain.lr;
    settings.momentum = config.pretrain.momentum;
    SgdOptimizer sgd(settings);
    SeededRng batches = root.derive(kPretrainBatches);
    for (std::size_t it = 0; it < config.pretrain.iterations; ++it) {
        const Batch batch = sample_batch(data.train, config.pretrain.batch_size, batches);
        const LossAndGrad lg = backward(spec, values_of(params), batch);
        if (counter) {
            ++counter->forward;
            ++counter->backward;
        }
        if (!std::isfinite(lg.loss)) {
            throw RunError(fmt::format("pretraining diverged at iteration {} (loss {})", it + 1,
                                       lg.loss));
        }
        set_grads(params, lg.grads);
        sgd.step(params);
        for (auto& p : params) p.grad.reset();
    }
    return values_of(params);
}

Checkpoint make_pretrained_checkpoint(const ExperimentConfig& config, const NamedParams& params) {
    Checkpoint ck;
    ck.spec_hash = fingerprint(config.pretrain_fingerprint());
    ck.iteration = config.pretrain.iterations;
    ck.values = params;
    return ck;
}

NamedParams load_pretrained(const ExperimentConfig& config, const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw RunError(fmt::format("no pretrained checkpoint at '{}'", path.string()));
    }
    const Checkpoint ck = load_checkpoint(path);
    if (ck.spec_hash != fingerprint(config.pretrain_fingerprint())) {
        throw RunError(fmt::format(
            "'{}' was pretrained with a different dataset, model, seed or schedule",
            path.string()));
    }
    check_layout(config.model_spec(), ck.values, "pretrained checkpoint");
    return ck.values;
}

FinetuneSession::FinetuneSession(ExperimentConfig config, std::shared_ptr<const ShiftDataset> data,
                                 const NamedParams& pretrained)
    : config_(std::move(config)), data_(std::move(data)) {
    config_.validate();
    if (!data_) throw ConfigError("fine-tuning needs a dataset");
    spec_ = config_.model_spec();
    check_layout(spec_, pretrained, "pretrained weights");
    params_ = make_param_set(pretrained);

    const SeededRng root(config_.seed);
    batch_rng_ = root.derive(kFinetuneBatches);
    val_rng_ = root.derive(kValidationBatches);

    const ExcludeSet exclude = resolve_exclude(config_.exclude_set, params_);
    auto make_base = [&] { return make_base_optimizer(config_.optimizer, config_.opt); };
    auto collect_constrained = [&] {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (params_[i].projectable && !exclude.contains(params_[i].name)) {
                constrained_.push_back(i);
            }
        }
    };
    switch (config_.method) {
        case Method::kFtp:
            ftp_.emplace(make_base(), FtpSettings{config_.kappa, exclude});
            collect_constrained();
            break;
        case Method::kTpgm:
            tpgm_.emplace(make_base(), TpgmSettings{config_.tpgm_inner_iters, exclude});
            collect_constrained();
            break;
        case Method::kMarsSp:
            mars_.emplace(make_base(), config_.mars_sp_gamma, exclude);
            collect_constrained();
            break;
        case Method::kHyperSgd:
            hyper_.alpha = config_.hyper_alpha0;
            hyper_.kappa = config_.hyper_kappa;
            break;
        default:
            base_ = make_base();
            break;
    }

    record_.method = std::string(to_string(config_.method));
    record_.seed = config_.seed;
    record_.gamma_names = constrained_names();
}

std::vector<std::string> FinetuneSession::constrained_names() const {
    std::vector<std::string> names;
    for (std::size_t slot : constrained_) names.push_back(params_[slot].name);
    return names;
}

std::vector<GammaState> FinetuneSession::gamma_states() const {
    const std::vector<GammaState>* states = nullptr;
    if (ftp_) states = &ftp_->gammas();
    if (tpgm_) states = &tpgm_->gammas();
    if (states && states->size() == params_.size()) return *states;
    GammaState fresh;
    if (ftp_) fresh.kappa = config_.kappa;
    return std::vector<GammaState>(params_.size(), fresh);
}

void FinetuneSession::set_gamma_states(std::vector<GammaState> states) {
    if (ftp_) ftp_->set_gammas(std::move(states));
    if (tpgm_) tpgm_->set_gammas(std::move(states));
}

std::vector<double> FinetuneSession::current_gammas() const {
    std::vector<double> out;
    if (mars_) {
        out.assign(constrained_.size(), mars_->gamma());
        return out;
    }
    const auto states = gamma_states();
    for (std::size_t slot : constrained_) out.push_back(states[slot].gamma);
    return out;
}

double FinetuneSession::worst_constraint_excess() const {
    double worst = -INFINITY;
    const auto gammas = current_gammas();
    for (std::size_t k = 0; k < constrained_.size(); ++k) {
        const ManagedParam& p = params_[constrained_[k]];
        worst = std::max(worst, mars_norm(p.value - p.anchor) - gammas[k]);
    }
    return worst;
}

std::vector<std::string> FinetuneSession::last_layer_names() const {
    const std::size_t last = spec_.num_layers() - 1;
    return {weight_name(last), bias_name(last)};
}

BaseOptimizer* FinetuneSession::base_optimizer() {
    if (ftp_) return &ftp_->base();
    if (tpgm_) return &tpgm_->base();
    if (mars_) return &mars_->base();
    return base_.get();
}

const BaseOptimizer* FinetuneSession::base_optimizer() const {
    return const_cast<FinetuneSession*>(this)->base_optimizer();
}

Batch FinetuneSession::next_batch() {
    return sample_batch(data_->finetune, config_.batch_size, batch_rng_);
}

NamedParams FinetuneSession::counted_grads(const NamedParams& params, const Batch& batch,
                                           double* loss) {
    LossAndGrad lg = backward(spec_, params, batch);
    ++passes_.forward;
    ++passes_.backward;
    if (loss) *loss = lg.loss;
    return std::move(lg.grads);
}

void FinetuneSession::step() {
    const auto start = std::chrono::steady_clock::now();
    const Batch batch = next_batch();
    double loss = 0.0;
    const NamedParams grads = counted_grads(values_of(params_), batch, &loss);
    for (auto& p : params_) p.frozen = false;
    set_grads(params_, grads);

    switch (config_.method) {
        case Method::kFt:
            base_->step(params_);
            break;
        case Method::kLinearProbe:
            freeze_mask(params_, last_layer_names());
            base_->step(params_);
            break;
        case Method::kLpFt:
            if (iteration_ < config_.lp_ft_probe_iterations) {
                freeze_mask(params_, last_layer_names());
            }
            base_->step(params_);
            break;
        case Method::kL2Sp:
            apply_l2_sp(params_, config_.l2_sp_lambda);
            base_->step(params_);
            break;
        case Method::kMarsSp:
            mars_->step(params_);
            break;
        case Method::kTpgm: {
            const GradientFn grad_fn = [this](const NamedParams& p, const Batch& b) {
                return counted_grads(p, b, nullptr);
            };
            const BatchSource val = [this] {
                return sample_batch(data_->validation, config_.batch_size, val_rng_);
            };
            tpgm_->step(params_, grad_fn, val);
            break;
        }
        case Method::kFtp:
            ftp_->step(params_);
            break;
        case Method::kHyperSgd:
            hyper_sgd_lr_step(hyper_, params_);
            break;
    }
    for (auto& p : params_) p.grad.reset();
    ++iteration_;

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record_.rows.push_back(IterationRow{iteration_, loss, secs, passes_.forward,
                                        passes_.backward, current_gammas()});

    bool finite = std::isfinite(loss);
    for (const auto& p : params_) finite = finite && p.value.all_finite();
    if (!finite) {
        throw RunError(fmt::format("{} diverged at iteration {}: loss={} fwd={} bwd={}",
                                   record_.method, iteration_, loss, passes_.forward,
                                   passes_.backward));
    }
}

void FinetuneSession::run_until(std::uint64_t iteration, const Observer& observer) {
    while (iteration_ < iteration) {
        step();
        if (observer) observer(*this, record_.rows.back());
    }
}

NamedParams FinetuneSession::evaluation_weights() const {
    return wise_interpolate(values_of(params_), anchors_of(params_), config_.wise_ratio);
}

AccuracyTable FinetuneSession::evaluate_now() const {
    return evaluate(spec_, evaluation_weights(), *data_);
}

Checkpoint FinetuneSession::checkpoint() const {
    Checkpoint ck;
    ck.spec_hash = fingerprint(config_.run_fingerprint());
    ck.iteration = iteration_;
    ck.forward_count = passes_.forward;
    ck.backward_count = passes_.backward;
    ck.rngs = {batch_rng_, val_rng_};
    for (const auto& p : params_) {
        ck.values.add(p.name, p.value);
        ck.anchors.add(p.name, p.anchor);
        if (p.prev_unconstrained) ck.caches.add(p.name, *p.prev_unconstrained);
    }
    if (ftp_ || tpgm_) {
        const auto states = gamma_states();
        for (std::size_t slot : constrained_) ck.gammas.emplace_back(params_[slot].name, states[slot]);
    }
    if (const BaseOptimizer* base = base_optimizer()) ck.optimizer_state = base->export_state();

    if (config_.method == Method::kHyperSgd) {
        ck.extra.add("hyper.alpha", scalar(hyper_.alpha));
        ck.extra.add("hyper.has_prev", scalar(hyper_.has_prev ? 1.0 : 0.0));
        ck.extra.add("hyper.prev_grad", DenseMatrix(1, hyper_.prev_grad.size(), hyper_.prev_grad));
    }

    const std::size_t n = record_.rows.size();
    const std::size_t k = record_.gamma_names.size();
    DenseMatrix iters(1, n), losses(1, n), secs(1, n), fwd(1, n), bwd(1, n), gammas(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = record_.rows[i];
        iters(0, i) = static_cast<double>(row.iter);
        losses(0, i) = row.loss;
        secs(0, i) = row.secs_per_iter;
        fwd(0, i) = static_cast<double>(row.fwd_count);
        bwd(0, i) = static_cast<double>(row.bwd_count);
        for (std::size_t g = 0; g < k; ++g) gammas(i, g) = row.gammas[g];
    }
    ck.extra.add("history.iter", std::move(iters));
    ck.extra.add("history.loss", std::move(losses));
    ck.extra.add("history.secs_per_iter", std::move(secs));
    ck.extra.add("history.fwd_count", std::move(fwd));
    ck.extra.add("history.bwd_count", std::move(bwd));
    ck.extra.add("history.gammas", std::move(gammas));
    return ck;
}

void FinetuneSession::restore(const Checkpoint& ck) {
    if (ck.spec_hash != fingerprint(config_.run_fingerprint())) {
        throw PersistenceError("checkpoint was written by a run with different settings");
    }
    if (ck.rngs.size() != 2 || ck.values.size() != params_.size() ||
        ck.anchors.size() != params_.size()) {
        throw PersistenceError("checkpoint layout does not match this run");
    }
    ParamSet restored = params_;
    for (auto& p : restored) {
        const DenseMatrix* v = ck.values.find(p.name);
        const DenseMatrix* a = ck.anchors.find(p.name);
        if (!v || !a || !v->same_shape(p.value) || !a->same_shape(p.value)) {
            throw PersistenceError(fmt::format("checkpoint lacks a usable '{}'", p.name));
        }
        p.value = *v;
        p.anchor = *a;
        p.prev_unconstrained.reset();
        if (const DenseMatrix* c = ck.caches.find(p.name)) p.prev_unconstrained = *c;
        p.grad.reset();
    }

    std::vector<GammaState> states = gamma_states();
    for (const auto& [name, state] : ck.gammas) {
        bool found = false;
        for (std::size_t slot : constrained_) {
            if (params_[slot].name == name) {
                states[slot] = state;
                found = true;
            }
        }
        if (!found) throw PersistenceError(fmt::format("unexpected gamma state '{}'", name));
    }

    auto history = [&](const char* name) -> const DenseMatrix& {
        const DenseMatrix* m = ck.extra.find(name);
        if (!m) throw PersistenceError(fmt::format("checkpoint lacks '{}'", name));
        return *m;
    };
    const DenseMatrix& iters = history("history.iter");
    const std::size_t n = iters.size();
    const DenseMatrix& losses = history("history.loss");
    const DenseMatrix& secs = history("history.secs_per_iter");
    const DenseMatrix& fwd = history("history.fwd_count");
    const DenseMatrix& bwd = history("history.bwd_count");
    const DenseMatrix& gammas = history("history.gammas");
    const std::size_t k = record_.gamma_names.size();
    if (losses.size() != n || secs.size() != n || fwd.size() != n || bwd.size() != n ||
        gammas.rows() != n || (n > 0 && gammas.cols() != k)) {
        throw PersistenceError("checkpoint history is inconsistent");
    }
    std::vector<IterationRow> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i].iter = static_cast<std::uint64_t>(iters.values()[i]);
        rows[i].loss = losses.values()[i];
        rows[i].secs_per_iter = secs.values()[i];
        rows[i].fwd_count = static_cast<std::uint64_t>(fwd.values()[i]);
        rows[i].bwd_count = static_cast<std::uint64_t>(bwd.values()[i]);
        for (std::size_t g = 0; g < k; ++g) rows[i].gammas.push_back(gammas(i, g));
    }

    if (BaseOptimizer* base = base_optimizer()) {
        try {
            base->import_state(ck.optimizer_state);
        } catch (const DomainError& e) {
            throw PersistenceError(fmt::format("optimizer state: {}", e.what()));
        }
    }
    if (config_.method == Method::kHyperSgd) {
        hyper_.alpha = history("hyper.alpha")(0, 0);
        hyper_.has_prev = history("hyper.has_prev")(0, 0) != 0.0;
        const auto g = history("hyper.prev_grad").values();
        hyper_.prev_grad.assign(g.begin(), g.end());
    }
    if (ftp_ || tpgm_) set_gamma_states(std::move(states));
    params_ = std::move(restored);
    iteration_ = ck.iteration;
    passes_ = PassCounter{ck.forward_count, ck.backward_count};
    batch_rng_ = ck.rngs[0];
    val_rng_ = ck.rngs[1];
    record_.rows = std::move(rows);
}

RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    const auto data =
        std::make_shared<const ShiftDataset>(generate_shift_dataset(config.dataset, config.seed));
    const std::filesystem::path dir = config.output_dir;
    if (options.write_outputs) {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError(fmt::format("cannot create output directory '{}'", dir.string()));
    }

    const std::filesystem::path pre_path = config.pretrained_checkpoint();
    NamedParams anchor;
    if (std::filesystem::exists(pre_path)) {
        anchor = load_pretrained(config, pre_path);
    } else if (options.pretrain_if_missing) {
        anchor = pretrain(config, *data);
        if (options.write_outputs) {
            if (pre_path.has_parent_path()) {
                std::error_code ec;
                std::filesystem::create_directories(pre_path.parent_path(), ec);
            }
            save_checkpoint(make_pretrained_checkpoint(config, anchor), pre_path);
        }
    } else {
        throw RunError(fmt::format("no pretrained checkpoint at '{}'", pre_path.string()));
    }

    FinetuneSession session(config, data, anchor);
    const std::filesystem::path ck_path = dir / "finetune.ckpt";
    if (options.resume && std::filesystem::exists(ck_path)) {
        session.restore(load_checkpoint(ck_path));
    }

    auto write_metrics = [&](const RunRecord& record) {
        emit_metrics(record, MetricsFormat::kCsv, dir / "metrics.csv");
        emit_metrics(record, MetricsFormat::kJson, dir / "metrics.json");
        emit_summary(record, dir / "summary.json");
    };

    const std::uint64_t total = config.total_iterations();
    try {
        while (session.iteration() < total) {
            session.step();
            if (options.observer) options.observer(session, session.record().rows.back());
            if (options.write_outputs && config.checkpoint_every > 0 &&
                session.iteration() % config.checkpoint_every == 0) {
                save_checkpoint(session.checkpoint(), ck_path);
            }
        }
    } catch (const RunError&) {
        if (options.write_outputs) write_metrics(session.record());
        throw;
    }

    RunRecord record = session.record();
    record.final_metrics = session.evaluate_now();
    if (options.write_outputs) {
        save_checkpoint(session.checkpoint(), ck_path);
        write_metrics(record);
    }
    return record;
}

}  // namespace ftpkit
