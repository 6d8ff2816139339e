// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/baselines.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "ftpkit/errors.hpp"
#include "ftpkit/projection.hpp"

namespace ftpkit {

TpgmOptimizer::TpgmOptimizer(std::unique_ptr<BaseOptimizer> base, TpgmSettings settings)
    : base_(std::move(base)), settings_(std::move(settings)) {
    if (!base_) throw ConfigError("tpgm: a base optimizer is required");
}

TpgmOptimizer::TpgmOptimizer(const TpgmOptimizer& other)
    : base_(other.base_->clone()),
      settings_(other.settings_),
      gammas_(other.gammas_),
      projected_(other.projected_) {}

void TpgmOptimizer::attach(const ParamSet& params) {
    if (projected_.size() == params.size()) return;
    if (!projected_.empty()) throw DomainError("tpgm: parameter collection changed size");
    validate_exclude_set(params, settings_.exclude);
    projected_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        projected_[i] = params[i].projectable && !settings_.exclude.contains(params[i].name);
    }
    if (gammas_.size() != params.size()) {
        GammaState fresh;
        fresh.kappa = 1.0;
        gammas_.assign(params.size(), fresh);
    }
}

bool TpgmOptimizer::is_projected(std::size_t slot) const {
    return slot < projected_.size() && projected_[slot];
}

void TpgmOptimizer::set_gammas(std::vector<GammaState> gammas) { gammas_ = std::move(gammas); }

void TpgmOptimizer::step(ParamSet& params, const GradientFn& grad_fn,
                         const BatchSource& val_batches) {
    attach(params);
    base_->step(params);
    for (auto& p : params) p.grad.reset();
    project_update(params, grad_fn, val_batches);
}

void TpgmOptimizer::project_update(ParamSet& params, const GradientFn& grad_fn,
                                   const BatchSource& val_batches) {
    attach(params);
    if (settings_.inner_iters > 0 && (!val_batches || !grad_fn)) {
        throw ConfigError("tpgm: a validation batch source is required");
    }
    // W~_t stays fixed for the whole inner loop.
    for (auto& p : params) p.prev_unconstrained = p.value;

    for (std::size_t k = 0; k < settings_.inner_iters; ++k) {
        NamedParams projected;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const ManagedParam& p = params[i];
            projected.add(p.name, projected_[i] && !p.frozen
                                      ? project_rows(*p.prev_unconstrained, p.anchor,
                                                     gammas_[i].gamma)
                                      : *p.prev_unconstrained);
        }
        const Batch batch = val_batches();
        if (batch.size() == 0) throw ConfigError("tpgm: validation source produced no data");
        const NamedParams grads = grad_fn(projected, batch);
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!projected_[i] || params[i].frozen) continue;
            const double g = hyper_gradient(grads.at(params[i].name),
                                            *params[i].prev_unconstrained, params[i].anchor,
                                            gammas_[i].gamma);
            gammas_[i] = adam_update_gamma(gammas_[i], g);
        }
    }

    for (std::size_t i = 0; i < params.size(); ++i) {
        ManagedParam& p = params[i];
        if (projected_[i] && !p.frozen) {
            p.value = project_rows(*p.prev_unconstrained, p.anchor, gammas_[i].gamma);
        }
    }
}

MarsSpOptimizer::MarsSpOptimizer(std::unique_ptr<BaseOptimizer> base, double gamma,
                                 ExcludeSet exclude)
    : base_(std::move(base)), gamma_(gamma), exclude_(std::move(exclude)) {
    if (!base_) throw ConfigError("mars-sp: a base optimizer is required");
    if (!(gamma_ >= 0.0)) throw ConfigError("mars-sp: gamma must be non-negative");
}

MarsSpOptimizer::MarsSpOptimizer(const MarsSpOptimizer& other)
    : base_(other.base_->clone()), gamma_(other.gamma_), exclude_(other.exclude_) {}

bool MarsSpOptimizer::is_projected(const ManagedParam& p) const {
    return p.projectable && !exclude_.contains(p.name);
}

void MarsSpOptimizer::step(ParamSet& params) {
    validate_exclude_set(params, exclude_);
    base_->step(params);
    for (auto& p : params) {
        if (p.frozen) continue;
        p.prev_unconstrained = p.value;
        if (is_projected(p)) p.value = project_rows(p.value, p.anchor, gamma_);
        p.grad.reset();
    }
}

DenseMatrix l2_sp_grad(const DenseMatrix& param, const DenseMatrix& anchor, double lambda) {
    if (!(lambda >= 0.0)) throw ConfigError("l2-sp: lambda must be non-negative");
    if (!param.same_shape(anchor)) throw DomainError("l2-sp: shape mismatch");
    DenseMatrix out = param - anchor;
    out *= lambda;
    return out;
}

void apply_l2_sp(ParamSet& params, double lambda) {
    for (auto& p : params) {
        if (p.frozen || !p.grad) continue;
        *p.grad += l2_sp_grad(p.value, p.anchor, lambda);
    }
}

DenseMatrix wise_interpolate(const DenseMatrix& fine_tuned, const DenseMatrix& anchor,
                             double ratio) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("wise: ratio must be in [0, 1]");
    if (!fine_tuned.same_shape(anchor)) throw DomainError("wise: shape mismatch");
    DenseMatrix out(fine_tuned.rows(), fine_tuned.cols());
    auto o = out.values();
    const auto f = fine_tuned.values();
    const auto a = anchor.values();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = ratio * f[k] + (1.0 - ratio) * a[k];
    return out;
}

NamedParams wise_interpolate(const NamedParams& fine_tuned, const NamedParams& anchor,
                             double ratio) {
    NamedParams out;
    for (const auto& [name, value] : fine_tuned) {
        out.add(name, wise_interpolate(value, anchor.at(name), ratio));
    }
    return out;
}

void freeze_mask(ParamSet& params, const std::vector<std::string>& trainable_names) {
    for (const auto& name : trainable_names) {
        const bool known = std::any_of(params.begin(), params.end(),
                                       [&](const ManagedParam& p) { return p.name == name; });
        if (!known) throw ConfigError(fmt::format("freeze_mask: unknown tensor '{}'", name));
    }
    for (auto& p : params) {
        const bool trainable =
            std::find(trainable_names.begin(), trainable_names.end(), p.name) !=
            trainable_names.end();
        p.frozen = !trainable;
        if (!trainable && p.grad) p.grad->fill(0.0);
    }
}

}  // namespace ftpkit
