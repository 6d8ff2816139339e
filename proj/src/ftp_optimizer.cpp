// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/ftp_optimizer.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ftpkit/errors.hpp"
#include "ftpkit/projection.hpp"

namespace ftpkit {

double hyper_gradient(const DenseMatrix& grad, const DenseMatrix& prev_unconstrained,
                      const DenseMatrix& anchor, double gamma_prev) {
    if (!grad.same_shape(prev_unconstrained) || !grad.same_shape(anchor)) {
        throw DomainError("hyper_gradient: shape mismatch");
    }
    const std::vector<double> dist = row_l1_distances(prev_unconstrained, anchor);
    double total = 0.0;
    for (std::size_t i = 0; i < grad.rows(); ++i) {
        if (dist[i] < kDivisionFloor || dist[i] <= gamma_prev) continue;
        const auto g = grad.row(i);
        const auto w = prev_unconstrained.row(i);
        const auto a = anchor.row(i);
        double inner = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) inner += g[j] * (w[j] - a[j]);
        total += inner / dist[i];
    }
    return total;
}

double hyper_gradient(const ManagedParam& param, double gamma_prev) {
    if (!param.grad) throw StateError(fmt::format("'{}' has no gradient", param.name));
    if (!param.prev_unconstrained) {
        throw StateError(fmt::format("'{}' has no cached unconstrained weights", param.name));
    }
    return hyper_gradient(*param.grad, *param.prev_unconstrained, param.anchor, gamma_prev);
}

double anneal_gradient(double grad, double kappa) {
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("kappa must be in [0, 1]");
    return grad > 0.0 ? kappa * grad : grad;
}

GammaState adam_update_gamma(GammaState s, double grad) {
    ++s.t;
    s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
    s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad * grad;
    const double m_hat = s.m / (1.0 - std::pow(s.beta1, static_cast<double>(s.t)));
    const double v_hat = s.v / (1.0 - std::pow(s.beta2, static_cast<double>(s.t)));
    s.unclamped_gamma = s.gamma - s.mu * m_hat / (std::sqrt(v_hat) + s.eps);
    s.gamma = std::max(s.unclamped_gamma, 0.0);
    return s;
}

FtpOptimizer::FtpOptimizer(std::unique_ptr<BaseOptimizer> base, FtpSettings settings)
    : base_(std::move(base)), settings_(std::move(settings)) {
    if (!base_) throw ConfigError("ftp: a base optimizer is required");
    if (!(settings_.kappa >= 0.0 && settings_.kappa <= 1.0)) {
        throw ConfigError("ftp: k must be in [0, 1]");
    }
}

FtpOptimizer::FtpOptimizer(const FtpOptimizer& other)
    : base_(other.base_->clone()),
      settings_(other.settings_),
      gammas_(other.gammas_),
      projected_(other.projected_) {}

FtpOptimizer& FtpOptimizer::operator=(const FtpOptimizer& other) {
    if (this != &other) *this = FtpOptimizer(other);
    return *this;
}

void FtpOptimizer::attach(const ParamSet& params) {
    if (projected_.size() == params.size()) return;
    if (!projected_.empty()) throw DomainError("ftp: parameter collection changed size");
    validate_exclude_set(params, settings_.exclude);
    projected_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        projected_[i] = params[i].projectable && !settings_.exclude.contains(params[i].name);
    }
    if (gammas_.size() != params.size()) {
        GammaState fresh;
        fresh.kappa = settings_.kappa;
        gammas_.assign(params.size(), fresh);
    }
}

void FtpOptimizer::set_gammas(std::vector<GammaState> gammas) { gammas_ = std::move(gammas); }

bool FtpOptimizer::is_projected(std::size_t slot) const {
    return slot < projected_.size() && projected_[slot];
}

void FtpOptimizer::step(ParamSet& params) {
    attach(params);
    for (const auto& p : params) {
        if (p.frozen) continue;
        if (!p.grad) throw StateError(fmt::format("ftp: no gradient for '{}'", p.name));
        if (!p.grad->same_shape(p.value) || !p.anchor.same_shape(p.value) ||
            (p.prev_unconstrained && !p.prev_unconstrained->same_shape(p.value))) {
            throw DomainError(fmt::format("ftp: shape drift in '{}'", p.name));
        }
    }

    for (std::size_t i = 0; i < params.size(); ++i) {
        ManagedParam& p = params[i];
        if (p.frozen) continue;
        if (projected_[i] && p.prev_unconstrained) {
            GammaState& g = gammas_[i];
            const double raw = hyper_gradient(p, g.gamma);
            g = adam_update_gamma(g, anneal_gradient(raw, settings_.kappa));
        }
        base_->update(i, p.value, *p.grad);
        p.prev_unconstrained = p.value;
        if (projected_[i]) p.value = project_rows(p.value, p.anchor, gammas_[i].gamma);
        p.grad.reset();
    }
}

void FtpOptimizer::rebase_anchor(ParamSet& params) {
    attach(params);
    for (auto& p : params) {
        p.anchor = p.value;
        p.prev_unconstrained.reset();
    }
    GammaState fresh;
    fresh.kappa = settings_.kappa;
    gammas_.assign(params.size(), fresh);
}

}  // namespace ftpkit
