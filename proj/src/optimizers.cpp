// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/optimizers.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "ftpkit/errors.hpp"

namespace ftpkit {

namespace {

template <typename T>
void ensure_slot(std::vector<std::optional<T>>& slots, std::size_t slot) {
    if (slots.size() <= slot) slots.resize(slot + 1);
}

void check_update_shapes(const DenseMatrix& value, const DenseMatrix& grad) {
    if (!value.same_shape(grad)) throw DomainError("optimizer update: gradient shape mismatch");
}

// Parses the numeric suffix of "<prefix><slot>".
std::optional<std::size_t> slot_of(std::string_view name, std::string_view prefix) {
    if (name.substr(0, prefix.size()) != prefix) return std::nullopt;
    const auto digits = name.substr(prefix.size());
    std::size_t slot = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), slot);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
    return slot;
}

}  // namespace

void BaseOptimizer::step(std::span<ManagedParam> params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        ManagedParam& p = params[i];
        if (p.frozen) continue;
        if (!p.grad) throw StateError(fmt::format("no gradient for '{}'", p.name));
        update(i, p.value, *p.grad);
    }
}

SgdOptimizer::SgdOptimizer(OptimizerSettings settings) : BaseOptimizer(settings) {
    if (!(settings_.lr > 0.0)) throw ConfigError("sgd: lr must be positive");
    if (settings_.weight_decay < 0.0) throw ConfigError("sgd: weight_decay must be >= 0");
    if (settings_.momentum < 0.0 || settings_.momentum >= 1.0) {
        throw ConfigError("sgd: momentum must be in [0, 1)");
    }
    if (settings_.nesterov && settings_.momentum == 0.0) {
        throw ConfigError("sgd: nesterov requires momentum");
    }
}

void SgdOptimizer::update(std::size_t slot, DenseMatrix& value, const DenseMatrix& grad) {
    check_update_shapes(value, grad);
    DenseMatrix step = grad;
    if (settings_.weight_decay != 0.0) {
        auto d = step.values();
        const auto w = value.values();
        for (std::size_t k = 0; k < d.size(); ++k) d[k] += settings_.weight_decay * w[k];
    }
    if (settings_.momentum != 0.0) {
        ensure_slot(momentum_buffers_, slot);
        auto& buf = momentum_buffers_[slot];
        if (!buf) {
            buf = step;
        } else {
            auto b = buf->values();
            const auto d = step.values();
            for (std::size_t k = 0; k < b.size(); ++k) b[k] = settings_.momentum * b[k] + d[k];
        }
        if (settings_.nesterov) {
            auto d = step.values();
            const auto b = buf->values();
            for (std::size_t k = 0; k < d.size(); ++k) d[k] += settings_.momentum * b[k];
        } else {
            step = *buf;
        }
    }
    auto w = value.values();
    const auto d = step.values();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= settings_.lr * d[k];
}

NamedParams SgdOptimizer::export_state() const {
    NamedParams out;
    for (std::size_t i = 0; i < momentum_buffers_.size(); ++i) {
        if (momentum_buffers_[i]) out.add(fmt::format("sgd.momentum.{}", i), *momentum_buffers_[i]);
    }
    return out;
}

void SgdOptimizer::import_state(const NamedParams& state) {
    momentum_buffers_.clear();
    for (const auto& [name, value] : state) {
        const auto slot = slot_of(name, "sgd.momentum.");
        if (!slot) throw DomainError(fmt::format("sgd: unexpected state tensor '{}'", name));
        ensure_slot(momentum_buffers_, *slot);
        momentum_buffers_[*slot] = value;
    }
}

std::unique_ptr<BaseOptimizer> SgdOptimizer::clone() const {
    return std::make_unique<SgdOptimizer>(*this);
}

AdamWOptimizer::AdamWOptimizer(OptimizerSettings settings) : BaseOptimizer(settings) {
    if (!(settings_.lr > 0.0)) throw ConfigError("adamw: lr must be positive");
    if (settings_.weight_decay < 0.0) throw ConfigError("adamw: weight_decay must be >= 0");
    if (settings_.beta1 < 0.0 || settings_.beta1 >= 1.0 || settings_.beta2 < 0.0 ||
        settings_.beta2 >= 1.0) {
        throw ConfigError("adamw: betas must be in [0, 1)");
    }
    if (!(settings_.eps > 0.0)) throw ConfigError("adamw: eps must be positive");
}

void AdamWOptimizer::update(std::size_t slot, DenseMatrix& value, const DenseMatrix& grad) {
    check_update_shapes(value, grad);
    ensure_slot(moments_, slot);
    auto& state = moments_[slot];
    if (!state) state = Moments{DenseMatrix(value.rows(), value.cols()),
                                DenseMatrix(value.rows(), value.cols()), 0};
    ++state->t;
    const double b1 = settings_.beta1;
    const double b2 = settings_.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state->t));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state->t));
    const double decay = 1.0 - settings_.lr * settings_.weight_decay;

    auto w = value.values();
    auto m = state->m.values();
    auto v = state->v.values();
    const auto g = grad.values();
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] *= decay;
        m[k] = b1 * m[k] + (1.0 - b1) * g[k];
        v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
        const double m_hat = m[k] / bias1;
        const double v_hat = v[k] / bias2;
        w[k] -= settings_.lr * m_hat / (std::sqrt(v_hat) + settings_.eps);
    }
}

NamedParams AdamWOptimizer::export_state() const {
    NamedParams out;
    for (std::size_t i = 0; i < moments_.size(); ++i) {
        if (!moments_[i]) continue;
        out.add(fmt::format("adamw.m.{}", i), moments_[i]->m);
        out.add(fmt::format("adamw.v.{}", i), moments_[i]->v);
        out.add(fmt::format("adamw.t.{}", i),
                DenseMatrix(1, 1, static_cast<double>(moments_[i]->t)));
    }
    return out;
}

void AdamWOptimizer::import_state(const NamedParams& state) {
    moments_.clear();
    for (const auto& [name, value] : state) {
        if (auto slot = slot_of(name, "adamw.m.")) {
            ensure_slot(moments_, *slot);
            if (!moments_[*slot]) moments_[*slot] = Moments{};
            moments_[*slot]->m = value;
        } else if (auto slot_v = slot_of(name, "adamw.v.")) {
            ensure_slot(moments_, *slot_v);
            if (!moments_[*slot_v]) moments_[*slot_v] = Moments{};
            moments_[*slot_v]->v = value;
        } else if (auto slot_t = slot_of(name, "adamw.t.")) {
            ensure_slot(moments_, *slot_t);
            if (!moments_[*slot_t]) moments_[*slot_t] = Moments{};
            moments_[*slot_t]->t = static_cast<std::uint64_t>(value(0, 0));
        } else {
            throw DomainError(fmt::format("adamw: unexpected state tensor '{}'", name));
        }
    }
}

std::unique_ptr<BaseOptimizer> AdamWOptimizer::clone() const {
    return std::make_unique<AdamWOptimizer>(*this);
}

std::unique_ptr<BaseOptimizer> make_base_optimizer(std::string_view kind,
                                                   const OptimizerSettings& settings) {
    if (kind == "sgd") return std::make_unique<SgdOptimizer>(settings);
    if (kind == "adamw") return std::make_unique<AdamWOptimizer>(settings);
    throw ConfigError(fmt::format("unknown base optimizer '{}'", kind));
}

}  // namespace ftpkit
