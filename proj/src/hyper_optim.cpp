// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/hyper_optim.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "ftpkit/errors.hpp"

namespace ftpkit {

std::vector<double> flatten_grads(const ParamSet& params) {
    std::vector<double> out;
    for (const auto& p : params) {
        if (p.frozen) continue;
        if (!p.grad) throw StateError(fmt::format("hyper-sgd: no gradient for '{}'", p.name));
        const auto g = p.grad->values();
        out.insert(out.end(), g.begin(), g.end());
    }
    return out;
}

void hyper_sgd_lr_step(HyperLrState& state, ParamSet& params) {
    std::vector<double> grad = flatten_grads(params);
    if (state.has_prev) {
        if (state.prev_grad.size() != grad.size()) {
            throw DomainError("hyper-sgd: gradient length changed between steps");
        }
        state.alpha = std::max(state.alpha + state.kappa * dot(grad, state.prev_grad),
                               kMinLearningRate);
    }
    for (auto& p : params) {
        if (p.frozen) continue;
        auto w = p.value.values();
        const auto g = p.grad->values();
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= state.alpha * g[k];
        p.grad.reset();
    }
    state.prev_grad = std::move(grad);
    state.has_prev = true;
}

}  // namespace ftpkit
