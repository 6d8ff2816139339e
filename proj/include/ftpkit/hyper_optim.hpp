// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// SGD whose global learning rate is itself learned by hyper-gradient descent:
//   alpha_t = alpha_{t-1} + kappa * <g_t, g_{t-1}>
//   W_t     = W_{t-1} - alpha_t * g_t

#pragma once

#include <vector>

#include "ftpkit/managed_param.hpp"

namespace ftpkit {

inline constexpr double kMinLearningRate = 1e-12;

struct HyperLrState {
    double alpha = 1e-2;
    double kappa = 0.0;
    std::vector<double> prev_grad;  // all trainable gradients, concatenated
    bool has_prev = false;
};

/// <g_t, g_{t-1}> over every non-frozen gradient, in ParamSet order.
std::vector<double> flatten_grads(const ParamSet& params);

/// Updates alpha (skipped on the first call), applies the SGD step with the
/// new alpha and caches the gradient. Consumes the stored gradients.
void hyper_sgd_lr_step(HyperLrState& state, ParamSet& params);

}  // namespace ftpkit
