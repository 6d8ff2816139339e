// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Fast trainable projection. Each projected tensor carries one learnable
// radius gamma. Every step reuses the training gradient g_t twice: once for
// the base optimizer's unconstrained update, and once to differentiate the
// loss through the previous projection with respect to gamma. Gamma itself
// moves by Adam, with positive (shrinking) gradients scaled by kappa.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "ftpkit/managed_param.hpp"
#include "ftpkit/numerics.hpp"
#include "ftpkit/optimizers.hpp"

namespace ftpkit {

inline constexpr double kInitialGamma = 1e-8;

struct GammaState {
    double gamma = kInitialGamma;
    double m = 0.0;
    double v = 0.0;
    std::uint64_t t = 0;
    double kappa = 1.0;
    double mu = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // Value produced by the last Adam step before flooring at zero.
    double unclamped_gamma = kInitialGamma;
};

/// d L / d gamma through the row projection, evaluated at the previous radius.
/// Only rows whose displacement exceeds gamma_prev (and the division floor)
/// contribute; clamped rows do not depend on gamma.
double hyper_gradient(const DenseMatrix& grad, const DenseMatrix& prev_unconstrained,
                      const DenseMatrix& anchor, double gamma_prev);

/// Same, reading the cached tensors of `param`. Throws StateError when the
/// gradient or the cached unconstrained weights are missing.
double hyper_gradient(const ManagedParam& param, double gamma_prev);

/// kappa * grad for positive grad, grad otherwise. kappa must lie in [0, 1].
double anneal_gradient(double grad, double kappa);

/// One Adam step on gamma (own step counter), floored at zero.
GammaState adam_update_gamma(GammaState state, double grad);

struct FtpSettings {
    double kappa = 1.0;
    ExcludeSet exclude;
};

class FtpOptimizer {
public:
    /// Throws ConfigError for kappa outside [0, 1] or a missing base optimizer.
    FtpOptimizer(std::unique_ptr<BaseOptimizer> base, FtpSettings settings);

    FtpOptimizer(const FtpOptimizer& other);
    FtpOptimizer& operator=(const FtpOptimizer& other);
    FtpOptimizer(FtpOptimizer&&) noexcept = default;
    FtpOptimizer& operator=(FtpOptimizer&&) noexcept = default;

    /// One iteration: update gamma from the cached unconstrained weights,
    /// take the base step, cache the new unconstrained weights, project.
    /// Consumes (and clears) the gradients stored on `params`.
    void step(ParamSet& params);

    /// Makes the current weights the new anchor and resets every gamma.
    void rebase_anchor(ParamSet& params);

    bool is_projected(std::size_t slot) const;
    const std::vector<GammaState>& gammas() const { return gammas_; }
    void set_gammas(std::vector<GammaState> gammas);

    const FtpSettings& settings() const { return settings_; }
    BaseOptimizer& base() { return *base_; }
    const BaseOptimizer& base() const { return *base_; }

private:
    void attach(const ParamSet& params);

    std::unique_ptr<BaseOptimizer> base_;
    FtpSettings settings_;
    std::vector<GammaState> gammas_;
    std::vector<bool> projected_;
};

}  // namespace ftpkit
