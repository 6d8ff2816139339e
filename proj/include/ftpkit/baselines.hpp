// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Comparison methods for robust fine-tuning: TPGM (gamma learned in a
// separate loop on held-out batches), MARS-SP (one fixed gamma), L2-SP,
// WiSE weight interpolation and layer freezing for linear probing.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ftpkit/ftp_optimizer.hpp"
#include "ftpkit/managed_param.hpp"
#include "ftpkit/model.hpp"
#include "ftpkit/optimizers.hpp"

namespace ftpkit {

/// Returns the loss gradient of `params` on `batch`. Each call is one
/// forward and one backward pass.
using GradientFn = std::function<NamedParams(const NamedParams& params, const Batch& batch)>;
using BatchSource = std::function<Batch()>;

struct TpgmSettings {
    std::size_t inner_iters = 1;
    ExcludeSet exclude;
};

class TpgmOptimizer {
public:
    TpgmOptimizer(std::unique_ptr<BaseOptimizer> base, TpgmSettings settings);

    TpgmOptimizer(const TpgmOptimizer& other);
    TpgmOptimizer(TpgmOptimizer&&) noexcept = default;
    TpgmOptimizer& operator=(TpgmOptimizer&&) noexcept = default;

    /// Base step on the stored gradients, then project_update.
    void step(ParamSet& params, const GradientFn& grad_fn, const BatchSource& val_batches);

    /// Treats the current values as the frozen unconstrained weights W~_t,
    /// runs inner_iters gamma updates on validation batches and projects W~_t
    /// with the final gamma. Costs inner_iters gradient evaluations.
    void project_update(ParamSet& params, const GradientFn& grad_fn,
                        const BatchSource& val_batches);

    bool is_projected(std::size_t slot) const;
    const std::vector<GammaState>& gammas() const { return gammas_; }
    void set_gammas(std::vector<GammaState> gammas);
    const TpgmSettings& settings() const { return settings_; }
    BaseOptimizer& base() { return *base_; }
    const BaseOptimizer& base() const { return *base_; }

private:
    void attach(const ParamSet& params);

    std::unique_ptr<BaseOptimizer> base_;
    TpgmSettings settings_;
    std::vector<GammaState> gammas_;
    std::vector<bool> projected_;
};

/// Base step followed by projection of every projected tensor with one
/// shared, fixed gamma (+inf disables projection).
class MarsSpOptimizer {
public:
    MarsSpOptimizer(std::unique_ptr<BaseOptimizer> base, double gamma, ExcludeSet exclude = {});
    MarsSpOptimizer(const MarsSpOptimizer& other);
    MarsSpOptimizer(MarsSpOptimizer&&) noexcept = default;
    MarsSpOptimizer& operator=(MarsSpOptimizer&&) noexcept = default;

    void step(ParamSet& params);

    double gamma() const { return gamma_; }
    bool is_projected(const ManagedParam& p) const;
    BaseOptimizer& base() { return *base_; }
    const BaseOptimizer& base() const { return *base_; }

private:
    std::unique_ptr<BaseOptimizer> base_;
    double gamma_;
    ExcludeSet exclude_;
};

/// Gradient of (lambda / 2) * ||W - W0||^2, i.e. lambda * (W - W0).
DenseMatrix l2_sp_grad(const DenseMatrix& param, const DenseMatrix& anchor, double lambda);

/// Adds l2_sp_grad to every stored gradient.
void apply_l2_sp(ParamSet& params, double lambda);

/// ratio * fine_tuned + (1 - ratio) * anchor; ratio must lie in [0, 1].
DenseMatrix wise_interpolate(const DenseMatrix& fine_tuned, const DenseMatrix& anchor,
                             double ratio);
NamedParams wise_interpolate(const NamedParams& fine_tuned, const NamedParams& anchor,
                             double ratio);

/// Freezes (and zeroes the gradient of) every tensor not named in
/// `trainable_names`; unfreezes the named ones. Unknown names are a ConfigError.
void freeze_mask(ParamSet& params, const std::vector<std::string>& trainable_names);

}  // namespace ftpkit
