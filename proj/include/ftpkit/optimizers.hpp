// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Base optimizers used for the unconstrained update: SGD (coupled weight
// decay, optional Nesterov momentum) and AdamW (decoupled weight decay).

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ftpkit/managed_param.hpp"
#include "ftpkit/model.hpp"
#include "ftpkit/numerics.hpp"

namespace ftpkit {

struct OptimizerSettings {
    double lr = 1e-2;
    double weight_decay = 0.0;
    double momentum = 0.0;
    bool nesterov = false;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Per-tensor state is addressed by a stable slot index (the tensor's
/// position in its ParamSet).
class BaseOptimizer {
public:
    virtual ~BaseOptimizer() = default;

    virtual std::string_view kind() const = 0;
    virtual void update(std::size_t slot, DenseMatrix& value, const DenseMatrix& grad) = 0;

    /// Internal buffers as named tensors, for checkpointing.
    virtual NamedParams export_state() const = 0;
    virtual void import_state(const NamedParams& state) = 0;
    virtual std::unique_ptr<BaseOptimizer> clone() const = 0;

    const OptimizerSettings& settings() const { return settings_; }

    /// Updates every non-frozen tensor in place. Throws StateError if a
    /// non-frozen tensor has no gradient.
    void step(std::span<ManagedParam> params);

protected:
    explicit BaseOptimizer(OptimizerSettings settings) : settings_(settings) {}
    OptimizerSettings settings_;
};

class SgdOptimizer final : public BaseOptimizer {
public:
    /// Throws ConfigError for lr <= 0, negative decay, momentum outside [0, 1)
    /// or Nesterov without momentum.
    explicit SgdOptimizer(OptimizerSettings settings);

    std::string_view kind() const override { return "sgd"; }
    void update(std::size_t slot, DenseMatrix& value, const DenseMatrix& grad) override;
    NamedParams export_state() const override;
    void import_state(const NamedParams& state) override;
    std::unique_ptr<BaseOptimizer> clone() const override;

private:
    std::vector<std::optional<DenseMatrix>> momentum_buffers_;
};

class AdamWOptimizer final : public BaseOptimizer {
public:
    explicit AdamWOptimizer(OptimizerSettings settings);

    std::string_view kind() const override { return "adamw"; }
    void update(std::size_t slot, DenseMatrix& value, const DenseMatrix& grad) override;
    NamedParams export_state() const override;
    void import_state(const NamedParams& state) override;
    std::unique_ptr<BaseOptimizer> clone() const override;

private:
    struct Moments {
        DenseMatrix m;
        DenseMatrix v;
        std::uint64_t t = 0;
    };
    std::vector<std::optional<Moments>> moments_;
};

/// "sgd" or "adamw"; throws ConfigError otherwise.
std::unique_ptr<BaseOptimizer> make_base_optimizer(std::string_view kind,
                                                   const OptimizerSettings& settings);

}  // namespace ftpkit
