// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ftpkit/model.hpp"
#include "ftpkit/numerics.hpp"

namespace ftpkit {

/// A trainable tensor together with the frozen anchor it is projected towards.
struct ManagedParam {
    std::string name;
    DenseMatrix value;   // live (projected) weights
    DenseMatrix anchor;  // pre-trained weights, changed only by an anchor rebase
    std::optional<DenseMatrix> prev_unconstrained;  // weights before the last projection
    std::optional<DenseMatrix> grad;
    bool projectable = true;
    bool frozen = false;  // skipped by every optimizer
};

using ParamSet = std::vector<ManagedParam>;

/// Names of tensors that are never projected.
using ExcludeSet = std::set<std::string>;

/// Wraps every tensor with its current value as the anchor.
ParamSet make_param_set(const NamedParams& params);

NamedParams values_of(std::span<const ManagedParam> params);
NamedParams anchors_of(std::span<const ManagedParam> params);

/// Copies gradients into the matching params by name; throws DomainError on
/// unknown names or shape mismatches.
void set_grads(std::span<ManagedParam> params, const NamedParams& grads);

/// Throws ConfigError if any excluded name is missing from `params`.
void validate_exclude_set(std::span<const ManagedParam> params, const ExcludeSet& exclude);

}  // namespace ftpkit
