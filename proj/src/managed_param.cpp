// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/managed_param.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "ftpkit/errors.hpp"

namespace ftpkit {

ParamSet make_param_set(const NamedParams& params) {
    ParamSet out;
    out.reserve(params.size());
    for (const auto& [name, value] : params) {
        ManagedParam p;
        p.name = name;
        p.value = value;
        p.anchor = value;
        out.push_back(std::move(p));
    }
    return out;
}

NamedParams values_of(std::span<const ManagedParam> params) {
    NamedParams out;
    for (const auto& p : params) out.add(p.name, p.value);
    return out;
}

NamedParams anchors_of(std::span<const ManagedParam> params) {
    NamedParams out;
    for (const auto& p : params) out.add(p.name, p.anchor);
    return out;
}

void set_grads(std::span<ManagedParam> params, const NamedParams& grads) {
    for (const auto& [name, g] : grads) {
        auto it = std::find_if(params.begin(), params.end(),
                               [&](const ManagedParam& p) { return p.name == name; });
        if (it == params.end()) throw DomainError(fmt::format("gradient for unknown '{}'", name));
        if (!it->value.same_shape(g)) {
            throw DomainError(fmt::format("gradient shape mismatch for '{}'", name));
        }
        it->grad = g;
    }
}

void validate_exclude_set(std::span<const ManagedParam> params, const ExcludeSet& exclude) {
    for (const auto& name : exclude) {
        const bool known = std::any_of(params.begin(), params.end(),
                                       [&](const ManagedParam& p) { return p.name == name; });
        if (!known) throw ConfigError(fmt::format("exclude_set names unknown tensor '{}'", name));
    }
}

}  // namespace ftpkit
