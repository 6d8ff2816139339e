// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint files. Layout (little endian):
//
//   magic "FTPKCKPT" | u32 version | u32 reserved | u64 payload bytes |
//   u32 crc32(payload) | u32 reserved | payload
//
// The payload holds a few u64 scalars followed by named float64 arrays.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ftpkit/ftp_optimizer.hpp"
#include "ftpkit/model.hpp"
#include "ftpkit/numerics.hpp"

namespace ftpkit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint64_t spec_hash = 0;
    std::uint64_t iteration = 0;
    std::uint64_t forward_count = 0;
    std::uint64_t backward_count = 0;
    std::vector<SeededRng> rngs;
    NamedParams values;
    NamedParams anchors;
    NamedParams caches;  // unconstrained weights from the previous step
    std::vector<std::pair<std::string, GammaState>> gammas;
    NamedParams optimizer_state;
    NamedParams extra;  // method-specific scalars and metric history
};

/// 64-bit fingerprint of a configuration string, stored in every checkpoint.
std::uint64_t fingerprint(const std::string& text);

/// Writes to a temporary file and renames it into place.
/// Throws PersistenceError if the path is not writable.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Throws PersistenceError on a missing, truncated, corrupt or
/// wrong-version file. Nothing is returned unless every check passes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

bool bitwise_equal(const Checkpoint& a, const Checkpoint& b);

}  // namespace ftpkit
