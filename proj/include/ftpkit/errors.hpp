// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ftpkit {

// Invalid numerical input: shape mismatch, empty operand, out-of-domain scalar.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Invalid hyper-parameter or configuration value.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Operation requested on an object that is not in the required state.
class StateError : public std::logic_error {
public:
    explicit StateError(const std::string& what) : std::logic_error(what) {}
};

class UnsupportedError : public std::invalid_argument {
public:
    explicit UnsupportedError(const std::string& what) : std::invalid_argument(what) {}
};

// Checkpoint decoding failures (bad magic, version, checksum, truncation).
class PersistenceError : public std::runtime_error {
public:
    explicit PersistenceError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// A training run could not complete (missing inputs, divergence).
class RunError : public std::runtime_error {
public:
    explicit RunError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ftpkit
