// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small fully connected network with hand-written backpropagation and a
// central-difference gradient oracle.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ftpkit/numerics.hpp"

namespace ftpkit {

enum class Activation { kIdentity, kRelu, kTanh, kGelu };
enum class LossKind { kSoftmaxCrossEntropy, kMeanSquaredError };

std::string_view to_string(Activation a);
std::string_view to_string(LossKind l);
Activation parse_activation(std::string_view name);
LossKind parse_loss(std::string_view name);

/// Smallest Lipschitz constant of the activation (relu/tanh/identity are 1).
double activation_lipschitz(Activation a);

/// widths = {input, hidden..., output}; one activation per hidden layer.
/// The output layer is always linear.
struct MlpSpec {
    std::vector<std::size_t> widths;
    std::vector<Activation> activations;
    LossKind loss = LossKind::kSoftmaxCrossEntropy;

    std::size_t num_layers() const { return widths.empty() ? 0 : widths.size() - 1; }
    std::size_t input_width() const { return widths.front(); }
    std::size_t output_width() const { return widths.back(); }

    /// Throws ConfigError on an empty or inconsistent spec.
    void validate() const;
    /// Stable textual form, used for hashing into checkpoints.
    std::string canonical_string() const;
};

std::string weight_name(std::size_t layer);
std::string bias_name(std::size_t layer);

struct NamedTensor {
    std::string name;
    DenseMatrix value;
};

/// Ordered, uniquely named tensors. Iteration order is insertion order.
class NamedParams {
public:
    void add(std::string name, DenseMatrix value);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    NamedTensor& operator[](std::size_t i) { return entries_[i]; }
    const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }

    const DenseMatrix* find(std::string_view name) const;
    DenseMatrix* find(std::string_view name);
    /// Throws DomainError if absent.
    const DenseMatrix& at(std::string_view name) const;
    DenseMatrix& at(std::string_view name);
    std::vector<std::string> names() const;

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    bool bitwise_equal(const NamedParams& other) const;

private:
    std::vector<NamedTensor> entries_;
};

/// Zero-valued tensors with the shapes the spec requires, in canonical order:
/// layer0.weight, layer0.bias, layer1.weight, ...
NamedParams zero_params(const MlpSpec& spec);
/// Scaled-normal initialisation (stddev sqrt(2 / fan_in) for weights, zero biases).
NamedParams init_params(const MlpSpec& spec, SeededRng& rng);

/// Labels are used by cross-entropy, targets by mean squared error.
struct Batch {
    DenseMatrix inputs;
    std::vector<int> labels;
    DenseMatrix targets;

    std::size_t size() const { return inputs.rows(); }
};

DenseMatrix forward(const MlpSpec& spec, const NamedParams& params, const DenseMatrix& inputs);

/// Mean loss over the batch.
double loss(const MlpSpec& spec, const NamedParams& params, const Batch& batch);

struct LossAndGrad {
    double loss = 0.0;
    NamedParams grads;
};

LossAndGrad backward(const MlpSpec& spec, const NamedParams& params, const Batch& batch);

/// Central differences (L(theta + h) - L(theta - h)) / 2h for every coordinate.
NamedParams finite_diff_grad(const MlpSpec& spec, const NamedParams& params, const Batch& batch,
                             double h);

/// Index of the largest output per row.
std::vector<int> predict(const MlpSpec& spec, const NamedParams& params,
                         const DenseMatrix& inputs);

}  // namespace ftpkit
