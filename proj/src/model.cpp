// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "ftpkit/errors.hpp"

namespace ftpkit {

namespace {

constexpr double kInvSqrt2 = 0.5 * std::numbers::sqrt2;

double activate(Activation a, double z) {
    switch (a) {
        case Activation::kIdentity: return z;
        case Activation::kRelu: return z > 0.0 ? z : 0.0;
        case Activation::kTanh: return std::tanh(z);
        case Activation::kGelu: return 0.5 * z * (1.0 + std::erf(z * kInvSqrt2));
    }
    return z;
}

double activate_derivative(Activation a, double z) {
    switch (a) {
        case Activation::kIdentity: return 1.0;
        case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::kTanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::kGelu: {
            const double cdf = 0.5 * (1.0 + std::erf(z * kInvSqrt2));
            const double pdf = std::exp(-0.5 * z * z) * std::numbers::inv_sqrtpi *
                               kInvSqrt2;
            return cdf + z * pdf;
        }
    }
    return 1.0;
}

void check_params(const MlpSpec& spec, const NamedParams& params) {
    if (params.size() != 2 * spec.num_layers()) {
        throw DomainError(fmt::format("expected {} tensors, got {}", 2 * spec.num_layers(),
                                      params.size()));
    }
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const DenseMatrix& w = params[2 * l].value;
        const DenseMatrix& b = params[2 * l + 1].value;
        if (w.rows() != spec.widths[l + 1] || w.cols() != spec.widths[l] || b.rows() != 1 ||
            b.cols() != spec.widths[l + 1]) {
            throw DomainError(fmt::format("layer {} tensors do not match the spec", l));
        }
    }
}

void check_batch(const MlpSpec& spec, const Batch& batch) {
    if (batch.inputs.cols() != spec.input_width()) {
        throw DomainError(fmt::format("input width {} does not match {}", batch.inputs.cols(),
                                      spec.input_width()));
    }
    if (spec.loss == LossKind::kSoftmaxCrossEntropy) {
        if (batch.labels.size() != batch.size()) throw DomainError("label count mismatch");
        const auto classes = static_cast<int>(spec.output_width());
        for (int y : batch.labels) {
            if (y < 0 || y >= classes) throw DomainError(fmt::format("invalid label {}", y));
        }
    } else if (batch.targets.rows() != batch.size() ||
               batch.targets.cols() != spec.output_width()) {
        throw DomainError("target shape mismatch");
    }
}

struct Activations {
    // layer_inputs[l] feeds layer l; pre_activations[l] is its affine output.
    std::vector<DenseMatrix> layer_inputs;
    std::vector<DenseMatrix> pre_activations;
};

DenseMatrix affine(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& b) {
    DenseMatrix z = matmul_transposed(x, w);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += b(0, j);
    }
    return z;
}

Activations run_forward(const MlpSpec& spec, const NamedParams& params, const DenseMatrix& x) {
    Activations acts;
    acts.layer_inputs.push_back(x);
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        DenseMatrix z = affine(acts.layer_inputs.back(), params[2 * l].value,
                               params[2 * l + 1].value);
        if (l + 1 < spec.num_layers()) {
            DenseMatrix a = z;
            const Activation kind = spec.activations[l];
            for (double& v : a.values()) v = activate(kind, v);
            acts.layer_inputs.push_back(std::move(a));
        }
        acts.pre_activations.push_back(std::move(z));
    }
    return acts;
}

// Mean loss and its gradient with respect to the output logits.
double output_loss(const MlpSpec& spec, const DenseMatrix& out, const Batch& batch,
                   DenseMatrix* d_out) {
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    if (d_out) *d_out = DenseMatrix(out.rows(), out.cols());
    for (std::size_t i = 0; i < out.rows(); ++i) {
        const auto z = out.row(i);
        if (spec.loss == LossKind::kSoftmaxCrossEntropy) {
            const double zmax = *std::max_element(z.begin(), z.end());
            double denom = 0.0;
            for (double v : z) denom += std::exp(v - zmax);
            const double log_denom = std::log(denom) + zmax;
            const auto y = static_cast<std::size_t>(batch.labels[i]);
            total += log_denom - z[y];
            if (d_out) {
                auto d = d_out->row(i);
                for (std::size_t j = 0; j < z.size(); ++j) {
                    d[j] = std::exp(z[j] - log_denom) * inv_n;
                }
                d[y] -= inv_n;
            }
        } else {
            const auto t = batch.targets.row(i);
            for (std::size_t j = 0; j < z.size(); ++j) {
                const double r = z[j] - t[j];
                total += r * r;
                if (d_out) (*d_out)(i, j) = 2.0 * r * inv_n;
            }
        }
    }
    return total * inv_n;
}

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::kIdentity: return "identity";
        case Activation::kRelu: return "relu";
        case Activation::kTanh: return "tanh";
        case Activation::kGelu: return "gelu";
    }
    return "?";
}

std::string_view to_string(LossKind l) {
    return l == LossKind::kSoftmaxCrossEntropy ? "softmax-cross-entropy" : "mean-squared-error";
}

Activation parse_activation(std::string_view name) {
    for (auto a : {Activation::kIdentity, Activation::kRelu, Activation::kTanh,
                   Activation::kGelu}) {
        if (to_string(a) == name) return a;
    }
    throw ConfigError(fmt::format("unknown activation '{}'", name));
}

LossKind parse_loss(std::string_view name) {
    for (auto l : {LossKind::kSoftmaxCrossEntropy, LossKind::kMeanSquaredError}) {
        if (to_string(l) == name) return l;
    }
    throw ConfigError(fmt::format("unknown loss '{}'", name));
}

double activation_lipschitz(Activation a) {
    if (a == Activation::kGelu) {
        // sup of the derivative, attained at z = sqrt(2)
        const double z = std::numbers::sqrt2;
        return activate_derivative(a, z);
    }
    return 1.0;
}

void MlpSpec::validate() const {
    if (widths.size() < 2) throw ConfigError("MlpSpec: at least one layer is required");
    if (std::any_of(widths.begin(), widths.end(), [](std::size_t w) { return w == 0; })) {
        throw ConfigError("MlpSpec: widths must be positive");
    }
    if (activations.size() != widths.size() - 2) {
        throw ConfigError(fmt::format("MlpSpec: {} hidden layers but {} activations",
                                      widths.size() - 2, activations.size()));
    }
}

std::string MlpSpec::canonical_string() const {
    std::string out = "widths=";
    for (std::size_t i = 0; i < widths.size(); ++i) {
        out += fmt::format("{}{}", i ? "," : "", widths[i]);
    }
    out += ";act=";
    for (std::size_t i = 0; i < activations.size(); ++i) {
        out += fmt::format("{}{}", i ? "," : "", to_string(activations[i]));
    }
    out += fmt::format(";loss={}", to_string(loss));
    return out;
}

std::string weight_name(std::size_t layer) { return fmt::format("layer{}.weight", layer); }
std::string bias_name(std::size_t layer) { return fmt::format("layer{}.bias", layer); }

void NamedParams::add(std::string name, DenseMatrix value) {
    if (find(name)) throw DomainError(fmt::format("duplicate tensor name '{}'", name));
    entries_.push_back({std::move(name), std::move(value)});
}

const DenseMatrix* NamedParams::find(std::string_view name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return &e.value;
    }
    return nullptr;
}

DenseMatrix* NamedParams::find(std::string_view name) {
    for (auto& e : entries_) {
        if (e.name == name) return &e.value;
    }
    return nullptr;
}

const DenseMatrix& NamedParams::at(std::string_view name) const {
    if (const auto* p = find(name)) return *p;
    throw DomainError(fmt::format("no tensor named '{}'", name));
}

DenseMatrix& NamedParams::at(std::string_view name) {
    if (auto* p = find(name)) return *p;
    throw DomainError(fmt::format("no tensor named '{}'", name));
}

std::vector<std::string> NamedParams::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
}

bool NamedParams::bitwise_equal(const NamedParams& other) const {
    if (size() != other.size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
        if (entries_[i].name != other.entries_[i].name ||
            !entries_[i].value.bitwise_equal(other.entries_[i].value)) {
            return false;
        }
    }
    return true;
}

NamedParams zero_params(const MlpSpec& spec) {
    spec.validate();
    NamedParams params;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        params.add(weight_name(l), DenseMatrix(spec.widths[l + 1], spec.widths[l]));
        params.add(bias_name(l), DenseMatrix(1, spec.widths[l + 1]));
    }
    return params;
}

NamedParams init_params(const MlpSpec& spec, SeededRng& rng) {
    NamedParams params = zero_params(spec);
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const double stddev = std::sqrt(2.0 / static_cast<double>(spec.widths[l]));
        params[2 * l].value = sample_normal(rng, spec.widths[l + 1], spec.widths[l], 0.0, stddev);
    }
    return params;
}

DenseMatrix forward(const MlpSpec& spec, const NamedParams& params, const DenseMatrix& inputs) {
    spec.validate();
    check_params(spec, params);
    if (inputs.cols() != spec.input_width()) {
        throw DomainError(fmt::format("input width {} does not match {}", inputs.cols(),
                                      spec.input_width()));
    }
    return std::move(run_forward(spec, params, inputs).pre_activations.back());
}

double loss(const MlpSpec& spec, const NamedParams& params, const Batch& batch) {
    check_batch(spec, batch);
    const DenseMatrix out = forward(spec, params, batch.inputs);
    return output_loss(spec, out, batch, nullptr);
}

LossAndGrad backward(const MlpSpec& spec, const NamedParams& params, const Batch& batch) {
    spec.validate();
    check_params(spec, params);
    check_batch(spec, batch);
    if (batch.size() == 0) throw DomainError("backward: empty batch");

    const Activations acts = run_forward(spec, params, batch.inputs);
    LossAndGrad result;
    result.grads = zero_params(spec);

    DenseMatrix delta;
    result.loss = output_loss(spec, acts.pre_activations.back(), batch, &delta);

    for (std::size_t l = spec.num_layers(); l-- > 0;) {
        const DenseMatrix& input = acts.layer_inputs[l];
        result.grads[2 * l].value = transposed_matmul(delta, input);
        DenseMatrix& db = result.grads[2 * l + 1].value;
        for (std::size_t i = 0; i < delta.rows(); ++i) {
            const auto row = delta.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) db(0, j) += row[j];
        }
        if (l == 0) break;
        DenseMatrix upstream = matmul(delta, params[2 * l].value);
        const DenseMatrix& z = acts.pre_activations[l - 1];
        const Activation kind = spec.activations[l - 1];
        auto up = upstream.values();
        const auto zv = z.values();
        for (std::size_t k = 0; k < up.size(); ++k) up[k] *= activate_derivative(kind, zv[k]);
        delta = std::move(upstream);
    }
    return result;
}

NamedParams finite_diff_grad(const MlpSpec& spec, const NamedParams& params, const Batch& batch,
                             double h) {
    if (!(h > 0.0)) throw DomainError("finite_diff_grad: step must be positive");
    NamedParams probe = params;
    NamedParams grads = zero_params(spec);
    for (std::size_t t = 0; t < probe.size(); ++t) {
        auto coords = probe[t].value.values();
        auto out = grads[t].value.values();
        for (std::size_t k = 0; k < coords.size(); ++k) {
            const double saved = coords[k];
            coords[k] = saved + h;
            const double up = loss(spec, probe, batch);
            coords[k] = saved - h;
            const double down = loss(spec, probe, batch);
            coords[k] = saved;
            out[k] = (up - down) / (2.0 * h);
        }
    }
    return grads;
}

std::vector<int> predict(const MlpSpec& spec, const NamedParams& params,
                         const DenseMatrix& inputs) {
    const DenseMatrix out = forward(spec, params, inputs);
    std::vector<int> labels(out.rows());
    for (std::size_t i = 0; i < out.rows(); ++i) {
        const auto row = out.row(i);
        labels[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return labels;
}

}  // namespace ftpkit
