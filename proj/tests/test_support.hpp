// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the unit tests: random problem generators and a plain
// loop-based reference forward pass.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ftpkit/model.hpp"
#include "ftpkit/numerics.hpp"

namespace ftpkit::testing {

inline Batch random_batch(const MlpSpec& spec, std::size_t n, SeededRng& rng) {
    Batch b;
    b.inputs = sample_normal(rng, n, spec.input_width(), 0.0, 1.0);
    if (spec.loss == LossKind::kSoftmaxCrossEntropy) {
        b.labels.resize(n);
        for (auto& y : b.labels) y = static_cast<int>(rng.uniform_index(spec.output_width()));
    } else {
        b.targets = sample_normal(rng, n, spec.output_width(), 0.0, 1.0);
    }
    return b;
}

/// Biases are drawn too so that no tensor is trivially zero.
inline NamedParams random_params(const MlpSpec& spec, SeededRng& rng) {
    NamedParams p = init_params(spec, rng);
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        p[2 * l + 1].value = sample_normal(rng, 1, spec.widths[l + 1], 0.0, 0.3);
    }
    return p;
}

/// Straightforward triple loops, written independently of the library's
/// matrix helpers.
inline std::vector<std::vector<double>> reference_forward(const MlpSpec& spec,
                                                          const NamedParams& params,
                                                          const DenseMatrix& inputs) {
    std::vector<std::vector<double>> out;
    for (std::size_t n = 0; n < inputs.rows(); ++n) {
        std::vector<double> h(inputs.row(n).begin(), inputs.row(n).end());
        for (std::size_t l = 0; l < spec.num_layers(); ++l) {
            const DenseMatrix& w = params[2 * l].value;
            const DenseMatrix& b = params[2 * l + 1].value;
            std::vector<double> z(w.rows());
            for (std::size_t i = 0; i < w.rows(); ++i) {
                double s = b(0, i);
                for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * h[j];
                if (l + 1 < spec.num_layers()) {
                    switch (spec.activations[l]) {
                        case Activation::kRelu: s = std::max(0.0, s); break;
                        case Activation::kTanh: s = std::tanh(s); break;
                        case Activation::kGelu: s = 0.5 * s * (1.0 + std::erf(s / std::sqrt(2.0))); break;
                        case Activation::kIdentity: break;
                    }
                }
                z[i] = s;
            }
            h = std::move(z);
        }
        out.push_back(std::move(h));
    }
    return out;
}

/// max |a - b| / max(max |a|, max |b|, floor) over one tensor.
inline double relative_error(const DenseMatrix& a, const DenseMatrix& b, double floor = 1e-12) {
    double diff = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        diff = std::max(diff, std::abs(a.values()[k] - b.values()[k]));
    }
    return diff / std::max({max_abs(a.values()), max_abs(b.values()), floor});
}

}  // namespace ftpkit::testing
