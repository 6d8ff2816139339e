// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/projection.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <fmt/format.h>

#include "ftpkit/errors.hpp"

namespace ftpkit {

ProjectionView canonicalize(std::string name, std::span<const std::size_t> shape) {
    const std::size_t count = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                              std::multiplies<>());
    if (shape.empty() || count == 0) {
        throw DomainError(fmt::format("canonicalize: '{}' is empty", name));
    }
    if (shape.size() > 4) {
        throw UnsupportedError(
            fmt::format("canonicalize: '{}' has rank {} (at most 4 supported)", name, shape.size()));
    }
    ProjectionView view{std::move(name), 0, 0, ShapeRule::kMatrix};
    if (shape.size() == 1) {
        view.rows = 1;
        view.cols = shape[0];
        view.rule = ShapeRule::kVectorAsRow;
    } else if (shape.size() == 2) {
        view.rows = shape[0];
        view.cols = shape[1];
    } else {
        view.rows = shape[0];
        view.cols = count / shape[0];
        view.rule = ShapeRule::kLeadingAxisRows;
    }
    return view;
}

ProjectionView canonicalize(std::string name, const DenseMatrix& tensor) {
    if (tensor.rows() == 1) {
        const std::size_t shape[] = {tensor.cols()};
        return canonicalize(std::move(name), shape);
    }
    const std::size_t shape[] = {tensor.rows(), tensor.cols()};
    return canonicalize(std::move(name), shape);
}

std::vector<double> projection_factors(const DenseMatrix& w_tilde, const DenseMatrix& anchor,
                                       double gamma) {
    if (!(gamma >= 0.0)) throw DomainError("project_rows: gamma must be non-negative");
    std::vector<double> factors = row_l1_distances(w_tilde, anchor);
    for (double& f : factors) f = std::min(1.0, gamma / std::max(f, kDivisionFloor));
    return factors;
}

DenseMatrix project_rows(const DenseMatrix& w_tilde, const DenseMatrix& anchor, double gamma) {
    const std::vector<double> factors = projection_factors(w_tilde, anchor, gamma);
    DenseMatrix out = w_tilde;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        const double f = factors[i];
        if (f >= 1.0) continue;
        auto row = out.row(i);
        const auto a = anchor.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = f * (row[j] - a[j]) + a[j];
    }
    return out;
}

}  // namespace ftpkit
