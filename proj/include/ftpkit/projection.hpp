// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Projection of a weight matrix onto a MARS-norm ball around an anchor, and
// the rule that maps tensors of other ranks onto rows.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ftpkit/numerics.hpp"

namespace ftpkit {

/// Floor on a row's L1 displacement before it is used as a divisor.
inline constexpr double kDivisionFloor = 1e-12;

enum class ShapeRule {
    kMatrix,         // n x m stays n x m
    kVectorAsRow,    // length-n vector becomes one 1 x n row
    kLeadingAxisRows // d0 x d1 x ... becomes d0 x (d1 * ...), e.g. conv kernels
};

struct ProjectionView {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    ShapeRule rule = ShapeRule::kMatrix;
};

/// Decides what counts as a row for a tensor of the given shape.
/// Throws DomainError on an empty tensor and UnsupportedError for rank > 4.
ProjectionView canonicalize(std::string name, std::span<const std::size_t> shape);

/// Same as above for a tensor already stored as a matrix. Rows of length one
/// matrices (1 x n) are treated as vectors.
ProjectionView canonicalize(std::string name, const DenseMatrix& tensor);

/// Per row: w_p = min(1, gamma / max(|w~ - w0|_1, floor)) (w~ - w0) + w0.
/// Rows already inside the ball are copied unchanged. gamma may be +inf.
DenseMatrix project_rows(const DenseMatrix& w_tilde, const DenseMatrix& anchor, double gamma);

/// Scale factor applied to each row by project_rows.
std::vector<double> projection_factors(const DenseMatrix& w_tilde, const DenseMatrix& anchor,
                                       double gamma);

}  // namespace ftpkit
