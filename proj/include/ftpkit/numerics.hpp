// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major matrices, the norms used by the projection code, and a
// counter-based random number generator.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace ftpkit {

/// Row-major matrix of doubles. A vector is stored as a 1 x n matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    /// Throws DomainError unless data.size() == rows * cols.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    /// Builds a matrix from nested row literals; all rows must have equal length.
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static DenseMatrix row_vector(std::vector<double> values);
    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool same_shape(const DenseMatrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    DenseMatrix& operator+=(const DenseMatrix& other);
    DenseMatrix& operator-=(const DenseMatrix& other);
    DenseMatrix& operator*=(double scale);

    void fill(double value);
    bool all_finite() const;

    /// Exact element-wise equality of shape and bit patterns.
    bool bitwise_equal(const DenseMatrix& other) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix lhs, const DenseMatrix& rhs);
DenseMatrix operator-(DenseMatrix lhs, const DenseMatrix& rhs);
DenseMatrix operator*(DenseMatrix lhs, double scale);
DenseMatrix operator*(double scale, DenseMatrix rhs);

/// a (n x k) times b (k x m).
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// a (n x k) times transpose(b) where b is (m x k).
DenseMatrix matmul_transposed(const DenseMatrix& a, const DenseMatrix& b);
/// transpose(a) (k x n) times b (n x m).
DenseMatrix transposed_matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);

/// Maximum absolute row sum, i.e. the l_inf -> l_inf operator norm.
double mars_norm(const DenseMatrix& w);

/// Per-row L1 distance between two equally shaped matrices.
std::vector<double> row_l1_distances(const DenseMatrix& a, const DenseMatrix& b);

double max_abs(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

/// Counter-based generator: the n-th draw is a pure function of (seed, n),
/// so the whole state is two integers and sequences are platform independent.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed = 0, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64();
    /// Uniform on [0, 1).
    double uniform();
    /// Uniform integer on [0, n); n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);
    /// Standard normal via Box-Muller (consumes two draws).
    double normal();

    /// An independent stream keyed by `stream`, leaving this one untouched.
    SeededRng derive(std::uint64_t stream) const;

    bool operator==(const SeededRng&) const = default;

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

/// rows x cols matrix of N(mean, stddev^2) samples; throws DomainError if stddev < 0.
DenseMatrix sample_normal(SeededRng& rng, std::size_t rows, std::size_t cols, double mean,
                          double stddev);

}  // namespace ftpkit
