// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/numerics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>

#include <fmt/format.h>

#include "ftpkit/errors.hpp"

namespace ftpkit {

namespace {

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DomainError(fmt::format("{}: shape mismatch {}x{} vs {}x{}", op, a.rows(), a.cols(),
                                      b.rows(), b.cols()));
    }
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw DomainError(fmt::format("DenseMatrix: {} values for a {}x{} matrix", data_.size(),
                                      rows, cols));
    }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(n * m);
    for (const auto& r : rows) {
        if (r.size() != m) throw DomainError("DenseMatrix::from_rows: ragged rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return DenseMatrix(n, m, std::move(data));
}

DenseMatrix DenseMatrix::row_vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return DenseMatrix(1, n, std::move(values));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator*=(double scale) {
    for (double& v : data_) v *= scale;
    return *this;
}

void DenseMatrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool DenseMatrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool DenseMatrix::bitwise_equal(const DenseMatrix& other) const {
    return same_shape(other) &&
           (data_.empty() ||
            std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

DenseMatrix operator+(DenseMatrix lhs, const DenseMatrix& rhs) { return lhs += rhs; }
DenseMatrix operator-(DenseMatrix lhs, const DenseMatrix& rhs) { return lhs -= rhs; }
DenseMatrix operator*(DenseMatrix lhs, double scale) { return lhs *= scale; }
DenseMatrix operator*(double scale, DenseMatrix rhs) { return rhs *= scale; }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw DomainError(fmt::format("matmul: {}x{} times {}x{}", a.rows(), a.cols(), b.rows(),
                                      b.cols()));
    }
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out_row = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const auto b_row = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

DenseMatrix matmul_transposed(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) {
        throw DomainError(fmt::format("matmul_transposed: {}x{} times ({}x{})^T", a.rows(),
                                      a.cols(), b.rows(), b.cols()));
    }
    DenseMatrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto a_row = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a_row, b.row(j));
    }
    return out;
}

DenseMatrix transposed_matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) {
        throw DomainError(fmt::format("transposed_matmul: ({}x{})^T times {}x{}", a.rows(),
                                      a.cols(), b.rows(), b.cols()));
    }
    DenseMatrix out(a.cols(), b.cols());
    for (std::size_t n = 0; n < a.rows(); ++n) {
        const auto a_row = a.row(n);
        const auto b_row = b.row(n);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ani = a_row[i];
            auto out_row = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += ani * b_row[j];
        }
    }
    return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

double mars_norm(const DenseMatrix& w) {
    if (w.empty()) throw DomainError("mars_norm: empty matrix");
    double best = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double sum = 0.0;
        for (double v : w.row(i)) sum += std::abs(v);
        best = std::max(best, sum);
    }
    return best;
}

std::vector<double> row_l1_distances(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "row_l1_distances");
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ar = a.row(i);
        const auto br = b.row(i);
        double sum = 0.0;
        for (std::size_t j = 0; j < ar.size(); ++j) sum += std::abs(ar[j] - br[j]);
        out[i] = sum;
    }
    return out;
}

double max_abs(std::span<const double> v) {
    double best = 0.0;
    for (double x : v) best = std::max(best, std::abs(x));
    return best;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DomainError("dot: length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

std::uint64_t SeededRng::next_u64() {
    ++counter_;
    return splitmix64(seed_ + counter_ * kGolden);
}

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t SeededRng::uniform_index(std::uint64_t n) {
    if (n == 0) throw DomainError("uniform_index: empty range");
    __extension__ using u128 = unsigned __int128;
    const auto wide = static_cast<u128>(next_u64()) * n;
    return static_cast<std::uint64_t>(wide >> 64);
}

double SeededRng::normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SeededRng SeededRng::derive(std::uint64_t stream) const {
    return SeededRng(splitmix64(seed_ ^ splitmix64(stream + kGolden)));
}

DenseMatrix sample_normal(SeededRng& rng, std::size_t rows, std::size_t cols, double mean,
                          double stddev) {
    if (!(stddev >= 0.0)) throw DomainError("sample_normal: negative stddev");
    DenseMatrix out(rows, cols);
    for (double& v : out.values()) v = mean + stddev * rng.normal();
    return out;
}

}  // namespace ftpkit
