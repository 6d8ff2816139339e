// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/robustness_audit.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ftpkit/errors.hpp"

namespace ftpkit {

namespace {

constexpr double kBoundSlack = 1e-9;

double linf_distance(std::span<const double> a, std::span<const double> b) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a[i] - b[i]));
    return best;
}

DenseMatrix as_row(const std::vector<double>& v) { return DenseMatrix::row_vector(v); }

}  // namespace

PairSampler::PairSampler(std::size_t dim, std::uint64_t seed, double scale)
    : dim_(dim), rng_(seed), scale_(scale) {
    if (dim == 0) throw DomainError("PairSampler: zero dimension");
}

void PairSampler::add_sign_directions(const DenseMatrix& w) {
    if (w.cols() != dim_) throw DomainError("PairSampler: direction width mismatch");
    for (std::size_t i = 0; i < w.rows(); ++i) {
        std::vector<double> s(dim_);
        const auto row = w.row(i);
        for (std::size_t j = 0; j < dim_; ++j) s[j] = row[j] < 0.0 ? -1.0 : 1.0;
        directions_.push_back(std::move(s));
    }
}

InputPair PairSampler::next() {
    const std::uint64_t k = draws_++;
    InputPair pair{std::vector<double>(dim_), std::vector<double>(dim_)};
    for (double& v : pair.x) v = scale_ * rng_.normal();
    if (!directions_.empty() && k % 2 == 1) {
        const auto& d = directions_[(k / 2) % directions_.size()];
        for (std::size_t j = 0; j < dim_; ++j) pair.x_prime[j] = pair.x[j] + d[j];
    } else {
        for (double& v : pair.x_prime) v = scale_ * rng_.normal();
    }
    return pair;
}

double estimate_diff_lipschitz_lb(const DenseMatrix& w_f, const DenseMatrix& w_0,
                                  PairSampler& sampler, std::size_t n_pairs) {
    if (n_pairs == 0) throw DomainError("estimate_diff_lipschitz_lb: n_pairs must be >= 1");
    if (!w_f.same_shape(w_0)) throw DomainError("estimate_diff_lipschitz_lb: shape mismatch");
    if (w_f.cols() != sampler.dim()) throw DomainError("sampler dimension mismatch");
    const DenseMatrix diff = w_f - w_0;
    double best = 0.0;
    std::size_t used = 0;
    for (std::size_t n = 0; n < n_pairs; ++n) {
        const InputPair pair = sampler.next();
        std::vector<double> delta(pair.x.size());
        for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = pair.x[j] - pair.x_prime[j];
        const double denom = max_abs(delta);
        if (denom == 0.0) continue;
        ++used;
        const DenseMatrix out = matmul_transposed(as_row(delta), diff);
        best = std::max(best, max_abs(out.values()) / denom);
    }
    if (used == 0) throw DomainError("estimate_diff_lipschitz_lb: sampler produced no distinct pairs");
    return best;
}

double layer_lipschitz_upper(const DenseMatrix& w) { return mars_norm(w); }

double sign_attainment_ratio(const DenseMatrix& w) {
    const std::vector<double> sums = row_l1_distances(w, DenseMatrix(w.rows(), w.cols()));
    const std::size_t worst =
        static_cast<std::size_t>(std::max_element(sums.begin(), sums.end()) - sums.begin());
    std::vector<double> x(w.cols());
    const auto row = w.row(worst);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = row[j] < 0.0 ? -1.0 : 1.0;
    const DenseMatrix out = matmul_transposed(as_row(x), w);
    return max_abs(out.values()) / max_abs(x);
}

LipschitzReport verify_lemma1_bound(const MlpSpec& spec, const NamedParams& fine_tuned,
                                    const NamedParams& anchor, PairSampler& sampler,
                                    std::size_t n_pairs) {
    spec.validate();
    for (Activation a : spec.activations) {
        if (activation_lipschitz(a) > 1.0) {
            throw UnsupportedError(
                fmt::format("activation '{}' is not 1-Lipschitz", to_string(a)));
        }
    }
    if (fine_tuned.size() != anchor.size()) throw DomainError("models differ in tensor count");
    for (std::size_t i = 0; i < fine_tuned.size(); ++i) {
        if (fine_tuned[i].name != anchor[i].name ||
            !fine_tuned[i].value.same_shape(anchor[i].value)) {
            throw DomainError(fmt::format("models differ at '{}'", fine_tuned[i].name));
        }
    }
    if (sampler.dim() != spec.input_width()) throw DomainError("sampler dimension mismatch");
    if (n_pairs == 0) throw DomainError("verify_lemma1_bound: n_pairs must be >= 1");

    LipschitzReport report;
    report.composed_upper_bound = 1.0;
    report.anchor_upper_bound = 1.0;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const DenseMatrix& wf = fine_tuned[2 * l].value;
        const DenseMatrix& w0 = anchor[2 * l].value;
        LayerLipschitz layer{fine_tuned[2 * l].name, mars_norm(w0), mars_norm(wf - w0)};
        report.composed_upper_bound *= mars_norm(wf);
        report.anchor_upper_bound *= layer.anchor_norm;
        report.layers.push_back(std::move(layer));
    }
    const bool single_layer = spec.num_layers() == 1;
    const double bound = single_layer
                             ? report.layers[0].diff_norm + report.layers[0].anchor_norm
                             : report.composed_upper_bound;
    const double slack = kBoundSlack * std::max(1.0, bound);

    for (std::size_t n = 0; n < n_pairs; ++n) {
        const InputPair pair = sampler.next();
        const double denom = linf_distance(pair.x, pair.x_prime);
        if (denom == 0.0) continue;
        DenseMatrix inputs(2, pair.x.size());
        std::copy(pair.x.begin(), pair.x.end(), inputs.row(0).begin());
        std::copy(pair.x_prime.begin(), pair.x_prime.end(), inputs.row(1).begin());
        const DenseMatrix out_f = forward(spec, fine_tuned, inputs);
        const DenseMatrix out_0 = forward(spec, anchor, inputs);

        const double ratio_f = linf_distance(out_f.row(0), out_f.row(1)) / denom;
        const double ratio_0 = linf_distance(out_0.row(0), out_0.row(1)) / denom;
        std::vector<double> diff_delta(out_f.cols());
        for (std::size_t j = 0; j < diff_delta.size(); ++j) {
            diff_delta[j] = (out_f(0, j) - out_0(0, j)) - (out_f(1, j) - out_0(1, j));
        }
        const double ratio_d = max_abs(diff_delta) / denom;

        ++report.sample_count;
        report.max_ratio = std::max(report.max_ratio, ratio_f);
        report.diff_lower_bound = std::max(report.diff_lower_bound, ratio_d);
        if (ratio_f > bound + slack) report.holds = false;
        if (ratio_f > ratio_d + ratio_0 + slack) report.holds = false;
    }
    if (report.sample_count == 0) {
        throw DomainError("verify_lemma1_bound: sampler produced no distinct pairs");
    }
    if (single_layer && report.diff_lower_bound > report.layers[0].diff_norm + slack) {
        report.holds = false;
    }
    return report;
}

void to_json(nlohmann::json& j, const LayerLipschitz& layer) {
    j = nlohmann::json{{"name", layer.name},
                       {"anchor_norm", layer.anchor_norm},
                       {"diff_norm", layer.diff_norm}};
}

void to_json(nlohmann::json& j, const LipschitzReport& report) {
    j = nlohmann::json{{"layers", report.layers},
                       {"diff_lower_bound", report.diff_lower_bound},
                       {"composed_upper_bound", report.composed_upper_bound},
                       {"anchor_upper_bound", report.anchor_upper_bound},
                       {"sample_count", report.sample_count},
                       {"max_ratio", report.max_ratio},
                       {"holds", report.holds}};
}

}  // namespace ftpkit
