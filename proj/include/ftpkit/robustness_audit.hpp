// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Sampled checks of Lipschitz robustness under the l_inf norm. For a linear
// layer h(x) = Wx + b the l_inf -> l_inf Lipschitz constant is exactly the
// MARS norm of W, so the difference function of a fine-tuned layer is
// bounded by mars_norm(W_f - W_0) and the layer itself by that plus
// mars_norm(W_0). Deep networks are compared against the product of
// per-layer norms, which is only an upper bound.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ftpkit/model.hpp"
#include "ftpkit/numerics.hpp"

namespace ftpkit {

struct InputPair {
    std::vector<double> x;
    std::vector<double> x_prime;
};

/// Mixes independent Gaussian pairs with adversarial pairs whose difference
/// is the sign pattern of a registered row, which is where a linear layer
/// attains its MARS norm.
class PairSampler {
public:
    PairSampler(std::size_t dim, std::uint64_t seed, double scale = 1.0);

    /// Registers sign(row) of every row of `w` as an adversarial direction.
    void add_sign_directions(const DenseMatrix& w);

    InputPair next();
    std::size_t dim() const { return dim_; }

private:
    std::size_t dim_;
    SeededRng rng_;
    double scale_;
    std::vector<std::vector<double>> directions_;
    std::uint64_t draws_ = 0;
};

/// max over sampled pairs of |(W_f - W_0)(x - x')|_inf / |x - x'|_inf.
/// Coincident pairs are skipped; throws DomainError if every pair coincides.
double estimate_diff_lipschitz_lb(const DenseMatrix& w_f, const DenseMatrix& w_0,
                                  PairSampler& sampler, std::size_t n_pairs);

/// Exact l_inf -> l_inf Lipschitz constant of x -> Wx (the MARS norm).
double layer_lipschitz_upper(const DenseMatrix& w);

/// |Wx|_inf / |x|_inf for x = sign of the row with the largest L1 norm.
double sign_attainment_ratio(const DenseMatrix& w);

struct LayerLipschitz {
    std::string name;
    double anchor_norm = 0.0;  // L_0 of the layer: mars_norm(W_0)
    double diff_norm = 0.0;    // L_d of the layer: mars_norm(W_f - W_0)
};

struct LipschitzReport {
    std::vector<LayerLipschitz> layers;
    double diff_lower_bound = 0.0;      // sampled, difference function
    double composed_upper_bound = 0.0;  // bound on the fine-tuned network
    double anchor_upper_bound = 0.0;    // bound on the pre-trained network
    std::size_t sample_count = 0;
    double max_ratio = 0.0;             // sampled, fine-tuned network
    bool holds = true;
};

/// For a single linear layer checks every sampled ratio against
/// L_d + L_0; for deeper nets against the product of per-layer norms. Each
/// pair also has to satisfy the pairwise triangle inequality behind the
/// L_d + L_0 bound. Throws UnsupportedError for activations that are not
/// 1-Lipschitz and DomainError when the two parameter sets differ in shape.
LipschitzReport verify_lemma1_bound(const MlpSpec& spec, const NamedParams& fine_tuned,
                                    const NamedParams& anchor, PairSampler& sampler,
                                    std::size_t n_pairs);

void to_json(nlohmann::json& j, const LayerLipschitz& layer);
void to_json(nlohmann::json& j, const LipschitzReport& report);

}  // namespace ftpkit
