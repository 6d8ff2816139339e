// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "ftpkit/errors.hpp"
#include "ftpkit/ftp_optimizer.hpp"
#include "ftpkit/projection.hpp"
#include "test_support.hpp"

using namespace ftpkit;
using ftpkit::testing::random_batch;
using ftpkit::testing::random_params;

namespace {

const MlpSpec kSpec{{4, 8, 3}, {Activation::kTanh}, LossKind::kSoftmaxCrossEntropy};

std::unique_ptr<BaseOptimizer> sgd(double lr = 0.1, double momentum = 0.9) {
    OptimizerSettings s;
    s.lr = lr;
    s.momentum = momentum;
    s.weight_decay = 1e-4;
    return std::make_unique<SgdOptimizer>(s);
}

void compute_grads(ParamSet& params, SeededRng& rng) {
    const Batch batch = random_batch(kSpec, 16, rng);
    set_grads(params, backward(kSpec, values_of(params), batch).grads);
}

}  // namespace

TEST(HyperGradient, HandExamples) {
    const DenseMatrix anchor(1, 2);
    EXPECT_DOUBLE_EQ(hyper_gradient(DenseMatrix::from_rows({{1, 0}}),
                                    DenseMatrix::from_rows({{2, -2}}), anchor, 1e-8),
                     0.5);
    EXPECT_DOUBLE_EQ(hyper_gradient(DenseMatrix::from_rows({{1, 1}}),
                                    DenseMatrix::from_rows({{2, -2}}), anchor, 1e-8),
                     0.0);
    EXPECT_DOUBLE_EQ(hyper_gradient(DenseMatrix::from_rows({{1, 0}, {0, 1}}),
                                    DenseMatrix::from_rows({{2, -2}, {1, 1}}), DenseMatrix(2, 2),
                                    1e-8),
                     1.0);
}

TEST(HyperGradient, ClampedAndZeroRowsContributeNothing) {
    const auto g = DenseMatrix::from_rows({{1, 0}, {0, 1}});
    const auto w = DenseMatrix::from_rows({{2, -2}, {1, 1}});
    // Row 0 has displacement 4, row 1 has 2: gamma = 3 leaves only row 0 active.
    EXPECT_DOUBLE_EQ(hyper_gradient(g, w, DenseMatrix(2, 2), 3.0), 0.5);
    EXPECT_DOUBLE_EQ(hyper_gradient(g, w, DenseMatrix(2, 2), 5.0), 0.0);
    EXPECT_EQ(hyper_gradient(g, DenseMatrix(2, 2), DenseMatrix(2, 2), 0.0), 0.0);
}

TEST(HyperGradient, MissingCacheIsStateError) {
    ManagedParam p;
    p.name = "w";
    p.value = DenseMatrix(1, 2);
    p.anchor = DenseMatrix(1, 2);
    p.grad = DenseMatrix(1, 2);
    EXPECT_THROW(hyper_gradient(p, 1e-8), StateError);
    p.prev_unconstrained = DenseMatrix(1, 2);
    p.grad.reset();
    EXPECT_THROW(hyper_gradient(p, 1e-8), StateError);
}

TEST(HyperGradient, MatchesFiniteDifferencesOfProjectedLoss) {
    SeededRng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const NamedParams anchor = random_params(kSpec, rng);
        NamedParams w_tilde = anchor;
        for (auto& t : w_tilde) t.value += sample_normal(rng, t.value.rows(), t.value.cols(), 0.0, 0.5);
        const Batch batch = random_batch(kSpec, 12, rng);
        for (std::size_t slot = 0; slot < anchor.size(); ++slot) {
            const auto d = row_l1_distances(w_tilde[slot].value, anchor[slot].value);
            const double gamma = 0.5 * *std::min_element(d.begin(), d.end());
            const auto phi = [&](double g) {
                NamedParams p = w_tilde;
                p[slot].value = project_rows(w_tilde[slot].value, anchor[slot].value, g);
                return p;
            };
            const LossAndGrad lg = backward(kSpec, phi(gamma), batch);
            const double analytic = hyper_gradient(lg.grads[slot].value, w_tilde[slot].value,
                                                   anchor[slot].value, gamma);
            const double h = 1e-6;
            const double numeric =
                (loss(kSpec, phi(gamma + h), batch) - loss(kSpec, phi(gamma - h), batch)) / (2 * h);
            EXPECT_LT(std::abs(analytic - numeric), 1e-4 * std::max(std::abs(numeric), 1e-6))
                << anchor[slot].name;
        }
    }
}

TEST(AnnealGradient, Semantics) {
    EXPECT_DOUBLE_EQ(anneal_gradient(0.5, 0.5), 0.25);
    EXPECT_DOUBLE_EQ(anneal_gradient(-0.5, 0.3), -0.5);
    EXPECT_DOUBLE_EQ(anneal_gradient(-0.5, 1.0), -0.5);
    EXPECT_EQ(anneal_gradient(0.7, 0.0), 0.0);
    EXPECT_THROW(anneal_gradient(0.1, 1.5), ConfigError);
    EXPECT_THROW(anneal_gradient(0.1, -0.1), ConfigError);
}

TEST(AdamUpdateGamma, HandSteps) {
    GammaState s;
    const GammaState up = adam_update_gamma(s, -0.5);
    EXPECT_EQ(up.t, 1u);
    EXPECT_NEAR(up.gamma, 1e-8 + 0.01 * 0.5 / (0.5 + 1e-8), 1e-18);
    EXPECT_NEAR(up.gamma, 0.01000001, 1e-9);

    const GammaState down = adam_update_gamma(s, 0.5);
    EXPECT_NEAR(down.unclamped_gamma, -0.00999999, 1e-9);
    EXPECT_EQ(down.gamma, 0.0);

    const GammaState still = adam_update_gamma(s, 0.0);
    EXPECT_EQ(still.gamma, s.gamma);
    EXPECT_EQ(still.t, 1u);
}

TEST(AdamUpdateGamma, StepSizeIsBounded) {
    SeededRng rng(12);
    GammaState s;
    s.gamma = 10.0;
    for (int i = 0; i < 1000; ++i) {
        const double g = rng.uniform() < 0.1 ? 1e3 * rng.normal() : rng.normal();
        const GammaState next = adam_update_gamma(s, g);
        EXPECT_LE(std::abs(next.unclamped_gamma - s.gamma), 40.0 * s.mu);
        EXPECT_GE(next.v, 0.0);
        EXPECT_GE(next.gamma, 0.0);
        s = next;
    }
}

TEST(FtpOptimizer, FirstStepStaysWithinInitialRadius) {
    SeededRng rng(1);
    ParamSet params = make_param_set(random_params(kSpec, rng));
    FtpOptimizer opt(sgd(), FtpSettings{});
    compute_grads(params, rng);
    opt.step(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
        EXPECT_EQ(opt.gammas()[i].gamma, kInitialGamma);
        EXPECT_TRUE(params[i].prev_unconstrained.has_value());
        for (double d : row_l1_distances(params[i].value, params[i].anchor)) {
            EXPECT_LE(d, 1e-8 + 1e-9);
        }
    }
}

TEST(FtpOptimizer, ExcludingEverythingMatchesBaseOptimizer) {
    SeededRng init(2);
    const NamedParams start = random_params(kSpec, init);
    ParamSet a = make_param_set(start);
    ParamSet b = make_param_set(start);
    FtpSettings settings;
    for (const auto& p : a) settings.exclude.insert(p.name);
    FtpOptimizer ftp(sgd(), settings);
    auto base = sgd();

    SeededRng rng_a(3), rng_b(3);
    for (int it = 0; it < 30; ++it) {
        compute_grads(a, rng_a);
        compute_grads(b, rng_b);
        ftp.step(a);
        base->step(b);
        for (auto& p : b) p.grad.reset();
    }
    EXPECT_TRUE(values_of(a).bitwise_equal(values_of(b)));
}

TEST(FtpOptimizer, ZeroKappaNeverShrinksGamma) {
    SeededRng rng(4);
    ParamSet params = make_param_set(random_params(kSpec, rng));
    FtpOptimizer opt(sgd(), FtpSettings{0.0, {}});
    std::vector<double> last(params.size(), 0.0);
    for (int it = 0; it < 100; ++it) {
        compute_grads(params, rng);
        opt.step(params);
        for (std::size_t i = 0; i < params.size(); ++i) {
            EXPECT_GE(opt.gammas()[i].gamma, last[i]);
            last[i] = opt.gammas()[i].gamma;
        }
    }
    EXPECT_GT(last[0], kInitialGamma);
}

TEST(FtpOptimizer, ConstraintHoldsAfterEveryStep) {
    SeededRng rng(5);
    ParamSet params = make_param_set(random_params(kSpec, rng));
    FtpOptimizer opt(sgd(0.2), FtpSettings{1.0, {"layer1.bias"}});
    for (int it = 0; it < 150; ++it) {
        compute_grads(params, rng);
        const auto before = opt.gammas();
        opt.step(params);
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!opt.is_projected(i)) continue;
            EXPECT_LE(mars_norm(params[i].value - params[i].anchor), opt.gammas()[i].gamma + 1e-9);
            if (!before.empty()) {
                EXPECT_LE(std::abs(opt.gammas()[i].gamma - before[i].gamma), 40 * 1e-2);
            }
        }
    }
    EXPECT_FALSE(opt.is_projected(3));
}

TEST(FtpOptimizer, Errors) {
    SeededRng rng(6);
    ParamSet params = make_param_set(random_params(kSpec, rng));
    EXPECT_THROW(FtpOptimizer(sgd(), FtpSettings{1.5, {}}), ConfigError);
    EXPECT_THROW(FtpOptimizer(nullptr, FtpSettings{}), ConfigError);

    FtpOptimizer opt(sgd(), FtpSettings{});
    EXPECT_THROW(opt.step(params), StateError);

    FtpOptimizer unknown(sgd(), FtpSettings{1.0, {"head.weight"}});
    compute_grads(params, rng);
    EXPECT_THROW(unknown.step(params), ConfigError);

    params[0].grad = DenseMatrix(2, 2);
    EXPECT_THROW(opt.step(params), DomainError);
}

TEST(FtpOptimizer, RebaseAnchor) {
    SeededRng rng(7);
    ParamSet params = make_param_set(random_params(kSpec, rng));
    FtpOptimizer opt(sgd(0.2), FtpSettings{0.0, {}});
    for (int it = 0; it < 40; ++it) {
        compute_grads(params, rng);
        opt.step(params);
    }
    const NamedParams original_anchor = anchors_of(params);
    EXPECT_GT(mars_norm(params[0].value - params[0].anchor), 1e-3);

    opt.rebase_anchor(params);
    const NamedParams after_first = anchors_of(params);
    opt.rebase_anchor(params);
    EXPECT_TRUE(anchors_of(params).bitwise_equal(after_first));
    EXPECT_TRUE(after_first.bitwise_equal(values_of(params)));
    for (std::size_t i = 0; i < params.size(); ++i) {
        EXPECT_EQ(opt.gammas()[i].gamma, kInitialGamma);
        EXPECT_EQ(opt.gammas()[i].t, 0u);
        EXPECT_FALSE(params[i].prev_unconstrained.has_value());
        EXPECT_TRUE(project_rows(params[i].value, params[i].anchor, kInitialGamma)
                        .bitwise_equal(params[i].value));
    }

    compute_grads(params, rng);
    opt.step(params);
    bool moved_from_original = false;
    for (std::size_t i = 0; i < params.size(); ++i) {
        EXPECT_LE(mars_norm(params[i].value - params[i].anchor), kInitialGamma + 1e-9);
        moved_from_original |=
            mars_norm(params[i].value - original_anchor[i].value) > 10 * kInitialGamma;
    }
    EXPECT_TRUE(moved_from_original);
}

TEST(FtpOptimizer, CopyIsIndependent) {
    SeededRng rng(8);
    ParamSet params = make_param_set(random_params(kSpec, rng));
    FtpOptimizer opt(sgd(), FtpSettings{});
    compute_grads(params, rng);
    opt.step(params);
    FtpOptimizer copy = opt;
    ParamSet twin = params;
    SeededRng r1(9), r2(9);
    for (int it = 0; it < 5; ++it) {
        compute_grads(params, r1);
        compute_grads(twin, r2);
        opt.step(params);
        copy.step(twin);
    }
    EXPECT_TRUE(values_of(params).bitwise_equal(values_of(twin)));
}
