// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ftpkit/baselines.hpp"
#include "ftpkit/checkpoint.hpp"
#include "ftpkit/config.hpp"
#include "ftpkit/dataset.hpp"
#include "ftpkit/experiment.hpp"
#include "ftpkit/ftp_optimizer.hpp"
#include "ftpkit/hyper_optim.hpp"
#include "ftpkit/managed_param.hpp"
#include "ftpkit/metrics.hpp"
#include "ftpkit/model.hpp"
#include "ftpkit/optimizers.hpp"
#include "ftpkit/projection.hpp"
#include "ftpkit/robustness_audit.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace ftpkit;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kSeeds = 5;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Benchmark data and pretrained anchors, built once per seed.
class Bench {
public:
    ExperimentConfig config(std::uint64_t seed) const {
        ExperimentConfig c;
        c.seed = seed;
        return c;
    }

    std::shared_ptr<const ShiftDataset> data(std::uint64_t seed) {
        auto& slot = data_[seed];
        if (!slot) {
            const ExperimentConfig c = config(seed);
            slot = std::make_shared<const ShiftDataset>(generate_shift_dataset(c.dataset, seed));
        }
        return slot;
    }

    const NamedParams& anchor(std::uint64_t seed) {
        auto it = anchors_.find(seed);
        if (it == anchors_.end()) {
            it = anchors_.emplace(seed, pretrain(config(seed), *data(seed))).first;
        }
        return it->second;
    }

    FinetuneSession session(const ExperimentConfig& c) {
        return FinetuneSession(c, data(c.seed), anchor(c.seed));
    }

    // Completed 1000-iteration benchmark runs, cached for criteria 4, 8, 9.
    const FinetuneSession& finished(Method method, std::uint64_t seed) {
        const auto key = std::make_pair(static_cast<int>(method), seed);
        auto it = runs_.find(key);
        if (it == runs_.end()) {
            ExperimentConfig c = config(seed);
            c.method = method;
            auto s = std::make_unique<FinetuneSession>(session(c));
            s->run_until(c.total_iterations());
            it = runs_.emplace(key, std::move(s)).first;
        }
        return *it->second;
    }

private:
    std::map<std::uint64_t, std::shared_ptr<const ShiftDataset>> data_;
    std::map<std::uint64_t, NamedParams> anchors_;
    std::map<std::pair<int, std::uint64_t>, std::unique_ptr<FinetuneSession>> runs_;
};

double row_l1(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]);
    return s;
}

double max_row_l1(const DenseMatrix& a, const DenseMatrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) worst = std::max(worst, row_l1(a.row(i), b.row(i)));
    return worst;
}

double max_row_l1(const DenseMatrix& a) { return max_row_l1(a, DenseMatrix(a.rows(), a.cols())); }

// ------------------------------------------------------------------------

Outcome constraint_satisfaction(Bench& bench) {
    const auto start = Clock::now();
    ExperimentConfig c = bench.config(0);
    c.iterations = 200;
    FinetuneSession s = bench.session(c);
    const std::vector<std::string> names = s.constrained_names();
    double worst = -std::numeric_limits<double>::infinity();
    std::size_t checks = 0;
    s.run_until(c.iterations, [&](const FinetuneSession& sess, const IterationRow& row) {
        for (const auto& p : sess.params()) {
            const auto at = std::find(names.begin(), names.end(), p.name);
            if (at == names.end()) continue;
            const double gamma = row.gammas.at(static_cast<std::size_t>(at - names.begin()));
            worst = std::max(worst, max_row_l1(p.value, p.anchor) - gamma);
            ++checks;
        }
    });
    const double secs = seconds_since(start);
    const bool ok = checks == 200 * names.size() && worst <= 1e-9 && secs < 60.0;
    return {ok, fmt::format("{} tensor checks, worst mars(W-W0)-gamma {:.3e}, runtime {:.1f}s",
                            checks, worst, secs)};
}

Outcome hypergradient_vs_finite_differences() {
    SeededRng rng(2024);
    double worst = 0.0;
    double smallest = std::numeric_limits<double>::infinity();
    const int instances = 60;
    for (int k = 0; k < instances; ++k) {
        MlpSpec spec;
        spec.widths = {3 + rng.uniform_index(4), 4 + rng.uniform_index(5), 2 + rng.uniform_index(4)};
        spec.activations = {Activation::kTanh};
        spec.loss = (k % 2) ? LossKind::kMeanSquaredError : LossKind::kSoftmaxCrossEntropy;
        const NamedParams anchor = testing::random_params(spec, rng);
        const Batch batch = testing::random_batch(spec, 8, rng);
        const std::size_t slot = rng.uniform_index(anchor.size());
        const DenseMatrix& w0 = anchor[slot].value;
        const DenseMatrix w_tilde = w0 + sample_normal(rng, w0.rows(), w0.cols(), 0.0, 0.5);
        double min_dist = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < w0.rows(); ++i) {
            min_dist = std::min(min_dist, row_l1(w_tilde.row(i), w0.row(i)));
        }
        const double gamma = (0.2 + 0.6 * rng.uniform()) * min_dist;  // every row active

        auto loss_at = [&](double g) {
            NamedParams p = anchor;
            p[slot].value = project_rows(w_tilde, w0, g);
            return loss(spec, p, batch);
        };
        NamedParams at = anchor;
        at[slot].value = project_rows(w_tilde, w0, gamma);
        const DenseMatrix grad = backward(spec, at, batch).grads[slot].value;
        const double analytic = hyper_gradient(grad, w_tilde, w0, gamma);
        const double h = 1e-4 * gamma;
        const double fd = (loss_at(gamma + h) - loss_at(gamma - h)) / (2.0 * h);
        smallest = std::min(smallest, std::abs(fd));
        worst = std::max(worst, std::abs(analytic - fd) / std::max(std::abs(fd), 1e-300));
    }
    return {worst < 1e-4, fmt::format("{} instances, max relative error {:.2e} (smallest |grad| {:.2e})",
                                      instances, worst, smallest)};
}

Outcome adam_update_fidelity() {
    SeededRng rng(7);
    double worst = 0.0;
    int floored = 0;
    const int sequences = 50;
    for (int s = 0; s < sequences; ++s) {
        // Half the sequences start from the default radius and are driven
        // below zero, the other half stay well inside the positive range.
        GammaState lib;
        lib.gamma = (s % 2) ? 1.0 : kInitialGamma;
        double gamma = lib.gamma, m = 0.0, v = 0.0;
        const double mu = 1e-2, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        const double scale = std::pow(10.0, -3.0 + 4.0 * rng.uniform());
        const double drift = (s % 4 == 0) ? scale : 0.0;
        for (int t = 1; t <= 100; ++t) {
            const double g = drift + scale * rng.normal();
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g * g;
            const double m_hat = m / (1.0 - std::pow(beta1, t));
            const double v_hat = v / (1.0 - std::pow(beta2, t));
            const double ref = gamma - mu * m_hat / (std::sqrt(v_hat) + eps);
            lib = adam_update_gamma(lib, g);
            worst = std::max(worst, std::abs(lib.unclamped_gamma - ref));
            if (ref < 0.0) ++floored;
            gamma = std::max(ref, 0.0);
            if (lib.gamma != gamma) worst = std::max(worst, std::abs(lib.gamma - gamma));
        }
    }
    return {worst < 1e-12,
            fmt::format("{} sequences x 100 steps, max |gamma - reference| {:.2e} ({} floored steps)",
                        sequences, worst, floored)};
}

Outcome annealing_semantics(Bench& bench) {
    ExperimentConfig c = bench.config(0);
    c.kappa = 0.0;
    FinetuneSession s = bench.session(c);
    s.run_until(c.total_iterations());
    std::size_t decreases = 0;
    const auto& rows = s.record().rows;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        for (std::size_t g = 0; g < rows[i].gammas.size(); ++g) {
            decreases += rows[i].gammas[g] < rows[i - 1].gammas[g];
        }
    }
    std::size_t rises = 0, falls = 0;
    int runs_with_both = 0;
    for (int seed = 0; seed < kSeeds; ++seed) {
        const auto& r = bench.finished(Method::kFtp, seed).record().rows;
        bool any_fall = false, any_rise = false;
        for (std::size_t i = 1; i < r.size(); ++i) {
            for (std::size_t g = 0; g < r[i].gammas.size(); ++g) {
                if (r[i].gammas[g] > r[i - 1].gammas[g]) ++rises, any_rise = true;
                if (r[i].gammas[g] < r[i - 1].gammas[g]) ++falls, any_fall = true;
            }
        }
        runs_with_both += any_rise && any_fall;
    }
    return {decreases == 0 && runs_with_both > 0,
            fmt::format("k=0: {} decreases over {} iterations; k=1: {} rises, {} falls, "
                        "{}/{} runs both rise and fall",
                        decreases, rows.size(), rises, falls, runs_with_both, kSeeds)};
}

Outcome gradient_reuse(Bench& bench) {
    const std::uint64_t t = 100;
    bool counts_ok = true;
    std::string counts;
    for (const auto& [method, inner] :
         std::vector<std::pair<Method, std::size_t>>{{Method::kFtp, 0}, {Method::kTpgm, 1},
                                                     {Method::kTpgm, 3}}) {
        ExperimentConfig c = bench.config(0);
        c.method = method;
        if (inner > 0) c.tpgm_inner_iters = inner;
        FinetuneSession s = bench.session(c);
        s.run_until(t);
        const std::uint64_t expected = t * (1 + inner);
        bool per_iter = true;
        for (std::size_t i = 0; i < s.record().rows.size(); ++i) {
            per_iter = per_iter && s.record().rows[i].bwd_count == (i + 1) * (1 + inner) &&
                       s.record().rows[i].fwd_count == (i + 1) * (1 + inner);
        }
        counts_ok = counts_ok && per_iter && s.passes().backward == expected;
        counts += fmt::format("{}{} {} passes; ", to_string(method),
                              method == Method::kTpgm ? fmt::format("({})", inner) : "",
                              s.passes().backward);
    }

    auto timed = [&](Method method) {
        ExperimentConfig c = bench.config(0);
        c.method = method;
        FinetuneSession s = bench.session(c);
        s.run_until(10);  // warm up
        const auto start = Clock::now();
        s.run_until(10 + t);
        return seconds_since(start) / static_cast<double>(t);
    };
    std::vector<double> ratios;
    for (int trial = 0; trial < 5; ++trial) {
        const double ftp = timed(Method::kFtp);
        const double tpgm = timed(Method::kTpgm);
        ratios.push_back(ftp / tpgm);
    }
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    return {counts_ok && median < 0.85,
            fmt::format("{}wall-clock FTP/TPGM(1) over 100 iterations: median {:.3f} of "
                        "[{:.3f}]",
                        counts, median, fmt::join(ratios, ", "))};
}

bool same_trajectory(const FinetuneSession& a, const FinetuneSession& b) {
    if (a.record().rows.size() != b.record().rows.size()) return false;
    for (std::size_t i = 0; i < a.record().rows.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a.record().rows[i].loss) !=
            std::bit_cast<std::uint64_t>(b.record().rows[i].loss)) {
            return false;
        }
    }
    return values_of(a.params()).bitwise_equal(values_of(b.params()));
}

Outcome degenerate_equivalences(Bench& bench) {
    const std::size_t t = 200;
    std::vector<std::string> parts;
    bool all = true;
    auto compare = [&](const std::string& label, ExperimentConfig lhs, ExperimentConfig rhs) {
        lhs.iterations = rhs.iterations = t;
        FinetuneSession a = bench.session(lhs), b = bench.session(rhs);
        a.run_until(t);
        b.run_until(t);
        const bool same = same_trajectory(a, b);
        all = all && same;
        parts.push_back(fmt::format("{} {}", label, same ? "identical" : "DIFFERS"));
    };

    for (const char* opt : {"sgd", "adamw"}) {
        ExperimentConfig ft = bench.config(0);
        ft.method = Method::kFt;
        ft.optimizer = opt;
        if (ft.optimizer == "adamw") ft.opt.lr = 1e-3;
        ExperimentConfig ftp = ft;
        ftp.method = Method::kFtp;
        ftp.exclude_set = {"*"};
        compare(fmt::format("ftp(exclude all, {}) vs {}", opt, opt), ftp, ft);
    }
    {
        ExperimentConfig ft = bench.config(0);
        ft.method = Method::kFt;
        ExperimentConfig mars = ft;
        mars.method = Method::kMarsSp;
        mars.mars_sp_gamma = std::numeric_limits<double>::infinity();
        compare("mars-sp(inf) vs ft", mars, ft);
    }
    {
        ExperimentConfig sgd = bench.config(0);
        sgd.method = Method::kFt;
        sgd.opt.momentum = 0.0;
        ExperimentConfig hyper = sgd;
        hyper.method = Method::kHyperSgd;
        hyper.hyper_kappa = 0.0;
        hyper.hyper_alpha0 = sgd.opt.lr;
        compare("hyper-sgd(k=0) vs sgd", hyper, sgd);
    }
    return {all, fmt::format("{} iterations: {}", t, fmt::join(parts, "; "))};
}

Outcome lipschitz_audit() {
    SeededRng rng(99);
    const int instances = 100;
    const std::size_t pairs = 10000;
    double worst_ratio_excess = -std::numeric_limits<double>::infinity();
    double worst_attain = 0.0;
    double worst_projected = -std::numeric_limits<double>::infinity();
    bool library_holds = true;
    for (int k = 0; k < instances; ++k) {
        const std::size_t m = 2 + rng.uniform_index(15), n = 1 + rng.uniform_index(8);
        MlpSpec spec;
        spec.widths = {m, n};
        NamedParams w0 = testing::random_params(spec, rng);
        NamedParams wf = w0;
        wf.at(weight_name(0)) += sample_normal(rng, n, m, 0.0, 0.3);
        wf.at(bias_name(0)) += sample_normal(rng, 1, n, 0.0, 0.3);
        const DenseMatrix& a0 = w0.at(weight_name(0));
        const DenseMatrix& af = wf.at(weight_name(0));
        const double l_d = max_row_l1(af, a0);
        const double l_0 = max_row_l1(a0);

        PairSampler lib_sampler(m, 1000 + k);
        lib_sampler.add_sign_directions(af - a0);
        const LipschitzReport report = verify_lemma1_bound(spec, wf, w0, lib_sampler, pairs);
        library_holds = library_holds && report.holds;

        // Same pairs again, ratios recomputed with plain loops.
        PairSampler sampler(m, 1000 + k);
        sampler.add_sign_directions(af - a0);
        double diff_lb = 0.0;
        for (std::size_t p = 0; p < pairs; ++p) {
            const InputPair pair = sampler.next();
            double dx = 0.0;
            for (std::size_t j = 0; j < m; ++j) dx = std::max(dx, std::abs(pair.x[j] - pair.x_prime[j]));
            if (dx == 0.0) continue;
            double dh = 0.0, dd = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double hf = 0.0, hd = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    const double d = pair.x[j] - pair.x_prime[j];
                    hf += af(i, j) * d;
                    hd += (af(i, j) - a0(i, j)) * d;
                }
                dh = std::max(dh, std::abs(hf));
                dd = std::max(dd, std::abs(hd));
            }
            worst_ratio_excess = std::max(worst_ratio_excess, dh / dx - (l_d + l_0));
            diff_lb = std::max(diff_lb, dd / dx);
        }
        worst_attain = std::max({worst_attain, std::abs(diff_lb - l_d),
                                 std::abs(report.diff_lower_bound - l_d)});

        const double gamma = l_d * rng.uniform();
        const DenseMatrix projected = project_rows(af, a0, gamma);
        worst_projected = std::max(worst_projected, max_row_l1(projected, a0) - gamma);
        PairSampler post(m, 5000 + k);
        post.add_sign_directions(projected - a0);
        worst_projected = std::max(
            worst_projected, estimate_diff_lipschitz_lb(projected, a0, post, 1000) - gamma);
    }
    const bool ok = library_holds && worst_ratio_excess <= 1e-12 && worst_attain <= 1e-9 &&
                    worst_projected <= 1e-9;
    return {ok, fmt::format("{} layers x {} pairs: max ratio-(L_d+L_0) {:.2e}, "
                            "|sampled L_d - mars| {:.2e}, post-projection L_d-gamma {:.2e}",
                            instances, pairs, worst_ratio_excess, worst_attain, worst_projected)};
}

Outcome robustness_retention(Bench& bench) {
    double ft_id = 0, ft_ood = 0, ftp_id = 0, ftp_ood = 0;
    std::vector<std::string> per_seed;
    for (int seed = 0; seed < kSeeds; ++seed) {
        const AccuracyTable a = bench.finished(Method::kFt, seed).evaluate_now();
        const AccuracyTable b = bench.finished(Method::kFtp, seed).evaluate_now();
        ft_id += a.id / kSeeds;
        ft_ood += a.ood_average / kSeeds;
        ftp_id += b.id / kSeeds;
        ftp_ood += b.ood_average / kSeeds;
        per_seed.push_back(fmt::format("{:+.2f}", 100.0 * (b.ood_average - a.ood_average)));
    }
    const double id_gap = 100.0 * (ftp_id - ft_id);
    const bool ok = ftp_ood >= ft_ood && std::abs(id_gap) <= 2.0;
    return {ok, fmt::format("{} seeds: OOD ft {:.4f} ftp {:.4f} (per-seed pp [{}]); ID ft {:.4f} "
                            "ftp {:.4f}, |gap| {:.2f}pp, ftp-ft {:+.2f}pp",
                            kSeeds, ft_ood, ftp_ood, fmt::join(per_seed, " "), ft_id, ftp_id,
                            std::abs(id_gap), id_gap)};
}

Outcome gamma_trajectory(Bench& bench) {
    bool all = true;
    std::vector<std::string> parts;
    for (int seed = 0; seed < kSeeds; ++seed) {
        const auto& rows = bench.finished(Method::kFtp, seed).record().rows;
        std::vector<double> mean;
        for (const auto& r : rows) {
            double s = 0.0;
            for (double g : r.gammas) s += g;
            mean.push_back(s / static_cast<double>(r.gammas.size()));
        }
        const std::size_t t = mean.size();
        double peak_step = 0.0, peak_level = 0.0;
        for (std::size_t i = 0; i < t; ++i) {
            const double prev = i ? mean[i - 1] : kInitialGamma;
            peak_step = std::max(peak_step, std::abs(mean[i] - prev));
            peak_level = std::max(peak_level, std::abs(mean[i] - kInitialGamma));
        }
        const std::size_t tail = t - t / 10;
        double tail_change = 0.0;
        for (std::size_t i = tail; i < t; ++i) tail_change += std::abs(mean[i] - mean[i - 1]);
        tail_change /= static_cast<double>(t - tail);
        const double at_tenth = mean[t / 10 - 1], at_end = mean[t - 1];
        const bool ok = at_end > at_tenth && tail_change < 0.1 * peak_step &&
                        tail_change < 0.1 * peak_level;
        all = all && ok;
        parts.push_back(fmt::format("seed {} {:.3f}->{:.3f}, tail/peak-step {:.3f}", seed,
                                    at_tenth, at_end, tail_change / peak_step));
    }
    return {all, fmt::format("mean gamma at T/10 -> T; {}", fmt::join(parts, "; "))};
}

Outcome hyper_sign_law() {
    SeededRng rng(31);
    NamedParams init;
    init.add("a", sample_normal(rng, 3, 4, 0.0, 1.0));
    init.add("b", sample_normal(rng, 1, 5, 0.0, 1.0));
    ParamSet params = make_param_set(init);
    HyperLrState state;
    state.alpha = 0.05;
    state.kappa = 1e-3;
    std::vector<DenseMatrix> prev;
    int positive = 0, violations = 0;
    double expected_alpha = state.alpha;
    for (int step = 0; step < 1000; ++step) {
        std::vector<DenseMatrix> grads;
        const double rho = rng.uniform() < 0.5 ? 1.0 : -1.0;
        for (std::size_t k = 0; k < params.size(); ++k) {
            DenseMatrix g = sample_normal(rng, params[k].value.rows(), params[k].value.cols(), 0.0, 0.2);
            if (!prev.empty()) g += rho * prev[k];
            params[k].grad = g;
            grads.push_back(std::move(g));
        }
        double inner = 0.0;
        if (!prev.empty()) {
            for (std::size_t k = 0; k < grads.size(); ++k) {
                for (std::size_t i = 0; i < grads[k].size(); ++i) {
                    inner += grads[k].values()[i] * prev[k].values()[i];
                }
            }
        }
        const double before = state.alpha;
        hyper_sgd_lr_step(state, params);
        if (!prev.empty()) expected_alpha = std::max(expected_alpha + 1e-3 * inner, kMinLearningRate);
        const bool increased = state.alpha > before;
        const bool should = !prev.empty() && inner > 0.0;
        positive += should;
        violations += (increased != should) || state.alpha != expected_alpha;
        prev = std::move(grads);
    }
    return {violations == 0 && positive > 0 && positive < 999,
            fmt::format("1000 steps, {} positive inner products, {} violations, final alpha {:.4g}",
                        positive, violations, state.alpha)};
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string csv_without_timing(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::string line, out;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        for (int col = 0; std::getline(ss, cell, ','); ++col) {
            if (col != 2) out += (col ? "," : "") + cell;
        }
        out += '\n';
    }
    return out;
}

bool same_state(Checkpoint a, Checkpoint b) {
    a.extra.at("history.secs_per_iter").fill(0.0);
    b.extra.at("history.secs_per_iter").fill(0.0);
    return bitwise_equal(a, b);
}

Outcome persistence(Bench& bench) {
    const fs::path root = fs::temp_directory_path() / "ftpkit-acceptance";
    fs::remove_all(root);
    std::vector<std::string> parts;
    bool all = true;
    for (Method method : {Method::kFtp, Method::kTpgm}) {
        ExperimentConfig c = bench.config(0);
        c.method = method;
        c.iterations = 200;
        c.pretrained_path = (root / "pretrained.ckpt").string();
        if (!fs::exists(c.pretrained_path)) {
            fs::create_directories(root);
            save_checkpoint(make_pretrained_checkpoint(c, bench.anchor(0)), c.pretrained_path);
        }
        RunOptions no_pretrain;
        no_pretrain.pretrain_if_missing = false;

        ExperimentConfig a = c, b = c, r = c;
        a.output_dir = (root / to_string(method) / "a").string();
        b.output_dir = (root / to_string(method) / "b").string();
        r.output_dir = (root / to_string(method) / "resumed").string();
        run_experiment(a, no_pretrain);
        run_experiment(b, no_pretrain);
        r.iterations = 100;
        run_experiment(r, no_pretrain);
        r.iterations = 200;
        RunOptions resume = no_pretrain;
        resume.resume = true;
        run_experiment(r, resume);

        const fs::path ck = fs::path(a.output_dir) / "finetune.ckpt";
        const Checkpoint loaded = load_checkpoint(ck);
        const fs::path again = root / "again.ckpt";
        save_checkpoint(loaded, again);
        const bool round_trip =
            bitwise_equal(loaded, load_checkpoint(again)) && read_file(ck) == read_file(again);
        const bool resumed =
            same_state(loaded, load_checkpoint(fs::path(r.output_dir) / "finetune.ckpt")) &&
            csv_without_timing(fs::path(a.output_dir) / "metrics.csv") ==
                csv_without_timing(fs::path(r.output_dir) / "metrics.csv");
        const bool repeat = csv_without_timing(fs::path(a.output_dir) / "metrics.csv") ==
                                csv_without_timing(fs::path(b.output_dir) / "metrics.csv") &&
                            same_state(loaded, load_checkpoint(fs::path(b.output_dir) / "finetune.ckpt"));
        all = all && round_trip && resumed && repeat;
        parts.push_back(fmt::format("{}: round-trip {}, resume@100 {}, rerun {}", to_string(method),
                                    round_trip ? "bitwise" : "DIFFERS",
                                    resumed ? "bitwise" : "DIFFERS",
                                    repeat ? "byte-identical" : "DIFFERS"));
    }
    fs::remove_all(root);
    return {all, fmt::format("{}", fmt::join(parts, "; "))};
}

}  // namespace

int main() {
    Bench bench;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"constraint satisfaction", [&] { return constraint_satisfaction(bench); }},
        {"hyper-gradient correctness", hypergradient_vs_finite_differences},
        {"AdamUpdate fidelity", adam_update_fidelity},
        {"annealing semantics", [&] { return annealing_semantics(bench); }},
        {"gradient-reuse efficiency", [&] { return gradient_reuse(bench); }},
        {"degenerate equivalences", [&] { return degenerate_equivalences(bench); }},
        {"Lipschitz audit", lipschitz_audit},
        {"robustness retention", [&] { return robustness_retention(bench); }},
        {"gamma trajectory shape", [&] { return gamma_trajectory(bench); }},
        {"hyper-optimizer sign law", hyper_sign_law},
        {"persistence and determinism", [&] { return persistence(bench); }},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome out;
        const auto start = Clock::now();
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, fmt::format("exception: {}", e.what())};
        }
        failures += !out.pass;
        fmt::print("{} [{}] {}: {} ({:.1f}s)\n", out.pass ? "PASS" : "FAIL", i + 1,
                   criteria[i].first, out.detail, seconds_since(start));
        std::fflush(stdout);
    }
    fmt::print("{}/{} criteria passed\n", criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
