// Copyright 2026 The ftpkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ftpkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "ftpkit/errors.hpp"

namespace ftpkit {
namespace {

enum Stream : std::uint64_t {
    kCentres = 1,
    kTrain = 2,
    kTest = 3,
    kSubsample = 4,
    kDirection = 5,
    kShiftBase = 100,
};

struct Drawn {
    LabeledSet set;
    std::vector<std::size_t> cluster;
};

std::vector<double> unit_vector(SeededRng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    while (norm == 0.0) {
        for (double& x : v) x = rng.normal();
        norm = std::sqrt(dot(v, v));
    }
    for (double& x : v) x /= norm;
    return v;
}

Drawn draw_split(const DatasetSpec& spec, const std::vector<DenseMatrix>& centres,
                 std::size_t n, SeededRng& rng) {
    Drawn out;
    out.set.inputs = DenseMatrix(n, spec.dim);
    out.set.labels.resize(n);
    out.cluster.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % spec.classes;
        const std::size_t k = rng.uniform_index(spec.clusters_per_class);
        out.set.labels[i] = static_cast<int>(c);
        out.cluster[i] = k;
        auto row = out.set.inputs.row(i);
        const auto centre = centres[c].row(k);
        for (std::size_t j = 0; j < spec.dim; ++j) row[j] = centre[j] + spec.noise * rng.normal();
    }
    return out;
}

// Largest-remainder apportionment of `total` over `weights`.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
        const double exact = static_cast<double>(total) * weights[c] / sum;
        counts[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[c];
        remainders.emplace_back(-(exact - std::floor(exact)), c);
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[remainders[i].second];
    return counts;
}

LabeledSet gather(const LabeledSet& from, const std::vector<std::size_t>& rows) {
    LabeledSet out;
    out.inputs = DenseMatrix(rows.size(), from.inputs.cols());
    out.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(from.inputs.row(rows[i]).begin(), from.inputs.row(rows[i]).end(),
                  out.inputs.row(i).begin());
        out.labels[i] = from.labels[rows[i]];
    }
    return out;
}

template <typename T>
void shuffle(std::vector<T>& v, SeededRng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

}  // namespace

std::string_view to_string(ShiftKind kind) {
    switch (kind) {
        case ShiftKind::kRotation: return "rotation";
        case ShiftKind::kTranslation: return "translation";
        case ShiftKind::kAdditiveNoise: return "additive-noise";
        case ShiftKind::kFeatureDropout: return "feature-dropout";
    }
    return "unknown";
}

ShiftKind parse_shift_kind(std::string_view name) {
    for (ShiftKind k : kShiftKinds) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError(fmt::format("unknown shift kind '{}'", name));
}

void DatasetSpec::validate() const {
    auto require = [](bool ok, std::string_view what) {
        if (!ok) throw ConfigError(fmt::format("dataset: {}", what));
    };
    require(dim >= 1, "dim must be >= 1");
    require(classes >= 2, "classes must be >= 2");
    require(clusters_per_class >= 1, "clusters_per_class must be >= 1");
    require(train_size >= classes && test_size >= classes, "each split needs every class");
    require(std::isfinite(separation) && separation >= 0.0, "separation must be >= 0");
    require(std::isfinite(noise) && noise > 0.0, "noise must be > 0");
    require(finetune_size >= 1 && val_size >= 1, "finetune_size and val_size must be >= 1");
    require(finetune_fraction > 0.0 && finetune_fraction <= 1.0,
            "finetune_fraction must lie in (0, 1]");
    require(label_skew > 0.0 && label_skew <= 1.0, "label_skew must lie in (0, 1]");
    for (double s : {rotation_step, translation_step, noise_step, dropout_step}) {
        require(std::isfinite(s) && s >= 0.0, "shift steps must be finite and >= 0");
    }
}

std::string DatasetSpec::canonical_string() const {
    return fmt::format(
        "dim={};classes={};clusters={};train={};test={};sep={};noise={};ft={};val={};"
        "frac={};skew={};rot={};trans={};nstep={};drop={}",
        dim, classes, clusters_per_class, train_size, test_size, separation, noise,
        finetune_size, val_size, finetune_fraction, label_skew, rotation_step, translation_step,
        noise_step, dropout_step);
}

const LabeledSet& ShiftDataset::split(ShiftKind kind, int severity) const {
    if (severity == 0) return test;
    const auto it = ood.find({kind, severity});
    if (it == ood.end()) {
        throw DomainError(fmt::format("no split for {} at severity {}", to_string(kind), severity));
    }
    return it->second;
}

LabeledSet apply_shift(const LabeledSet& clean, ShiftKind kind, int severity,
                       const DatasetSpec& spec, const std::vector<double>& direction,
                       SeededRng& rng) {
    if (severity < 0 || severity > kSeverityLevels) {
        throw DomainError(fmt::format("severity {} outside 0..{}", severity, kSeverityLevels));
    }
    LabeledSet out = clean;
    if (severity == 0) return out;
    const double s = static_cast<double>(severity);
    const std::size_t dim = out.inputs.cols();
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto x = out.inputs.row(i);
        switch (kind) {
            case ShiftKind::kRotation: {
                const double c = std::cos(s * spec.rotation_step);
                const double sn = std::sin(s * spec.rotation_step);
                for (std::size_t j = 0; j + 1 < dim; j += 2) {
                    const double a = x[j], b = x[j + 1];
                    x[j] = c * a - sn * b;
                    x[j + 1] = sn * a + c * b;
                }
                break;
            }
            case ShiftKind::kTranslation:
                for (std::size_t j = 0; j < dim; ++j) x[j] += s * spec.translation_step * direction[j];
                break;
            case ShiftKind::kAdditiveNoise:
                for (double& v : x) v += s * spec.noise_step * rng.normal();
                break;
            case ShiftKind::kFeatureDropout: {
                const double p = std::min(1.0, s * spec.dropout_step);
                for (double& v : x) {
                    if (rng.uniform() < p) v = 0.0;
                }
                break;
            }
        }
    }
    return out;
}

ShiftDataset generate_shift_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    spec.validate();
    const SeededRng root(seed);
    ShiftDataset ds;
    ds.spec = spec;
    ds.seed = seed;

    SeededRng centre_rng = root.derive(kCentres);
    std::vector<DenseMatrix> centres;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        DenseMatrix m(spec.clusters_per_class, spec.dim);
        for (std::size_t k = 0; k < spec.clusters_per_class; ++k) {
            const auto u = unit_vector(centre_rng, spec.dim);
            for (std::size_t j = 0; j < spec.dim; ++j) m(k, j) = spec.separation * u[j];
        }
        centres.push_back(std::move(m));
    }

    SeededRng train_rng = root.derive(kTrain);
    const Drawn train = draw_split(spec, centres, spec.train_size, train_rng);
    ds.train = train.set;
    SeededRng test_rng = root.derive(kTest);
    ds.test = draw_split(spec, centres, spec.test_size, test_rng).set;

    // Narrow pool: per class, the samples nearest their own cluster centre.
    std::vector<double> weights(spec.classes);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        weights[c] = std::pow(spec.label_skew, static_cast<double>(c));
    }
    const auto ft_counts = apportion(spec.finetune_size, weights);
    const auto val_counts = apportion(spec.val_size, weights);
    SeededRng pick_rng = root.derive(kSubsample);
    std::vector<std::size_t> ft_rows, val_rows;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        std::vector<std::pair<double, std::size_t>> by_distance;
        for (std::size_t i = 0; i < train.set.size(); ++i) {
            if (static_cast<std::size_t>(train.set.labels[i]) != c) continue;
            const auto x = train.set.inputs.row(i);
            const auto centre = centres[c].row(train.cluster[i]);
            double d = 0.0;
            for (std::size_t j = 0; j < spec.dim; ++j) d += (x[j] - centre[j]) * (x[j] - centre[j]);
            by_distance.emplace_back(d, i);
        }
        std::sort(by_distance.begin(), by_distance.end());
        const auto keep = static_cast<std::size_t>(
            std::ceil(spec.finetune_fraction * static_cast<double>(by_distance.size())));
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < keep; ++i) pool.push_back(by_distance[i].second);
        if (pool.size() < ft_counts[c] + val_counts[c]) {
            throw ConfigError(fmt::format(
                "dataset: class {} needs {} fine-tuning samples but its pool holds {}", c,
                ft_counts[c] + val_counts[c], pool.size()));
        }
        shuffle(pool, pick_rng);
        ft_rows.insert(ft_rows.end(), pool.begin(), pool.begin() + ft_counts[c]);
        val_rows.insert(val_rows.end(), pool.begin() + ft_counts[c],
                        pool.begin() + ft_counts[c] + val_counts[c]);
    }
    std::sort(ft_rows.begin(), ft_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
    ds.finetune = gather(train.set, ft_rows);
    ds.validation = gather(train.set, val_rows);

    SeededRng dir_rng = root.derive(kDirection);
    const std::vector<double> direction = unit_vector(dir_rng, spec.dim);
    for (ShiftKind kind : kShiftKinds) {
        for (int sev = 1; sev <= kSeverityLevels; ++sev) {
            SeededRng shift_rng =
                root.derive(kShiftBase + 16 * static_cast<std::uint64_t>(kind) + sev);
            ds.ood.emplace(std::make_pair(kind, sev),
                           apply_shift(ds.test, kind, sev, spec, direction, shift_rng));
        }
    }
    return ds;
}

Batch sample_batch(const LabeledSet& set, std::size_t batch_size, SeededRng& rng) {
    if (set.size() == 0) throw ConfigError("cannot sample from an empty split");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    Batch b;
    b.inputs = DenseMatrix(batch_size, set.inputs.cols());
    b.labels.resize(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const std::size_t r = rng.uniform_index(set.size());
        std::copy(set.inputs.row(r).begin(), set.inputs.row(r).end(), b.inputs.row(i).begin());
        b.labels[i] = set.labels[r];
    }
    return b;
}

}  // namespace ftpkit
