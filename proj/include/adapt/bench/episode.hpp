#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "adapt/bench/dataset.hpp"
#include "adapt/evaluate.hpp"
#include "adapt/loss.hpp"
#include "adapt/optimizer.hpp"
#include "adapt/task.hpp"

namespace adapt {

struct EpisodeSpec {
    int n_way = 10;
    int k_shot = 5;
    int test_per_class = 20;
    int seeds = 5;

    void validate() const {
        if (n_way < 2) throw ConfigError("episode.n_way", "must be at least 2");
        if (k_shot < 1) throw ConfigError("episode.k_shot", "must be positive");
        if (test_per_class < 1) throw ConfigError("episode.test_per_class", "must be positive");
        if (seeds < 1) throw ConfigError("episode.seeds", "must be positive");
    }
};

/// An adaptation task with its held-out test set. Support and test rows are
/// indices into the source dataset; `classes[c]` is the dataset class that
/// became episode class c.
struct Episode {
    AdaptTask task;
    TestSet test;
    std::vector<int> classes;
    std::vector<std::size_t> support_rows;
    std::vector<std::size_t> test_rows;
};

/// Uses every class when the dataset has exactly n_way of them, otherwise a
/// seeded subset (relabeled in increasing dataset-class order). Per class,
/// the first k_shot rows of a seeded shuffle form the support and the next
/// test_per_class the test set. D_u holds the test features in shuffled
/// order.
inline Episode sample_episode(const EmbeddingDataset& ds, const EpisodeSpec& spec, std::uint64_t seed) {
    spec.validate();
    ds.validate();
    const auto by_class = ds.rows_by_class();
    const int n_classes = static_cast<int>(by_class.size());
    if (n_classes < spec.n_way)
        throw DataError("episode: dataset has " + std::to_string(n_classes) + " classes, need " + std::to_string(spec.n_way));
    Rng rng(seed);
    Episode ep;
    if (n_classes == spec.n_way) {
        ep.classes.resize(static_cast<std::size_t>(n_classes));
        std::iota(ep.classes.begin(), ep.classes.end(), 0);
    } else {
        const auto perm = rng.permutation(static_cast<std::size_t>(n_classes));
        for (int c = 0; c < spec.n_way; ++c) ep.classes.push_back(static_cast<int>(perm[static_cast<std::size_t>(c)]));
        std::sort(ep.classes.begin(), ep.classes.end());
    }
    const auto need = static_cast<std::size_t>(spec.k_shot + spec.test_per_class);
    Labels support_labels, test_labels;
    for (int c = 0; c < spec.n_way; ++c) {
        const int cls = ep.classes[static_cast<std::size_t>(c)];
        auto rows = by_class[static_cast<std::size_t>(cls)];
        if (rows.size() < need)
            throw DataError("episode: class " + std::to_string(cls) + " has " + std::to_string(rows.size()) +
                            " examples, need " + std::to_string(need));
        rng.shuffle(rows);
        for (std::size_t i = 0; i < need; ++i) {
            const bool support = i < static_cast<std::size_t>(spec.k_shot);
            (support ? ep.support_rows : ep.test_rows).push_back(rows[i]);
            (support ? support_labels : test_labels).push_back(c);
        }
    }
    ep.task.n_way = spec.n_way;
    ep.task.k_shot = spec.k_shot;
    ep.task.labeled = gather_rows(ds.features, ep.support_rows);
    ep.task.labels = std::move(support_labels);
    ep.test = {gather_rows(ds.features, ep.test_rows), std::move(test_labels)};
    auto order = ep.test_rows;
    rng.shuffle(order);
    ep.task.unlabeled = gather_rows(ds.features, order);
    return ep;
}

struct PretrainOptions {
    double lr = 1e-2;
    int batch_size = 64;
    double decay = 1e-5;
};

/// Supervised training of `model` on the whole dataset: Adam, train-mode
/// BatchNorm with running statistics updated every step.
inline Model<float> pretrain_source(const EmbeddingDataset& ds, Model<float> model, int epochs, std::uint64_t seed,
                                    const PretrainOptions& opt = {}) {
    ds.validate();
    if (ds.n_classes() < 2) throw DataError("pretrain: need at least 2 classes");
    if (epochs < 0) throw ConfigError("epochs", "must be non-negative");
    if (model.input_width != ds.features.cols())
        throw ShapeError("pretrain: model input width " + std::to_string(model.input_width) + " != dataset width " +
                         std::to_string(ds.features.cols()));
    if (model.n_classes() < ds.n_classes())
        throw ShapeError("pretrain: model has " + std::to_string(model.n_classes()) + " classes, dataset " +
                         std::to_string(ds.n_classes()));
    Rng rng(seed);
    const OptimizerSpec spec{OptimizerKind::adam, opt.lr, opt.lr, 0.9, opt.decay};
    auto state = OptimizerState<float>::for_model(model);
    const auto n = static_cast<std::size_t>(ds.features.rows());
    const auto bs = static_cast<std::size_t>(std::max(2, opt.batch_size));
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        const auto perm = rng.permutation(n);
        for (std::size_t i = 0; i < n; i += bs) {
            // A trailing batch of one row has no batch variance; fold it into the previous one.
            if (n - i < 2 && i > 0) break;
            const std::span<const std::size_t> idx(perm.data() + i, std::min(n, i + bs) - i);
            ForwardCache<float> cache;
            const Matrix scores = forward_cached(model, gather_rows(ds.features, idx), Mode::train, cache);
            const auto lg = cross_entropy(scores, gather_labels(ds.labels, idx));
            if (!std::isfinite(lg.loss)) throw DivergenceError("pretrain", epoch);
            const auto grads = backward(model, cache, lg.grad);
            update_running_stats(model, cache);
            optimizer_step(model, grads, spec, state);
        }
    }
    return model;
}

}  // namespace adapt
