#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "adapt/evaluate.hpp"
#include "adapt/parallel.hpp"
#include "adapt/pipeline.hpp"
#include "adapt/search/space.hpp"

namespace adapt {

struct CVProtocol {
    int folds = 5;
    double train_fraction = 0.5;

    void validate() const {
        if (folds < 2) throw ConfigError("protocol.folds", "need at least 2 folds");
        if (!(train_fraction > 0 && train_fraction < 1)) throw ConfigError("protocol.train_fraction", "must lie in (0, 1)");
    }
};

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// Training examples per class in every fold: floor(k * fraction), kept
/// within [1, k - 1].
inline int fold_train_count(int k_shot, double fraction) {
    return std::clamp(static_cast<int>(std::floor(k_shot * fraction + 1e-9)), 1, std::max(1, k_shot - 1));
}

/// Independent stratified splits: per fold, each class's rows are shuffled
/// and the first fold_train_count go to training, the rest to validation.
inline std::vector<Fold> make_folds(const Labels& labels, int n_way, const CVProtocol& protocol, std::uint64_t seed) {
    protocol.validate();
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n_way));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= n_way) throw DataError("cv: label " + std::to_string(y) + " outside [0, n_way)");
        by_class[static_cast<std::size_t>(y)].push_back(i);
    }
    for (int c = 0; c < n_way; ++c)
        if (by_class[static_cast<std::size_t>(c)].size() < 2)
            throw DataError("cv: class " + std::to_string(c) + " has fewer than 2 labeled examples; cannot stratify");
    std::vector<Fold> folds(static_cast<std::size_t>(protocol.folds));
    for (int f = 0; f < protocol.folds; ++f) {
        Rng rng(derive(seed, static_cast<std::uint64_t>(f)));
        for (const auto& rows : by_class) {
            auto order = rows;
            rng.shuffle(order);
            const auto n_train = static_cast<std::size_t>(fold_train_count(static_cast<int>(rows.size()), protocol.train_fraction));
            auto& fold = folds[static_cast<std::size_t>(f)];
            fold.train.insert(fold.train.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
            fold.val.insert(fold.val.end(), order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
        }
        auto& fold = folds[static_cast<std::size_t>(f)];
        std::sort(fold.train.begin(), fold.train.end());
        std::sort(fold.val.begin(), fold.val.end());
    }
    return folds;
}

/// The adaptation task of one fold: training rows as D_l, D_u unchanged.
inline AdaptTask fold_task(const AdaptTask& task, const Fold& fold) {
    AdaptTask t;
    t.labeled = gather_rows(task.labeled, fold.train);
    t.labels = gather_labels(task.labels, fold.train);
    t.unlabeled = task.unlabeled;
    t.n_way = task.n_way;
    t.k_shot = static_cast<int>(fold.train.size()) / std::max(1, task.n_way);
    return t;
}

/// One evaluated configuration.
struct Trial {
    PipelineConfig config;
    std::vector<double> fold_scores;
    double score = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    double wall_seconds = 0;
};

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Folds and per-fold pipeline seeds are functions of `seed` alone, so every
/// configuration evaluated under one seed sees identical splits.
struct CVPlan {
    std::vector<Fold> folds;
    std::vector<AdaptTask> tasks;
    std::vector<TestSet> val;
    std::vector<std::uint64_t> run_seeds;
    std::uint64_t seed = 0;
};

inline CVPlan make_cv_plan(const AdaptTask& task, const CVProtocol& protocol, std::uint64_t seed) {
    task.validate();
    CVPlan plan;
    plan.seed = seed;
    plan.folds = make_folds(task.labels, task.n_way, protocol, derive(seed, 0));
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        plan.tasks.push_back(fold_task(task, plan.folds[f]));
        plan.val.push_back({gather_rows(task.labeled, plan.folds[f].val), gather_labels(task.labels, plan.folds[f].val)});
        plan.run_seeds.push_back(derive(derive(seed, 1), f));
    }
    return plan;
}

/// Mean validation accuracy of `cfg` over the folds of `plan`. If any fold
/// throws, the trial is marked failed and every fold scores 0.
inline Trial cv_objective(const Model<float>& base, const CVPlan& plan, const PipelineConfig& cfg, int jobs = 1) {
    Trial t;
    t.config = cfg;
    t.seed = plan.seed;
    const std::size_t n = plan.folds.size();
    t.fold_scores.assign(n, 0.0);
    std::vector<std::string> errors(n);
    parallel_for(n, jobs, [&](std::size_t f) {
        try {
            const auto adapted = run_pipeline(base, plan.tasks[f], cfg, plan.run_seeds[f]);
            t.fold_scores[f] = evaluate(adapted, plan.val[f]);
        } catch (const Error& e) {
            errors[f] = e.what();
        }
    });
    for (std::size_t f = 0; f < n && !t.failed; ++f) {
        if (errors[f].empty()) continue;
        t.failed = true;
        t.error = "fold " + std::to_string(f) + ": " + errors[f];
    }
    if (t.failed) std::fill(t.fold_scores.begin(), t.fold_scores.end(), 0.0);
    t.score = mean_of(t.fold_scores);
    return t;
}

inline Trial cv_objective(const Model<float>& base, const AdaptTask& task, const PipelineConfig& cfg,
                          const CVProtocol& protocol, std::uint64_t seed, int jobs = 1) {
    return cv_objective(base, make_cv_plan(task, protocol, seed), cfg, jobs);
}

}  // namespace adapt
