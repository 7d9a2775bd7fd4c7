#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "adapt/search/cv.hpp"
#include "adapt/search/tpe.hpp"

namespace adapt {

/// Emitted after every evaluated trial.
struct SearchEvent {
    std::string strategy;
    std::size_t index = 0;
    double score = 0;
    double best = 0;
};

using ProgressFn = std::function<void(const SearchEvent&)>;

struct SearchOptions {
    CVProtocol protocol;
    TpeOptions tpe;
    int jobs = 1;
    /// Configurations evaluated before the optimizer takes over.
    std::vector<PipelineConfig> initial;
    ProgressFn progress;
};

struct SearchResult {
    std::string strategy;
    bool oracle = false;
    std::uint64_t seed = 0;
    std::vector<Trial> history;
    std::size_t best = 0;
    std::vector<std::string> warnings;

    const Trial& best_trial() const { return history.at(best); }

    /// Running maximum of the trial scores.
    std::vector<double> best_so_far() const {
        std::vector<double> out;
        double m = 0;
        for (std::size_t i = 0; i < history.size(); ++i) {
            m = i == 0 ? history[i].score : std::max(m, history[i].score);
            out.push_back(m);
        }
        return out;
    }
};

namespace detail {

// Seed tree of a search rooted at `seed`: child 0 drives the optimizer
// (grandchild t for trial t), child 1 the cross-validation plan, child 2
// the oracle's adaptation run.
inline constexpr std::uint64_t kSearchOptimizerStream = 0;
inline constexpr std::uint64_t kSearchCVStream = 1;
inline constexpr std::uint64_t kSearchOracleStream = 2;

inline void record(SearchResult& r, Trial t, const ProgressFn& progress, double seconds) {
    t.wall_seconds = seconds;
    r.history.push_back(std::move(t));
    const std::size_t i = r.history.size() - 1;
    if (i == 0 || r.history[i].score > r.history[r.best].score) r.best = i;
    if (progress) progress({r.strategy, i, r.history[i].score, r.history[r.best].score});
}

template <typename Objective>
SearchResult optimize(const std::string& strategy, const SearchSpace& space, int budget, std::uint64_t seed,
                      const SearchOptions& opt, Objective&& objective) {
    if (budget < 1) throw ConfigError("budget", "must be at least 1");
    SearchResult r;
    r.strategy = strategy;
    r.seed = seed;
    std::vector<Point> points;
    std::vector<double> scores;
    const std::uint64_t opt_seed = derive(seed, kSearchOptimizerStream);
    for (int t = 0; t < budget; ++t) {
        Point p;
        if (static_cast<std::size_t>(t) < opt.initial.size()) {
            p = space.point_of(opt.initial[static_cast<std::size_t>(t)]);
        } else {
            Rng rng(derive(opt_seed, static_cast<std::uint64_t>(t)));
            p = tpe_suggest(space, points, scores, rng, opt.tpe);
        }
        const auto start = std::chrono::steady_clock::now();
        Trial trial = objective(space.config_at(p));
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        points.push_back(std::move(p));
        scores.push_back(trial.score);
        record(r, std::move(trial), opt.progress, seconds);
    }
    return r;
}

}  // namespace detail

/// TPE over `space` maximizing k-fold cross-validation accuracy on D_l.
inline SearchResult search_from_scratch(const Model<float>& base, const AdaptTask& task, const SearchSpace& space,
                                        int budget, std::uint64_t seed, const SearchOptions& opt = {}) {
    const CVPlan plan = make_cv_plan(task, opt.protocol, derive(seed, detail::kSearchCVStream));
    return detail::optimize("from-scratch", space, budget, seed, opt,
                            [&](const PipelineConfig& cfg) { return cv_objective(base, plan, cfg, opt.jobs); });
}

/// Same loop as from-scratch, but the objective is test accuracy after
/// adapting on the full D_l. Leaks the test set by design.
inline SearchResult search_oracle(const Model<float>& base, const AdaptTask& task, const SearchSpace& space, int budget,
                                  const TestSet& test, std::uint64_t seed, const SearchOptions& opt = {}) {
    task.validate();
    const std::uint64_t run_seed = derive(seed, detail::kSearchOracleStream);
    auto r = detail::optimize("oracle", space, budget, seed, opt, [&](const PipelineConfig& cfg) {
        Trial t;
        t.config = cfg;
        t.seed = run_seed;
        try {
            t.fold_scores = {evaluate(run_pipeline(base, task, cfg, run_seed), test)};
        } catch (const Error& e) {
            t.failed = true;
            t.error = e.what();
            t.fold_scores = {0.0};
        }
        t.score = t.fold_scores[0];
        return t;
    });
    r.oracle = true;
    return r;
}

/// Evaluates exactly the given configurations under the from-scratch
/// cross-validation plan of `seed`, so a configuration scores identically
/// in both strategies.
inline SearchResult search_transfer(const Model<float>& base, const AdaptTask& task,
                                    const std::vector<PipelineConfig>& candidates, std::uint64_t seed,
                                    const SearchOptions& opt = {}) {
    if (candidates.empty()) throw ConfigError("collection", "collection is empty");
    const CVPlan plan = make_cv_plan(task, opt.protocol, derive(seed, detail::kSearchCVStream));
    SearchResult r;
    r.strategy = "transfer";
    r.seed = seed;
    for (const auto& cfg : candidates) {
        const auto start = std::chrono::steady_clock::now();
        Trial t = cv_objective(base, plan, cfg, opt.jobs);
        detail::record(r, std::move(t), opt.progress,
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return r;
}

}  // namespace adapt
