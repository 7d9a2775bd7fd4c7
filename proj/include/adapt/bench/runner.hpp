#pragma once

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adapt/bench/suite.hpp"
#include "adapt/parallel.hpp"
#include "adapt/search/collection.hpp"
#include "adapt/search/report.hpp"

namespace adapt {

/// One approach on one (domain, shot) cell, evaluated on every seed episode.
struct CellResult {
    std::string approach;
    std::string domain;
    int shot = 0;
    std::vector<double> accuracies;  // one per seed episode
    double mean = 0;
    std::optional<PipelineConfig> config;  // selected pipeline; oracle selects per episode
    double cv_score = 0;                   // selection score of `config`
    std::optional<SearchResult> search;
    std::vector<std::string> warnings;  // failed evaluation runs (scored 0)
};

struct BenchOptions {
    int jobs = 1;
    /// Candidates of the MAP-transfer approach.
    std::vector<PipelineConfig> collection;
    ProgressFn progress;
    /// Called once per finished (approach, cell), possibly from a worker thread.
    std::function<void(const CellResult&)> on_cell;
};

struct BenchResult {
    BenchSuite suite;
    std::vector<CellResult> cells;  // domain-major, then shot, then approach in suite order

    const CellResult& cell(const std::string& approach, const std::string& domain, int shot) const {
        for (const auto& c : cells)
            if (c.approach == approach && c.domain == domain && c.shot == shot) return c;
        throw Error("bench: no cell " + approach + "/" + domain + "/" + std::to_string(shot) + "-shot");
    }

    /// MAP winners tagged with their (domain, shot).
    PipelineCollection collection() const {
        PipelineCollection out;
        for (const auto& c : cells)
            if (c.approach == "MAP" && c.config) out.entries.push_back({*c.config, {c.domain, c.shot}, c.cv_score});
        return out;
    }
};

/// Episodes and seeds of one cell. Children of the cell seed: 0 the search
/// episode, 1..5 the per-approach searches, 100 + s evaluation episode s,
/// 200 + s its adaptation run.
struct CellPlan {
    Episode search_episode;
    std::vector<Episode> eval;
    std::vector<std::uint64_t> run_seeds;
    std::uint64_t seed = 0;
};

inline CellPlan make_cell_plan(const BenchSuite& s, const EmbeddingDataset& ds, const std::string& domain, int shot) {
    CellPlan p;
    p.seed = cell_seed(s, domain, shot);
    EpisodeSpec spec = s.episode;
    spec.k_shot = shot;
    p.search_episode = sample_episode(ds, spec, derive(p.seed, 0));
    for (int e = 0; e < spec.seeds; ++e) {
        p.eval.push_back(sample_episode(ds, spec, derive(p.seed, 100 + static_cast<std::uint64_t>(e))));
        p.run_seeds.push_back(derive(p.seed, 200 + static_cast<std::uint64_t>(e)));
    }
    return p;
}

inline double mean_accuracy(const std::vector<double>& a) { return mean_of(a); }

namespace detail {

inline std::uint64_t approach_stream(const std::string& a) {
    const auto& all = bench_approaches();
    return 1 + static_cast<std::uint64_t>(std::find(all.begin(), all.end(), a) - all.begin());
}

inline CellResult evaluate_config(const Model<float>& base, const CellPlan& plan, const PipelineConfig& cfg) {
    CellResult r;
    for (std::size_t e = 0; e < plan.eval.size(); ++e) {
        try {
            r.accuracies.push_back(evaluate(run_pipeline(base, plan.eval[e].task, cfg, plan.run_seeds[e]), plan.eval[e].test));
        } catch (const Error& ex) {
            r.accuracies.push_back(0.0);
            r.warnings.push_back("episode " + std::to_string(e) + ": " + ex.what());
        }
    }
    r.config = cfg;
    return r;
}

inline CellResult run_approach(const BenchSuite& s, const Model<float>& base, const CellPlan& plan,
                               const std::string& approach, const BenchOptions& opt) {
    const std::uint64_t seed = derive(plan.seed, approach_stream(approach));
    SearchOptions so;
    so.progress = opt.progress;
    CellResult r;
    if (approach == "PN" || approach == "FT") {
        const Preset preset = approach == "PN" ? Preset::PN : Preset::FT;
        if (s.baseline_budget == 0) {
            r = evaluate_config(base, plan, preset_config(preset));
        } else {
            auto sr = search_from_scratch(base, plan.search_episode.task, preset_space(preset), s.baseline_budget, seed, so);
            r = evaluate_config(base, plan, sr.best_trial().config);
            r.cv_score = sr.best_trial().score;
            r.search = std::move(sr);
        }
    } else if (approach == "MAP") {
        auto sr = search_from_scratch(base, plan.search_episode.task, full_space(), s.map_budget, seed, so);
        r = evaluate_config(base, plan, sr.best_trial().config);
        r.cv_score = sr.best_trial().score;
        r.search = std::move(sr);
    } else if (approach == "MAP-transfer") {
        if (opt.collection.empty()) throw ConfigError("collection", "MAP-transfer needs a pipeline collection");
        auto sr = search_transfer(base, plan.search_episode.task, opt.collection, seed, so);
        r = evaluate_config(base, plan, sr.best_trial().config);
        r.cv_score = sr.best_trial().score;
        r.search = std::move(sr);
    } else {
        // Oracle: a separate test-set search on every evaluation episode;
        // leaks the test labels by design.
        for (std::size_t e = 0; e < plan.eval.size(); ++e) {
            const auto sr = search_oracle(base, plan.eval[e].task, full_space(), s.map_budget, plan.eval[e].test,
                                          derive(seed, e), so);
            r.accuracies.push_back(sr.best_trial().score);
        }
    }
    return r;
}

}  // namespace detail

/// Every approach of the suite on every (domain, shot) cell. Cells run on up
/// to `jobs` threads; results do not depend on the thread count.
inline BenchResult run_bench(const BenchSuite& s, const Model<float>& base, const BenchOptions& opt = {}) {
    s.validate();
    if (s.uses("MAP-transfer") && opt.collection.empty())
        throw ConfigError("collection", "MAP-transfer needs a pipeline collection");
    std::vector<EmbeddingDataset> data;
    for (const auto& d : s.domains) data.push_back(domain_dataset(s, d));
    struct Key {
        std::size_t domain;
        int shot;
    };
    std::vector<Key> keys;
    for (std::size_t d = 0; d < s.domains.size(); ++d)
        for (int k : s.shots) keys.push_back({d, k});
    std::vector<std::vector<CellResult>> out(keys.size());
    parallel_for(keys.size(), opt.jobs, [&](std::size_t i) {
        const auto& name = s.domains[keys[i].domain].name;
        const CellPlan plan = make_cell_plan(s, data[keys[i].domain], name, keys[i].shot);
        for (const auto& a : s.approaches) {
            auto r = detail::run_approach(s, base, plan, a, opt);
            r.approach = a;
            r.domain = name;
            r.shot = keys[i].shot;
            r.mean = mean_accuracy(r.accuracies);
            if (opt.on_cell) opt.on_cell(r);
            out[i].push_back(std::move(r));
        }
    });
    BenchResult result;
    result.suite = s;
    for (auto& v : out)
        for (auto& c : v) result.cells.push_back(std::move(c));
    return result;
}

// ---------------------------------------------------------------------------
// Outputs

namespace detail {

inline std::string percent(double accuracy) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * accuracy);
    return buf;
}

inline std::string shortest(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace detail

/// Table of mean accuracies in percent: one block of rows per shot, one row
/// per approach, one column per domain plus their average.
inline std::string bench_table_csv(const BenchResult& r) {
    std::string out = "shot,approach";
    for (const auto& d : r.suite.domains) out += "," + d.name;
    out += ",average\n";
    for (int k : r.suite.shots)
        for (const auto& a : r.suite.approaches) {
            out += std::to_string(k) + "," + a;
            double sum = 0;
            for (const auto& d : r.suite.domains) {
                const double m = r.cell(a, d.name, k).mean;
                sum += m;
                out += "," + detail::percent(m);
            }
            out += "," + detail::percent(sum / static_cast<double>(r.suite.domains.size())) + "\n";
        }
    return out;
}

/// Per-episode accuracies: approach, domain, shot, seed index, accuracy.
inline std::string bench_detail_csv(const BenchResult& r) {
    std::string out = "approach,domain,shot,seed,accuracy\n";
    for (const auto& c : r.cells)
        for (std::size_t e = 0; e < c.accuracies.size(); ++e)
            out += c.approach + "," + c.domain + "," + std::to_string(c.shot) + "," + std::to_string(e) + "," +
                   detail::shortest(c.accuracies[e]) + "\n";
    return out;
}

inline constexpr std::string_view kBenchSummarySchema = "map-bench-summary/1";

inline nlohmann::json bench_summary_json(const BenchResult& r) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : r.cells) {
        nlohmann::json j{{"approach", c.approach}, {"domain", c.domain}, {"shot", c.shot}, {"accuracies", c.accuracies}, {"mean", c.mean}};
        if (c.config) {
            j["pipeline"] = config_to_json(*c.config);
            j["cv_score"] = c.cv_score;
        }
        if (c.search) j["evaluations"] = c.search->history.size();
        if (c.approach == "MAP-oracle") j["oracle"] = true;
        if (!c.warnings.empty()) j["warnings"] = c.warnings;
        cells.push_back(std::move(j));
    }
    return {{"schema", std::string(kBenchSummarySchema)}, {"seed", r.suite.seed}, {"suite", suite_to_json(r.suite)}, {"cells", std::move(cells)}};
}

}  // namespace adapt
