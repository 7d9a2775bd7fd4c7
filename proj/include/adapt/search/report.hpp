#pragma once

#include <string>

#include <json.hpp>

#include "adapt/search/strategies.hpp"

namespace adapt {

inline constexpr std::string_view kReportSchema = "map-report/1";

/// Search report document. Wall time is included only on request so that
/// default reports are byte-stable across reruns.
inline nlohmann::json report_to_json(const SearchResult& r, bool include_timing = false) {
    using nlohmann::json;
    json history = json::array();
    const auto running = r.best_so_far();
    for (std::size_t i = 0; i < r.history.size(); ++i) {
        const auto& t = r.history[i];
        json h{{"index", i},
               {"score", t.score},
               {"fold_scores", t.fold_scores},
               {"best_so_far", running[i]},
               {"failed", t.failed},
               {"pipeline", config_to_json(t.config)}};
        if (t.failed) h["error"] = t.error;
        if (include_timing) h["wall_seconds"] = t.wall_seconds;
        history.push_back(std::move(h));
    }
    json doc{{"schema", std::string(kReportSchema)},
             {"strategy", r.strategy},
             {"oracle", r.oracle},
             {"seed", r.seed},
             {"evaluations", r.history.size()},
             {"history", std::move(history)},
             {"warnings", r.warnings}};
    if (!r.history.empty())
        doc["best"] = json{{"index", r.best}, {"score", r.best_trial().score}, {"pipeline", config_to_json(r.best_trial().config)}};
    return doc;
}

}  // namespace adapt
