#pragma once

#include <string>
#include <utility>
#include <vector>

#include "adapt/analysis.hpp"
#include "adapt/bench/runner.hpp"

namespace adapt {

struct NamedPipeline {
    std::string name;
    PipelineConfig config;
};

/// Collection entries named by provenance tag; repeated tags get a "#i" suffix.
inline std::vector<NamedPipeline> named_pipelines(const PipelineCollection& c) {
    std::vector<NamedPipeline> out;
    std::map<std::string, int> seen;
    for (const auto& e : c.entries) {
        std::string name = e.provenance.tag();
        if (const int n = seen[name]++; n > 0) name += "#" + std::to_string(n);
        out.push_back({std::move(name), e.config});
    }
    return out;
}

/// Mean accuracy of every pipeline on every suite domain at `shot`, over the
/// same evaluation episodes and run seeds the benchmark uses for that cell.
inline ResultGrid cross_domain_grid(const BenchSuite& s, const Model<float>& base, const std::vector<NamedPipeline>& pipelines,
                                    const std::vector<std::string>& domains, int shot, int jobs = 1) {
    if (pipelines.empty()) throw ConfigError("pipelines", "need at least one pipeline");
    if (domains.empty()) throw ConfigError("tasks", "need at least one task");
    std::vector<std::string> names;
    for (const auto& p : pipelines) names.push_back(p.name);
    ResultGrid g(names, domains);
    std::vector<CellPlan> plans;
    for (const auto& d : domains) plans.push_back(make_cell_plan(s, domain_dataset(s, s.domain(d)), d, shot));
    const std::size_t cols = domains.size();
    std::vector<double> acc(pipelines.size() * cols);
    parallel_for(acc.size(), jobs, [&](std::size_t i) {
        acc[i] = mean_accuracy(detail::evaluate_config(base, plans[i % cols], pipelines[i / cols].config).accuracies);
    });
    for (std::size_t i = 0; i < acc.size(); ++i) g.accuracy[i / cols][i % cols] = acc[i];
    return g;
}

}  // namespace adapt
