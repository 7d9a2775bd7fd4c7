#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adapt/parallel.hpp"
#include "adapt/search/strategies.hpp"

namespace adapt {

inline constexpr std::string_view kCollectionSchema = "map-collection/1";

struct Provenance {
    std::string domain;
    int shot = 0;

    std::string tag() const { return domain + "/" + std::to_string(shot) + "-shot"; }
    bool operator==(const Provenance&) const = default;
};

struct CollectionEntry {
    PipelineConfig config;
    Provenance provenance;
    double score = 0;  // cross-validation score on the source task
};

struct PipelineCollection {
    std::vector<CollectionEntry> entries;
    std::vector<std::string> warnings;  // entries skipped while decoding

    std::vector<PipelineConfig> configs() const {
        std::vector<PipelineConfig> out;
        for (const auto& e : entries) out.push_back(e.config);
        return out;
    }
};

/// One header line, then one canonical line per entry.
inline std::string encode_collection(const PipelineCollection& c) {
    std::string out = nlohmann::json{{"schema", std::string(kCollectionSchema)}, {"count", c.entries.size()}}.dump() + "\n";
    for (const auto& e : c.entries) {
        if (e.provenance.domain.empty()) throw ConfigError("collection.provenance", "empty provenance");
        nlohmann::json j{{"provenance", {{"domain", e.provenance.domain}, {"shot", e.provenance.shot}}},
                         {"score", e.score},
                         {"pipeline", config_to_json(e.config)}};
        out += j.dump() + "\n";
    }
    return out;
}

/// Entries that fail to decode are skipped and reported in `warnings`; a bad
/// header is an error.
inline PipelineCollection decode_collection(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("collection", "empty file");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
        throw ConfigError("collection.header", "malformed JSON");
    }
    if (!header.is_object() || !header.contains("schema") || header.at("schema") != kCollectionSchema)
        throw ConfigError("collection.schema", "expected \"" + std::string(kCollectionSchema) + "\"");
    PipelineCollection c;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            CollectionEntry e;
            e.provenance.domain = j.at("provenance").at("domain").get<std::string>();
            e.provenance.shot = j.at("provenance").at("shot").get<int>();
            if (e.provenance.domain.empty()) throw ConfigError("provenance.domain", "empty provenance");
            e.score = j.at("score").get<double>();
            e.config = config_from_json(j.at("pipeline"));
            c.entries.push_back(std::move(e));
        } catch (const std::exception& ex) {
            c.warnings.push_back("line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return c;
}

inline void save_collection(const PipelineCollection& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << encode_collection(c);
}

inline PipelineCollection load_collection(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, "cannot open collection file");
    std::stringstream ss;
    ss << in.rdbuf();
    return decode_collection(ss.str());
}

/// A source task for collection building.
struct SourceTask {
    Provenance provenance;
    AdaptTask task;
};

/// From-scratch search per task (seed derive(seed, i) for task i); each
/// winner is stored with its provenance. Tasks run on up to `jobs` threads.
inline PipelineCollection collection_build(const Model<float>& base, const std::vector<SourceTask>& tasks,
                                           const SearchSpace& space, int budget, std::uint64_t seed, int jobs = 1,
                                           SearchOptions opt = {}) {
    if (tasks.empty()) throw ConfigError("tasks", "need at least one task");
    opt.jobs = 1;
    PipelineCollection c;
    c.entries.resize(tasks.size());
    parallel_for(tasks.size(), jobs, [&](std::size_t i) {
        const auto r = search_from_scratch(base, tasks[i].task, space, budget, derive(seed, i), opt);
        c.entries[i] = {r.best_trial().config, tasks[i].provenance, r.best_trial().score};
    });
    return c;
}

}  // namespace adapt
