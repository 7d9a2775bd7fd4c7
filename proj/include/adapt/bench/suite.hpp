#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "adapt/bench/dataset.hpp"
#include "adapt/bench/episode.hpp"
#include "adapt/json_fields.hpp"

namespace adapt {

inline constexpr std::string_view kBenchSchema = "map-bench/1";

/// FNV-1a of a name; keys per-domain streams so a domain's data and
/// episodes do not depend on its position in a suite.
inline std::uint64_t name_key(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

struct DomainEntry {
    std::string name;
    DomainShiftSpec shift;
};

struct SourceSpec {
    int classes = 40;
    int per_class = 100;
    int epochs = 20;
    std::vector<int> hidden{64, 64};
    PretrainOptions pretrain;
};

inline const std::vector<std::string>& bench_approaches() {
    static const std::vector<std::string> a{"PN", "FT", "MAP", "MAP-transfer", "MAP-oracle"};
    return a;
}

struct BenchSuite {
    std::uint64_t seed = 7;
    int dim = 32;
    DomainLayout layout{16, 0.7, 0.5, 60, 0};  // target domains; class_offset is set from the source
    SourceSpec source;
    std::vector<DomainEntry> domains;
    EpisodeSpec episode{10, 5, 20, 5};  // k_shot is taken from `shots`
    std::vector<int> shots{2, 5, 10, 20};
    std::vector<std::string> approaches{"PN", "FT", "MAP"};
    int map_budget = 400;
    int baseline_budget = 30;  // 0 evaluates the presets with default hyperparameters

    void validate() const {
        if (dim < 2) throw ConfigError("suite.dim", "must be at least 2");
        if (domains.empty()) throw ConfigError("suite.domains", "need at least one domain");
        std::set<std::string> names;
        for (std::size_t i = 0; i < domains.size(); ++i) {
            const std::string p = "suite.domains[" + std::to_string(i) + "]";
            if (domains[i].name.empty()) throw ConfigError(p + ".name", "must be non-empty");
            if (!names.insert(domains[i].name).second) throw ConfigError(p + ".name", "duplicate domain");
            try {
                domains[i].shift.validate(episode.n_way, dim);
            } catch (const ConfigError& e) {
                throw ConfigError(p + "." + e.path(), std::string(e.what()).substr(e.path().size() + 2));
            }
        }
        episode.validate();
        if (shots.empty()) throw ConfigError("suite.shots", "need at least one shot");
        for (int k : shots)
            if (k < 1) throw ConfigError("suite.shots", "shots must be positive");
            else if (k + episode.test_per_class > layout.per_class)
                throw ConfigError("suite.shots", std::to_string(k) + "-shot needs " + std::to_string(k + episode.test_per_class) +
                                                     " examples per class, layout has " + std::to_string(layout.per_class));
        if (approaches.empty()) throw ConfigError("suite.approaches", "need at least one approach");
        for (const auto& a : approaches)
            if (std::find(bench_approaches().begin(), bench_approaches().end(), a) == bench_approaches().end())
                throw ConfigError("suite.approaches", "unknown approach \"" + a + "\"");
        if (map_budget < 1) throw ConfigError("suite.map_budget", "must be at least 1");
        if (baseline_budget < 0) throw ConfigError("suite.baseline_budget", "must be non-negative");
        if (source.classes < 2) throw ConfigError("suite.source.classes", "must be at least 2");
        if (source.per_class < 2) throw ConfigError("suite.source.per_class", "must be at least 2");
        if (source.epochs < 0) throw ConfigError("suite.source.epochs", "must be non-negative");
        for (int h : source.hidden)
            if (h < 1) throw ConfigError("suite.source.hidden", "widths must be positive");
    }

    bool uses(std::string_view approach) const {
        return std::find(approaches.begin(), approaches.end(), approach) != approaches.end();
    }

    const DomainEntry& domain(const std::string& name) const {
        for (const auto& d : domains)
            if (d.name == name) return d;
        throw ConfigError("suite.domains", "no domain named \"" + name + "\"");
    }
};

// ---------------------------------------------------------------------------
// Data derived from a suite. Streams under the suite seed: 0 the layout,
// 1 the model initialization, 2 pretraining, 3 the per-cell tree.

inline DomainLayout source_layout(const BenchSuite& s) {
    DomainLayout l = s.layout;
    l.per_class = s.source.per_class;
    l.class_offset = 0;
    return l;
}

inline EmbeddingDataset source_dataset(const BenchSuite& s) {
    auto ds = gen_domain(derive(s.seed, 0), s.source.classes, s.dim, {}, source_layout(s));
    ds.domain_tag = "source";
    return ds;
}

/// Target domains share one class set, disjoint from the source classes.
inline EmbeddingDataset domain_dataset(const BenchSuite& s, const DomainEntry& d) {
    DomainLayout l = s.layout;
    l.class_offset = s.source.classes;
    DomainShiftSpec shift = d.shift;
    shift.sample_seed = name_key(d.name);
    auto ds = gen_domain(derive(s.seed, 0), s.episode.n_way, s.dim, shift, l);
    ds.domain_tag = d.name;
    return ds;
}

inline Model<float> source_template(const BenchSuite& s) {
    return make_model<float>(s.dim, s.source.hidden, s.source.classes, derive(s.seed, 1));
}

inline Model<float> pretrain_suite_model(const BenchSuite& s) {
    return pretrain_source(source_dataset(s), source_template(s), s.source.epochs, derive(s.seed, 2), s.source.pretrain);
}

/// Root of the (domain, shot) cell's seed tree.
inline std::uint64_t cell_seed(const BenchSuite& s, const std::string& domain, int shot) {
    return derive(derive(derive(s.seed, 3), name_key(domain)), static_cast<std::uint64_t>(shot));
}

// ---------------------------------------------------------------------------
// Default desk suite: six target domains of graded shift.

inline std::vector<double> banded_scale(int dim) {
    std::vector<double> s(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) s[static_cast<std::size_t>(j)] = 0.5 + 0.5 * (j % 4);
    return s;
}

inline BenchSuite default_suite() {
    BenchSuite s;
    std::vector<int> reversed(static_cast<std::size_t>(s.episode.n_way));
    for (int c = 0; c < s.episode.n_way; ++c) reversed[static_cast<std::size_t>(c)] = s.episode.n_way - 1 - c;
    s.domains = {
        {"near", {0.3, {}, 0.15, 0, {}, 0}},
        {"tilted", {0.8, {}, 0.15, 0, {}, 0}},
        {"rescaled", {0.2, banded_scale(s.dim), 0.15, 0, {}, 0}},
        {"skewed", {0.6, {}, 0.2, 1.0, reversed, 0}},
        {"noisy", {0.5, {}, 0.45, 0, {}, 0}},
        {"far", {1.5, banded_scale(s.dim), 0.3, 0, {}, 0}},
    };
    return s;
}

// ---------------------------------------------------------------------------
// Suite document

inline nlohmann::json shift_to_json(const DomainShiftSpec& s) {
    nlohmann::json j{{"rotation_angle", s.rotation_angle}, {"noise_sigma", s.noise_sigma}, {"class_prior_skew", s.class_prior_skew}};
    if (!s.feature_scale.empty()) j["feature_scale"] = s.feature_scale;
    if (!s.label_remap.empty()) j["label_remap"] = s.label_remap;
    return j;
}

inline DomainShiftSpec shift_from_json(const nlohmann::json& j, const std::string& path) {
    using namespace fields;
    known_keys(j, path, {"rotation_angle", "feature_scale", "noise_sigma", "class_prior_skew", "label_remap"});
    DomainShiftSpec s;
    s.rotation_angle = read_or<double>(j, path, "rotation_angle", 0.0);
    s.noise_sigma = read_or<double>(j, path, "noise_sigma", 0.0);
    s.class_prior_skew = read_or<double>(j, path, "class_prior_skew", 0.0);
    if (j.contains("feature_scale")) s.feature_scale = read_list<double>(j, path, "feature_scale");
    if (j.contains("label_remap")) s.label_remap = read_list<int>(j, path, "label_remap");
    return s;
}

inline nlohmann::json suite_to_json(const BenchSuite& s) {
    nlohmann::json domains = nlohmann::json::array();
    for (const auto& d : s.domains) domains.push_back({{"name", d.name}, {"shift", shift_to_json(d.shift)}});
    return {
        {"schema", std::string(kBenchSchema)},
        {"seed", s.seed},
        {"dim", s.dim},
        {"layout",
         {{"latent_dim", s.layout.latent_dim},
          {"class_spread", s.layout.class_spread},
          {"within_sigma", s.layout.within_sigma},
          {"per_class", s.layout.per_class}}},
        {"source",
         {{"classes", s.source.classes},
          {"per_class", s.source.per_class},
          {"epochs", s.source.epochs},
          {"hidden", s.source.hidden},
          {"lr", s.source.pretrain.lr},
          {"batch_size", s.source.pretrain.batch_size},
          {"decay", s.source.pretrain.decay}}},
        {"domains", std::move(domains)},
        {"episode", {{"n_way", s.episode.n_way}, {"test_per_class", s.episode.test_per_class}, {"seeds", s.episode.seeds}}},
        {"shots", s.shots},
        {"approaches", s.approaches},
        {"map_budget", s.map_budget},
        {"baseline_budget", s.baseline_budget},
    };
}

/// Omitted fields take the default-suite values; `domains` is required.
inline BenchSuite suite_from_json(const nlohmann::json& j, const std::string& root = "suite") {
    using namespace fields;
    known_keys(j, root,
               {"schema", "seed", "dim", "layout", "source", "domains", "episode", "shots", "approaches", "map_budget",
                "baseline_budget"});
    if (!j.contains("schema") || j.at("schema") != kBenchSchema)
        throw ConfigError(join(root, "schema"), "expected \"" + std::string(kBenchSchema) + "\"");
    BenchSuite s;
    s.seed = read_or<std::uint64_t>(j, root, "seed", s.seed);
    s.dim = read_or<int>(j, root, "dim", s.dim);
    if (j.contains("layout")) {
        const auto& l = j.at("layout");
        const std::string p = join(root, "layout");
        known_keys(l, p, {"latent_dim", "class_spread", "within_sigma", "per_class"});
        s.layout.latent_dim = read_or<int>(l, p, "latent_dim", s.layout.latent_dim);
        s.layout.class_spread = read_or<double>(l, p, "class_spread", s.layout.class_spread);
        s.layout.within_sigma = read_or<double>(l, p, "within_sigma", s.layout.within_sigma);
        s.layout.per_class = read_or<int>(l, p, "per_class", s.layout.per_class);
    }
    if (j.contains("source")) {
        const auto& src = j.at("source");
        const std::string p = join(root, "source");
        known_keys(src, p, {"classes", "per_class", "epochs", "hidden", "lr", "batch_size", "decay"});
        s.source.classes = read_or<int>(src, p, "classes", s.source.classes);
        s.source.per_class = read_or<int>(src, p, "per_class", s.source.per_class);
        s.source.epochs = read_or<int>(src, p, "epochs", s.source.epochs);
        if (src.contains("hidden")) s.source.hidden = read_list<int>(src, p, "hidden");
        s.source.pretrain.lr = read_or<double>(src, p, "lr", s.source.pretrain.lr);
        s.source.pretrain.batch_size = read_or<int>(src, p, "batch_size", s.source.pretrain.batch_size);
        s.source.pretrain.decay = read_or<double>(src, p, "decay", s.source.pretrain.decay);
    }
    const std::string dp = join(root, "domains");
    if (!j.contains("domains") || !j.at("domains").is_array()) throw ConfigError(dp, "expected an array");
    for (std::size_t i = 0; i < j.at("domains").size(); ++i) {
        const auto& d = j.at("domains")[i];
        const std::string p = dp + "[" + std::to_string(i) + "]";
        known_keys(d, p, {"name", "shift"});
        s.domains.push_back({read<std::string>(d, p, "name"),
                             d.contains("shift") ? shift_from_json(d.at("shift"), join(p, "shift")) : DomainShiftSpec{}});
    }
    if (j.contains("episode")) {
        const auto& e = j.at("episode");
        const std::string p = join(root, "episode");
        known_keys(e, p, {"n_way", "test_per_class", "seeds"});
        s.episode.n_way = read_or<int>(e, p, "n_way", s.episode.n_way);
        s.episode.test_per_class = read_or<int>(e, p, "test_per_class", s.episode.test_per_class);
        s.episode.seeds = read_or<int>(e, p, "seeds", s.episode.seeds);
    }
    if (j.contains("shots")) s.shots = read_list<int>(j, root, "shots");
    if (j.contains("approaches")) s.approaches = read_list<std::string>(j, root, "approaches");
    s.map_budget = read_or<int>(j, root, "map_budget", s.map_budget);
    s.baseline_budget = read_or<int>(j, root, "baseline_budget", s.baseline_budget);
    s.validate();
    return s;
}

}  // namespace adapt
