#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adapt/bench/grid.hpp"
#include "adapt/checkpoint.hpp"
#include "adapt/json_fields.hpp"
#include "adapt/search/report.hpp"

namespace adapt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr std::string_view kAdaptReportSchema = "map-adapt/1";

/// Line-delimited JSON events on a shared stream.
class EventLog {
public:
    explicit EventLog(std::ostream* out = nullptr) : out_(out) {}

    void emit(const json& event) {
        if (!out_) return;
        std::lock_guard<std::mutex> lock(mu_);
        *out_ << event.dump() << "\n";
        out_->flush();
    }

    ProgressFn trial_progress() {
        return [this](const SearchEvent& e) {
            emit({{"event", "trial"}, {"strategy", e.strategy}, {"index", e.index}, {"score", e.score}, {"best", e.best}});
        };
    }

private:
    std::ostream* out_;
    std::mutex mu_;
};

/// Command-line overrides applied on top of the config document.
struct Overrides {
    std::optional<std::uint64_t> seed;
    fs::path out = ".";
    int jobs = 1;
};

/// A parsed config document and the directory its relative paths resolve against.
struct ConfigDoc {
    json doc;
    fs::path base;
};

inline std::string read_text(const fs::path& p, const std::string& field) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError(field, "cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json parse_json(const std::string& text, const std::string& field) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(field, std::string("malformed JSON: ") + e.what());
    }
}

inline ConfigDoc load_config(const fs::path& path) {
    ConfigDoc c{parse_json(read_text(path, "config"), "config"), path.parent_path()};
    fields::require_object(c.doc, "config");
    return c;
}

inline void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
    if (!out) throw Error("write failed: " + p.string());
}

inline void write_json(const fs::path& p, const json& doc) { write_file(p, doc.dump(1) + "\n"); }

namespace detail {

/// Existing file named by `key`, resolved against the config directory.
inline fs::path input_path(const ConfigDoc& c, const char* key) {
    const auto rel = fields::read<std::string>(c.doc, "", key);
    const fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : c.base / rel;
    if (!fs::is_regular_file(p)) throw ConfigError(key, "file not found: " + p.string());
    return p;
}

/// Dataset named by `key`; malformed files are configuration errors.
inline EmbeddingDataset dataset_field(const ConfigDoc& c, const char* key) {
    const fs::path p = input_path(c, key);
    try {
        return ingest_csv(p.string());
    } catch (const DataError& e) {
        throw ConfigError(key, e.what());
    }
}

inline std::uint64_t root_seed(const ConfigDoc& c, const Overrides& o) {
    if (o.seed) return *o.seed;
    if (c.doc.contains("seed")) return fields::read<std::uint64_t>(c.doc, "", "seed");
    throw ConfigError("seed", "missing field (give a seed in the config or --seed)");
}

inline EpisodeSpec episode_spec(const ConfigDoc& c) {
    EpisodeSpec e;
    if (!c.doc.contains("episode")) throw ConfigError("episode", "missing field");
    const auto& j = c.doc.at("episode");
    fields::known_keys(j, "episode", {"n_way", "k_shot", "test_per_class", "seeds"});
    e.n_way = fields::read_or<int>(j, "episode", "n_way", e.n_way);
    e.k_shot = fields::read_or<int>(j, "episode", "k_shot", e.k_shot);
    e.test_per_class = fields::read_or<int>(j, "episode", "test_per_class", e.test_per_class);
    e.seeds = fields::read_or<int>(j, "episode", "seeds", e.seeds);
    e.validate();
    return e;
}

/// A preset name ("PN", "FT", "all-off"), a pipeline file, or an inline document.
inline PipelineConfig pipeline_field(const ConfigDoc& c) {
    if (!c.doc.contains("pipeline")) throw ConfigError("pipeline", "missing field");
    const auto& v = c.doc.at("pipeline");
    if (v.is_object()) return config_from_json(v, "pipeline");
    const auto name = fields::as<std::string>(v, "pipeline");
    if (name == "all-off") return PipelineConfig::all_off();
    if (const auto p = parse_preset(name)) return preset_config(*p);
    const fs::path path = detail::input_path(c, "pipeline");
    return config_from_json(parse_json(read_text(path, "pipeline"), "pipeline"), "pipeline");
}

/// Inline suite document or a path to one. The root seed replaces the suite seed.
inline BenchSuite suite_field(const ConfigDoc& c, std::optional<std::uint64_t> seed) {
    if (!c.doc.contains("suite")) throw ConfigError("suite", "missing field");
    BenchSuite s = c.doc.at("suite").is_object()
                       ? suite_from_json(c.doc.at("suite"), "suite")
                       : suite_from_json(parse_json(read_text(input_path(c, "suite"), "suite"), "suite"), "suite");
    if (seed) s.seed = *seed;
    return s;
}

inline std::optional<std::uint64_t> optional_seed(const ConfigDoc& c, const Overrides& o) {
    if (o.seed) return o.seed;
    if (c.doc.contains("seed")) return fields::read<std::uint64_t>(c.doc, "", "seed");
    return std::nullopt;
}

inline Model<float> suite_model(const ConfigDoc& c, const BenchSuite& s, EventLog& log) {
    if (c.doc.contains("model")) return load_model(input_path(c, "model").string());
    log.emit({{"event", "pretrain"}, {"seed", s.seed}});
    return pretrain_suite_model(s);
}

inline SearchSpace space_field(const ConfigDoc& c) {
    const auto name = fields::read_or<std::string>(c.doc, "", "space", "full");
    if (name == "full") return full_space();
    if (const auto p = parse_preset(name)) return preset_space(*p);
    throw ConfigError("space", "expected \"full\", \"PN\" or \"FT\"");
}

inline fs::path prepare_out(const Overrides& o) {
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) throw Error("cannot create output directory " + o.out.string() + ": " + ec.message());
    return o.out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// pretrain
//
// {"dataset": "source.csv", "hidden": [64, 64], "epochs": 20, "lr", "batch_size", "decay"}
// or {"suite": ..., "export_data": bool} to pretrain the suite's source model.

inline std::vector<fs::path> cmd_pretrain(const ConfigDoc& c, const Overrides& o, EventLog&) {
    fields::known_keys(c.doc, "", {"seed", "dataset", "suite", "hidden", "epochs", "lr", "batch_size", "decay", "export_data"});
    const std::uint64_t seed = detail::root_seed(c, o);
    std::vector<fs::path> written;
    Model<float> model;
    if (c.doc.contains("suite")) {
        if (c.doc.contains("dataset")) throw ConfigError("dataset", "give either a dataset or a suite");
        const BenchSuite s = detail::suite_field(c, seed);
        const bool export_data = fields::read_or<bool>(c.doc, "", "export_data", false);
        const fs::path out = detail::prepare_out(o);
        model = pretrain_suite_model(s);
        if (export_data) {
            write_file(out / "source.csv", format_csv(source_dataset(s)));
            written.push_back(out / "source.csv");
            for (const auto& d : s.domains) {
                write_file(out / (d.name + ".csv"), format_csv(domain_dataset(s, d)));
                written.push_back(out / (d.name + ".csv"));
            }
        }
    } else {
        const auto ds = detail::dataset_field(c, "dataset");
        PretrainOptions po;
        po.lr = fields::read_or<double>(c.doc, "", "lr", po.lr);
        po.batch_size = fields::read_or<int>(c.doc, "", "batch_size", po.batch_size);
        po.decay = fields::read_or<double>(c.doc, "", "decay", po.decay);
        const int epochs = fields::read_or<int>(c.doc, "", "epochs", 20);
        const auto hidden = c.doc.contains("hidden") ? fields::read_list<int>(c.doc, "", "hidden") : std::vector<int>{64, 64};
        if (epochs < 0) throw ConfigError("epochs", "must be non-negative");
        if (po.lr <= 0) throw ConfigError("lr", "must be positive");
        if (po.batch_size < 2) throw ConfigError("batch_size", "must be at least 2");
        for (std::size_t i = 0; i < hidden.size(); ++i)
            if (hidden[i] < 1) throw ConfigError("hidden[" + std::to_string(i) + "]", "must be positive");
        detail::prepare_out(o);
        auto init = make_model<float>(ds.features.cols(), hidden, ds.n_classes(), derive(seed, 1));
        model = pretrain_source(ds, std::move(init), epochs, derive(seed, 2), po);
    }
    json doc = model_to_json(model);
    doc["seed"] = seed;
    write_json(o.out / "model.json", doc);
    written.push_back(o.out / "model.json");
    return written;
}

// ---------------------------------------------------------------------------
// adapt
//
// {"model": "model.json", "dataset": "target.csv", "episode": {...}, "pipeline": "PN" | path | {...}}
// Episode s is drawn with derive(derive(seed, 0), s) and adapted with derive(derive(seed, 1), s).

inline json adapt_report(const Model<float>& base, const EmbeddingDataset& ds, const EpisodeSpec& spec,
                         const PipelineConfig& cfg, std::uint64_t seed, int jobs) {
    std::vector<double> acc(static_cast<std::size_t>(spec.seeds));
    parallel_for(acc.size(), jobs, [&](std::size_t s) {
        const auto ep = sample_episode(ds, spec, derive(derive(seed, 0), s));
        acc[s] = evaluate(run_pipeline(base, ep.task, cfg, derive(derive(seed, 1), s)), ep.test);
    });
    return {{"schema", std::string(kAdaptReportSchema)},
            {"seed", seed},
            {"episode", {{"n_way", spec.n_way}, {"k_shot", spec.k_shot}, {"test_per_class", spec.test_per_class}, {"seeds", spec.seeds}}},
            {"pipeline", config_to_json(cfg)},
            {"accuracies", acc},
            {"mean", mean_of(acc)}};
}

inline std::vector<fs::path> cmd_adapt(const ConfigDoc& c, const Overrides& o, EventLog&) {
    fields::known_keys(c.doc, "", {"seed", "model", "dataset", "episode", "pipeline"});
    const std::uint64_t seed = detail::root_seed(c, o);
    const fs::path model_path = detail::input_path(c, "model");
    const auto ds = detail::dataset_field(c, "dataset");
    const EpisodeSpec spec = detail::episode_spec(c);
    const PipelineConfig cfg = detail::pipeline_field(c);
    const auto base = load_model(model_path.string());
    detail::prepare_out(o);
    write_json(o.out / "adapt_report.json", adapt_report(base, ds, spec, cfg, seed, o.jobs));
    return {o.out / "adapt_report.json"};
}

// ---------------------------------------------------------------------------
// search
//
// {"model", "dataset", "episode", "strategy": "from-scratch" | "transfer" | "oracle",
//  "budget", "space": "full" | "PN" | "FT", "collection" (transfer only)}
// The search runs under the root seed; its episode is drawn with derive(seed, 3).

inline std::vector<fs::path> cmd_search(const ConfigDoc& c, const Overrides& o, EventLog& log) {
    fields::known_keys(c.doc, "", {"seed", "model", "dataset", "episode", "strategy", "budget", "space", "collection"});
    const std::uint64_t seed = detail::root_seed(c, o);
    const auto strategy = fields::read<std::string>(c.doc, "", "strategy");
    if (strategy != "from-scratch" && strategy != "transfer" && strategy != "oracle")
        throw ConfigError("strategy", "expected \"from-scratch\", \"transfer\" or \"oracle\"");
    const fs::path model_path = detail::input_path(c, "model");
    const auto ds = detail::dataset_field(c, "dataset");
    const EpisodeSpec spec = detail::episode_spec(c);
    const SearchSpace space = detail::space_field(c);
    int budget = 0;
    PipelineCollection collection;
    if (strategy == "transfer") {
        if (!c.doc.contains("collection")) throw ConfigError("collection", "the transfer strategy needs a collection");
        if (c.doc.contains("budget")) throw ConfigError("budget", "transfer evaluates the whole collection; remove the budget");
        collection = load_collection(detail::input_path(c, "collection").string());
        if (collection.entries.empty()) throw ConfigError("collection", "collection has no valid entries");
        for (const auto& w : collection.warnings) log.emit({{"event", "warning"}, {"message", "collection " + w}});
    } else {
        budget = fields::read<int>(c.doc, "", "budget");
        if (budget < 1) throw ConfigError("budget", "must be at least 1");
    }
    const auto base = load_model(model_path.string());
    const fs::path out = detail::prepare_out(o);
    const auto ep = sample_episode(ds, spec, derive(seed, 3));
    SearchOptions so;
    so.jobs = o.jobs;
    so.progress = log.trial_progress();
    SearchResult r;
    if (strategy == "from-scratch") r = search_from_scratch(base, ep.task, space, budget, seed, so);
    else if (strategy == "oracle") r = search_oracle(base, ep.task, space, budget, ep.test, seed, so);
    else r = search_transfer(base, ep.task, collection.configs(), seed, so);
    r.warnings.insert(r.warnings.end(), collection.warnings.begin(), collection.warnings.end());
    json report = report_to_json(r);
    double test_acc = 0;
    try {
        test_acc = evaluate(run_pipeline(base, ep.task, r.best_trial().config, derive(seed, 4)), ep.test);
    } catch (const Error& e) {
        report["warnings"].push_back(std::string("winner failed on the full support set: ") + e.what());
    }
    report["test_accuracy"] = test_acc;
    write_json(out / "report.json", report);
    write_file(out / "best_pipeline.json", encode_config(r.best_trial().config) + "\n");
    return {out / "report.json", out / "best_pipeline.json"};
}

// ---------------------------------------------------------------------------
// bench
//
// {"suite": path | {...}, "model": optional checkpoint, "collection": optional (MAP-transfer)}

inline std::vector<fs::path> cmd_bench(const ConfigDoc& c, const Overrides& o, EventLog& log) {
    fields::known_keys(c.doc, "", {"seed", "suite", "model", "collection"});
    const BenchSuite s = detail::suite_field(c, detail::optional_seed(c, o));
    BenchOptions bo;
    bo.jobs = o.jobs;
    if (c.doc.contains("collection")) {
        const auto col = load_collection(detail::input_path(c, "collection").string());
        bo.collection = col.configs();
        for (const auto& w : col.warnings) log.emit({{"event", "warning"}, {"message", "collection " + w}});
    }
    if (s.uses("MAP-transfer") && bo.collection.empty())
        throw ConfigError("collection", "MAP-transfer needs a pipeline collection");
    if (c.doc.contains("model")) detail::input_path(c, "model");
    const fs::path out = detail::prepare_out(o);
    const auto base = detail::suite_model(c, s, log);
    bo.on_cell = [&log](const CellResult& r) {
        log.emit({{"event", "cell"}, {"approach", r.approach}, {"domain", r.domain}, {"shot", r.shot}, {"mean", r.mean}});
    };
    const auto r = run_bench(s, base, bo);
    write_file(out / "table.csv", bench_table_csv(r));
    write_file(out / "detail.csv", bench_detail_csv(r));
    write_json(out / "summary.json", bench_summary_json(r));
    std::vector<fs::path> written{out / "table.csv", out / "detail.csv", out / "summary.json"};
    if (s.uses("MAP")) {
        save_collection(r.collection(), (out / "collection.jsonl").string());
        written.push_back(out / "collection.jsonl");
    }
    return written;
}

// ---------------------------------------------------------------------------
// similarity
//
// {"suite", "model" (optional), "collection", "shot", "tasks": optional domain names}

inline std::vector<fs::path> cmd_similarity(const ConfigDoc& c, const Overrides& o, EventLog& log) {
    fields::known_keys(c.doc, "", {"seed", "suite", "model", "collection", "shot", "tasks"});
    const BenchSuite s = detail::suite_field(c, detail::optional_seed(c, o));
    if (!c.doc.contains("collection")) throw ConfigError("collection", "missing field");
    const auto col = load_collection(detail::input_path(c, "collection").string());
    for (const auto& w : col.warnings) log.emit({{"event", "warning"}, {"message", "collection " + w}});
    if (col.entries.size() < 2) throw ConfigError("collection", "need at least 2 pipelines to rank");
    const int shot = fields::read<int>(c.doc, "", "shot");
    if (shot < 1) throw ConfigError("shot", "must be positive");
    std::vector<std::string> tasks;
    if (c.doc.contains("tasks")) {
        tasks = fields::read_list<std::string>(c.doc, "", "tasks");
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            try {
                s.domain(tasks[i]);
            } catch (const ConfigError& e) {
                throw ConfigError("tasks[" + std::to_string(i) + "]", "no suite domain named \"" + tasks[i] + "\"");
            }
        }
    } else {
        for (const auto& d : s.domains) tasks.push_back(d.name);
    }
    if (c.doc.contains("model")) detail::input_path(c, "model");
    const fs::path out = detail::prepare_out(o);
    const auto base = detail::suite_model(c, s, log);
    const auto grid = cross_domain_grid(s, base, named_pipelines(col), tasks, shot, o.jobs);
    const auto report = similarity_report(grid);
    json doc = analysis_to_json(report, s.seed);
    doc["shot"] = shot;
    for (const auto& w : col.warnings) doc["warnings"].push_back("collection " + w);
    write_json(out / "analysis.json", doc);
    write_file(out / "cross_domain.csv", grid_csv(grid));
    return {out / "analysis.json", out / "cross_domain.csv"};
}

// ---------------------------------------------------------------------------

using Command = std::function<std::vector<fs::path>(const ConfigDoc&, const Overrides&, EventLog&)>;

inline const std::vector<std::pair<std::string, Command>>& commands() {
    static const std::vector<std::pair<std::string, Command>> all{
        {"pretrain", cmd_pretrain}, {"adapt", cmd_adapt}, {"search", cmd_search}, {"bench", cmd_bench}, {"similarity", cmd_similarity}};
    return all;
}

/// Runs one command and maps failures to exit codes: 0 success, 2 a
/// configuration or validation error, 3 anything that fails at run time.
/// Failures are reported as one "error" event.
inline int run_command(const std::string& name, const fs::path& config, const Overrides& o, EventLog& log) {
    try {
        const Command* cmd = nullptr;
        for (const auto& [n, c] : commands())
            if (n == name) cmd = &c;
        if (!cmd) throw ConfigError("command", "unknown command \"" + name + "\"");
        if (o.jobs < 1) throw ConfigError("jobs", "must be at least 1");
        const auto written = (*cmd)(load_config(config), o, log);
        json files = json::array();
        for (const auto& p : written) files.push_back(p.string());
        log.emit({{"event", "done"}, {"command", name}, {"outputs", files}});
        return 0;
    } catch (const ConfigError& e) {
        log.emit({{"event", "error"}, {"kind", "config"}, {"path", e.path()}, {"message", e.what()}, {"exit", 2}});
        return 2;
    } catch (const std::exception& e) {
        log.emit({{"event", "error"}, {"kind", "runtime"}, {"message", e.what()}, {"exit", 3}});
        return 3;
    }
}

}  // namespace adapt::cli
