#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <gtest/gtest.h>

#include "adapt/cli/main.hpp"

using namespace adapt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

BenchSuite tiny_suite() {
    BenchSuite s;
    s.seed = 11;
    s.dim = 8;
    s.layout = {4, 0.8, 0.4, 12, 0};
    s.source.classes = 5;
    s.source.per_class = 20;
    s.source.epochs = 2;
    s.source.hidden = {12};
    s.episode = {3, 2, 5, 2};
    s.shots = {2};
    s.domains = {{"a", {0.4, {}, 0.1, 0, {}, 0}}, {"b", {1.2, {}, 0.3, 0, {}, 0}}};
    s.approaches = {"PN", "FT"};
    s.baseline_budget = 0;
    return s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

void put(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class Cli : public ::testing::Test {
protected:
    static inline fs::path root;

    static void SetUpTestSuite() {
        root = fs::temp_directory_path() / ("adapt_cli_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
        put(root / "suite.json", suite_to_json(tiny_suite()).dump());
        put(root / "pretrain.json", json{{"suite", "suite.json"}, {"export_data", true}}.dump());
        ASSERT_EQ(run({"pretrain", (root / "pretrain.json").string(), "--seed", "11", "--out", (root / "data").string()}), 0);
    }

    static void TearDownTestSuite() { fs::remove_all(root); }

    static int run(std::vector<std::string> args, std::string* err_text = nullptr) {
        args.insert(args.begin(), "adapt");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream err;
        const int code = cli::cli_main(static_cast<int>(argv.size()), argv.data(), err);
        if (err_text) *err_text = err.str();
        return code;
    }

    static fs::path config(const std::string& name, const json& doc) {
        put(root / name, doc.dump());
        return root / name;
    }

    static json target_config(const json& extra) {
        json j{{"model", "data/model.json"}, {"dataset", "data/a.csv"}, {"episode", {{"n_way", 3}, {"k_shot", 2}, {"test_per_class", 5}, {"seeds", 2}}}};
        j.update(extra);
        return j;
    }
};

/// Last stderr line parsed as an event.
json last_event(const std::string& err) {
    std::istringstream in(err);
    std::string line, last;
    while (std::getline(in, line))
        if (!line.empty()) last = line;
    return json::parse(last);
}

}  // namespace

TEST_F(Cli, PretrainWritesReloadableDeterministicCheckpoint) {
    const auto first = slurp(root / "data" / "model.json");
    EXPECT_NO_THROW(load_model((root / "data" / "model.json").string()));
    EXPECT_EQ(load(root / "data" / "model.json").at("seed"), 11);
    EXPECT_EQ(load(root / "data" / "model.json").at("schema"), "map-model/1");
    ASSERT_EQ(run({"pretrain", (root / "pretrain.json").string(), "--seed", "11", "--out", (root / "again").string()}), 0);
    EXPECT_EQ(slurp(root / "again" / "model.json"), first);
    EXPECT_EQ(slurp(root / "again" / "a.csv"), slurp(root / "data" / "a.csv"));
    // Same model as the suite helper builds.
    EXPECT_EQ(encode_model(load_model((root / "data" / "model.json").string())), encode_model(pretrain_suite_model(tiny_suite())));
}

TEST_F(Cli, PretrainFromDataset) {
    const auto cfg = config("pt_csv.json", {{"dataset", "data/source.csv"}, {"hidden", {6}}, {"epochs", 1}, {"seed", 4}});
    ASSERT_EQ(run({"pretrain", cfg.string(), "--out", (root / "pt_csv").string()}), 0);
    const auto m = load_model((root / "pt_csv" / "model.json").string());
    EXPECT_EQ(m.input_width, 8);
    EXPECT_EQ(m.n_classes(), 5);
}

TEST_F(Cli, MissingDatasetIsConfigError) {
    const auto cfg = config("pt_missing.json", {{"dataset", "nowhere.csv"}, {"seed", 1}});
    std::string err;
    EXPECT_EQ(run({"pretrain", cfg.string(), "--out", (root / "x").string()}, &err), 2);
    const auto e = last_event(err);
    EXPECT_EQ(e.at("event"), "error");
    EXPECT_EQ(e.at("path"), "dataset");
    EXPECT_NE(e.at("message").get<std::string>().find("nowhere.csv"), std::string::npos);
}

TEST_F(Cli, UsageAndSeedErrors) {
    std::string err;
    EXPECT_EQ(run({"pretrain"}, &err), 2);
    EXPECT_EQ(last_event(err).at("kind"), "usage");
    EXPECT_EQ(run({"frobnicate", "x.json"}), 2);
    EXPECT_EQ(run({"adapt", (root / "missing.json").string()}), 2);
    const auto cfg = config("noseed.json", target_config({{"pipeline", "PN"}}));
    EXPECT_EQ(run({"adapt", cfg.string(), "--out", (root / "x").string()}, &err), 2);
    EXPECT_EQ(last_event(err).at("path"), "seed");
    const auto unknown = config("unknown.json", target_config({{"pipeline", "PN"}, {"seed", 1}, {"budgett", 3}}));
    EXPECT_EQ(run({"adapt", unknown.string()}, &err), 2);
    EXPECT_EQ(last_event(err).at("path"), "budgett");
}

TEST_F(Cli, RuntimeFailureExitsThree) {
    // 30 shots per class exceed the 12 examples each target class has.
    auto j = target_config({{"pipeline", "PN"}, {"seed", 1}});
    j["episode"]["k_shot"] = 30;
    std::string err;
    EXPECT_EQ(run({"adapt", config("too_many.json", j).string(), "--out", (root / "x").string()}, &err), 3);
    EXPECT_EQ(last_event(err).at("kind"), "runtime");
}

TEST_F(Cli, AdaptPresetAndMean) {
    const auto cfg = config("adapt_pn.json", target_config({{"pipeline", "PN"}, {"seed", 3}}));
    ASSERT_EQ(run({"adapt", cfg.string(), "--out", (root / "adapt_pn").string()}), 0);
    const auto r = load(root / "adapt_pn" / "adapt_report.json");
    EXPECT_EQ(r.at("schema"), "map-adapt/1");
    EXPECT_EQ(r.at("seed"), 3);
    EXPECT_EQ(r.at("pipeline"), config_to_json(preset_config(Preset::PN)));
    const auto acc = r.at("accuracies").get<std::vector<double>>();
    ASSERT_EQ(acc.size(), 2u);
    EXPECT_EQ(r.at("mean").get<double>(), (acc[0] + acc[1]) / 2);
}

TEST_F(Cli, AllOffReportsBaseAccuracy) {
    const auto cfg = config("adapt_off.json", target_config({{"pipeline", "all-off"}, {"seed", 3}}));
    ASSERT_EQ(run({"adapt", cfg.string(), "--out", (root / "adapt_off").string()}), 0);
    const auto acc = load(root / "adapt_off" / "adapt_report.json").at("accuracies").get<std::vector<double>>();
    const auto base = load_model((root / "data" / "model.json").string());
    const auto ds = ingest_csv((root / "data" / "a.csv").string());
    for (std::size_t s = 0; s < acc.size(); ++s) {
        const auto ep = sample_episode(ds, {3, 2, 5, 2}, derive(derive(3, 0), s));
        EXPECT_EQ(acc[s], evaluate(base, ep.test));
    }
}

TEST_F(Cli, SearchStrategies) {
    auto scratch = target_config({{"strategy", "from-scratch"}, {"budget", 1}, {"seed", 5}});
    ASSERT_EQ(run({"search", config("s1.json", scratch).string(), "--out", (root / "s1").string()}), 0);
    const auto r1 = load(root / "s1" / "report.json");
    EXPECT_EQ(r1.at("history").size(), 1u);
    EXPECT_EQ(r1.at("oracle"), false);
    EXPECT_EQ(r1.at("seed"), 5);
    EXPECT_NO_THROW(decode_config(slurp(root / "s1" / "best_pipeline.json")));

    auto oracle = target_config({{"strategy", "oracle"}, {"budget", 2}, {"seed", 5}});
    ASSERT_EQ(run({"search", config("so.json", oracle).string(), "--out", (root / "so").string()}), 0);
    EXPECT_EQ(load(root / "so" / "report.json").at("oracle"), true);

    auto transfer = target_config({{"strategy", "transfer"}, {"seed", 5}});
    std::string err;
    EXPECT_EQ(run({"search", config("st_bad.json", transfer).string(), "--out", (root / "x").string()}, &err), 2);
    EXPECT_EQ(last_event(err).at("path"), "collection");

    PipelineCollection col;
    col.entries = {{preset_config(Preset::PN), {"a", 2}, 0.5}, {preset_config(Preset::FT), {"a", 2}, 0.4}, {PipelineConfig::all_off(), {"b", 2}, 0.3}};
    save_collection(col, (root / "three.jsonl").string());
    transfer["collection"] = "three.jsonl";
    ASSERT_EQ(run({"search", config("st.json", transfer).string(), "--out", (root / "st").string()}), 0);
    EXPECT_EQ(load(root / "st" / "report.json").at("history").size(), 3u);
}

TEST_F(Cli, BenchTableAndDetailAgree) {
    ASSERT_EQ(run({"bench", config("bench.json", {{"suite", "suite.json"}, {"model", "data/model.json"}}).string(), "--out",
                   (root / "bench").string()}),
              0);
    const auto table = slurp(root / "bench" / "table.csv");
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
    const auto summary = load(root / "bench" / "summary.json");
    EXPECT_EQ(summary.at("schema"), "map-bench-summary/1");
    EXPECT_EQ(summary.at("seed"), 11);
    std::map<std::string, std::vector<double>> detail;
    std::istringstream in(slurp(root / "bench" / "detail.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
        detail[f[0] + "/" + f[1] + "/" + f[2]].push_back(std::stod(f[4]));
    }
    ASSERT_EQ(detail.size(), summary.at("cells").size());
    for (const auto& c : summary.at("cells")) {
        const auto& acc = detail.at(c.at("approach").get<std::string>() + "/" + c.at("domain").get<std::string>() + "/" +
                                    std::to_string(c.at("shot").get<int>()));
        double sum = 0;
        for (double a : acc) sum += a;
        EXPECT_DOUBLE_EQ(c.at("mean").get<double>(), sum / static_cast<double>(acc.size()));
    }
}

TEST_F(Cli, RerunsAreByteIdenticalAcrossJobs) {
    auto suite = suite_to_json(tiny_suite());
    suite["approaches"] = {"PN", "FT", "MAP"};
    suite["map_budget"] = 3;
    suite["baseline_budget"] = 2;
    const auto bench = config("bench_map.json", {{"suite", suite}, {"model", "data/model.json"}});
    ASSERT_EQ(run({"bench", bench.string(), "--out", (root / "j1").string(), "--jobs", "1"}), 0);
    ASSERT_EQ(run({"bench", bench.string(), "--out", (root / "j8").string(), "--jobs", "8"}), 0);
    for (const char* f : {"table.csv", "detail.csv", "summary.json", "collection.jsonl"})
        EXPECT_EQ(slurp(root / "j1" / f), slurp(root / "j8" / f)) << f;

    const auto sim = config("sim.json", {{"suite", "suite.json"}, {"model", "data/model.json"}, {"collection", "j1/collection.jsonl"}, {"shot", 2}});
    ASSERT_EQ(run({"similarity", sim.string(), "--out", (root / "sim1").string(), "--jobs", "1"}), 0);
    ASSERT_EQ(run({"similarity", sim.string(), "--out", (root / "sim8").string(), "--jobs", "8"}), 0);
    for (const char* f : {"analysis.json", "cross_domain.csv"}) EXPECT_EQ(slurp(root / "sim1" / f), slurp(root / "sim8" / f)) << f;

    const auto search = config("s_jobs.json", target_config({{"strategy", "from-scratch"}, {"budget", 3}, {"seed", 2}}));
    ASSERT_EQ(run({"search", search.string(), "--out", (root / "sj1").string(), "--jobs", "1"}), 0);
    ASSERT_EQ(run({"search", search.string(), "--out", (root / "sj8").string(), "--jobs", "8"}), 0);
    EXPECT_EQ(slurp(root / "sj1" / "report.json"), slurp(root / "sj8" / "report.json"));
}

TEST_F(Cli, SimilarityGridShape) {
    PipelineCollection col;
    col.entries = {{preset_config(Preset::PN), {"a", 2}, 0.5}, {preset_config(Preset::FT), {"b", 2}, 0.4}};
    save_collection(col, (root / "two.jsonl").string());
    const auto sim = config("sim2.json", {{"suite", "suite.json"}, {"model", "data/model.json"}, {"collection", "two.jsonl"}, {"shot", 2}, {"seed", 11}});
    ASSERT_EQ(run({"similarity", sim.string(), "--out", (root / "sim2").string()}), 0);
    const auto a = load(root / "sim2" / "analysis.json");
    EXPECT_EQ(a.at("schema"), "map-analysis/1");
    EXPECT_EQ(a.at("seed"), 11);
    EXPECT_EQ(a.at("cells"), 4);
    EXPECT_EQ(a.at("distance_matrix").size(), 2u);
    EXPECT_EQ(a.at("distance_matrix")[0].size(), 2u);
    EXPECT_EQ(a.at("pipelines"), (json{"a/2-shot", "b/2-shot"}));

    const auto bad = config("sim_bad.json", {{"suite", "suite.json"}, {"collection", "two.jsonl"}, {"shot", 2}, {"tasks", {"zzz"}}});
    std::string err;
    EXPECT_EQ(run({"similarity", bad.string(), "--out", (root / "x").string()}, &err), 2);
    EXPECT_EQ(last_event(err).at("path"), "tasks[0]");
}
