#pragma once

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adapt/cli/commands.hpp"

namespace adapt::cli {

/// Entry point shared by the binary and the tests. Argument errors exit 2.
inline int cli_main(int argc, const char* const* argv, std::ostream& err = std::cerr) {
    CLI::App app{"Adaptation pipelines for few-shot classification"};
    app.require_subcommand(1);
    std::string config;
    std::uint64_t seed = 0;
    std::string out = ".";
    int jobs = 1;
    for (const auto& [name, _] : commands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("config", config, "config document (JSON)")->required();
        sub->add_option("--seed", seed, "root seed; overrides the config");
        sub->add_option("--out", out, "output directory")->capture_default_str();
        sub->add_option("--jobs", jobs, "worker threads")->capture_default_str();
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        EventLog log(&err);
        log.emit({{"event", "error"}, {"kind", "usage"}, {"message", e.what()}, {"exit", 2}});
        return 2;
    }
    const auto* sub = app.get_subcommands().front();
    Overrides o;
    if (sub->count("--seed")) o.seed = seed;
    o.out = out;
    o.jobs = jobs;
    EventLog log(&err);
    return run_command(sub->get_name(), config, o, log);
}

}  // namespace adapt::cli
