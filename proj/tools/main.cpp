#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "cli/commands.hpp"
#include "nelson/errors.hpp"

int main(int argc, char** argv) {
    using namespace nelson::cli;
    CLI::App app{"Path-integral experiments for the renormalized Nelson model"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    RunRequest req;
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    unsigned threads = 0;
    for (const auto& name : command_names()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", config_path, "configuration file or a previous manifest.json")->required();
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "overrides rng.seed");
        sub->add_option("--threads", threads, "worker threads, 0 = hardware concurrency");
    }
    CLI11_PARSE(app, argc, argv);

    CLI::App* sub = app.get_subcommands().front();
    req.command = sub->get_name();
    req.out_dir = out_dir;
    if (sub->count("--seed")) req.seed = seed;
    if (sub->count("--threads")) req.threads = threads;
    try {
        req.config = load_json_file(config_path);
        const RunSummary s = execute(req);
        for (const auto& f : s.result.outputs) std::cout << (req.out_dir / f).string() << '\n';
        std::cout << (req.out_dir / "manifest.json").string() << '\n';
        return s.result.exit_code;
    } catch (const nelson::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
