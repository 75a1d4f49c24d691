#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "irflow/cli.hpp"
#include "irflow/config.hpp"
#include "irflow/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"infrared flow laboratory for dressed one-electron ground states"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    int threads_override = 0;
    std::uint64_t seed_override = 0;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", config_path, "INI-style configuration file");
        if (config_required) c->required();
        sub->add_option("--out", out_override, "output directory (overrides config)");
        sub->add_option("--threads", threads_override, "worker threads (overrides config)");
        sub->add_option("--seed", seed_override, "RNG seed (overrides config)");
    };

    add_common(app.add_subcommand("flow", "run the multiscale flow, write flow.csv"), true);
    add_common(app.add_subcommand("verify", "run the flow plus all enabled checks"), true);
    add_common(app.add_subcommand("sweep", "re-run the flow along a parameter axis"), true);
    add_common(app.add_subcommand("selfcheck", "fast built-in consistency battery"), false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    irflow::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = irflow::parse_config(config_path);
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (threads_override > 0) cfg.threads = threads_override;
        if (seed_override != 0) cfg.seed = seed_override;
        cfg.finalize();
    } catch (const irflow::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    return irflow::execute(app.get_subcommands().front()->get_name(), cfg);
}
