// Command-line front end: parse a configuration, dispatch one experiment,
// and leave a self-documenting output directory (artifacts + resolved
// config + manifest with checksums).

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "shuttlechain/experiments.hpp"

using namespace shuttlechain;

int main(int argc, char** argv) {
    CLI::App app{"shuttlechain: driven electron-shuttle chain simulator"};
    app.set_version_flag("--version", std::string(version_string));
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 0;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"spectrum", "normal-mode spectrum across one full phi period"},
        {"chern", "band Chern numbers from the lattice field strength"},
        {"simulate", "integrate the chain and classify the steady state"},
        {"stability", "phi sweep of fixed-point spectra plus the single-shuttle window"},
        {"disorder", "stability ensembles under inter-cell coupling disorder"},
        {"calibrate", "tune the damping to place the single-shuttle window"},
    };
    for (const auto& [name, description] : commands) {
        auto* sub = app.add_subcommand(name, description);
        sub->add_option("--config", config_path, "INI configuration file (defaults used if absent)");
        sub->add_option("--out", out_dir, "output directory (overrides [run] out_dir)");
        sub->add_option("--seed", seed, "master seed (overrides [run] master_seed)");
        sub->add_option("--threads", threads, "worker threads, 0 = all cores (overrides [run] threads)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // bad invocations count as configuration errors
    }

    auto* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();

    RunConfig cfg;
    try {
        cfg = config_path.empty() ? parse_config_text("", "<builtin-defaults>")
                                  : parse_config(config_path);
        if (sub->count("--out") > 0) cfg.out_dir = out_dir;
        if (sub->count("--seed") > 0) cfg.master_seed = seed;
        if (sub->count("--threads") > 0) {
            if (threads < 0) throw config_error("--threads must be >= 0 (0 = hardware threads)");
            cfg.threads = threads;
        }
        if (cfg.out_dir.empty())
            throw config_error("no output directory: pass --out or set out_dir in [run]");
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }

    const std::string resolved = emit_config(cfg);
    try {
        RunRecorder rec(cfg.out_dir, command, hex_u64(fnv1a64(resolved)));
        try {
            rec.add("resolved_config.ini", resolved);
            const auto res = run_experiment(command, cfg, rec);
            rec.finish(res.status, res.exit_code == 0 ? "" : res.message);
            std::printf("%s\n", res.message.c_str());
            std::printf("wrote %s\n", rec.dir().string().c_str());
            return res.exit_code;
        } catch (const error& e) {
            rec.finish("error", e.what());
            std::fprintf(stderr, "error: %s\n", e.what());
            return 3;
        }
    } catch (const error& e) {
        // output directory itself could not be prepared
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
