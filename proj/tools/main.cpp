// phasejump CLI: scenario orchestration over the header-only library.
// Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 acceptance-check
// failure.  PHASEJUMP_OUT sets the default output directory.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include <phasejump/phasejump.hpp>

namespace {

struct CliOverrides {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    long long n = -1;
    long long threads = -1;
    bool force = false;
};

constexpr struct {
    const char* name;
    const char* help;
} kScenarios[] = {
    {"integrate", "deterministic Bloch integration time series"},
    {"find-jump", "search the measurement-pulse jump phase and report the design"},
    {"trajectories", "quantum-jump Monte Carlo ensemble"},
    {"selection", "selection-rules discrimination scheme statistics"},
    {"hv-test", "phase-dependence detection on sampled outcomes"},
    {"sweep", "cross-product parameter grids with deterministic sub-seeds"},
    {"fig3", "pulse-design figure bundle (P2(t), landscape, budget, phase)"},
    {"fig1", "waiting-time law and continuous-vs-pulsed phase selectivity"},
};

int run(const std::string& scenario, const CliOverrides& cli) {
    using phasejump::config::RunConfig;
    RunConfig cfg = cli.config_path.empty()
                        ? RunConfig{}
                        : RunConfig::from_file(cli.config_path);
    cfg.scenario = scenario;
    if (cli.seed >= 0) cfg.ensemble.seed = std::uint64_t(cli.seed);
    if (cli.n > 0) cfg.ensemble.n_trajectories = cli.n;
    if (cli.threads >= 0) cfg.ensemble.threads = cli.threads;
    cfg.validate();

    // --out places the artifacts but is not part of the experiment identity,
    // so a manifest re-run into a fresh directory stays bitwise identical
    const std::filesystem::path dir =
        cli.out_dir.empty() ? phasejump::config::resolve_output_dir(cfg)
                            : std::filesystem::path(cli.out_dir);
    const auto res = phasejump::scenario::run_scenario(cfg, dir, cli.force);
    nlohmann::json line = res.summary;
    line["output_directory"] = dir.string();
    std::puts(line.dump().c_str());
    return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"phasejump: phase-specific measurement pulse toolkit"};
    app.require_subcommand(1);

    CliOverrides cli;
    std::string chosen;
    for (const auto& sc : kScenarios) {
        CLI::App* sub = app.add_subcommand(sc.name, sc.help);
        sub->add_option("-c,--config", cli.config_path,
                        "JSON config file (or a manifest from a prior run)");
        sub->add_option("-o,--out", cli.out_dir,
                        "output directory (overrides config and PHASEJUMP_OUT)");
        sub->add_option("--seed", cli.seed, "RNG seed override");
        sub->add_option("-n,--n-trajectories", cli.n, "ensemble size override");
        sub->add_option("--threads", cli.threads, "worker threads (0 = auto)");
        sub->add_flag("--force", cli.force,
                      "allow writing over a different run's output directory");
        sub->callback([&chosen, name = std::string(sc.name)] { chosen = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        return run(chosen, cli);
    } catch (const phasejump::ConfigError& e) {
        std::fprintf(stderr, "phasejump %s: config error: %s\n", chosen.c_str(),
                     e.what());
        return 2;
    } catch (const phasejump::NumericsError& e) {
        std::fprintf(stderr, "phasejump %s: numerics error: %s\n",
                     chosen.c_str(), e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "phasejump %s: error: %s\n", chosen.c_str(),
                     e.what());
        return 3;
    }
}
