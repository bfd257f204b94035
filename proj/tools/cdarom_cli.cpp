#include <CLI11.hpp>
#include <Eigen/Core>
#include <cmath>
#include <iostream>

#include "cdarom/error.hpp"
#include "cdarom/pipeline.hpp"
#include "cdarom/version.hpp"

namespace {

enum ExitCode { ok = 0, other_failure = 1, config_failure = 2, numerical_failure = 3 };

}  // namespace

int main(int argc, char** argv) {
    using namespace cdarom;
    CLI::App app{"Continuous data assimilation reduced-order model pipeline"};
    app.set_version_flag("--version", std::string(version_string));
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path, out_dir;
    bool sweep = false;
    std::uint64_t seed = 0;
    int threads = 1;
    app.add_option("--config", config_path, "Configuration file")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory (overrides output.dir)");
    app.add_flag("--sweep", sweep, "rom: run r in {8, 19} x gamma in {0, 100}");
    app.add_option("--seed", seed, "Reserved; recorded but unused");
    app.add_option("--threads", threads, "Concurrent sweep points")->check(CLI::Range(1, 256));

    auto* fom = app.add_subcommand("fom", "Run the full-order model and store snapshots");
    auto* pod = app.add_subcommand("pod", "Compute the POD basis from stored snapshots");
    auto* rom = app.add_subcommand("rom", "Run the (data-assimilated) reduced model");
    auto* report = app.add_subcommand("report", "Summarize stored results");
    auto* verify = app.add_subcommand("verify", "Run the invariant property suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_failure;
    }

    CommandOptions opt;
    opt.out = out_dir;
    opt.sweep = sweep;
    opt.threads = threads;
    opt.seed = seed;
    opt.log = &std::cout;
    Eigen::setNbThreads(1);

    try {
        if (verify->parsed()) {
            std::unique_ptr<PipelineConfig> cfg;
            if (!config_path.empty()) cfg = std::make_unique<PipelineConfig>(load_config(config_path));
            return cmd_verify(cfg.get(), opt).passed() ? ok : other_failure;
        }
        if (config_path.empty()) throw ConfigError("--config is required for this command");
        const PipelineConfig cfg = load_config(config_path);
        if (sweep && !rom->parsed()) throw ConfigError("--sweep applies to the rom command only");
        if (fom->parsed()) cmd_fom(cfg, opt);
        if (pod->parsed()) cmd_pod(cfg, opt);
        if (rom->parsed()) cmd_rom(cfg, opt);
        if (report->parsed()) cmd_report(cfg, opt);
        return ok;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return config_failure;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return other_failure;
    }
}
