#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jcfb/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"jcfb - time-bin MPS simulator for the Jaynes-Cummings model "
                 "with time-delayed coherent feedback"};
    app.footer("Exit codes: 0 success, 2 config error, 3 numerical failure.\n"
               "Config keys are documented in README.md; every run echoes its fully\n"
               "resolved configuration next to the outputs.");

    std::optional<std::string> config_path;
    std::optional<std::string> mode;
    std::optional<std::string> out_dir;
    std::optional<int> jobs;
    std::vector<std::string> overrides;

    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--mode", mode,
                   "simulate | correlations | spectrum | trace-fft | linear-spectrum | poles | "
                   "oracle | sweep");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--jobs", jobs, "worker pool size for sweeps (default: machine parallelism)");
    app.add_option("--set", overrides, "override a config key, e.g. --set params.tau=9.0")
        ->take_all();

    CLI11_PARSE(app, argc, argv);

    try {
        const jcfb::JobConfig cfg = jcfb::load_job(config_path, overrides, mode, out_dir, jobs);
        jcfb::run_job(cfg);
        std::printf("done: %s -> %s\n", jcfb::job_mode_name(cfg.mode), cfg.out_dir.c_str());
        return 0;
    } catch (const jcfb::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const jcfb::ValidationError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const jcfb::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
