#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jcfb/evolution.hpp"
#include "jcfb/linear.hpp"
#include "jcfb/observables.hpp"

namespace jcfb {

enum class JobMode {
    simulate,
    correlations,
    spectrum,
    trace_fft,
    linear_spectrum,
    poles,
    oracle,
    sweep,
};

const char* job_mode_name(JobMode m);
JobMode job_mode_from_name(const std::string& name);

struct InitSpec {
    std::string type = "ground_vacuum"; // ground_vacuum | excited_vacuum | fock | coherent
    Complex alpha{};
    std::int64_t n_photons = 0;

    ComplexTensor build(std::int64_t n_fock_cavity) const;
};

struct RunSection {
    double t_end = 10.0;
    InitSpec init;
    std::set<Recorder> recorders = {Recorder::tls_population, Recorder::inversion,
                                    Recorder::cavity_photons, Recorder::output_flux,
                                    Recorder::bond_stats, Recorder::discarded_weight};
    std::int64_t record_stride = 1;
    double g2_floor = 1e-8;
    double discarded_weight_abort = 1e-4;
    StepMode step_mode = StepMode::exact_exponential;
    int series_order = 4;
};

struct CorrelationSection {
    std::int64_t max_lag = 5000;              // in bins
    std::optional<std::int64_t> base_bin;     // default: latest released bin
    double flux_floor = 1e-12;
};

struct SpectrumSection {
    double omega_min = -3.0; // units of g
    double omega_max = 3.0;
    std::int64_t n_omega = 1201;
    SpectrumNormalization normalize = SpectrumNormalization::raw;
};

struct TraceFftSection {
    std::string trace = "inversion";
    FourierWindow window = FourierWindow::none;
    double omega_min = 0.0; // units of g
    double omega_max = 8.0;
    std::int64_t n_omega = 2001;
};

struct LinearSection {
    double re_min = -2.0; // units of g
    double re_max = 0.0;
    double im_min = -2.0;
    double im_max = 2.0;
    int grid_density = 16;
    bool include_drive_pole = false;
};

struct OracleSection {
    std::string solver = "auto"; // auto | closed | lindblad
    bool with_correlations = false;
};

struct SweepSection {
    std::string parameter; // dotted key, e.g. "params.tau"
    std::vector<double> values;
    JobMode mode = JobMode::simulate;
};

struct JobConfig {
    JobMode mode = JobMode::simulate;
    ModelParams params;
    RunSection run;
    CorrelationSection correlations;
    SpectrumSection spectrum;
    TraceFftSection trace_fft;
    LinearSection linear;
    OracleSection oracle;
    SweepSection sweep;
    std::vector<std::string> emit; // column selection, empty = all
    std::string out_dir = "out";
    int jobs = 0; // 0 = machine parallelism

    std::int64_t n_steps() const;
};

/// Validates every key (unknown keys are rejected with the nearest valid
/// name) and applies documented defaults.
JobConfig parse_config(const nlohmann::json& doc);

/// Full echo of a config, defaults included; re-parses to the same job.
nlohmann::json resolved_json(const JobConfig& cfg);

/// Reads the config file (JSON, optional), applies --set overrides
/// (dotted paths, values parsed as JSON scalars), then parses.
JobConfig load_job(const std::optional<std::string>& config_path,
                   const std::vector<std::string>& overrides,
                   const std::optional<std::string>& mode_flag,
                   const std::optional<std::string>& out_flag, std::optional<int> jobs_flag);

/// Runs the job and writes all artifacts (CSV outputs, resolved_config.json,
/// manifest.json) into cfg.out_dir. Throws ConfigError / ValidationError for
/// bad inputs and NumericalError for mid-run failures.
void run_job(const JobConfig& cfg);

} // namespace jcfb
