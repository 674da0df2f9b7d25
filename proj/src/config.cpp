#include "jcfb/config.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "jcfb/kernels.hpp"
#include "jcfb/oracle.hpp"

namespace jcfb {

namespace fs = std::filesystem;
using nlohmann::json;

const char* job_mode_name(JobMode m) {
    switch (m) {
        case JobMode::simulate: return "simulate";
        case JobMode::correlations: return "correlations";
        case JobMode::spectrum: return "spectrum";
        case JobMode::trace_fft: return "trace-fft";
        case JobMode::linear_spectrum: return "linear-spectrum";
        case JobMode::poles: return "poles";
        case JobMode::oracle: return "oracle";
        case JobMode::sweep: return "sweep";
    }
    return "?";
}

namespace {

std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                               prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

[[noreturn]] void unknown_key(const std::string& section, const std::string& key,
                              std::span<const char* const> known) {
    std::string best;
    std::size_t best_d = std::string::npos;
    for (const char* k : known) {
        const std::size_t d = levenshtein(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    std::ostringstream os;
    os << "unknown key '" << key << "'";
    if (!section.empty()) os << " in section '" << section << "'";
    if (!best.empty()) os << "; nearest valid key is '" << best << "'";
    throw ConfigError(os.str());
}

void check_keys(const json& obj, const std::string& section, std::span<const char* const> known) {
    if (!obj.is_object()) throw ConfigError("section '" + section + "' must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::none_of(known.begin(), known.end(),
                         [&](const char* k) { return key == k; }))
            unknown_key(section, key, known);
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("key '") + key + "' has the wrong type");
    }
}

Recorder recorder_from_name(const std::string& name) {
    static constexpr const char* names[] = {"tls_population", "inversion",       "cavity_photons",
                                            "output_flux",    "instantaneous_g2", "bond_stats",
                                            "discarded_weight"};
    if (name == "tls_population") return Recorder::tls_population;
    if (name == "inversion") return Recorder::inversion;
    if (name == "cavity_photons") return Recorder::cavity_photons;
    if (name == "output_flux") return Recorder::output_flux;
    if (name == "instantaneous_g2") return Recorder::instantaneous_g2;
    if (name == "bond_stats") return Recorder::bond_stats;
    if (name == "discarded_weight") return Recorder::discarded_weight;
    unknown_key("run.recorders", name, names);
}

} // namespace

JobMode job_mode_from_name(const std::string& name) {
    static constexpr const char* names[] = {"simulate", "correlations",    "spectrum",
                                            "trace-fft", "linear-spectrum", "poles",
                                            "oracle",   "sweep"};
    for (int i = 0; i < 8; ++i)
        if (name == names[i]) return static_cast<JobMode>(i);
    unknown_key("mode", name, names);
}

ComplexTensor InitSpec::build(std::int64_t n_fock_cavity) const {
    if (type == "ground_vacuum") return ground_vacuum_init(n_fock_cavity);
    if (type == "excited_vacuum") return excited_vacuum_init(n_fock_cavity);
    if (type == "fock") return ground_fock_init(n_fock_cavity, n_photons);
    if (type == "coherent") return ground_coherent_init(n_fock_cavity, alpha);
    static constexpr const char* names[] = {"ground_vacuum", "excited_vacuum", "fock", "coherent"};
    unknown_key("run.init.type", type, names);
}

std::int64_t JobConfig::n_steps() const {
    const auto n = static_cast<std::int64_t>(std::llround(run.t_end / params.dt));
    if (n < 1) throw ConfigError("run.t_end must cover at least one step of dt");
    return n;
}

JobConfig parse_config(const json& doc) {
    static constexpr const char* top_keys[] = {"mode",    "out",     "jobs",      "params",
                                               "run",     "correlations", "spectrum",
                                               "trace_fft", "linear", "oracle",   "sweep",
                                               "emit"};
    check_keys(doc, "", top_keys);

    JobConfig cfg;
    cfg.mode = job_mode_from_name(get_or<std::string>(doc, "mode", "simulate"));
    cfg.out_dir = get_or<std::string>(doc, "out", "out");
    cfg.jobs = get_or<int>(doc, "jobs", 0);
    cfg.emit = get_or<std::vector<std::string>>(doc, "emit", {});

    if (doc.contains("params")) {
        static constexpr const char* keys[] = {"g",     "drive_amplitude", "kappa1",
                                               "kappa2", "tau",            "phi",
                                               "delta",  "dt",             "n_fock_cavity",
                                               "d_bin",  "svd_cutoff",     "max_bond"};
        const json& p = doc.at("params");
        check_keys(p, "params", keys);
        cfg.params.g = get_or<double>(p, "g", cfg.params.g);
        cfg.params.drive_amplitude = get_or<double>(p, "drive_amplitude", cfg.params.drive_amplitude);
        cfg.params.kappa1 = get_or<double>(p, "kappa1", cfg.params.kappa1);
        cfg.params.kappa2 = get_or<double>(p, "kappa2", cfg.params.kappa2);
        cfg.params.tau = get_or<double>(p, "tau", cfg.params.tau);
        cfg.params.phi = get_or<double>(p, "phi", cfg.params.phi);
        cfg.params.delta = get_or<double>(p, "delta", cfg.params.delta);
        cfg.params.dt = get_or<double>(p, "dt", cfg.params.dt);
        cfg.params.n_fock_cavity = get_or<std::int64_t>(p, "n_fock_cavity", cfg.params.n_fock_cavity);
        cfg.params.d_bin = get_or<std::int64_t>(p, "d_bin", cfg.params.d_bin);
        cfg.params.svd.singular_value_cutoff =
            get_or<double>(p, "svd_cutoff", cfg.params.svd.singular_value_cutoff);
        cfg.params.svd.max_bond_dimension =
            get_or<std::int64_t>(p, "max_bond", cfg.params.svd.max_bond_dimension);
    }

    if (doc.contains("run")) {
        static constexpr const char* keys[] = {"t_end",      "init",       "recorders",
                                               "record_stride", "g2_floor",
                                               "discarded_weight_abort", "step_mode",
                                               "series_order"};
        const json& r = doc.at("run");
        check_keys(r, "run", keys);
        cfg.run.t_end = get_or<double>(r, "t_end", cfg.run.t_end);
        cfg.run.record_stride = get_or<std::int64_t>(r, "record_stride", cfg.run.record_stride);
        cfg.run.g2_floor = get_or<double>(r, "g2_floor", cfg.run.g2_floor);
        cfg.run.discarded_weight_abort =
            get_or<double>(r, "discarded_weight_abort", cfg.run.discarded_weight_abort);
        cfg.run.series_order = get_or<int>(r, "series_order", cfg.run.series_order);
        const std::string mode = get_or<std::string>(r, "step_mode", "exact");
        if (mode == "exact") cfg.run.step_mode = StepMode::exact_exponential;
        else if (mode == "series") cfg.run.step_mode = StepMode::series;
        else {
            static constexpr const char* names[] = {"exact", "series"};
            unknown_key("run.step_mode", mode, names);
        }
        if (r.contains("recorders")) {
            cfg.run.recorders.clear();
            for (const auto& name : r.at("recorders"))
                cfg.run.recorders.insert(recorder_from_name(name.get<std::string>()));
        }
        if (r.contains("init")) {
            static constexpr const char* ikeys[] = {"type", "alpha", "alpha_im", "n_photons"};
            const json& init = r.at("init");
            check_keys(init, "run.init", ikeys);
            cfg.run.init.type = get_or<std::string>(init, "type", cfg.run.init.type);
            cfg.run.init.alpha = Complex(get_or<double>(init, "alpha", 0.0),
                                         get_or<double>(init, "alpha_im", 0.0));
            cfg.run.init.n_photons = get_or<std::int64_t>(init, "n_photons", 0);
        }
    }

    if (doc.contains("correlations")) {
        static constexpr const char* keys[] = {"max_lag", "base_bin", "flux_floor"};
        const json& c = doc.at("correlations");
        check_keys(c, "correlations", keys);
        cfg.correlations.max_lag = get_or<std::int64_t>(c, "max_lag", cfg.correlations.max_lag);
        if (c.contains("base_bin")) cfg.correlations.base_bin = c.at("base_bin").get<std::int64_t>();
        cfg.correlations.flux_floor = get_or<double>(c, "flux_floor", cfg.correlations.flux_floor);
    }

    if (doc.contains("spectrum")) {
        static constexpr const char* keys[] = {"omega_min", "omega_max", "n_omega", "normalize"};
        const json& s = doc.at("spectrum");
        check_keys(s, "spectrum", keys);
        cfg.spectrum.omega_min = get_or<double>(s, "omega_min", cfg.spectrum.omega_min);
        cfg.spectrum.omega_max = get_or<double>(s, "omega_max", cfg.spectrum.omega_max);
        cfg.spectrum.n_omega = get_or<std::int64_t>(s, "n_omega", cfg.spectrum.n_omega);
        const std::string norm = get_or<std::string>(s, "normalize", "raw");
        if (norm == "raw") cfg.spectrum.normalize = SpectrumNormalization::raw;
        else if (norm == "max") cfg.spectrum.normalize = SpectrumNormalization::max;
        else {
            static constexpr const char* names[] = {"raw", "max"};
            unknown_key("spectrum.normalize", norm, names);
        }
    }

    if (doc.contains("trace_fft")) {
        static constexpr const char* keys[] = {"trace", "window", "omega_min", "omega_max",
                                               "n_omega"};
        const json& t = doc.at("trace_fft");
        check_keys(t, "trace_fft", keys);
        cfg.trace_fft.trace = get_or<std::string>(t, "trace", cfg.trace_fft.trace);
        cfg.trace_fft.omega_min = get_or<double>(t, "omega_min", cfg.trace_fft.omega_min);
        cfg.trace_fft.omega_max = get_or<double>(t, "omega_max", cfg.trace_fft.omega_max);
        cfg.trace_fft.n_omega = get_or<std::int64_t>(t, "n_omega", cfg.trace_fft.n_omega);
        const std::string win = get_or<std::string>(t, "window", "none");
        if (win == "none") cfg.trace_fft.window = FourierWindow::none;
        else if (win == "hann") cfg.trace_fft.window = FourierWindow::hann;
        else {
            static constexpr const char* names[] = {"none", "hann"};
            unknown_key("trace_fft.window", win, names);
        }
    }

    if (doc.contains("linear")) {
        static constexpr const char* keys[] = {"re_min", "re_max", "im_min",
                                               "im_max", "grid_density", "include_drive_pole"};
        const json& l = doc.at("linear");
        check_keys(l, "linear", keys);
        cfg.linear.re_min = get_or<double>(l, "re_min", cfg.linear.re_min);
        cfg.linear.re_max = get_or<double>(l, "re_max", cfg.linear.re_max);
        cfg.linear.im_min = get_or<double>(l, "im_min", cfg.linear.im_min);
        cfg.linear.im_max = get_or<double>(l, "im_max", cfg.linear.im_max);
        cfg.linear.grid_density = get_or<int>(l, "grid_density", cfg.linear.grid_density);
        cfg.linear.include_drive_pole = get_or<bool>(l, "include_drive_pole", false);
    }

    if (doc.contains("oracle")) {
        static constexpr const char* keys[] = {"solver", "with_correlations"};
        const json& o = doc.at("oracle");
        check_keys(o, "oracle", keys);
        cfg.oracle.solver = get_or<std::string>(o, "solver", cfg.oracle.solver);
        if (cfg.oracle.solver != "auto" && cfg.oracle.solver != "closed" &&
            cfg.oracle.solver != "lindblad") {
            static constexpr const char* names[] = {"auto", "closed", "lindblad"};
            unknown_key("oracle.solver", cfg.oracle.solver, names);
        }
        cfg.oracle.with_correlations = get_or<bool>(o, "with_correlations", false);
    }

    if (doc.contains("sweep")) {
        static constexpr const char* keys[] = {"parameter", "values", "mode"};
        const json& s = doc.at("sweep");
        check_keys(s, "sweep", keys);
        cfg.sweep.parameter = get_or<std::string>(s, "parameter", "");
        cfg.sweep.values = get_or<std::vector<double>>(s, "values", {});
        cfg.sweep.mode = job_mode_from_name(get_or<std::string>(s, "mode", "simulate"));
    }

    if (cfg.mode == JobMode::sweep) {
        if (cfg.sweep.parameter.empty() || cfg.sweep.values.empty())
            throw ConfigError("sweep mode needs sweep.parameter and a nonempty sweep.values list");
        if (cfg.sweep.mode == JobMode::sweep) throw ConfigError("sweep.mode cannot be 'sweep'");
        for (double v : cfg.sweep.values)
            if (!std::isfinite(v)) throw ConfigError("sweep.values must be finite");
    }

    cfg.params.validate();
    return cfg;
}

nlohmann::json resolved_json(const JobConfig& cfg) {
    json doc;
    doc["mode"] = job_mode_name(cfg.mode);
    doc["out"] = cfg.out_dir;
    doc["jobs"] = cfg.jobs;
    doc["emit"] = cfg.emit;
    doc["params"] = {{"g", cfg.params.g},
                     {"drive_amplitude", cfg.params.drive_amplitude},
                     {"kappa1", cfg.params.kappa1},
                     {"kappa2", cfg.params.kappa2},
                     {"tau", cfg.params.tau},
                     {"phi", cfg.params.phi},
                     {"delta", cfg.params.delta},
                     {"dt", cfg.params.dt},
                     {"n_fock_cavity", cfg.params.n_fock_cavity},
                     {"d_bin", cfg.params.d_bin},
                     {"svd_cutoff", cfg.params.svd.singular_value_cutoff},
                     {"max_bond", cfg.params.svd.max_bond_dimension}};
    std::vector<std::string> recs;
    for (Recorder r : cfg.run.recorders) recs.push_back(recorder_name(r));
    doc["run"] = {{"t_end", cfg.run.t_end},
                  {"record_stride", cfg.run.record_stride},
                  {"g2_floor", cfg.run.g2_floor},
                  {"discarded_weight_abort", cfg.run.discarded_weight_abort},
                  {"step_mode", cfg.run.step_mode == StepMode::exact_exponential ? "exact" : "series"},
                  {"series_order", cfg.run.series_order},
                  {"recorders", recs},
                  {"init",
                   {{"type", cfg.run.init.type},
                    {"alpha", cfg.run.init.alpha.real()},
                    {"alpha_im", cfg.run.init.alpha.imag()},
                    {"n_photons", cfg.run.init.n_photons}}}};
    doc["correlations"] = {{"max_lag", cfg.correlations.max_lag},
                           {"flux_floor", cfg.correlations.flux_floor}};
    if (cfg.correlations.base_bin) doc["correlations"]["base_bin"] = *cfg.correlations.base_bin;
    doc["spectrum"] = {{"omega_min", cfg.spectrum.omega_min},
                       {"omega_max", cfg.spectrum.omega_max},
                       {"n_omega", cfg.spectrum.n_omega},
                       {"normalize",
                        cfg.spectrum.normalize == SpectrumNormalization::max ? "max" : "raw"}};
    doc["trace_fft"] = {{"trace", cfg.trace_fft.trace},
                        {"window", cfg.trace_fft.window == FourierWindow::hann ? "hann" : "none"},
                        {"omega_min", cfg.trace_fft.omega_min},
                        {"omega_max", cfg.trace_fft.omega_max},
                        {"n_omega", cfg.trace_fft.n_omega}};
    doc["linear"] = {{"re_min", cfg.linear.re_min},     {"re_max", cfg.linear.re_max},
                     {"im_min", cfg.linear.im_min},     {"im_max", cfg.linear.im_max},
                     {"grid_density", cfg.linear.grid_density},
                     {"include_drive_pole", cfg.linear.include_drive_pole}};
    doc["oracle"] = {{"solver", cfg.oracle.solver},
                     {"with_correlations", cfg.oracle.with_correlations}};
    if (cfg.mode == JobMode::sweep)
        doc["sweep"] = {{"parameter", cfg.sweep.parameter},
                        {"values", cfg.sweep.values},
                        {"mode", job_mode_name(cfg.sweep.mode)}};
    return doc;
}

JobConfig load_job(const std::optional<std::string>& config_path,
                   const std::vector<std::string>& overrides,
                   const std::optional<std::string>& mode_flag,
                   const std::optional<std::string>& out_flag, std::optional<int> jobs_flag) {
    json doc = json::object();
    if (config_path) {
        std::ifstream is(*config_path);
        if (!is) throw ConfigError("cannot open config file " + *config_path);
        try {
            doc = json::parse(is, nullptr, true, /*ignore_comments=*/true);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
        }
    }
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        const std::string path = kv.substr(0, eq);
        const std::string raw = kv.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::exception&) {
            value = raw; // plain string
        }
        json* node = &doc;
        std::size_t begin = 0;
        while (true) {
            const auto dot = path.find('.', begin);
            const std::string part = path.substr(begin, dot - begin);
            if (part.empty()) throw ConfigError("--set path has an empty component: " + path);
            if (dot == std::string::npos) {
                (*node)[part] = value;
                break;
            }
            node = &(*node)[part];
            begin = dot + 1;
        }
    }
    if (mode_flag) doc["mode"] = *mode_flag;
    if (out_flag) doc["out"] = *out_flag;
    if (jobs_flag) doc["jobs"] = *jobs_flag;
    return parse_config(doc);
}

// ---------------------------------------------------------------------------
// artifact emission
// ---------------------------------------------------------------------------

namespace {

class CsvWriter {
  public:
    CsvWriter(const fs::path& path, std::vector<std::string> columns)
        : final_path_(path), tmp_path_(path.string() + ".tmp"), columns_(std::move(columns)) {
        os_.open(tmp_path_);
        if (!os_) throw NumericalError("cannot open " + tmp_path_.string() + " for writing");
        for (std::size_t i = 0; i < columns_.size(); ++i)
            os_ << (i ? "," : "") << columns_[i];
        os_ << "\n";
    }

    void row(std::span<const double> values) {
        char buf[32];
        for (std::size_t i = 0; i < values.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
            os_ << (i ? "," : "") << buf;
        }
        os_ << "\n";
    }

    // atomically move into place
    void commit() {
        os_.close();
        fs::rename(tmp_path_, final_path_);
    }

  private:
    fs::path final_path_, tmp_path_;
    std::vector<std::string> columns_;
    std::ofstream os_;
};

void write_json_atomic(const fs::path& path, const json& doc) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw NumericalError("cannot open " + tmp.string() + " for writing");
        os << doc.dump(2) << "\n";
    }
    fs::rename(tmp, path);
}

double unit_scale(const ModelParams& p) { return p.g > 0 ? p.g : 1.0; }

void emit_timeseries(const fs::path& dir, const std::map<std::string, TimeSeries>& series,
                     const ModelParams& p, const std::vector<std::string>& emit,
                     std::vector<std::string>& outputs) {
    const double gs = unit_scale(p);
    std::vector<std::string> columns = {"gt"};
    std::vector<const TimeSeries*> picked;
    for (const auto& [label, ts] : series) {
        if (!emit.empty() && std::find(emit.begin(), emit.end(), label) == emit.end()) continue;
        columns.push_back(label == "output_flux" ? "output_flux_over_g" : label);
        picked.push_back(&ts);
    }
    if (picked.empty()) throw ConfigError("emit selection matches no recorded series");
    CsvWriter csv(dir / "timeseries.csv", columns);
    const std::size_t nrows = picked.front()->t.size();
    std::vector<double> row(columns.size());
    for (std::size_t i = 0; i < nrows; ++i) {
        row[0] = picked.front()->t[i] * gs;
        for (std::size_t c = 0; c < picked.size(); ++c) {
            double v = picked[c]->values[i];
            if (picked[c]->label == "output_flux") v /= gs;
            row[c + 1] = v;
        }
        csv.row(row);
    }
    csv.commit();
    outputs.push_back("timeseries.csv");
}

void emit_correlations(const fs::path& dir, const BinCorrelations& corr, const ModelParams& p,
                       std::vector<std::string>& outputs) {
    const double gs = unit_scale(p);
    CsvWriter csv(dir / "correlations.csv", {"g_tau_p", "re_g1", "im_g1", "abs_g1", "g2"});
    for (std::size_t i = 0; i < corr.g1.tau.size(); ++i) {
        const Complex g1 = corr.g1.values[i];
        csv.row(std::array<double, 5>{corr.g1.tau[i] * gs, g1.real(), g1.imag(), std::abs(g1),
                                      corr.g2.values[i].real()});
    }
    csv.commit();
    outputs.push_back("correlations.csv");
}

void emit_spectrum(const fs::path& dir, const std::string& name, const Spectrum& s,
                   const ModelParams& p, std::vector<std::string>& outputs) {
    const double gs = unit_scale(p);
    const bool normalized = s.normalization == SpectrumNormalization::max;
    CsvWriter csv(dir / name, {"omega_over_g", normalized ? "S_over_max" : "S_times_g"});
    for (std::size_t i = 0; i < s.omega.size(); ++i) {
        if (std::isnan(s.values[i])) continue; // singular grid points excluded
        csv.row(std::array<double, 2>{s.omega[i], normalized ? s.values[i] : s.values[i] * gs});
    }
    csv.commit();
    outputs.push_back(name);
}

struct RunArtifacts {
    RunResult result;
    json diagnostics;
};

RunArtifacts execute_run(const JobConfig& cfg, bool need_correlations) {
    RunPlan plan;
    plan.params = cfg.params;
    plan.n_steps = cfg.n_steps();
    plan.system_init = cfg.run.init.build(cfg.params.n_fock_cavity);
    plan.recorders = cfg.run.recorders;
    plan.record_stride = cfg.run.record_stride;
    plan.g2_floor = cfg.run.g2_floor;
    plan.discarded_weight_abort = cfg.run.discarded_weight_abort;
    plan.step_mode = cfg.run.step_mode;
    plan.series_order = cfg.run.series_order;
    if (need_correlations && plan.n_steps - 1 - (cfg.params.has_feedback() ? cfg.params.delay_bins() : 0) < 0)
        throw ConfigError("run too short to release any output bin");
    RunArtifacts art;
    art.result = run(plan);
    art.diagnostics = {{"max_bond", art.result.max_bond},
                       {"cumulative_discarded_weight", art.result.cumulative_discarded_weight},
                       {"final_norm", art.result.final_norm},
                       {"last_released_bin", art.result.last_released_bin},
                       {"run_wall_seconds", art.result.wall_seconds}};
    return art;
}

BinCorrelations run_correlations(const JobConfig& cfg, RunResult& result) {
    const std::int64_t base = cfg.correlations.base_bin.value_or(result.last_released_bin);
    if (base > result.last_released_bin)
        throw ConfigError("correlations.base_bin has pending interactions; latest released bin is " +
                          std::to_string(result.last_released_bin));
    const std::int64_t L = cfg.params.has_feedback() ? cfg.params.delay_bins() : 0;
    const std::int64_t available = base + L; // chain slots to the left of the base bin
    std::int64_t max_lag = cfg.correlations.max_lag;
    if (max_lag > available)
        throw ConfigError("correlations.max_lag " + std::to_string(max_lag) +
                          " exceeds the " + std::to_string(available) +
                          " released bins before the base bin");
    return bin_correlations(result.state, base, max_lag, cfg.params.dt,
                            cfg.correlations.flux_floor);
}

void run_oracle_job(const JobConfig& cfg, const fs::path& dir, json& manifest,
                    std::vector<std::string>& outputs) {
    const double stride_dt = cfg.params.dt * static_cast<double>(cfg.run.record_stride);
    std::vector<double> grid;
    for (double t = 0.0; t <= cfg.run.t_end + 1e-12; t += stride_dt) grid.push_back(t);

    bool closed = cfg.oracle.solver == "closed" ||
                  (cfg.oracle.solver == "auto" && cfg.params.kappa1 + cfg.params.kappa2 == 0.0);
    ModelParams p = cfg.params;
    // auto-escalate the cavity cutoff once if the top Fock levels fill up
    for (int attempt = 0; attempt < 2; ++attempt) {
        double top_pop = 0.0;
        std::map<std::string, TimeSeries> series;
        if (closed) {
            ClosedRun res = closed_evolve(system_hamiltonian(p), cfg.run.init.build(p.n_fock_cavity),
                                          grid, p.n_fock_cavity);
            top_pop = res.final_top_level_population;
            series = std::move(res.series);
            manifest["oracle"] = {{"solver", "closed"},
                                  {"cutoff_leak_warning", res.cutoff_leak_warning}};
        } else {
            LindbladRun res = lindblad_evolve(p, DensityMatrix::pure(cfg.run.init.build(p.n_fock_cavity)),
                                              grid);
            top_pop = res.final_top_level_population;
            series = std::move(res.series);
            manifest["oracle"] = {{"solver", "lindblad"},
                                  {"max_trace_error", res.max_trace_error},
                                  {"step_used", res.step_used}};
        }
        manifest["oracle"]["n_fock_cavity_used"] = p.n_fock_cavity;
        manifest["oracle"]["final_top_level_population"] = top_pop;
        if (top_pop >= 1e-8 && attempt == 0) {
            p.n_fock_cavity = 2 * p.n_fock_cavity + 2;
            manifest["oracle"]["cutoff_escalated"] = true;
            continue;
        }
        emit_timeseries(dir, series, p, cfg.emit, outputs);
        break;
    }

    if (cfg.oracle.with_correlations) {
        if (closed) throw ConfigError("oracle.with_correlations needs the lindblad solver");
        std::vector<double> lags;
        for (std::int64_t i = 0; i <= cfg.correlations.max_lag; ++i)
            lags.push_back(static_cast<double>(i) * p.dt);
        const CorrelationSeries g1 = regression_correlations(p, RegressionKind::g1, lags);
        const CorrelationSeries g2 = regression_correlations(p, RegressionKind::g2, lags);
        BinCorrelations corr;
        corr.g1 = g1;
        corr.g2 = g2;
        emit_correlations(dir, corr, p, outputs);
    }
}

void run_single_job(const JobConfig& cfg, const fs::path& dir, json& manifest,
                    std::vector<std::string>& outputs);

void run_sweep(const JobConfig& cfg, const fs::path& dir, json& manifest,
               std::vector<std::string>& outputs) {
    json base = resolved_json(cfg);
    base.erase("sweep");
    base["mode"] = job_mode_name(cfg.sweep.mode);

    const int n_points = static_cast<int>(cfg.sweep.values.size());
    std::vector<std::string> status(static_cast<std::size_t>(n_points), "ok");
    std::vector<std::string> dirs(static_cast<std::size_t>(n_points));

    int jobs = cfg.jobs > 0 ? cfg.jobs : kernels::hardware_threads();
    jobs = std::max(1, std::min(jobs, n_points));

#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
    for (int i = 0; i < n_points; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "point_%03d", i);
        dirs[static_cast<std::size_t>(i)] = name;
        const fs::path subdir = dir / name;
        try {
            json doc = base;
            // dotted sweep parameter, rooted at the config document
            json* node = &doc;
            std::string path = cfg.sweep.parameter;
            if (path.find('.') == std::string::npos) path = "params." + path;
            std::size_t begin = 0;
            while (true) {
                const auto dot = path.find('.', begin);
                const std::string part = path.substr(begin, dot - begin);
                if (dot == std::string::npos) {
                    if (!node->contains(part))
                        throw ConfigError("sweep.parameter '" + cfg.sweep.parameter +
                                          "' does not name an existing parameter");
                    (*node)[part] = cfg.sweep.values[static_cast<std::size_t>(i)];
                    break;
                }
                if (!node->contains(part))
                    throw ConfigError("sweep.parameter '" + cfg.sweep.parameter +
                                      "' does not name an existing parameter");
                node = &(*node)[part];
                begin = dot + 1;
            }
            JobConfig sub = parse_config(doc);
            sub.out_dir = subdir.string();
            fs::create_directories(subdir);
            json sub_manifest;
            std::vector<std::string> sub_outputs;
            run_single_job(sub, subdir, sub_manifest, sub_outputs);
            sub_manifest["outputs"] = sub_outputs;
            write_json_atomic(subdir / "manifest.json", sub_manifest);
            write_json_atomic(subdir / "resolved_config.json", resolved_json(sub));
        } catch (const std::exception& e) {
            status[static_cast<std::size_t>(i)] = std::string("failed: ") + e.what();
        }
    }

    CsvWriter index(dir / "index.csv", {"point", "value"});
    // a second textual index with directories and status
    {
        std::ofstream os(dir / "index.txt");
        for (int i = 0; i < n_points; ++i)
            os << dirs[static_cast<std::size_t>(i)] << "\t" << cfg.sweep.parameter << "="
               << cfg.sweep.values[static_cast<std::size_t>(i)] << "\t"
               << status[static_cast<std::size_t>(i)] << "\n";
    }
    for (int i = 0; i < n_points; ++i)
        index.row(std::array<double, 2>{static_cast<double>(i),
                                        cfg.sweep.values[static_cast<std::size_t>(i)]});
    index.commit();
    outputs.push_back("index.csv");
    outputs.push_back("index.txt");
    manifest["sweep"] = {{"parameter", cfg.sweep.parameter},
                         {"points", n_points},
                         {"mode", job_mode_name(cfg.sweep.mode)}};

    for (int i = 0; i < n_points; ++i)
        if (status[static_cast<std::size_t>(i)] != "ok")
            throw NumericalError("sweep point " + dirs[static_cast<std::size_t>(i)] +
                                 " failed: " + status[static_cast<std::size_t>(i)]);
}

void run_single_job(const JobConfig& cfg, const fs::path& dir, json& manifest,
                    std::vector<std::string>& outputs) {
    switch (cfg.mode) {
        case JobMode::simulate: {
            RunArtifacts art = execute_run(cfg, false);
            manifest["diagnostics"] = art.diagnostics;
            emit_timeseries(dir, art.result.series, cfg.params, cfg.emit, outputs);
            break;
        }
        case JobMode::correlations: {
            RunArtifacts art = execute_run(cfg, true);
            manifest["diagnostics"] = art.diagnostics;
            emit_timeseries(dir, art.result.series, cfg.params, cfg.emit, outputs);
            BinCorrelations corr = run_correlations(cfg, art.result);
            manifest["correlations"] = {{"base_flux", corr.base_flux},
                                        {"defined", corr.g1.defined()}};
            emit_correlations(dir, corr, cfg.params, outputs);
            break;
        }
        case JobMode::spectrum: {
            RunArtifacts art = execute_run(cfg, true);
            manifest["diagnostics"] = art.diagnostics;
            emit_timeseries(dir, art.result.series, cfg.params, cfg.emit, outputs);
            BinCorrelations corr = run_correlations(cfg, art.result);
            manifest["correlations"] = {{"base_flux", corr.base_flux},
                                        {"defined", corr.g1.defined()}};
            emit_correlations(dir, corr, cfg.params, outputs);
            if (!corr.g1.defined())
                throw NumericalError("output flux below floor: spectrum undefined");
            const double gs = unit_scale(cfg.params);
            const auto grid = uniform_grid(cfg.spectrum.omega_min * gs, cfg.spectrum.omega_max * gs,
                                           cfg.spectrum.n_omega);
            Spectrum s = power_spectrum(corr.g1, cfg.params.dt, grid, cfg.spectrum.normalize);
            for (auto& w : s.omega) w /= gs;
            emit_spectrum(dir, "spectrum.csv", s, cfg.params, outputs);
            break;
        }
        case JobMode::trace_fft: {
            RunArtifacts art = execute_run(cfg, false);
            manifest["diagnostics"] = art.diagnostics;
            emit_timeseries(dir, art.result.series, cfg.params, cfg.emit, outputs);
            const auto it = art.result.series.find(cfg.trace_fft.trace);
            if (it == art.result.series.end())
                throw ConfigError("trace_fft.trace '" + cfg.trace_fft.trace +
                                  "' is not among the recorded series");
            const double gs = unit_scale(cfg.params);
            const auto grid = uniform_grid(cfg.trace_fft.omega_min * gs,
                                           cfg.trace_fft.omega_max * gs, cfg.trace_fft.n_omega);
            Spectrum s = trace_fourier(it->second, cfg.trace_fft.window, grid);
            for (auto& w : s.omega) w /= gs;
            emit_spectrum(dir, "trace_fft.csv", s, cfg.params, outputs);
            break;
        }
        case JobMode::linear_spectrum: {
            const double gs = unit_scale(cfg.params);
            const auto grid = uniform_grid(cfg.spectrum.omega_min * gs, cfg.spectrum.omega_max * gs,
                                           cfg.spectrum.n_omega);
            LinearParams lp = LinearParams::from(cfg.params);
            Spectrum s = linear_spectrum(grid, lp, {cfg.linear.include_drive_pole});
            if (cfg.spectrum.normalize == SpectrumNormalization::max) {
                double peak = 0.0;
                for (double v : s.values)
                    if (!std::isnan(v)) peak = std::max(peak, v);
                if (peak > 0.0)
                    for (auto& v : s.values) v /= peak;
                s.normalization = SpectrumNormalization::max;
            }
            for (auto& w : s.omega) w /= gs;
            emit_spectrum(dir, "linear_spectrum.csv", s, cfg.params, outputs);
            break;
        }
        case JobMode::poles: {
            const double gs = unit_scale(cfg.params);
            LinearParams lp = LinearParams::from(cfg.params);
            PoleWindow window{cfg.linear.re_min * gs, cfg.linear.re_max * gs,
                              cfg.linear.im_min * gs, cfg.linear.im_max * gs};
            PoleSet poles = find_poles(lp, window, cfg.linear.grid_density);
            manifest["poles"] = {{"count", poles.poles.size()},
                                 {"boundary_count", poles.boundary_count},
                                 {"flagged_cells", poles.flagged.size()}};
            CsvWriter csv(dir / "poles.csv", {"re_s_over_g", "im_s_over_g", "abs_D_over_g"});
            for (std::size_t i = 0; i < poles.poles.size(); ++i)
                csv.row(std::array<double, 3>{poles.poles[i].real() / gs,
                                              poles.poles[i].imag() / gs,
                                              poles.residuals[i] / gs});
            csv.commit();
            outputs.push_back("poles.csv");
            break;
        }
        case JobMode::oracle:
            run_oracle_job(cfg, dir, manifest, outputs);
            break;
        case JobMode::sweep:
            run_sweep(cfg, dir, manifest, outputs);
            break;
    }
}

} // namespace

void run_job(const JobConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    json manifest;
    manifest["schema"] = "jcfb-manifest-1";
    manifest["mode"] = job_mode_name(cfg.mode);
    manifest["config"] = resolved_json(cfg);

    std::vector<std::string> outputs;
    try {
        run_single_job(cfg, dir, manifest, outputs);
    } catch (...) {
        // partial outputs stay marked: no manifest.json, aborted flag on record
        manifest["aborted"] = true;
        manifest["outputs"] = outputs;
        write_json_atomic(dir / "manifest.aborted.json", manifest);
        throw;
    }

    write_json_atomic(dir / "resolved_config.json", resolved_json(cfg));
    outputs.push_back("resolved_config.json");
    manifest["outputs"] = outputs;
    manifest["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json_atomic(dir / "manifest.json", manifest);
}

} // namespace jcfb
