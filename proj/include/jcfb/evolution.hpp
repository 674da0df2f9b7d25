#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "jcfb/model.hpp"
#include "jcfb/mps.hpp"

namespace jcfb {

enum class Recorder {
    tls_population,
    inversion,
    cavity_photons,
    output_flux,
    instantaneous_g2,
    bond_stats,
    discarded_weight,
};

const char* recorder_name(Recorder r);

/// Uniformly sampled real observable record.
struct TimeSeries {
    std::vector<double> t;
    std::vector<double> values;
    std::string label;
};

struct RunPlan {
    ModelParams params;
    std::int64_t n_steps = 1;
    ComplexTensor system_init; // unit-norm vector on the joint system space
    std::set<Recorder> recorders = {Recorder::tls_population, Recorder::cavity_photons};
    std::int64_t record_stride = 1;
    double g2_floor = 1e-8;
    double discarded_weight_abort = 1e-4;
    StepMode step_mode = StepMode::exact_exponential;
    int series_order = 4;

    void validate() const;
};

struct RunResult {
    MpsState state;
    std::map<std::string, TimeSeries> series; // keyed by recorder name (+ "norm")
    double final_norm = 1.0;
    double cumulative_discarded_weight = 0.0;
    std::int64_t max_bond = 1;
    std::int64_t last_released_bin = -1; // bins <= this completed all interactions
    double wall_seconds = 0.0;
};

/// Coarse-grained unitary evolution: per step the delayed bin is swapped
/// next to the system, the joint three-site step unitary is applied, and
/// the bin is swapped back. Without feedback (kappa2 == 0) a two-site step
/// is used. Recorders are sampled every record_stride steps.
RunResult run(const RunPlan& plan);

/// <dR^dag dR>/dt of a released bin (nonnegative photon flux).
double output_flux(const MpsState& state, std::int64_t bin_index, double dt,
                   std::int64_t last_released_bin);

/// Normal-ordered instantaneous cavity correlation <adag adag a a>/<adag a>^2
/// at the system site; returns NaN (the undefined marker) when the photon
/// number is below the floor.
double instantaneous_g2(const MpsState& state, std::int64_t n_fock_cavity, double floor = 1e-8);

} // namespace jcfb
