#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "jcfb/evolution.hpp"
#include "jcfb/model.hpp"
#include "jcfb/observables.hpp"

namespace jcfb {

struct DensityMatrix {
    ComplexTensor matrix;

    static DensityMatrix pure(const ComplexTensor& psi);
    double trace() const;
    void validate(double tol = 1e-10) const; // Hermitian, unit trace, positive
};

/// Schroedinger evolution by eigendecomposition; exact up to
/// diagonalization error. Series: tls_population, inversion,
/// cavity_photons, instantaneous_g2, energy.
struct ClosedRun {
    std::map<std::string, TimeSeries> series;
    bool cutoff_leak_warning = false;          // top two Fock levels exceeded 1e-6
    double final_top_level_population = 0.0;   // at the last grid point
};
ClosedRun closed_evolve(const ComplexTensor& h, const ComplexTensor& psi0,
                        std::span<const double> t_grid, std::int64_t n_fock_cavity);

/// Fixed-step RK4 integration of
///   drho/dt = -i [H_S, rho] + 2 kappa_tot (a rho a^dag - {a^dag a, rho}/2),
/// kappa_tot = kappa1 + kappa2 (the no-feedback baseline). The step is
/// halved and the run retried until the trace is preserved to 1e-9.
struct LindbladRun {
    std::map<std::string, TimeSeries> series;
    DensityMatrix final_state;
    double max_trace_error = 0.0;
    double step_used = 0.0;
    double final_top_level_population = 0.0;
};
LindbladRun lindblad_evolve(const ModelParams& p, const DensityMatrix& rho0,
                            std::span<const double> t_grid);

/// Steady state of the same generator, by direct solve of the vectorized
/// fixed-point equations; throws if the fixed-point residual is above tol.
DensityMatrix steady_state(const ModelParams& p, double residual_tol = 1e-8);

enum class RegressionKind { g1, g2 };

/// Two-time output correlations in the no-feedback limit via the quantum
/// regression rule, normalized like the time-bin versions.
CorrelationSeries regression_correlations(const ModelParams& p, RegressionKind which,
                                          std::span<const double> lag_grid);

} // namespace jcfb
