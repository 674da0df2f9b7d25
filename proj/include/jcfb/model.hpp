#pragma once

#include <cstdint>

#include "jcfb/tensor.hpp"

namespace jcfb {

/// All physical and numerical parameters of a simulation run. Rates are in
/// inverse time units; output files quote times and frequencies in units
/// of the cavity-emitter coupling g.
struct ModelParams {
    double g = 1.0;              // cavity-emitter coupling
    double drive_amplitude = 0.0; // coherent drive on the emitter
    double kappa1 = 0.0;         // first (input/output) mirror rate
    double kappa2 = 0.0;         // second (feedback) mirror rate
    double tau = 0.0;            // feedback delay, must equal L*dt
    double phi = 0.0;            // round-trip feedback phase
    double delta = 0.0;          // detuning; zero means resonance
    double dt = 0.01;            // coarse-graining step
    std::int64_t n_fock_cavity = 4; // cavity states |0..N_c>
    std::int64_t d_bin = 3;      // Fock cutoff per time bin
    SvdPolicy svd{};

    std::int64_t d_sys() const { return 2 * (n_fock_cavity + 1); }
    bool has_feedback() const { return kappa2 > 0.0; }

    /// L = tau/dt, validated to be integral within 1e-9 relative.
    std::int64_t delay_bins() const;

    void validate() const;
};

// ---- operator builders (matrices as rank-2 ComplexTensor) ----

/// annihilation operator on an (n+1)-level truncated Fock space
ComplexTensor fock_annihilation(std::int64_t n_max);

/// 2x2 lowering operator on the emitter, basis {|g>, |e>}
ComplexTensor tls_lowering();

ComplexTensor kron(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor dagger(const ComplexTensor& m);

/// cavity annihilation embedded in the joint emitter (x) cavity space;
/// joint index = tls * (N_c + 1) + n (emitter slow, Fock fast)
ComplexTensor sys_cavity_annihilation(std::int64_t n_fock_cavity);
/// emitter lowering embedded in the joint space
ComplexTensor sys_tls_lowering(std::int64_t n_fock_cavity);

// ---- system initial states (unit-norm vectors on the joint space) ----

ComplexTensor ground_vacuum_init(std::int64_t n_fock_cavity);
ComplexTensor excited_vacuum_init(std::int64_t n_fock_cavity);
/// emitter ground, cavity Fock state |n>
ComplexTensor ground_fock_init(std::int64_t n_fock_cavity, std::int64_t n_photons);
/// emitter ground, truncated coherent state |alpha> (renormalized)
ComplexTensor ground_coherent_init(std::int64_t n_fock_cavity, Complex alpha);

// ---- step generator and unitary ----

/// H_S = g (a^dag sm + sp a) + E_A (sp + sm) + Delta (a^dag a + sp sm)
/// on the joint emitter (x) cavity space; Hermitian.
ComplexTensor system_hamiltonian(const ModelParams& p);

/// Anti-Hermitian generator of one coarse-grained step on the ordered
/// product space (new bin) (x) (system) (x) (delayed bin):
///   M = -i H_S dt
///       + sqrt(2 kappa1 dt) (b_new^dag a - a^dag b_new)
///       + sqrt(2 kappa2 dt) (e^{i phi} b_old^dag a - e^{-i phi} a^dag b_old)
ComplexTensor step_generator(const ModelParams& p);

enum class StepMode { exact_exponential, series };

/// Joint step propagator on (new bin, system, delayed bin), composite
/// row-major index ((new * d_sys) + sys) * d_bin + old.
struct StepUnitary {
    ComplexTensor matrix;
    std::int64_t d_bin = 0;
    std::int64_t d_sys = 0;
};

StepUnitary step_unitary(const ModelParams& p, StepMode mode = StepMode::exact_exponential,
                         int series_order = 4);

} // namespace jcfb
