#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "jcfb/model.hpp"
#include "jcfb/observables.hpp"

namespace jcfb {

/// Parameters of the single-excitation (coupled-oscillator) delay model.
struct LinearParams {
    double g = 1.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double tau = 0.0;
    double phi = 0.0;
    double delta = 0.0;
    double drive_amplitude = 0.0;

    double kappa() const { return kappa1 + kappa2; }
    double feedback_rate() const { return 2.0 * std::sqrt(kappa1 * kappa2); } // k

    void validate() const;
    static LinearParams from(const ModelParams& p);
};

/// Zero-delay amplitude decay coefficient kappa1 + kappa2 + 2 sqrt(k1 k2) e^{i phi}.
Complex effective_decay(double kappa1, double kappa2, double phi);

/// D(s) = s + kappa + i Delta + k e^{-s tau + i phi} - g^2 / (s + i Delta);
/// its zeros are the characteristic roots of the delayed cavity response.
Complex transfer_denominator(Complex s, const LinearParams& p);
Complex transfer_denominator_derivative(Complex s, const LinearParams& p);

struct PoleWindow {
    double re_min = -2.0;
    double re_max = 0.0;
    double im_min = -2.0;
    double im_max = 2.0;
};

struct PoleSet {
    std::vector<Complex> poles;
    std::vector<double> residuals;    // |D| at each pole
    PoleWindow window;
    int grid_density = 16;
    std::int64_t boundary_count = 0;  // zeros inside per the argument principle
    std::vector<Complex> flagged;     // centers of unresolved subcells
};

/// All zeros of D inside the window, located by recursive argument-principle
/// counting with Newton refinement (analytic derivative). Subcells whose
/// root count cannot be resolved are flagged, never dropped.
PoleSet find_poles(const LinearParams& p, PoleWindow window, int grid_density = 16);

struct LinearSpectrumOptions {
    // keep the s^2 (s^2 + Delta^2) drive-pole factor in the denominator;
    // off by default (that factor belongs to the coherent peak)
    bool include_drive_pole_factor = false;
};

/// Steady-drive spectral envelope of the linear model evaluated on the
/// grid with s = -i omega; singular grid points come back as NaN.
Spectrum linear_spectrum(std::span<const double> omega, const LinearParams& p,
                         LinearSpectrumOptions opts = {});

} // namespace jcfb
