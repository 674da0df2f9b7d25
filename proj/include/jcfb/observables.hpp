#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jcfb/evolution.hpp"
#include "jcfb/mps.hpp"

namespace jcfb {

/// Two-time output-field correlations over released bins, lag >= 0.
/// g1 is normalized so g1(0) = 1; g2 by the squared base flux. An
/// undefined series (base flux below floor) carries NaN values.
struct CorrelationSeries {
    std::vector<double> tau;     // lags, multiples of dt
    std::vector<Complex> values; // g1 complex; g2 real with zero imag
    double base_time = 0.0;      // time of the reference bin
    double normalization = 0.0;  // denominator used (flux resp. flux^2)
    std::string label;

    bool defined() const { return normalization > 0.0; }
};

struct BinCorrelations {
    CorrelationSeries g1;
    CorrelationSeries g2;
    double base_flux = 0.0;
};

/// One leftward transfer sweep computing both correlation functions:
///   g1(tau_p) = <b^dag(t) b(t+tau_p)> / <b^dag b>        (stationary form)
///   g2(tau_p) = <b^dag(t) b^dag(t') b(t') b(t)> / <b^dag b>^2
/// with the reference bin `base` as the late time. Only moves the gauge
/// center; the physical state is unchanged.
BinCorrelations bin_correlations(MpsState& state, std::int64_t base_bin, std::int64_t max_lag,
                                 double dt, double flux_floor = 1e-12);

CorrelationSeries g1_output(MpsState& state, std::int64_t base_bin, std::int64_t max_lag,
                            double dt, double flux_floor = 1e-12);
CorrelationSeries g2_output(MpsState& state, std::int64_t base_bin, std::int64_t max_lag,
                            double dt, double flux_floor = 1e-12);

enum class SpectrumNormalization { raw, max };

struct Spectrum {
    std::vector<double> omega;
    std::vector<double> values;
    SpectrumNormalization normalization = SpectrumNormalization::raw;
    std::string window = "none";
};

std::vector<double> uniform_grid(double lo, double hi, std::int64_t n);

/// S(w) = 2 dt Re sum_p [g1(tau_p) - g1_inf] e^{i w tau_p}, with g1_inf
/// estimated as the mean over the final 10% of lags. Small negative
/// excursions are expected from the finite-lag transform.
Spectrum power_spectrum(const CorrelationSeries& g1, double dt, std::span<const double> omega,
                        SpectrumNormalization normalization = SpectrumNormalization::raw);

enum class FourierWindow { none, hann };

/// Magnitude spectrum of a mean-subtracted (optionally Hann-windowed)
/// uniformly sampled trace.
Spectrum trace_fourier(const TimeSeries& series, FourierWindow window,
                       std::span<const double> omega);

} // namespace jcfb
