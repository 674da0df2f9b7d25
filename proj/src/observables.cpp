#include "jcfb/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "jcfb/model.hpp"

namespace jcfb {

namespace {

// right environment update across one site, optionally with an operator
// inserted on the physical leg; env axes are (bra bond, ket bond)
ComplexTensor transfer_right_to_left(const ComplexTensor& site_tensor, const ComplexTensor* op,
                                     const ComplexTensor& env) {
    ComplexTensor mop = op ? contract(*op, {1}, site_tensor, {1}).permuted({1, 0, 2}) : site_tensor;
    ComplexTensor tmp = contract(mop, {2}, env, {1});                 // (l, d, rbar)
    return contract(site_tensor.conjugated(), {1, 2}, tmp, {1, 2});   // (lbar, l)
}

Complex close_left(const ComplexTensor& site_tensor, const ComplexTensor& op,
                   const ComplexTensor& env) {
    ComplexTensor mop = contract(op, {1}, site_tensor, {1}).permuted({1, 0, 2});
    ComplexTensor tmp = contract(mop, {2}, env, {1});                  // (l, d, rbar)
    ComplexTensor scalar = contract(site_tensor.conjugated(), {0, 1, 2}, tmp, {0, 1, 2});
    return scalar.data()[0];
}

CorrelationSeries undefined_series(std::int64_t max_lag, double dt, double base_time,
                                   const char* label) {
    CorrelationSeries s;
    s.label = label;
    s.base_time = base_time;
    s.normalization = 0.0;
    const auto nan = std::numeric_limits<double>::quiet_NaN();
    for (std::int64_t p = 0; p <= max_lag; ++p) {
        s.tau.push_back(static_cast<double>(p) * dt);
        s.values.emplace_back(nan, nan);
    }
    return s;
}

} // namespace

BinCorrelations bin_correlations(MpsState& state, std::int64_t base_bin, std::int64_t max_lag,
                                 double dt, double flux_floor) {
    if (max_lag < 0) throw ValidationError("bin_correlations: max_lag must be >= 0");
    const auto base_pos_opt = state.find_bin(base_bin);
    if (!base_pos_opt)
        throw DimensionError("bin_correlations: no bin with index " + std::to_string(base_bin));
    const std::int64_t base_pos = *base_pos_opt;
    if (base_pos - max_lag < 0)
        throw DimensionError("bin_correlations: max_lag reaches past the start of the chain");
    for (std::int64_t p = 0; p <= max_lag; ++p)
        if (state.site(base_pos - p).label.kind != SiteKind::bin)
            throw DimensionError("bin_correlations: lag range crosses the system site");

    state.move_center(base_pos);
    const double norm2 = std::pow(state.norm(), 2);
    const double base_time = static_cast<double>(base_bin) * dt;

    const std::int64_t d = state.physical_dim(base_pos);
    const ComplexTensor b = fock_annihilation(d - 1);
    const ComplexTensor bd = dagger(b);
    const ComplexTensor n_op = contract(bd, {1}, b, {0});
    const ComplexTensor bb = contract(b, {1}, b, {0});
    const ComplexTensor g2_num_op = contract(dagger(bb), {1}, bb, {0});

    const Complex m0 = state.expect(base_pos, n_op);
    const double flux_phys = m0.real() / norm2 / dt;

    BinCorrelations out;
    out.base_flux = flux_phys;
    if (flux_phys < flux_floor || m0.real() <= 0.0) {
        out.g1 = undefined_series(max_lag, dt, base_time, "g1");
        out.g2 = undefined_series(max_lag, dt, base_time, "g2");
        return out;
    }

    out.g1.label = "g1";
    out.g2.label = "g2";
    out.g1.base_time = out.g2.base_time = base_time;
    out.g1.normalization = flux_phys;
    out.g2.normalization = flux_phys * flux_phys;

    const double den1 = m0.real();
    const double den2 = den1 * den1;

    out.g1.tau.push_back(0.0);
    out.g1.values.emplace_back(1.0, 0.0); // exact by definition
    out.g2.tau.push_back(0.0);
    const Complex g2_zero_raw = state.expect(base_pos, g2_num_op);
    out.g2.values.emplace_back(std::max(0.0, g2_zero_raw.real() * norm2 / den2), 0.0);

    // environments dressed at the base bin: b^dag for g1, photon number for g2
    const ComplexTensor& base_tensor = state.site(base_pos).tensor;
    ComplexTensor env_start = ComplexTensor::identity(base_tensor.extent(2));
    ComplexTensor env_g1 = transfer_right_to_left(base_tensor, &bd, env_start);
    ComplexTensor env_g2 = transfer_right_to_left(base_tensor, &n_op, env_start);

    for (std::int64_t p = 1; p <= max_lag; ++p) {
        const std::int64_t pos = base_pos - p;
        const ComplexTensor& m = state.site(pos).tensor;
        const Complex raw_g1 = close_left(m, b, env_g1);       // <bdag_base b_far>
        const Complex raw_g2 = close_left(m, n_op, env_g2);    // <n_base n_far>
        out.g1.tau.push_back(static_cast<double>(p) * dt);
        out.g1.values.push_back(std::conj(raw_g1) / den1);
        out.g2.tau.push_back(static_cast<double>(p) * dt);
        out.g2.values.emplace_back(raw_g2.real() * norm2 / den2, 0.0);
        if (p < max_lag) {
            env_g1 = transfer_right_to_left(m, nullptr, env_g1);
            env_g2 = transfer_right_to_left(m, nullptr, env_g2);
        }
    }
    return out;
}

CorrelationSeries g1_output(MpsState& state, std::int64_t base_bin, std::int64_t max_lag,
                            double dt, double flux_floor) {
    return bin_correlations(state, base_bin, max_lag, dt, flux_floor).g1;
}

CorrelationSeries g2_output(MpsState& state, std::int64_t base_bin, std::int64_t max_lag,
                            double dt, double flux_floor) {
    return bin_correlations(state, base_bin, max_lag, dt, flux_floor).g2;
}

std::vector<double> uniform_grid(double lo, double hi, std::int64_t n) {
    if (n < 2) throw ValidationError("uniform_grid: need at least 2 points");
    std::vector<double> grid(static_cast<std::size_t>(n));
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::int64_t i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = lo + step * static_cast<double>(i);
    return grid;
}

Spectrum power_spectrum(const CorrelationSeries& g1, double dt, std::span<const double> omega,
                        SpectrumNormalization normalization) {
    const std::int64_t n = static_cast<std::int64_t>(g1.values.size());
    if (n < 16) throw ValidationError("power_spectrum: need at least 16 lags");

    const std::int64_t tail = std::max<std::int64_t>(1, n / 10);
    Complex g1_inf{};
    for (std::int64_t p = n - tail; p < n; ++p) g1_inf += g1.values[static_cast<std::size_t>(p)];
    g1_inf /= static_cast<double>(tail);

    Spectrum s;
    s.omega.assign(omega.begin(), omega.end());
    s.values.resize(omega.size());
    const std::int64_t nw = static_cast<std::int64_t>(omega.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t w = 0; w < nw; ++w) {
        const double om = omega[static_cast<std::size_t>(w)];
        Complex acc{};
        for (std::int64_t p = 0; p < n; ++p) {
            const Complex dev = g1.values[static_cast<std::size_t>(p)] - g1_inf;
            acc += dev * std::polar(1.0, om * g1.tau[static_cast<std::size_t>(p)]);
        }
        s.values[static_cast<std::size_t>(w)] = 2.0 * dt * acc.real();
    }

    if (normalization == SpectrumNormalization::max) {
        const double peak = *std::max_element(s.values.begin(), s.values.end());
        if (peak > 0.0)
            for (auto& v : s.values) v /= peak;
        s.normalization = SpectrumNormalization::max;
    }
    return s;
}

Spectrum trace_fourier(const TimeSeries& series, FourierWindow window,
                       std::span<const double> omega) {
    const std::int64_t n = static_cast<std::int64_t>(series.values.size());
    if (n < 2) throw ValidationError("trace_fourier: trace too short");
    const double dt = series.t[1] - series.t[0];
    for (std::int64_t i = 1; i < n; ++i) {
        const double step = series.t[static_cast<std::size_t>(i)] - series.t[static_cast<std::size_t>(i - 1)];
        if (std::abs(step - dt) > 1e-9 * std::max(std::abs(dt), 1.0))
            throw ValidationError("trace_fourier: series is not uniformly sampled");
    }

    double mean = 0.0;
    for (double v : series.values) mean += v;
    mean /= static_cast<double>(n);

    std::vector<double> weights(static_cast<std::size_t>(n), 1.0);
    if (window == FourierWindow::hann)
        for (std::int64_t j = 0; j < n; ++j)
            weights[static_cast<std::size_t>(j)] =
                0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(j) / static_cast<double>(n - 1)));

    Spectrum s;
    s.window = window == FourierWindow::hann ? "hann" : "none";
    s.omega.assign(omega.begin(), omega.end());
    s.values.resize(omega.size());
    const std::int64_t nw = static_cast<std::int64_t>(omega.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t w = 0; w < nw; ++w) {
        const double om = omega[static_cast<std::size_t>(w)];
        Complex acc{};
        for (std::int64_t j = 0; j < n; ++j) {
            const double x = series.values[static_cast<std::size_t>(j)] - mean;
            acc += x * weights[static_cast<std::size_t>(j)] *
                   std::polar(1.0, om * series.t[static_cast<std::size_t>(j)]);
        }
        s.values[static_cast<std::size_t>(w)] = std::abs(acc) * dt;
    }
    return s;
}

} // namespace jcfb
