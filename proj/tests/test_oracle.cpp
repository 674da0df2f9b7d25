#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "jcfb/model.hpp"
#include "jcfb/oracle.hpp"

using namespace jcfb;

namespace {

std::vector<double> grid(double t_end, double dt) {
    std::vector<double> g;
    for (double t = 0.0; t <= t_end + 1e-12; t += dt) g.push_back(t);
    return g;
}

} // namespace

TEST_CASE("closed_evolve: vacuum Rabi oscillation P_e(t) = cos^2(gt)") {
    ModelParams p;
    p.g = 1.0;
    p.n_fock_cavity = 1;
    p.dt = 0.01;
    ClosedRun run = closed_evolve(system_hamiltonian(p), excited_vacuum_init(p.n_fock_cavity),
                                  grid(5.0, 0.05), p.n_fock_cavity);
    const auto& ts = run.series.at("tls_population");
    for (std::size_t i = 0; i < ts.t.size(); ++i)
        CHECK(ts.values[i] == doctest::Approx(std::pow(std::cos(ts.t[i]), 2)).epsilon(1e-10));
}

TEST_CASE("closed_evolve: energy is conserved under drive") {
    ModelParams p;
    p.g = 1.0;
    p.drive_amplitude = 2.0;
    p.n_fock_cavity = 20;
    p.dt = 0.01;
    ClosedRun run = closed_evolve(system_hamiltonian(p), ground_vacuum_init(p.n_fock_cavity),
                                  grid(20.0, 0.1), p.n_fock_cavity);
    const auto& e = run.series.at("energy");
    for (double v : e.values) CHECK(std::abs(v - e.values.front()) < 1e-10);
}

TEST_CASE("closed_evolve: collapse and revival of a coherent cavity state") {
    ModelParams p;
    p.g = 1.0;
    p.n_fock_cavity = 24;
    p.dt = 0.01;
    ClosedRun run = closed_evolve(system_hamiltonian(p), ground_coherent_init(p.n_fock_cavity, std::sqrt(6.0)),
                                  grid(20.0, 0.02), p.n_fock_cavity);
    CHECK_FALSE(run.cutoff_leak_warning);
    const auto& inv = run.series.at("inversion");
    auto window_amp = [&](double lo, double hi) {
        double amp = 0.0;
        for (std::size_t i = 0; i < inv.t.size(); ++i)
            if (inv.t[i] >= lo && inv.t[i] <= hi) amp = std::max(amp, std::abs(inv.values[i]));
        return amp;
    };
    // collapsed by gt ~ 8..11, revived near gt ~ 2 pi sqrt(6) ~ 15.4
    const double collapsed = window_amp(8.0, 11.0);
    const double revived = window_amp(13.0, 18.0);
    CHECK(revived > 3.0 * collapsed);
}

TEST_CASE("closed_evolve warns when the cutoff is too small") {
    ModelParams p;
    p.g = 1.0;
    p.n_fock_cavity = 6; // far too small for |alpha|^2 = 6
    p.dt = 0.01;
    ClosedRun run = closed_evolve(system_hamiltonian(p), ground_coherent_init(p.n_fock_cavity, std::sqrt(6.0)),
                                  grid(2.0, 0.1), p.n_fock_cavity);
    CHECK(run.cutoff_leak_warning);
}

TEST_CASE("lindblad_evolve: bare cavity photon decay e^{-2 kappa t}") {
    ModelParams p;
    p.g = 0.0;
    p.kappa1 = 0.3;
    p.kappa2 = 0.1;
    p.n_fock_cavity = 1;
    p.dt = 0.002;
    const double kappa_tot = p.kappa1 + p.kappa2;
    LindbladRun run = lindblad_evolve(p, DensityMatrix::pure(ground_fock_init(p.n_fock_cavity, 1)),
                                      grid(3.0, 0.05));
    const auto& n = run.series.at("cavity_photons");
    for (std::size_t i = 0; i < n.t.size(); ++i)
        CHECK(n.values[i] == doctest::Approx(std::exp(-2.0 * kappa_tot * n.t[i])).epsilon(1e-6));
}

TEST_CASE("lindblad_evolve: trace preserved and final state physical") {
    ModelParams p;
    p.g = 1.0;
    p.drive_amplitude = 0.3;
    p.kappa1 = 0.5;
    p.n_fock_cavity = 4;
    p.dt = 0.005;
    LindbladRun run = lindblad_evolve(p, DensityMatrix::pure(ground_vacuum_init(p.n_fock_cavity)),
                                      grid(10.0, 0.1));
    CHECK(run.max_trace_error <= 1e-9);
    for (double tr : run.series.at("trace").values) CHECK(std::abs(tr - 1.0) <= 1e-9);
    CHECK_NOTHROW(run.final_state.validate(1e-8));
}

TEST_CASE("driven lossy dynamics converge to a unique steady state") {
    ModelParams p;
    p.g = 1.0;
    p.drive_amplitude = 0.2;
    p.kappa1 = 0.4;
    p.n_fock_cavity = 4;
    p.dt = 0.005;
    LindbladRun from_ground = lindblad_evolve(p, DensityMatrix::pure(ground_vacuum_init(p.n_fock_cavity)),
                                              grid(40.0, 1.0));
    LindbladRun from_excited = lindblad_evolve(p, DensityMatrix::pure(excited_vacuum_init(p.n_fock_cavity)),
                                               grid(40.0, 1.0));
    const double a = from_ground.series.at("tls_population").values.back();
    const double b = from_excited.series.at("tls_population").values.back();
    CHECK(a == doctest::Approx(b).epsilon(1e-6));

    // and the direct fixed-point solve agrees with the long-time limit
    DensityMatrix rho_ss = steady_state(p);
    CHECK_NOTHROW(rho_ss.validate(1e-8));
    const ComplexTensor sm = sys_tls_lowering(p.n_fock_cavity);
    const ComplexTensor sp_sm = contract(dagger(sm), {1}, sm, {0});
    Complex pop{};
    const std::int64_t d = p.d_sys();
    for (std::int64_t i = 0; i < d; ++i)
        for (std::int64_t k = 0; k < d; ++k) pop += sp_sm(i, k) * rho_ss.matrix(k, i);
    CHECK(pop.real() == doctest::Approx(a).epsilon(1e-5));
}

TEST_CASE("oracle self-consistency: lindblad at kappa = 0 matches the closed solver") {
    ModelParams p;
    p.g = 1.0;
    p.drive_amplitude = 0.5;
    p.n_fock_cavity = 3;
    p.dt = 0.001;
    const auto t = grid(4.0, 0.2);
    LindbladRun lr = lindblad_evolve(p, DensityMatrix::pure(ground_vacuum_init(p.n_fock_cavity)), t);
    ClosedRun cr = closed_evolve(system_hamiltonian(p), ground_vacuum_init(p.n_fock_cavity), t,
                                 p.n_fock_cavity);
    const auto& a = lr.series.at("cavity_photons").values;
    const auto& b = cr.series.at("cavity_photons").values;
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-8);
}

TEST_CASE("regression: weak coherent drive gives g2 ~ 1 at all lags") {
    ModelParams p;
    p.g = 1.0;
    p.drive_amplitude = 0.01; // linear-response regime -> nearly coherent field
    p.kappa1 = 0.5;
    p.n_fock_cavity = 3;
    p.dt = 0.01;
    const auto lags = grid(8.0, 0.2);
    CorrelationSeries g2 = regression_correlations(p, RegressionKind::g2, lags);
    for (const Complex& v : g2.values) CHECK(v.real() == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("regression: g1 decays to the coherent fraction at long lag") {
    ModelParams p;
    p.g = 1.0;
    p.drive_amplitude = 0.05;
    p.kappa1 = 0.6125;
    p.kappa2 = 0.6; // treated as extra Markovian loss in the oracle
    p.n_fock_cavity = 3;
    p.dt = 0.01;
    const auto lags = grid(30.0, 0.5);
    CorrelationSeries g1 = regression_correlations(p, RegressionKind::g1, lags);
    CHECK(std::abs(g1.values.front() - Complex(1.0)) < 1e-9);

    // coherent fraction |<a>|^2 / <n> from the steady state
    DensityMatrix rho_ss = steady_state(p);
    const std::int64_t d = p.d_sys();
    const ComplexTensor a_op = sys_cavity_annihilation(p.n_fock_cavity);
    Complex mean_a{};
    double nbar = 0.0;
    for (std::int64_t i = 0; i < d; ++i)
        for (std::int64_t k = 0; k < d; ++k) mean_a += a_op(i, k) * rho_ss.matrix(k, i);
    const ComplexTensor n_op = contract(dagger(a_op), {1}, a_op, {0});
    for (std::int64_t i = 0; i < d; ++i)
        for (std::int64_t k = 0; k < d; ++k) nbar += (n_op(i, k) * rho_ss.matrix(k, i)).real();
    const double coherent_fraction = std::norm(mean_a) / nbar;
    CHECK(std::abs(g1.values.back()) == doctest::Approx(coherent_fraction).epsilon(1e-3));
}

TEST_CASE("regression with an empty cavity reports the degenerate normalization") {
    ModelParams p;
    p.g = 0.0; // cavity decoupled: no photons ever
    p.drive_amplitude = 0.3;
    p.kappa1 = 0.5;
    p.n_fock_cavity = 2;
    p.dt = 0.01;
    const auto lags = grid(1.0, 0.1);
    CHECK_THROWS_AS(regression_correlations(p, RegressionKind::g1, lags), NumericalError);
}

TEST_CASE("density matrix validation catches broken inputs") {
    DensityMatrix rho = DensityMatrix::pure(ground_vacuum_init(1));
    CHECK_NOTHROW(rho.validate());
    rho.matrix(0, 0) = 0.5; // trace broken
    CHECK_THROWS_AS(rho.validate(), ValidationError);
}
