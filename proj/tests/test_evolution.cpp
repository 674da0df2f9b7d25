#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "jcfb/evolution.hpp"
#include "jcfb/oracle.hpp"

using namespace jcfb;

namespace {

RunPlan base_plan() {
    RunPlan plan;
    plan.params.g = 1.0;
    plan.params.drive_amplitude = 0.05;
    plan.params.kappa1 = 0.6125;
    plan.params.kappa2 = 0.0;
    plan.params.dt = 0.01;
    plan.params.n_fock_cavity = 3;
    plan.params.d_bin = 3;
    plan.n_steps = 100;
    plan.system_init = ground_vacuum_init(plan.params.n_fock_cavity);
    plan.recorders = {Recorder::tls_population, Recorder::inversion, Recorder::cavity_photons,
                      Recorder::output_flux, Recorder::bond_stats, Recorder::discarded_weight};
    return plan;
}

double max_series_diff(const TimeSeries& a, const TimeSeries& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        d = std::max(d, std::abs(a.values[i] - b.values[i]));
    return d;
}

} // namespace

TEST_CASE("dark run: no coupling, vacuum input, everything stays zero") {
    RunPlan plan = base_plan();
    plan.params.g = 0.0;
    plan.params.drive_amplitude = 0.0;
    plan.params.kappa1 = 0.4;
    plan.params.kappa2 = 0.3;
    plan.params.tau = 0.05; // 5 delay bins
    plan.n_steps = 60;
    RunResult r = run(plan);
    for (const char* label : {"tls_population", "cavity_photons", "output_flux"})
        for (double v : r.series.at(label).values) CHECK(std::abs(v) < 1e-14);
    CHECK(r.final_norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single-sided cavity decay conserves photon number into the output") {
    RunPlan plan;
    plan.params.g = 0.0;
    plan.params.drive_amplitude = 0.0;
    plan.params.kappa1 = 0.5;
    plan.params.dt = 0.01;
    plan.params.n_fock_cavity = 1;
    plan.params.d_bin = 2;
    plan.n_steps = 1000; // T = 10, e^{-2 kappa T} ~ 4.5e-5
    plan.system_init = ground_fock_init(plan.params.n_fock_cavity, 1);
    plan.recorders = {Recorder::cavity_photons, Recorder::output_flux};
    RunResult r = run(plan);

    const auto& flux = r.series.at("output_flux");
    double integrated = 0.0;
    for (double v : flux.values) integrated += v * plan.params.dt;
    CHECK(integrated == doctest::Approx(1.0).epsilon(1e-3));

    // photon number decays exponentially at 2 kappa1
    const auto& n = r.series.at("cavity_photons");
    for (std::size_t i = 0; i < n.t.size(); ++i)
        CHECK(std::abs(n.values[i] - std::exp(-2.0 * plan.params.kappa1 * n.t[i])) < 5e-3);
}

TEST_CASE("no-feedback populations track the master-equation solution") {
    RunPlan plan = base_plan();
    plan.params.dt = 0.005;
    plan.n_steps = 2000; // T = 10
    RunResult r = run(plan);

    std::vector<double> t_grid = r.series.at("tls_population").t;
    LindbladRun oracle = lindblad_evolve(plan.params, DensityMatrix::pure(plan.system_init), t_grid);

    CHECK(max_series_diff(r.series.at("tls_population"), oracle.series.at("tls_population")) < 5e-3);
    CHECK(max_series_diff(r.series.at("cavity_photons"), oracle.series.at("cavity_photons")) < 5e-3);
}

TEST_CASE("unitarity audit: lossless truncation keeps the norm at 1") {
    RunPlan plan = base_plan();
    plan.params.drive_amplitude = 0.3;
    plan.params.kappa1 = 0.4;
    plan.params.kappa2 = 0.3;
    plan.params.tau = 0.02; // L = 2
    plan.params.dt = 0.01;
    plan.params.n_fock_cavity = 1;
    plan.params.d_bin = 2;
    plan.params.svd = SvdPolicy{0.0, 4096};
    plan.n_steps = 40;
    RunResult r = run(plan);
    CHECK(std::abs(r.final_norm - 1.0) < 1e-10);
    CHECK(r.cumulative_discarded_weight == 0.0);
}

TEST_CASE("causality: perturbing a future vacuum bin cannot change earlier samples") {
    RunPlan plan = base_plan();
    plan.params.kappa2 = 0.3;
    plan.params.tau = 0.03; // L = 3
    plan.params.drive_amplitude = 0.2;
    plan.n_steps = 20;

    RunResult clean = run(plan);

    // hand-build the same initial chain but with bin 30 (never reached in
    // 20 steps) prepared in |1>; intercept via a custom evolution by
    // preparing the perturbed chain through the public surgery hook
    const std::int64_t L = plan.params.delay_bins();
    MpsState perturbed = MpsState::init_state(plan.system_init, plan.n_steps + 10 + L,
                                              plan.params.d_bin, plan.params.svd, L);
    const auto pos = perturbed.find_bin(plan.n_steps + 5);
    REQUIRE(pos.has_value());
    ComplexTensor one({1, plan.params.d_bin, 1});
    one(0, 1, 0) = 1.0;
    perturbed.site_mut(*pos).tensor = one;

    // replay of the library choreography on the perturbed chain: the
    // perturbed bin enters the dynamics only after step n_steps + 5, so
    // every sample up to n_steps must agree with the clean run
    StepUnitary su = step_unitary(plan.params);
    const std::int64_t db = su.d_bin, ds = su.d_sys;
    const std::int64_t dim = db * ds * db;
    ComplexTensor u_chain =
        su.matrix.reshaped({db, ds, db, db, ds, db}).permuted({2, 1, 0, 5, 4, 3}).reshaped({dim, dim});

    const ComplexTensor sm = sys_tls_lowering(plan.params.n_fock_cavity);
    const ComplexTensor sp_sm = contract(dagger(sm), {1}, sm, {0});
    const auto& reference = clean.series.at("tls_population");
    for (std::int64_t k = 0; k < plan.n_steps; ++k) {
        const std::int64_t sys_pos = L + k;
        perturbed.move_center(k);
        for (std::int64_t i = k; i <= sys_pos - 2; ++i) perturbed.swap_sites(i, i + 1);
        perturbed.apply_gate(u_chain, sys_pos - 1, 3, {0, 2, 1}, 2);
        const double n2 = std::pow(perturbed.norm(), 2);
        const double pop = perturbed.expect(sys_pos + 1, sp_sm).real() / n2;
        CHECK(std::abs(pop - reference.values[static_cast<std::size_t>(k + 1)]) < 1e-10);
        if (L > 1) {
            perturbed.move_center(sys_pos - 1);
            for (std::int64_t j = sys_pos - 1; j >= k + 1; --j) perturbed.swap_sites(j - 1, j - 1);
        }
    }
}

TEST_CASE("Markov limit: short loop with weak second mirror approaches the Lindblad flow") {
    RunPlan plan;
    plan.params.g = 1.0;
    plan.params.drive_amplitude = 0.2;
    plan.params.kappa1 = 0.4;
    plan.params.kappa2 = 0.004;
    plan.params.phi = 0.0;
    plan.params.n_fock_cavity = 2;
    plan.params.d_bin = 3;
    plan.system_init = ground_vacuum_init(2);
    plan.recorders = {Recorder::tls_population};

    auto max_err = [&](double dt) {
        RunPlan p = plan;
        p.params.dt = dt;
        p.params.tau = dt; // L = 1
        p.n_steps = static_cast<std::int64_t>(std::llround(4.0 / dt));
        RunResult r = run(p);
        LindbladRun oracle =
            lindblad_evolve(p.params, DensityMatrix::pure(p.system_init), r.series.at("tls_population").t);
        return max_series_diff(r.series.at("tls_population"), oracle.series.at("tls_population"));
    };

    const double coarse = max_err(0.02);
    const double fine = max_err(0.01);
    CHECK(fine < coarse);         // converging toward the Markovian solution
    CHECK(fine < 0.7 * coarse);   // at least ~linear in dt
    CHECK(fine < 2e-2);
}

TEST_CASE("delay register: bins return to their slots and flux reads released bins only") {
    RunPlan plan = base_plan();
    plan.params.kappa2 = 0.3;
    plan.params.tau = 0.04; // L = 4
    plan.params.drive_amplitude = 0.3;
    plan.n_steps = 30;
    RunResult r = run(plan);
    const std::int64_t L = plan.params.delay_bins();
    CHECK(r.last_released_bin == plan.n_steps - 1 - L);
    for (std::int64_t b = -L; b < plan.n_steps; ++b) {
        const auto pos = r.state.find_bin(b);
        REQUIRE(pos.has_value());
        CHECK(*pos == b + L + (b >= plan.n_steps ? 1 : 0));
    }
    CHECK(r.state.site(r.state.n_sites() - 1).label.kind == SiteKind::system);

    CHECK_NOTHROW(output_flux(r.state, r.last_released_bin, plan.params.dt, r.last_released_bin));
    CHECK_THROWS_AS(output_flux(r.state, r.last_released_bin + 1, plan.params.dt, r.last_released_bin),
                    ValidationError);
}

TEST_CASE("run aborts with diagnostics when the truncation budget is exhausted") {
    RunPlan plan = base_plan();
    plan.params.drive_amplitude = 1.0;
    plan.params.kappa2 = 0.5;
    plan.params.tau = 0.05;
    plan.params.svd = SvdPolicy{0.0, 2}; // absurd cap forces discarded weight
    plan.discarded_weight_abort = 1e-12;
    plan.n_steps = 400;
    CHECK_THROWS_WITH_AS(run(plan), doctest::Contains("truncation budget exceeded at step"),
                         NumericalError);
}

TEST_CASE("instantaneous g2: Fock, coherent, and below-floor cavity states") {
    const std::int64_t n_c = 24;
    const SvdPolicy policy{};
    MpsState one = MpsState::init_state(ground_fock_init(n_c, 1), 2, 2, policy, 0);
    CHECK(instantaneous_g2(one, n_c) == doctest::Approx(0.0));

    MpsState coh = MpsState::init_state(ground_coherent_init(n_c, std::sqrt(6.0)), 2, 2, policy, 0);
    CHECK(instantaneous_g2(coh, n_c) == doctest::Approx(1.0).epsilon(1e-3));

    MpsState vac = MpsState::init_state(ground_vacuum_init(n_c), 2, 2, policy, 0);
    CHECK(std::isnan(instantaneous_g2(vac, n_c)));
}

TEST_CASE("run plan validation") {
    RunPlan plan = base_plan();
    plan.n_steps = 0;
    CHECK_THROWS_AS(run(plan), ValidationError);
    plan = base_plan();
    plan.recorders.clear();
    CHECK_THROWS_AS(run(plan), ValidationError);
    plan = base_plan();
    plan.system_init = ComplexTensor({3});
    CHECK_THROWS_AS(run(plan), ValidationError);
}
