#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "jcfb/model.hpp"

#include "support/common.hpp"

using namespace jcfb;
using jcfb::testing::max_abs_diff;

namespace {

Eigen::MatrixXcd to_eigen(const ComplexTensor& t) {
    Eigen::MatrixXcd m(t.extent(0), t.extent(1));
    for (std::int64_t i = 0; i < t.extent(0); ++i)
        for (std::int64_t j = 0; j < t.extent(1); ++j) m(i, j) = t(i, j);
    return m;
}

double anti_hermiticity_defect(const ComplexTensor& m) {
    double defect = 0.0;
    for (std::int64_t i = 0; i < m.extent(0); ++i)
        for (std::int64_t j = 0; j < m.extent(1); ++j)
            defect = std::max(defect, std::abs(m(i, j) + std::conj(m(j, i))));
    return defect;
}

ModelParams base_params() {
    ModelParams p;
    p.g = 1.0;
    p.drive_amplitude = 0.1;
    p.kappa1 = 0.3;
    p.kappa2 = 0.2;
    p.dt = 0.01;
    p.tau = 0.03;
    p.phi = 0.7;
    p.n_fock_cavity = 2;
    p.d_bin = 3;
    return p;
}

} // namespace

TEST_CASE("params: tau must be an integer multiple of dt") {
    ModelParams p = base_params();
    p.tau = 0.025;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.tau = 0.03;
    CHECK_NOTHROW(p.validate());
    CHECK(p.delay_bins() == 3);
    p.tau = 0.03 + 2e-12; // within the 1e-9 relative snap
    CHECK(p.delay_bins() == 3);
    p.kappa2 = 0.0;
    p.tau = 0.0;
    CHECK_NOTHROW(p.validate());
}

TEST_CASE("params: rates and cutoffs are validated") {
    ModelParams p = base_params();
    p.kappa1 = -0.1;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = base_params();
    p.d_bin = 1;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = base_params();
    p.dt = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = base_params();
    p.kappa2 = 0.5;
    p.tau = 0.0; // feedback without a delay bin
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("system_hamiltonian: all couplings zero gives the zero matrix") {
    ModelParams p = base_params();
    p.g = p.drive_amplitude = p.delta = 0.0;
    ComplexTensor h = system_hamiltonian(p);
    CHECK(h.norm() == 0.0);
}

TEST_CASE("system_hamiltonian: one-excitation block at g=1, N_c=1") {
    ModelParams p;
    p.g = 1.0;
    p.drive_amplitude = 0.0;
    p.n_fock_cavity = 1;
    p.dt = 0.01;
    ComplexTensor h = system_hamiltonian(p);
    // basis index = tls*(N_c+1) + n: |g,0>=0, |g,1>=1, |e,0>=2, |e,1>=3
    CHECK(std::abs(h(1, 2) - Complex(1.0)) < 1e-14);
    CHECK(std::abs(h(2, 1) - Complex(1.0)) < 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(to_eigen(h));
    const auto& ev = es.eigenvalues();
    CHECK(ev(0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(ev(1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ev(2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ev(3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("system_hamiltonian: strong drive matches an independent ladder construction") {
    ModelParams p;
    p.g = 1.0;
    p.drive_amplitude = 2.0;
    p.delta = 0.35;
    p.n_fock_cavity = 5;
    p.dt = 0.01;
    ComplexTensor h = system_hamiltonian(p);

    // independent entry-by-entry construction from the ladder rules
    const std::int64_t dc = p.n_fock_cavity + 1;
    const std::int64_t d = 2 * dc;
    Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(d, d);
    auto idx = [dc](std::int64_t tls, std::int64_t n) { return tls * dc + n; };
    for (std::int64_t n = 0; n < dc; ++n) {
        if (n + 1 < dc) {
            // g (a^dag sm + sp a): |e,n> <-> |g,n+1>
            ref(idx(0, n + 1), idx(1, n)) += p.g * std::sqrt(static_cast<double>(n + 1));
            ref(idx(1, n), idx(0, n + 1)) += p.g * std::sqrt(static_cast<double>(n + 1));
        }
        // drive couples |g,n> <-> |e,n>
        ref(idx(1, n), idx(0, n)) += p.drive_amplitude;
        ref(idx(0, n), idx(1, n)) += p.drive_amplitude;
        // detuning on photon number and excitation
        ref(idx(0, n), idx(0, n)) += p.delta * static_cast<double>(n);
        ref(idx(1, n), idx(1, n)) += p.delta * static_cast<double>(n) + p.delta;
    }
    CHECK((to_eigen(h) - ref).cwiseAbs().maxCoeff() < 1e-13);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> direct(ref);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> built(to_eigen(h));
    CHECK((direct.eigenvalues() - built.eigenvalues()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("system_hamiltonian is Hermitian") {
    ModelParams p = base_params();
    p.delta = 0.2;
    ComplexTensor h = system_hamiltonian(p);
    double defect = 0.0;
    for (std::int64_t i = 0; i < h.extent(0); ++i)
        for (std::int64_t j = 0; j < h.extent(1); ++j)
            defect = std::max(defect, std::abs(h(i, j) - std::conj(h(j, i))));
    CHECK(defect < 1e-14);
}

TEST_CASE("step_generator: no reservoir coupling reduces to -i H dt") {
    ModelParams p = base_params();
    p.kappa1 = p.kappa2 = 0.0;
    p.tau = 0.0;
    ComplexTensor m = step_generator(p);
    ComplexTensor expected =
        Complex(0.0, -p.dt) *
        kron(ComplexTensor::identity(p.d_bin), kron(system_hamiltonian(p), ComplexTensor::identity(p.d_bin)));
    CHECK(max_abs_diff(m, expected) < 1e-15);
}

TEST_CASE("step_generator: single-step emission amplitude is sqrt(2 kappa1 dt)") {
    ModelParams p;
    p.g = 0.0;
    p.drive_amplitude = 0.0;
    p.kappa1 = 0.4;
    p.kappa2 = 0.0;
    p.tau = 0.0;
    p.dt = 0.001;
    p.n_fock_cavity = 1;
    p.d_bin = 2;
    ComplexTensor m = step_generator(p);
    // |0_bin, g, 1_cav, 0_old> -> |1_bin, g, 0_cav, 0_old>
    const std::int64_t d_sys = p.d_sys();
    const std::int64_t from = (0 * d_sys + 1) * p.d_bin + 0;
    const std::int64_t to = (1 * d_sys + 0) * p.d_bin + 0;
    const double amp = std::sqrt(2.0 * p.kappa1 * p.dt);
    CHECK(std::abs(m(to, from) - Complex(amp)) < 1e-15);

    // and to first order the unitary carries the same amplitude
    StepUnitary u = step_unitary(p);
    CHECK(std::abs(u.matrix(to, from) - Complex(amp)) < 2.0 * amp * amp * amp);
}

TEST_CASE("step_generator: phase periodicity phi -> phi + 2 pi") {
    ModelParams p = base_params();
    ComplexTensor m1 = step_generator(p);
    p.phi += 2.0 * M_PI;
    ComplexTensor m2 = step_generator(p);
    CHECK(max_abs_diff(m1, m2) < 1e-15);
}

TEST_CASE("step_generator is anti-Hermitian for random parameter draws") {
    std::mt19937_64 rng(50);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        ModelParams p;
        p.g = 2.0 * dist(rng);
        p.drive_amplitude = dist(rng);
        p.kappa1 = dist(rng);
        p.kappa2 = dist(rng);
        p.delta = dist(rng) - 0.5;
        p.phi = 2.0 * M_PI * dist(rng);
        p.dt = 0.01;
        p.tau = 0.02;
        p.n_fock_cavity = 2;
        p.d_bin = 3;
        CHECK(anti_hermiticity_defect(step_generator(p)) < 1e-13);
    }
}

TEST_CASE("phase covariance: phi -> phi + pi flips only the kappa2 coupling") {
    ModelParams p = base_params();
    ComplexTensor m_phi = step_generator(p);
    ModelParams p_shift = p;
    p_shift.phi += M_PI;
    ComplexTensor m_shift = step_generator(p_shift);
    ModelParams p_nofb = p;
    p_nofb.kappa2 = 0.0;
    p_nofb.tau = 0.0;
    ComplexTensor m_nofb = step_generator(p_nofb);
    // m(phi) + m(phi+pi) = 2 * (system + kappa1 part)
    ComplexTensor sum = m_phi + m_shift;
    ComplexTensor twice = Complex(2.0) * m_nofb;
    CHECK(max_abs_diff(sum, twice) < 1e-13);
}

TEST_CASE("dt scaling: system block is linear, reservoir blocks scale as sqrt(dt)") {
    ModelParams p = base_params();
    ModelParams p_half = p;
    p_half.dt = p.dt / 2.0;
    p_half.tau = p.tau; // still 6 half-steps
    ComplexTensor m = step_generator(p);
    ComplexTensor m_half = step_generator(p_half);

    ModelParams p_sys = p;
    p_sys.kappa1 = p_sys.kappa2 = 0.0;
    p_sys.tau = 0.0;
    ComplexTensor sys = step_generator(p_sys);
    ModelParams p_sys_half = p_sys;
    p_sys_half.dt = p.dt / 2.0;
    ComplexTensor sys_half = step_generator(p_sys_half);

    CHECK(max_abs_diff(sys_half, Complex(0.5) * sys) < 1e-15);
    ComplexTensor res = m - sys;
    ComplexTensor res_half = m_half - sys_half;
    CHECK(max_abs_diff(res_half, Complex(1.0 / std::sqrt(2.0)) * res) < 1e-14);
}

TEST_CASE("step_unitary: zero generator gives the identity") {
    ModelParams p;
    p.g = 0.0;
    p.drive_amplitude = 0.0;
    p.kappa1 = p.kappa2 = 0.0;
    p.dt = 0.01;
    p.n_fock_cavity = 1;
    p.d_bin = 2;
    StepUnitary u = step_unitary(p);
    CHECK(max_abs_diff(u.matrix, ComplexTensor::identity(u.matrix.extent(0))) < 1e-15);
}

TEST_CASE("step_unitary: exact and series(4) agree at small g dt") {
    ModelParams p;
    p.g = 1.0;
    p.drive_amplitude = 0.1;
    p.kappa1 = 0.01;
    p.kappa2 = 0.005;
    p.dt = 0.01;
    p.tau = 0.01;
    p.phi = 0.3;
    p.n_fock_cavity = 1;
    p.d_bin = 2;
    StepUnitary exact = step_unitary(p, StepMode::exact_exponential);
    StepUnitary series = step_unitary(p, StepMode::series, 4);
    CHECK(max_abs_diff(exact.matrix, series.matrix) < 1e-9);
    CHECK_THROWS_AS(step_unitary(p, StepMode::series, 0), ValidationError);
}

TEST_CASE("step_unitary is unitary at the weak-drive feedback parameters") {
    ModelParams p;
    p.g = 0.2;
    p.drive_amplitude = 0.01;
    p.kappa1 = 0.2 * 0.6125;
    p.kappa2 = 0.2 * 0.6;
    p.dt = 0.1;
    p.tau = 0.1;
    p.phi = M_PI / 2;
    p.n_fock_cavity = 3;
    p.d_bin = 3;
    StepUnitary u = step_unitary(p);
    ComplexTensor udag_u = contract(u.matrix.conjugated(), {0}, u.matrix, {0});
    CHECK(max_abs_diff(udag_u, ComplexTensor::identity(u.matrix.extent(0))) < 1e-12);
}

TEST_CASE("initial state builders") {
    ComplexTensor gv = ground_vacuum_init(3);
    CHECK(gv.size() == 8);
    CHECK(std::abs(gv(0) - Complex(1.0)) == 0.0);
    ComplexTensor ev = excited_vacuum_init(3);
    CHECK(std::abs(ev(4) - Complex(1.0)) == 0.0);
    ComplexTensor coh = ground_coherent_init(24, std::sqrt(6.0));
    CHECK(coh.norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(ground_fock_init(3, 7), ValidationError);
}
