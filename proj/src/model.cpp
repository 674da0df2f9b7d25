#include "jcfb/model.hpp"

#include <cmath>
#include <sstream>

namespace jcfb {

std::int64_t ModelParams::delay_bins() const {
    if (tau <= 0.0) return 0;
    const double ratio = tau / dt;
    const auto l = static_cast<std::int64_t>(std::llround(ratio));
    const double snapped = static_cast<double>(l) * dt;
    if (l < 1 || std::abs(tau - snapped) > 1e-9 * std::max(std::abs(tau), dt)) {
        std::ostringstream os;
        os << "tau = " << tau << " is not an integer multiple of dt = " << dt
           << " (tau/dt = " << ratio << "); adjust tau or dt";
        throw ValidationError(os.str());
    }
    return l;
}

void ModelParams::validate() const {
    if (g < 0 || drive_amplitude < 0 || kappa1 < 0 || kappa2 < 0)
        throw ValidationError("rates g, drive_amplitude, kappa1, kappa2 must be >= 0");
    if (!(dt > 0)) throw ValidationError("dt must be > 0");
    if (tau < 0) throw ValidationError("tau must be >= 0");
    if (n_fock_cavity < 1) throw ValidationError("n_fock_cavity must be >= 1");
    if (d_bin < 2) throw ValidationError("d_bin must be >= 2");
    svd.validate();
    if (has_feedback() && delay_bins() < 1)
        throw ValidationError("feedback requires tau >= dt (at least one delay bin)");
    if (tau > 0) (void)delay_bins(); // triggers the integrality check
}

ComplexTensor fock_annihilation(std::int64_t n_max) {
    const std::int64_t d = n_max + 1;
    ComplexTensor a({d, d});
    for (std::int64_t n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

ComplexTensor tls_lowering() {
    ComplexTensor s({2, 2});
    s(0, 1) = 1.0; // |g><e|
    return s;
}

ComplexTensor kron(const ComplexTensor& a, const ComplexTensor& b) {
    if (a.rank() != 2 || b.rank() != 2) throw DimensionError("kron: inputs must be matrices");
    const std::int64_t ra = a.extent(0), ca = a.extent(1);
    const std::int64_t rb = b.extent(0), cb = b.extent(1);
    ComplexTensor out({ra * rb, ca * cb});
    for (std::int64_t i = 0; i < ra; ++i)
        for (std::int64_t j = 0; j < ca; ++j) {
            const Complex aij = a(i, j);
            if (aij == Complex{}) continue;
            for (std::int64_t k = 0; k < rb; ++k)
                for (std::int64_t l = 0; l < cb; ++l)
                    out(i * rb + k, j * cb + l) = aij * b(k, l);
        }
    return out;
}

ComplexTensor dagger(const ComplexTensor& m) {
    if (m.rank() != 2) throw DimensionError("dagger: input must be a matrix");
    return m.permuted({1, 0}).conjugated();
}

ComplexTensor sys_cavity_annihilation(std::int64_t n_fock_cavity) {
    return kron(ComplexTensor::identity(2), fock_annihilation(n_fock_cavity));
}

ComplexTensor sys_tls_lowering(std::int64_t n_fock_cavity) {
    return kron(tls_lowering(), ComplexTensor::identity(n_fock_cavity + 1));
}

ComplexTensor ground_vacuum_init(std::int64_t n_fock_cavity) {
    return ground_fock_init(n_fock_cavity, 0);
}

ComplexTensor excited_vacuum_init(std::int64_t n_fock_cavity) {
    ComplexTensor v({2 * (n_fock_cavity + 1)});
    v(n_fock_cavity + 1) = 1.0; // |e, 0>
    return v;
}

ComplexTensor ground_fock_init(std::int64_t n_fock_cavity, std::int64_t n_photons) {
    if (n_photons < 0 || n_photons > n_fock_cavity)
        throw ValidationError("ground_fock_init: photon number outside the cavity cutoff");
    ComplexTensor v({2 * (n_fock_cavity + 1)});
    v(n_photons) = 1.0;
    return v;
}

ComplexTensor ground_coherent_init(std::int64_t n_fock_cavity, Complex alpha) {
    ComplexTensor v({2 * (n_fock_cavity + 1)});
    // c_n = alpha^n / sqrt(n!), built recursively, then renormalized over
    // the truncated space
    Complex c = 1.0;
    double norm2 = 0.0;
    for (std::int64_t n = 0; n <= n_fock_cavity; ++n) {
        if (n > 0) c *= alpha / std::sqrt(static_cast<double>(n));
        v(n) = c;
        norm2 += std::norm(c);
    }
    v *= 1.0 / std::sqrt(norm2);
    return v;
}

ComplexTensor system_hamiltonian(const ModelParams& p) {
    p.validate();
    const ComplexTensor a = sys_cavity_annihilation(p.n_fock_cavity);
    const ComplexTensor sm = sys_tls_lowering(p.n_fock_cavity);
    const ComplexTensor ad = dagger(a);
    const ComplexTensor sp = dagger(sm);

    ComplexTensor h = Complex(p.g) * (contract(ad, {1}, sm, {0}) + contract(sp, {1}, a, {0}));
    h += Complex(p.drive_amplitude) * (sp + sm);
    if (p.delta != 0.0)
        h += Complex(p.delta) * (contract(ad, {1}, a, {0}) + contract(sp, {1}, sm, {0}));
    return h;
}

ComplexTensor step_generator(const ModelParams& p) {
    const std::int64_t db = p.d_bin;
    const ComplexTensor ib = ComplexTensor::identity(db);
    const ComplexTensor b = fock_annihilation(db - 1);
    const ComplexTensor bd = dagger(b);
    const ComplexTensor a = sys_cavity_annihilation(p.n_fock_cavity);
    const ComplexTensor ad = dagger(a);

    ComplexTensor m = Complex(0.0, -p.dt) * kron(ib, kron(system_hamiltonian(p), ib));

    const double c1 = std::sqrt(2.0 * p.kappa1 * p.dt);
    if (c1 > 0.0) m += Complex(c1) * (kron(bd, kron(a, ib)) - kron(b, kron(ad, ib)));

    const double c2 = std::sqrt(2.0 * p.kappa2 * p.dt);
    if (c2 > 0.0) {
        const Complex ph = std::polar(1.0, p.phi);
        m += (c2 * ph) * kron(ib, kron(a, bd)) - (c2 * std::conj(ph)) * kron(ib, kron(ad, b));
    }
    return m;
}

StepUnitary step_unitary(const ModelParams& p, StepMode mode, int series_order) {
    StepUnitary u;
    u.d_bin = p.d_bin;
    u.d_sys = p.d_sys();
    const ComplexTensor m = step_generator(p);
    if (mode == StepMode::exact_exponential) {
        u.matrix = matrix_exponential(m);
    } else {
        if (series_order < 1) throw ValidationError("step_unitary: series order must be >= 1");
        const std::int64_t d = m.extent(0);
        ComplexTensor acc = ComplexTensor::identity(d);
        ComplexTensor term = ComplexTensor::identity(d);
        for (int n = 1; n <= series_order; ++n) {
            term = contract(term, {1}, m, {0});
            term *= Complex(1.0 / n);
            acc += term;
        }
        u.matrix = std::move(acc);
    }
    return u;
}

} // namespace jcfb
