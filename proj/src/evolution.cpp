#include "jcfb/evolution.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace jcfb {

const char* recorder_name(Recorder r) {
    switch (r) {
        case Recorder::tls_population: return "tls_population";
        case Recorder::inversion: return "inversion";
        case Recorder::cavity_photons: return "cavity_photons";
        case Recorder::output_flux: return "output_flux";
        case Recorder::instantaneous_g2: return "instantaneous_g2";
        case Recorder::bond_stats: return "max_bond";
        case Recorder::discarded_weight: return "discarded_weight";
    }
    return "?";
}

void RunPlan::validate() const {
    params.validate();
    if (n_steps < 1) throw ValidationError("run plan: n_steps must be >= 1");
    if (recorders.empty()) throw ValidationError("run plan: recorder set must be nonempty");
    if (record_stride < 1) throw ValidationError("run plan: record_stride must be >= 1");
    if (system_init.rank() != 1 || system_init.size() != params.d_sys())
        throw ValidationError("run plan: system_init must be a d_sys vector");
}

namespace {

// two-site step generator on chain order (system, new bin):
// M = -i H_S dt + sqrt(2 kappa1 dt) (b^dag a - a^dag b)
ComplexTensor two_site_generator(const ModelParams& p) {
    const ComplexTensor ib = ComplexTensor::identity(p.d_bin);
    const ComplexTensor b = fock_annihilation(p.d_bin - 1);
    const ComplexTensor bd = dagger(b);
    const ComplexTensor a = sys_cavity_annihilation(p.n_fock_cavity);
    const ComplexTensor ad = dagger(a);
    ComplexTensor m = Complex(0.0, -p.dt) * kron(system_hamiltonian(p), ib);
    const double c1 = std::sqrt(2.0 * p.kappa1 * p.dt);
    if (c1 > 0.0) m += Complex(c1) * (kron(a, bd) - kron(ad, b));
    return m;
}

struct Observables {
    ComplexTensor sys_excitation; // sp sm
    ComplexTensor sys_photons;    // adag a
    ComplexTensor sys_g2_num;     // adag adag a a
    ComplexTensor bin_photons;    // bdag b
};

Observables make_observables(const ModelParams& p) {
    const ComplexTensor a = sys_cavity_annihilation(p.n_fock_cavity);
    const ComplexTensor ad = dagger(a);
    const ComplexTensor sm = sys_tls_lowering(p.n_fock_cavity);
    const ComplexTensor aa = contract(a, {1}, a, {0});
    const ComplexTensor b = fock_annihilation(p.d_bin - 1);
    Observables o;
    o.sys_excitation = contract(dagger(sm), {1}, sm, {0});
    o.sys_photons = contract(ad, {1}, a, {0});
    o.sys_g2_num = contract(dagger(aa), {1}, aa, {0});
    o.bin_photons = contract(dagger(b), {1}, b, {0});
    return o;
}

class SeriesRecorder {
  public:
    SeriesRecorder(const RunPlan& plan, const Observables& obs) : plan_(plan), obs_(obs) {
        for (Recorder r : plan.recorders) series_[recorder_name(r)] = {};
        series_["norm"] = {};
        for (auto& [label, ts] : series_) ts.label = label;
    }

    bool wants(Recorder r) const { return plan_.recorders.count(r) > 0; }

    // sample the state after `steps_done` steps; flux is the flux of the
    // bin released in the latest step (0 before any release)
    void sample(const MpsState& state, std::int64_t steps_done, std::int64_t sys_pos, double flux) {
        if (steps_done % plan_.record_stride != 0 && steps_done != plan_.n_steps) return;
        const double t = static_cast<double>(steps_done) * plan_.params.dt;
        const double n2 = std::pow(state.norm(), 2);
        const double inv_n2 = n2 > 0 ? 1.0 / n2 : 0.0;

        double excitation = 0.0;
        if (wants(Recorder::tls_population) || wants(Recorder::inversion))
            excitation = state.expect(sys_pos, obs_.sys_excitation).real() * inv_n2;
        push(Recorder::tls_population, t, excitation);
        push(Recorder::inversion, t, 2.0 * excitation - 1.0);
        if (wants(Recorder::cavity_photons) || wants(Recorder::instantaneous_g2)) {
            const double photons = state.expect(sys_pos, obs_.sys_photons).real() * inv_n2;
            push(Recorder::cavity_photons, t, photons);
            if (wants(Recorder::instantaneous_g2)) {
                double g2 = std::numeric_limits<double>::quiet_NaN();
                if (photons >= plan_.g2_floor) {
                    const double num = state.expect(sys_pos, obs_.sys_g2_num).real() * inv_n2;
                    g2 = num / (photons * photons);
                }
                push(Recorder::instantaneous_g2, t, g2);
            }
        }
        push(Recorder::output_flux, t, flux);
        push(Recorder::bond_stats, t, static_cast<double>(state.max_bond_seen()));
        push(Recorder::discarded_weight, t, state.cumulative_discarded_weight());
        auto& norm_ts = series_["norm"];
        norm_ts.t.push_back(t);
        norm_ts.values.push_back(state.norm());
    }

    std::map<std::string, TimeSeries> take() { return std::move(series_); }

  private:
    void push(Recorder r, double t, double v) {
        if (!wants(r)) return;
        auto& ts = series_[recorder_name(r)];
        ts.t.push_back(t);
        ts.values.push_back(v);
    }

    const RunPlan& plan_;
    const Observables& obs_;
    std::map<std::string, TimeSeries> series_;
};

[[noreturn]] void abort_run(const MpsState& state, std::int64_t step, double budget) {
    std::ostringstream os;
    os << "truncation budget exceeded at step " << step << ": cumulative discarded weight "
       << state.cumulative_discarded_weight() << " > " << budget
       << " (max bond seen " << state.max_bond_seen() << ", bond profile near center:";
    const std::int64_t c = state.center();
    for (std::int64_t i = std::max<std::int64_t>(0, c - 4);
         i <= std::min(state.n_sites() - 2, c + 4); ++i)
        os << ' ' << state.bond_dim(i);
    os << "); raise max_bond_dimension or loosen the cutoff";
    throw NumericalError(os.str());
}

} // namespace

RunResult run(const RunPlan& plan) {
    plan.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const ModelParams& p = plan.params;
    const std::int64_t L = p.has_feedback() ? p.delay_bins() : 0;
    const Observables obs = make_observables(p);
    SeriesRecorder recorder(plan, obs);

    RunResult out;

    if (L > 0) {
        // chain: [pre-bins -L..-1][system][bins 0..n_steps-1]
        MpsState state = MpsState::init_state(plan.system_init, plan.n_steps + L, p.d_bin, p.svd, L);

        // step unitary comes as (new, sys, old); the chain block order is
        // (old, sys, new), so conjugate the matrix by that axis swap once
        const StepUnitary su = step_unitary(p, plan.step_mode, plan.series_order);
        const std::int64_t db = su.d_bin, ds = su.d_sys;
        ComplexTensor u6 = su.matrix.reshaped({db, ds, db, db, ds, db});
        const std::int64_t dim = db * ds * db;
        const ComplexTensor u_chain = u6.permuted({2, 1, 0, 5, 4, 3}).reshaped({dim, dim});

        recorder.sample(state, 0, L, 0.0);
        for (std::int64_t k = 0; k < plan.n_steps; ++k) {
            const std::int64_t sys_pos = L + k;

            // bring the delayed bin next to the system
            state.move_center(k);
            for (std::int64_t i = k; i <= sys_pos - 2; ++i) state.swap_sites(i, i + 1);

            // joint step on (old, sys, new); afterwards the chain reads
            // (old, new, sys) and the center sits on the system site
            state.apply_gate(u_chain, sys_pos - 1, 3, {0, 2, 1}, 2);

            const double n2 = std::pow(state.norm(), 2);
            const double flux =
                state.expect(sys_pos - 1, obs.bin_photons).real() / (n2 > 0 ? n2 : 1.0) / p.dt;
            recorder.sample(state, k + 1, sys_pos + 1, flux);

            // return the released bin to its slot (home = k - L + L = k)
            if (L > 1) {
                state.move_center(sys_pos - 1);
                for (std::int64_t j = sys_pos - 1; j >= k + 1; --j) state.swap_sites(j - 1, j - 1);
            }

            if (state.cumulative_discarded_weight() > plan.discarded_weight_abort)
                abort_run(state, k, plan.discarded_weight_abort);
        }
        out.last_released_bin = plan.n_steps - 1 - L;
        out.state = std::move(state);
    } else {
        // no feedback: chain [system][bins 0..n_steps-1], the system walks
        // right one slot per step
        MpsState state = MpsState::init_state(plan.system_init, plan.n_steps, p.d_bin, p.svd, 0);
        const ComplexTensor m2 = two_site_generator(p);
        ComplexTensor u2;
        if (plan.step_mode == StepMode::exact_exponential) {
            u2 = matrix_exponential(m2);
        } else {
            if (plan.series_order < 1) throw ValidationError("series order must be >= 1");
            const std::int64_t d = m2.extent(0);
            ComplexTensor acc = ComplexTensor::identity(d);
            ComplexTensor term = ComplexTensor::identity(d);
            for (int n = 1; n <= plan.series_order; ++n) {
                term = contract(term, {1}, m2, {0});
                term *= Complex(1.0 / n);
                acc += term;
            }
            u2 = std::move(acc);
        }

        recorder.sample(state, 0, 0, 0.0);
        for (std::int64_t k = 0; k < plan.n_steps; ++k) {
            // (sys@k, new@k+1) -> (new@k, sys@k+1), center on the system
            state.apply_gate(u2, k, 2, {1, 0}, 1);
            const double n2 = std::pow(state.norm(), 2);
            const double flux =
                state.expect(k, obs.bin_photons).real() / (n2 > 0 ? n2 : 1.0) / p.dt;
            recorder.sample(state, k + 1, k + 1, flux);
            if (state.cumulative_discarded_weight() > plan.discarded_weight_abort)
                abort_run(state, k, plan.discarded_weight_abort);
        }
        out.last_released_bin = plan.n_steps - 1;
        out.state = std::move(state);
    }

    out.series = recorder.take();
    out.final_norm = out.state.norm();
    out.cumulative_discarded_weight = out.state.cumulative_discarded_weight();
    out.max_bond = out.state.max_bond_seen();
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

double output_flux(const MpsState& state, std::int64_t bin_index, double dt,
                   std::int64_t last_released_bin) {
    if (bin_index > last_released_bin)
        throw ValidationError("output_flux: bin " + std::to_string(bin_index) +
                              " has pending interactions (last released: " +
                              std::to_string(last_released_bin) + ")");
    const auto pos = state.find_bin(bin_index);
    if (!pos) throw DimensionError("output_flux: no bin with index " + std::to_string(bin_index));
    const std::int64_t d = state.physical_dim(*pos);
    const ComplexTensor b = fock_annihilation(d - 1);
    const ComplexTensor n_op = contract(dagger(b), {1}, b, {0});
    const double n2 = std::pow(state.norm(), 2);
    return state.expect(*pos, n_op).real() / (n2 > 0 ? n2 : 1.0) / dt;
}

double instantaneous_g2(const MpsState& state, std::int64_t n_fock_cavity, double floor) {
    const std::int64_t sys_pos = state.system_position();
    const ComplexTensor a = sys_cavity_annihilation(n_fock_cavity);
    const ComplexTensor aa = contract(a, {1}, a, {0});
    const ComplexTensor n_op = contract(dagger(a), {1}, a, {0});
    const double n2 = std::pow(state.norm(), 2);
    const double inv_n2 = n2 > 0 ? 1.0 / n2 : 0.0;
    const double photons = state.expect(sys_pos, n_op).real() * inv_n2;
    if (photons < floor) return std::numeric_limits<double>::quiet_NaN();
    const double num = state.expect(sys_pos, contract(dagger(aa), {1}, aa, {0})).real() * inv_n2;
    return num / (photons * photons);
}

} // namespace jcfb
