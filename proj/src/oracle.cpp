#include "jcfb/oracle.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

namespace jcfb {

namespace {

using EigenMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using EigenVector = Eigen::Vector<Complex, Eigen::Dynamic>;

EigenMatrix to_eigen(const ComplexTensor& t) {
    const std::int64_t r = t.extent(0), c = t.rank() == 2 ? t.extent(1) : 1;
    EigenMatrix m(r, c);
    const auto d = t.data();
    for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < c; ++j) m(i, j) = d[i * c + j];
    return m;
}

ComplexTensor from_eigen(const EigenMatrix& m) {
    ComplexTensor t({m.rows(), m.cols()});
    auto d = t.data();
    for (std::int64_t i = 0; i < m.rows(); ++i)
        for (std::int64_t j = 0; j < m.cols(); ++j) d[i * m.cols() + j] = m(i, j);
    return t;
}

struct SystemOps {
    EigenMatrix a, ad, n, sp_sm, g2_num, h;
};

SystemOps make_ops(const ModelParams& p) {
    SystemOps ops;
    ops.a = to_eigen(sys_cavity_annihilation(p.n_fock_cavity));
    ops.ad = ops.a.adjoint();
    ops.n = ops.ad * ops.a;
    const EigenMatrix sm = to_eigen(sys_tls_lowering(p.n_fock_cavity));
    ops.sp_sm = sm.adjoint() * sm;
    ops.g2_num = ops.ad * ops.ad * ops.a * ops.a;
    ops.h = to_eigen(system_hamiltonian(p));
    return ops;
}

void push(std::map<std::string, TimeSeries>& series, const std::string& label, double t, double v) {
    auto& ts = series[label];
    ts.label = label;
    ts.t.push_back(t);
    ts.values.push_back(v);
}

// population of the top two Fock levels, summed over the emitter state
double top_level_population(const EigenVector& psi, std::int64_t n_fock) {
    const std::int64_t dc = n_fock + 1;
    double pop = 0.0;
    for (std::int64_t tls = 0; tls < 2; ++tls)
        for (std::int64_t n = std::max<std::int64_t>(0, n_fock - 1); n <= n_fock; ++n)
            pop += std::norm(psi(tls * dc + n));
    return pop;
}

double top_level_population(const EigenMatrix& rho, std::int64_t n_fock) {
    const std::int64_t dc = n_fock + 1;
    double pop = 0.0;
    for (std::int64_t tls = 0; tls < 2; ++tls)
        for (std::int64_t n = std::max<std::int64_t>(0, n_fock - 1); n <= n_fock; ++n)
            pop += rho(tls * dc + n, tls * dc + n).real();
    return pop;
}

} // namespace

DensityMatrix DensityMatrix::pure(const ComplexTensor& psi) {
    if (psi.rank() != 1) throw DimensionError("DensityMatrix::pure: psi must be a vector");
    const std::int64_t d = psi.size();
    DensityMatrix rho;
    rho.matrix = ComplexTensor({d, d});
    const auto pd = psi.data();
    auto rd = rho.matrix.data();
    for (std::int64_t i = 0; i < d; ++i)
        for (std::int64_t j = 0; j < d; ++j) rd[i * d + j] = pd[i] * std::conj(pd[j]);
    return rho;
}

double DensityMatrix::trace() const {
    const std::int64_t d = matrix.extent(0);
    Complex tr{};
    for (std::int64_t i = 0; i < d; ++i) tr += matrix(i, i);
    return tr.real();
}

void DensityMatrix::validate(double tol) const {
    if (matrix.rank() != 2 || matrix.extent(0) != matrix.extent(1))
        throw DimensionError("density matrix must be square");
    if (std::abs(trace() - 1.0) > tol)
        throw ValidationError("density matrix trace deviates from 1");
    EigenMatrix m = to_eigen(matrix);
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol)
        throw ValidationError("density matrix is not Hermitian");
    Eigen::SelfAdjointEigenSolver<EigenMatrix> es(m);
    if (es.eigenvalues().minCoeff() < -tol)
        throw ValidationError("density matrix has a negative eigenvalue");
}

ClosedRun closed_evolve(const ComplexTensor& h, const ComplexTensor& psi0,
                        std::span<const double> t_grid, std::int64_t n_fock_cavity) {
    if (h.rank() != 2 || h.extent(0) != h.extent(1))
        throw DimensionError("closed_evolve: H must be square");
    EigenMatrix hm = to_eigen(h);
    if ((hm - hm.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
        throw ValidationError("closed_evolve: H must be Hermitian");
    EigenVector v0 = to_eigen(psi0).col(0);
    if (std::abs(v0.norm() - 1.0) > 1e-12)
        throw ValidationError("closed_evolve: psi0 must have unit norm");

    Eigen::SelfAdjointEigenSolver<EigenMatrix> es(hm);
    const auto& evals = es.eigenvalues();
    const EigenMatrix& vects = es.eigenvectors();
    const EigenVector coeff = vects.adjoint() * v0;

    ModelParams dims;
    dims.n_fock_cavity = n_fock_cavity;
    const EigenMatrix a = to_eigen(sys_cavity_annihilation(n_fock_cavity));
    const EigenMatrix n_op = a.adjoint() * a;
    const EigenMatrix sm = to_eigen(sys_tls_lowering(n_fock_cavity));
    const EigenMatrix sp_sm = sm.adjoint() * sm;
    const EigenMatrix g2_num = a.adjoint() * a.adjoint() * a * a;

    ClosedRun out;
    for (double t : t_grid) {
        EigenVector psi = vects * (coeff.array() * (Complex(0.0, -t) * evals.array().cast<Complex>()).exp()).matrix();
        const double excitation = psi.dot(sp_sm * psi).real();
        const double photons = psi.dot(n_op * psi).real();
        const double energy = psi.dot(hm * psi).real();
        push(out.series, "tls_population", t, excitation);
        push(out.series, "inversion", t, 2.0 * excitation - 1.0);
        push(out.series, "cavity_photons", t, photons);
        const double g2 = photons >= 1e-8
                              ? psi.dot(g2_num * psi).real() / (photons * photons)
                              : std::numeric_limits<double>::quiet_NaN();
        push(out.series, "instantaneous_g2", t, g2);
        push(out.series, "energy", t, energy);
        out.final_top_level_population = top_level_population(psi, n_fock_cavity);
        if (out.final_top_level_population > 1e-6) out.cutoff_leak_warning = true;
    }
    return out;
}

namespace {

class LindbladGenerator {
  public:
    LindbladGenerator(const SystemOps& ops, double kappa_tot)
        : h_(ops.h), a_(ops.a), ad_(ops.ad), n_(ops.n), kappa_(kappa_tot) {}

    EigenMatrix operator()(const EigenMatrix& rho) const {
        EigenMatrix out = Complex(0.0, -1.0) * (h_ * rho - rho * h_);
        if (kappa_ > 0.0)
            out += 2.0 * kappa_ * (a_ * rho * ad_ - 0.5 * (n_ * rho + rho * n_));
        return out;
    }

    // classic fourth-order step
    EigenMatrix rk4(const EigenMatrix& rho, double h) const {
        const EigenMatrix k1 = (*this)(rho);
        const EigenMatrix k2 = (*this)(rho + 0.5 * h * k1);
        const EigenMatrix k3 = (*this)(rho + 0.5 * h * k2);
        const EigenMatrix k4 = (*this)(rho + h * k3);
        return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

  private:
    const EigenMatrix &h_, &a_, &ad_, &n_;
    double kappa_;
};

} // namespace

LindbladRun lindblad_evolve(const ModelParams& p, const DensityMatrix& rho0,
                            std::span<const double> t_grid) {
    p.validate();
    rho0.validate();
    if (rho0.matrix.extent(0) != p.d_sys())
        throw DimensionError("lindblad_evolve: rho0 does not match d_sys");
    if (t_grid.empty()) throw ValidationError("lindblad_evolve: empty time grid");

    const SystemOps ops = make_ops(p);
    const double kappa_tot = p.kappa1 + p.kappa2;
    const LindbladGenerator gen(ops, kappa_tot);

    double h = p.dt;
    for (int attempt = 0; attempt < 9; ++attempt) {
        LindbladRun out;
        out.step_used = h;
        EigenMatrix rho = to_eigen(rho0.matrix);
        double t = 0.0;
        bool ok = true;
        for (double target : t_grid) {
            if (target < t - 1e-12)
                throw ValidationError("lindblad_evolve: time grid must be nondecreasing from 0");
            while (t < target - 1e-12) {
                const double step = std::min(h, target - t);
                rho = gen.rk4(rho, step);
                t += step;
            }
            const double tr = rho.trace().real();
            out.max_trace_error = std::max(out.max_trace_error, std::abs(tr - 1.0));
            if (out.max_trace_error > 1e-9) {
                ok = false;
                break;
            }
            const double excitation = (ops.sp_sm * rho).trace().real();
            const double photons = (ops.n * rho).trace().real();
            push(out.series, "tls_population", target, excitation);
            push(out.series, "inversion", target, 2.0 * excitation - 1.0);
            push(out.series, "cavity_photons", target, photons);
            const double g2 = photons >= 1e-8
                                  ? (ops.g2_num * rho).trace().real() / (photons * photons)
                                  : std::numeric_limits<double>::quiet_NaN();
            push(out.series, "instantaneous_g2", target, g2);
            push(out.series, "trace", target, tr);
            out.final_top_level_population = top_level_population(rho, p.n_fock_cavity);
        }
        if (ok) {
            out.final_state.matrix = from_eigen(rho);
            return out;
        }
        h *= 0.5; // adaptive retry with a finer step
    }
    std::ostringstream os;
    os << "lindblad_evolve: trace drift above 1e-9 even at step " << h
       << "; generator may be ill-conditioned";
    throw NumericalError(os.str());
}

DensityMatrix steady_state(const ModelParams& p, double residual_tol) {
    p.validate();
    const SystemOps ops = make_ops(p);
    const double kappa_tot = p.kappa1 + p.kappa2;
    if (kappa_tot <= 0.0)
        throw ValidationError("steady_state: needs kappa_tot > 0 for a unique fixed point");
    const std::int64_t d = p.d_sys();
    const std::int64_t dd = d * d;

    // vec(rho) with row-major index i*d+j; L[(i,j),(k,l)]
    EigenMatrix lmat = EigenMatrix::Zero(dd, dd);
    const Complex mi(0.0, -1.0);
    for (std::int64_t i = 0; i < d; ++i)
        for (std::int64_t j = 0; j < d; ++j) {
            const std::int64_t row = i * d + j;
            for (std::int64_t k = 0; k < d; ++k) {
                lmat(row, k * d + j) += mi * ops.h(i, k) - kappa_tot * ops.n(i, k);
                lmat(row, i * d + k) += -mi * ops.h(k, j) - kappa_tot * ops.n(k, j);
            }
            for (std::int64_t k = 0; k < d; ++k)
                for (std::int64_t l = 0; l < d; ++l)
                    lmat(row, k * d + l) += 2.0 * kappa_tot * ops.a(i, k) * std::conj(ops.a(j, l));
        }

    // replace the first row by the trace constraint
    EigenVector rhs = EigenVector::Zero(dd);
    rhs(0) = 1.0;
    for (std::int64_t c = 0; c < dd; ++c) lmat(0, c) = 0.0;
    for (std::int64_t i = 0; i < d; ++i) lmat(0, i * d + i) = 1.0;

    const EigenVector x = lmat.partialPivLu().solve(rhs);

    EigenMatrix rho(d, d);
    for (std::int64_t i = 0; i < d; ++i)
        for (std::int64_t j = 0; j < d; ++j) rho(i, j) = x(i * d + j);
    rho = 0.5 * (rho + rho.adjoint().eval()); // clean tiny asymmetry

    const LindbladGenerator gen(ops, kappa_tot);
    const double residual = gen(rho).cwiseAbs().maxCoeff();
    if (residual > residual_tol) {
        std::ostringstream os;
        os << "steady_state: fixed-point residual " << residual << " above " << residual_tol;
        throw NumericalError(os.str());
    }
    DensityMatrix out;
    out.matrix = from_eigen(rho);
    return out;
}

CorrelationSeries regression_correlations(const ModelParams& p, RegressionKind which,
                                          std::span<const double> lag_grid) {
    if (lag_grid.empty() || lag_grid.front() != 0.0)
        throw ValidationError("regression_correlations: lag grid must start at 0");
    const DensityMatrix rho_ss = steady_state(p);
    const SystemOps ops = make_ops(p);
    const double kappa_tot = p.kappa1 + p.kappa2;
    const LindbladGenerator gen(ops, kappa_tot);

    const EigenMatrix rho = to_eigen(rho_ss.matrix);
    const double nbar = (ops.n * rho).trace().real();
    if (nbar <= 0.0) throw NumericalError("regression_correlations: zero steady-state photon number");

    // g1: X(tau) = e^{L tau}[rho a^dag],  g1 = Tr[a X]/nbar
    // g2: X(tau) = e^{L tau}[a rho a^dag], g2 = Tr[n X]/nbar^2
    EigenMatrix x = which == RegressionKind::g1 ? EigenMatrix(rho * ops.ad)
                                                : EigenMatrix(ops.a * rho * ops.ad);
    CorrelationSeries out;
    out.label = which == RegressionKind::g1 ? "g1" : "g2";
    out.base_time = 0.0;
    out.normalization = which == RegressionKind::g1 ? nbar : nbar * nbar;

    const double h = p.dt;
    double t = 0.0;
    for (double target : lag_grid) {
        while (t < target - 1e-12) {
            const double step = std::min(h, target - t);
            x = gen.rk4(x, step);
            t += step;
        }
        out.tau.push_back(target);
        if (which == RegressionKind::g1)
            out.values.push_back((ops.a * x).trace() / nbar);
        else
            out.values.emplace_back((ops.n * x).trace().real() / (nbar * nbar), 0.0);
    }
    return out;
}

} // namespace jcfb
