#include "jcfb/linear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jcfb {

void LinearParams::validate() const {
    if (g < 0 || kappa1 < 0 || kappa2 < 0 || tau < 0 || drive_amplitude < 0)
        throw ValidationError("linear model: rates must be >= 0");
}

LinearParams LinearParams::from(const ModelParams& p) {
    return {p.g, p.kappa1, p.kappa2, p.tau, p.phi, p.delta, p.drive_amplitude};
}

Complex effective_decay(double kappa1, double kappa2, double phi) {
    if (kappa1 < 0 || kappa2 < 0) throw ValidationError("effective_decay: rates must be >= 0");
    return kappa1 + kappa2 + 2.0 * std::sqrt(kappa1 * kappa2) * std::polar(1.0, phi);
}

Complex transfer_denominator(Complex s, const LinearParams& p) {
    const Complex shift = s + Complex(0.0, p.delta);
    if (shift == Complex{})
        throw NumericalError("transfer_denominator: s = -i*delta is a singular point");
    return s + p.kappa() + Complex(0.0, p.delta) +
           p.feedback_rate() * std::exp(-s * p.tau + Complex(0.0, p.phi)) -
           p.g * p.g / shift;
}

Complex transfer_denominator_derivative(Complex s, const LinearParams& p) {
    const Complex shift = s + Complex(0.0, p.delta);
    if (shift == Complex{})
        throw NumericalError("transfer_denominator_derivative: s = -i*delta is a singular point");
    return Complex(1.0) - p.feedback_rate() * p.tau * std::exp(-s * p.tau + Complex(0.0, p.phi)) +
           p.g * p.g / (shift * shift);
}

namespace {

struct Cell {
    double re_min, re_max, im_min, im_max;
    Complex center() const { return {0.5 * (re_min + re_max), 0.5 * (im_min + im_max)}; }
    double re_span() const { return re_max - re_min; }
    double im_span() const { return im_max - im_min; }
};

// Winding number of D along the cell boundary (counter-clockwise), with
// adaptive refinement so no sampled phase step exceeds pi/2.
class WindingCounter {
  public:
    explicit WindingCounter(const LinearParams& p) : p_(p) {}

    std::int64_t count(const Cell& c) const {
        double total = 0.0;
        total += edge({c.re_min, c.im_min}, {c.re_max, c.im_min});
        total += edge({c.re_max, c.im_min}, {c.re_max, c.im_max});
        total += edge({c.re_max, c.im_max}, {c.re_min, c.im_max});
        total += edge({c.re_min, c.im_max}, {c.re_min, c.im_min});
        return static_cast<std::int64_t>(std::llround(total / (2.0 * M_PI)));
    }

  private:
    double edge(Complex a, Complex b) const {
        constexpr int kBaseSamples = 64;
        double total = 0.0;
        Complex prev_val = transfer_denominator(a, p_);
        for (int i = 1; i <= kBaseSamples; ++i) {
            const Complex z = a + (b - a) * (static_cast<double>(i) / kBaseSamples);
            const Complex val = transfer_denominator(z, p_);
            total += segment(a + (b - a) * (static_cast<double>(i - 1) / kBaseSamples), z,
                             prev_val, val, 0);
            prev_val = val;
        }
        return total;
    }

    double segment(Complex za, Complex zb, Complex va, Complex vb, int depth) const {
        const double darg = std::arg(vb / va);
        if (std::abs(darg) <= M_PI / 2 || depth >= 40) return darg;
        const Complex zm = 0.5 * (za + zb);
        const Complex vm = transfer_denominator(zm, p_);
        return segment(za, zm, va, vm, depth + 1) + segment(zm, zb, vm, vb, depth + 1);
    }

    const LinearParams& p_;
};

bool newton_refine(const LinearParams& p, Complex seed, Complex& root, double& residual) {
    Complex s = seed;
    for (int it = 0; it < 200; ++it) {
        Complex d, dp;
        try {
            d = transfer_denominator(s, p);
            dp = transfer_denominator_derivative(s, p);
        } catch (const NumericalError&) {
            return false;
        }
        if (dp == Complex{}) return false;
        const Complex step = d / dp;
        s -= step;
        if (std::abs(step) < 1e-14 * (1.0 + std::abs(s))) break;
    }
    try {
        residual = std::abs(transfer_denominator(s, p));
    } catch (const NumericalError&) {
        return false;
    }
    root = s;
    return residual <= 1e-9;
}

bool inside(const Cell& c, Complex z) {
    return z.real() >= c.re_min && z.real() <= c.re_max && z.imag() >= c.im_min &&
           z.imag() <= c.im_max;
}

class PoleSearch {
  public:
    PoleSearch(const LinearParams& p, int density) : p_(p), density_(std::max(density, 8)), winding_(p) {}

    void search(const Cell& cell, PoleSet& out, int depth) {
        std::int64_t zeros = winding_.count(cell);
        // the -g^2/(s + i delta) term has a simple pole at -i delta, which
        // subtracts one from the boundary winding when enclosed
        if (p_.g > 0 && inside(cell, Complex(0.0, -p_.delta))) zeros += 1;
        if (zeros <= 0) return;

        std::vector<Complex> found;
        const int seeds = depth == 0 ? density_ : 4;
        for (int i = 0; i < seeds; ++i)
            for (int j = 0; j < seeds; ++j) {
                const Complex seed{
                    cell.re_min + (i + 0.5) * cell.re_span() / seeds,
                    cell.im_min + (j + 0.5) * cell.im_span() / seeds};
                Complex root;
                double residual;
                if (!newton_refine(p_, seed, root, residual)) continue;
                if (!inside(cell, root)) continue;
                const bool dup = std::any_of(found.begin(), found.end(), [&](Complex r) {
                    return std::abs(r - root) < 1e-6;
                });
                if (!dup) found.push_back(root);
            }

        if (static_cast<std::int64_t>(found.size()) == zeros) {
            for (Complex r : found) record(out, r);
            return;
        }
        if (cell.re_span() < 1e-7 && cell.im_span() < 1e-7) {
            // cluster or defective cell: report, never drop silently
            out.flagged.push_back(cell.center());
            return;
        }
        double re_mid = 0.5 * (cell.re_min + cell.re_max);
        double im_mid = 0.5 * (cell.im_min + cell.im_max);
        // keep subdivision lines away from the known singular point
        if (std::abs(re_mid - 0.0) < 1e-9 && std::abs(-p_.delta - im_mid) < cell.im_span())
            re_mid += 1e-5 * std::max(1.0, cell.re_span());
        if (std::abs(im_mid + p_.delta) < 1e-9) im_mid += 1e-5 * std::max(1.0, cell.im_span());
        const Cell quads[4] = {
            {cell.re_min, re_mid, cell.im_min, im_mid},
            {re_mid, cell.re_max, cell.im_min, im_mid},
            {cell.re_min, re_mid, im_mid, cell.im_max},
            {re_mid, cell.re_max, im_mid, cell.im_max},
        };
        for (const Cell& q : quads) search(q, out, depth + 1);
    }

    void record(PoleSet& out, Complex root) {
        for (Complex r : out.poles)
            if (std::abs(r - root) < 1e-6) return;
        out.poles.push_back(root);
        out.residuals.push_back(std::abs(transfer_denominator(root, p_)));
    }

  private:
    const LinearParams& p_;
    int density_;
    WindingCounter winding_;
};

} // namespace

PoleSet find_poles(const LinearParams& p, PoleWindow window, int grid_density) {
    p.validate();
    if (!(window.re_min < window.re_max && window.im_min < window.im_max))
        throw ValidationError("find_poles: empty search window");

    PoleSet out;
    out.window = window;
    out.grid_density = grid_density;

    // inflate the contour a little so roots sitting exactly on the nominal
    // boundary (undamped resonances on the imaginary axis) are enclosed,
    // and nudge it off the -i delta singularity
    const double mre = 1e-4 * std::max(1.0, window.re_max - window.re_min);
    const double mim = 1e-4 * std::max(1.0, window.im_max - window.im_min);
    Cell cell{window.re_min - mre, window.re_max + mre, window.im_min - mim, window.im_max + mim};
    const Complex sing(0.0, -p.delta);
    if (std::abs(cell.re_min - sing.real()) < 1e-9) cell.re_min -= 1e-6;
    if (std::abs(cell.re_max - sing.real()) < 1e-9) cell.re_max += 1e-6;
    if (std::abs(cell.im_min - sing.imag()) < 1e-9) cell.im_min -= 1e-6;
    if (std::abs(cell.im_max - sing.imag()) < 1e-9) cell.im_max += 1e-6;

    PoleSearch search(p, grid_density);
    search.search(cell, out, 0);

    std::int64_t boundary = WindingCounter(p).count(cell);
    if (p.g > 0 && inside(cell, sing)) boundary += 1;
    out.boundary_count = boundary;

    std::sort(out.poles.begin(), out.poles.end(), [](Complex a, Complex b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() < b.imag();
    });
    out.residuals.clear();
    for (Complex r : out.poles) out.residuals.push_back(std::abs(transfer_denominator(r, p)));
    return out;
}

Spectrum linear_spectrum(std::span<const double> omega, const LinearParams& p,
                         LinearSpectrumOptions opts) {
    p.validate();
    Spectrum s;
    s.omega.assign(omega.begin(), omega.end());
    s.values.resize(omega.size());
    const double num = p.g * p.g * p.drive_amplitude * p.drive_amplitude;
    const std::int64_t nw = static_cast<std::int64_t>(omega.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t w = 0; w < nw; ++w) {
        const double om = omega[static_cast<std::size_t>(w)];
        const double sing_tol = 1e-12;
        if (std::abs(om - p.delta) < sing_tol || std::abs(om + p.delta) < sing_tol ||
            (opts.include_drive_pole_factor && std::abs(om) < sing_tol)) {
            s.values[static_cast<std::size_t>(w)] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        // brackets from s -> -i omega in the two conjugate denominators
        const Complex b1 = p.kappa() + Complex(0.0, -(om - p.delta)) +
                           p.feedback_rate() * std::polar(1.0, om * p.tau + p.phi) +
                           Complex(0.0, -p.g * p.g / (om - p.delta));
        const Complex b2 = p.kappa() + Complex(0.0, -(om + p.delta)) +
                           p.feedback_rate() * std::polar(1.0, om * p.tau - p.phi) +
                           Complex(0.0, -p.g * p.g / (om + p.delta));
        double den = std::abs(b1 * b2);
        if (opts.include_drive_pole_factor) den *= std::abs(om * om * (om * om - p.delta * p.delta));
        s.values[static_cast<std::size_t>(w)] = den > 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
    }
    return s;
}

} // namespace jcfb
