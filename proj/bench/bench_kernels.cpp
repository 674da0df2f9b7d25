// Compares the serial reference kernels against the OpenMP variants and a
// full evolution step on realistic shapes. Prints one line per case:
//   name, size, serial ms, parallel ms, speedup, max |diff|

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "jcfb/evolution.hpp"
#include "jcfb/kernels.hpp"
#include "jcfb/tensor.hpp"

using jcfb::Complex;
namespace kernels = jcfb::kernels;

namespace {

double time_ms(int reps, const auto& fn) {
    fn(); // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<Complex> random_data(std::int64_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<Complex> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = {dist(rng), dist(rng)};
    return v;
}

void bench_matmul(std::int64_t m, std::int64_t k, std::int64_t n, std::mt19937_64& rng) {
    const auto a = random_data(m * k, rng);
    const auto b = random_data(k * n, rng);
    std::vector<Complex> c_serial(static_cast<std::size_t>(m * n));
    std::vector<Complex> c_parallel(static_cast<std::size_t>(m * n));

    const int reps = m * k * n > (1 << 22) ? 3 : 20;
    const double ts = time_ms(reps, [&] {
        kernels::matmul_serial(a.data(), b.data(), c_serial.data(), m, k, n);
    });
    const double tp = time_ms(reps, [&] {
        kernels::matmul_parallel(a.data(), b.data(), c_parallel.data(), m, k, n);
    });
    double diff = 0.0;
    for (std::size_t i = 0; i < c_serial.size(); ++i)
        diff = std::max(diff, std::abs(c_serial[i] - c_parallel[i]));
    std::printf("matmul      %5lldx%-5lldx%-5lld  serial %8.3f ms  parallel %8.3f ms  "
                "speedup %5.2fx  maxdiff %.2e\n",
                static_cast<long long>(m), static_cast<long long>(k), static_cast<long long>(n),
                ts, tp, ts / tp, diff);
}

void bench_permute(std::vector<std::int64_t> shape, std::vector<int> perm, std::mt19937_64& rng) {
    std::int64_t size = 1;
    for (auto d : shape) size *= d;
    const auto in = random_data(size, rng);
    std::vector<Complex> out_serial(static_cast<std::size_t>(size));
    std::vector<Complex> out_parallel(static_cast<std::size_t>(size));
    const double ts = time_ms(10, [&] {
        kernels::permute_serial(in.data(), out_serial.data(), shape, perm);
    });
    const double tp = time_ms(10, [&] {
        kernels::permute_parallel(in.data(), out_parallel.data(), shape, perm);
    });
    double diff = 0.0;
    for (std::size_t i = 0; i < out_serial.size(); ++i)
        diff = std::max(diff, std::abs(out_serial[i] - out_parallel[i]));
    std::printf("permute     %8lld elements        serial %8.3f ms  parallel %8.3f ms  "
                "speedup %5.2fx  maxdiff %.2e\n",
                static_cast<long long>(size), ts, tp, ts / tp, diff);
}

// one full feedback evolution (dominated by contraction + SVD kernels)
void bench_evolution(kernels::Backend backend, double* out_ms) {
    kernels::set_backend(backend);
    jcfb::RunPlan plan;
    plan.params.g = 0.2;
    plan.params.drive_amplitude = 0.01;
    plan.params.kappa1 = 0.2 * 0.6125;
    plan.params.kappa2 = 0.2 * 0.6;
    plan.params.tau = 4.0;
    plan.params.phi = M_PI / 2;
    plan.params.dt = 0.2;
    plan.params.n_fock_cavity = 5;
    plan.params.d_bin = 3;
    plan.n_steps = 250;
    plan.system_init = jcfb::ground_vacuum_init(plan.params.n_fock_cavity);
    const auto t0 = std::chrono::steady_clock::now();
    const jcfb::RunResult r = jcfb::run(plan);
    *out_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::printf("  (max bond %lld, discarded weight %.2e)\n",
                static_cast<long long>(r.max_bond), r.cumulative_discarded_weight);
}

} // namespace

int main() {
    std::printf("threads available: %d\n\n", kernels::hardware_threads());
    std::mt19937_64 rng(0x5eed);

    bench_matmul(64, 450, 450, rng);
    bench_matmul(256, 450, 450, rng);
    bench_matmul(1024, 126, 126, rng);
    bench_matmul(48, 48, 48, rng);
    bench_permute({64, 3, 14, 3, 64}, {0, 3, 2, 1, 4}, rng);
    bench_permute({128, 450, 16}, {2, 1, 0}, rng);

    std::printf("\nfull feedback run, 250 steps:\n");
    double serial_ms = 0.0, parallel_ms = 0.0;
    bench_evolution(kernels::Backend::serial, &serial_ms);
    bench_evolution(kernels::Backend::parallel, &parallel_ms);
    std::printf("evolution   250 steps             serial %8.1f ms  parallel %8.1f ms  "
                "speedup %5.2fx\n",
                serial_ms, parallel_ms, serial_ms / parallel_ms);
    kernels::set_backend(kernels::Backend::parallel);
    return 0;
}
