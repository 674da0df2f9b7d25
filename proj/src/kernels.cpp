#include "jcfb/kernels.hpp"

#include <atomic>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace jcfb::kernels {

namespace {

std::atomic<Backend> g_backend{
#ifdef _OPENMP
    Backend::parallel
#else
    Backend::serial
#endif
};

// Below this many fused multiply-adds the fork/join overhead dominates.
constexpr std::int64_t kMatmulParallelThreshold = 1 << 15;
constexpr std::int64_t kPermuteParallelThreshold = 1 << 15;

} // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void matmul_serial(const Complex* a, const Complex* b, Complex* c,
                   std::int64_t m, std::int64_t k, std::int64_t n) {
    std::memset(static_cast<void*>(c), 0, sizeof(Complex) * static_cast<std::size_t>(m * n));
    for (std::int64_t i = 0; i < m; ++i) {
        const Complex* arow = a + i * k;
        Complex* crow = c + i * n;
        for (std::int64_t l = 0; l < k; ++l) {
            const Complex alk = arow[l];
            if (alk == Complex{}) continue;
            const Complex* brow = b + l * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += alk * brow[j];
        }
    }
}

void matmul_parallel(const Complex* a, const Complex* b, Complex* c,
                     std::int64_t m, std::int64_t k, std::int64_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        const Complex* arow = a + i * k;
        Complex* crow = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) crow[j] = Complex{};
        for (std::int64_t l = 0; l < k; ++l) {
            const Complex alk = arow[l];
            if (alk == Complex{}) continue;
            const Complex* brow = b + l * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += alk * brow[j];
        }
    }
#else
    matmul_serial(a, b, c, m, k, n);
#endif
}

void matmul(const Complex* a, const Complex* b, Complex* c,
            std::int64_t m, std::int64_t k, std::int64_t n) {
    if (active_backend() == Backend::parallel && m * k * n >= kMatmulParallelThreshold && m > 1)
        matmul_parallel(a, b, c, m, k, n);
    else
        matmul_serial(a, b, c, m, k, n);
}

namespace {

struct PermutePlan {
    std::int64_t size = 1;
    // strides of the input tensor reordered so that axis j of the output
    // advances the input linear index by in_stride[j]
    std::vector<std::int64_t> out_shape;
    std::vector<std::int64_t> in_stride;
};

PermutePlan make_plan(std::span<const std::int64_t> shape, std::span<const int> perm) {
    const auto r = static_cast<std::int64_t>(shape.size());
    std::vector<std::int64_t> stride(r, 1);
    for (std::int64_t i = r - 2; i >= 0; --i) stride[i] = stride[i + 1] * shape[i + 1];
    PermutePlan plan;
    plan.out_shape.resize(r);
    plan.in_stride.resize(r);
    for (std::int64_t j = 0; j < r; ++j) {
        plan.out_shape[j] = shape[perm[j]];
        plan.in_stride[j] = stride[perm[j]];
        plan.size *= shape[j];
    }
    return plan;
}

inline std::int64_t input_index(const PermutePlan& plan, std::int64_t out_lin) {
    std::int64_t in_lin = 0;
    for (std::int64_t j = static_cast<std::int64_t>(plan.out_shape.size()) - 1; j >= 0; --j) {
        const std::int64_t d = plan.out_shape[j];
        in_lin += (out_lin % d) * plan.in_stride[j];
        out_lin /= d;
    }
    return in_lin;
}

void permute_range(const Complex* in, Complex* out, const PermutePlan& plan,
                   std::int64_t begin, std::int64_t end) {
    // walk the output contiguously; keep the innermost loop over the last
    // output axis so at least one side streams
    const std::int64_t inner = plan.out_shape.empty() ? 1 : plan.out_shape.back();
    const std::int64_t inner_stride = plan.in_stride.empty() ? 0 : plan.in_stride.back();
    for (std::int64_t o = begin; o < end;) {
        const std::int64_t run = std::min(inner - (o % inner), end - o);
        std::int64_t base = input_index(plan, o);
        for (std::int64_t j = 0; j < run; ++j) out[o + j] = in[base + j * inner_stride];
        o += run;
    }
}

} // namespace

void permute_serial(const Complex* in, Complex* out,
                    std::span<const std::int64_t> shape, std::span<const int> perm) {
    const PermutePlan plan = make_plan(shape, perm);
    permute_range(in, out, plan, 0, plan.size);
}

void permute_parallel(const Complex* in, Complex* out,
                      std::span<const std::int64_t> shape, std::span<const int> perm) {
#ifdef _OPENMP
    const PermutePlan plan = make_plan(shape, perm);
    const int nt = hardware_threads();
    const std::int64_t chunk = (plan.size + nt - 1) / nt;
#pragma omp parallel for schedule(static, 1)
    for (int t = 0; t < nt; ++t) {
        const std::int64_t begin = t * chunk;
        const std::int64_t end = std::min(plan.size, begin + chunk);
        if (begin < end) permute_range(in, out, plan, begin, end);
    }
#else
    permute_serial(in, out, shape, perm);
#endif
}

void permute(const Complex* in, Complex* out,
             std::span<const std::int64_t> shape, std::span<const int> perm) {
    std::int64_t size = 1;
    for (auto d : shape) size *= d;
    if (active_backend() == Backend::parallel && size >= kPermuteParallelThreshold)
        permute_parallel(in, out, shape, perm);
    else
        permute_serial(in, out, shape, perm);
}

} // namespace jcfb::kernels
