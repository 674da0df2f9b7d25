#pragma once

#include <complex>
#include <cstdint>
#include <span>

// Low-level data-parallel kernels used by the tensor layer. Every kernel has
// a serial reference implementation and an OpenMP variant; the dispatching
// entry points pick one based on the active backend and the problem size.
// Both variants produce bitwise-identical results: parallelisation is only
// over independent output elements, never over accumulation order.

namespace jcfb::kernels {

using Complex = std::complex<double>;

enum class Backend { serial, parallel };

Backend active_backend();
void set_backend(Backend b);

// Number of threads the parallel backend would use (1 without OpenMP).
int hardware_threads();

// C(m,n) = A(m,k) * B(k,n), all row-major, C must not alias A or B.
void matmul(const Complex* a, const Complex* b, Complex* c,
            std::int64_t m, std::int64_t k, std::int64_t n);
void matmul_serial(const Complex* a, const Complex* b, Complex* c,
                   std::int64_t m, std::int64_t k, std::int64_t n);
void matmul_parallel(const Complex* a, const Complex* b, Complex* c,
                     std::int64_t m, std::int64_t k, std::int64_t n);

// Axis permutation of a dense row-major tensor. The output tensor has
// shape[perm[j]] as its j-th extent and satisfies
//   out(i_{perm[0]}, ..., i_{perm[r-1]}) = in(i_0, ..., i_{r-1}).
void permute(const Complex* in, Complex* out,
             std::span<const std::int64_t> shape, std::span<const int> perm);
void permute_serial(const Complex* in, Complex* out,
                    std::span<const std::int64_t> shape, std::span<const int> perm);
void permute_parallel(const Complex* in, Complex* out,
                      std::span<const std::int64_t> shape, std::span<const int> perm);

} // namespace jcfb::kernels
