#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "jcfb/kernels.hpp"

#include "support/common.hpp"

using namespace jcfb;
namespace k = jcfb::kernels;

namespace {

std::vector<Complex> naive_matmul(const std::vector<Complex>& a, const std::vector<Complex>& b,
                                  std::int64_t m, std::int64_t kk, std::int64_t n) {
    std::vector<Complex> c(static_cast<std::size_t>(m * n));
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) {
            Complex acc{};
            for (std::int64_t l = 0; l < kk; ++l)
                acc += a[static_cast<std::size_t>(i * kk + l)] * b[static_cast<std::size_t>(l * n + j)];
            c[static_cast<std::size_t>(i * n + j)] = acc;
        }
    return c;
}

std::vector<Complex> random_vec(std::int64_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<Complex> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = {dist(rng), dist(rng)};
    return v;
}

} // namespace

TEST_CASE("matmul serial matches the j-inner reference loop") {
    std::mt19937_64 rng(1);
    for (auto [m, kk, n] : {std::tuple<int, int, int>{3, 4, 5}, {1, 7, 1}, {16, 16, 16}, {33, 5, 9}}) {
        const auto a = random_vec(m * kk, rng);
        const auto b = random_vec(kk * n, rng);
        std::vector<Complex> c(static_cast<std::size_t>(m * n));
        k::matmul_serial(a.data(), b.data(), c.data(), m, kk, n);
        const auto ref = naive_matmul(a, b, m, kk, n);
        CHECK(jcfb::testing::max_abs_diff(c, ref) < 1e-13);
    }
}

TEST_CASE("parallel matmul is bitwise identical to serial") {
    std::mt19937_64 rng(2);
    for (auto [m, kk, n] : {std::tuple<int, int, int>{64, 48, 64}, {128, 7, 3}, {5, 200, 5}}) {
        const auto a = random_vec(m * kk, rng);
        const auto b = random_vec(kk * n, rng);
        std::vector<Complex> cs(static_cast<std::size_t>(m * n));
        std::vector<Complex> cp(static_cast<std::size_t>(m * n));
        k::matmul_serial(a.data(), b.data(), cs.data(), m, kk, n);
        k::matmul_parallel(a.data(), b.data(), cp.data(), m, kk, n);
        CHECK(cs == cp); // same accumulation order per element
    }
}

TEST_CASE("permute moves indices where they belong") {
    std::mt19937_64 rng(3);
    const std::vector<std::int64_t> shape = {2, 3, 4};
    const auto in = random_vec(24, rng);
    std::vector<Complex> out(24);
    const std::vector<int> perm = {2, 0, 1}; // out(i2, i0, i1) = in(i0, i1, i2)
    k::permute_serial(in.data(), out.data(), shape, perm);
    for (std::int64_t i0 = 0; i0 < 2; ++i0)
        for (std::int64_t i1 = 0; i1 < 3; ++i1)
            for (std::int64_t i2 = 0; i2 < 4; ++i2)
                CHECK(out[static_cast<std::size_t>((i2 * 2 + i0) * 3 + i1)] ==
                      in[static_cast<std::size_t>((i0 * 3 + i1) * 4 + i2)]);
}

TEST_CASE("parallel permute is bitwise identical to serial") {
    std::mt19937_64 rng(4);
    const std::vector<std::int64_t> shape = {17, 9, 5, 11};
    std::int64_t size = 17 * 9 * 5 * 11;
    const auto in = random_vec(size, rng);
    std::vector<Complex> a(static_cast<std::size_t>(size)), b(static_cast<std::size_t>(size));
    const std::vector<int> perm = {3, 1, 0, 2};
    k::permute_serial(in.data(), a.data(), shape, perm);
    k::permute_parallel(in.data(), b.data(), shape, perm);
    CHECK(a == b);
}

TEST_CASE("backend switch routes through both paths") {
    std::mt19937_64 rng(5);
    const auto a = random_vec(40 * 40, rng);
    const auto b = random_vec(40 * 40, rng);
    std::vector<Complex> c1(1600), c2(1600);
    k::set_backend(k::Backend::serial);
    k::matmul(a.data(), b.data(), c1.data(), 40, 40, 40);
    k::set_backend(k::Backend::parallel);
    k::matmul(a.data(), b.data(), c2.data(), 40, 40, 40);
    CHECK(c1 == c2);
}
