#pragma once

#include <complex>
#include <random>
#include <vector>

#include "jcfb/tensor.hpp"

namespace jcfb::testing {

inline ComplexTensor random_tensor(std::vector<std::int64_t> shape, std::mt19937_64& rng) {
    ComplexTensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : t.data()) v = {dist(rng), dist(rng)};
    return t;
}

inline ComplexTensor random_unitary(std::int64_t dim, std::mt19937_64& rng) {
    // exp of a random anti-Hermitian matrix
    ComplexTensor m = random_tensor({dim, dim}, rng);
    ComplexTensor anti({dim, dim});
    for (std::int64_t i = 0; i < dim; ++i)
        for (std::int64_t j = 0; j < dim; ++j)
            anti(i, j) = 0.5 * (m(i, j) - std::conj(m(j, i)));
    return matrix_exponential(anti);
}

inline double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b) {
    double d = 0.0;
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) d = std::max(d, std::abs(da[i] - db[i]));
    return d;
}

inline double max_abs_diff(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

} // namespace jcfb::testing
