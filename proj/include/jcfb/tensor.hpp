#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "jcfb/errors.hpp"

namespace jcfb {

using Complex = std::complex<double>;

/// Dense multi-index array of complex doubles, row-major (last index fastest).
class ComplexTensor {
  public:
    ComplexTensor() = default;
    explicit ComplexTensor(std::vector<std::int64_t> shape);
    ComplexTensor(std::vector<std::int64_t> shape, std::vector<Complex> data);

    static ComplexTensor identity(std::int64_t dim);

    std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t extent(std::int64_t axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    std::span<Complex> data() { return data_; }
    std::span<const Complex> data() const { return data_; }

    template <typename... Is>
    Complex& operator()(Is... is) {
        const std::array<std::int64_t, sizeof...(Is)> idx{static_cast<std::int64_t>(is)...};
        return data_[linear_index(idx)];
    }
    template <typename... Is>
    const Complex& operator()(Is... is) const {
        const std::array<std::int64_t, sizeof...(Is)> idx{static_cast<std::int64_t>(is)...};
        return data_[linear_index(idx)];
    }

    Complex& at(std::span<const std::int64_t> idx) { return data_[linear_index(idx)]; }
    const Complex& at(std::span<const std::int64_t> idx) const { return data_[linear_index(idx)]; }

    /// Same data, new index grouping. The total size must be unchanged.
    ComplexTensor reshaped(std::vector<std::int64_t> new_shape) const;
    ComplexTensor permuted(std::span<const int> perm) const;
    ComplexTensor permuted(std::initializer_list<int> perm) const {
        return permuted(std::span<const int>(perm.begin(), perm.size()));
    }
    ComplexTensor conjugated() const;

    double norm() const; // Frobenius

    ComplexTensor& operator*=(Complex s);
    ComplexTensor& operator+=(const ComplexTensor& other);
    ComplexTensor& operator-=(const ComplexTensor& other);

  private:
    std::int64_t linear_index(std::span<const std::int64_t> idx) const;

    std::vector<std::int64_t> shape_;
    std::vector<Complex> data_;
};

ComplexTensor operator*(Complex s, const ComplexTensor& t);
ComplexTensor operator+(ComplexTensor a, const ComplexTensor& b);
ComplexTensor operator-(ComplexTensor a, const ComplexTensor& b);

/// Truncation rule for tensor splits: drop singular values below
/// cutoff * s_max, never keep more than max_bond_dimension of them.
struct SvdPolicy {
    double singular_value_cutoff = 1e-10;
    std::int64_t max_bond_dimension = 64;

    void validate() const;
    static SvdPolicy lossless() { return {0.0, std::numeric_limits<std::int64_t>::max()}; }
};

struct SvdSplit {
    ComplexTensor left;                  // (left extents..., bond), isometric columns
    std::vector<double> singular_values; // descending, kept values only
    ComplexTensor right;                 // (bond, right extents...), isometric rows
    double discarded_weight = 0.0;       // sum of squared dropped singular values
};

/// Sum over the paired axes; remaining indices ordered as
/// (free axes of a in order, free axes of b in order).
ComplexTensor contract(const ComplexTensor& a, std::span<const int> axes_a,
                       const ComplexTensor& b, std::span<const int> axes_b);
inline ComplexTensor contract(const ComplexTensor& a, std::initializer_list<int> axes_a,
                              const ComplexTensor& b, std::initializer_list<int> axes_b) {
    return contract(a, std::span<const int>(axes_a.begin(), axes_a.size()), b,
                    std::span<const int>(axes_b.begin(), axes_b.size()));
}

/// Split t into left * diag(s) * right across the bipartition given by
/// left_axes (kept in the given order; the remaining axes keep their order on
/// the right). The singular-value matrix is NOT absorbed into either side.
SvdSplit svd_split(const ComplexTensor& t, std::span<const int> left_axes, const SvdPolicy& policy);
inline SvdSplit svd_split(const ComplexTensor& t, std::initializer_list<int> left_axes,
                          const SvdPolicy& policy) {
    return svd_split(t, std::span<const int>(left_axes.begin(), left_axes.size()), policy);
}

/// exp(m) for a square matrix (rank-2 tensor), scaling-and-squaring accuracy.
ComplexTensor matrix_exponential(const ComplexTensor& m);

} // namespace jcfb
