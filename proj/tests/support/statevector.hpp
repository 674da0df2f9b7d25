#pragma once

// Dense statevector simulation of the same site chain, used as the
// brute-force oracle for the MPS engine: gates, swaps and expectation
// values by direct index arithmetic on the full Hilbert space.

#include <complex>
#include <cstdint>
#include <vector>

#include "jcfb/mps.hpp"
#include "jcfb/tensor.hpp"

namespace jcfb::testing {

class Statevector {
  public:
    explicit Statevector(const MpsState& state) {
        for (std::int64_t i = 0; i < state.n_sites(); ++i) dims_.push_back(state.physical_dim(i));
        amps_.assign(static_cast<std::size_t>(total_dim()), Complex{});
        // contract the whole chain into one dense tensor
        ComplexTensor acc = state.site(0).tensor;
        for (std::int64_t i = 1; i < state.n_sites(); ++i)
            acc = contract(acc, {static_cast<int>(acc.rank() - 1)}, state.site(i).tensor, {0});
        // acc axes: (1, d0, ..., dn-1, 1)
        const auto data = acc.data();
        for (std::size_t j = 0; j < amps_.size(); ++j) amps_[j] = data[j];
    }

    std::int64_t total_dim() const {
        std::int64_t n = 1;
        for (auto d : dims_) n *= d;
        return n;
    }

    std::int64_t n_sites() const { return static_cast<std::int64_t>(dims_.size()); }

    const std::vector<Complex>& amplitudes() const { return amps_; }

    // apply a joint unitary on n contiguous sites starting at `first`
    void apply_gate(const ComplexTensor& u, std::int64_t first, std::int64_t n) {
        std::int64_t block = 1;
        for (std::int64_t j = 0; j < n; ++j) block *= dims_[static_cast<std::size_t>(first + j)];
        std::int64_t right = 1;
        for (std::int64_t j = first + n; j < n_sites(); ++j) right *= dims_[static_cast<std::size_t>(j)];
        const std::int64_t left = total_dim() / (block * right);

        std::vector<Complex> next(amps_.size());
        for (std::int64_t l = 0; l < left; ++l)
            for (std::int64_t bo = 0; bo < block; ++bo)
                for (std::int64_t r = 0; r < right; ++r) {
                    Complex acc{};
                    for (std::int64_t bi = 0; bi < block; ++bi)
                        acc += u(bo, bi) * amps_[static_cast<std::size_t>((l * block + bi) * right + r)];
                    next[static_cast<std::size_t>((l * block + bo) * right + r)] = acc;
                }
        amps_ = std::move(next);
    }

    void swap_sites(std::int64_t i) {
        const std::int64_t da = dims_[static_cast<std::size_t>(i)];
        const std::int64_t db = dims_[static_cast<std::size_t>(i + 1)];
        std::int64_t right = 1;
        for (std::int64_t j = i + 2; j < n_sites(); ++j) right *= dims_[static_cast<std::size_t>(j)];
        const std::int64_t left = total_dim() / (da * db * right);
        std::vector<Complex> next(amps_.size());
        for (std::int64_t l = 0; l < left; ++l)
            for (std::int64_t a = 0; a < da; ++a)
                for (std::int64_t b = 0; b < db; ++b)
                    for (std::int64_t r = 0; r < right; ++r)
                        next[static_cast<std::size_t>(((l * db + b) * da + a) * right + r)] =
                            amps_[static_cast<std::size_t>(((l * da + a) * db + b) * right + r)];
        amps_ = std::move(next);
        std::swap(dims_[static_cast<std::size_t>(i)], dims_[static_cast<std::size_t>(i + 1)]);
    }

    Complex expect(std::span<const std::pair<std::int64_t, const ComplexTensor*>> ops) const {
        std::vector<Complex> transformed = amps_;
        for (const auto& [pos, op] : ops) apply_single(transformed, pos, *op);
        Complex acc{};
        for (std::size_t j = 0; j < amps_.size(); ++j) acc += std::conj(amps_[j]) * transformed[j];
        return acc;
    }

    Complex expect(std::int64_t pos, const ComplexTensor& op) const {
        const std::pair<std::int64_t, const ComplexTensor*> one[] = {{pos, &op}};
        return expect(one);
    }

  private:
    void apply_single(std::vector<Complex>& v, std::int64_t pos, const ComplexTensor& op) const {
        const std::int64_t d = dims_[static_cast<std::size_t>(pos)];
        std::int64_t right = 1;
        for (std::int64_t j = pos + 1; j < n_sites(); ++j) right *= dims_[static_cast<std::size_t>(j)];
        const std::int64_t left = total_dim() / (d * right);
        std::vector<Complex> next(v.size());
        for (std::int64_t l = 0; l < left; ++l)
            for (std::int64_t o = 0; o < d; ++o)
                for (std::int64_t r = 0; r < right; ++r) {
                    Complex acc{};
                    for (std::int64_t i = 0; i < d; ++i)
                        acc += op(o, i) * v[static_cast<std::size_t>((l * d + i) * right + r)];
                    next[static_cast<std::size_t>((l * d + o) * right + r)] = acc;
                }
        v = std::move(next);
    }

    std::vector<std::int64_t> dims_;
    std::vector<Complex> amps_;
};

} // namespace jcfb::testing
