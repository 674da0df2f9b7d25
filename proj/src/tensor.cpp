#include "jcfb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "jcfb/kernels.hpp"

namespace jcfb {

namespace {

std::int64_t shape_product(std::span<const std::int64_t> shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

void check_shape(const std::vector<std::int64_t>& shape) {
    for (auto d : shape)
        if (d < 1) throw DimensionError("tensor extent must be >= 1, got " + std::to_string(d));
}

using EigenMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;

EigenMatrix to_eigen(const ComplexTensor& t, std::int64_t rows, std::int64_t cols) {
    EigenMatrix m(rows, cols);
    const auto d = t.data();
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j) m(i, j) = d[i * cols + j];
    return m;
}

} // namespace

ComplexTensor::ComplexTensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(static_cast<std::size_t>(shape_product(shape_)), Complex{});
}

ComplexTensor::ComplexTensor(std::vector<std::int64_t> shape, std::vector<Complex> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (shape_product(shape_) != static_cast<std::int64_t>(data_.size()))
        throw DimensionError("tensor data length does not match product of extents");
}

ComplexTensor ComplexTensor::identity(std::int64_t dim) {
    ComplexTensor t({dim, dim});
    for (std::int64_t i = 0; i < dim; ++i) t(i, i) = 1.0;
    return t;
}

std::int64_t ComplexTensor::linear_index(std::span<const std::int64_t> idx) const {
    std::int64_t lin = 0;
    for (std::size_t a = 0; a < shape_.size(); ++a) lin = lin * shape_[a] + idx[a];
    return lin;
}

ComplexTensor ComplexTensor::reshaped(std::vector<std::int64_t> new_shape) const {
    if (shape_product(new_shape) != size())
        throw DimensionError("reshape changes total size");
    return ComplexTensor(std::move(new_shape), data_);
}

ComplexTensor ComplexTensor::permuted(std::span<const int> perm) const {
    if (static_cast<std::int64_t>(perm.size()) != rank())
        throw DimensionError("permutation length does not match tensor rank");
    std::vector<std::int64_t> new_shape(perm.size());
    for (std::size_t j = 0; j < perm.size(); ++j) new_shape[j] = shape_[perm[j]];
    ComplexTensor out(std::move(new_shape));
    kernels::permute(data_.data(), out.data_.data(), shape_, perm);
    return out;
}

ComplexTensor ComplexTensor::conjugated() const {
    ComplexTensor out = *this;
    for (auto& v : out.data_) v = std::conj(v);
    return out;
}

double ComplexTensor::norm() const {
    double s = 0.0;
    for (const auto& v : data_) s += std::norm(v);
    return std::sqrt(s);
}

ComplexTensor& ComplexTensor::operator*=(Complex s) {
    for (auto& v : data_) v *= s;
    return *this;
}

ComplexTensor& ComplexTensor::operator+=(const ComplexTensor& other) {
    if (shape_ != other.shape_) throw DimensionError("tensor shapes differ in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

ComplexTensor& ComplexTensor::operator-=(const ComplexTensor& other) {
    if (shape_ != other.shape_) throw DimensionError("tensor shapes differ in -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

ComplexTensor operator*(Complex s, const ComplexTensor& t) {
    ComplexTensor out = t;
    out *= s;
    return out;
}

ComplexTensor operator+(ComplexTensor a, const ComplexTensor& b) {
    a += b;
    return a;
}

ComplexTensor operator-(ComplexTensor a, const ComplexTensor& b) {
    a -= b;
    return a;
}

void SvdPolicy::validate() const {
    if (!(singular_value_cutoff >= 0.0 && singular_value_cutoff < 1.0))
        throw ValidationError("singular_value_cutoff must be in [0, 1)");
    if (max_bond_dimension < 1) throw ValidationError("max_bond_dimension must be >= 1");
}

namespace {

// Sorted complement of `axes` in 0..rank-1; validates the axis list.
std::vector<int> free_axes(std::span<const int> axes, std::int64_t rank, const char* who) {
    std::vector<bool> used(static_cast<std::size_t>(rank), false);
    for (int a : axes) {
        if (a < 0 || a >= rank)
            throw DimensionError(std::string(who) + ": axis " + std::to_string(a) +
                                 " out of range for rank " + std::to_string(rank));
        if (used[static_cast<std::size_t>(a)])
            throw DimensionError(std::string(who) + ": duplicate axis " + std::to_string(a));
        used[static_cast<std::size_t>(a)] = true;
    }
    std::vector<int> rest;
    for (int a = 0; a < rank; ++a)
        if (!used[static_cast<std::size_t>(a)]) rest.push_back(a);
    return rest;
}

} // namespace

ComplexTensor contract(const ComplexTensor& a, std::span<const int> axes_a,
                       const ComplexTensor& b, std::span<const int> axes_b) {
    if (axes_a.size() != axes_b.size())
        throw DimensionError("contract: axis lists have different lengths");
    const auto free_a = free_axes(axes_a, a.rank(), "contract(a)");
    const auto free_b = free_axes(axes_b, b.rank(), "contract(b)");

    std::int64_t k = 1;
    for (std::size_t i = 0; i < axes_a.size(); ++i) {
        const std::int64_t ea = a.extent(axes_a[i]);
        const std::int64_t eb = b.extent(axes_b[i]);
        if (ea != eb) {
            std::ostringstream os;
            os << "contract: axis " << axes_a[i] << " of a (extent " << ea << ") does not match axis "
               << axes_b[i] << " of b (extent " << eb << ")";
            throw DimensionError(os.str());
        }
        k *= ea;
    }

    // a -> (free_a..., axes_a...) and b -> (axes_b..., free_b...), then GEMM
    std::vector<int> perm_a(free_a.begin(), free_a.end());
    perm_a.insert(perm_a.end(), axes_a.begin(), axes_a.end());
    std::vector<int> perm_b(axes_b.begin(), axes_b.end());
    perm_b.insert(perm_b.end(), free_b.begin(), free_b.end());

    const ComplexTensor pa = a.permuted(perm_a);
    const ComplexTensor pb = b.permuted(perm_b);

    std::vector<std::int64_t> out_shape;
    std::int64_t m = 1, n = 1;
    for (int ax : free_a) {
        out_shape.push_back(a.extent(ax));
        m *= a.extent(ax);
    }
    for (int ax : free_b) {
        out_shape.push_back(b.extent(ax));
        n *= b.extent(ax);
    }
    if (out_shape.empty()) out_shape.push_back(1); // full contraction -> scalar in a [1] tensor

    ComplexTensor out(out_shape);
    kernels::matmul(pa.data().data(), pb.data().data(), out.data().data(), m, k, n);
    return out;
}

SvdSplit svd_split(const ComplexTensor& t, std::span<const int> left_axes, const SvdPolicy& policy) {
    policy.validate();
    if (left_axes.empty()) throw DimensionError("svd_split: left_axes must be nonempty");
    if (static_cast<std::int64_t>(left_axes.size()) >= t.rank())
        throw DimensionError("svd_split: left_axes must be a proper subset of the axes");
    const auto right = free_axes(left_axes, t.rank(), "svd_split");

    std::vector<int> perm(left_axes.begin(), left_axes.end());
    perm.insert(perm.end(), right.begin(), right.end());
    const ComplexTensor pt = t.permuted(perm);

    std::int64_t rows = 1, cols = 1;
    std::vector<std::int64_t> lshape, rshape;
    for (int ax : left_axes) {
        lshape.push_back(t.extent(ax));
        rows *= t.extent(ax);
    }
    for (int ax : right) {
        rshape.push_back(t.extent(ax));
        cols *= t.extent(ax);
    }

    EigenMatrix m = to_eigen(pt, rows, cols);
    Eigen::BDCSVD<EigenMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        std::ostringstream os;
        os << "svd_split: SVD failed to converge on a " << rows << "x" << cols << " matrix";
        throw NumericalError(os.str());
    }

    const auto& sv = svd.singularValues();
    const std::int64_t full = sv.size();
    const double smax = full > 0 ? sv(0) : 0.0;
    std::int64_t keep = 0;
    for (std::int64_t i = 0; i < full; ++i)
        if (sv(i) > policy.singular_value_cutoff * smax) ++keep;
    keep = std::clamp<std::int64_t>(keep, 1, std::min<std::int64_t>(full, policy.max_bond_dimension));

    double discarded = 0.0;
    for (std::int64_t i = keep; i < full; ++i) discarded += sv(i) * sv(i);

    SvdSplit out;
    out.discarded_weight = discarded;
    out.singular_values.assign(sv.data(), sv.data() + keep);

    lshape.push_back(keep);
    rshape.insert(rshape.begin(), keep);
    out.left = ComplexTensor(std::move(lshape));
    out.right = ComplexTensor(std::move(rshape));
    auto ldata = out.left.data();
    auto rdata = out.right.data();
    const auto& u = svd.matrixU();
    const auto& v = svd.matrixV();
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < keep; ++j) ldata[i * keep + j] = u(i, j);
    for (std::int64_t j = 0; j < keep; ++j)
        for (std::int64_t i = 0; i < cols; ++i) rdata[j * cols + i] = std::conj(v(i, j));
    return out;
}

ComplexTensor matrix_exponential(const ComplexTensor& m) {
    if (m.rank() != 2 || m.extent(0) != m.extent(1))
        throw DimensionError("matrix_exponential: input must be a square matrix");
    const std::int64_t d = m.extent(0);
    EigenMatrix em = to_eigen(m, d, d);
    EigenMatrix ee = em.exp();
    ComplexTensor out({d, d});
    auto od = out.data();
    for (std::int64_t i = 0; i < d; ++i)
        for (std::int64_t j = 0; j < d; ++j) od[i * d + j] = ee(i, j);
    return out;
}

} // namespace jcfb
