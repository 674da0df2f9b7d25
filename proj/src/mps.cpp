#include "jcfb/mps.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <Eigen/Dense>

namespace jcfb {

namespace {

using EigenMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;

EigenMatrix tensor_as_matrix(const ComplexTensor& t, std::int64_t rows, std::int64_t cols) {
    EigenMatrix m(rows, cols);
    const auto d = t.data();
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j) m(i, j) = d[i * cols + j];
    return m;
}

ComplexTensor matrix_as_tensor(const EigenMatrix& m, std::vector<std::int64_t> shape) {
    ComplexTensor t(std::move(shape));
    auto d = t.data();
    const std::int64_t rows = m.rows(), cols = m.cols();
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j) d[i * cols + j] = m(i, j);
    return t;
}

// thin QR: a = q * r with q (rows x k), r (k x cols), k = min(rows, cols)
std::pair<EigenMatrix, EigenMatrix> qr_thin(const EigenMatrix& a) {
    const std::int64_t k = std::min(a.rows(), a.cols());
    Eigen::HouseholderQR<EigenMatrix> qr(a);
    EigenMatrix q = qr.householderQ() * EigenMatrix::Identity(a.rows(), k);
    EigenMatrix r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
    return {std::move(q), std::move(r)};
}

} // namespace

MpsState MpsState::init_state(const ComplexTensor& system_init, std::int64_t n_bins,
                              std::int64_t d_bin, const SvdPolicy& policy,
                              std::int64_t system_pos) {
    policy.validate();
    if (system_init.rank() != 1)
        throw DimensionError("init_state: system_init must be a vector");
    if (std::abs(system_init.norm() - 1.0) > 1e-12)
        throw ValidationError("init_state: system_init must have unit norm");
    if (n_bins < 1) throw ValidationError("init_state: n_bins must be >= 1");
    if (d_bin < 2) throw ValidationError("init_state: d_bin must be >= 2");
    if (system_pos < 0 || system_pos > n_bins)
        throw ValidationError("init_state: system_pos out of range");

    MpsState s;
    s.policy_ = policy;
    s.sites_.reserve(static_cast<std::size_t>(n_bins + 1));
    std::int64_t bin_index = -system_pos;
    for (std::int64_t pos = 0; pos <= n_bins; ++pos) {
        Site site;
        if (pos == system_pos) {
            site.label = {SiteKind::system, 0};
            site.tensor = ComplexTensor({1, system_init.size(), 1},
                                        {system_init.data().begin(), system_init.data().end()});
        } else {
            site.label = {SiteKind::bin, bin_index++};
            site.tensor = ComplexTensor({1, d_bin, 1});
            site.tensor(0, 0, 0) = 1.0; // vacuum
        }
        s.sites_.push_back(std::move(site));
    }
    s.center_ = system_pos;
    return s;
}

std::int64_t MpsState::system_position() const {
    for (std::int64_t i = 0; i < n_sites(); ++i)
        if (site(i).label.kind == SiteKind::system) return i;
    throw DimensionError("chain has no system site");
}

std::optional<std::int64_t> MpsState::find_bin(std::int64_t bin_index) const {
    for (std::int64_t i = 0; i < n_sites(); ++i)
        if (site(i).label.kind == SiteKind::bin && site(i).label.bin_index == bin_index) return i;
    return std::nullopt;
}

std::int64_t MpsState::bond_dim(std::int64_t i) const { return site(i).tensor.extent(2); }

std::int64_t MpsState::max_bond_dim() const {
    std::int64_t m = 1;
    for (std::int64_t i = 0; i + 1 < n_sites(); ++i) m = std::max(m, bond_dim(i));
    return m;
}

double MpsState::norm() const { return site(center_).tensor.norm(); }

void MpsState::move_center(std::int64_t i) {
    if (i < 0 || i >= n_sites()) throw DimensionError("move_center: site index out of range");
    while (center_ < i) {
        ComplexTensor& t = sites_[static_cast<std::size_t>(center_)].tensor;
        const std::int64_t l = t.extent(0), d = t.extent(1), r = t.extent(2);
        auto [q, rm] = qr_thin(tensor_as_matrix(t, l * d, r));
        const std::int64_t k = q.cols();
        t = matrix_as_tensor(q, {l, d, k});
        ComplexTensor& next = sites_[static_cast<std::size_t>(center_ + 1)].tensor;
        next = contract(matrix_as_tensor(rm, {k, r}), {1}, next, {0});
        ++center_;
    }
    while (center_ > i) {
        ComplexTensor& t = sites_[static_cast<std::size_t>(center_)].tensor;
        const std::int64_t l = t.extent(0), d = t.extent(1), r = t.extent(2);
        auto [q, rm] = qr_thin(tensor_as_matrix(t, l, d * r).adjoint());
        const std::int64_t k = q.cols();
        t = matrix_as_tensor(q.adjoint(), {k, d, r});
        ComplexTensor& prev = sites_[static_cast<std::size_t>(center_ - 1)].tensor;
        prev = contract(prev, {2}, matrix_as_tensor(rm.adjoint(), {l, k}), {0});
        --center_;
    }
}

void MpsState::split_pair(std::int64_t i, bool center_right, bool truncate) {
    Site& a = sites_[static_cast<std::size_t>(i)];
    Site& b = sites_[static_cast<std::size_t>(i + 1)];
    ComplexTensor block = contract(a.tensor, {2}, b.tensor, {0}); // (l, da, db, r)
    const SvdPolicy pol = truncate ? policy_ : SvdPolicy::lossless();
    SvdSplit split = svd_split(block, {0, 1}, pol);
    discarded_weight_ += split.discarded_weight;
    const std::int64_t bond = static_cast<std::int64_t>(split.singular_values.size());
    max_bond_seen_ = std::max(max_bond_seen_, bond);
    if (center_right) {
        auto rd = split.right.data();
        const std::int64_t cols = split.right.size() / bond;
        for (std::int64_t k = 0; k < bond; ++k)
            for (std::int64_t c = 0; c < cols; ++c) rd[k * cols + c] *= split.singular_values[k];
        a.tensor = std::move(split.left);
        b.tensor = std::move(split.right);
        center_ = i + 1;
    } else {
        auto ld = split.left.data();
        const std::int64_t rows = split.left.size() / bond;
        for (std::int64_t rr = 0; rr < rows; ++rr)
            for (std::int64_t k = 0; k < bond; ++k) ld[rr * bond + k] *= split.singular_values[k];
        a.tensor = std::move(split.left);
        b.tensor = std::move(split.right);
        center_ = i;
    }
}

void MpsState::apply_gate(const ComplexTensor& u, std::int64_t first, std::int64_t n,
                          std::span<const int> out_perm, std::int64_t center_slot) {
    if (n != 2 && n != 3) throw DimensionError("apply_gate: window must span 2 or 3 sites");
    if (first < 0 || first + n > n_sites())
        throw DimensionError("apply_gate: window out of range");
    if (center_ < first || center_ >= first + n)
        throw DimensionError("apply_gate: orthogonality center must lie inside the window");
    if (center_slot < 0) center_slot = n - 1;
    if (center_slot >= n) throw DimensionError("apply_gate: center_slot out of range");
    if (!out_perm.empty() && static_cast<std::int64_t>(out_perm.size()) != n)
        throw DimensionError("apply_gate: out_perm length must equal the window size");

    std::int64_t dim = 1;
    std::vector<std::int64_t> phys(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) {
        phys[static_cast<std::size_t>(j)] = physical_dim(first + j);
        dim *= phys[static_cast<std::size_t>(j)];
    }
    if (u.rank() != 2 || u.extent(0) != dim || u.extent(1) != dim)
        throw DimensionError("apply_gate: unitary dimension does not match the joint physical space");

    ComplexTensor block = sites_[static_cast<std::size_t>(first)].tensor;
    for (std::int64_t j = 1; j < n; ++j)
        block = contract(block, {static_cast<int>(block.rank() - 1)},
                         sites_[static_cast<std::size_t>(first + j)].tensor, {0});
    // block axes: (l, p0, ..., p_{n-1}, r)
    const std::int64_t l = block.extent(0);
    const std::int64_t r = block.extent(block.rank() - 1);

    ComplexTensor evolved = contract(u, {1}, block.reshaped({l, dim, r}), {1}); // (dim', l, r)
    evolved = evolved.permuted({1, 0, 2});

    std::vector<std::int64_t> full_shape;
    full_shape.push_back(l);
    full_shape.insert(full_shape.end(), phys.begin(), phys.end());
    full_shape.push_back(r);
    evolved = evolved.reshaped(full_shape);

    std::vector<SiteLabel> labels(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) labels[static_cast<std::size_t>(j)] = site(first + j).label;

    if (!out_perm.empty()) {
        std::vector<int> axis_perm(static_cast<std::size_t>(n + 2));
        axis_perm[0] = 0;
        axis_perm[static_cast<std::size_t>(n + 1)] = static_cast<int>(n + 1);
        std::vector<SiteLabel> new_labels(static_cast<std::size_t>(n));
        for (std::int64_t j = 0; j < n; ++j) {
            axis_perm[static_cast<std::size_t>(1 + j)] = 1 + out_perm[static_cast<std::size_t>(j)];
            new_labels[static_cast<std::size_t>(j)] = labels[static_cast<std::size_t>(out_perm[static_cast<std::size_t>(j)])];
        }
        evolved = evolved.permuted(axis_perm);
        labels = std::move(new_labels);
    }

    // refactorize: left-isometries up to center_slot, right-isometries after it
    std::vector<ComplexTensor> tensors(static_cast<std::size_t>(n));
    ComplexTensor rest = std::move(evolved);
    for (std::int64_t j = 0; j < center_slot; ++j) {
        SvdSplit s = svd_split(rest, {0, 1}, policy_);
        discarded_weight_ += s.discarded_weight;
        const std::int64_t bond = static_cast<std::int64_t>(s.singular_values.size());
        max_bond_seen_ = std::max(max_bond_seen_, bond);
        tensors[static_cast<std::size_t>(j)] = std::move(s.left);
        auto rd = s.right.data();
        const std::int64_t cols = s.right.size() / bond;
        for (std::int64_t kk = 0; kk < bond; ++kk)
            for (std::int64_t c = 0; c < cols; ++c) rd[kk * cols + c] *= s.singular_values[kk];
        rest = std::move(s.right);
    }
    for (std::int64_t j = n - 1; j > center_slot; --j) {
        std::vector<int> left;
        for (int ax = 0; ax < rest.rank() - 2; ++ax) left.push_back(ax);
        SvdSplit s = svd_split(rest, left, policy_);
        discarded_weight_ += s.discarded_weight;
        const std::int64_t bond = static_cast<std::int64_t>(s.singular_values.size());
        max_bond_seen_ = std::max(max_bond_seen_, bond);
        tensors[static_cast<std::size_t>(j)] = std::move(s.right);
        auto ld = s.left.data();
        const std::int64_t rows = s.left.size() / bond;
        for (std::int64_t rr = 0; rr < rows; ++rr)
            for (std::int64_t kk = 0; kk < bond; ++kk) ld[rr * bond + kk] *= s.singular_values[kk];
        rest = std::move(s.left);
    }
    tensors[static_cast<std::size_t>(center_slot)] = std::move(rest);

    for (std::int64_t j = 0; j < n; ++j) {
        sites_[static_cast<std::size_t>(first + j)].tensor = std::move(tensors[static_cast<std::size_t>(j)]);
        sites_[static_cast<std::size_t>(first + j)].label = labels[static_cast<std::size_t>(j)];
    }
    center_ = first + center_slot;
}

void MpsState::swap_sites(std::int64_t i, std::optional<std::int64_t> center_to) {
    if (i < 0 || i + 1 >= n_sites()) throw DimensionError("swap_sites: index out of range");
    if (center_ != i && center_ != i + 1)
        throw DimensionError("swap_sites: orthogonality center must sit on one of the swapped sites");
    const std::int64_t target = center_to.value_or(center_ == i ? i + 1 : i);
    if (target != i && target != i + 1) throw DimensionError("swap_sites: center_to out of range");

    Site& a = sites_[static_cast<std::size_t>(i)];
    Site& b = sites_[static_cast<std::size_t>(i + 1)];
    ComplexTensor block = contract(a.tensor, {2}, b.tensor, {0}).permuted({0, 2, 1, 3});
    std::swap(a.label, b.label);
    SvdSplit s = svd_split(block, {0, 1}, policy_);
    discarded_weight_ += s.discarded_weight;
    const std::int64_t bond = static_cast<std::int64_t>(s.singular_values.size());
    max_bond_seen_ = std::max(max_bond_seen_, bond);
    if (target == i + 1) {
        auto rd = s.right.data();
        const std::int64_t cols = s.right.size() / bond;
        for (std::int64_t k = 0; k < bond; ++k)
            for (std::int64_t c = 0; c < cols; ++c) rd[k * cols + c] *= s.singular_values[k];
    } else {
        auto ld = s.left.data();
        const std::int64_t rows = s.left.size() / bond;
        for (std::int64_t rr = 0; rr < rows; ++rr)
            for (std::int64_t k = 0; k < bond; ++k) ld[rr * bond + k] *= s.singular_values[k];
    }
    a.tensor = std::move(s.left);
    b.tensor = std::move(s.right);
    center_ = target;
}

Complex MpsState::expect(std::span<const std::pair<std::int64_t, const ComplexTensor*>> ops) const {
    if (ops.empty()) {
        const double n = norm();
        return n * n;
    }
    std::vector<std::pair<std::int64_t, const ComplexTensor*>> sorted(ops.begin(), ops.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        const auto [pos, op] = sorted[j];
        if (pos < 0 || pos >= n_sites()) throw DimensionError("expect: site index out of range");
        if (j > 0 && sorted[j - 1].first == pos) throw DimensionError("expect: sites must be distinct");
        if (op->rank() != 2 || op->extent(0) != op->extent(1) || op->extent(0) != physical_dim(pos))
            throw DimensionError("expect: operator does not match the site's physical dimension");
    }

    const std::int64_t lo = std::min(center_, sorted.front().first);
    const std::int64_t hi = std::max(center_, sorted.back().first);

    ComplexTensor env = ComplexTensor::identity(site(lo).tensor.extent(0));
    std::size_t next_op = 0;
    for (std::int64_t pos = lo; pos <= hi; ++pos) {
        const ComplexTensor& m = site(pos).tensor;
        ComplexTensor mop = m;
        if (next_op < sorted.size() && sorted[next_op].first == pos) {
            mop = contract(*sorted[next_op].second, {1}, m, {1}).permuted({1, 0, 2});
            ++next_op;
        }
        ComplexTensor inner = contract(env, {1}, mop, {0});              // (lbar, d, r)
        env = contract(m.conjugated(), {0, 1}, inner, {0, 1});           // (rbar, r)
    }
    Complex tr{};
    for (std::int64_t k = 0; k < env.extent(0); ++k) tr += env(k, k);
    return tr;
}

Complex MpsState::expect(std::int64_t pos, const ComplexTensor& op) const {
    const std::pair<std::int64_t, const ComplexTensor*> one[] = {{pos, &op}};
    return expect(one);
}

Complex MpsState::expect2(std::int64_t pos_a, const ComplexTensor& op_a, std::int64_t pos_b,
                          const ComplexTensor& op_b) const {
    const std::pair<std::int64_t, const ComplexTensor*> two[] = {{pos_a, &op_a}, {pos_b, &op_b}};
    return expect(two);
}

namespace {

constexpr char kMagic[8] = {'J', 'C', 'F', 'B', 'M', 'P', 'S', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw NumericalError("mps snapshot: truncated stream");
    return v;
}

} // namespace

void MpsState::save(std::ostream& os) const {
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kVersion);
    write_pod(os, static_cast<std::int64_t>(sites_.size()));
    write_pod(os, center_);
    write_pod(os, policy_.singular_value_cutoff);
    write_pod(os, policy_.max_bond_dimension);
    write_pod(os, discarded_weight_);
    write_pod(os, max_bond_seen_);
    for (const Site& s : sites_) {
        write_pod(os, static_cast<std::uint8_t>(s.label.kind));
        write_pod(os, s.label.bin_index);
        write_pod(os, s.tensor.rank());
        for (auto d : s.tensor.shape()) write_pod(os, d);
        const auto data = s.tensor.data();
        os.write(reinterpret_cast<const char*>(data.data()),
                 static_cast<std::streamsize>(sizeof(Complex) * data.size()));
    }
}

MpsState MpsState::load(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw NumericalError("mps snapshot: bad magic");
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion) throw NumericalError("mps snapshot: unsupported version");
    MpsState s;
    const auto n = read_pod<std::int64_t>(is);
    s.center_ = read_pod<std::int64_t>(is);
    s.policy_.singular_value_cutoff = read_pod<double>(is);
    s.policy_.max_bond_dimension = read_pod<std::int64_t>(is);
    s.discarded_weight_ = read_pod<double>(is);
    s.max_bond_seen_ = read_pod<std::int64_t>(is);
    s.sites_.resize(static_cast<std::size_t>(n));
    for (Site& site : s.sites_) {
        site.label.kind = static_cast<SiteKind>(read_pod<std::uint8_t>(is));
        site.label.bin_index = read_pod<std::int64_t>(is);
        const auto rank = read_pod<std::int64_t>(is);
        std::vector<std::int64_t> shape(static_cast<std::size_t>(rank));
        std::int64_t size = 1;
        for (auto& d : shape) {
            d = read_pod<std::int64_t>(is);
            size *= d;
        }
        std::vector<Complex> data(static_cast<std::size_t>(size));
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(sizeof(Complex) * data.size()));
        if (!is) throw NumericalError("mps snapshot: truncated tensor data");
        site.tensor = ComplexTensor(std::move(shape), std::move(data));
    }
    return s;
}

void MpsState::save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw NumericalError("mps snapshot: cannot open " + path + " for writing");
    save(os);
}

MpsState MpsState::load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw NumericalError("mps snapshot: cannot open " + path);
    return load(is);
}

} // namespace jcfb
