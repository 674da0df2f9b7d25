#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jcfb/tensor.hpp"

namespace jcfb {

enum class SiteKind : std::uint8_t { system = 0, bin = 1 };

struct SiteLabel {
    SiteKind kind = SiteKind::bin;
    std::int64_t bin_index = 0; // time-bin ordinal, meaningful for kind == bin

    bool operator==(const SiteLabel&) const = default;
};

struct Site {
    SiteLabel label;
    ComplexTensor tensor; // axes [left bond, physical, right bond]
};

/// Chain of time-bin sites plus one system site, kept in mixed-canonical
/// form: sites left of the orthogonality center are left-isometric, sites
/// right of it right-isometric. All truncation losses are accumulated in
/// a discarded-weight ledger.
class MpsState {
  public:
    /// Product state: every bin in vacuum |0>, the system site (carrying
    /// system_init, unit norm) at chain position system_pos. Bins are
    /// labelled consecutively in chain order starting at -system_pos, so
    /// bins left of the system get negative indices. Center starts at the
    /// system site.
    static MpsState init_state(const ComplexTensor& system_init, std::int64_t n_bins,
                               std::int64_t d_bin, const SvdPolicy& policy,
                               std::int64_t system_pos = 0);

    std::int64_t n_sites() const { return static_cast<std::int64_t>(sites_.size()); }
    const Site& site(std::int64_t i) const { return sites_[static_cast<std::size_t>(i)]; }
    /// Direct tensor surgery; the caller keeps the bond shapes consistent.
    Site& site_mut(std::int64_t i) { return sites_[static_cast<std::size_t>(i)]; }
    std::int64_t center() const { return center_; }
    const SvdPolicy& policy() const { return policy_; }
    void set_policy(const SvdPolicy& p) { policy_ = p; }

    std::int64_t system_position() const;
    std::optional<std::int64_t> find_bin(std::int64_t bin_index) const;

    std::int64_t physical_dim(std::int64_t i) const { return site(i).tensor.extent(1); }
    std::int64_t bond_dim(std::int64_t i) const; // bond between sites i and i+1
    std::int64_t max_bond_dim() const;

    double cumulative_discarded_weight() const { return discarded_weight_; }
    std::int64_t max_bond_seen() const { return max_bond_seen_; }

    /// sqrt(<Psi|Psi>); exact under the canonical-form invariant.
    double norm() const;

    /// Gauge move of the orthogonality center (QR-based, lossless).
    void move_center(std::int64_t i);

    /// Apply the joint unitary u (matrix on the product of the physical
    /// spaces of sites first..first+n-1 in chain order, n = 2 or 3), then
    /// refactorize under the truncation policy. out_perm optionally
    /// rearranges the physical legs: original window slot out_perm[j] ends
    /// up at chain slot first+j (labels move along). The center must start
    /// inside the window and ends at first+center_slot.
    void apply_gate(const ComplexTensor& u, std::int64_t first, std::int64_t n,
                    std::span<const int> out_perm = {}, std::int64_t center_slot = -1);
    void apply_gate(const ComplexTensor& u, std::int64_t first, std::int64_t n,
                    std::initializer_list<int> out_perm, std::int64_t center_slot = -1) {
        apply_gate(u, first, n, std::span<const int>(out_perm.begin(), out_perm.size()),
                   center_slot);
    }

    /// Exchange sites i and i+1 (tensors and labels). The center must sit
    /// on one of the two; it ends at center_to (defaults to staying where
    /// the moving partner went, i.e. follows the site previously at i).
    void swap_sites(std::int64_t i, std::optional<std::int64_t> center_to = std::nullopt);

    /// <Psi| prod_j op_j |Psi> with op_j acting on distinct sites. Not
    /// normalized: divide by norm()^2 for a physical expectation value.
    Complex expect(std::span<const std::pair<std::int64_t, const ComplexTensor*>> ops) const;
    Complex expect(std::int64_t pos, const ComplexTensor& op) const;
    Complex expect2(std::int64_t pos_a, const ComplexTensor& op_a, std::int64_t pos_b,
                    const ComplexTensor& op_b) const;

    /// Versioned little-endian snapshot (shapes + complex pairs).
    void save(std::ostream& os) const;
    static MpsState load(std::istream& is);
    void save_file(const std::string& path) const;
    static MpsState load_file(const std::string& path);

  private:
    MpsState() = default;

    void split_pair(std::int64_t i, bool center_right, bool truncate);

    std::vector<Site> sites_;
    std::int64_t center_ = 0;
    SvdPolicy policy_;
    double discarded_weight_ = 0.0;
    std::int64_t max_bond_seen_ = 1;
};

} // namespace jcfb
