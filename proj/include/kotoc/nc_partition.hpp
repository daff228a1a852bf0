#pragma once
// Noncrossing partition lattice NC(k): enumeration, containment order,
// Kreweras complement, Moebius function, Cayley cycle counts, multichains.
//
// A partition is stored twice: as sorted blocks and as the permutation whose
// cycles, read with elements ascending, are exactly those blocks.  The
// permutation array is authoritative for composition, the blocks for the
// containment order.  Elements are 0-based internally; printers use 1-based
// labels.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace kotoc {

class NcPartition {
public:
    NcPartition() = default;

    // Throws std::invalid_argument if the blocks do not partition {0..k-1}
    // or cross, or if the perm is not in ascending-cycle canonical form.
    static NcPartition from_blocks(int k, std::vector<std::vector<int>> blocks);
    static NcPartition from_perm(const std::vector<int>& perm);

    static NcPartition identity(int k);    // all singletons, written o
    static NcPartition full_cycle(int k);  // single cycle 0->1->...->k-1->0

    int k() const { return k_; }
    const std::vector<std::vector<int>>& blocks() const { return blocks_; }
    const std::vector<int>& perm() const { return perm_; }

    int num_blocks() const { return static_cast<int>(blocks_.size()); }
    int rank() const { return k_ - num_blocks(); }
    int num_singletons() const;

    bool operator==(const NcPartition& o) const { return perm_ == o.perm_; }
    bool operator!=(const NcPartition& o) const { return !(*this == o); }

    // 1-based, e.g. "(1 3 4)(2)"
    std::string to_string() const;

private:
    int k_ = 0;
    std::vector<std::vector<int>> blocks_;
    std::vector<int> perm_;
};

// Stack-scan membership test over block openings/closings; O(k).
bool is_noncrossing(int k, const std::vector<std::vector<int>>& blocks);

// sigma <= nu iff every block of sigma is contained in a block of nu.
bool leq(const NcPartition& sigma, const NcPartition& nu);

// Kreweras complement sigma* = sigma^{-1} (composed with the full cycle),
// i.e. sigma*(x) = sigma^{-1}(x+1 mod k).  Satisfies |sigma| + |sigma*| = k+1.
NcPartition kreweras(const NcPartition& sigma);

// Number of cycles of nu^{-1} sigma (as permutations of {0..k-1}).
int cycle_count_rel(const NcPartition& nu, const NcPartition& sigma);

// Exact Catalan number; n <= 30.
std::int64_t catalan(int n);

// mobius(nu, sigma) = prod over cycles V of nu^{-1} sigma of
// (-1)^{|V|-1} Catalan(|V|-1).  Symmetric in its arguments.
std::int64_t mobius(const NcPartition& nu, const NcPartition& sigma);

// Sum of mobius(nu, rho) over sigma <= rho <= nu; equals 1 iff sigma == nu,
// else 0.  Throws std::domain_error unless sigma <= nu.
std::int64_t mobius_sum_check(const NcPartition& sigma, const NcPartition& nu);

// n(sigma) + n(sigma*); at least 2 for every sigma when k >= 2.
int combined_singletons(const NcPartition& sigma);

// All of NC(k) exactly once, sorted by rank then lexicographically by perm.
// Throws std::length_error unless 1 <= k <= 10.
std::vector<NcPartition> enumerate_nc(int k);

// Enumeration context for one k: canonical indexing plus memoized order and
// Moebius tables.  Immutable after construction; safe to share across threads.
class NcLattice {
public:
    explicit NcLattice(int k);

    int k() const { return k_; }
    int size() const { return static_cast<int>(elems_.size()); }
    const std::vector<NcPartition>& elements() const { return elems_; }
    const NcPartition& at(int i) const { return elems_[i]; }

    int index_of(const NcPartition& p) const;  // throws if absent
    int identity_index() const { return id_idx_; }
    int full_cycle_index() const { return full_idx_; }

    bool leq(int i, int j) const { return leq_[i][j]; }
    const std::vector<int>& above(int i) const { return above_[i]; }  // weakly
    const std::vector<int>& below(int i) const { return below_[i]; }  // weakly
    std::int64_t mobius(int i, int j) const { return mobius_[i][j]; }
    int cycles_rel(int i, int j) const { return cyc_[i][j]; }
    int kreweras_index(int i) const { return krew_[i]; }

private:
    int k_ = 0;
    std::vector<NcPartition> elems_;
    std::vector<std::vector<bool>> leq_;
    std::vector<std::vector<int>> above_, below_;
    std::vector<std::vector<std::int64_t>> mobius_;
    std::vector<std::vector<int>> cyc_;
    std::vector<int> krew_;
    int id_idx_ = -1, full_idx_ = -1;
};

// One term index of the averaged k-OTOC: a nondecreasing lattice sequence
// o = sigma_1 <= nu_1 <= ... <= sigma_t <= nu_t = full cycle.
struct Multichain {
    int k = 0;
    int t = 0;
    std::vector<NcPartition> seq;  // length 2t: sigma_1, nu_1, ..., sigma_t, nu_t

    void validate() const;  // throws std::invalid_argument on violation
};

// Depth-first, deterministic order (successor lists ascend in canonical
// index).  Caps: k <= 6, t >= 1; violations throw std::length_error.
void for_each_multichain(int k, int t,
                         const std::function<void(const Multichain&)>& fn);

std::vector<Multichain> enumerate_multichains(int k, int t);

// Exact count by dynamic programming over the lattice order (overflow
// checked); cross-validated against the enumerator in tests.
std::int64_t count_multichains(int k, int t);

}  // namespace kotoc
