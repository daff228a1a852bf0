#pragma once
// Influence-matrix evolution over NC(k) x replica space.  A MarkovState
// carries one replica vector per noncrossing partition; the transfer step
// T_{nu,rho} = sum_{rho<=sigma<=nu} M_{nu,sigma} W_{sigma,rho} is applied
// block-wise (Weingarten combination first, then the replicated gate), so
// T is never materialized as a dense matrix.  The analytic unit-eigenvalue
// basis, its eigenoperator-dressed extension with recursive
// biorthogonalization, the steady-state projector, and the MPS tensor
// export live here as well.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kotoc/apply_m.hpp"
#include "kotoc/multichain.hpp"
#include "kotoc/nc_partition.hpp"
#include "kotoc/replica.hpp"

namespace kotoc {

// Process-wide immutable lattice for one order; built on first use.
std::shared_ptr<const NcLattice> shared_lattice(int k);

// Sparse collection of replica vectors indexed by noncrossing partition.
// Missing components are zero.  Covectors (left states) use the same type
// with stored-conjugate entries, as in dress_top.
struct MarkovState {
    int k = 0;
    int d_a = 0;
    std::shared_ptr<const NcLattice> lattice;
    std::map<int, ReplicaVector> components;  // keyed by lattice index

    static MarkovState zero(int k, int d_a);

    void set_component(const NcPartition& p, ReplicaVector v);
    const ReplicaVector* component(const NcPartition& p) const;
};

// sum over shared partitions of overlap(bra component, ket component).
cxd contract(const MarkovState& bra, const MarkovState& ket);

// Covector combination acc += c * term in stored-conjugate form.
void covector_axpy(MarkovState& acc, cxd c, const MarkovState& term);

// One transfer step.  Output component nu collects every input component
// rho <= nu; the partition label never decreases.
MarkovState transfer_apply(const MarkovState& state, const Gate& gate);

// Left action on a covector in stored form:
// contract(transfer_apply_left(bra), x) = contract(bra, transfer_apply(x)).
MarkovState transfer_apply_left(const MarkovState& state, const Gate& gate);

// The same step split into its Weingarten half and its channel half.
// first = kappa-state (W applied), second = phi-state (M applied to first);
// the second entry equals transfer_apply on the input.
std::pair<MarkovState, MarkovState> two_step_evolution(const MarkovState& state,
                                                       const Gate& gate);

// |psi_a)) with component rho = d_c^{|rho|} |a_o) for every rho, and the
// covector ((psi_b| with single component (d_a d_c)^{-1} (b_cycle| at the
// full cycle.
std::pair<MarkovState, MarkovState> boundary_states(
    const std::vector<Observable>& a_ops, const std::vector<Observable>& b_ops,
    int k, int d_c);

// C^(k)(t) = ((psi_b| T^t |psi_a)) for t = 0..t_max; cost linear in t.
// Caps as in kotoc_multichain.
OtocSeries kotoc_transfer(const Gate& gate,
                          const std::vector<Observable>& a_ops,
                          const std::vector<Observable>& b_ops, int k,
                          int t_max);

// A dressing acts on the backward index of each listed replica pair with the
// transposed eigenoperator (transpose == conjugate for the Hermitian pairs
// this machinery accepts); the overlap-pattern test pins that convention.
struct Dressing {
    std::vector<int> slots;    // 0-based replica slots, one per dressing
    Eigen::MatrixXcd right_op;  // channel right eigenoperator a_lambda
    Eigen::MatrixXcd left_op;   // channel left eigenoperator b_lambda
};

struct EigenstatePair {
    NcPartition label;
    std::optional<Dressing> dressing;  // empty for the unit-eigenvalue family
    MarkovState right;
    MarkovState left;
    cxd eigenvalue{1.0, 0.0};
};

// Unit-eigenvalue basis: |phi_sigma)) = d_a^{|sigma|-k} sum_{rho>=sigma}
// d_c^{|rho|} |sigma)_rho and ((kappa_nu| = sum_{rho<=nu} (d_a d_c)^{-|rho|}
// mu(nu,rho) (rho|_rho, biorthogonal pairs ((kappa_nu|phi_sigma)) = delta.
std::vector<EigenstatePair> leading_eigenstates(int k, int d_a, int d_c);

// Projector value sum_sigma ((psi_b|phi_sigma))((kappa_sigma|psi_a)).
// For gates below the mixing classes the projector misses decaying-free
// directions; a note lands in *warning when given, on stderr otherwise.
cxd steady_state(const Gate& gate, const std::vector<Observable>& a_ops,
                 const std::vector<Observable>& b_ops, int k,
                 std::string* warning = nullptr);

// Splits the block of nu holding slots m and n so that the Kreweras
// complement of the block's internal cyclic order is the transposition
// (m,n) plus singletons.  Slots are 0-based; m and n must share a block.
NcPartition nu_tilde(const NcPartition& nu, int m, int n);

// Subleading-eigenvalue family: |phi^m_sigma)) = a_{lambda,m}|phi_sigma)),
// raw lefts ((kappa^m_nu| = ((kappa_nu| b_{lambda,m}.  Refuses degenerate
// or complex lambda.  Raw left/right overlaps follow the nu_tilde split
// pattern; run biorthogonalize to sharpen them to delta_mn delta_nu,sigma.
std::vector<EigenstatePair> dressed_eigenstates(const Gate& gate, int k);

// Recursive subtraction along the lattice order; rewrites each pair's left
// state so that contract(left_i, right_j) = delta_ij across the family.
void biorthogonalize(std::vector<EigenstatePair>& family);

// Experimental eigenvalue-lambda^order states with `order` dressed slots.
// A slot set qualifies only if the slots stay in pairwise distinct cycles
// of every relative permutation above the label; slot sets that merge in
// some coarser block are skipped, which is why the family is not complete.
// Right states only; no left states are produced.
std::vector<EigenstatePair> multi_dressed_eigenstates(const Gate& gate, int k,
                                                      int order);

// Writes the alternating W-dressed / zeta-dressed site tensors (bond
// dimension Catalan(k), physical dimension d_c^{2k}) plus boundary weights
// to a self-describing JSON container.
void export_influence_mps(int k, int d_c, int t, const std::string& path);

// Contracts an exported container against system tensors built from the
// gate and observable tuples; equals kotoc_transfer at the file's t.
cxd recontract_influence_mps(const std::string& path, const Gate& gate,
                             const std::vector<Observable>& a_ops,
                             const std::vector<Observable>& b_ops);

}  // namespace kotoc
