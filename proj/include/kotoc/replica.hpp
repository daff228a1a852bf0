#pragma once
// Dense kernel for the 2k-fold replicated space.
//
// Index convention, fixed globally: a replica vector on k forward/backward
// copies of a d-dimensional site stores its component for
// (i_1, i_1', i_2, i_2', ..., i_k, i_k') at linear index
//     sum_j  i_j * d^{2j}  +  i_j' * d^{2j+1}        (j = 0..k-1)
// so i_1 is the fastest index.  Gates act on a site pair (A, C) with row
// index a*d_c + c (C fastest).

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kotoc/nc_partition.hpp"

namespace kotoc {

using cxd = std::complex<double>;

struct Observable {
    int d = 0;
    Eigen::MatrixXcd m;

    // Enforces Hermiticity within 1e-12 (max norm); reports the violation.
    static Observable from_matrix(Eigen::MatrixXcd m);
    static Observable identity(int d);

    bool is_traceless(double tol = 1e-12) const;
};

struct Gate {
    int d_a = 0, d_c = 0;
    Eigen::MatrixXcd u;  // (d_a*d_c) x (d_a*d_c)

    // Enforces unitarity within 1e-10 (max norm); reports the violation.
    static Gate from_matrix(int d_a, int d_c, Eigen::MatrixXcd u);

    Gate adjoint() const;

    // Content hash of (d_a, d_c, matrix bytes); used for cache keys and
    // output provenance.
    std::uint64_t fingerprint() const;
};

struct ReplicaVector {
    int d = 0;  // site dimension d_a
    int k = 0;
    Eigen::VectorXcd data;  // length d^{2k}

    std::int64_t size() const { return data.size(); }
};

ReplicaVector zero_replica(int d, int k);

// Unnormalized permutation state |sigma):
// component 1 iff i_j' = i_{sigma(j)} for all j.
ReplicaVector permutation_vector(const NcPartition& sigma, int d);

// conj(left) . right; on permutation states equals d^{|sigma^{-1} nu|}.
cxd overlap(const ReplicaVector& left, const ReplicaVector& right);

// |a_sigma): components  prod_j (a_j)_{i_j, i'_{sigma^{-1}(j)}}.
ReplicaVector dress_bottom(const std::vector<Observable>& ops,
                           const NcPartition& sigma);

// Top boundary covector (b_full-cycle| with components
// prod_j (b_j)_{i_j', i_{j+1 mod k}}.  The covector is stored conjugated,
// so that overlap(dress_top(b), v) evaluates the bilinear pairing (b_sq| v).
ReplicaVector dress_top(const std::vector<Observable>& ops);

enum class Leg { forward, backward };

// Multiply one tensor leg by a d x d matrix:
// forward slot j acts on i_{j+1}, backward on i'_{j+1} (slot is 0-based).
ReplicaVector apply_slot(const ReplicaVector& v, const Eigen::MatrixXcd& op,
                         int slot, Leg leg);

}  // namespace kotoc
