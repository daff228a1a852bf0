#pragma once
// The averaged single-site channel M(a) = (1/d_c) Tr_C[U (a (x) 1) U^dag],
// its spectral diagnostics and ergodicity classification, operator
// entanglement, and the subleading eigenoperator pair.

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kotoc/replica.hpp"

namespace kotoc {

struct ChannelMatrix {
    int d_a = 0;
    Eigen::MatrixXcd m;  // d_a^2 x d_a^2 acting on vectorized operators
};

enum class ErgodicityClass {
    non_interacting,
    non_ergodic,
    ergodic_non_mixing,
    ergodic_mixing,
    maximally_ergodic,
};

const char* to_string(ErgodicityClass c);

struct ChannelDiagnostics {
    std::vector<cxd> eigenvalues;  // modulus-descending
    cxd lambda_sub{0.0, 0.0};      // largest nontrivial eigenvalue
    double restricted_norm = 0.0;  // operator norm on the traceless subspace
    double op_entropy = 0.0;
    std::optional<double> mixing_bound;
    ErgodicityClass ergodicity_class = ErgodicityClass::ergodic_mixing;
    bool dual_unitary = false;
};

ChannelMatrix build_channel(const Gate& gate);

ChannelDiagnostics diagnose(const Gate& gate, double tol = 1e-8);

double operator_entropy(const Gate& gate);

// sqrt(d_a^2 (1 - E) - 1) when d_a <= d_c and the radicand is
// nonnegative; guarantees |lambda_sub| below the returned value.
std::optional<double> mixing_bound(const Gate& gate);

// Tests unitarity of the space-direction reshuffle; needs d_a = d_c.
bool is_dual_unitary(const Gate& gate, double tol = 1e-10);

Eigen::MatrixXcd choi_matrix(const ChannelMatrix& channel);

struct EigenoperatorPair {
    cxd lambda;
    Eigen::MatrixXcd a;  // right eigenoperator, traceless
    Eigen::MatrixXcd b;  // left eigenoperator, Tr(b a)/d_a = 1
};

// Eigenoperator pair for the subleading eigenvalue.  Refuses when the
// subleading modulus is degenerate unless `index` (position in
// diag.eigenvalues) forces a pick.  For real nondegenerate eigenvalues
// the pair is returned Hermitian.
EigenoperatorPair eigenoperators(const ChannelDiagnostics& diag,
                                 const ChannelMatrix& channel,
                                 std::optional<int> index = std::nullopt,
                                 double tol = 1e-8);

}  // namespace kotoc
