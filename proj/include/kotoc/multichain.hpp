#pragma once
// Thermodynamic-limit k-OTOC as a Weingarten-weighted sum over lattice
// multichains, evaluated with prefix sharing over the chain tree, plus a
// per-chain decay audit.

#include <cstdint>
#include <string>
#include <vector>

#include "kotoc/nc_partition.hpp"
#include "kotoc/replica.hpp"

namespace kotoc {

struct OtocSeries {
    int k = 0;
    std::vector<int> t_values;
    std::vector<cxd> values;
    std::string method;
    std::uint64_t gate_hash = 0;
    std::uint64_t obs_hash = 0;
    double max_imag = 0.0;  // largest |Im| across the series, never dropped
};

struct ChainContribution {
    Multichain chain;
    double weight = 0.0;   // product of the inter-step Weingarten factors
    cxd value{0.0, 0.0};   // boundary-contracted channel product
    double bound = 0.0;    // diagonal-decay envelope for this chain
    bool within_bound = true;
};

// d_c^{-k + |nu^{-1} sigma|} mu(nu, sigma); equals 1 on the diagonal.
double weingarten_factor(const NcPartition& nu, const NcPartition& sigma,
                         int d_c);

// C^(k)(t) for t = 0..t_max; t = 0 holds the anchor value (b_cycle|a_id)/d_a.
// Memory policy: d_a^(2k) <= 6561 and k <= 5; t_max <= 64.
OtocSeries kotoc_multichain(const Gate& gate,
                            const std::vector<Observable>& a_ops,
                            const std::vector<Observable>& b_ops, int k,
                            int t_max);

// Every chain's weight, value, and decay-envelope flag at one t.
// Refuses above one million chains.
std::vector<ChainContribution> chain_audit(const Gate& gate,
                                           const std::vector<Observable>& a_ops,
                                           const std::vector<Observable>& b_ops,
                                           int k, int t);

std::uint64_t observable_tuple_hash(const std::vector<Observable>& a_ops,
                                    const std::vector<Observable>& b_ops);

}  // namespace kotoc
