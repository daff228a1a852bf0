#pragma once
// Moments that factorize over partition blocks, free cumulants by Moebius
// inversion, and the stationary k-OTOC value they predict.

#include <vector>

#include "kotoc/nc_partition.hpp"
#include "kotoc/replica.hpp"

namespace kotoc {

// Values phi_nu (or kappa_sigma) of one fixed operator tuple, indexed in
// the canonical order of the NcLattice they were built against.
struct MomentTable {
    int k = 0;
    std::vector<cxd> values;
};

struct CumulantTable {
    int k = 0;
    std::vector<cxd> values;
};

// phi_nu = prod over blocks V of Tr(a_{v1} a_{v2} ...)/d, elements ascending.
cxd moment(const NcPartition& nu, const std::vector<Observable>& ops);

// kappa_sigma = sum_{nu <= sigma} phi_nu mu(nu, sigma).
cxd free_cumulant(const NcPartition& sigma, const std::vector<Observable>& ops);

MomentTable moment_table(const NcLattice& lat,
                         const std::vector<Observable>& ops);
CumulantTable cumulant_table(const NcLattice& lat, const MomentTable& moments);

// |phi_cycle - sum of all cumulants|; k <= 5.
double roundtrip_check(int k, const std::vector<Observable>& ops);

// sum_sigma kappa_sigma(a_1..a_k) phi_{sigma*}(b_1..b_k); k <= 5.
cxd steady_state_prediction(int k, const std::vector<Observable>& a_ops,
                            const std::vector<Observable>& b_ops);

}  // namespace kotoc
