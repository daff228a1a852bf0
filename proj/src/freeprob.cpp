#include "kotoc/freeprob.hpp"

#include <sstream>
#include <stdexcept>

namespace kotoc {

namespace {

void check_tuple(int k, const std::vector<Observable>& ops) {
    if (static_cast<int>(ops.size()) != k) {
        std::ostringstream os;
        os << "expected " << k << " operators, got " << ops.size();
        throw std::invalid_argument(os.str());
    }
    for (const Observable& o : ops)
        if (o.d != ops.front().d)
            throw std::invalid_argument("operators have mixed dimensions");
}

void check_order(int k) {
    if (k < 1 || k > 5)
        throw std::length_error("supported orders are 1 <= k <= 5");
}

}  // namespace

cxd moment(const NcPartition& nu, const std::vector<Observable>& ops) {
    check_tuple(nu.k(), ops);
    const int d = ops.front().d;
    cxd phi = 1.0;
    for (const auto& block : nu.blocks()) {
        Eigen::MatrixXcd prod = ops[block.front()].m;
        for (std::size_t i = 1; i < block.size(); ++i) prod *= ops[block[i]].m;
        phi *= prod.trace() / static_cast<double>(d);
    }
    return phi;
}

cxd free_cumulant(const NcPartition& sigma,
                  const std::vector<Observable>& ops) {
    check_tuple(sigma.k(), ops);
    cxd kappa = 0.0;
    for (const NcPartition& nu : enumerate_nc(sigma.k()))
        if (leq(nu, sigma))
            kappa += moment(nu, ops) * static_cast<double>(mobius(nu, sigma));
    return kappa;
}

MomentTable moment_table(const NcLattice& lat,
                         const std::vector<Observable>& ops) {
    check_tuple(lat.k(), ops);
    MomentTable t{lat.k(), {}};
    t.values.reserve(lat.size());
    for (const NcPartition& nu : lat.elements())
        t.values.push_back(moment(nu, ops));
    return t;
}

CumulantTable cumulant_table(const NcLattice& lat,
                             const MomentTable& moments) {
    if (moments.k != lat.k() ||
        static_cast<int>(moments.values.size()) != lat.size())
        throw std::invalid_argument("moment table does not match the lattice");
    CumulantTable t{lat.k(), std::vector<cxd>(lat.size(), 0.0)};
    for (int i = 0; i < lat.size(); ++i)
        for (int j : lat.below(i))
            t.values[i] +=
                moments.values[j] * static_cast<double>(lat.mobius(j, i));
    return t;
}

double roundtrip_check(int k, const std::vector<Observable>& ops) {
    check_order(k);
    const NcLattice lat(k);
    const MomentTable phi = moment_table(lat, ops);
    const CumulantTable kappa = cumulant_table(lat, phi);
    cxd total = 0.0;
    for (const cxd& v : kappa.values) total += v;
    return std::abs(phi.values[lat.full_cycle_index()] - total);
}

cxd steady_state_prediction(int k, const std::vector<Observable>& a_ops,
                            const std::vector<Observable>& b_ops) {
    check_order(k);
    check_tuple(k, a_ops);
    check_tuple(k, b_ops);
    if (a_ops.front().d != b_ops.front().d)
        throw std::invalid_argument("operator tuples have mixed dimensions");
    const NcLattice lat(k);
    const CumulantTable kappa = cumulant_table(lat, moment_table(lat, a_ops));
    const MomentTable phi_b = moment_table(lat, b_ops);
    cxd total = 0.0;
    for (int i = 0; i < lat.size(); ++i)
        total += kappa.values[i] * phi_b.values[lat.kreweras_index(i)];
    return total;
}

}  // namespace kotoc
