#include "kotoc/multichain.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "kotoc/apply_m.hpp"
#include "kotoc/channel.hpp"

namespace kotoc {

namespace {

long ipow(int b, int e) {
    long r = 1;
    while (e-- > 0) r *= b;
    return r;
}

void check_problem(const Gate& gate, const std::vector<Observable>& a_ops,
                   const std::vector<Observable>& b_ops, int k) {
    if (k < 1 || k > 5)
        throw std::length_error("supported orders are 1 <= k <= 5");
    if (ipow(gate.d_a, 2 * k) > 6561)
        throw std::length_error(
            "replica space too large: need d_a^(2k) <= 6561");
    if (static_cast<int>(a_ops.size()) != k ||
        static_cast<int>(b_ops.size()) != k)
        throw std::invalid_argument("need k observables on each side");
    for (const Observable& o : a_ops)
        if (o.d != gate.d_a)
            throw std::invalid_argument("observable dimension != gate d_a");
    for (const Observable& o : b_ops)
        if (o.d != gate.d_a)
            throw std::invalid_argument("observable dimension != gate d_a");
}

std::uint64_t fold_bytes(std::uint64_t h, const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ c[i]) * 1099511628211ull;
    return h;
}

// One vector per tree node; siblings reuse the parent's vector, so the
// whole walk keeps at most t intermediate states alive.
struct TreeEval {
    const NcLattice& lat;
    const Gate& gate;
    const ReplicaVector& top;
    const std::vector<std::vector<double>>& wtab;
    int t;
    cxd total{0.0, 0.0};

    void walk(int step, int sigma, const ReplicaVector& v, double weight) {
        if (step == t) {
            const auto out =
                apply_m(lat.at(lat.full_cycle_index()), lat.at(sigma), gate, v);
            total += weight * overlap(top, out);
            return;
        }
        for (int nu : lat.above(sigma)) {
            const auto out = apply_m(lat.at(nu), lat.at(sigma), gate, v);
            for (int next : lat.above(nu))
                walk(step + 1, next, out, weight * wtab[nu][next]);
        }
    }
};

std::vector<std::vector<double>> weingarten_table(const NcLattice& lat,
                                                  int d_c) {
    std::vector<std::vector<double>> w(lat.size(),
                                       std::vector<double>(lat.size(), 0.0));
    for (int i = 0; i < lat.size(); ++i)
        for (int j = 0; j < lat.size(); ++j)
            w[i][j] = std::pow(double(d_c), lat.cycles_rel(i, j) - lat.k()) *
                      static_cast<double>(lat.mobius(i, j));
    return w;
}

}  // namespace

double weingarten_factor(const NcPartition& nu, const NcPartition& sigma,
                         int d_c) {
    if (nu.k() != sigma.k())
        throw std::invalid_argument("partitions have different orders");
    if (d_c < 1) throw std::invalid_argument("d_c must be positive");
    return std::pow(double(d_c), cycle_count_rel(nu, sigma) - nu.k()) *
           static_cast<double>(mobius(nu, sigma));
}

OtocSeries kotoc_multichain(const Gate& gate,
                            const std::vector<Observable>& a_ops,
                            const std::vector<Observable>& b_ops, int k,
                            int t_max) {
    check_problem(gate, a_ops, b_ops, k);
    if (t_max < 0 || t_max > 64)
        throw std::length_error("t_max must lie in 0..64");

    const NcLattice lat(k);
    const auto wtab = weingarten_table(lat, gate.d_c);
    const auto bottom = dress_bottom(a_ops, NcPartition::identity(k));
    const auto top = dress_top(b_ops);
    const double prefactor =
        std::pow(double(gate.d_c), k - 1) / double(gate.d_a);

    OtocSeries s;
    s.k = k;
    s.method = "multichain";
    s.gate_hash = gate.fingerprint();
    s.obs_hash = observable_tuple_hash(a_ops, b_ops);
    s.t_values.push_back(0);
    s.values.push_back(overlap(top, bottom) / double(gate.d_a));
    for (int t = 1; t <= t_max; ++t) {
        TreeEval ev{lat, gate, top, wtab, t};
        ev.walk(1, lat.identity_index(), bottom, 1.0);
        s.t_values.push_back(t);
        s.values.push_back(prefactor * ev.total);
    }
    for (const cxd& v : s.values)
        s.max_imag = std::max(s.max_imag, std::abs(v.imag()));
    return s;
}

std::vector<ChainContribution> chain_audit(
    const Gate& gate, const std::vector<Observable>& a_ops,
    const std::vector<Observable>& b_ops, int k, int t) {
    check_problem(gate, a_ops, b_ops, k);
    const std::int64_t count = count_multichains(k, t);
    if (count > 1000000) {
        std::ostringstream os;
        os << "refusing to materialize " << count << " chains (cap 1000000)";
        throw std::length_error(os.str());
    }

    const auto diag = diagnose(gate);
    const bool real_positive = std::abs(diag.lambda_sub.imag()) < 1e-12 &&
                               diag.lambda_sub.real() > 0.0;
    const double r =
        real_positive ? diag.lambda_sub.real() : diag.restricted_norm;
    double norms = 1.0;
    for (const Observable& o : a_ops) norms *= o.m.norm();
    for (const Observable& o : b_ops) norms *= o.m.norm();

    const auto bottom = dress_bottom(a_ops, NcPartition::identity(k));
    const auto top = dress_top(b_ops);

    std::vector<ChainContribution> out;
    out.reserve(static_cast<std::size_t>(count));
    for_each_multichain(k, t, [&](const Multichain& chain) {
        ChainContribution c;
        c.chain = chain;
        c.weight = 1.0;
        for (int i = 1; i < t; ++i)
            c.weight *= weingarten_factor(chain.seq[2 * i - 1],
                                          chain.seq[2 * i], gate.d_c);
        ReplicaVector v = bottom;
        int min_comb = 2 * k;
        for (int i = 0; i < t; ++i) {
            v = apply_m(chain.seq[2 * i + 1], chain.seq[2 * i], gate, v);
            min_comb = std::min(min_comb,
                                combined_singletons(chain.seq[2 * i]));
            min_comb = std::min(min_comb,
                                combined_singletons(chain.seq[2 * i + 1]));
        }
        c.value = overlap(top, v);
        const int exponent =
            k == 1 ? t : std::max(0, min_comb * (t - k + 1));
        c.bound = std::pow(r, exponent) * norms;
        c.within_bound = std::abs(c.value) <= c.bound * (1.0 + 1e-9) + 1e-12;
        out.push_back(std::move(c));
    });
    return out;
}

std::uint64_t observable_tuple_hash(const std::vector<Observable>& a_ops,
                                    const std::vector<Observable>& b_ops) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto* tuple : {&a_ops, &b_ops}) {
        const std::uint64_t n = tuple->size();
        h = fold_bytes(h, &n, sizeof n);
        for (const Observable& o : *tuple) {
            h = fold_bytes(h, &o.d, sizeof o.d);
            h = fold_bytes(h, o.m.data(),
                           sizeof(cxd) * static_cast<std::size_t>(o.m.size()));
        }
    }
    return h;
}

}  // namespace kotoc
