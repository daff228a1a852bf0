#include "kotoc/markov.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "kotoc/channel.hpp"

namespace kotoc {

namespace {

long ipow(int b, int e) {
    long r = 1;
    while (e-- > 0) r *= b;
    return r;
}

void check_order(int k) {
    if (k < 1 || k > 5)
        throw std::length_error("supported orders are 1 <= k <= 5");
}

void check_space(int d_a, int k) {
    if (ipow(d_a, 2 * k) > 6561)
        throw std::length_error(
            "replica space too large: need d_a^(2k) <= 6561");
}

// Tuples given without a gate; both sides must share one dimension.
int check_pair_tuples(const std::vector<Observable>& a_ops,
                      const std::vector<Observable>& b_ops, int k) {
    if (static_cast<int>(a_ops.size()) != k ||
        static_cast<int>(b_ops.size()) != k)
        throw std::invalid_argument("need k observables on each side");
    int d = a_ops[0].d;
    for (const Observable& o : a_ops)
        if (o.d != d) throw std::invalid_argument("operators have mixed dimensions");
    for (const Observable& o : b_ops)
        if (o.d != d) throw std::invalid_argument("operators have mixed dimensions");
    return d;
}

void check_gate_tuples(const Gate& gate, const std::vector<Observable>& a_ops,
                       const std::vector<Observable>& b_ops, int k) {
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

void check_state_gate(const MarkovState& state, const Gate& gate) {
    if (state.d_a != gate.d_a)
        throw std::invalid_argument("state dimension != gate d_a");
    if (!state.lattice) throw std::invalid_argument("state has no lattice");
}

// Weingarten combination across components.  Sums that telescope to zero
// do so exactly when the component entries share integer scalings, so the
// result drops bit-zero vectors; this keeps later gate applications off
// components that are identically zero.
MarkovState kappa_step(const MarkovState& in, int d_c) {
    const NcLattice& lat = *in.lattice;
    MarkovState out = MarkovState::zero(in.k, in.d_a);
    for (int s = 0; s < lat.size(); ++s) {
        ReplicaVector acc;
        bool touched = false;
        for (int r : lat.below(s)) {
            auto it = in.components.find(r);
            if (it == in.components.end()) continue;
            double w = weingarten_factor(lat.at(r), lat.at(s), d_c);
            if (!touched) {
                acc = zero_replica(in.d_a, in.k);
                touched = true;
            }
            acc.data += w * it->second.data;
        }
        if (touched && !acc.data.isZero(0.0))
            out.components.emplace(s, std::move(acc));
    }
    return out;
}

MarkovState phi_step(const MarkovState& in, const Gate& gate) {
    const NcLattice& lat = *in.lattice;
    MarkovState out = MarkovState::zero(in.k, in.d_a);
    for (int n = 0; n < lat.size(); ++n) {
        ReplicaVector acc;
        bool touched = false;
        for (int s : lat.below(n)) {
            auto it = in.components.find(s);
            if (it == in.components.end()) continue;
            ReplicaVector y = apply_m(lat.at(n), lat.at(s), gate, it->second);
            if (!touched) {
                acc = std::move(y);
                touched = true;
            } else {
                acc.data += y.data;
            }
        }
        if (touched) out.components.emplace(n, std::move(acc));
    }
    return out;
}

}  // namespace

std::shared_ptr<const NcLattice> shared_lattice(int k) {
    if (k < 1 || k > 10)
        throw std::length_error("lattice order must lie in 1..10");
    static std::map<int, std::shared_ptr<const NcLattice>> cache;
    auto it = cache.find(k);
    if (it == cache.end())
        it = cache.emplace(k, std::make_shared<NcLattice>(k)).first;
    return it->second;
}

MarkovState MarkovState::zero(int k, int d_a) {
    MarkovState s;
    s.k = k;
    s.d_a = d_a;
    s.lattice = shared_lattice(k);
    return s;
}

void MarkovState::set_component(const NcPartition& p, ReplicaVector v) {
    if (v.k != k || v.d != d_a)
        throw std::invalid_argument("component does not match state dimensions");
    components[lattice->index_of(p)] = std::move(v);
}

const ReplicaVector* MarkovState::component(const NcPartition& p) const {
    auto it = components.find(lattice->index_of(p));
    return it == components.end() ? nullptr : &it->second;
}

cxd contract(const MarkovState& bra, const MarkovState& ket) {
    if (bra.k != ket.k || bra.d_a != ket.d_a)
        throw std::invalid_argument("state dimensions differ");
    cxd total{0.0, 0.0};
    for (const auto& [idx, comp] : bra.components) {
        auto it = ket.components.find(idx);
        if (it == ket.components.end()) continue;
        total += overlap(comp, it->second);
    }
    return total;
}

void covector_axpy(MarkovState& acc, cxd c, const MarkovState& term) {
    if (acc.k != term.k || acc.d_a != term.d_a)
        throw std::invalid_argument("state dimensions differ");
    // stored entries are conjugated, so the coefficient conjugates too
    cxd cc = std::conj(c);
    for (const auto& [idx, comp] : term.components) {
        auto it = acc.components.find(idx);
        if (it == acc.components.end()) {
            ReplicaVector v = comp;
            v.data *= cc;
            acc.components.emplace(idx, std::move(v));
        } else {
            it->second.data += cc * comp.data;
        }
    }
}

MarkovState transfer_apply(const MarkovState& state, const Gate& gate) {
    check_state_gate(state, gate);
    return phi_step(kappa_step(state, gate.d_c), gate);
}

MarkovState transfer_apply_left(const MarkovState& state, const Gate& gate) {
    check_state_gate(state, gate);
    const NcLattice& lat = *state.lattice;
    // z_sigma = sum_{nu >= sigma} adjoint(M_{nu,sigma}) applied to the
    // stored components, then the Weingarten combination downward.
    std::map<int, ReplicaVector> z;
    for (int s = 0; s < lat.size(); ++s) {
        ReplicaVector acc;
        bool touched = false;
        for (int n : lat.above(s)) {
            auto it = state.components.find(n);
            if (it == state.components.end()) continue;
            ReplicaVector y = apply_m_adjoint(lat.at(n), lat.at(s), gate, it->second);
            if (!touched) {
                acc = std::move(y);
                touched = true;
            } else {
                acc.data += y.data;
            }
        }
        if (touched && !acc.data.isZero(0.0)) z.emplace(s, std::move(acc));
    }
    MarkovState out = MarkovState::zero(state.k, state.d_a);
    for (int r = 0; r < lat.size(); ++r) {
        ReplicaVector acc;
        bool touched = false;
        for (int s : lat.above(r)) {
            auto it = z.find(s);
            if (it == z.end()) continue;
            double w = weingarten_factor(lat.at(r), lat.at(s), gate.d_c);
            if (!touched) {
                acc = zero_replica(state.d_a, state.k);
                touched = true;
            }
            acc.data += w * it->second.data;
        }
        if (touched && !acc.data.isZero(0.0))
            out.components.emplace(r, std::move(acc));
    }
    return out;
}

std::pair<MarkovState, MarkovState> two_step_evolution(const MarkovState& state,
                                                       const Gate& gate) {
    check_state_gate(state, gate);
    MarkovState kappa = kappa_step(state, gate.d_c);
    MarkovState phi = phi_step(kappa, gate);
    return {std::move(kappa), std::move(phi)};
}

std::pair<MarkovState, MarkovState> boundary_states(
    const std::vector<Observable>& a_ops, const std::vector<Observable>& b_ops,
    int k, int d_c) {
    check_order(k);
    int d_a = check_pair_tuples(a_ops, b_ops, k);
    if (d_c < 1) throw std::invalid_argument("d_c must be positive");
    check_space(d_a, k);

    MarkovState psi_a = MarkovState::zero(k, d_a);
    const NcLattice& lat = *psi_a.lattice;
    ReplicaVector bottom = dress_bottom(a_ops, NcPartition::identity(k));
    for (int r = 0; r < lat.size(); ++r) {
        ReplicaVector c = bottom;
        c.data *= static_cast<double>(ipow(d_c, lat.at(r).num_blocks()));
        psi_a.components.emplace(r, std::move(c));
    }

    MarkovState psi_b = MarkovState::zero(k, d_a);
    ReplicaVector top = dress_top(b_ops);
    top.data *= 1.0 / (static_cast<double>(d_a) * static_cast<double>(d_c));
    psi_b.components.emplace(lat.full_cycle_index(), std::move(top));
    return {std::move(psi_a), std::move(psi_b)};
}

OtocSeries kotoc_transfer(const Gate& gate,
                          const std::vector<Observable>& a_ops,
                          const std::vector<Observable>& b_ops, int k,
                          int t_max) {
    check_order(k);
    check_space(gate.d_a, k);
    check_gate_tuples(gate, a_ops, b_ops, k);
    if (t_max < 0 || t_max > 64)
        throw std::length_error("t_max must lie in 0..64");

    auto [psi_a, psi_b] = boundary_states(a_ops, b_ops, k, gate.d_c);
    OtocSeries out;
    out.k = k;
    out.method = "transfer";
    out.gate_hash = gate.fingerprint();
    out.obs_hash = observable_tuple_hash(a_ops, b_ops);

    MarkovState state = std::move(psi_a);
    for (int t = 0; t <= t_max; ++t) {
        if (t > 0) state = transfer_apply(state, gate);
        cxd v = contract(psi_b, state);
        out.t_values.push_back(t);
        out.values.push_back(v);
        out.max_imag = std::max(out.max_imag, std::abs(v.imag()));
    }
    return out;
}

std::vector<EigenstatePair> leading_eigenstates(int k, int d_a, int d_c) {
    check_order(k);
    check_space(d_a, k);
    if (d_c < 1) throw std::invalid_argument("d_c must be positive");
    auto lat_sp = shared_lattice(k);
    const NcLattice& lat = *lat_sp;

    std::vector<EigenstatePair> out;
    out.reserve(lat.size());
    for (int i = 0; i < lat.size(); ++i) {
        const NcPartition& sig = lat.at(i);
        EigenstatePair p;
        p.label = sig;
        p.eigenvalue = cxd{1.0, 0.0};

        p.right = MarkovState::zero(k, d_a);
        ReplicaVector base = permutation_vector(sig, d_a);
        double sig_scale =
            std::pow(static_cast<double>(d_a), sig.num_blocks() - k);
        for (int r : lat.above(i)) {
            ReplicaVector c = base;
            c.data *= sig_scale *
                      static_cast<double>(ipow(d_c, lat.at(r).num_blocks()));
            p.right.components.emplace(r, std::move(c));
        }

        p.left = MarkovState::zero(k, d_a);
        for (int r : lat.below(i)) {
            ReplicaVector c = permutation_vector(lat.at(r), d_a);
            c.data *= static_cast<double>(lat.mobius(r, i)) *
                      std::pow(static_cast<double>(d_a) * d_c,
                               -lat.at(r).num_blocks());
            p.left.components.emplace(r, std::move(c));
        }
        out.push_back(std::move(p));
    }
    return out;
}

cxd steady_state(const Gate& gate, const std::vector<Observable>& a_ops,
                 const std::vector<Observable>& b_ops, int k,
                 std::string* warning) {
    check_order(k);
    check_space(gate.d_a, k);
    check_gate_tuples(gate, a_ops, b_ops, k);

    ChannelDiagnostics diag = diagnose(gate);
    bool mixing = diag.ergodicity_class == ErgodicityClass::ergodic_mixing ||
                  diag.ergodicity_class == ErgodicityClass::maximally_ergodic;
    if (!mixing) {
        std::string msg =
            std::string("gate class ") + to_string(diag.ergodicity_class) +
            ": the unit-eigenvalue projector is incomplete, the value covers"
            " the partition modes only";
        if (warning)
            *warning = msg;
        else
            std::cerr << "steady_state: " << msg << "\n";
    }

    auto [psi_a, psi_b] = boundary_states(a_ops, b_ops, k, gate.d_c);
    cxd total{0.0, 0.0};
    for (const EigenstatePair& p : leading_eigenstates(k, gate.d_a, gate.d_c))
        total += contract(psi_b, p.right) * contract(p.left, psi_a);
    return total;
}

NcPartition nu_tilde(const NcPartition& nu, int m, int n) {
    int k = nu.k();
    if (m < 0 || m >= k || n < 0 || n >= k)
        throw std::invalid_argument("slot out of range");
    if (m == n) throw std::invalid_argument("slots must differ");
    const auto& blocks = nu.blocks();
    int bm = -1, bn = -1;
    for (int b = 0; b < static_cast<int>(blocks.size()); ++b)
        for (int x : blocks[b]) {
            if (x == m) bm = b;
            if (x == n) bn = b;
        }
    if (bm != bn) throw std::domain_error("slots are not in a common block");

    const std::vector<int>& blk = blocks[bm];
    int len = static_cast<int>(blk.size());
    int pm = static_cast<int>(std::find(blk.begin(), blk.end(), m) - blk.begin());
    int pn = static_cast<int>(std::find(blk.begin(), blk.end(), n) - blk.begin());

    // Within the block's cyclic order, the split is the Kreweras preimage of
    // the transposition of the two slots: sigma(x) = tau(x) + 1 mod len.
    std::vector<int> perm(len);
    for (int x = 0; x < len; ++x) {
        int t = x == pm ? pn : x == pn ? pm : x;
        perm[x] = (t + 1) % len;
    }

    std::vector<std::vector<int>> nb;
    for (int b = 0; b < static_cast<int>(blocks.size()); ++b)
        if (b != bm) nb.push_back(blocks[b]);
    std::vector<char> seen(len, 0);
    for (int x = 0; x < len; ++x) {
        if (seen[x]) continue;
        std::vector<int> cyc;
        int c = x;
        while (!seen[c]) {
            seen[c] = 1;
            cyc.push_back(blk[c]);
            c = perm[c];
        }
        std::sort(cyc.begin(), cyc.end());
        nb.push_back(std::move(cyc));
    }
    return NcPartition::from_blocks(k, std::move(nb));
}

namespace {

EigenoperatorPair real_dressing_pair(const Gate& gate) {
    ChannelDiagnostics diag = diagnose(gate);
    EigenoperatorPair eig = eigenoperators(diag, build_channel(gate));
    if (std::abs(eig.lambda.imag()) >
        1e-10 * std::max(1.0, std::abs(eig.lambda)))
        throw std::domain_error("dressing requires a real subleading eigenvalue");
    return eig;
}

// Cycle membership for the relative permutation nu^{-1} sigma.
std::vector<int> relative_cycle_ids(const NcPartition& nu,
                                    const NcPartition& sigma) {
    const auto& fn = nu.perm();
    const auto& fs = sigma.perm();
    const int k = static_cast<int>(fn.size());
    std::vector<int> inv(k), next(k), id(k, -1);
    for (int i = 0; i < k; ++i) inv[fn[i]] = i;
    for (int i = 0; i < k; ++i) next[i] = inv[fs[i]];
    int c = 0;
    for (int i = 0; i < k; ++i) {
        if (id[i] >= 0) continue;
        for (int j = i; id[j] < 0; j = next[j]) id[j] = c;
        ++c;
    }
    return id;
}

}  // namespace

// Slot m dresses the backward index of replica pair m with the transposed
// operator; the raw-overlap pattern test pins this choice against the block
// splitting rule.  The pair is Hermitian whenever the machinery accepts the
// gate, so transpose and conjugate coincide.
std::vector<EigenstatePair> dressed_eigenstates(const Gate& gate, int k) {
    check_order(k);
    check_space(gate.d_a, k);
    EigenoperatorPair eig = real_dressing_pair(gate);
    Eigen::MatrixXcd right_op = eig.a.transpose();
    Eigen::MatrixXcd left_op = eig.b.transpose();

    std::vector<EigenstatePair> out;
    for (const EigenstatePair& p :
         leading_eigenstates(k, gate.d_a, gate.d_c)) {
        for (int m = 0; m < k; ++m) {
            EigenstatePair q;
            q.label = p.label;
            q.eigenvalue = eig.lambda;
            q.dressing = Dressing{{m}, eig.a, eig.b};
            q.right = MarkovState::zero(k, gate.d_a);
            for (const auto& [idx, comp] : p.right.components)
                q.right.components.emplace(
                    idx, apply_slot(comp, right_op, m, Leg::backward));
            q.left = MarkovState::zero(k, gate.d_a);
            for (const auto& [idx, comp] : p.left.components)
                q.left.components.emplace(
                    idx, apply_slot(comp, left_op, m, Leg::backward));
            out.push_back(std::move(q));
        }
    }
    return out;
}

void biorthogonalize(std::vector<EigenstatePair>& family) {
    // Finer labels first: every spurious coupling points from a partition to
    // a strictly finer one, so processing by ascending rank finalizes each
    // left state before anything depends on it.
    std::vector<int> order(family.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return family[a].label.rank() < family[b].label.rank();
    });

    std::vector<int> done;
    for (int idx : order) {
        EigenstatePair& p = family[idx];
        cxd self = contract(p.left, p.right);
        if (std::abs(self - cxd{1.0, 0.0}) > 1e-6)
            throw std::runtime_error(
                "family self-overlap is not unit; cannot biorthogonalize");
        for (int j : done) {
            cxd c = contract(p.left, family[j].right);
            // couplings are 0 or 1 up to roundoff; drop pure-noise terms
            if (std::abs(c) < 1e-13) continue;
            covector_axpy(p.left, -c, family[j].left);
        }
        done.push_back(idx);
    }
}

std::vector<EigenstatePair> multi_dressed_eigenstates(const Gate& gate, int k,
                                                      int order) {
    check_order(k);
    check_space(gate.d_a, k);
    if (order < 2 || order > k)
        throw std::invalid_argument("dressing order must lie in 2..k");
    EigenoperatorPair eig = real_dressing_pair(gate);

    auto lat_sp = shared_lattice(k);
    const NcLattice& lat = *lat_sp;

    std::vector<EigenstatePair> out;
    for (const EigenstatePair& p :
         leading_eigenstates(k, gate.d_a, gate.d_c)) {
        const int si = lat.index_of(p.label);

        for (unsigned mask = 0; mask < (1u << k); ++mask) {
            if (std::popcount(mask) != order) continue;
            std::vector<int> slots;
            for (int m = 0; m < k; ++m)
                if (mask >> m & 1u) slots.push_back(m);

            // Two insertions landing in one cycle of nu^{-1} sigma for any
            // nu above the label merge into a single trace loop there, and
            // that output block stops scaling by lambda^order.  Such slot
            // sets give Jordan partners, not eigenstates, so skip them.
            bool eigen = true;
            for (int ni : lat.above(si)) {
                auto cyc = relative_cycle_ids(lat.at(ni), p.label);
                for (std::size_t i = 0; i + 1 < slots.size() && eigen; ++i)
                    for (std::size_t j = i + 1; j < slots.size(); ++j)
                        if (cyc[slots[i]] == cyc[slots[j]]) {
                            eigen = false;
                            break;
                        }
                if (!eigen) break;
            }
            if (!eigen) continue;

            EigenstatePair q;
            q.label = p.label;
            q.eigenvalue = std::pow(eig.lambda, order);
            q.dressing = Dressing{slots, eig.a, eig.b};
            q.right = MarkovState::zero(k, gate.d_a);
            Eigen::MatrixXcd right_op = eig.a.transpose();
            for (const auto& [idx, comp] : p.right.components) {
                ReplicaVector v = comp;
                for (int m : slots)
                    v = apply_slot(v, right_op, m, Leg::backward);
                q.right.components.emplace(idx, std::move(v));
            }
            q.left = MarkovState::zero(k, gate.d_a);
            out.push_back(std::move(q));
        }
    }
    return out;
}

void export_influence_mps(int k, int d_c, int t, const std::string& path) {
    if (k < 1 || k > 4)
        throw std::length_error("supported export orders are 1 <= k <= 4");
    if (d_c < 2) throw std::invalid_argument("d_c must be at least 2");
    if (t < 1 || t > 64) throw std::length_error("t must lie in 1..64");
    auto lat_sp = shared_lattice(k);
    const NcLattice& lat = *lat_sp;
    int bond = lat.size();
    long phys = ipow(d_c, 2 * k);
    if (static_cast<double>(bond) * bond * phys > 2.0e6)
        throw std::length_error(
            "export too large: bond^2 * d_c^(2k) must stay under 2e6");

    std::vector<Eigen::VectorXd> patterns(bond);
    for (int i = 0; i < bond; ++i)
        patterns[i] = permutation_vector(lat.at(i), d_c).data.real();

    double dck = std::pow(static_cast<double>(d_c), -k);
    std::vector<std::vector<std::vector<double>>> ain(
        bond, std::vector<std::vector<double>>(bond, std::vector<double>(phys, 0.0)));
    std::vector<std::vector<std::vector<double>>> bout = ain;
    for (int r = 0; r < bond; ++r)
        for (int s = 0; s < bond; ++s) {
            if (!lat.leq(r, s)) continue;
            double w = dck * weingarten_factor(lat.at(r), lat.at(s), d_c);
            for (long c = 0; c < phys; ++c) ain[r][s][c] = w * patterns[s][c];
            for (long c = 0; c < phys; ++c) bout[r][s][c] = patterns[s][c];
        }

    std::vector<double> beta(bond), tau(bond, 0.0);
    for (int r = 0; r < bond; ++r)
        beta[r] = static_cast<double>(ipow(d_c, lat.at(r).num_blocks()));
    tau[lat.full_cycle_index()] = 1.0 / d_c;

    nlohmann::json j;
    j["format"] = "kotoc-influence-mps";
    j["version"] = 1;
    j["k"] = k;
    j["d_c"] = d_c;
    j["t"] = t;
    j["bond_dimension"] = bond;
    j["physical_dimension"] = phys;
    std::vector<std::vector<std::vector<int>>> parts;
    std::vector<std::string> labels;
    for (int i = 0; i < bond; ++i) {
        parts.push_back(lat.at(i).blocks());
        labels.push_back(lat.at(i).to_string());
    }
    j["partitions"] = parts;
    j["labels"] = labels;
    j["ain"] = ain;
    j["bout"] = bout;
    j["beta"] = beta;
    j["tau"] = tau;
    j["system_prefactor"] = "1/d_a";
    j["contraction"] =
        "value(t) = (1/d_a) * beta . [ain -> gate replicas -> bout]^t . tau,"
        " with (a|-dressed and (b|-dressed system legs supplied externally";

    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump() << "\n";
    if (!f.good()) throw std::runtime_error("write failed: " + path);
}

namespace {

void apply_leg(Eigen::VectorXcd& v, const Eigen::MatrixXcd& m, int leg, int s) {
    long stride = 1;
    for (int i = 0; i < leg; ++i) stride *= s;
    long block = stride * s;
    Eigen::VectorXcd buf(s);
    for (long base = 0; base < v.size(); base += block)
        for (long off = 0; off < stride; ++off) {
            long p = base + off;
            for (int i = 0; i < s; ++i) buf[i] = v[p + i * stride];
            for (int i = 0; i < s; ++i) {
                cxd acc{0.0, 0.0};
                for (int x = 0; x < s; ++x) acc += m(i, x) * buf[x];
                v[p + i * stride] = acc;
            }
        }
}

bool any_nonzero(const std::vector<double>& v) {
    for (double x : v)
        if (x != 0.0) return true;
    return false;
}

}  // namespace

cxd recontract_influence_mps(const std::string& path, const Gate& gate,
                             const std::vector<Observable>& a_ops,
                             const std::vector<Observable>& b_ops) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("malformed influence file: " +
                                 std::string(e.what()));
    }
    if (j.value("format", std::string{}) != "kotoc-influence-mps")
        throw std::runtime_error("not an influence-mps file");
    if (j.value("system_prefactor", std::string{}) != "1/d_a")
        throw std::runtime_error("unsupported system prefactor");

    int k = j.at("k").get<int>();
    int d_c = j.at("d_c").get<int>();
    int t = j.at("t").get<int>();
    if (d_c != gate.d_c) throw std::invalid_argument("file d_c != gate d_c");
    check_order(k);
    check_space(gate.d_a, k);
    check_gate_tuples(gate, a_ops, b_ops, k);

    int bond = j.at("bond_dimension").get<int>();
    long phys = j.at("physical_dimension").get<long>();
    if (bond != catalan(k) || phys != ipow(d_c, 2 * k))
        throw std::runtime_error("inconsistent dimensions in influence file");
    auto ain = j.at("ain").get<std::vector<std::vector<std::vector<double>>>>();
    auto bout = j.at("bout").get<std::vector<std::vector<std::vector<double>>>>();
    auto beta = j.at("beta").get<std::vector<double>>();
    auto tau = j.at("tau").get<std::vector<double>>();
    if (static_cast<int>(ain.size()) != bond ||
        static_cast<int>(bout.size()) != bond ||
        static_cast<int>(beta.size()) != bond ||
        static_cast<int>(tau.size()) != bond)
        throw std::runtime_error("inconsistent dimensions in influence file");

    int d_a = gate.d_a;
    int s = d_a * d_c;
    long big_dim = ipow(s, 2 * k);
    long a_dim = ipow(d_a, 2 * k);

    // leg-wise split of the combined (A,C) replica index
    std::vector<int> ia_of(big_dim), ic_of(big_dim);
    for (long big_i = 0; big_i < big_dim; ++big_i) {
        long rem = big_i, ia = 0, ic = 0, pa = 1, pc = 1;
        for (int leg = 0; leg < 2 * k; ++leg) {
            int q = static_cast<int>(rem % s);
            rem /= s;
            ia += (q / d_c) * pa;
            ic += (q % d_c) * pc;
            pa *= d_a;
            pc *= d_c;
        }
        ia_of[big_i] = static_cast<int>(ia);
        ic_of[big_i] = static_cast<int>(ic);
    }

    Eigen::MatrixXcd u = gate.u;
    Eigen::MatrixXcd uc = gate.u.conjugate();
    ReplicaVector bottom = dress_bottom(a_ops, NcPartition::identity(k));

    std::vector<Eigen::VectorXcd> cur(bond);
    for (int r = 0; r < bond; ++r) cur[r] = beta[r] * bottom.data;

    Eigen::VectorXcd lifted(big_dim);
    for (int step = 0; step < t; ++step) {
        std::vector<Eigen::VectorXcd> nxt(bond,
                                          Eigen::VectorXcd::Zero(a_dim));
        for (int r = 0; r < bond; ++r) {
            if (cur[r].isZero(0.0)) continue;
            for (int sg = 0; sg < bond; ++sg) {
                const std::vector<double>& av = ain[r][sg];
                if (!any_nonzero(av)) continue;
                for (long big_i = 0; big_i < big_dim; ++big_i)
                    lifted[big_i] = cur[r][ia_of[big_i]] * av[ic_of[big_i]];
                for (int leg = 0; leg < 2 * k; ++leg)
                    apply_leg(lifted, leg % 2 == 0 ? u : uc, leg, s);
                for (int n = 0; n < bond; ++n) {
                    const std::vector<double>& bv = bout[sg][n];
                    if (!any_nonzero(bv)) continue;
                    Eigen::VectorXcd& dst = nxt[n];
                    for (long big_i = 0; big_i < big_dim; ++big_i) {
                        double w = bv[ic_of[big_i]];
                        if (w != 0.0) dst[ia_of[big_i]] += w * lifted[big_i];
                    }
                }
            }
        }
        cur = std::move(nxt);
    }

    ReplicaVector top = dress_top(b_ops);
    cxd val{0.0, 0.0};
    for (int n = 0; n < bond; ++n)
        if (tau[n] != 0.0) val += tau[n] * top.data.dot(cur[n]);
    return val / static_cast<double>(d_a);
}

}  // namespace kotoc
