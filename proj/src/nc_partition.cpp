#include "kotoc/nc_partition.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <stdexcept>

namespace kotoc {

namespace {

// block id per element, -1 padded
std::vector<int> block_ids(int k, const std::vector<std::vector<int>>& blocks) {
    std::vector<int> id(k, -1);
    for (int b = 0; b < static_cast<int>(blocks.size()); ++b)
        for (int x : blocks[b]) {
            if (x < 0 || x >= k || id[x] != -1)
                throw std::invalid_argument("blocks do not partition {0..k-1}");
            id[x] = b;
        }
    for (int x = 0; x < k; ++x)
        if (id[x] == -1) throw std::invalid_argument("blocks do not cover {0..k-1}");
    return id;
}

void canonicalize_blocks(std::vector<std::vector<int>>& blocks) {
    for (auto& b : blocks) std::sort(b.begin(), b.end());
    std::sort(blocks.begin(), blocks.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
}

std::vector<int> perm_from_blocks(int k, const std::vector<std::vector<int>>& blocks) {
    std::vector<int> perm(k, -1);
    for (const auto& b : blocks) {
        for (size_t i = 0; i + 1 < b.size(); ++i) perm[b[i]] = b[i + 1];
        perm[b.back()] = b.front();
    }
    return perm;
}

}  // namespace

bool is_noncrossing(int k, const std::vector<std::vector<int>>& blocks) {
    std::vector<int> id = block_ids(k, blocks);
    std::vector<int> first(blocks.size()), last(blocks.size());
    for (int b = 0; b < static_cast<int>(blocks.size()); ++b) {
        auto [lo, hi] = std::minmax_element(blocks[b].begin(), blocks[b].end());
        first[b] = *lo;
        last[b] = *hi;
    }
    // scan left to right; a block must sit on top of the stack for the whole
    // span between its first and last element
    std::vector<int> stack;
    for (int x = 0; x < k; ++x) {
        int b = id[x];
        if (first[b] == x) stack.push_back(b);
        if (stack.empty() || stack.back() != b) return false;
        if (last[b] == x) stack.pop_back();
    }
    return true;
}

NcPartition NcPartition::from_blocks(int k, std::vector<std::vector<int>> blocks) {
    if (k < 1) throw std::invalid_argument("k must be positive");
    canonicalize_blocks(blocks);
    block_ids(k, blocks);  // partition check
    if (!is_noncrossing(k, blocks))
        throw std::invalid_argument("blocks are crossing");
    NcPartition p;
    p.k_ = k;
    p.perm_ = perm_from_blocks(k, blocks);
    p.blocks_ = std::move(blocks);
    return p;
}

NcPartition NcPartition::from_perm(const std::vector<int>& perm) {
    int k = static_cast<int>(perm.size());
    if (k < 1) throw std::invalid_argument("empty permutation");
    std::vector<bool> seen(k, false);
    std::vector<std::vector<int>> blocks;
    for (int s = 0; s < k; ++s) {
        if (seen[s]) continue;
        std::vector<int> cyc;
        int x = s;
        do {
            if (x < 0 || x >= k || seen[x])
                throw std::invalid_argument("not a permutation of {0..k-1}");
            seen[x] = true;
            cyc.push_back(x);
            x = perm[x];
        } while (x != s);
        blocks.push_back(std::move(cyc));
    }
    NcPartition p = from_blocks(k, std::move(blocks));
    if (p.perm_ != perm)
        throw std::invalid_argument(
            "perm cycles are not in ascending canonical form");
    return p;
}

NcPartition NcPartition::identity(int k) {
    std::vector<std::vector<int>> blocks(k);
    for (int x = 0; x < k; ++x) blocks[x] = {x};
    return from_blocks(k, std::move(blocks));
}

NcPartition NcPartition::full_cycle(int k) {
    std::vector<int> all(k);
    for (int x = 0; x < k; ++x) all[x] = x;
    return from_blocks(k, {all});
}

int NcPartition::num_singletons() const {
    int n = 0;
    for (const auto& b : blocks_) n += (b.size() == 1);
    return n;
}

std::string NcPartition::to_string() const {
    std::ostringstream os;
    for (const auto& b : blocks_) {
        os << '(';
        for (size_t i = 0; i < b.size(); ++i) os << (i ? " " : "") << b[i] + 1;
        os << ')';
    }
    return os.str();
}

bool leq(const NcPartition& sigma, const NcPartition& nu) {
    if (sigma.k() != nu.k())
        throw std::invalid_argument("leq: mismatched k");
    std::vector<int> id = block_ids(nu.k(), nu.blocks());
    for (const auto& b : sigma.blocks()) {
        int target = id[b.front()];
        for (int x : b)
            if (id[x] != target) return false;
    }
    return true;
}

NcPartition kreweras(const NcPartition& sigma) {
    int k = sigma.k();
    std::vector<int> inv(k);
    for (int x = 0; x < k; ++x) inv[sigma.perm()[x]] = x;
    std::vector<int> comp(k);
    for (int x = 0; x < k; ++x) comp[x] = inv[(x + 1) % k];
    // for noncrossing sigma the composite has ascending cycles; from_perm
    // re-validates that
    return NcPartition::from_perm(comp);
}

int cycle_count_rel(const NcPartition& nu, const NcPartition& sigma) {
    if (sigma.k() != nu.k())
        throw std::invalid_argument("cycle_count_rel: mismatched k");
    int k = nu.k();
    std::vector<int> inv(k);
    for (int x = 0; x < k; ++x) inv[nu.perm()[x]] = x;
    std::vector<bool> seen(k, false);
    int cycles = 0;
    for (int s = 0; s < k; ++s) {
        if (seen[s]) continue;
        ++cycles;
        int x = s;
        while (!seen[x]) {
            seen[x] = true;
            x = inv[sigma.perm()[x]];
        }
    }
    return cycles;
}

std::int64_t catalan(int n) {
    if (n < 0 || n > 30) throw std::length_error("catalan: n out of range");
    static const auto table = [] {
        std::array<std::int64_t, 31> c{};
        c[0] = 1;
        for (int m = 0; m < 30; ++m) {
            std::int64_t s = 0;
            for (int i = 0; i <= m; ++i) s += c[i] * c[m - i];
            c[m + 1] = s;
        }
        return c;
    }();
    return table[n];
}

std::int64_t mobius(const NcPartition& nu, const NcPartition& sigma) {
    if (sigma.k() != nu.k())
        throw std::invalid_argument("mobius: mismatched k");
    int k = nu.k();
    std::vector<int> inv(k);
    for (int x = 0; x < k; ++x) inv[nu.perm()[x]] = x;
    std::vector<bool> seen(k, false);
    std::int64_t mu = 1;
    for (int s = 0; s < k; ++s) {
        if (seen[s]) continue;
        int len = 0, x = s;
        while (!seen[x]) {
            seen[x] = true;
            ++len;
            x = inv[sigma.perm()[x]];
        }
        mu *= (len % 2 ? 1 : -1) * catalan(len - 1);
    }
    return mu;
}

std::int64_t mobius_sum_check(const NcPartition& sigma, const NcPartition& nu) {
    if (!leq(sigma, nu))
        throw std::domain_error("mobius_sum_check: sigma is not below nu");
    std::int64_t sum = 0;
    for (const NcPartition& rho : enumerate_nc(nu.k()))
        if (leq(sigma, rho) && leq(rho, nu)) sum += mobius(nu, rho);
    return sum;
}

int combined_singletons(const NcPartition& sigma) {
    return sigma.num_singletons() + kreweras(sigma).num_singletons();
}

namespace {

// All noncrossing block lists on the interval {lo..hi-1}.  The block of the
// smallest element is chosen as an increasing sequence; the gaps between its
// consecutive elements (and the tail) are partitioned independently.
std::vector<std::vector<std::vector<int>>> gen_interval(int lo, int hi) {
    if (lo >= hi) return {{}};
    std::vector<std::vector<std::vector<int>>> out;

    std::vector<int> head{lo};
    std::function<void(int)> choose = [&](int last) {
        // close the head block here: partition the inner gaps and the tail
        std::vector<std::vector<std::vector<std::vector<int>>>> parts;
        for (size_t i = 0; i + 1 < head.size(); ++i)
            parts.push_back(gen_interval(head[i] + 1, head[i + 1]));
        parts.push_back(gen_interval(head.back() + 1, hi));

        std::vector<std::vector<int>> acc{head};
        std::function<void(size_t)> combine = [&](size_t gi) {
            if (gi == parts.size()) {
                out.push_back(acc);
                return;
            }
            for (const auto& sub : parts[gi]) {
                size_t mark = acc.size();
                acc.insert(acc.end(), sub.begin(), sub.end());
                combine(gi + 1);
                acc.resize(mark);
            }
        };
        combine(0);

        for (int nxt = last + 1; nxt < hi; ++nxt) {
            head.push_back(nxt);
            choose(nxt);
            head.pop_back();
        }
    };
    choose(lo);
    return out;
}

}  // namespace

std::vector<NcPartition> enumerate_nc(int k) {
    if (k < 1 || k > 10)
        throw std::length_error("enumerate_nc: k must be in 1..10");
    std::vector<NcPartition> out;
    for (auto& blocks : gen_interval(0, k))
        out.push_back(NcPartition::from_blocks(k, std::move(blocks)));
    std::sort(out.begin(), out.end(), [](const NcPartition& a, const NcPartition& b) {
        if (a.rank() != b.rank()) return a.rank() < b.rank();
        return a.perm() < b.perm();
    });
    return out;
}

NcLattice::NcLattice(int k) : k_(k), elems_(enumerate_nc(k)) {
    int n = size();
    leq_.assign(n, std::vector<bool>(n, false));
    mobius_.assign(n, std::vector<std::int64_t>(n, 0));
    cyc_.assign(n, std::vector<int>(n, 0));
    above_.resize(n);
    below_.resize(n);
    krew_.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            leq_[i][j] = kotoc::leq(elems_[i], elems_[j]);
            mobius_[i][j] = kotoc::mobius(elems_[i], elems_[j]);
            cyc_[i][j] = kotoc::cycle_count_rel(elems_[i], elems_[j]);
            if (leq_[i][j]) above_[i].push_back(j);
            if (leq_[j][i]) below_[i].push_back(j);
        }
        krew_[i] = -1;
    }
    for (int i = 0; i < n; ++i) {
        NcPartition kw = kotoc::kreweras(elems_[i]);
        krew_[i] = index_of(kw);
        if (elems_[i] == NcPartition::identity(k)) id_idx_ = i;
        if (elems_[i] == NcPartition::full_cycle(k)) full_idx_ = i;
    }
}

int NcLattice::index_of(const NcPartition& p) const {
    for (int i = 0; i < size(); ++i)
        if (elems_[i] == p) return i;
    throw std::invalid_argument("NcLattice::index_of: partition not in lattice");
}

void Multichain::validate() const {
    if (static_cast<int>(seq.size()) != 2 * t)
        throw std::invalid_argument("multichain: wrong sequence length");
    for (const auto& p : seq)
        if (p.k() != k) throw std::invalid_argument("multichain: mismatched k");
    if (seq.front() != NcPartition::identity(k))
        throw std::invalid_argument("multichain: must start at the identity");
    if (seq.back() != NcPartition::full_cycle(k))
        throw std::invalid_argument("multichain: must end at the full cycle");
    for (size_t i = 0; i + 1 < seq.size(); ++i)
        if (!leq(seq[i], seq[i + 1]))
            throw std::invalid_argument("multichain: sequence not nondecreasing");
}

void for_each_multichain(int k, int t,
                         const std::function<void(const Multichain&)>& fn) {
    if (k < 1 || k > 6) throw std::length_error("for_each_multichain: k must be in 1..6");
    if (t < 1) throw std::length_error("for_each_multichain: t must be >= 1");
    NcLattice lat(k);
    const int slots = 2 * t;
    std::vector<int> idx(slots, -1);
    Multichain chain;
    chain.k = k;
    chain.t = t;
    chain.seq.resize(slots);

    std::function<void(int)> dfs = [&](int s) {
        if (s == slots) {
            for (int i = 0; i < slots; ++i) chain.seq[i] = lat.at(idx[i]);
            fn(chain);
            return;
        }
        if (s == 0) {
            idx[0] = lat.identity_index();
            dfs(1);
            return;
        }
        if (s == slots - 1) {
            if (lat.leq(idx[s - 1], lat.full_cycle_index())) {
                idx[s] = lat.full_cycle_index();
                dfs(s + 1);
            }
            return;
        }
        for (int j : lat.above(idx[s - 1])) {
            idx[s] = j;
            dfs(s + 1);
        }
    };
    dfs(0);
}

std::vector<Multichain> enumerate_multichains(int k, int t) {
    std::vector<Multichain> out;
    for_each_multichain(k, t, [&](const Multichain& c) { out.push_back(c); });
    return out;
}

std::int64_t count_multichains(int k, int t) {
    if (k < 1 || k > 6) throw std::length_error("count_multichains: k must be in 1..6");
    if (t < 1) throw std::length_error("count_multichains: t must be >= 1");
    NcLattice lat(k);
    int n = lat.size();
    std::vector<std::int64_t> cnt(n, 0);
    cnt[lat.identity_index()] = 1;
    for (int step = 1; step < 2 * t; ++step) {
        std::vector<std::int64_t> nxt(n, 0);
        for (int i = 0; i < n; ++i) {
            if (!cnt[i]) continue;
            for (int j : lat.above(i))
                if (__builtin_add_overflow(nxt[j], cnt[i], &nxt[j]))
                    throw std::overflow_error("count_multichains: overflow");
        }
        cnt.swap(nxt);
    }
    return cnt[lat.full_cycle_index()];
}

}  // namespace kotoc
