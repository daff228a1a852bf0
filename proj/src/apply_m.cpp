#include "kotoc/apply_m.hpp"

#include <algorithm>
#include <list>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kotoc {

namespace {

std::int64_t ipow(std::int64_t base, int exp) {
    std::int64_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

// ---------------------------------------------------------------------
// Contraction engine.
//
// The running tensor carries the 2k site legs (forward leg of replica j
// has id 2j, backward 2j+1, each dim d_a), plus one open bath leg per
// gate index still in flight, plus an optional trailing batch leg.
// Bath variables: c_m feeds the forward gate of replica m and the
// backward gate of replica sigma^{-1}(m); e_m is produced by the forward
// gate of replica m and the backward gate of replica nu^{-1}(m).  A leg
// opens at its first use and is summed out after its second.

constexpr int kBatchLeg = -1;

int cvar(int m) { return 100 + m; }
int evar(int m) { return 200 + m; }

struct LegTensor {
    std::vector<cxd> data;
    std::vector<int> dims;
    std::vector<int> ids;

    std::int64_t size() const {
        std::int64_t n = 1;
        for (int d : dims) n *= d;
        return n;
    }
    int pos_of(int id) const {
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ids[i] == id) return static_cast<int>(i);
        return -1;
    }
};

// Reorders legs so that `front` comes first (in the given order); the
// remaining legs keep their relative order.
LegTensor bring_to_front(LegTensor&& t, const std::vector<int>& front) {
    const int nlegs = static_cast<int>(t.ids.size());
    std::vector<int> order;
    order.reserve(nlegs);
    for (int id : front) {
        const int p = t.pos_of(id);
        if (p < 0) throw std::logic_error("bring_to_front: unknown leg");
        order.push_back(p);
    }
    for (int p = 0; p < nlegs; ++p)
        if (std::find(order.begin(), order.end(), p) == order.end())
            order.push_back(p);

    bool noop = true;
    for (int i = 0; i < nlegs; ++i)
        if (order[i] != i) noop = false;
    if (noop) return std::move(t);

    // stride each old leg acquires in the new layout
    std::vector<std::int64_t> new_stride(nlegs);
    {
        std::int64_t s = 1;
        for (int i = 0; i < nlegs; ++i) {
            new_stride[order[i]] = s;
            s *= t.dims[order[i]];
        }
    }

    const std::int64_t n = t.size();
    std::vector<cxd> out(static_cast<std::size_t>(n));
    std::vector<int> digit(nlegs, 0);
    std::int64_t nidx = 0;
    for (std::int64_t oidx = 0; oidx < n; ++oidx) {
        out[static_cast<std::size_t>(nidx)] =
            t.data[static_cast<std::size_t>(oidx)];
        for (int l = 0; l < nlegs; ++l) {
            nidx += new_stride[l];
            if (++digit[l] < t.dims[l]) break;
            nidx -= new_stride[l] * t.dims[l];
            digit[l] = 0;
        }
    }

    LegTensor r;
    r.data = std::move(out);
    r.dims.resize(nlegs);
    r.ids.resize(nlegs);
    for (int i = 0; i < nlegs; ++i) {
        r.dims[i] = t.dims[order[i]];
        r.ids[i] = t.ids[order[i]];
    }
    return r;
}

LegTensor sum_out(LegTensor&& t, int id) {
    const int p = t.pos_of(id);
    if (p < 0) throw std::logic_error("sum_out: unknown leg");
    std::int64_t below = 1;
    for (int i = 0; i < p; ++i) below *= t.dims[i];
    const int n = t.dims[p];
    const std::int64_t above = t.size() / (below * n);

    std::vector<cxd> out(static_cast<std::size_t>(below * above), cxd(0));
    for (std::int64_t a = 0; a < above; ++a) {
        Eigen::Map<Eigen::VectorXcd> dst(out.data() + a * below, below);
        const cxd* base = t.data.data() + a * below * n;
        for (int l = 0; l < n; ++l)
            dst += Eigen::Map<const Eigen::VectorXcd>(base + l * below, below);
    }

    LegTensor r;
    r.data = std::move(out);
    r.dims = t.dims;
    r.ids = t.ids;
    r.dims.erase(r.dims.begin() + p);
    r.ids.erase(r.ids.begin() + p);
    return r;
}

struct VarSchedule {
    std::vector<int> ninv, sinv;
    std::vector<int> order;  // slot processing order
    std::vector<int> last;   // position in `order` after which the var closes

    VarSchedule(const NcPartition& nu, const NcPartition& sigma) {
        const int k = nu.k();
        const auto& np = nu.perm();
        const auto& sp = sigma.perm();
        ninv.resize(k);
        sinv.resize(k);
        for (int j = 0; j < k; ++j) {
            ninv[np[j]] = j;
            sinv[sp[j]] = j;
        }

        auto vars_of = [&](int j) {
            std::vector<int> v{cvar(j), cvar(sp[j]), evar(j), evar(np[j])};
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
            return v;
        };
        auto other_user = [&](int v, int j) {
            const int m = v >= 200 ? v - 200 : v - 100;
            const int u1 = m;
            const int u2 = v >= 200 ? ninv[m] : sinv[m];
            if (u1 == u2) return j;
            return j == u1 ? u2 : u1;
        };

        // Greedy sweep order: slots commute, and the intermediate tensor
        // grows a d_c factor per open bath leg, so pick at every step the
        // slot leaving the fewest legs open.
        std::vector<char> done(k, false);
        std::vector<int> open;
        order.reserve(k);
        for (int step = 0; step < k; ++step) {
            int best = -1, best_after = 0, best_during = 0;
            for (int j = 0; j < k; ++j) {
                if (done[j]) continue;
                int during = static_cast<int>(open.size());
                int after = during;
                for (int v : vars_of(j)) {
                    if (std::find(open.begin(), open.end(), v) == open.end()) {
                        ++during;
                        ++after;
                    }
                    const int o = other_user(v, j);
                    if (o == j || done[o]) --after;
                }
                if (best < 0 || after < best_after ||
                    (after == best_after && during < best_during)) {
                    best = j;
                    best_after = after;
                    best_during = during;
                }
            }
            for (int v : vars_of(best)) {
                const int o = other_user(v, best);
                auto it = std::find(open.begin(), open.end(), v);
                if (o == best || done[o]) {
                    if (it != open.end()) open.erase(it);
                } else if (it == open.end()) {
                    open.push_back(v);
                }
            }
            done[best] = true;
            order.push_back(best);
        }

        std::vector<int> pos(k);
        for (int i = 0; i < k; ++i) pos[order[i]] = i;
        last.assign(256, -1);
        for (int m = 0; m < k; ++m) {
            last[cvar(m)] = std::max(pos[m], pos[sinv[m]]);
            last[evar(m)] = std::max(pos[m], pos[ninv[m]]);
        }
    }
};

// Largest number of bath legs simultaneously open while contracting.
int peak_open_legs(const NcPartition& nu, const NcPartition& sigma) {
    const int k = nu.k();
    const auto& np = nu.perm();
    const auto& sp = sigma.perm();
    VarSchedule sched(nu, sigma);
    std::vector<int> open;
    int peak = 0;
    for (int step = 0; step < k; ++step) {
        const int j = sched.order[step];
        const int vids[4] = {cvar(j), cvar(sp[j]), evar(j), evar(np[j])};
        std::vector<int> vars;
        for (int v : vids)
            if (std::find(vars.begin(), vars.end(), v) == vars.end())
                vars.push_back(v);
        int during = static_cast<int>(open.size());
        for (int v : vars)
            if (std::find(open.begin(), open.end(), v) == open.end()) ++during;
        peak = std::max(peak, during);
        for (int v : vars) {
            auto it = std::find(open.begin(), open.end(), v);
            if (sched.last[v] == step) {
                if (it != open.end()) open.erase(it);
            } else if (it == open.end()) {
                open.push_back(v);
            }
        }
    }
    return peak;
}

// Applies M_{nu,sigma} to `batch` stacked vectors (column-major
// N x batch, N = d_a^{2k}).
void engine_apply(const NcPartition& nu, const NcPartition& sigma,
                  const Gate& g, const cxd* in, std::int64_t batch,
                  cxd* out) {
    const int k = nu.k();
    const int da = g.d_a, dc = g.d_c;
    const std::int64_t n_site = ipow(da, 2 * k);
    const auto& np = nu.perm();
    const auto& sp = sigma.perm();
    VarSchedule sched(nu, sigma);

    LegTensor t;
    t.dims.assign(2 * k, da);
    t.ids.resize(2 * k);
    for (int i = 0; i < 2 * k; ++i) t.ids[i] = i;
    if (batch > 1) {
        t.dims.push_back(static_cast<int>(batch));
        t.ids.push_back(kBatchLeg);
    }
    t.data.assign(in, in + n_site * batch);

    for (int stage = 0; stage < k; ++stage) {
        const int j = sched.order[stage];
        const int vids[4] = {cvar(j), cvar(sp[j]), evar(j), evar(np[j])};
        std::vector<int> vars;
        for (int v : vids)
            if (std::find(vars.begin(), vars.end(), v) == vars.end())
                vars.push_back(v);
        std::vector<int> vold, vnew;
        for (int v : vars)
            (t.pos_of(v) >= 0 ? vold : vnew).push_back(v);

        std::vector<int> front = {2 * j, 2 * j + 1};
        front.insert(front.end(), vold.begin(), vold.end());
        t = bring_to_front(std::move(t), front);

        const int nold = static_cast<int>(vold.size());
        const int nnew = static_cast<int>(vnew.size());
        const std::int64_t old_n = ipow(dc, nold);
        const std::int64_t new_n = ipow(dc, nnew);
        const std::int64_t rows_in = static_cast<std::int64_t>(da) * da * old_n;
        const std::int64_t cols = t.size() / rows_in;
        const std::int64_t blk_out = static_cast<std::int64_t>(da) * da * new_n;
        const std::int64_t rows_out = blk_out * old_n;

        auto val_of = [&](int v, const std::vector<int>& od,
                          const std::vector<int>& nd) {
            for (int i = 0; i < nold; ++i)
                if (vold[i] == v) return od[i];
            for (int i = 0; i < nnew; ++i)
                if (vnew[i] == v) return nd[i];
            throw std::logic_error("engine_apply: unscheduled variable");
        };

        // One step matrix per already-open leg configuration; rows run over
        // (a_out, a'_out, new legs), columns over (a_in, a'_in).
        std::vector<Eigen::MatrixXcd> step(static_cast<std::size_t>(old_n));
        std::vector<int> od(nold, 0);
        for (std::int64_t vo = 0; vo < old_n; ++vo) {
            Eigen::MatrixXcd& s = step[static_cast<std::size_t>(vo)];
            s.resize(blk_out, static_cast<std::int64_t>(da) * da);
            std::vector<int> nd(nnew, 0);
            for (std::int64_t vn = 0; vn < new_n; ++vn) {
                const int c_f = val_of(cvar(j), od, nd);
                const int c_b = val_of(cvar(sp[j]), od, nd);
                const int e_f = val_of(evar(j), od, nd);
                const int e_b = val_of(evar(np[j]), od, nd);
                for (int ao = 0; ao < da; ++ao)
                    for (int bo = 0; bo < da; ++bo)
                        for (int ai = 0; ai < da; ++ai)
                            for (int bi = 0; bi < da; ++bi)
                                s(ao + da * bo + da * da * vn,
                                  ai + da * bi) =
                                    g.u(ao * dc + e_f, ai * dc + c_f) *
                                    std::conj(g.u(bo * dc + e_b,
                                                  bi * dc + c_b));
                for (int i = 0; i < nnew && ++nd[i] == dc; ++i) nd[i] = 0;
            }
            for (int i = 0; i < nold && ++od[i] == dc; ++i) od[i] = 0;
        }

        LegTensor t2;
        t2.ids = {2 * j, 2 * j + 1};
        t2.dims = {da, da};
        for (int v : vnew) {
            t2.ids.push_back(v);
            t2.dims.push_back(dc);
        }
        for (int v : vold) {
            t2.ids.push_back(v);
            t2.dims.push_back(dc);
        }
        for (std::size_t i = 2 + vold.size(); i < t.ids.size(); ++i) {
            t2.ids.push_back(t.ids[i]);
            t2.dims.push_back(t.dims[i]);
        }
        t2.data.resize(static_cast<std::size_t>(rows_out * cols));

        using SrcMap =
            Eigen::Map<const Eigen::MatrixXcd, 0, Eigen::OuterStride<>>;
        using DstMap = Eigen::Map<Eigen::MatrixXcd, 0, Eigen::OuterStride<>>;
        for (std::int64_t vo = 0; vo < old_n; ++vo) {
            SrcMap src(t.data.data() + vo * da * da,
                       static_cast<std::int64_t>(da) * da, cols,
                       Eigen::OuterStride<>(rows_in));
            DstMap dst(t2.data.data() + vo * blk_out, blk_out, cols,
                       Eigen::OuterStride<>(rows_out));
            dst.noalias() = step[static_cast<std::size_t>(vo)] * src;
        }
        t = std::move(t2);

        for (int v : vars)
            if (sched.last[v] == stage) t = sum_out(std::move(t), v);
    }

    std::vector<int> site_order(2 * k);
    for (int i = 0; i < 2 * k; ++i) site_order[i] = i;
    t = bring_to_front(std::move(t), site_order);

    const double scale = 1.0 / static_cast<double>(ipow(dc, k));
    Eigen::Map<Eigen::VectorXcd>(out, n_site * batch) =
        scale * Eigen::Map<const Eigen::VectorXcd>(t.data.data(),
                                                   n_site * batch);
}

// ---------------------------------------------------------------------
// Dense path and its cache.

constexpr std::int64_t kDenseMaxDim = 4096;

// Building a dense operator costs about n on-the-fly applies, so the
// automatic path only materializes small matrices; evolution workloads
// apply each (nu, sigma) a few dozen times, far short of amortizing a
// 729-dim build.
constexpr std::int64_t kDenseAutoDim = 256;
constexpr std::size_t kDefaultBudget = std::size_t(512) << 20;
constexpr std::size_t kBuildScratch = std::size_t(256) << 20;

Eigen::MatrixXcd build_dense(const NcPartition& nu, const NcPartition& sigma,
                             const Gate& g) {
    const int k = nu.k();
    const std::int64_t n = ipow(g.d_a, 2 * k);
    const std::int64_t per_col =
        2 * n * ipow(g.d_c, peak_open_legs(nu, sigma)) *
        static_cast<std::int64_t>(sizeof(cxd));
    const std::int64_t chunk = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(kBuildScratch) / std::max<std::int64_t>(per_col, 1),
        1, n);

    Eigen::MatrixXcd m(n, n);
    std::vector<cxd> in;
    for (std::int64_t c0 = 0; c0 < n; c0 += chunk) {
        const std::int64_t nc = std::min(chunk, n - c0);
        in.assign(static_cast<std::size_t>(n * nc), cxd(0));
        for (std::int64_t i = 0; i < nc; ++i)
            in[static_cast<std::size_t>(i * n + c0 + i)] = 1.0;
        engine_apply(nu, sigma, g, in.data(), nc, m.data() + c0 * n);
    }
    return m;
}

struct MKey {
    std::uint64_t fp = 0;
    int d_a = 0, d_c = 0;
    std::vector<int> nu, sigma;

    bool operator==(const MKey& o) const = default;
};

struct MKeyHash {
    std::size_t operator()(const MKey& k) const {
        std::uint64_t h = k.fp ^ 0x9e3779b97f4a7c15ull;
        auto mix = [&h](std::uint64_t x) {
            h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        };
        mix(static_cast<std::uint64_t>(k.d_a));
        mix(static_cast<std::uint64_t>(k.d_c));
        for (int x : k.nu) mix(static_cast<std::uint64_t>(x + 1));
        for (int x : k.sigma) mix(static_cast<std::uint64_t>(x + 1) << 32);
        return static_cast<std::size_t>(h);
    }
};

class MCache {
public:
    std::shared_ptr<const Eigen::MatrixXcd> find(const MKey& key) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = map_.find(key);
        if (it == map_.end()) {
            ++misses_;
            return nullptr;
        }
        ++hits_;
        lru_.splice(lru_.begin(), lru_, it->second);
        return it->second->value;
    }

    void insert(const MKey& key,
                std::shared_ptr<const Eigen::MatrixXcd> value) {
        const std::size_t sz =
            sizeof(cxd) * static_cast<std::size_t>(value->size());
        std::lock_guard<std::mutex> lock(mu_);
        if (map_.count(key) || sz > budget_) return;
        lru_.push_front(Entry{key, std::move(value), sz});
        map_[key] = lru_.begin();
        bytes_ += sz;
        while (bytes_ > budget_ && lru_.size() > 1) {
            const Entry& back = lru_.back();
            bytes_ -= back.size;
            map_.erase(back.key);
            lru_.pop_back();
            ++evictions_;
        }
    }

    MCacheStats stats() {
        std::lock_guard<std::mutex> lock(mu_);
        return {hits_, misses_, evictions_, bytes_, budget_};
    }

    void set_budget(std::size_t b) {
        std::lock_guard<std::mutex> lock(mu_);
        budget_ = b;
        while (bytes_ > budget_ && !lru_.empty()) {
            const Entry& back = lru_.back();
            bytes_ -= back.size;
            map_.erase(back.key);
            lru_.pop_back();
            ++evictions_;
        }
    }

    std::size_t budget() {
        std::lock_guard<std::mutex> lock(mu_);
        return budget_;
    }

    void clear() {
        std::lock_guard<std::mutex> lock(mu_);
        lru_.clear();
        map_.clear();
        bytes_ = 0;
        hits_ = misses_ = evictions_ = 0;
    }

private:
    struct Entry {
        MKey key;
        std::shared_ptr<const Eigen::MatrixXcd> value;
        std::size_t size = 0;
    };

    std::mutex mu_;
    std::list<Entry> lru_;
    std::unordered_map<MKey, std::list<Entry>::iterator, MKeyHash> map_;
    std::size_t bytes_ = 0;
    std::size_t budget_ = kDefaultBudget;
    std::uint64_t hits_ = 0, misses_ = 0, evictions_ = 0;
};

MCache& cache() {
    static MCache c;
    return c;
}

void check_apply_args(const NcPartition& nu, const NcPartition& sigma,
                      const Gate& gate, const ReplicaVector& v) {
    if (nu.k() != sigma.k())
        throw std::invalid_argument("apply_m: partition sizes differ");
    if (v.k != nu.k())
        throw std::invalid_argument("apply_m: vector has wrong replica count");
    if (v.d != gate.d_a)
        throw std::invalid_argument("apply_m: vector dimension is not d_a");
}

}  // namespace

ReplicaVector apply_m(const NcPartition& nu, const NcPartition& sigma,
                      const Gate& gate, const ReplicaVector& v,
                      ApplyPath path) {
    check_apply_args(nu, sigma, gate, v);
    const std::int64_t n = v.size();
    const std::size_t mat_bytes =
        sizeof(cxd) * static_cast<std::size_t>(n) * static_cast<std::size_t>(n);

    bool dense = false;
    switch (path) {
        case ApplyPath::automatic:
            dense = n <= kDenseAutoDim && mat_bytes <= cache().budget();
            break;
        case ApplyPath::dense: {
            if (n > kDenseMaxDim) {
                std::ostringstream os;
                os << "dense path supports d_a^(2k) <= " << kDenseMaxDim
                   << ", got " << n;
                throw std::length_error(os.str());
            }
            if (mat_bytes > cache().budget()) {
                std::ostringstream os;
                os << "dense operator needs " << mat_bytes
                   << " bytes, cache budget is " << cache().budget();
                throw std::length_error(os.str());
            }
            dense = true;
            break;
        }
        case ApplyPath::on_the_fly:
            break;
    }

    ReplicaVector out = zero_replica(v.d, v.k);
    if (dense) {
        MKey key{gate.fingerprint(), gate.d_a, gate.d_c, nu.perm(),
                 sigma.perm()};
        auto m = cache().find(key);
        if (!m) {
            m = std::make_shared<const Eigen::MatrixXcd>(
                build_dense(nu, sigma, gate));
            cache().insert(key, m);
        }
        out.data.noalias() = (*m) * v.data;
    } else {
        engine_apply(nu, sigma, gate, v.data.data(), 1, out.data.data());
    }
    return out;
}

ReplicaVector apply_m_adjoint(const NcPartition& nu, const NcPartition& sigma,
                              const Gate& gate, const ReplicaVector& v,
                              ApplyPath path) {
    return apply_m(sigma, nu, gate.adjoint(), v, path);
}

MCacheStats m_cache_stats() { return cache().stats(); }

void set_m_cache_budget(std::size_t bytes) { cache().set_budget(bytes); }

void clear_m_cache() { cache().clear(); }

}  // namespace kotoc
