#include "kotoc/montecarlo.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

#include <unsupported/Eigen/KroneckerProduct>

#include "kotoc/rng.hpp"

namespace kotoc {

namespace {

// Returns d_c * d_e^L, the dimension the bath unitaries act on.
long check_config(const McConfig& cfg, const Gate& gate,
                  const std::vector<Observable>& a_ops,
                  const std::vector<Observable>& b_ops) {
    if (cfg.k < 1 || cfg.k > 8)
        throw std::length_error("supported orders are 1 <= k <= 8");
    if (cfg.t_max < 0 || cfg.t_max > 64)
        throw std::length_error("t_max must lie in 0..64");
    if (cfg.d_a < 1 || cfg.d_c < 1 || cfg.d_e < 1)
        throw std::invalid_argument("dimensions must be positive");
    if (cfg.d_a != gate.d_a || cfg.d_c != gate.d_c)
        throw std::invalid_argument("config dimensions do not match the gate");
    if (cfg.bath_sites < 1)
        throw std::invalid_argument("brickwork needs at least one column");

    const int sites = cfg.layout == BathLayout::brickwork ? cfg.bath_sites : 1;
    long dim = static_cast<long>(cfg.d_a) * cfg.d_c;
    for (int x = 0; x < sites; ++x) {
        dim *= cfg.d_e;
        if (dim > 4096)
            throw std::length_error(
                "bath budget exceeded: d_a*d_c*d_e^L must stay within 4096");
    }

    if (static_cast<int>(a_ops.size()) != cfg.k ||
        static_cast<int>(b_ops.size()) != cfg.k)
        throw std::invalid_argument("need k observables on each side");
    for (int i = 0; i < cfg.k; ++i)
        if (a_ops[i].d != cfg.d_a || b_ops[i].d != cfg.d_a)
            throw std::invalid_argument("observable dimension != config d_a");

    return dim / cfg.d_a;
}

// Haar bath unitary on C (x) E_1 ... E_L for one time step. The brickwork
// alternates an even layer pairing (C,1),(2,3),... with an odd layer
// pairing (1,2),(3,4),...; unpaired trailing sites stay idle. A single
// column reduces to one gate on C (x) E_1 drawn from the same stream as the
// minimal-bath layout, so the two layouts agree realization by realization.
Eigen::MatrixXcd bath_unitary(const McConfig& cfg, int sample, int t) {
    const int sites = cfg.layout == BathLayout::brickwork ? cfg.bath_sites : 1;
    std::vector<int> dims(1 + sites, cfg.d_e);
    dims[0] = cfg.d_c;

    auto layer = [&](int start, int parity) {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(
            start == 1 ? cfg.d_c : 1, start == 1 ? cfg.d_c : 1);
        int pair = 0;
        int x = start;
        for (; x + 1 <= sites; x += 2) {
            const int dim = dims[x] * dims[x + 1];
            Eigen::MatrixXcd w = haar_unitary(
                dim, stream_key({cfg.base_seed, static_cast<std::uint64_t>(sample),
                                 static_cast<std::uint64_t>(t),
                                 static_cast<std::uint64_t>(parity),
                                 static_cast<std::uint64_t>(pair++)}));
            m = Eigen::kroneckerProduct(m, w).eval();
        }
        if (x == sites)  // one site left over
            m = Eigen::kroneckerProduct(
                    m, Eigen::MatrixXcd::Identity(dims[x], dims[x]))
                    .eval();
        return m;
    };

    Eigen::MatrixXcd even = layer(0, 0);
    if (cfg.layout == BathLayout::single || sites == 1) return even;
    return even * layer(1, 1);
}

void hermiticity_audit(const Eigen::MatrixXcd& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw std::runtime_error("evolved observable drifted from hermitian");
}

// Fixed-shape pairwise reduction over [lo, hi); the summation tree depends
// only on the index range, never on scheduling.
cxd tree_sum(const std::vector<cxd>& v, int lo, int hi) {
    if (hi - lo == 1) return v[lo];
    const int mid = lo + (hi - lo) / 2;
    return tree_sum(v, lo, mid) + tree_sum(v, mid, hi);
}

double tree_sum(const std::vector<double>& v, int lo, int hi) {
    if (hi - lo == 1) return v[lo];
    const int mid = lo + (hi - lo) / 2;
    return tree_sum(v, lo, mid) + tree_sum(v, mid, hi);
}

}  // namespace

std::vector<cxd> finite_kotoc_single(const McConfig& cfg, const Gate& gate,
                                     const std::vector<Observable>& a_ops,
                                     const std::vector<Observable>& b_ops,
                                     int sample) {
    const long dce = check_config(cfg, gate, a_ops, b_ops);
    const long D = cfg.d_a * dce;
    const long de_total = dce / cfg.d_c;
    if (sample < 0) throw std::invalid_argument("sample index must be >= 0");

    const Eigen::MatrixXcd bath_id =
        Eigen::MatrixXcd::Identity(dce, dce);

    // Tuples often repeat one operator k times; evolve each distinct one once.
    std::vector<int> slot_of(cfg.k);
    std::vector<Eigen::MatrixXcd> evolved;
    for (int i = 0; i < cfg.k; ++i) {
        int found = -1;
        for (int j = 0; j < i && found < 0; ++j)
            if ((a_ops[j].m - a_ops[i].m).cwiseAbs().maxCoeff() == 0.0)
                found = slot_of[j];
        if (found < 0) {
            found = static_cast<int>(evolved.size());
            evolved.push_back(
                Eigen::kroneckerProduct(a_ops[i].m, bath_id).eval());
        }
        slot_of[i] = found;
    }
    std::vector<Eigen::MatrixXcd> statics;
    statics.reserve(cfg.k);
    for (int i = 0; i < cfg.k; ++i)
        statics.push_back(Eigen::kroneckerProduct(b_ops[i].m, bath_id).eval());

    auto alternating_value = [&]() {
        Eigen::MatrixXcd p = evolved[slot_of[0]] * statics[0];
        for (int i = 1; i < cfg.k; ++i)
            p = p * evolved[slot_of[i]] * statics[i];
        return p.trace() / static_cast<double>(D);
    };

    std::vector<cxd> out(cfg.t_max + 1);
    out[0] = alternating_value();

    const Eigen::MatrixXcd sys_id =
        Eigen::MatrixXcd::Identity(cfg.d_a, cfg.d_a);
    const Eigen::MatrixXcd lift_gate =
        Eigen::kroneckerProduct(
            gate.u, Eigen::MatrixXcd::Identity(de_total, de_total))
            .eval();
    for (int t = 1; t <= cfg.t_max; ++t) {
        const Eigen::MatrixXcd lift_bath =
            Eigen::kroneckerProduct(sys_id, bath_unitary(cfg, sample, t))
                .eval();
        const Eigen::MatrixXcd step = lift_bath * lift_gate;
        for (Eigen::MatrixXcd& m : evolved) {
            m = step * m * step.adjoint();
            hermiticity_audit(m);
        }
        out[t] = alternating_value();
    }
    return out;
}

McEstimate estimate(const McConfig& cfg, const Gate& gate,
                    const std::vector<Observable>& a_ops,
                    const std::vector<Observable>& b_ops, int threads) {
    check_config(cfg, gate, a_ops, b_ops);
    if (cfg.n_samples < 2)
        throw std::invalid_argument("need at least two samples");
    if (threads < 1) threads = 1;
    if (threads > cfg.n_samples) threads = cfg.n_samples;

    const int n = cfg.n_samples;
    std::vector<std::vector<cxd>> runs(n);
    auto worker = [&](int first) {
        for (int s = first; s < n; s += threads)
            runs[s] = finite_kotoc_single(cfg, gate, a_ops, b_ops, s);
    };
    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
        for (std::thread& th : pool) th.join();
    }

    McEstimate est;
    est.samples = n;
    est.base_seed = cfg.base_seed;
    std::vector<cxd> col(n);
    std::vector<double> dev(n);
    for (int t = 0; t <= cfg.t_max; ++t) {
        est.t_values.push_back(t);
        for (int s = 0; s < n; ++s) col[s] = runs[s][t];
        const cxd mean = tree_sum(col, 0, n) / static_cast<double>(n);
        for (int s = 0; s < n; ++s) dev[s] = std::norm(col[s] - mean);
        const double var = tree_sum(dev, 0, n) / static_cast<double>(n - 1);
        est.mean.push_back(mean);
        est.variance.push_back(var);
        est.std_error.push_back(std::sqrt(var / n));
    }
    return est;
}

double fit_loglog_slope(const std::vector<double>& x,
                        const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("slope fit needs matching lists, >= 2 points");
    const int n = static_cast<int>(x.size());
    double mx = 0, my = 0;
    std::vector<double> lx(n), ly(n);
    for (int i = 0; i < n; ++i) {
        if (x[i] <= 0.0 || y[i] <= 0.0)
            throw std::invalid_argument("slope fit needs positive data");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double num = 0, den = 0;
    for (int i = 0; i < n; ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    if (den == 0.0) throw std::invalid_argument("slope fit needs distinct x");
    return num / den;
}

}  // namespace kotoc
