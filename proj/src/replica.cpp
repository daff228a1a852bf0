#include "kotoc/replica.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kotoc {

namespace {

std::int64_t ipow(std::int64_t base, int exp) {
    std::int64_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

void check_dim(int d, const char* what) {
    if (d < 2)
        throw std::invalid_argument(std::string(what) +
                                    " dimension must be at least 2");
}

}  // namespace

Observable Observable::from_matrix(Eigen::MatrixXcd m) {
    if (m.rows() != m.cols() || m.rows() < 2)
        throw std::invalid_argument("observable must be square, d >= 2");
    const double viol = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (viol > 1e-12) {
        std::ostringstream os;
        os << "observable is not Hermitian: max |m - m^dag| = " << viol;
        throw std::invalid_argument(os.str());
    }
    Observable a;
    a.d = static_cast<int>(m.rows());
    a.m = std::move(m);
    return a;
}

Observable Observable::identity(int d) {
    check_dim(d, "observable");
    Observable a;
    a.d = d;
    a.m = Eigen::MatrixXcd::Identity(d, d);
    return a;
}

bool Observable::is_traceless(double tol) const {
    return std::abs(m.trace()) <= tol;
}

Gate Gate::from_matrix(int d_a, int d_c, Eigen::MatrixXcd u) {
    check_dim(d_a, "gate site A");
    check_dim(d_c, "gate site C");
    const auto n = static_cast<Eigen::Index>(d_a) * d_c;
    if (u.rows() != n || u.cols() != n) {
        std::ostringstream os;
        os << "gate matrix is " << u.rows() << "x" << u.cols()
           << ", expected " << n << "x" << n;
        throw std::invalid_argument(os.str());
    }
    const double viol =
        (u.adjoint() * u - Eigen::MatrixXcd::Identity(n, n))
            .cwiseAbs()
            .maxCoeff();
    if (viol > 1e-10) {
        std::ostringstream os;
        os << "gate is not unitary: max |U^dag U - 1| = " << viol;
        throw std::invalid_argument(os.str());
    }
    Gate g;
    g.d_a = d_a;
    g.d_c = d_c;
    g.u = std::move(u);
    return g;
}

Gate Gate::adjoint() const {
    Gate g;
    g.d_a = d_a;
    g.d_c = d_c;
    g.u = u.adjoint();
    return g;
}

std::uint64_t Gate::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const unsigned char* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    const std::int64_t dims[2] = {d_a, d_c};
    mix(reinterpret_cast<const unsigned char*>(dims), sizeof(dims));
    mix(reinterpret_cast<const unsigned char*>(u.data()),
        sizeof(cxd) * static_cast<std::size_t>(u.size()));
    return h;
}

ReplicaVector zero_replica(int d, int k) {
    check_dim(d, "replica site");
    if (k < 1 || k > 10) throw std::invalid_argument("k must be in [1, 10]");
    ReplicaVector v;
    v.d = d;
    v.k = k;
    v.data = Eigen::VectorXcd::Zero(ipow(d, 2 * k));
    return v;
}

ReplicaVector permutation_vector(const NcPartition& sigma, int d) {
    const int k = sigma.k();
    ReplicaVector v = zero_replica(d, k);
    const auto& p = sigma.perm();
    // Free indices are i_1..i_k; i_j' is pinned to i_{sigma(j)}.
    std::vector<int> i(k, 0);
    for (;;) {
        std::int64_t idx = 0, stride = 1;
        for (int j = 0; j < k; ++j) {
            idx += stride * i[j];
            stride *= d;
            idx += stride * i[p[j]];
            stride *= d;
        }
        v.data[idx] = 1.0;
        int j = 0;
        while (j < k && ++i[j] == d) i[j++] = 0;
        if (j == k) break;
    }
    return v;
}

cxd overlap(const ReplicaVector& left, const ReplicaVector& right) {
    if (left.d != right.d || left.k != right.k)
        throw std::invalid_argument("overlap: replica shapes differ");
    return left.data.dot(right.data);
}

namespace {

void check_ops(const std::vector<Observable>& ops, int k) {
    if (static_cast<int>(ops.size()) != k)
        throw std::invalid_argument("need exactly k observables");
    for (const auto& a : ops)
        if (a.d != ops[0].d)
            throw std::invalid_argument("observable dimensions differ");
}

}  // namespace

ReplicaVector dress_bottom(const std::vector<Observable>& ops,
                           const NcPartition& sigma) {
    const int k = sigma.k();
    check_ops(ops, k);
    const int d = ops[0].d;
    ReplicaVector v = zero_replica(d, k);

    // inv[j] = sigma^{-1}(j): the forward index paired with backward slot j.
    std::vector<int> inv(k);
    for (int j = 0; j < k; ++j) inv[sigma.perm()[j]] = j;

    std::vector<int> dig(2 * k, 0);  // i_1, i_1', i_2, i_2', ...
    const std::int64_t n = v.size();
    for (std::int64_t idx = 0; idx < n; ++idx) {
        cxd prod = 1.0;
        for (int j = 0; j < k && prod != 0.0; ++j)
            prod *= ops[j].m(dig[2 * j], dig[2 * inv[j] + 1]);
        v.data[idx] = prod;
        int p = 0;
        while (p < 2 * k && ++dig[p] == d) dig[p++] = 0;
    }
    return v;
}

ReplicaVector dress_top(const std::vector<Observable>& ops) {
    const int k = static_cast<int>(ops.size());
    if (k < 1) throw std::invalid_argument("need at least one observable");
    check_ops(ops, k);
    const int d = ops[0].d;
    ReplicaVector v = zero_replica(d, k);

    std::vector<int> dig(2 * k, 0);
    const std::int64_t n = v.size();
    for (std::int64_t idx = 0; idx < n; ++idx) {
        cxd prod = 1.0;
        for (int j = 0; j < k && prod != 0.0; ++j)
            prod *= ops[j].m(dig[2 * j + 1], dig[2 * ((j + 1) % k)]);
        // Stored conjugated: overlap() conjugates the left argument back.
        v.data[idx] = std::conj(prod);
        int p = 0;
        while (p < 2 * k && ++dig[p] == d) dig[p++] = 0;
    }
    return v;
}

ReplicaVector apply_slot(const ReplicaVector& v, const Eigen::MatrixXcd& op,
                         int slot, Leg leg) {
    if (slot < 0 || slot >= v.k)
        throw std::invalid_argument("slot out of range");
    if (op.rows() != v.d || op.cols() != v.d)
        throw std::invalid_argument("slot operator dimension mismatch");

    const int d = v.d;
    const std::int64_t stride =
        ipow(d, 2 * slot + (leg == Leg::backward ? 1 : 0));
    const std::int64_t block = stride * d;  // one full sweep of the leg
    const std::int64_t n = v.size();

    ReplicaVector w = zero_replica(d, v.k);
    for (std::int64_t base = 0; base < n; base += block)
        for (std::int64_t lo = 0; lo < stride; ++lo)
            for (int r = 0; r < d; ++r) {
                cxd acc = 0.0;
                for (int c = 0; c < d; ++c)
                    acc += op(r, c) * v.data[base + lo + c * stride];
                w.data[base + lo + r * stride] = acc;
            }
    return w;
}

}  // namespace kotoc
