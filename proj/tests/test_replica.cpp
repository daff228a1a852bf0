#include <doctest.h>

#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "kotoc/apply_m.hpp"
#include "kotoc/nc_partition.hpp"
#include "kotoc/replica.hpp"

using namespace kotoc;

namespace {

std::int64_t ipw(std::int64_t b, int e) {
    std::int64_t r = 1;
    while (e-- > 0) r *= b;
    return r;
}

Eigen::MatrixXcd random_unitary(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXcd z(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) z(i, j) = cxd(g(rng), g(rng));
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
    return qr.householderQ();
}

Observable random_obs(int d, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXcd z(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) z(i, j) = cxd(g(rng), g(rng));
    return Observable::from_matrix((z + z.adjoint()) / 2.0);
}

ReplicaVector random_replica(int d, int k, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g;
    ReplicaVector v = zero_replica(d, k);
    for (std::int64_t i = 0; i < v.size(); ++i)
        v.data[i] = cxd(g(rng), g(rng));
    return v;
}

// Direct construction of the replicated operator, straight from its
// definition: sum over all bath index assignments of elementary products
// of gate entries.  Deliberately naive; used as the oracle.
Eigen::MatrixXcd naive_m(const NcPartition& nu, const NcPartition& sigma,
                         const Gate& g) {
    const int k = nu.k(), da = g.d_a, dc = g.d_c;
    const std::int64_t n = ipw(da, 2 * k);
    const std::int64_t nconf = ipw(dc, k);
    const auto& np = nu.perm();
    const auto& sp = sigma.perm();

    std::vector<std::vector<int>> dig(n, std::vector<int>(2 * k));
    for (std::int64_t x = 0; x < n; ++x) {
        std::int64_t y = x;
        for (int l = 0; l < 2 * k; ++l) {
            dig[x][l] = static_cast<int>(y % da);
            y /= da;
        }
    }

    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    std::vector<int> c(k), e(k);
    for (std::int64_t cc = 0; cc < nconf; ++cc) {
        std::int64_t y = cc;
        for (int j = 0; j < k; ++j) {
            c[j] = static_cast<int>(y % dc);
            y /= dc;
        }
        for (std::int64_t ee = 0; ee < nconf; ++ee) {
            y = ee;
            for (int j = 0; j < k; ++j) {
                e[j] = static_cast<int>(y % dc);
                y /= dc;
            }
            for (std::int64_t r = 0; r < n; ++r)
                for (std::int64_t q = 0; q < n; ++q) {
                    cxd prod = 1.0;
                    for (int j = 0; j < k && prod != 0.0; ++j) {
                        prod *= g.u(dig[r][2 * j] * dc + e[j],
                                    dig[q][2 * j] * dc + c[j]);
                        prod *= std::conj(g.u(dig[r][2 * j + 1] * dc + e[np[j]],
                                              dig[q][2 * j + 1] * dc + c[sp[j]]));
                    }
                    m(r, q) += prod;
                }
        }
    }
    return m / static_cast<double>(nconf);
}

double rel_err(const Eigen::VectorXcd& got, const Eigen::VectorXcd& want) {
    const double scale = std::max(want.norm(), 1e-300);
    return (got - want).norm() / scale;
}

Gate test_gate(int da, int dc, unsigned seed) {
    return Gate::from_matrix(da, dc, random_unitary(da * dc, seed));
}

}  // namespace

TEST_SUITE("replica") {

TEST_CASE("permutation vectors have the handwritten components") {
    auto id1 = permutation_vector(NcPartition::identity(1), 2);
    REQUIRE(id1.size() == 4);
    CHECK(id1.data[0] == cxd(1));
    CHECK(id1.data[1] == cxd(0));
    CHECK(id1.data[2] == cxd(0));
    CHECK(id1.data[3] == cxd(1));

    auto id2 = permutation_vector(NcPartition::identity(2), 2);
    REQUIRE(id2.size() == 16);
    for (std::int64_t i = 0; i < 16; ++i)
        CHECK(id2.data[i] == cxd(i == 0 || i == 3 || i == 12 || i == 15));

    auto cyc2 = permutation_vector(NcPartition::full_cycle(2), 2);
    for (std::int64_t i = 0; i < 16; ++i)
        CHECK(cyc2.data[i] == cxd(i == 0 || i == 6 || i == 9 || i == 15));
}

TEST_CASE("permutation overlaps count joint cycles") {
    for (int d : {2, 3})
        for (int k = 1; k <= (d == 2 ? 4 : 3); ++k) {
            NcLattice lat(k);
            for (const auto& s : lat.elements())
                for (const auto& n : lat.elements()) {
                    const cxd got =
                        overlap(permutation_vector(s, d),
                                permutation_vector(n, d));
                    const double want =
                        std::pow(double(d), cycle_count_rel(n, s));
                    CHECK(std::abs(got - cxd(want)) < 1e-9);
                }
        }
}

TEST_CASE("identity dressing reproduces permutation vectors") {
    for (int k = 1; k <= 3; ++k) {
        std::vector<Observable> ones(k, Observable::identity(2));
        for (const auto& s : enumerate_nc(k)) {
            auto dressed = dress_bottom(ones, s);
            auto plain = permutation_vector(s, 2);
            CHECK(rel_err(dressed.data, plain.data) == 0.0);
        }
    }
}

TEST_CASE("top dressing has the cyclic components") {
    const int d = 2;
    auto b1 = random_obs(d, 11), b2 = random_obs(d, 12);
    auto top = dress_top({b1, b2});
    for (int i1 = 0; i1 < d; ++i1)
        for (int i1p = 0; i1p < d; ++i1p)
            for (int i2 = 0; i2 < d; ++i2)
                for (int i2p = 0; i2p < d; ++i2p) {
                    const std::int64_t idx = i1 + 2 * i1p + 4 * i2 + 8 * i2p;
                    const cxd want = b1.m(i1p, i2) * b2.m(i2p, i1);
                    CHECK(std::abs(std::conj(top.data[idx]) - want) < 1e-14);
                }
}

TEST_CASE("boundary pairing equals the alternating trace") {
    for (int d : {2, 3})
        for (int k = 1; k <= 4; ++k) {
            std::vector<Observable> as, bs;
            for (int j = 0; j < k; ++j) {
                as.push_back(random_obs(d, 100 + 10 * k + j));
                bs.push_back(random_obs(d, 200 + 10 * k + j));
            }
            Eigen::MatrixXcd prod = Eigen::MatrixXcd::Identity(d, d);
            for (int j = 0; j < k; ++j) prod = prod * as[j].m * bs[j].m;
            const cxd want = prod.trace();
            const cxd got = overlap(dress_top(bs),
                                    dress_bottom(as, NcPartition::identity(k)));
            CHECK(std::abs(got - want) < 1e-10 * std::max(1.0, std::abs(want)));
        }
}

TEST_CASE("slot application targets one leg") {
    const int d = 3;
    auto a = random_obs(d, 31);
    auto v0 = permutation_vector(NcPartition::identity(1), d);

    auto fwd = apply_slot(v0, a.m, 0, Leg::forward);
    auto bwd = apply_slot(v0, a.m, 0, Leg::backward);
    for (int i = 0; i < d; ++i)
        for (int ip = 0; ip < d; ++ip) {
            CHECK(std::abs(fwd.data[i + d * ip] - a.m(i, ip)) < 1e-14);
            CHECK(std::abs(bwd.data[i + d * ip] - a.m(ip, i)) < 1e-14);
        }

    auto v2 = permutation_vector(NcPartition::identity(2), d);
    auto slot1 = apply_slot(v2, a.m, 1, Leg::forward);
    auto want = dress_bottom({Observable::identity(d), a},
                             NcPartition::identity(2));
    CHECK(rel_err(slot1.data, want.data) < 1e-14);
}

TEST_CASE("replicated operator matches direct construction") {
    struct Combo {
        int da, dc, kmax;
        unsigned seed;
    };
    for (auto [da, dc, kmax, seed] :
         {Combo{2, 2, 3, 5}, Combo{2, 3, 2, 6}, Combo{3, 2, 2, 7}}) {
        Gate g = test_gate(da, dc, seed);
        for (int k = 1; k <= kmax; ++k) {
            NcLattice lat(k);
            auto v = random_replica(da, k, 40 + seed + unsigned(k));
            for (const auto& nu : lat.elements())
                for (const auto& sg : lat.elements()) {
                    const Eigen::VectorXcd want = naive_m(nu, sg, g) * v.data;
                    auto fly = apply_m(nu, sg, g, v, ApplyPath::on_the_fly);
                    auto dense = apply_m(nu, sg, g, v, ApplyPath::dense);
                    CHECK(rel_err(fly.data, want) < 1e-12);
                    CHECK(rel_err(dense.data, want) < 1e-12);
                }
        }
    }
}

TEST_CASE("permutation vectors are eigenvectors with bath-counting values") {
    struct Combo {
        int da, dc, kmax;
        unsigned seed;
    };
    for (auto [da, dc, k, seed] : {Combo{2, 2, 4, 8}, Combo{3, 3, 3, 9}}) {
        Gate g = test_gate(da, dc, seed);
        NcLattice lat(k);
        for (const auto& nu : lat.elements())
            for (const auto& sg : lat.elements()) {
                const double lam =
                    std::pow(double(dc), cycle_count_rel(nu, sg) - k);
                auto vs = permutation_vector(sg, da);
                auto got = apply_m(nu, sg, g, vs, ApplyPath::on_the_fly);
                CHECK(rel_err(got.data, Eigen::VectorXcd(lam * vs.data)) <
                      1e-11);

                auto vn = permutation_vector(nu, da);
                auto adj =
                    apply_m_adjoint(nu, sg, g, vn, ApplyPath::on_the_fly);
                CHECK(rel_err(adj.data, Eigen::VectorXcd(lam * vn.data)) <
                      1e-11);
            }
    }
}

TEST_CASE("single replica reduces to the averaged channel") {
    for (int da : {2, 3})
        for (int dc : {2, 3}) {
            Gate g = test_gate(da, dc, unsigned(17 + da + 4 * dc));
            auto a = random_obs(da, unsigned(23 + da + dc));

            Eigen::MatrixXcd chan = Eigen::MatrixXcd::Zero(da, da);
            for (int e = 0; e < dc; ++e)
                for (int c = 0; c < dc; ++c) {
                    Eigen::MatrixXcd blk(da, da);
                    for (int i = 0; i < da; ++i)
                        for (int j = 0; j < da; ++j)
                            blk(i, j) = g.u(i * dc + e, j * dc + c);
                    chan += blk * a.m * blk.adjoint();
                }
            chan /= double(dc);

            const auto one = NcPartition::identity(1);
            auto got = apply_m(one, one, g, dress_bottom({a}, one));
            auto want = dress_bottom({Observable::from_matrix(chan)}, one);
            CHECK(rel_err(got.data, want.data) < 1e-12);
        }
}

TEST_CASE("adjoint application is the pairing transpose") {
    const Gate g = test_gate(2, 2, 33);
    for (int k = 1; k <= 3; ++k) {
        NcLattice lat(k);
        auto v = random_replica(2, k, 50 + unsigned(k));
        auto w = random_replica(2, k, 60 + unsigned(k));
        for (const auto& nu : lat.elements())
            for (const auto& sg : lat.elements()) {
                const cxd lhs = overlap(w, apply_m(nu, sg, g, v));
                const cxd rhs = overlap(apply_m_adjoint(nu, sg, g, w), v);
                CHECK(std::abs(lhs - rhs) <
                      1e-11 * std::max(1.0, std::abs(lhs)));
            }
    }
}

TEST_CASE("diagonal blocks never expand vectors") {
    for (auto [da, dc] : {std::pair{2, 3}, std::pair{3, 2}}) {
        const Gate g = test_gate(da, dc, 81);
        for (int k = 1; k <= 3; ++k) {
            NcLattice lat(k);
            auto v = random_replica(da, k, 90 + unsigned(k));
            const double nv = v.data.norm();
            for (const auto& sg : lat.elements())
                CHECK(apply_m(sg, sg, g, v).data.norm() <=
                      nv * (1.0 + 1e-10));
        }
    }
}

TEST_CASE("adjoint matches the conjugate-transposed dense operator") {
    const Gate g = test_gate(2, 2, 55);
    const int k = 2;
    NcLattice lat(k);
    const int n = ipw(2, 2 * k);
    for (const auto& nu : lat.elements())
        for (const auto& sg : lat.elements()) {
            Eigen::MatrixXcd dense(n, n);
            for (int c = 0; c < n; ++c) {
                ReplicaVector e = zero_replica(2, k);
                e.data[c] = 1.0;
                dense.col(c) = apply_m(nu, sg, g, e).data;
            }
            auto v = random_replica(2, k, 95);
            const auto adj = apply_m_adjoint(nu, sg, g, v);
            CHECK(rel_err(adj.data, (dense.adjoint() * v.data).eval()) <
                  1e-12);
        }
}

TEST_CASE("dense and on-the-fly paths agree") {
    const Gate g = test_gate(2, 3, 44);
    for (int k = 1; k <= 3; ++k) {
        NcLattice lat(k);
        auto v = random_replica(2, k, 70 + unsigned(k));
        for (const auto& nu : lat.elements())
            for (const auto& sg : lat.elements()) {
                auto a = apply_m(nu, sg, g, v, ApplyPath::dense);
                auto b = apply_m(nu, sg, g, v, ApplyPath::on_the_fly);
                CHECK(rel_err(a.data, b.data) < 1e-12);
            }
    }
}

TEST_CASE("operator cache reuses, evicts, and respects its budget") {
    const auto old_budget = m_cache_stats().budget;
    clear_m_cache();
    const Gate g = test_gate(2, 2, 55);
    const auto one = NcPartition::identity(2);
    const auto cyc = NcPartition::full_cycle(2);
    auto v = random_replica(2, 2, 80);

    apply_m(one, one, g, v, ApplyPath::dense);
    auto s1 = m_cache_stats();
    CHECK(s1.misses == 1);
    CHECK(s1.hits == 0);
    apply_m(one, one, g, v, ApplyPath::dense);
    auto s2 = m_cache_stats();
    CHECK(s2.hits == 1);
    CHECK(s2.bytes == 16u * 16u * sizeof(cxd));

    // Room for exactly one 16x16 matrix.
    set_m_cache_budget(5000);
    apply_m(cyc, one, g, v, ApplyPath::dense);
    auto s3 = m_cache_stats();
    CHECK(s3.evictions >= 1);
    CHECK(s3.bytes <= 5000);
    apply_m(one, one, g, v, ApplyPath::dense);
    CHECK(m_cache_stats().misses >= 3);

    set_m_cache_budget(old_budget);
    clear_m_cache();
}

TEST_CASE("dense path enforces its size and budget limits") {
    const Gate g32 = test_gate(3, 2, 66);
    auto big = zero_replica(3, 4);  // 3^8 = 6561 > 4096
    CHECK_THROWS_AS(apply_m(NcPartition::identity(4), NcPartition::identity(4),
                            g32, big, ApplyPath::dense),
                    std::length_error);

    const auto old_budget = m_cache_stats().budget;
    set_m_cache_budget(1000);
    const Gate g = test_gate(2, 2, 67);
    auto v = random_replica(2, 2, 90);
    CHECK_THROWS_AS(apply_m(NcPartition::identity(2), NcPartition::identity(2),
                            g, v, ApplyPath::dense),
                    std::length_error);
    // Automatic falls back to the contraction path instead of throwing.
    auto ok = apply_m(NcPartition::identity(2), NcPartition::identity(2), g, v);
    CHECK(ok.size() == 16);
    set_m_cache_budget(old_budget);
    clear_m_cache();
}

TEST_CASE("constructors validate their inputs") {
    Eigen::MatrixXcd nh(2, 2);
    nh << cxd(0, 0), cxd(1, 0), cxd(0, 0), cxd(0, 0);
    CHECK_THROWS_AS(Observable::from_matrix(nh), std::invalid_argument);
    CHECK_NOTHROW(Observable::from_matrix((nh + nh.adjoint()) / 2.0));

    Eigen::MatrixXcd nu = Eigen::MatrixXcd::Identity(4, 4);
    nu(0, 0) = 2.0;
    CHECK_THROWS_AS(Gate::from_matrix(2, 2, nu), std::invalid_argument);
    CHECK_THROWS_AS(Gate::from_matrix(2, 3, Eigen::MatrixXcd::Identity(4, 4)),
                    std::invalid_argument);

    CHECK_THROWS_AS(zero_replica(1, 2), std::invalid_argument);
    CHECK_THROWS_AS(zero_replica(2, 0), std::invalid_argument);
    CHECK_THROWS_AS(zero_replica(2, 11), std::invalid_argument);

    auto v2 = zero_replica(2, 2);
    auto v3 = zero_replica(2, 3);
    CHECK_THROWS_AS(overlap(v2, v3), std::invalid_argument);
    CHECK_THROWS_AS(apply_slot(v2, Eigen::MatrixXcd::Identity(3, 3), 0,
                               Leg::forward),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_slot(v2, Eigen::MatrixXcd::Identity(2, 2), 2,
                               Leg::forward),
                    std::invalid_argument);

    const Gate g = test_gate(2, 2, 68);
    CHECK_THROWS_AS(apply_m(NcPartition::identity(2),
                            NcPartition::identity(3), g, v2),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_m(NcPartition::identity(3),
                            NcPartition::identity(3), g, v2),
                    std::invalid_argument);

    CHECK(Observable::identity(2).is_traceless() == false);
    Eigen::MatrixXcd z(2, 2);
    z << cxd(1), cxd(0), cxd(0), cxd(-1);
    CHECK(Observable::from_matrix(z).is_traceless());

    std::vector<Observable> mixed = {Observable::identity(2),
                                     Observable::identity(3)};
    CHECK_THROWS_AS(dress_bottom(mixed, NcPartition::identity(2)),
                    std::invalid_argument);
    CHECK_THROWS_AS(dress_top(mixed), std::invalid_argument);
}

TEST_CASE("gate fingerprints separate content and dimensions") {
    const Gate a = test_gate(2, 2, 71);
    const Gate b = test_gate(2, 2, 72);
    CHECK(a.fingerprint() != b.fingerprint());
    CHECK(a.fingerprint() == test_gate(2, 2, 71).fingerprint());
    CHECK(a.fingerprint() != a.adjoint().fingerprint());
}

}  // TEST_SUITE
