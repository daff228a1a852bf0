#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "kotoc/apply_m.hpp"
#include "kotoc/channel.hpp"
#include "kotoc/gate_library.hpp"
#include "kotoc/multichain.hpp"
#include "kotoc/rng.hpp"

using namespace kotoc;

namespace {

Observable rand_obs(int d, std::uint64_t seed) {
    RandomStream rs(stream_key({31337, seed}));
    Eigen::MatrixXcd z(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) z(i, j) = rs.complex_gaussian();
    return Observable::from_matrix((z + z.adjoint()) / 2.0);
}

Observable traceless(const Observable& o) {
    return Observable::from_matrix(
        o.m - (o.m.trace() / static_cast<double>(o.d)) *
                  Eigen::MatrixXcd::Identity(o.d, o.d));
}

std::vector<Observable> tuple_of(const Observable& o, int k) {
    return std::vector<Observable>(k, o);
}

struct EigenInput {
    Observable a;
    Observable b;
    double lambda = 0.0;
};

EigenInput eigen_input(const Gate& g) {
    const ChannelMatrix ch = build_channel(g);
    const auto diag = diagnose(g);
    REQUIRE(std::abs(diag.lambda_sub.imag()) < 1e-10);
    const auto pair = eigenoperators(diag, ch);
    return {Observable::from_matrix(pair.a), Observable::from_matrix(pair.b),
            pair.lambda.real()};
}

cxd alternating_trace(const std::vector<Observable>& a,
                      const std::vector<Observable>& b) {
    Eigen::MatrixXcd prod =
        Eigen::MatrixXcd::Identity(a.front().d, a.front().d);
    for (std::size_t i = 0; i < a.size(); ++i) prod *= a[i].m * b[i].m;
    return prod.trace();
}

}  // namespace

TEST_SUITE("multichain") {

TEST_CASE("weingarten factors at the handwritten points") {
    for (int k = 1; k <= 4; ++k)
        for (int dc : {2, 3, 5})
            for (const NcPartition& sg : enumerate_nc(k))
                CHECK(weingarten_factor(sg, sg, dc) == 1.0);

    CHECK(weingarten_factor(NcPartition::identity(2),
                            NcPartition::full_cycle(2), 3) ==
          doctest::Approx(-1.0 / 3));
    CHECK(weingarten_factor(NcPartition::identity(3),
                            NcPartition::full_cycle(3), 3) ==
          doctest::Approx(2.0 / 9));
    CHECK_THROWS_AS(weingarten_factor(NcPartition::identity(2),
                                      NcPartition::identity(3), 2),
                    std::invalid_argument);
}

TEST_CASE("order-one series is the iterated channel") {
    for (auto [d, seed] : {std::pair{2, 11u}, std::pair{3, 3u}}) {
        const Gate g = gate_haar(d, d, seed);
        const Observable a = rand_obs(d, 1), b = rand_obs(d, 2);
        const auto series = kotoc_multichain(g, {a}, {b}, 1, 10);

        const ChannelMatrix ch = build_channel(g);
        Eigen::VectorXcd v(d * d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) v[i + d * j] = a.m(i, j);
        for (int t = 0; t <= 10; ++t) {
            Eigen::MatrixXcd mt(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) mt(i, j) = v[i + d * j];
            const cxd want = (b.m * mt).trace() / double(d);
            CHECK(std::abs(series.values[t] - want) <
                  1e-12 * std::max(1.0, std::abs(want)));
            v = ch.m * v;
        }
    }
}

TEST_CASE("time zero anchors to the alternating trace") {
    const Gate g = gate_haar(2, 3, 4);
    for (int k : {2, 3}) {
        std::vector<Observable> a, b;
        for (int i = 0; i < k; ++i) {
            a.push_back(rand_obs(2, 10 + unsigned(i)));
            b.push_back(rand_obs(2, 20 + unsigned(i)));
        }
        const auto series = kotoc_multichain(g, a, b, k, 0);
        CHECK(series.t_values == std::vector<int>{0});
        CHECK(std::abs(series.values[0] - alternating_trace(a, b) / 2.0) <
              1e-12);
    }
}

TEST_CASE("eigenoperator closed form at order two") {
    for (auto [d, seed] : {std::pair{3, 6u}, std::pair{2, 10u}}) {
        const Gate g = gate_haar(d, d, seed);
        const EigenInput in = eigen_input(g);
        const auto a2 = tuple_of(in.a, 2), b2 = tuple_of(in.b, 2);

        const auto bottom = dress_bottom(a2, NcPartition::identity(2));
        const auto top = dress_top(b2);
        const cxd wall = overlap(
            top, apply_m(NcPartition::full_cycle(2),
                         NcPartition::identity(2), g, bottom));
        const cxd anchor = overlap(top, bottom);

        const auto series = kotoc_multichain(g, a2, b2, 2, 5);
        for (int t = 1; t <= 5; ++t) {
            const double l2 = in.lambda * in.lambda;
            const cxd want = std::pow(l2, t - 1) * double(t) * double(d) *
                                 wall / double(d) -
                             std::pow(l2, t) * double(t - 1) * anchor /
                                 double(d);
            CHECK(std::abs(series.values[t] - want) <
                  1e-9 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST_CASE("chain audit enumerates the domain-wall expansion") {
    const Gate g = gate_haar(2, 2, 10);
    const Observable a = rand_obs(2, 5), b = rand_obs(2, 6);
    const auto audit = chain_audit(g, tuple_of(a, 2), tuple_of(b, 2), 2, 3);
    REQUIRE(audit.size() == 5);

    std::vector<double> weights;
    for (const auto& c : audit) {
        c.chain.validate();
        weights.push_back(c.weight);
    }
    std::sort(weights.begin(), weights.end());
    CHECK(weights[0] == doctest::Approx(-0.5));
    CHECK(weights[1] == doctest::Approx(-0.5));
    CHECK(weights[2] == doctest::Approx(1.0));
    CHECK(weights[3] == doctest::Approx(1.0));
    CHECK(weights[4] == doctest::Approx(1.0));
}

TEST_CASE("prefix sharing matches per-chain evaluation") {
    for (auto [d, k, t, seed] :
         {std::tuple{2, 3, 3, 7u}, std::tuple{3, 2, 4, 6u}}) {
        const Gate g = gate_haar(d, d, seed);
        std::vector<Observable> a, b;
        for (int i = 0; i < k; ++i) {
            a.push_back(rand_obs(d, 40 + unsigned(i)));
            b.push_back(rand_obs(d, 50 + unsigned(i)));
        }
        const auto audit = chain_audit(g, a, b, k, t);
        cxd total = 0.0;
        for (const auto& c : audit) total += c.weight * c.value;
        total *= std::pow(double(d), k - 1) / double(d);

        const auto series = kotoc_multichain(g, a, b, k, t);
        CHECK(std::abs(series.values[t] - total) <
              1e-11 * std::max(1.0, std::abs(total)));
    }
}

TEST_CASE("dual-unitary gates kill traceless correlations") {
    const Gate g = gate_dual_unitary_qubit(0.6, 3);
    const Observable a = traceless(rand_obs(2, 61));
    const Observable b = traceless(rand_obs(2, 62));

    const auto s1 = kotoc_multichain(g, {a}, {b}, 1, 4);
    for (int t = 1; t <= 4; ++t) CHECK(std::abs(s1.values[t]) < 1e-12);

    for (int k : {2, 3}) {
        const auto s =
            kotoc_multichain(g, tuple_of(a, k), tuple_of(b, k), k, 4);
        for (int t = 2; t <= 4; ++t) CHECK(std::abs(s.values[t]) < 1e-12);
    }
}

TEST_CASE("per-chain values respect the decay envelope") {
    const Gate g = gate_haar(3, 3, 6);
    const EigenInput in = eigen_input(g);

    const auto one = chain_audit(g, {in.a}, {in.b}, 1, 6);
    REQUIRE(one.size() == 1);
    CHECK(one[0].within_bound);

    const auto audit =
        chain_audit(g, tuple_of(in.a, 2), tuple_of(in.b, 2), 2, 4);
    for (const auto& c : audit) CHECK(c.within_bound);
}

TEST_CASE("imaginary parts are recorded and stay small") {
    const Gate g = gate_haar(2, 2, 5);
    const Observable a = rand_obs(2, 71), b = rand_obs(2, 72);
    const auto s = kotoc_multichain(g, tuple_of(a, 2), tuple_of(b, 2), 2, 5);
    CHECK(s.max_imag < 1e-9);
    CHECK(s.method == "multichain");
    CHECK(s.gate_hash == g.fingerprint());
}

TEST_CASE("series values do not depend on the horizon") {
    const Gate g = gate_haar(2, 2, 9);
    const Observable a = rand_obs(2, 81), b = rand_obs(2, 82);
    const auto small = kotoc_multichain(g, tuple_of(a, 2), tuple_of(b, 2), 2, 3);
    const auto large = kotoc_multichain(g, tuple_of(a, 2), tuple_of(b, 2), 2, 6);
    for (int t = 0; t <= 3; ++t) CHECK(small.values[t] == large.values[t]);
}

TEST_CASE("traceless series sit under a fitted decay envelope") {
    const Gate g = gate_haar(3, 3, 6);
    const double r = diagnose(g).restricted_norm;
    std::vector<Observable> a, b;
    for (int i = 0; i < 2; ++i) {
        a.push_back(traceless(rand_obs(3, 90 + unsigned(i))));
        b.push_back(traceless(rand_obs(3, 95 + unsigned(i))));
    }
    const auto s = kotoc_multichain(g, a, b, 2, 8);
    double fitted = 0.0;
    for (int t = 1; t <= 3; ++t)
        fitted = std::max(fitted, std::abs(s.values[t]) /
                                      (double(t) * std::pow(r, 2 * t)));
    for (int t = 4; t <= 8; ++t)
        CHECK(std::abs(s.values[t]) <=
              fitted * double(t) * std::pow(r, 2 * t) * (1.0 + 1e-9));
}

TEST_CASE("late-time ratios approach the eigenvalue power") {
    // polynomial prefactors leave O(1/t) corrections, so probe at a t
    // where the signal is still far above the floating-point floor
    {
        const Gate g = gate_haar(3, 3, 6);
        const EigenInput in = eigen_input(g);
        const auto s =
            kotoc_multichain(g, tuple_of(in.a, 2), tuple_of(in.b, 2), 2, 15);
        const double l2 = in.lambda * in.lambda;
        const auto ratio = [&](int t) {
            return std::abs(s.values[t + 1] / s.values[t]);
        };
        CHECK(std::abs(ratio(14) - l2) < 0.25 * l2);
        CHECK(std::abs(ratio(14) - l2) < std::abs(ratio(7) - l2));
    }
    {
        const Gate g = gate_haar(2, 2, 10);
        const EigenInput in = eigen_input(g);
        const auto s =
            kotoc_multichain(g, tuple_of(in.a, 3), tuple_of(in.b, 3), 3, 13);
        const double l3 = std::pow(in.lambda, 3);
        const auto ratio = [&](int t) {
            return std::abs(s.values[t + 1] / s.values[t]);
        };
        CHECK(std::abs(ratio(12) - l3) < 0.25 * l3);
        CHECK(std::abs(ratio(12) - l3) < std::abs(ratio(6) - l3));
    }
}

TEST_CASE("caps and validation") {
    const Observable a2 = rand_obs(2, 1), a3 = rand_obs(3, 1);
    const Gate g3 = gate_haar(3, 3, 1), g2 = gate_haar(2, 2, 1);

    CHECK_THROWS_AS(
        kotoc_multichain(g3, tuple_of(a3, 5), tuple_of(a3, 5), 5, 2),
        std::length_error);
    CHECK_THROWS_AS(
        kotoc_multichain(g2, tuple_of(a2, 6), tuple_of(a2, 6), 6, 2),
        std::length_error);
    CHECK_THROWS_AS(
        kotoc_multichain(g2, tuple_of(a2, 2), tuple_of(a2, 2), 2, 65),
        std::length_error);
    CHECK_THROWS_AS(
        kotoc_multichain(g2, tuple_of(a2, 3), tuple_of(a2, 2), 2, 2),
        std::invalid_argument);
    CHECK_THROWS_AS(
        kotoc_multichain(g2, tuple_of(a3, 2), tuple_of(a3, 2), 2, 2),
        std::invalid_argument);
    CHECK_THROWS_AS(
        chain_audit(g2, tuple_of(a2, 5), tuple_of(a2, 5), 5, 64),
        std::length_error);
}

}  // TEST_SUITE
