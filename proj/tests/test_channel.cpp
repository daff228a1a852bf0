#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "kotoc/apply_m.hpp"
#include "kotoc/channel.hpp"
#include "kotoc/gate_library.hpp"
#include "kotoc/rng.hpp"

using namespace kotoc;

namespace {

Observable random_obs(int d, std::uint64_t seed) {
    RandomStream rs(stream_key({777, seed}));
    Eigen::MatrixXcd z(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) z(i, j) = rs.complex_gaussian();
    return Observable::from_matrix((z + z.adjoint()) / 2.0);
}

Eigen::VectorXcd vec_of(const Eigen::MatrixXcd& a) {
    const int d = static_cast<int>(a.rows());
    Eigen::VectorXcd v(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) v[i + d * j] = a(i, j);
    return v;
}

Gate cnot_gate() {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(4, 4);
    for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 2; ++c) u(a * 2 + (c ^ a), a * 2 + c) = 1.0;
    return Gate::from_matrix(2, 2, u);
}

// Gate controlled on the bath site applying shifted clock unitaries;
// its channel has spectrum {1, w, w^2, 0, ...} with w = exp(2 pi i / 3).
Gate shift_clock_gate() {
    const cxd w = std::exp(cxd(0.0, 2.0 * std::numbers::pi / 3.0));
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(9, 9);
    for (int c = 0; c < 3; ++c)
        for (int ain = 0; ain < 3; ++ain)
            u(((ain + 1) % 3) * 3 + c, ain * 3 + c) = std::pow(w, c * ain);
    return Gate::from_matrix(3, 3, u);
}

double min_choi_eigenvalue(const Gate& g) {
    const Eigen::MatrixXcd choi = choi_matrix(build_channel(g));
    REQUIRE((choi - choi.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(choi);
    return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_SUITE("channel") {

TEST_CASE("channel matrix matches the single-replica map") {
    for (auto [da, dc] : {std::pair{2, 3}, std::pair{3, 2}, std::pair{3, 3}}) {
        const Gate g = gate_haar(da, dc, 42 + da + 10 * dc);
        const ChannelMatrix ch = build_channel(g);
        const auto one = NcPartition::identity(1);
        for (int rep = 0; rep < 3; ++rep) {
            const Observable a = random_obs(da, 10 * rep + da);
            const Eigen::VectorXcd via_matrix = ch.m * vec_of(a.m);
            const auto via_replica = apply_m(one, one, g, dress_bottom({a}, one));
            CHECK((via_matrix - via_replica.data).cwiseAbs().maxCoeff() <
                  1e-12);
        }
    }
}

TEST_CASE("swap gives the projector onto the identity") {
    for (int d : {2, 3}) {
        const ChannelMatrix ch = build_channel(gate_swap(d));
        Eigen::VectorXcd one = Eigen::VectorXcd::Zero(d * d);
        for (int i = 0; i < d; ++i) one[i + d * i] = 1.0;
        const Eigen::MatrixXcd proj = one * one.transpose() / double(d);
        CHECK((ch.m - proj).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("product gates conjugate by the site factor") {
    const Eigen::MatrixXcd ua = haar_unitary(2, stream_key({1, 2}));
    const Eigen::MatrixXcd uc = haar_unitary(3, stream_key({3, 4}));
    const Gate g =
        Gate::from_matrix(2, 3, Eigen::kroneckerProduct(ua, uc).eval());
    const ChannelMatrix ch = build_channel(g);
    const Eigen::MatrixXcd want =
        Eigen::kroneckerProduct(ua.conjugate(), ua).eval();
    CHECK((ch.m - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ergodicity classes cover all five cases") {
    // scalar action on the site: every eigenvalue of M is one
    const Eigen::MatrixXcd ua =
        std::exp(cxd(0.0, 0.3)) * Eigen::MatrixXcd::Identity(2, 2);
    const Eigen::MatrixXcd uc = haar_unitary(3, stream_key({9, 9}));
    const Gate product =
        Gate::from_matrix(2, 3, Eigen::kroneckerProduct(ua, uc).eval());
    CHECK(diagnose(product).ergodicity_class ==
          ErgodicityClass::non_interacting);

    const Gate cz = gate_controlled_phase(2, 2, std::numbers::pi);
    const auto dcz = diagnose(cz);
    CHECK(dcz.ergodicity_class == ErgodicityClass::non_ergodic);
    CHECK(std::abs(dcz.lambda_sub - cxd(1.0)) < 1e-9);

    const auto dsc = diagnose(shift_clock_gate());
    CHECK(dsc.ergodicity_class == ErgodicityClass::ergodic_non_mixing);
    CHECK(std::abs(std::abs(dsc.lambda_sub) - 1.0) < 1e-9);
    CHECK(std::abs(dsc.lambda_sub - cxd(1.0)) > 1e-3);

    const auto dh = diagnose(gate_haar(3, 3, 1));
    CHECK(dh.ergodicity_class == ErgodicityClass::ergodic_mixing);
    CHECK(std::abs(dh.lambda_sub) > 1e-8);
    CHECK(std::abs(dh.lambda_sub) < 1.0 - 1e-8);

    for (int d : {2, 3}) {
        const auto dsw = diagnose(gate_swap(d));
        CHECK(dsw.ergodicity_class == ErgodicityClass::maximally_ergodic);
        CHECK(std::abs(dsw.lambda_sub) < 1e-10);
        CHECK(dsw.dual_unitary);
    }
}

TEST_CASE("diagnostics invariants hold across the library") {
    const std::vector<Gate> gates = {
        gate_identity(2, 2),      gate_swap(3),
        cnot_gate(),              gate_controlled_phase(2, 2, 1.1),
        gate_haar(2, 2, 5),       gate_haar(3, 3, 2),
        gate_haar(2, 3, 3),       shift_clock_gate(),
        gate_dual_unitary_qubit(0.4, 7),
        gate_du_perturbed(2, 0.5, 0.3, 1)};
    for (const Gate& g : gates) {
        const auto d = diagnose(g);
        CHECK(static_cast<int>(d.eigenvalues.size()) == g.d_a * g.d_a);
        CHECK(std::abs(d.lambda_sub) <= d.restricted_norm + 1e-10);
        for (std::size_t i = 0; i + 1 < d.eigenvalues.size(); ++i)
            CHECK(std::abs(d.eigenvalues[i]) >=
                  std::abs(d.eigenvalues[i + 1]) - 1e-12);
        // spectrum closed under conjugation
        for (const cxd& v : d.eigenvalues) {
            double best = 1e9;
            for (const cxd& w : d.eigenvalues)
                best = std::min(best, std::abs(w - std::conj(v)));
            CHECK(best < 1e-10);
        }
    }

    const Gate g = gate_haar(2, 2, 5);
    CHECK_THROWS_AS(diagnose(g, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(diagnose(g, 0.5), std::invalid_argument);
}

TEST_CASE("restricted norm agrees with the eigenvalue for normal channels") {
    for (const Gate& g :
         {gate_swap(2), gate_controlled_phase(2, 2, std::numbers::pi),
          shift_clock_gate()}) {
        const auto d = diagnose(g);
        CHECK(std::abs(std::abs(d.lambda_sub) - d.restricted_norm) < 1e-10);
    }
}

TEST_CASE("operator entropy has the handwritten values") {
    CHECK(operator_entropy(gate_identity(2, 2)) == doctest::Approx(0.0));
    CHECK(operator_entropy(gate_identity(3, 3)) == doctest::Approx(0.0));
    CHECK(operator_entropy(gate_swap(2)) == doctest::Approx(0.75));
    CHECK(operator_entropy(gate_swap(3)) == doctest::Approx(1.0 - 1.0 / 9));
    CHECK(operator_entropy(cnot_gate()) == doctest::Approx(0.5));

    for (unsigned s = 1; s <= 20; ++s) {
        const Gate g = gate_haar(2, 3, s);
        const double e = operator_entropy(g);
        CHECK(e >= 0.0);
        CHECK(e <= 1.0 - 1.0 / 4 + 1e-12);
    }
    // maximal entropy is equivalent to dual-unitarity
    for (double j : {0.0, 0.3, 0.8})
        CHECK(operator_entropy(gate_dual_unitary_qubit(j, 11)) ==
              doctest::Approx(0.75));
}

TEST_CASE("mixing bound endpoints and absence") {
    CHECK(*mixing_bound(gate_swap(2)) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(*mixing_bound(cnot_gate()) == doctest::Approx(1.0));
    CHECK(*mixing_bound(gate_identity(2, 2)) ==
          doctest::Approx(std::sqrt(3.0)));
    CHECK(!mixing_bound(gate_haar(3, 2, 1)).has_value());
    CHECK(mixing_bound(gate_haar(2, 3, 1)).has_value());
}

TEST_CASE("bound law over Haar samples") {
    for (int d : {2, 3})
        for (unsigned s = 1; s <= 100; ++s) {
            const Gate g = gate_haar(d, d, 1000 + s);
            const auto diag = diagnose(g);
            if (diag.mixing_bound)
                CHECK(std::abs(diag.lambda_sub) <= *diag.mixing_bound + 1e-10);
        }
}

TEST_CASE("choi matrices are positive semidefinite") {
    for (const Gate& g :
         {gate_identity(2, 2), gate_swap(2), gate_swap(3),
          gate_controlled_phase(2, 2, std::numbers::pi), cnot_gate(),
          gate_dual_unitary_qubit(0.3, 5), gate_du_perturbed(2, 0.5, 0.3, 1),
          gate_du_perturbed(3, 0.7, 0.2, 2), gate_haar(2, 3, 3),
          gate_haar(3, 2, 4)})
        CHECK(min_choi_eigenvalue(g) >= -1e-10);
    for (unsigned s = 1; s <= 50; ++s)
        CHECK(min_choi_eigenvalue(gate_haar(2, 2, 2000 + s)) >= -1e-10);
}

TEST_CASE("dual-unitarity detection") {
    CHECK(is_dual_unitary(gate_swap(2)));
    CHECK(is_dual_unitary(gate_swap(3)));
    CHECK(!is_dual_unitary(gate_identity(2, 2)));
    CHECK(!is_dual_unitary(gate_controlled_phase(2, 2, std::numbers::pi)));
    CHECK_THROWS_AS(is_dual_unitary(gate_haar(2, 3, 1)),
                    std::invalid_argument);

    for (double j : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
        CHECK(is_dual_unitary(gate_dual_unitary_qubit(j, 0)));
        CHECK(is_dual_unitary(gate_dual_unitary_qubit(j, 13)));
    }
    for (double j : {0.0, 0.5, 1.3}) {
        CHECK(is_dual_unitary(gate_du_perturbed(2, j, 0.0, 1)));
        CHECK(is_dual_unitary(gate_du_perturbed(3, j, 0.0, 1)));
        CHECK(is_dual_unitary(gate_du_perturbed(4, j, 0.0, 1)));
    }
    CHECK(!is_dual_unitary(gate_du_perturbed(2, 0.5, 0.4, 1)));

    // dual-unitary implies the identity-projector channel
    const ChannelMatrix ch = build_channel(gate_dual_unitary_qubit(0.7, 3));
    Eigen::VectorXcd one = Eigen::VectorXcd::Zero(4);
    one[0] = one[3] = 1.0;
    CHECK((ch.m - one * one.transpose() / 2.0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("eigenoperator pair for a real subleading eigenvalue") {
    for (auto [d, seed] : {std::pair{3, 6u}, std::pair{2, 10u}}) {
        const Gate g = gate_haar(d, d, seed);
        const ChannelMatrix ch = build_channel(g);
        const auto diag = diagnose(g);
        REQUIRE(std::abs(diag.lambda_sub.imag()) < 1e-9);

        const auto pair = eigenoperators(diag, ch);
        CHECK(std::abs(pair.lambda - diag.lambda_sub) < 1e-10);
        CHECK((ch.m * vec_of(pair.a) - pair.lambda * vec_of(pair.a))
                  .cwiseAbs()
                  .maxCoeff() < 1e-10);
        CHECK(std::abs(pair.a.trace()) < 1e-10);
        CHECK(std::abs((pair.b * pair.a).trace() / double(d) - 1.0) < 1e-10);
        CHECK((pair.a - pair.a.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((pair.b - pair.b.adjoint()).cwiseAbs().maxCoeff() < 1e-10);

        // left eigen-relation through the trace pairing
        for (int rep = 0; rep < 3; ++rep) {
            const Observable x = random_obs(d, 50 + rep);
            const Eigen::VectorXcd mx = ch.m * vec_of(x.m);
            Eigen::MatrixXcd mxm(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) mxm(i, j) = mx[i + d * j];
            const cxd lhs = (pair.b * mxm).trace();
            const cxd rhs = pair.lambda * (pair.b * x.m).trace();
            CHECK(std::abs(lhs - rhs) < 1e-9);
        }
    }
}

TEST_CASE("degenerate subleading modulus refuses without an index") {
    const Gate g = gate_haar(2, 2, 2);  // complex conjugate pair
    const ChannelMatrix ch = build_channel(g);
    const auto diag = diagnose(g);
    REQUIRE(std::abs(diag.lambda_sub.imag()) > 1e-3);

    CHECK_THROWS_AS(eigenoperators(diag, ch), std::domain_error);

    const auto forced = eigenoperators(diag, ch, 1);
    CHECK(std::abs(forced.lambda.imag()) > 1e-3);
    CHECK((ch.m * vec_of(forced.a) - forced.lambda * vec_of(forced.a))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    CHECK(std::abs((forced.b * forced.a).trace() / 2.0 - 1.0) < 1e-10);

    // conjugate mode carries the conjugate-transposed eigenoperator
    const auto partner = eigenoperators(diag, ch, 2);
    CHECK(std::abs(partner.lambda - std::conj(forced.lambda)) < 1e-10);
    const cxd ip = (forced.a.adjoint().array().conjugate() *
                    partner.a.array())
                       .sum();
    CHECK(std::abs(ip) / (forced.a.norm() * partner.a.norm()) ==
          doctest::Approx(1.0).epsilon(1e-8));

    // index 0 is the trivial mode: the identity operator
    const auto trivial = eigenoperators(diag, ch, 0);
    CHECK(std::abs(trivial.lambda - cxd(1.0)) < 1e-10);
    CHECK((trivial.a - (trivial.a.trace() / 2.0) *
                           Eigen::MatrixXcd::Identity(2, 2))
              .cwiseAbs()
              .maxCoeff() < 1e-10);

    CHECK_THROWS_AS(eigenoperators(diag, ch, 99), std::invalid_argument);
}

TEST_CASE("gate library is deterministic and validates") {
    const Gate a = gate_haar(3, 3, 7);
    const Gate b = gate_haar(3, 3, 7);
    CHECK(a.u == b.u);
    CHECK(gate_haar(3, 3, 8).u != a.u);

    Eigen::MatrixXcd sw(4, 4);
    sw << 1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 1;
    CHECK((gate_swap(2).u - sw).cwiseAbs().maxCoeff() == 0.0);

    const Gate cz = gate_controlled_phase(2, 2, std::numbers::pi);
    Eigen::MatrixXcd czm = Eigen::MatrixXcd::Identity(4, 4);
    czm(3, 3) = -1.0;
    CHECK((cz.u - czm).cwiseAbs().maxCoeff() < 1e-15);

    const std::map<std::string, std::string> none;
    CHECK_THROWS_AS(gate_library("warp", none, 1), std::invalid_argument);
    CHECK_THROWS_AS(gate_library("du_perturbed", none, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(gate_library("controlled_phase", {{"phi", "snail"}}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(gate_library("haar_random", {{"d_a", "2.5"}}, 1),
                    std::invalid_argument);

    const Gate via_lib = gate_library(
        "du_perturbed", {{"d", "2"}, {"J", "0.5"}, {"eps", "0.1"}}, 3);
    CHECK(via_lib.u == gate_du_perturbed(2, 0.5, 0.1, 3).u);
}

TEST_CASE("gate and observable files round-trip") {
    const char* gpath = "/tmp/kotoc_test_gate.json";
    const char* opath = "/tmp/kotoc_test_obs.json";
    const Gate g = gate_haar(2, 3, 21);
    save_gate(gpath, g);
    const Gate back = load_gate(gpath);
    CHECK(back.d_a == 2);
    CHECK(back.d_c == 3);
    CHECK((back.u - g.u).cwiseAbs().maxCoeff() < 1e-15);

    const Observable obs = random_obs(3, 99);
    save_observable(opath, obs);
    const Observable oback = load_observable(opath);
    CHECK((oback.m - obs.m).cwiseAbs().maxCoeff() < 1e-15);

    CHECK_THROWS_AS(load_gate("/tmp/kotoc_does_not_exist.json"),
                    std::runtime_error);

    std::FILE* f = std::fopen(gpath, "w");
    std::fputs("{\"d_a\": 2, \"d_c\": 2, \"matrix\": [[1,0],[0,0],[0,0],"
               "[1,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0],"
               "[0,0],[0,0],[0,0],[1,0]]}",
               f);
    std::fclose(f);
    CHECK_THROWS_AS(load_gate(gpath), std::invalid_argument);

    f = std::fopen(gpath, "w");
    std::fputs("{not json", f);
    std::fclose(f);
    CHECK_THROWS_AS(load_gate(gpath), std::runtime_error);

    std::remove(gpath);
    std::remove(opath);
}

}  // TEST_SUITE
