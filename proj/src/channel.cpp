#include "kotoc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace kotoc {

namespace {

Eigen::VectorXcd vectorized_identity(int d) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(d * d);
    for (int i = 0; i < d; ++i) v[i + d * i] = 1.0;
    return v;
}

// (A|C) operator reshuffle: rows grouped by the two A indices, columns by
// the two C indices.  Its singular values squared are the operator
// Schmidt coefficients.
Eigen::MatrixXcd reshuffle(const Gate& g) {
    const int da = g.d_a, dc = g.d_c;
    Eigen::MatrixXcd s(da * da, dc * dc);
    for (int i = 0; i < da; ++i)
        for (int p = 0; p < da; ++p)
            for (int cp = 0; cp < dc; ++cp)
                for (int c = 0; c < dc; ++c)
                    s(i + da * p, cp + dc * c) =
                        g.u(i * dc + cp, p * dc + c);
    return s;
}

struct Decomposition {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd right;  // columns
    Eigen::MatrixXcd left;   // rows of right^{-1}
    std::vector<int> order;  // modulus-descending
    int trivial = -1;        // position in `order`
};

// The trivial mode is found by eigenvector geometry, not eigenvalue
// proximity alone: among unit-modulus eigenvalues, the one whose
// eigenvector points along the vectorized identity.  If the near-1
// eigenspace is degenerate (every eigenvector individually fails the
// overlap test) the identity direction is accepted as long as it lies in
// that eigenspace.
Decomposition decompose(const ChannelMatrix& ch, double tol) {
    const int d = ch.d_a;
    const int n = d * d;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(ch.m);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("channel eigendecomposition failed");

    Decomposition dec;
    dec.values = es.eigenvalues();
    dec.right = es.eigenvectors();
    dec.left = dec.right.inverse();
    dec.order.resize(n);
    std::iota(dec.order.begin(), dec.order.end(), 0);
    std::sort(dec.order.begin(), dec.order.end(), [&](int a, int b) {
        const double ma = std::abs(dec.values[a]);
        const double mb = std::abs(dec.values[b]);
        if (ma != mb) return ma > mb;
        if (dec.values[a].real() != dec.values[b].real())
            return dec.values[a].real() > dec.values[b].real();
        return dec.values[a].imag() > dec.values[b].imag();
    });

    const Eigen::VectorXcd one = vectorized_identity(d);
    int best = -1;
    double best_overlap = 0.0;
    for (int pos = 0; pos < n; ++pos) {
        const int i = dec.order[pos];
        if (std::abs(std::abs(dec.values[i]) - 1.0) > tol) continue;
        const Eigen::VectorXcd& v = dec.right.col(i);
        const double ov = std::norm(one.dot(v)) /
                          (static_cast<double>(d) * v.squaredNorm());
        if (ov > best_overlap) {
            best_overlap = ov;
            best = pos;
        }
    }
    if (best >= 0 && best_overlap > 0.99) {
        dec.trivial = best;
        return dec;
    }

    // Degenerate unit eigenspace: check that the identity lies in the
    // span of the near-1 eigenvectors.
    std::vector<int> near_one;
    for (int i = 0; i < n; ++i)
        if (std::abs(dec.values[i] - cxd(1.0)) <= tol) near_one.push_back(i);
    if (!near_one.empty()) {
        Eigen::MatrixXcd basis(n, near_one.size());
        for (std::size_t c = 0; c < near_one.size(); ++c)
            basis.col(c) = dec.right.col(near_one[c]);
        const Eigen::VectorXcd coef =
            basis.colPivHouseholderQr().solve(one);
        const double resid = (basis * coef - one).norm() / one.norm();
        if (resid < 1e-6) {
            // Report the group member with the largest identity overlap.
            int pick = near_one.front();
            double best_ov = -1.0;
            for (int i : near_one) {
                const double ov = std::norm(one.dot(dec.right.col(i))) /
                                  (static_cast<double>(d) *
                                   dec.right.col(i).squaredNorm());
                if (ov > best_ov) {
                    best_ov = ov;
                    pick = i;
                }
            }
            for (int pos = 0; pos < n; ++pos)
                if (dec.order[pos] == pick) dec.trivial = pos;
            return dec;
        }
    }

    std::ostringstream os;
    os << "ambiguous trivial eigenvector: no unit-modulus eigenvector "
          "overlaps the identity (best overlap "
       << best_overlap << ")";
    throw std::domain_error(os.str());
}

}  // namespace

const char* to_string(ErgodicityClass c) {
    switch (c) {
        case ErgodicityClass::non_interacting: return "non-interacting";
        case ErgodicityClass::non_ergodic: return "non-ergodic";
        case ErgodicityClass::ergodic_non_mixing: return "ergodic-non-mixing";
        case ErgodicityClass::ergodic_mixing: return "ergodic-mixing";
        case ErgodicityClass::maximally_ergodic: return "maximally-ergodic";
    }
    return "?";
}

ChannelMatrix build_channel(const Gate& gate) {
    const int da = gate.d_a, dc = gate.d_c;
    const int n = da * da;
    ChannelMatrix ch;
    ch.d_a = da;
    ch.m.resize(n, n);
    for (int i = 0; i < da; ++i)
        for (int j = 0; j < da; ++j)
            for (int p = 0; p < da; ++p)
                for (int q = 0; q < da; ++q) {
                    cxd acc = 0.0;
                    for (int cp = 0; cp < dc; ++cp)
                        for (int c = 0; c < dc; ++c)
                            acc += gate.u(i * dc + cp, p * dc + c) *
                                   std::conj(gate.u(j * dc + cp, q * dc + c));
                    ch.m(i + da * j, p + da * q) = acc / double(dc);
                }

    const Eigen::VectorXcd one = vectorized_identity(da);
    const double unital = (ch.m * one - one).cwiseAbs().maxCoeff();
    const double trace_pres =
        (ch.m.transpose() * one - one).cwiseAbs().maxCoeff();
    if (unital > 1e-10 || trace_pres > 1e-10) {
        std::ostringstream os;
        os << "channel violates unitality/trace preservation: " << unital
           << ", " << trace_pres;
        throw std::runtime_error(os.str());
    }
    return ch;
}

double operator_entropy(const Gate& gate) {
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(reshuffle(gate));
    const Eigen::VectorXd& sv = svd.singularValues();
    const double total = static_cast<double>(gate.d_a) * gate.d_c;
    double sum4 = 0.0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        sum4 += sv[i] * sv[i] * sv[i] * sv[i];
    return 1.0 - sum4 / (total * total);
}

std::optional<double> mixing_bound(const Gate& gate) {
    if (gate.d_a > gate.d_c) return std::nullopt;
    const double radicand =
        gate.d_a * gate.d_a * (1.0 - operator_entropy(gate)) - 1.0;
    if (radicand < 0.0) return std::nullopt;
    return std::sqrt(radicand);
}

bool is_dual_unitary(const Gate& gate, double tol) {
    if (gate.d_a != gate.d_c)
        throw std::invalid_argument(
            "dual-unitarity test needs d_a = d_c (square reshuffle)");
    const Eigen::MatrixXcd s = reshuffle(gate);
    const int n = static_cast<int>(s.rows());
    return (s.adjoint() * s - Eigen::MatrixXcd::Identity(n, n))
               .cwiseAbs()
               .maxCoeff() <= tol;
}

Eigen::MatrixXcd choi_matrix(const ChannelMatrix& channel) {
    const int d = channel.d_a;
    Eigen::MatrixXcd choi(d * d, d * d);
    for (int i = 0; i < d; ++i)
        for (int p = 0; p < d; ++p) {
            const Eigen::VectorXcd col = channel.m.col(i + d * p);
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    choi(a + d * i, b + d * p) = col[a + d * b];
        }
    return choi;
}

ChannelDiagnostics diagnose(const Gate& gate, double tol) {
    if (!(tol > 0.0) || tol > 1e-2)
        throw std::invalid_argument("diagnose: tol must be in (0, 1e-2]");
    const ChannelMatrix ch = build_channel(gate);
    const int d = ch.d_a;
    const int n = d * d;
    const Decomposition dec = decompose(ch, tol);

    ChannelDiagnostics out;
    out.eigenvalues.reserve(n);
    for (int pos = 0; pos < n; ++pos)
        out.eigenvalues.push_back(dec.values[dec.order[pos]]);

    int n_one = 0;
    for (const cxd& v : out.eigenvalues)
        if (std::abs(v - cxd(1.0)) <= tol) ++n_one;

    double max_nontrivial = 0.0;
    bool have_sub = false;
    for (int pos = 0; pos < n; ++pos) {
        if (pos == dec.trivial) continue;
        const cxd v = out.eigenvalues[pos];
        if (!have_sub) {  // list is modulus-descending
            out.lambda_sub = v;
            have_sub = true;
        }
        max_nontrivial = std::max(max_nontrivial, std::abs(v));
    }

    if (n_one == n)
        out.ergodicity_class = ErgodicityClass::non_interacting;
    else if (n_one > 1)
        out.ergodicity_class = ErgodicityClass::non_ergodic;
    else if (max_nontrivial <= tol)
        out.ergodicity_class = ErgodicityClass::maximally_ergodic;
    else if (max_nontrivial >= 1.0 - tol)
        out.ergodicity_class = ErgodicityClass::ergodic_non_mixing;
    else
        out.ergodicity_class = ErgodicityClass::ergodic_mixing;

    const Eigen::VectorXcd one = vectorized_identity(d);
    const Eigen::MatrixXcd proj =
        Eigen::MatrixXcd::Identity(n, n) -
        (one * one.adjoint()) / static_cast<double>(d);
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(proj * ch.m * proj);
    out.restricted_norm = svd.singularValues()[0];

    out.op_entropy = operator_entropy(gate);
    out.mixing_bound = mixing_bound(gate);
    out.dual_unitary = gate.d_a == gate.d_c && is_dual_unitary(gate, tol);

    if (std::abs(out.lambda_sub) > out.restricted_norm + 1e-10)
        throw std::runtime_error(
            "subleading eigenvalue exceeds the restricted norm");
    return out;
}

EigenoperatorPair eigenoperators(const ChannelDiagnostics& diag,
                                 const ChannelMatrix& channel,
                                 std::optional<int> index, double tol) {
    const int d = channel.d_a;
    const int n = d * d;
    const Decomposition dec = decompose(channel, tol);

    int pos;
    if (index) {
        pos = *index;
        if (pos < 0 || pos >= n)
            throw std::invalid_argument("eigenoperator index out of range");
    } else {
        pos = -1;
        for (int p = 0; p < n; ++p)
            if (p != dec.trivial) {
                pos = p;
                break;
            }
        const double target = std::abs(dec.values[dec.order[pos]]);
        int same = 0;
        for (int p = 0; p < n; ++p)
            if (p != dec.trivial &&
                std::abs(std::abs(dec.values[dec.order[p]]) - target) <= tol)
                ++same;
        if (same > 1) {
            std::ostringstream os;
            os << "subleading eigenvalue modulus " << target
               << " is degenerate (" << same
               << " modes); pass an index to pick one";
            throw std::domain_error(os.str());
        }
        if (std::abs(diag.lambda_sub - dec.values[dec.order[pos]]) >
            1e-9 * std::max(1.0, std::abs(diag.lambda_sub)))
            throw std::invalid_argument(
                "diagnostics do not match this channel");
    }

    const int i = dec.order[pos];
    EigenoperatorPair out;
    out.lambda = dec.values[i];

    out.a.resize(d, d);
    const Eigen::VectorXcd v = dec.right.col(i);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) out.a(r, c) = v[r + d * c];

    out.b.resize(d, d);
    const Eigen::RowVectorXcd l = dec.left.row(i);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) out.b(r, c) = l[c + d * r];

    // Real nondegenerate eigenvalue: the eigenoperator is unique up to a
    // phase and conjugate-symmetric, so a Hermitian representative exists.
    if (std::abs(out.lambda.imag()) <= tol) {
        auto hermitize = [tol](Eigen::MatrixXcd& x) {
            const cxd c =
                (x.adjoint().cwiseProduct(x.conjugate())).sum() /
                x.squaredNorm();
            if (std::abs(std::abs(c) - 1.0) > 1e-6) return;
            const double resid =
                (x.adjoint() - c * x).norm() / std::max(x.norm(), 1e-300);
            if (resid > std::max(tol, 1e-8) * 100) return;
            x *= std::exp(cxd(0.0, std::arg(c) / 2.0));
            x = ((x + x.adjoint()) / 2.0).eval();
        };
        hermitize(out.a);
        hermitize(out.b);
    }

    const cxd pairing = (out.b * out.a).trace() / static_cast<double>(d);
    if (std::abs(pairing) < 1e-12)
        throw std::runtime_error("left/right eigenoperator pairing vanished");
    out.b /= pairing;
    return out;
}

}  // namespace kotoc
