#pragma once
// Deterministic randomness. Streams are keyed by explicit 64-bit ids built
// with stream_key(), so every draw is reproducible across platforms,
// thread counts, and library versions; nothing here depends on
// std::random distributions.

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <numbers>

#include <Eigen/Dense>

namespace kotoc {

class RandomStream {
public:
    explicit RandomStream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    double uniform() {  // in [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

    std::complex<double> complex_gaussian() {
        const double re = gaussian();
        return {re, gaussian()};
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Mixes coordinate labels (seed, sample, time step, ...) into one stream
// key; distinct label tuples give independent streams.
inline std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x243f6a8885a308d3ull;
    for (std::uint64_t p : parts) {
        h ^= p + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
        h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
        h ^= h >> 31;
    }
    return h;
}

// Haar-distributed unitary: Ginibre matrix, QR, then the phase convention
// fixed by the R diagonal so the distribution is exactly uniform.
inline Eigen::MatrixXcd haar_unitary(int n, std::uint64_t key) {
    RandomStream rs(key);
    Eigen::MatrixXcd z(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) z(i, j) = rs.complex_gaussian();
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
    Eigen::MatrixXcd q = qr.householderQ();
    for (int j = 0; j < n; ++j) {
        const std::complex<double> rjj = qr.matrixQR()(j, j);
        const double mag = std::abs(rjj);
        if (mag > 0.0) q.col(j) *= rjj / mag;
    }
    return q;
}

}  // namespace kotoc
