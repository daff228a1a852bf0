#pragma once
// Finite-bath Monte Carlo oracle. Samples Haar-random bath unitaries,
// evolves dense D x D observables through single circuit realizations, and
// aggregates sample statistics that converge to the thermodynamic series.

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kotoc/replica.hpp"

namespace kotoc {

enum class BathLayout { single, brickwork };

struct McConfig {
    int d_a = 2;
    int d_c = 2;
    int d_e = 8;
    int k = 2;
    int t_max = 3;
    int n_samples = 2;
    std::uint64_t base_seed = 0;
    BathLayout layout = BathLayout::single;
    int bath_sites = 1;  // brickwork column count; ignored for single
};

struct McEstimate {
    std::vector<int> t_values;  // 0..t_max
    std::vector<cxd> mean;
    std::vector<double> variance;  // unbiased sample variance of |c - mean|
    std::vector<double> std_error;
    int samples = 0;
    std::uint64_t base_seed = 0;
};

// One circuit realization: the k-OTOC series for t = 0..t_max. The bath
// unitaries are drawn from streams keyed by (base_seed, sample, t, layer,
// pair), so a given (config, sample) pair is bit-reproducible anywhere.
std::vector<cxd> finite_kotoc_single(const McConfig& cfg, const Gate& gate,
                                     const std::vector<Observable>& a_ops,
                                     const std::vector<Observable>& b_ops,
                                     int sample);

// Mean, variance, and standard error over cfg.n_samples realizations.
// Samples may be computed on several threads; the reduction is a fixed
// pairwise tree over the sample index, so the result does not depend on
// the thread count.
McEstimate estimate(const McConfig& cfg, const Gate& gate,
                    const std::vector<Observable>& a_ops,
                    const std::vector<Observable>& b_ops, int threads = 1);

// Least-squares slope of log y against log x; both inputs must be positive.
double fit_loglog_slope(const std::vector<double>& x,
                        const std::vector<double>& y);

}  // namespace kotoc
