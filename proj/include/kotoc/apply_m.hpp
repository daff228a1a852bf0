#pragma once
// Application of the replicated gate operators
//     M_{nu,sigma} = d_c^{-k} (1_A (x) (nu|_C) (U (x) U*)^{(x)k} (1_A (x) |sigma)_C)
// to replica vectors.  Two interchangeable execution paths:
//
//   dense       build the d_a^{2k} x d_a^{2k} matrix once, then matvec.
//               Matrices are kept in a process-wide LRU cache keyed by
//               (gate fingerprint, nu, sigma) under a byte budget.
//   on_the_fly  contract the gate network directly against the vector,
//               sweeping replicas and keeping only the open bath legs.
//
// The automatic policy picks dense when d_a^{2k} <= 256 and the matrix
// fits the cache budget, on-the-fly otherwise; a dense build costs about
// d_a^{2k} on-the-fly applies, which evolution workloads never recoup at
// larger dimensions.  ApplyPath::dense accepts up to 4096 regardless.

#include <cstddef>
#include <cstdint>

#include "kotoc/replica.hpp"

namespace kotoc {

enum class ApplyPath { automatic, dense, on_the_fly };

ReplicaVector apply_m(const NcPartition& nu, const NcPartition& sigma,
                      const Gate& gate, const ReplicaVector& v,
                      ApplyPath path = ApplyPath::automatic);

// Applies the adjoint of M_{nu,sigma}; equivalent to M_{sigma,nu} built
// from the adjoint gate.
ReplicaVector apply_m_adjoint(const NcPartition& nu, const NcPartition& sigma,
                              const Gate& gate, const ReplicaVector& v,
                              ApplyPath path = ApplyPath::automatic);

struct MCacheStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t evictions = 0;
    std::size_t bytes = 0;
    std::size_t budget = 0;
};

MCacheStats m_cache_stats();
void set_m_cache_budget(std::size_t bytes);
void clear_m_cache();

}  // namespace kotoc
