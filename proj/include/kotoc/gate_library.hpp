#pragma once
// Named gate constructors plus JSON file IO.  Every constructor is
// deterministic in its arguments; randomized families consume seeds
// through the stream-key scheme from rng.hpp.

#include <cstdint>
#include <map>
#include <string>

#include "kotoc/replica.hpp"

namespace kotoc {

Gate gate_identity(int d_a, int d_c);
Gate gate_swap(int d);

// Diagonal gate with phase e^{i phi a c} on |a, c>.
Gate gate_controlled_phase(int d_a, int d_c, double phi);

Gate gate_haar(int d_a, int d_c, std::uint64_t seed);

// Qubit family (u1 (x) u2) exp[-i(pi/4 XX + pi/4 YY + J ZZ)] (u3 (x) u4);
// dual-unitary for every J.  dressing_seed = 0 keeps all u_i = 1.
Gate gate_dual_unitary_qubit(double J, std::uint64_t dressing_seed);

// Interpolation exp(eps log(G V^dag)) V between a dual-unitary base V
// (the qubit family above for d = 2, swap times controlled-phase for
// d >= 3) and a Haar gate G drawn from seed.  eps = 0 returns V.
Gate gate_du_perturbed(int d, double J, double eps, std::uint64_t seed);

// Dispatcher for textual gate specs.  Names: identity, swap,
// controlled_phase, haar_random, dual_unitary_qubit, du_perturbed,
// from_file.  Unknown names or malformed parameters are rejected.
Gate gate_library(const std::string& name,
                  const std::map<std::string, std::string>& params,
                  std::uint64_t seed);

// JSON container {"d_a", "d_c", "matrix": [[re, im], ...]} with the
// matrix flattened row-major; the loader re-validates unitarity.
Gate load_gate(const std::string& path);
void save_gate(const std::string& path, const Gate& gate);

// Same container without "d_c"; validated Hermitian on load.
Observable load_observable(const std::string& path);
void save_observable(const std::string& path, const Observable& obs);

}  // namespace kotoc
