#include "kotoc/gate_library.hpp"

#include <complex>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "kotoc/rng.hpp"

namespace kotoc {

namespace {

using nlohmann::json;

const cxd kI{0.0, 1.0};

Eigen::MatrixXcd pauli(char which) {
    Eigen::MatrixXcd m(2, 2);
    switch (which) {
        case 'x': m << 0, 1, 1, 0; break;
        case 'y': m << 0, -kI, kI, 0; break;
        default:  m << 1, 0, 0, -1; break;
    }
    return m;
}

Eigen::MatrixXcd swap_matrix(int d) {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(d * d, d * d);
    for (int a = 0; a < d; ++a)
        for (int c = 0; c < d; ++c) u(c * d + a, a * d + c) = 1.0;
    return u;
}

Eigen::MatrixXcd cphase_matrix(int d_a, int d_c, double phi) {
    const int n = d_a * d_c;
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(n, n);
    for (int a = 0; a < d_a; ++a)
        for (int c = 0; c < d_c; ++c)
            u(a * d_c + c, a * d_c + c) = std::exp(kI * (phi * a * c));
    return u;
}

Eigen::MatrixXcd du_qubit_matrix(double J, std::uint64_t dressing_seed) {
    using Eigen::kroneckerProduct;
    const Eigen::MatrixXcd xx = kroneckerProduct(pauli('x'), pauli('x'));
    const Eigen::MatrixXcd yy = kroneckerProduct(pauli('y'), pauli('y'));
    const Eigen::MatrixXcd zz = kroneckerProduct(pauli('z'), pauli('z'));
    const double quarter = std::numbers::pi / 4.0;
    const Eigen::MatrixXcd h = quarter * xx + quarter * yy + J * zz;
    const Eigen::MatrixXcd core = Eigen::MatrixXcd(-kI * h).exp();
    if (dressing_seed == 0) return core;
    Eigen::MatrixXcd u1 = haar_unitary(2, stream_key({dressing_seed, 1}));
    Eigen::MatrixXcd u2 = haar_unitary(2, stream_key({dressing_seed, 2}));
    Eigen::MatrixXcd u3 = haar_unitary(2, stream_key({dressing_seed, 3}));
    Eigen::MatrixXcd u4 = haar_unitary(2, stream_key({dressing_seed, 4}));
    return kroneckerProduct(u1, u2).eval() * core *
           kroneckerProduct(u3, u4).eval();
}

int to_int(const std::string& name, const std::string& value) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("gate parameter '" + name +
                                    "' is not an integer: " + value);
    }
}

double to_real(const std::string& name, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("gate parameter '" + name +
                                    "' is not a number: " + value);
    }
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("malformed JSON in " + path + ": " +
                                 e.what());
    }
    return j;
}

Eigen::MatrixXcd matrix_from_json(const json& j, int n,
                                  const std::string& path) {
    const auto& rows = j.at("matrix");
    if (!rows.is_array() ||
        rows.size() != static_cast<std::size_t>(n) * n)
        throw std::invalid_argument("matrix in " + path + " must hold " +
                                    std::to_string(n * n) + " entries");
    Eigen::MatrixXcd m(n, n);
    std::size_t idx = 0;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c, ++idx) {
            const auto& e = rows.at(idx);
            if (!e.is_array() || e.size() != 2)
                throw std::invalid_argument("matrix entries in " + path +
                                            " must be [re, im] pairs");
            m(r, c) = cxd(e.at(0).get<double>(), e.at(1).get<double>());
        }
    return m;
}

json matrix_to_json(const Eigen::MatrixXcd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            rows.push_back({m(r, c).real(), m(r, c).imag()});
    return rows;
}

}  // namespace

Gate gate_identity(int d_a, int d_c) {
    return Gate::from_matrix(d_a, d_c,
                             Eigen::MatrixXcd::Identity(d_a * d_c, d_a * d_c));
}

Gate gate_swap(int d) { return Gate::from_matrix(d, d, swap_matrix(d)); }

Gate gate_controlled_phase(int d_a, int d_c, double phi) {
    return Gate::from_matrix(d_a, d_c, cphase_matrix(d_a, d_c, phi));
}

Gate gate_haar(int d_a, int d_c, std::uint64_t seed) {
    return Gate::from_matrix(
        d_a, d_c, haar_unitary(d_a * d_c, stream_key({0x6761746511ull, seed})));
}

Gate gate_dual_unitary_qubit(double J, std::uint64_t dressing_seed) {
    return Gate::from_matrix(2, 2, du_qubit_matrix(J, dressing_seed));
}

Gate gate_du_perturbed(int d, double J, double eps, std::uint64_t seed) {
    if (d < 2) throw std::invalid_argument("du_perturbed needs d >= 2");
    Eigen::MatrixXcd base =
        d == 2 ? du_qubit_matrix(J, 0)
               : Eigen::MatrixXcd(swap_matrix(d) * cphase_matrix(d, d, J));
    if (eps == 0.0) return Gate::from_matrix(d, d, base);
    const Eigen::MatrixXcd g =
        haar_unitary(d * d, stream_key({0x6475706572ull, seed}));
    const Eigen::MatrixXcd w = g * base.adjoint();
    const Eigen::MatrixXcd k = w.log();
    return Gate::from_matrix(d, d, (eps * k).exp() * base);
}

Gate gate_library(const std::string& name,
                  const std::map<std::string, std::string>& params,
                  std::uint64_t seed) {
    auto get = [&](const std::string& key,
                   const std::string& fallback) -> std::string {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    auto require = [&](const std::string& key) -> std::string {
        auto it = params.find(key);
        if (it == params.end())
            throw std::invalid_argument("gate '" + name +
                                        "' needs parameter '" + key + "'");
        return it->second;
    };

    if (name == "identity")
        return gate_identity(to_int("d_a", get("d_a", "2")),
                             to_int("d_c", get("d_c", "2")));
    if (name == "swap") return gate_swap(to_int("d", get("d", "2")));
    if (name == "controlled_phase")
        return gate_controlled_phase(to_int("d_a", get("d_a", "2")),
                                     to_int("d_c", get("d_c", "2")),
                                     to_real("phi", require("phi")));
    if (name == "haar_random")
        return gate_haar(to_int("d_a", get("d_a", "2")),
                         to_int("d_c", get("d_c", "2")), seed);
    if (name == "dual_unitary_qubit")
        return gate_dual_unitary_qubit(to_real("J", require("J")), seed);
    if (name == "du_perturbed")
        return gate_du_perturbed(to_int("d", get("d", "2")),
                                 to_real("J", require("J")),
                                 to_real("eps", require("eps")), seed);
    if (name == "from_file") return load_gate(require("path"));
    throw std::invalid_argument("unknown gate name: " + name);
}

Gate load_gate(const std::string& path) {
    const json j = load_json(path);
    const int d_a = j.at("d_a").get<int>();
    const int d_c = j.at("d_c").get<int>();
    if (d_a < 2 || d_c < 2)
        throw std::invalid_argument("gate dimensions in " + path +
                                    " must be at least 2");
    return Gate::from_matrix(d_a, d_c,
                             matrix_from_json(j, d_a * d_c, path));
}

void save_gate(const std::string& path, const Gate& gate) {
    json j;
    j["d_a"] = gate.d_a;
    j["d_c"] = gate.d_c;
    j["matrix"] = matrix_to_json(gate.u);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

Observable load_observable(const std::string& path) {
    const json j = load_json(path);
    const int d = j.at("d_a").get<int>();
    if (d < 2)
        throw std::invalid_argument("observable dimension in " + path +
                                    " must be at least 2");
    return Observable::from_matrix(matrix_from_json(j, d, path));
}

void save_observable(const std::string& path, const Observable& obs) {
    json j;
    j["d_a"] = obs.d;
    j["matrix"] = matrix_to_json(obs.m);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace kotoc
