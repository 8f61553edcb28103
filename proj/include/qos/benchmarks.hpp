#pragma once

#include "qos/circuit.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qos {

using Graph = std::vector<std::pair<int, int>>;

Circuit ghz(int n);
// The 4-qubit, 5-CX layered example used throughout the docs.
Circuit layered_example();

// Depth-1 QAOA for max-cut: H on every qubit, RZZ(2 gamma) per edge, then a
// mixer H RZ(2 beta) H on qubits selected by `mixer` (all when empty).
// `field` adds RZ(2 gamma h_q) terms.
Circuit qaoa_maxcut(int n, const Graph& edges, double gamma, double beta,
                    const std::vector<bool>& mixer = {}, const std::vector<double>& field = {});
// Hub-and-cycle instance: qubit 3 coupled to all others plus a 6-cycle,
// 7 qubits and 12 interactions, no mixers (the cost layer only).
Circuit hub_qaoa();
Graph hub_graph();
// Six-vertex max-cut example; its most likely outcome is 110010.
Circuit six_vertex_qaoa();
Graph six_vertex_graph();
Graph random_regular_graph(int n, int degree, std::uint64_t seed);
Circuit qaoa_regular(int n, int degree, std::uint64_t seed);
// Hardware-efficient ansatz, one repetition: RY/RZ layer, CX chain, RY/RZ layer.
Circuit vqe_linear(int n, std::uint64_t seed);
Circuit w_state(int n);
Circuit random_circuit(int n, int depth, std::uint64_t seed);

// Appends RY(theta) on q using H/RZ.
void append_ry(Circuit& c, int q, double theta);

// Builds a benchmark by name: ghz, qaoa, qaoa-hub, vqe, wstate, random.
Circuit make_benchmark(const std::string& name, int n, std::uint64_t seed);

// Cut value of a bitstring on a graph (bit q = side of vertex q).
int cut_value(const Graph& g, std::uint64_t bits);

}  // namespace qos
