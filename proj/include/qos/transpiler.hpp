#pragma once

#include "qos/circuit.hpp"
#include "qos/qpu.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qos {

struct TranspiledCircuit {
  std::string target;               // QPU id
  Circuit physical;                 // one wire per physical qubit, same classical bits
  std::vector<int> initial_layout;  // logical -> physical
  std::vector<int> final_layout;    // after routing
  int swaps = 0;
  // Per physical gate: index of the logical gate it was emitted for (SWAPs
  // belong to the gate that needed them), after default measurements.
  std::vector<int> source;
};

class TranspileError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Greedy noise-aware placement: logical qubits in order of interaction weight,
// each on the free physical qubit minimizing readout plus link error to its
// already placed partners (extra hops cost one unit each). The greedy pass is
// restarted from every seed qubit and the layout with the lowest estimated
// error (SWAPs included) wins.
std::vector<int> choose_layout(const Circuit& logical, const QpuDescriptor& qpu);

// Layout, SWAP routing along shortest paths, basis translation, RZ merging and
// durations from calibration. Throws TranspileError when the circuit does not
// fit or holds virtual gates.
TranspiledCircuit transpile(const Circuit& logical, const QpuDescriptor& qpu);

// Rewrites one logical gate into the QPU basis (no routing).
std::vector<Gate> to_basis(const Gate& g, const QpuDescriptor& qpu);

enum class TranspileMode : std::uint8_t { PerArchitecture, PerQpu };
std::string_view to_string(TranspileMode m);
std::optional<TranspileMode> transpile_mode_from_string(std::string_view s);
// Per-QPU transpilation while the budget is small, per architecture otherwise.
TranspileMode default_transpile_mode(int budget);

// (circuit index, target) -> transpilation. Targets are QPU ids in per-QPU
// mode and architecture tags in per-architecture mode, where the
// lowest-id QPU of the architecture stands in for all of them.
using TranspileTable = std::map<std::pair<std::size_t, std::string>, TranspiledCircuit>;
TranspileTable transpile_all(const std::vector<Circuit>& circuits, const std::vector<QpuDescriptor>& farm,
                             TranspileMode mode, int workers = 1);

}  // namespace qos
