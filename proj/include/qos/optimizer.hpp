#pragma once

#include "qos/qernel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qos {

struct OptimizationGoal {
  int size_target = 1;  // s: max qubits per fragment
  int budget = 0;       // b: cuts plus freezes allowed
  void validate() const;
};

struct OptimizerConfig {
  bool allow_freeze = true;
  bool allow_gate_cuts = true;
  bool allow_wire_cuts = true;
  bool allow_reuse = true;
  // Above this many candidate subsets the cut search switches to local search.
  std::uint64_t exhaustive_limit = 200000;
};

struct WirePoint {
  int qubit = 0;
  int position = 0;  // number of the qubit's operations before the cut
  auto operator<=>(const WirePoint&) const = default;
};

struct CutPlan {
  CutKind kind = CutKind::Gate;
  std::vector<int> locations;      // gate indices (gate), qubits (freeze)
  std::vector<WirePoint> wires;    // wire cuts
  std::uint64_t expected_cost = 1; // number of instantiated sub-Qernels
  std::vector<int> expected_fragment_sizes;  // descending
  int num_cuts() const {
    return static_cast<int>(kind == CutKind::Wire ? wires.size() : locations.size());
  }
  int max_fragment_size() const {
    return expected_fragment_sizes.empty() ? 0 : expected_fragment_sizes.front();
  }
};

// ISQ count for k cuts of a kind: 6^k, 8^k or 2^k.
std::uint64_t cut_cost(CutKind kind, int k);

// Qubits touched by at least one operation.
std::vector<bool> active_qubits(const Circuit& c);
// Fragment sizes (descending) of a circuit whose virtual gates are already
// split off: components of the non-virtual 2-qubit interactions.
std::vector<int> fragment_sizes(const Circuit& working);

// Cut searches over a working circuit. The first k <= max_cuts reaching
// size <= s wins; otherwise the plan with the smallest max fragment size is
// returned when it beats the uncut circuit. An empty plan means no useful cut.
CutPlan plan_gate_cuts(const Circuit& working, int max_cuts, int s, const OptimizerConfig& cfg = {});
CutPlan plan_wire_cuts(const Circuit& working, int max_cuts, int s, const OptimizerConfig& cfg = {});

// Rewrites cut gates into RZZ-form virtual markers / wire markers and
// appends the matching records. Virtual ids continue after the largest in `records`.
Circuit apply_gate_cuts(const Circuit& working, const std::vector<int>& gates,
                        std::vector<VirtualGateRecord>& records);
Circuit apply_wire_cuts(const Circuit& working, const std::vector<WirePoint>& points,
                        std::vector<VirtualGateRecord>& records);

// Freezing support: the qubit's operations are an optional leading H, then
// diagonal gates, then an optional final measurement.
bool is_freezable(const Circuit& c, int q);
Circuit apply_freeze(const Circuit& working, int q, std::vector<VirtualGateRecord>& records);

// Splits a working circuit into fragment Qernels; 2-qubit virtual markers are
// replaced by their one-qubit halves.
std::vector<Qernel> split_fragments(const Circuit& working, const std::string& parent_id);

// Counts used in reports: qubits, 2-qubit gates plus cut halves.
struct FragmentStats {
  int qubits = 0;
  int interactions = 0;
};
FragmentStats fragment_stats(const Circuit& fragment);

// Individual passes. Each returns a Qernel whose `circuit` is the working
// circuit and whose children are the resulting fragments.
Qernel gate_cutting_pass(const Qernel& q, int max_cuts, int s, CutPlan* plan = nullptr,
                         const OptimizerConfig& cfg = {});
Qernel wire_cutting_pass(const Qernel& q, int max_cuts, int s, CutPlan* plan = nullptr,
                         const OptimizerConfig& cfg = {});
// Freezes the m highest-degree qubits; throws std::invalid_argument when the
// circuit is not QAOA-structured or a hotspot cannot be frozen.
Qernel qubit_freezing_pass(const Qernel& q, int m);
// Merges qubits inside every fragment until each has at most s wires.
Qernel qubit_reuse_pass(const Qernel& q, int s);
// Reuse on a single circuit; returns the merged circuit and the host map.
Circuit reuse_qubits(const Circuit& c, int s, std::vector<std::vector<int>>* hosts = nullptr);

// Default workflow: hotspot detection, freezing (QAOA only, while
// profitable), the cheaper of gate and wire cutting, then qubit reuse.
Qernel optimize(const Qernel& q, const OptimizationGoal& goal, const OptimizerConfig& cfg = {});

// Largest fragment width after optimization.
int max_fragment_width(const Qernel& optimized);

}  // namespace qos
