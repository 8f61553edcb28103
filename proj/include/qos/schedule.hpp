#pragma once

#include "qos/circuit.hpp"
#include "qos/qpu.hpp"

#include <utility>
#include <vector>

namespace qos {

// As-soon-as-possible timing of a physical circuit on a QPU. Terminal
// measurements are aligned to a common readout time at the end.
struct GateSchedule {
  std::vector<double> start;          // per gate, seconds
  std::vector<double> duration;       // per gate, seconds
  std::vector<double> idle_before;    // per gate: idle gap per operand qubit, max over operands
  std::vector<std::vector<double>> idle_gap;  // per gate, per operand qubit
  std::vector<double> qubit_idle;     // per qubit: total idle between first and last op
  std::vector<bool> terminal_measure; // per gate
  std::vector<std::pair<std::size_t, std::size_t>> crosstalk_pairs;  // gate index pairs
  double makespan = 0.0;
  bool missing_calibration = false;
};

// Marks measurements that are not followed by any operation on their qubit.
std::vector<bool> terminal_measurements(const Circuit& c);

GateSchedule schedule_circuit(const Circuit& physical, const QpuDescriptor& qpu);

}  // namespace qos
