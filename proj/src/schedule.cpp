#include "qos/schedule.hpp"

#include <algorithm>
#include <cassert>

namespace qos {

std::vector<bool> terminal_measurements(const Circuit& c) {
  const auto& gates = c.gates();
  std::vector<bool> terminal(gates.size(), false);
  std::vector<bool> touched_later(static_cast<std::size_t>(c.num_qubits()), false);
  for (std::size_t i = gates.size(); i-- > 0;) {
    const Gate& g = gates[i];
    if (g.kind == GateKind::Measure && !touched_later[static_cast<std::size_t>(g.qubits[0])]) {
      terminal[i] = true;
    }
    for (int q : g.qubits) {
      touched_later[static_cast<std::size_t>(q)] = true;
    }
  }
  return terminal;
}

GateSchedule schedule_circuit(const Circuit& physical, const QpuDescriptor& qpu) {
  const auto& gates = physical.gates();
  const auto nq = static_cast<std::size_t>(physical.num_qubits());
  GateSchedule s;
  s.start.assign(gates.size(), 0.0);
  s.duration.assign(gates.size(), 0.0);
  s.idle_before.assign(gates.size(), 0.0);
  s.idle_gap.assign(gates.size(), {});
  s.qubit_idle.assign(nq, 0.0);
  s.terminal_measure = terminal_measurements(physical);

  std::vector<double> avail(nq, 0.0);
  std::vector<bool> started(nq, false);

  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate& g = gates[i];
    bool missing = false;
    s.duration[i] = g.duration ? *g.duration : qpu.calibration.duration(g.kind, g.qubits, &missing);
    s.missing_calibration = s.missing_calibration || missing;
    if (s.terminal_measure[i]) {
      continue;
    }
    double start = 0.0;
    for (int q : g.qubits) {
      start = std::max(start, avail[static_cast<std::size_t>(q)]);
    }
    s.start[i] = start;
    for (int q : g.qubits) {
      avail[static_cast<std::size_t>(q)] = start + s.duration[i];
    }
  }

  // Readout happens once the last non-terminal operation has finished.
  double readout_at = 0.0;
  for (std::size_t q = 0; q < nq; ++q) {
    readout_at = std::max(readout_at, avail[q]);
  }
  s.makespan = readout_at;
  for (std::size_t i = 0; i < gates.size(); ++i) {
    if (s.terminal_measure[i]) {
      s.start[i] = readout_at;
      s.makespan = std::max(s.makespan, readout_at + s.duration[i]);
    }
  }

  // Idle gaps, walking each qubit's operations in time order (which equals
  // program order for operations sharing a qubit).
  std::vector<double> last_end(nq, 0.0);
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate& g = gates[i];
    s.idle_gap[i].assign(g.qubits.size(), 0.0);
    for (std::size_t k = 0; k < g.qubits.size(); ++k) {
      const auto q = static_cast<std::size_t>(g.qubits[k]);
      double gap = 0.0;
      if (started[q]) {
        gap = std::max(0.0, s.start[i] - last_end[q]);
      }
      started[q] = true;
      last_end[q] = s.start[i] + s.duration[i];
      s.idle_gap[i][k] = gap;
      s.qubit_idle[q] += gap;
      s.idle_before[i] = std::max(s.idle_before[i], gap);
    }
  }

  // Concurrent 2-qubit gates on edges that are neighbours in the coupling graph.
  std::vector<std::size_t> two_q;
  for (std::size_t i = 0; i < gates.size(); ++i) {
    if (is_two_qubit(gates[i].kind)) {
      two_q.push_back(i);
    }
  }
  for (std::size_t x = 0; x < two_q.size(); ++x) {
    for (std::size_t y = x + 1; y < two_q.size(); ++y) {
      const std::size_t i = two_q[x];
      const std::size_t j = two_q[y];
      const double end_i = s.start[i] + s.duration[i];
      const double end_j = s.start[j] + s.duration[j];
      if (!(s.start[i] < end_j && s.start[j] < end_i)) {
        continue;
      }
      const Edge e1 = Edge::of(gates[i].qubits[0], gates[i].qubits[1]);
      const Edge e2 = Edge::of(gates[j].qubits[0], gates[j].qubits[1]);
      if (e1.shares_qubit(e2)) {
        continue;
      }
      if (qpu.calibration.crosstalk(e1, e2) > 0.0) {
        s.crosstalk_pairs.emplace_back(i, j);
      }
    }
  }
  return s;
}

}  // namespace qos
