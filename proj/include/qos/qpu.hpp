#pragma once

#include "qos/circuit.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace qos {

// Undirected coupling between two physical qubits, stored with a < b.
struct Edge {
  int a = 0;
  int b = 0;

  static Edge of(int x, int y) { return x < y ? Edge{x, y} : Edge{y, x}; }
  bool touches(int q) const { return a == q || b == q; }
  bool shares_qubit(const Edge& o) const { return touches(o.a) || touches(o.b); }
  auto operator<=>(const Edge&) const = default;
};

// Calibration lookup key: 1-qubit entries use b = -1.
struct GateKey {
  GateKind kind = GateKind::X;
  int a = 0;
  int b = -1;

  static GateKey of(GateKind kind, const std::vector<int>& qubits);
  auto operator<=>(const GateKey&) const = default;
};

// Nominal error rates and durations of an architecture; also used to fill
// missing calibration entries.
struct ArchitectureBaseline {
  double readout_error = 0.02;
  double gate_error_1q = 3e-4;
  double gate_error_2q = 1e-2;
  double t2 = 100e-6;
  double duration_1q = 35.5e-9;
  double duration_2q = 400e-9;
  double duration_measure = 1.0e-6;
  double duration_reset = 1.0e-6;
  double crosstalk_error = 3e-3;
};

struct CalibrationData {
  std::int64_t timestamp = 0;  // calibration-cycle index
  std::vector<double> readout_error;
  std::vector<double> t2;
  std::map<GateKey, double> gate_error;
  std::map<GateKey, double> gate_duration;
  std::map<std::pair<Edge, Edge>, double> crosstalk_error;
  ArchitectureBaseline defaults;

  // Lookups fall back to `defaults` and set *missing when an entry is absent.
  double error(GateKind kind, const std::vector<int>& qubits, bool* missing = nullptr) const;
  double duration(GateKind kind, const std::vector<int>& qubits, bool* missing = nullptr) const;
  double crosstalk(Edge e1, Edge e2) const;
  double readout(int q, bool* missing = nullptr) const;
  double t2_of(int q, bool* missing = nullptr) const;

  // Throws std::invalid_argument on out-of-range values.
  void validate(int num_qubits) const;
};

struct QpuDescriptor {
  std::string id;
  std::string architecture_tag;
  int num_qubits = 0;
  std::vector<Edge> coupling_map;
  std::set<GateKind> basis_gates;
  CalibrationData calibration;

  bool adjacent(int a, int b) const;
  std::vector<std::vector<int>> neighbors() const;
  // All-pairs hop distances over the coupling graph.
  std::vector<std::vector<int>> distances() const;
  // The entangling basis gate (CX preferred over CZ).
  GateKind two_qubit_basis() const;
  // Pairs of coupling edges that share no qubit but are joined by an edge.
  std::vector<std::pair<Edge, Edge>> adjacent_edge_pairs() const;

  void validate() const;
};

// Coupling maps.
std::vector<Edge> line_coupling(int n);
std::vector<Edge> ring_coupling(int n);
std::vector<Edge> grid_coupling(int rows, int cols);
std::vector<Edge> falcon27_coupling();

struct QpuTemplate {
  std::string id;
  std::string architecture_tag;
  int num_qubits = 0;
  std::vector<Edge> coupling_map;
  std::set<GateKind> basis_gates{GateKind::X, GateKind::SX, GateKind::RZ, GateKind::CX};
  ArchitectureBaseline baseline;
};

// Draws per-qubit / per-edge values log-normally around the baseline.
CalibrationData sample_calibration(const QpuTemplate& tmpl, std::int64_t cycle, double sigma,
                                   std::uint64_t seed);
// Every error entry set to zero, T2 effectively infinite.
CalibrationData ideal_calibration(const QpuTemplate& tmpl);

QpuDescriptor make_qpu(const QpuTemplate& tmpl, CalibrationData calibration);

// Convenience farms used by tests, the CLI and the acceptance suite.
QpuTemplate line_template(const std::string& id, int n);
QpuTemplate falcon27_template(const std::string& id);
std::vector<QpuDescriptor> make_falcon_farm(int count, double sigma, std::uint64_t seed,
                                            std::int64_t cycle = 0);

std::string qpu_to_json(const QpuDescriptor& qpu);
QpuDescriptor qpu_from_json(const std::string& text);
QpuDescriptor load_qpu(const std::string& path);
void save_qpu(const QpuDescriptor& qpu, const std::string& path);
// One descriptor per file; for several cycles of one id the newest wins.
std::vector<QpuDescriptor> load_farm(const std::string& dir);
void save_farm(const std::vector<QpuDescriptor>& farm, const std::string& dir);

}  // namespace qos
