#pragma once

#include "qos/circuit.hpp"
#include "qos/distribution.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qos {

// Gate-level dependency DAG. Every non-measurement gate is a node; every
// measurement is a terminal M node. Edges follow each qubit's wire.
struct QirNode {
  int gate_index = -1;  // index into the circuit's gate list
  GateKind kind = GateKind::X;
  std::vector<int> qubits;
  int layer = 0;        // longest-path layer, starting at 1
  bool is_measurement() const { return kind == GateKind::Measure; }
};

struct QirEdge {
  int from = 0;
  int to = 0;
  int qubit = 0;
  auto operator<=>(const QirEdge&) const = default;
};

class QIR {
public:
  QIR() = default;
  QIR(int num_qubits, std::vector<QirNode> nodes, std::vector<QirEdge> edges);

  int num_qubits() const { return num_qubits_; }
  const std::vector<QirNode>& nodes() const { return nodes_; }
  const std::vector<QirEdge>& edges() const { return edges_; }
  const std::vector<int>& successors(int v) const { return succ_[static_cast<std::size_t>(v)]; }
  const std::vector<int>& predecessors(int v) const { return pred_[static_cast<std::size_t>(v)]; }
  std::size_t size() const { return nodes_.size(); }
  int num_layers() const;
  // Gate-node neighbours (distinct); M nodes never count.
  int degree(int v) const;
  // Node ids grouped by layer (layer 1 first).
  std::vector<std::vector<int>> layers() const;
  std::vector<int> topological_order() const;

private:
  int num_qubits_ = 0;
  std::vector<QirNode> nodes_;
  std::vector<QirEdge> edges_;
  std::vector<std::vector<int>> succ_;
  std::vector<std::vector<int>> pred_;
};

// Undirected qubit-interaction graph; weight = number of 2-qubit gates
// between the pair. Not necessarily acyclic.
class RefinedQIR {
public:
  RefinedQIR() = default;
  explicit RefinedQIR(int num_qubits) : num_qubits_(num_qubits) {}

  int num_qubits() const { return num_qubits_; }
  const std::map<std::pair<int, int>, int>& weights() const { return weights_; }
  void add_interaction(int a, int b, int w = 1);
  int weight(int a, int b) const;
  int degree(int q) const;
  int total_weight() const;
  std::vector<int> neighbors(int q) const;
  // Connected components over `active` qubits (all qubits when empty).
  std::vector<std::vector<int>> components(const std::vector<bool>& active = {}) const;

private:
  int num_qubits_ = 0;
  std::map<std::pair<int, int>, int> weights_;
};

struct StaticProperties {
  int num_qubits = 0;
  int depth = 0;
  int num_gates = 0;  // excludes measurements
  int num_nonlocal = 0;
  std::map<GateKind, int> nonlocal_by_kind;
  int num_measurements = 0;
  double program_communication = 0.0;
  double critical_depth = 0.0;
  double entanglement_ratio = 0.0;
  double parallelism = 0.0;
  double liveness = 0.0;
  double measurement_ratio = 0.0;

  std::vector<double> features() const;
};

enum class JobStatus : std::uint8_t { Queued, Scheduled, Running, Done, Failed };
std::string_view to_string(JobStatus s);
std::optional<JobStatus> job_status_from_string(std::string_view s);

struct Estimation {
  std::string qpu_id;
  double fidelity_score = 0.0;
  double estimated_exec_time = 0.0;
  std::vector<int> layout;
  std::int64_t calibration_timestamp = 0;
  bool missing_calibration = false;
};

class DynamicProperties {
public:
  JobStatus status() const { return status_; }
  const std::vector<Estimation>& estimations() const { return estimations_; }
  std::vector<Estimation>& estimations() { return estimations_; }
  const std::optional<Distribution>& result() const { return result_; }

  void set_status(JobStatus s);
  void set_result(Distribution d);

private:
  JobStatus status_ = JobStatus::Queued;
  std::vector<Estimation> estimations_;
  std::optional<Distribution> result_;
};

enum class CutKind : std::uint8_t { Gate, Wire, Freeze };
std::string_view to_string(CutKind k);

struct VirtualGateRecord {
  int vg_id = 0;
  CutKind kind = CutKind::Gate;
  Gate original;           // cut gate; for a freeze, the frozen qubit's measurement
  int location = -1;       // gate index in the source circuit (gate cut) or qubit (wire, freeze)
  int position = -1;       // wire cut: number of 2-qubit gates on the wire before the cut
  int new_qubit = -1;      // wire cut: working qubit carrying the downstream segment
  int frozen_clbit = -1;   // freeze: classical bit fixed by the assignment
  bool leading_h = false;  // freeze: qubit starts in |+>
};

struct PassReport {
  std::string name;
  nlohmann::json outputs;
  double wall_seconds = 0.0;
};

struct Qernel {
  std::string id;
  Circuit source;           // user circuit
  Circuit circuit;          // current working circuit (may hold virtual gates)
  QIR qir;
  RefinedQIR refined;
  StaticProperties static_props;
  DynamicProperties dynamic;
  std::vector<Qernel> children;
  std::vector<VirtualGateRecord> virtual_gate_records;
  std::vector<PassReport> reports;
  std::vector<std::string> tags;
  // Fragment children: working qubits hosted by each local wire, in order.
  std::vector<std::vector<int>> qubit_map;

  bool has_tag(std::string_view t) const;
  // Fills qir, refined and static_props from `circuit`.
  void analyze();
};

QIR build_qir(const Circuit& c);
RefinedQIR refine_qir(const QIR& qir);
StaticProperties compute_static_properties(const Circuit& c, const QIR& qir,
                                           const RefinedQIR& refined);
StaticProperties compute_static_properties(const Qernel& q);
StaticProperties compute_static_properties(const Circuit& c);

// Rebuilds a circuit by topological sort of the QIR.
Circuit circuit_from_qir(const QIR& qir, const Circuit& original);

nlohmann::json to_json(const StaticProperties& p);
nlohmann::json qernel_to_json(const Qernel& q);
Qernel qernel_from_json(const nlohmann::json& j);
void save_qernel(const Qernel& q, const std::string& path);
Qernel load_qernel(const std::string& path);

}  // namespace qos
