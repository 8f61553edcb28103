#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qos {

enum class GateKind : std::uint8_t {
  X,
  SX,
  H,
  RZ,
  CX,
  CZ,
  RZZ,
  Measure,
  Reset,
  Virtual,
};

// Placement of a virtual gate (or one of its halves) inside a circuit.
enum class VirtualRole : std::uint8_t {
  GateCut,    // 2-qubit placeholder for a cut RZZ(theta) interaction
  GateSide0,  // half of a gate cut living on the first qubit
  GateSide1,  // half of a gate cut living on the second qubit
  WireCut,    // 2-qubit marker: wire of qubits[0] continues on qubits[1]
  WireSource, // end of the upstream segment of a cut wire
  WireSink,   // start of the downstream segment of a cut wire
  Freeze,     // phase correction left on a neighbour of a frozen qubit
};

std::string_view to_string(GateKind kind);
std::string_view to_string(VirtualRole role);
std::optional<GateKind> gate_kind_from_string(std::string_view name);
std::optional<VirtualRole> virtual_role_from_string(std::string_view name);

bool is_two_qubit(GateKind kind);
bool has_angle(GateKind kind);
// Diagonal in the computational basis (RZ, CZ, RZZ).
bool is_diagonal(GateKind kind);

struct Gate {
  GateKind kind = GateKind::X;
  std::vector<int> qubits;
  double theta = 0.0;
  int clbit = -1;  // MEASURE target bit
  int vg_id = -1;  // VIRTUAL identifier
  VirtualRole role = VirtualRole::GateCut;
  std::optional<double> duration;  // seconds, set by transpilation

  static Gate make(GateKind kind, std::vector<int> qubits, double theta = 0.0) {
    Gate g;
    g.kind = kind;
    g.qubits = std::move(qubits);
    g.theta = theta;
    return g;
  }
  static Gate x(int q) { return make(GateKind::X, {q}); }
  static Gate sx(int q) { return make(GateKind::SX, {q}); }
  static Gate h(int q) { return make(GateKind::H, {q}); }
  static Gate rz(int q, double theta) { return make(GateKind::RZ, {q}, theta); }
  static Gate cx(int c, int t) { return make(GateKind::CX, {c, t}); }
  static Gate cz(int a, int b) { return make(GateKind::CZ, {a, b}); }
  static Gate rzz(int a, int b, double theta) { return make(GateKind::RZZ, {a, b}, theta); }
  static Gate measure(int q, int c) {
    Gate g = make(GateKind::Measure, {q});
    g.clbit = c;
    return g;
  }
  static Gate reset(int q) { return make(GateKind::Reset, {q}); }
  static Gate virtual_gate(std::vector<int> qubits, int vg_id, VirtualRole role,
                           double theta = 0.0) {
    Gate g = make(GateKind::Virtual, std::move(qubits), theta);
    g.vg_id = vg_id;
    g.role = role;
    return g;
  }

  bool operator==(const Gate&) const = default;
};

class CircuitError : public std::runtime_error {
public:
  CircuitError(const std::string& what, int line = 0, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

private:
  int line_;
  int column_;
};

// Device-agnostic quantum program.
//
// Classical bits [0, num_clbits) carry program output. Bits
// [num_clbits, num_clbits + num_aux_clbits) are auxiliary outcomes of
// mid-circuit measurements introduced by cut instantiation; they are allowed
// to be followed by further gates on the measured qubit.
class Circuit {
public:
  Circuit() = default;
  explicit Circuit(int num_qubits, std::string name = "circuit");
  Circuit(int num_qubits, int num_clbits, std::string name);

  int num_qubits() const { return num_qubits_; }
  int num_clbits() const { return num_clbits_; }
  int num_aux_clbits() const { return num_aux_clbits_; }
  int total_clbits() const { return num_clbits_ + num_aux_clbits_; }
  const std::string& name() const { return name_; }
  const std::vector<Gate>& gates() const { return gates_; }
  std::vector<Gate>& mutable_gates() { return gates_; }
  std::size_t size() const { return gates_.size(); }
  bool empty() const { return gates_.empty(); }

  void set_name(std::string name) { name_ = std::move(name); }
  void set_num_qubits(int n) { num_qubits_ = n; }
  void set_num_clbits(int n) { num_clbits_ = n; }
  void set_num_aux_clbits(int n) { num_aux_clbits_ = n; }
  int add_qubit() { return num_qubits_++; }
  int add_aux_clbit() { return num_clbits_ + num_aux_clbits_++; }

  Circuit& add(Gate g);
  // Measures qubit i into bit i for every qubit (grows num_clbits as needed).
  Circuit& measure_all();

  bool has_measurements() const;
  bool has_virtual_gates() const;
  int count(GateKind kind) const;
  int num_two_qubit_gates() const;

  // Throws CircuitError when an invariant is violated.
  void validate() const;

  bool operator==(const Circuit&) const = default;

private:
  int num_qubits_ = 0;
  int num_clbits_ = 0;
  int num_aux_clbits_ = 0;
  std::string name_ = "circuit";
  std::vector<Gate> gates_;
};

struct DepthOptions {
  bool count_measurements = false;
  bool count_virtual = true;
};

// Longest chain of gates under the qubit-sharing dependency.
int circuit_depth(const Circuit& c, DepthOptions options = {});

// A circuit with neither measurements nor classical bits is read as measuring
// qubit i into bit i; any other circuit is returned unchanged.
Circuit with_default_measurements(const Circuit& c);

Circuit parse_circuit(std::string_view text);
Circuit load_circuit(const std::string& path);
std::string print_circuit(const Circuit& c);
void save_circuit(const Circuit& c, const std::string& path);

}  // namespace qos
