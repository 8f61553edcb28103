#pragma once

#include "qos/distribution.hpp"
#include "qos/qernel.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace qos {

// Replacement for one half of a virtual gate, acting on the qubit that carries
// the half. A signed measurement records Z into a fresh auxiliary bit whose
// outcome m weights the result by (-1)^m. `rz_sign` scales the half's own angle
// into an RZ (used by freezing, where the angle differs per half).
struct HalfOp {
  std::vector<GateKind> gates;  // single-qubit kinds applied in order
  std::vector<double> angles;   // per gate, RZ angle (ignored otherwise)
  bool measure_first = false;   // signed measurement before `gates`
  bool measure_last = false;    // signed measurement after `gates`
  double rz_sign = 0.0;

  bool measures() const { return measure_first || measure_last; }
};

struct InstantiationTerm {
  double coefficient = 0.0;
  HalfOp side0;  // gate cut: first qubit; wire cut: source; freeze: every half
  HalfOp side1;  // gate cut: second qubit; wire cut: sink
};

struct InstantiationMapping {
  CutKind kind = CutKind::Gate;
  std::vector<InstantiationTerm> terms;
  int arity() const { return static_cast<int>(terms.size()); }
};

// RZZ(theta) = cI - isZZ split into six local terms.
InstantiationMapping gate_cut_mapping(double theta);
// Measure-and-prepare identity over the Pauli bases (eight terms).
InstantiationMapping wire_cut_mapping();
// Term z fixes the frozen qubit to z; weight 1/2 each after a leading H.
InstantiationMapping freeze_mapping(bool leading_h);
InstantiationMapping mapping_for(const VirtualGateRecord& rec);

// Executable fragment circuit for one choice of terms on the records touching it.
struct Variant {
  std::string key;
  int fragment = 0;
  std::vector<std::pair<int, int>> choice;  // (record index, term index)
  Circuit circuit;
};

// One instantiated sub-Qernel: a full index vector over all records.
struct KnitLeaf {
  std::vector<int> indices;
  double coefficient = 1.0;
  std::vector<int> variants;  // variant index per fragment
  Bitstring frozen_bits = 0;
};

struct KnitPlan {
  int num_bits = 0;  // output classical bits
  Bitstring frozen_mask = 0;
  std::vector<int> arities;
  std::vector<std::string> fragment_ids;
  std::vector<std::string> variant_keys;
  std::vector<int> variant_fragment;
  std::vector<KnitLeaf> leaves;
};

struct Instantiation {
  KnitPlan plan;
  std::vector<Variant> variants;
  std::size_t num_isqs() const { return plan.leaves.size(); }
};

// Expands every virtual gate of an optimized Qernel. A Qernel without
// children is treated as a single fragment.
Instantiation instantiate(const Qernel& optimized);

nlohmann::json knit_plan_to_json(const KnitPlan& plan);
KnitPlan knit_plan_from_json(const nlohmann::json& j);
void save_knit_plan(const KnitPlan& plan, const std::string& path);
KnitPlan load_knit_plan(const std::string& path);

}  // namespace qos
