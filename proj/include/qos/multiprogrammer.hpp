#pragma once

#include "qos/circuit.hpp"
#include "qos/knitter.hpp"
#include "qos/qernel.hpp"
#include "qos/qpu.hpp"
#include "qos/transpiler.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qos {

struct MemberShape {
  int qubits = 0;
  int depth = 0;
};

// Percentage of the QPU kept busy: the deepest member counts fully, the
// others in proportion to their depth. Throws when a member does not fit or
// the list is empty.
double effective_utilization(const std::vector<MemberShape>& members, int qpu_size);

struct CompatibilityWeights {
  double alpha = 0.25;
  double beta = 0.25;
  double gamma = 0.5;
  double threshold = 0.75;
  double epsilon = 0.05;
};

// alpha * u_eff / 100 + beta * (1 - entanglement ratio) + gamma * (1 - parallelism).
double compatibility_score(double u_eff, double entanglement_ratio, double parallelism,
                           const CompatibilityWeights& w = {});

// Places the members side by side: qubits and classical bits (auxiliary bits
// included) are concatenated in member order. Members are measured on every
// qubit when they carry no classical bits.
struct MergedCircuit {
  Circuit circuit;
  UnbundleRecord record;
  std::vector<int> qubit_owner;  // merged qubit -> member index
};
MergedCircuit merge_circuits(const std::vector<Circuit>& members, const std::vector<std::string>& ids,
                             const std::string& bundle_id);

// Qernel pair scored on a QPU using the bundled circuit's properties. Throws
// when the pair does not fit.
double compatibility(const Circuit& a, const Circuit& b, const QpuDescriptor& qpu,
                     const CompatibilityWeights& w = {});

enum class BundlePolicy : std::uint8_t { Restrict, Reevaluate };
std::string_view to_string(BundlePolicy p);
std::optional<BundlePolicy> bundle_policy_from_string(std::string_view s);

// A pending executable together with its solo transpilation on its best QPU.
struct PendingProgram {
  std::string id;
  Circuit circuit;                       // logical, no virtual gates
  std::vector<Estimation> estimations;   // ranked, best first
  TranspiledCircuit solo;                // on estimations.front().qpu_id
};

struct Bundle {
  std::string id;
  std::vector<std::string> members;
  std::string qpu_id;
  double qc = 0.0;
  double utilization = 0.0;
  BundlePolicy policy = BundlePolicy::Restrict;
  MergedCircuit merged;
  TranspiledCircuit physical;          // merged circuit on qpu_id
  std::vector<double> solo_fidelity;   // per member, estimated
  std::vector<double> bundled_fidelity;
};

struct BundleOutcome {
  std::vector<Bundle> bundles;
  std::vector<std::string> leftovers;  // ids that run solo, arrival order
};

// Solo transpilation and ranking for one program.
PendingProgram prepare_program(std::string id, const Circuit& c, const std::vector<QpuDescriptor>& farm);

// Pairs programs that share a best QPU and reach the compatibility threshold.
// Programs are taken oldest first; partners in decreasing score. Restrict
// needs disjoint solo layouts and reuses them; re-evaluation transpiles the
// merged circuit and keeps it when no member loses more than epsilon.
BundleOutcome try_bundle(const std::vector<PendingProgram>& pending, const std::vector<QpuDescriptor>& farm,
                         BundlePolicy policy, const CompatibilityWeights& w = {});

// Baseline: consecutive pairs in arrival order that fit on the first
// program's best QPU, merged and transpiled without any checks.
BundleOutcome naive_bundle(const std::vector<PendingProgram>& pending, const std::vector<QpuDescriptor>& farm);

// Physical qubits touched by a transpiled circuit.
std::vector<int> used_qubits(const Circuit& physical);

}  // namespace qos
