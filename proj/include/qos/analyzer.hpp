#pragma once

#include "qos/qernel.hpp"

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace qos {

class AnalysisError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A frontend pass. `needs` names artifacts that must already exist
// ("qir", "refined"); `provides` names what the pass adds.
struct AnalysisPass {
  std::string name;
  std::vector<std::string> needs;
  std::vector<std::string> provides;
  std::function<void(Qernel&, PassReport&)> run;
};

class PassRegistry {
public:
  // Registry preloaded with the built-in passes.
  static PassRegistry& global();

  void add(AnalysisPass pass);
  const AnalysisPass& get(const std::string& name) const;
  bool contains(const std::string& name) const { return passes_.count(name) != 0; }
  std::vector<std::string> names() const;

private:
  std::map<std::string, AnalysisPass> passes_;
};

// qir, refine, basic_analysis, supermarq_features, structure, hotspot, dependency_graph
std::vector<std::string> default_passes();

Qernel run_frontend(const Circuit& c, const std::vector<std::string>& passes = default_passes(),
                    const std::string& id = "q0");

// Gate nodes ranked by degree (descending, ties by lowest id); M nodes excluded.
std::vector<int> hotspot_nodes(const QIR& qir, int top_k);
// Qubits ranked by refined-QIR degree.
std::vector<int> hotspot_nodes(const RefinedQIR& refined, int top_k);

// Transitive reduction of the QIR dependency edges, as (from, to) node pairs.
std::vector<std::pair<int, int>> dependency_reduction(const QIR& qir);

// Exact labelled-DAG isomorphism for graphs of at most 16 nodes.
bool is_isomorphic(const QIR& a, const QIR& b);

// Every 2-qubit gate is diagonal (RZZ or CZ) and at least one exists.
bool is_qaoa_structured(const Circuit& c);

}  // namespace qos
