#include "qos/multiprogrammer.hpp"

#include "qos/estimator.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace qos {

double effective_utilization(const std::vector<MemberShape>& members, int qpu_size) {
  if (members.empty() || qpu_size <= 0) {
    throw std::invalid_argument("effective utilization needs members and a QPU");
  }
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (members[i].qubits <= 0 || members[i].qubits > qpu_size || members[i].depth < 0) {
      throw std::invalid_argument("member does not fit on the QPU");
    }
    if (members[i].depth > members[deepest].depth) {
      deepest = i;
    }
  }
  const double n = static_cast<double>(qpu_size);
  const double d_max = static_cast<double>(members[deepest].depth);
  double u = members[deepest].qubits / n * 100.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (i == deepest) {
      continue;
    }
    const double ratio = d_max > 0.0 ? members[i].depth / d_max : 1.0;
    u += ratio * members[i].qubits / n * 100.0;
  }
  return u;
}

double compatibility_score(double u_eff, double entanglement_ratio, double parallelism,
                           const CompatibilityWeights& w) {
  return w.alpha * (u_eff / 100.0) + w.beta * (1.0 - entanglement_ratio) + w.gamma * (1.0 - parallelism);
}

MergedCircuit merge_circuits(const std::vector<Circuit>& members, const std::vector<std::string>& ids,
                             const std::string& bundle_id) {
  if (members.size() != ids.size()) {
    throw std::invalid_argument("one id per bundle member");
  }
  MergedCircuit out;
  out.record.bundle_id = bundle_id;
  int qubits = 0;
  int clbits = 0;
  std::vector<Circuit> measured;
  for (const Circuit& m : members) {
    measured.push_back(with_default_measurements(m));
    qubits += measured.back().num_qubits();
    clbits += measured.back().total_clbits();
  }
  out.circuit = Circuit(qubits, clbits, bundle_id);
  int q0 = 0;
  int c0 = 0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const Circuit& m = measured[i];
    for (Gate g : m.gates()) {
      if (g.kind == GateKind::Virtual) {
        throw std::invalid_argument("cannot bundle a circuit with virtual gates");
      }
      for (int& q : g.qubits) {
        q += q0;
      }
      if (g.clbit >= 0) {
        g.clbit += c0;
      }
      out.circuit.add(std::move(g));
    }
    out.record.slices.push_back({ids[i], c0, m.total_clbits()});
    out.qubit_owner.insert(out.qubit_owner.end(), static_cast<std::size_t>(m.num_qubits()), static_cast<int>(i));
    q0 += m.num_qubits();
    c0 += m.total_clbits();
  }
  return out;
}

namespace {

MemberShape shape_of(const Circuit& c) {
  return {c.num_qubits(), compute_static_properties(with_default_measurements(c)).depth};
}

double score_merged(const Circuit& a, const Circuit& b, const Circuit& merged, int qpu_size,
                    const CompatibilityWeights& w) {
  const double u = effective_utilization({shape_of(a), shape_of(b)}, qpu_size);
  const StaticProperties p = compute_static_properties(merged);
  return compatibility_score(u, p.entanglement_ratio, p.parallelism, w);
}

const QpuDescriptor& find_qpu(const std::vector<QpuDescriptor>& farm, const std::string& id) {
  for (const QpuDescriptor& q : farm) {
    if (q.id == id) {
      return q;
    }
  }
  throw std::invalid_argument("unknown QPU " + id);
}

// Side-by-side physical circuits already placed on disjoint qubits.
TranspiledCircuit merge_physical(const PendingProgram& a, const PendingProgram& b, const MergedCircuit& m) {
  TranspiledCircuit out;
  out.target = a.solo.target;
  out.physical = Circuit(a.solo.physical.num_qubits(), m.circuit.num_clbits(), m.circuit.name());
  const int offset = a.solo.physical.total_clbits();
  const int logical_offset = static_cast<int>(with_default_measurements(a.circuit).size());
  for (const Gate& g : a.solo.physical.gates()) {
    out.physical.mutable_gates().push_back(g);
  }
  for (Gate g : b.solo.physical.gates()) {
    if (g.clbit >= 0) {
      g.clbit += offset;
    }
    out.physical.mutable_gates().push_back(std::move(g));
  }
  out.source = a.solo.source;
  for (int s : b.solo.source) {
    out.source.push_back(s + logical_offset);
  }
  out.initial_layout = a.solo.initial_layout;
  out.initial_layout.insert(out.initial_layout.end(), b.solo.initial_layout.begin(), b.solo.initial_layout.end());
  out.final_layout = a.solo.final_layout;
  out.final_layout.insert(out.final_layout.end(), b.solo.final_layout.begin(), b.solo.final_layout.end());
  out.swaps = a.solo.swaps + b.solo.swaps;
  return out;
}

bool disjoint(const std::vector<int>& x, const std::vector<int>& y) {
  std::vector<int> both;
  std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(both));
  return both.empty();
}

Bundle make_bundle(const PendingProgram& a, const PendingProgram& b, const QpuDescriptor& qpu,
                   BundlePolicy policy) {
  Bundle bundle;
  bundle.id = a.id + "+" + b.id;
  bundle.members = {a.id, b.id};
  bundle.qpu_id = qpu.id;
  bundle.policy = policy;
  bundle.merged = merge_circuits({a.circuit, b.circuit}, {a.id, b.id}, bundle.id);
  bundle.utilization = effective_utilization({shape_of(a.circuit), shape_of(b.circuit)}, qpu.num_qubits);
  bundle.solo_fidelity = {a.estimations.front().fidelity_score, b.estimations.front().fidelity_score};
  return bundle;
}

}  // namespace

double compatibility(const Circuit& a, const Circuit& b, const QpuDescriptor& qpu, const CompatibilityWeights& w) {
  if (a.num_qubits() + b.num_qubits() > qpu.num_qubits) {
    throw std::invalid_argument("pair does not fit on QPU " + qpu.id);
  }
  const MergedCircuit m = merge_circuits({a, b}, {"a", "b"}, "pair");
  return score_merged(a, b, m.circuit, qpu.num_qubits, w);
}

std::string_view to_string(BundlePolicy p) { return p == BundlePolicy::Restrict ? "restrict" : "reevaluate"; }

std::optional<BundlePolicy> bundle_policy_from_string(std::string_view s) {
  if (s == "restrict") {
    return BundlePolicy::Restrict;
  }
  if (s == "reevaluate") {
    return BundlePolicy::Reevaluate;
  }
  return std::nullopt;
}

std::vector<int> used_qubits(const Circuit& physical) {
  std::set<int> used;
  for (const Gate& g : physical.gates()) {
    used.insert(g.qubits.begin(), g.qubits.end());
  }
  return {used.begin(), used.end()};
}

PendingProgram prepare_program(std::string id, const Circuit& c, const std::vector<QpuDescriptor>& farm) {
  PendingProgram p;
  p.id = std::move(id);
  p.circuit = c;
  p.estimations = rank_assignments(c, farm);
  p.solo = transpile(c, find_qpu(farm, p.estimations.front().qpu_id));
  return p;
}

BundleOutcome try_bundle(const std::vector<PendingProgram>& pending, const std::vector<QpuDescriptor>& farm,
                         BundlePolicy policy, const CompatibilityWeights& w) {
  BundleOutcome out;
  std::vector<bool> taken(pending.size(), false);
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (taken[i]) {
      continue;
    }
    const PendingProgram& a = pending[i];
    if (a.estimations.empty()) {
      throw std::invalid_argument("program " + a.id + " has no estimations");
    }
    const QpuDescriptor& qpu = find_qpu(farm, a.estimations.front().qpu_id);
    struct Candidate {
      std::size_t j;
      double qc;
    };
    std::vector<Candidate> candidates;
    for (std::size_t j = 0; j < pending.size(); ++j) {
      const PendingProgram& b = pending[j];
      if (j == i || taken[j] || b.estimations.empty() || b.estimations.front().qpu_id != qpu.id ||
          a.circuit.num_qubits() + b.circuit.num_qubits() > qpu.num_qubits) {
        continue;
      }
      candidates.push_back({j, compatibility(a.circuit, b.circuit, qpu, w)});
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& x, const Candidate& y) { return x.qc > y.qc; });
    for (const Candidate& cand : candidates) {
      if (cand.qc < w.threshold) {
        break;
      }
      const PendingProgram& b = pending[cand.j];
      Bundle bundle = make_bundle(a, b, qpu, policy);
      bundle.qc = cand.qc;
      if (policy == BundlePolicy::Restrict) {
        if (!disjoint(used_qubits(a.solo.physical), used_qubits(b.solo.physical))) {
          continue;
        }
        bundle.physical = merge_physical(a, b, bundle.merged);
      } else {
        bundle.physical = transpile(bundle.merged.circuit, qpu);
      }
      bundle.bundled_fidelity = estimate_members(bundle.merged.circuit, bundle.physical, qpu, bundle.merged.qubit_owner);
      if (policy == BundlePolicy::Reevaluate &&
          (bundle.bundled_fidelity[0] < bundle.solo_fidelity[0] - w.epsilon ||
           bundle.bundled_fidelity[1] < bundle.solo_fidelity[1] - w.epsilon)) {
        continue;
      }
      taken[i] = true;
      taken[cand.j] = true;
      out.bundles.push_back(std::move(bundle));
      break;
    }
  }
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (!taken[i]) {
      out.leftovers.push_back(pending[i].id);
    }
  }
  return out;
}

BundleOutcome naive_bundle(const std::vector<PendingProgram>& pending, const std::vector<QpuDescriptor>& farm) {
  BundleOutcome out;
  std::size_t i = 0;
  while (i < pending.size()) {
    if (i + 1 == pending.size()) {
      out.leftovers.push_back(pending[i].id);
      break;
    }
    const PendingProgram& a = pending[i];
    const PendingProgram& b = pending[i + 1];
    const QpuDescriptor& qpu = find_qpu(farm, a.estimations.front().qpu_id);
    if (a.circuit.num_qubits() + b.circuit.num_qubits() > qpu.num_qubits) {
      out.leftovers.push_back(a.id);
      ++i;
      continue;
    }
    Bundle bundle = make_bundle(a, b, qpu, BundlePolicy::Reevaluate);
    bundle.qc = compatibility(a.circuit, b.circuit, qpu);
    bundle.physical = transpile(bundle.merged.circuit, qpu);
    bundle.bundled_fidelity = estimate_members(bundle.merged.circuit, bundle.physical, qpu, bundle.merged.qubit_owner);
    out.bundles.push_back(std::move(bundle));
    i += 2;
  }
  return out;
}

}  // namespace qos
