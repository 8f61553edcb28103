#include "qos/analyzer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <functional>
#include <set>
#include <tuple>

namespace qos {

using nlohmann::json;

namespace {

void add_builtin(PassRegistry& r) {
  r.add({"qir", {}, {"qir"}, [](Qernel& q, PassReport& rep) {
           q.qir = build_qir(q.circuit);
           rep.outputs = {{"nodes", q.qir.size()},
                          {"edges", q.qir.edges().size()},
                          {"layers", q.qir.num_layers()}};
         }});
  r.add({"refine", {"qir"}, {"refined"}, [](Qernel& q, PassReport& rep) {
           q.refined = refine_qir(q.qir);
           rep.outputs = {{"edges", q.refined.weights().size()},
                          {"total_weight", q.refined.total_weight()}};
         }});
  r.add({"basic_analysis", {"qir"}, {"basic"}, [](Qernel& q, PassReport& rep) {
           const StaticProperties full = compute_static_properties(q.circuit, q.qir, q.refined);
           StaticProperties& p = q.static_props;
           p.num_qubits = full.num_qubits;
           p.depth = full.depth;
           p.num_gates = full.num_gates;
           p.num_nonlocal = full.num_nonlocal;
           p.nonlocal_by_kind = full.nonlocal_by_kind;
           p.num_measurements = full.num_measurements;
           rep.outputs = {{"num_qubits", p.num_qubits},
                          {"depth", p.depth},
                          {"num_gates", p.num_gates},
                          {"num_nonlocal", p.num_nonlocal},
                          {"num_measurements", p.num_measurements}};
         }});
  r.add({"supermarq_features", {"qir", "refined"}, {"features"}, [](Qernel& q, PassReport& rep) {
           const StaticProperties full = compute_static_properties(q.circuit, q.qir, q.refined);
           StaticProperties& p = q.static_props;
           p.program_communication = full.program_communication;
           p.critical_depth = full.critical_depth;
           p.entanglement_ratio = full.entanglement_ratio;
           p.parallelism = full.parallelism;
           p.liveness = full.liveness;
           p.measurement_ratio = full.measurement_ratio;
           rep.outputs = {{"features", p.features()}};
         }});
  r.add({"structure", {}, {"tags"}, [](Qernel& q, PassReport& rep) {
           const bool qaoa = is_qaoa_structured(q.circuit);
           if (qaoa && !q.has_tag("qaoa")) {
             q.tags.push_back("qaoa");
           }
           rep.outputs = {{"qaoa", qaoa}};
         }});
  r.add({"hotspot", {"qir", "refined"}, {}, [](Qernel& q, PassReport& rep) {
           json gates = json::array();
           json qubits = json::array();
           const bool has_gates = std::any_of(q.qir.nodes().begin(), q.qir.nodes().end(),
                                              [](const QirNode& v) { return !v.is_measurement(); });
           if (!has_gates) {
             rep.outputs = {{"gates", gates}, {"qubits", qubits}};
             return;
           }
           for (int v : hotspot_nodes(q.qir, 3)) {
             gates.push_back({{"node", v},
                              {"gate", q.qir.nodes()[static_cast<std::size_t>(v)].gate_index},
                              {"degree", q.qir.degree(v)}});
           }
           for (int v : hotspot_nodes(q.refined, 3)) {
             qubits.push_back({{"qubit", v}, {"degree", q.refined.degree(v)}});
           }
           rep.outputs = {{"gates", gates}, {"qubits", qubits}};
         }});
  r.add({"dependency_graph", {"qir"}, {}, [](Qernel& q, PassReport& rep) {
           json edges = json::array();
           for (const auto& [a, b] : dependency_reduction(q.qir)) {
             edges.push_back({a, b});
           }
           rep.outputs = {{"edges", edges}};
         }});
}

}  // namespace

PassRegistry& PassRegistry::global() {
  static PassRegistry registry = [] {
    PassRegistry r;
    add_builtin(r);
    return r;
  }();
  return registry;
}

void PassRegistry::add(AnalysisPass pass) {
  const std::string name = pass.name;
  passes_[name] = std::move(pass);
}

const AnalysisPass& PassRegistry::get(const std::string& name) const {
  const auto it = passes_.find(name);
  if (it == passes_.end()) {
    throw AnalysisError("unknown pass '" + name + "'");
  }
  return it->second;
}

std::vector<std::string> PassRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, pass] : passes_) {
    out.push_back(name);
  }
  return out;
}

std::vector<std::string> default_passes() {
  return {"qir", "refine", "basic_analysis", "supermarq_features", "structure", "hotspot",
          "dependency_graph"};
}

Qernel run_frontend(const Circuit& c, const std::vector<std::string>& passes, const std::string& id) {
  if (passes.empty() || passes.front() != "qir") {
    throw AnalysisError("pass list must start with the qir pass");
  }
  c.validate();
  Qernel q;
  q.id = id;
  q.source = c;
  q.circuit = c;
  std::set<std::string> available;
  const PassRegistry& registry = PassRegistry::global();
  for (const std::string& name : passes) {
    const AnalysisPass& pass = registry.get(name);
    for (const std::string& need : pass.needs) {
      if (available.count(need) == 0) {
        throw AnalysisError("pass '" + name + "' requires '" + need + "'");
      }
    }
    PassReport report;
    report.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    pass.run(q, report);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    q.reports.push_back(std::move(report));
    available.insert(pass.provides.begin(), pass.provides.end());
  }
  return q;
}

namespace {

std::vector<int> rank_by_degree(std::vector<std::pair<int, int>> deg, int top_k) {
  std::stable_sort(deg.begin(), deg.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<int> out;
  for (const auto& [d, v] : deg) {
    if (static_cast<int>(out.size()) >= top_k) {
      break;
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::vector<int> hotspot_nodes(const QIR& qir, int top_k) {
  std::vector<std::pair<int, int>> deg;
  for (std::size_t v = 0; v < qir.size(); ++v) {
    if (!qir.nodes()[v].is_measurement()) {
      deg.emplace_back(qir.degree(static_cast<int>(v)), static_cast<int>(v));
    }
  }
  if (deg.empty()) {
    throw AnalysisError("hotspot search on an empty graph");
  }
  return rank_by_degree(std::move(deg), top_k);
}

std::vector<int> hotspot_nodes(const RefinedQIR& refined, int top_k) {
  if (refined.num_qubits() == 0) {
    throw AnalysisError("hotspot search on an empty graph");
  }
  std::vector<std::pair<int, int>> deg;
  for (int q = 0; q < refined.num_qubits(); ++q) {
    deg.emplace_back(refined.degree(q), q);
  }
  return rank_by_degree(std::move(deg), top_k);
}

std::vector<std::pair<int, int>> dependency_reduction(const QIR& qir) {
  const std::size_t n = qir.size();
  const std::size_t words = (n + 63) / 64;
  // reach[v] = nodes reachable from v (excluding v), built in reverse topological order.
  std::vector<std::vector<std::uint64_t>> reach(n, std::vector<std::uint64_t>(words, 0));
  const std::vector<int> order = qir.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto v = static_cast<std::size_t>(*it);
    for (int w : qir.successors(*it)) {
      const auto wu = static_cast<std::size_t>(w);
      reach[v][wu / 64] |= std::uint64_t{1} << (wu % 64);
      for (std::size_t k = 0; k < words; ++k) {
        reach[v][k] |= reach[wu][k];
      }
    }
  }
  std::set<std::pair<int, int>> out;
  for (std::size_t v = 0; v < n; ++v) {
    std::set<int> succ(qir.successors(static_cast<int>(v)).begin(),
                       qir.successors(static_cast<int>(v)).end());
    for (int w : succ) {
      bool redundant = false;
      for (int u : succ) {
        const auto wu = static_cast<std::size_t>(w);
        if (u != w && ((reach[static_cast<std::size_t>(u)][wu / 64] >> (wu % 64)) & 1U) != 0) {
          redundant = true;
          break;
        }
      }
      if (!redundant) {
        out.emplace(static_cast<int>(v), w);
      }
    }
  }
  return {out.begin(), out.end()};
}

bool is_isomorphic(const QIR& a, const QIR& b) {
  const std::size_t n = a.size();
  if (n != b.size() || n > 16) {
    if (n > 16 && n == b.size()) {
      throw AnalysisError("isomorphism check limited to 16 nodes");
    }
    return false;
  }
  auto adjacency = [](const QIR& g) {
    std::vector<std::uint32_t> out(g.size(), 0);
    for (const QirEdge& e : g.edges()) {
      out[static_cast<std::size_t>(e.from)] |= 1U << e.to;
    }
    return out;
  };
  const auto adj_a = adjacency(a);
  const auto adj_b = adjacency(b);
  auto signature = [](const QIR& g, std::size_t v, const std::vector<std::uint32_t>& adj) {
    int in = 0;
    for (std::uint32_t row : adj) {
      in += static_cast<int>((row >> v) & 1U);
    }
    return std::tuple<int, int, int>(static_cast<int>(g.nodes()[v].kind),
                                     __builtin_popcount(adj[v]), in);
  };
  std::vector<int> map(n, -1);
  std::vector<bool> used(n, false);
  std::function<bool(std::size_t)> extend = [&](std::size_t v) -> bool {
    if (v == n) {
      return true;
    }
    for (std::size_t w = 0; w < n; ++w) {
      if (used[w] || signature(a, v, adj_a) != signature(b, w, adj_b)) {
        continue;
      }
      bool ok = true;
      for (std::size_t u = 0; u < v && ok; ++u) {
        const auto mu = static_cast<std::size_t>(map[u]);
        ok = (((adj_a[u] >> v) & 1U) == ((adj_b[mu] >> w) & 1U)) &&
             (((adj_a[v] >> u) & 1U) == ((adj_b[w] >> mu) & 1U));
      }
      if (!ok) {
        continue;
      }
      map[v] = static_cast<int>(w);
      used[w] = true;
      if (extend(v + 1)) {
        return true;
      }
      used[w] = false;
    }
    return false;
  };
  return extend(0);
}

bool is_qaoa_structured(const Circuit& c) {
  bool any = false;
  for (const Gate& g : c.gates()) {
    if (g.qubits.size() == 2 && g.kind != GateKind::Virtual) {
      if (g.kind != GateKind::RZZ && g.kind != GateKind::CZ) {
        return false;
      }
      any = true;
    }
  }
  return any;
}

}  // namespace qos
