#include "qos/qernel.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qos {

using nlohmann::json;

QIR::QIR(int num_qubits, std::vector<QirNode> nodes, std::vector<QirEdge> edges)
    : num_qubits_(num_qubits), nodes_(std::move(nodes)), edges_(std::move(edges)),
      succ_(nodes_.size()), pred_(nodes_.size()) {
  for (const QirEdge& e : edges_) {
    succ_[static_cast<std::size_t>(e.from)].push_back(e.to);
    pred_[static_cast<std::size_t>(e.to)].push_back(e.from);
  }
}

int QIR::num_layers() const {
  int n = 0;
  for (const QirNode& v : nodes_) {
    n = std::max(n, v.layer);
  }
  return n;
}

int QIR::degree(int v) const {
  std::set<int> nb;
  for (int w : succ_[static_cast<std::size_t>(v)]) {
    if (!nodes_[static_cast<std::size_t>(w)].is_measurement()) {
      nb.insert(w);
    }
  }
  for (int w : pred_[static_cast<std::size_t>(v)]) {
    if (!nodes_[static_cast<std::size_t>(w)].is_measurement()) {
      nb.insert(w);
    }
  }
  return static_cast<int>(nb.size());
}

std::vector<std::vector<int>> QIR::layers() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(num_layers()));
  for (std::size_t v = 0; v < nodes_.size(); ++v) {
    out[static_cast<std::size_t>(nodes_[v].layer - 1)].push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<int> QIR::topological_order() const {
  // Nodes are created in program order, which is already topological; Kahn's
  // algorithm keeps this robust for graphs built by hand.
  std::vector<int> indeg(nodes_.size(), 0);
  for (const QirEdge& e : edges_) {
    indeg[static_cast<std::size_t>(e.to)]++;
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t v = 0; v < nodes_.size(); ++v) {
    if (indeg[v] == 0) {
      ready.push(static_cast<int>(v));
    }
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int w : succ_[static_cast<std::size_t>(v)]) {
      if (--indeg[static_cast<std::size_t>(w)] == 0) {
        ready.push(w);
      }
    }
  }
  if (order.size() != nodes_.size()) {
    throw std::logic_error("QIR contains a cycle");
  }
  return order;
}

void RefinedQIR::add_interaction(int a, int b, int w) {
  if (a == b) {
    return;
  }
  weights_[{std::min(a, b), std::max(a, b)}] += w;
}

int RefinedQIR::weight(int a, int b) const {
  const auto it = weights_.find({std::min(a, b), std::max(a, b)});
  return it == weights_.end() ? 0 : it->second;
}

int RefinedQIR::degree(int q) const {
  int d = 0;
  for (const auto& [e, w] : weights_) {
    if (e.first == q || e.second == q) {
      ++d;
    }
  }
  return d;
}

int RefinedQIR::total_weight() const {
  int t = 0;
  for (const auto& [e, w] : weights_) {
    t += w;
  }
  return t;
}

std::vector<int> RefinedQIR::neighbors(int q) const {
  std::vector<int> out;
  for (const auto& [e, w] : weights_) {
    if (e.first == q) {
      out.push_back(e.second);
    } else if (e.second == q) {
      out.push_back(e.first);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<int>> RefinedQIR::components(const std::vector<bool>& active) const {
  const auto n = static_cast<std::size_t>(num_qubits_);
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    }
    return x;
  };
  auto on = [&](int q) { return active.empty() || active[static_cast<std::size_t>(q)]; };
  for (const auto& [e, w] : weights_) {
    if (on(e.first) && on(e.second)) {
      const int a = find(e.first);
      const int b = find(e.second);
      parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
  }
  std::map<int, std::vector<int>> groups;
  for (std::size_t q = 0; q < n; ++q) {
    if (on(static_cast<int>(q))) {
      groups[find(static_cast<int>(q))].push_back(static_cast<int>(q));
    }
  }
  std::vector<std::vector<int>> out;
  for (auto& [r, members] : groups) {
    out.push_back(std::move(members));
  }
  return out;
}

std::vector<double> StaticProperties::features() const {
  return {program_communication, critical_depth, entanglement_ratio,
          parallelism, liveness, measurement_ratio};
}

std::string_view to_string(JobStatus s) {
  switch (s) {
  case JobStatus::Queued: return "queued";
  case JobStatus::Scheduled: return "scheduled";
  case JobStatus::Running: return "running";
  case JobStatus::Done: return "done";
  case JobStatus::Failed: return "failed";
  }
  return "?";
}

std::optional<JobStatus> job_status_from_string(std::string_view s) {
  for (JobStatus j : {JobStatus::Queued, JobStatus::Scheduled, JobStatus::Running, JobStatus::Done,
                      JobStatus::Failed}) {
    if (to_string(j) == s) {
      return j;
    }
  }
  return std::nullopt;
}

void DynamicProperties::set_status(JobStatus s) {
  status_ = s;
  if (s != JobStatus::Done) {
    result_.reset();
  }
}

void DynamicProperties::set_result(Distribution d) {
  result_ = std::move(d);
  status_ = JobStatus::Done;
}

std::string_view to_string(CutKind k) {
  switch (k) {
  case CutKind::Gate: return "gate";
  case CutKind::Wire: return "wire";
  case CutKind::Freeze: return "freeze";
  }
  return "?";
}

bool Qernel::has_tag(std::string_view t) const {
  return std::find(tags.begin(), tags.end(), t) != tags.end();
}

void Qernel::analyze() {
  qir = build_qir(circuit);
  refined = refine_qir(qir);
  static_props = compute_static_properties(circuit, qir, refined);
}

StaticProperties compute_static_properties(const Circuit& c) {
  const QIR qir = build_qir(c);
  return compute_static_properties(c, qir, refine_qir(qir));
}

QIR build_qir(const Circuit& c) {
  std::vector<QirNode> nodes;
  std::vector<QirEdge> edges;
  std::vector<int> last(static_cast<std::size_t>(c.num_qubits()), -1);
  const auto& gates = c.gates();
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate& g = gates[i];
    QirNode node;
    node.gate_index = static_cast<int>(i);
    node.kind = g.kind;
    node.qubits = g.qubits;
    const int id = static_cast<int>(nodes.size());
    int layer = 0;
    for (int q : g.qubits) {
      const int prev = last[static_cast<std::size_t>(q)];
      if (prev >= 0) {
        edges.push_back({prev, id, q});
        layer = std::max(layer, nodes[static_cast<std::size_t>(prev)].layer);
      }
      last[static_cast<std::size_t>(q)] = id;
    }
    node.layer = layer + 1;
    nodes.push_back(std::move(node));
  }
  return QIR(c.num_qubits(), std::move(nodes), std::move(edges));
}

RefinedQIR refine_qir(const QIR& qir) {
  RefinedQIR r(qir.num_qubits());
  // Each 2-qubit node contributes one unit of weight to its qubit pair.
  for (const QirNode& v : qir.nodes()) {
    if (v.qubits.size() == 2) {
      r.add_interaction(v.qubits[0], v.qubits[1]);
    }
  }
  return r;
}

StaticProperties compute_static_properties(const Circuit& c, const QIR& qir,
                                           const RefinedQIR& refined) {
  StaticProperties p;
  p.num_qubits = c.num_qubits();
  p.depth = circuit_depth(c);
  int resets = 0;
  for (const Gate& g : c.gates()) {
    if (g.kind == GateKind::Measure) {
      ++p.num_measurements;
      continue;
    }
    ++p.num_gates;
    if (g.kind == GateKind::Reset) {
      ++resets;
    }
    if (g.qubits.size() == 2) {
      ++p.num_nonlocal;
      p.nonlocal_by_kind[g.kind]++;
    }
  }
  if (p.num_gates == 0) {
    return p;
  }
  const double n = p.num_qubits;
  p.entanglement_ratio = static_cast<double>(p.num_nonlocal) / p.num_gates;

  if (p.num_qubits > 1) {
    double deg = 0.0;
    for (int q = 0; q < p.num_qubits; ++q) {
      deg += refined.degree(q);
    }
    p.program_communication = deg / (n * (n - 1.0));
    p.parallelism = std::clamp((static_cast<double>(p.num_gates) / p.depth - 1.0) / (n - 1.0), 0.0, 1.0);
  }

  // Longest gate chain, preferring the chain with more 2-qubit gates on ties.
  const auto& nodes = qir.nodes();
  std::vector<std::pair<int, int>> best(nodes.size(), {0, 0});  // (length, nonlocal)
  std::pair<int, int> crit{0, 0};
  for (int v : qir.topological_order()) {
    const QirNode& node = nodes[static_cast<std::size_t>(v)];
    if (node.is_measurement()) {
      continue;
    }
    std::pair<int, int> b{0, 0};
    for (int u : qir.predecessors(v)) {
      b = std::max(b, best[static_cast<std::size_t>(u)]);
    }
    b.first += 1;
    b.second += node.qubits.size() == 2 ? 1 : 0;
    best[static_cast<std::size_t>(v)] = b;
    crit = std::max(crit, b);
  }
  if (p.num_nonlocal > 0) {
    p.critical_depth = static_cast<double>(crit.second) / p.num_nonlocal;
  }

  // Per-qubit activity over the gate layers.
  std::vector<std::set<int>> active(static_cast<std::size_t>(p.num_qubits));
  int gate_layers = 0;
  for (const QirNode& node : nodes) {
    if (node.is_measurement()) {
      continue;
    }
    gate_layers = std::max(gate_layers, node.layer);
    for (int q : node.qubits) {
      active[static_cast<std::size_t>(q)].insert(node.layer);
    }
  }
  double live = 0.0;
  for (const auto& s : active) {
    live += static_cast<double>(s.size());
  }
  p.liveness = gate_layers > 0 ? live / (n * gate_layers) : 0.0;

  const int full_depth = circuit_depth(c, {.count_measurements = true});
  p.measurement_ratio =
      full_depth > 0 ? std::min(1.0, static_cast<double>(p.num_measurements + resets) / full_depth) : 0.0;
  return p;
}

StaticProperties compute_static_properties(const Qernel& q) {
  return compute_static_properties(q.circuit, q.qir, q.refined);
}

Circuit circuit_from_qir(const QIR& qir, const Circuit& original) {
  Circuit out(original.num_qubits(), original.num_clbits(), original.name());
  out.set_num_aux_clbits(original.num_aux_clbits());
  for (int v : qir.topological_order()) {
    out.mutable_gates().push_back(
        original.gates()[static_cast<std::size_t>(qir.nodes()[static_cast<std::size_t>(v)].gate_index)]);
  }
  return out;
}

json to_json(const StaticProperties& p) {
  json by_kind = json::object();
  for (const auto& [k, v] : p.nonlocal_by_kind) {
    by_kind[std::string(to_string(k))] = v;
  }
  return {{"num_qubits", p.num_qubits},
          {"depth", p.depth},
          {"num_gates", p.num_gates},
          {"num_nonlocal", p.num_nonlocal},
          {"nonlocal_by_kind", by_kind},
          {"num_measurements", p.num_measurements},
          {"program_communication", p.program_communication},
          {"critical_depth", p.critical_depth},
          {"entanglement_ratio", p.entanglement_ratio},
          {"parallelism", p.parallelism},
          {"liveness", p.liveness},
          {"measurement_ratio", p.measurement_ratio}};
}

namespace {

json gate_json(const Gate& g) {
  Circuit one(1 + *std::max_element(g.qubits.begin(), g.qubits.end()), std::max(0, g.clbit + 1), "gate");
  one.mutable_gates().push_back(g);
  return print_circuit(one);
}

Gate gate_from_json(const json& j) {
  const Circuit one = parse_circuit(j.get<std::string>());
  return one.gates().at(0);
}

}  // namespace

json qernel_to_json(const Qernel& q) {
  json j;
  j["id"] = q.id;
  j["tags"] = q.tags;
  j["source"] = print_circuit(q.source);
  j["circuit"] = print_circuit(q.circuit);
  j["status"] = std::string(to_string(q.dynamic.status()));
  j["static_properties"] = to_json(q.static_props);
  j["qubit_map"] = q.qubit_map;
  json qir_nodes = json::array();
  for (const QirNode& v : q.qir.nodes()) {
    qir_nodes.push_back({{"gate", v.gate_index}, {"kind", to_string(v.kind)}, {"layer", v.layer}});
  }
  json qir_edges = json::array();
  for (const QirEdge& e : q.qir.edges()) {
    qir_edges.push_back({e.from, e.to, e.qubit});
  }
  j["qir"] = {{"nodes", qir_nodes}, {"edges", qir_edges}};
  json refined = json::array();
  for (const auto& [e, w] : q.refined.weights()) {
    refined.push_back({e.first, e.second, w});
  }
  j["refined_qir"] = refined;
  json records = json::array();
  for (const VirtualGateRecord& r : q.virtual_gate_records) {
    records.push_back({{"vg_id", r.vg_id},
                       {"kind", to_string(r.kind)},
                       {"original", gate_json(r.original)},
                       {"location", r.location},
                       {"position", r.position},
                       {"new_qubit", r.new_qubit},
                       {"frozen_clbit", r.frozen_clbit},
                       {"leading_h", r.leading_h}});
  }
  j["virtual_gates"] = records;
  json reports = json::array();
  for (const PassReport& r : q.reports) {
    reports.push_back({{"pass", r.name}, {"outputs", r.outputs}});
  }
  j["reports"] = reports;
  json children = json::array();
  for (const Qernel& c : q.children) {
    children.push_back(qernel_to_json(c));
  }
  j["children"] = children;
  return j;
}

Qernel qernel_from_json(const json& j) {
  Qernel q;
  q.id = j.at("id").get<std::string>();
  q.tags = j.value("tags", std::vector<std::string>{});
  q.source = parse_circuit(j.at("source").get<std::string>());
  q.circuit = parse_circuit(j.at("circuit").get<std::string>());
  q.qubit_map = j.value("qubit_map", std::vector<std::vector<int>>{});
  if (const auto st = job_status_from_string(j.value("status", "queued"))) {
    q.dynamic.set_status(*st);
  }
  for (const json& r : j.value("virtual_gates", json::array())) {
    VirtualGateRecord rec;
    rec.vg_id = r.at("vg_id").get<int>();
    const std::string kind = r.at("kind").get<std::string>();
    rec.kind = kind == "gate" ? CutKind::Gate : kind == "wire" ? CutKind::Wire : CutKind::Freeze;
    rec.original = gate_from_json(r.at("original"));
    rec.location = r.value("location", -1);
    rec.position = r.value("position", -1);
    rec.new_qubit = r.value("new_qubit", -1);
    rec.frozen_clbit = r.value("frozen_clbit", -1);
    rec.leading_h = r.value("leading_h", false);
    q.virtual_gate_records.push_back(rec);
  }
  for (const json& r : j.value("reports", json::array())) {
    q.reports.push_back({r.at("pass").get<std::string>(), r.at("outputs"), 0.0});
  }
  for (const json& c : j.value("children", json::array())) {
    q.children.push_back(qernel_from_json(c));
  }
  q.analyze();
  return q;
}

void save_qernel(const Qernel& q, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write qernel '" + path + "'");
  }
  out << qernel_to_json(q).dump(2) << '\n';
}

Qernel load_qernel(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open qernel '" + path + "'");
  }
  return qernel_from_json(json::parse(in));
}

}  // namespace qos
