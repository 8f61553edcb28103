#include "qos/qpu.hpp"

#include "qos/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace qos {

using nlohmann::json;

GateKey GateKey::of(GateKind kind, const std::vector<int>& qubits) {
  if (qubits.size() == 2) {
    const Edge e = Edge::of(qubits[0], qubits[1]);
    return {kind, e.a, e.b};
  }
  return {kind, qubits.empty() ? 0 : qubits[0], -1};
}

namespace {

double default_error(const ArchitectureBaseline& d, GateKind kind) {
  switch (kind) {
  case GateKind::RZ:
  case GateKind::Measure:
  case GateKind::Reset:
  case GateKind::Virtual:
    return 0.0;
  case GateKind::CX:
  case GateKind::CZ:
  case GateKind::RZZ:
    return d.gate_error_2q;
  default:
    return d.gate_error_1q;
  }
}

double default_duration(const ArchitectureBaseline& d, GateKind kind) {
  switch (kind) {
  case GateKind::RZ:
  case GateKind::Virtual:
    return 0.0;
  case GateKind::Measure:
    return d.duration_measure;
  case GateKind::Reset:
    return d.duration_reset;
  case GateKind::CX:
  case GateKind::CZ:
  case GateKind::RZZ:
    return d.duration_2q;
  default:
    return d.duration_1q;
  }
}

}  // namespace

double CalibrationData::error(GateKind kind, const std::vector<int>& qubits, bool* missing) const {
  // RZ is a frame change: no error, no duration.
  if (kind == GateKind::RZ || kind == GateKind::Virtual || kind == GateKind::Measure ||
      kind == GateKind::Reset) {
    return 0.0;
  }
  const auto it = gate_error.find(GateKey::of(kind, qubits));
  if (it != gate_error.end()) {
    return it->second;
  }
  if (missing != nullptr) {
    *missing = true;
  }
  return default_error(defaults, kind);
}

double CalibrationData::duration(GateKind kind, const std::vector<int>& qubits,
                                 bool* missing) const {
  if (kind == GateKind::RZ || kind == GateKind::Virtual) {
    return 0.0;
  }
  const auto it = gate_duration.find(GateKey::of(kind, qubits));
  if (it != gate_duration.end()) {
    return it->second;
  }
  if (missing != nullptr) {
    *missing = true;
  }
  return default_duration(defaults, kind);
}

double CalibrationData::crosstalk(Edge e1, Edge e2) const {
  if (e2 < e1) {
    std::swap(e1, e2);
  }
  const auto it = crosstalk_error.find({e1, e2});
  return it == crosstalk_error.end() ? 0.0 : it->second;
}

double CalibrationData::readout(int q, bool* missing) const {
  if (q >= 0 && static_cast<std::size_t>(q) < readout_error.size()) {
    return readout_error[static_cast<std::size_t>(q)];
  }
  if (missing != nullptr) {
    *missing = true;
  }
  return defaults.readout_error;
}

double CalibrationData::t2_of(int q, bool* missing) const {
  if (q >= 0 && static_cast<std::size_t>(q) < t2.size()) {
    return t2[static_cast<std::size_t>(q)];
  }
  if (missing != nullptr) {
    *missing = true;
  }
  return defaults.t2;
}

void CalibrationData::validate(int num_qubits) const {
  auto check_error = [](double e, const char* what) {
    if (!(e >= 0.0 && e < 1.0)) {
      throw std::invalid_argument(std::string(what) + " outside [0,1)");
    }
  };
  if (static_cast<int>(readout_error.size()) > num_qubits ||
      static_cast<int>(t2.size()) > num_qubits) {
    throw std::invalid_argument("calibration has more qubits than the QPU");
  }
  for (double e : readout_error) {
    check_error(e, "readout error");
  }
  for (double t : t2) {
    if (!(t > 0.0)) {
      throw std::invalid_argument("T2 must be positive");
    }
  }
  for (const auto& [key, e] : gate_error) {
    check_error(e, "gate error");
  }
  for (const auto& [key, d] : gate_duration) {
    if (!(d > 0.0)) {
      throw std::invalid_argument("gate durations must be positive");
    }
  }
  for (const auto& [key, e] : crosstalk_error) {
    check_error(e, "crosstalk error");
  }
}

bool QpuDescriptor::adjacent(int a, int b) const {
  const Edge e = Edge::of(a, b);
  return std::find(coupling_map.begin(), coupling_map.end(), e) != coupling_map.end();
}

std::vector<std::vector<int>> QpuDescriptor::neighbors() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_qubits));
  for (const Edge& e : coupling_map) {
    adj[static_cast<std::size_t>(e.a)].push_back(e.b);
    adj[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
  }
  return adj;
}

std::vector<std::vector<int>> QpuDescriptor::distances() const {
  const auto adj = neighbors();
  const auto n = static_cast<std::size_t>(num_qubits);
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, std::numeric_limits<int>::max()));
  for (std::size_t s = 0; s < n; ++s) {
    std::queue<int> frontier;
    dist[s][s] = 0;
    frontier.push(static_cast<int>(s));
    while (!frontier.empty()) {
      const int u = frontier.front();
      frontier.pop();
      for (int v : adj[static_cast<std::size_t>(u)]) {
        if (dist[s][static_cast<std::size_t>(v)] == std::numeric_limits<int>::max()) {
          dist[s][static_cast<std::size_t>(v)] = dist[s][static_cast<std::size_t>(u)] + 1;
          frontier.push(v);
        }
      }
    }
  }
  return dist;
}

GateKind QpuDescriptor::two_qubit_basis() const {
  if (basis_gates.count(GateKind::CX) != 0) {
    return GateKind::CX;
  }
  if (basis_gates.count(GateKind::CZ) != 0) {
    return GateKind::CZ;
  }
  throw std::invalid_argument("QPU " + id + " has no supported 2-qubit basis gate");
}

std::vector<std::pair<Edge, Edge>> QpuDescriptor::adjacent_edge_pairs() const {
  std::vector<std::pair<Edge, Edge>> out;
  for (std::size_t i = 0; i < coupling_map.size(); ++i) {
    for (std::size_t j = i + 1; j < coupling_map.size(); ++j) {
      const Edge& e1 = coupling_map[i];
      const Edge& e2 = coupling_map[j];
      if (e1.shares_qubit(e2)) {
        continue;
      }
      if (adjacent(e1.a, e2.a) || adjacent(e1.a, e2.b) || adjacent(e1.b, e2.a) ||
          adjacent(e1.b, e2.b)) {
        out.emplace_back(std::min(e1, e2), std::max(e1, e2));
      }
    }
  }
  return out;
}

void QpuDescriptor::validate() const {
  if (num_qubits <= 0) {
    throw std::invalid_argument("QPU " + id + " has no qubits");
  }
  for (const Edge& e : coupling_map) {
    if (e.a < 0 || e.b >= num_qubits || e.a >= e.b) {
      throw std::invalid_argument("QPU " + id + " coupling map references invalid qubits");
    }
  }
  if (basis_gates.count(GateKind::CX) == 0 && basis_gates.count(GateKind::CZ) == 0 &&
      basis_gates.count(GateKind::RZZ) == 0) {
    throw std::invalid_argument("QPU " + id + " basis has no 2-qubit gate");
  }
  if (num_qubits > 1) {
    const auto dist = distances();
    for (int q = 0; q < num_qubits; ++q) {
      if (dist[0][static_cast<std::size_t>(q)] == std::numeric_limits<int>::max()) {
        throw std::invalid_argument("QPU " + id + " coupling graph is disconnected");
      }
    }
  }
  calibration.validate(num_qubits);
}

std::vector<Edge> line_coupling(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) {
    edges.push_back({i, i + 1});
  }
  return edges;
}

std::vector<Edge> ring_coupling(int n) {
  auto edges = line_coupling(n);
  if (n > 2) {
    edges.push_back({0, n - 1});
  }
  return edges;
}

std::vector<Edge> grid_coupling(int rows, int cols) {
  std::vector<Edge> edges;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int q = r * cols + c;
      if (c + 1 < cols) {
        edges.push_back({q, q + 1});
      }
      if (r + 1 < rows) {
        edges.push_back({q, q + cols});
      }
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

std::vector<Edge> falcon27_coupling() {
  return {{0, 1},   {1, 2},   {1, 4},   {2, 3},   {3, 5},   {4, 7},   {5, 8},
          {6, 7},   {7, 10},  {8, 9},   {8, 11},  {10, 12}, {11, 14}, {12, 13},
          {12, 15}, {13, 14}, {14, 16}, {15, 18}, {16, 19}, {17, 18}, {18, 21},
          {19, 20}, {19, 22}, {21, 23}, {22, 25}, {23, 24}, {24, 25}, {25, 26}};
}

namespace {

std::vector<std::pair<Edge, Edge>> adjacent_pairs_of(const std::vector<Edge>& coupling) {
  QpuDescriptor probe;
  probe.coupling_map = coupling;
  return probe.adjacent_edge_pairs();
}

}  // namespace

CalibrationData sample_calibration(const QpuTemplate& tmpl, std::int64_t cycle, double sigma,
                                   std::uint64_t seed) {
  Rng rng(derive_seed(seed ^ fnv1a(tmpl.id), static_cast<std::uint64_t>(cycle)));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](double base, double cap) {
    return std::min(base * std::exp(sigma * normal(rng)), cap);
  };
  const ArchitectureBaseline& b = tmpl.baseline;
  CalibrationData cal;
  cal.timestamp = cycle;
  cal.defaults = b;
  const GateKind two_q = tmpl.basis_gates.count(GateKind::CX) != 0 ? GateKind::CX : GateKind::CZ;
  for (int q = 0; q < tmpl.num_qubits; ++q) {
    cal.readout_error.push_back(draw(b.readout_error, 0.45));
    cal.t2.push_back(b.t2 * std::exp(sigma * normal(rng)));
    const double e1 = draw(b.gate_error_1q, 0.2);
    const double d1 = b.duration_1q;
    for (GateKind k : {GateKind::X, GateKind::SX}) {
      cal.gate_error[{k, q, -1}] = e1;
      cal.gate_duration[{k, q, -1}] = d1;
    }
    cal.gate_duration[{GateKind::Measure, q, -1}] = b.duration_measure;
    cal.gate_duration[{GateKind::Reset, q, -1}] = b.duration_reset;
  }
  for (const Edge& e : tmpl.coupling_map) {
    cal.gate_error[{two_q, e.a, e.b}] = draw(b.gate_error_2q, 0.5);
    cal.gate_duration[{two_q, e.a, e.b}] = b.duration_2q * std::exp(0.25 * sigma * normal(rng));
  }
  for (const auto& pair : adjacent_pairs_of(tmpl.coupling_map)) {
    cal.crosstalk_error[pair] = draw(b.crosstalk_error, 0.3);
  }
  return cal;
}

CalibrationData ideal_calibration(const QpuTemplate& tmpl) {
  CalibrationData cal;
  cal.defaults = tmpl.baseline;
  cal.defaults.readout_error = 0.0;
  cal.defaults.gate_error_1q = 0.0;
  cal.defaults.gate_error_2q = 0.0;
  cal.defaults.crosstalk_error = 0.0;
  cal.defaults.t2 = std::numeric_limits<double>::infinity();
  const GateKind two_q = tmpl.basis_gates.count(GateKind::CX) != 0 ? GateKind::CX : GateKind::CZ;
  for (int q = 0; q < tmpl.num_qubits; ++q) {
    cal.readout_error.push_back(0.0);
    cal.t2.push_back(std::numeric_limits<double>::infinity());
    for (GateKind k : {GateKind::X, GateKind::SX}) {
      cal.gate_error[{k, q, -1}] = 0.0;
      cal.gate_duration[{k, q, -1}] = tmpl.baseline.duration_1q;
    }
    cal.gate_duration[{GateKind::Measure, q, -1}] = tmpl.baseline.duration_measure;
    cal.gate_duration[{GateKind::Reset, q, -1}] = tmpl.baseline.duration_reset;
  }
  for (const Edge& e : tmpl.coupling_map) {
    cal.gate_error[{two_q, e.a, e.b}] = 0.0;
    cal.gate_duration[{two_q, e.a, e.b}] = tmpl.baseline.duration_2q;
  }
  return cal;
}

QpuDescriptor make_qpu(const QpuTemplate& tmpl, CalibrationData calibration) {
  QpuDescriptor qpu;
  qpu.id = tmpl.id;
  qpu.architecture_tag = tmpl.architecture_tag;
  qpu.num_qubits = tmpl.num_qubits;
  qpu.coupling_map = tmpl.coupling_map;
  qpu.basis_gates = tmpl.basis_gates;
  qpu.calibration = std::move(calibration);
  return qpu;
}

QpuTemplate line_template(const std::string& id, int n) {
  QpuTemplate t;
  t.id = id;
  t.architecture_tag = "line" + std::to_string(n);
  t.num_qubits = n;
  t.coupling_map = line_coupling(n);
  return t;
}

QpuTemplate falcon27_template(const std::string& id) {
  QpuTemplate t;
  t.id = id;
  t.architecture_tag = "falcon27";
  t.num_qubits = 27;
  t.coupling_map = falcon27_coupling();
  return t;
}

std::vector<QpuDescriptor> make_falcon_farm(int count, double sigma, std::uint64_t seed,
                                            std::int64_t cycle) {
  std::vector<QpuDescriptor> farm;
  for (int i = 0; i < count; ++i) {
    const auto tmpl = falcon27_template("qpu" + std::to_string(i));
    farm.push_back(make_qpu(tmpl, sample_calibration(tmpl, cycle, sigma, seed)));
  }
  return farm;
}

// JSON ----------------------------------------------------------------------

namespace {

json gate_key_json(const GateKey& k, double v) {
  json j{{"gate", std::string(to_string(k.kind))}, {"qubits", json::array({k.a})}, {"value", v}};
  if (k.b >= 0) {
    j["qubits"].push_back(k.b);
  }
  return j;
}

GateKey gate_key_from_json(const json& j) {
  const auto kind = gate_kind_from_string(j.at("gate").get<std::string>());
  if (!kind) {
    throw std::invalid_argument("unknown gate kind in calibration");
  }
  const auto qs = j.at("qubits").get<std::vector<int>>();
  return GateKey::of(*kind, qs);
}

double finite_or_inf(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") {
    return std::numeric_limits<double>::infinity();
  }
  return j.get<double>();
}

json inf_or_value(double v) {
  if (std::isinf(v)) {
    return "inf";
  }
  return v;
}

}  // namespace

std::string qpu_to_json(const QpuDescriptor& qpu) {
  json j;
  j["id"] = qpu.id;
  j["architecture_tag"] = qpu.architecture_tag;
  j["num_qubits"] = qpu.num_qubits;
  j["coupling_map"] = json::array();
  for (const Edge& e : qpu.coupling_map) {
    j["coupling_map"].push_back({e.a, e.b});
  }
  j["basis_gates"] = json::array();
  for (GateKind k : qpu.basis_gates) {
    j["basis_gates"].push_back(std::string(to_string(k)));
  }
  const CalibrationData& c = qpu.calibration;
  json cal;
  cal["timestamp"] = c.timestamp;
  cal["readout_error"] = c.readout_error;
  cal["t2"] = json::array();
  for (double t : c.t2) {
    cal["t2"].push_back(inf_or_value(t));
  }
  cal["gate_error"] = json::array();
  for (const auto& [k, v] : c.gate_error) {
    cal["gate_error"].push_back(gate_key_json(k, v));
  }
  cal["gate_duration"] = json::array();
  for (const auto& [k, v] : c.gate_duration) {
    cal["gate_duration"].push_back(gate_key_json(k, v));
  }
  cal["crosstalk_error"] = json::array();
  for (const auto& [pair, v] : c.crosstalk_error) {
    cal["crosstalk_error"].push_back(
        {{"edges", {{pair.first.a, pair.first.b}, {pair.second.a, pair.second.b}}}, {"value", v}});
  }
  const ArchitectureBaseline& d = c.defaults;
  cal["defaults"] = {{"readout_error", d.readout_error},
                     {"gate_error_1q", d.gate_error_1q},
                     {"gate_error_2q", d.gate_error_2q},
                     {"t2", inf_or_value(d.t2)},
                     {"duration_1q", d.duration_1q},
                     {"duration_2q", d.duration_2q},
                     {"duration_measure", d.duration_measure},
                     {"duration_reset", d.duration_reset},
                     {"crosstalk_error", d.crosstalk_error}};
  j["calibration"] = cal;
  return j.dump(2);
}

QpuDescriptor qpu_from_json(const std::string& text) {
  const json j = json::parse(text);
  QpuDescriptor qpu;
  qpu.id = j.at("id").get<std::string>();
  qpu.architecture_tag = j.value("architecture_tag", std::string("generic"));
  qpu.num_qubits = j.at("num_qubits").get<int>();
  for (const auto& e : j.at("coupling_map")) {
    qpu.coupling_map.push_back(Edge::of(e.at(0).get<int>(), e.at(1).get<int>()));
  }
  std::sort(qpu.coupling_map.begin(), qpu.coupling_map.end());
  for (const auto& g : j.at("basis_gates")) {
    const auto kind = gate_kind_from_string(g.get<std::string>());
    if (!kind) {
      throw std::invalid_argument("unknown basis gate " + g.get<std::string>());
    }
    qpu.basis_gates.insert(*kind);
  }
  if (j.contains("calibration")) {
    const json& cal = j.at("calibration");
    CalibrationData& c = qpu.calibration;
    c.timestamp = cal.value("timestamp", std::int64_t{0});
    c.readout_error = cal.value("readout_error", std::vector<double>{});
    for (const auto& t : cal.value("t2", json::array())) {
      c.t2.push_back(finite_or_inf(t));
    }
    for (const auto& e : cal.value("gate_error", json::array())) {
      c.gate_error[gate_key_from_json(e)] = e.at("value").get<double>();
    }
    for (const auto& e : cal.value("gate_duration", json::array())) {
      c.gate_duration[gate_key_from_json(e)] = e.at("value").get<double>();
    }
    for (const auto& e : cal.value("crosstalk_error", json::array())) {
      const auto& edges = e.at("edges");
      Edge e1 = Edge::of(edges.at(0).at(0).get<int>(), edges.at(0).at(1).get<int>());
      Edge e2 = Edge::of(edges.at(1).at(0).get<int>(), edges.at(1).at(1).get<int>());
      if (e2 < e1) {
        std::swap(e1, e2);
      }
      c.crosstalk_error[{e1, e2}] = e.at("value").get<double>();
    }
    if (cal.contains("defaults")) {
      const json& d = cal.at("defaults");
      ArchitectureBaseline& b = c.defaults;
      b.readout_error = d.value("readout_error", b.readout_error);
      b.gate_error_1q = d.value("gate_error_1q", b.gate_error_1q);
      b.gate_error_2q = d.value("gate_error_2q", b.gate_error_2q);
      if (d.contains("t2")) {
        b.t2 = finite_or_inf(d.at("t2"));
      }
      b.duration_1q = d.value("duration_1q", b.duration_1q);
      b.duration_2q = d.value("duration_2q", b.duration_2q);
      b.duration_measure = d.value("duration_measure", b.duration_measure);
      b.duration_reset = d.value("duration_reset", b.duration_reset);
      b.crosstalk_error = d.value("crosstalk_error", b.crosstalk_error);
    }
  }
  qpu.validate();
  return qpu;
}

QpuDescriptor load_qpu(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open QPU descriptor '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return qpu_from_json(ss.str());
}

void save_qpu(const QpuDescriptor& qpu, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write QPU descriptor '" + path + "'");
  }
  out << qpu_to_json(qpu) << '\n';
}

std::vector<QpuDescriptor> load_farm(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("farm directory '" + dir + "' does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, QpuDescriptor> latest;
  for (const auto& f : files) {
    QpuDescriptor qpu = load_qpu(f.string());
    auto it = latest.find(qpu.id);
    if (it == latest.end() || it->second.calibration.timestamp < qpu.calibration.timestamp) {
      latest[qpu.id] = std::move(qpu);
    }
  }
  std::vector<QpuDescriptor> farm;
  for (auto& [id, qpu] : latest) {
    farm.push_back(std::move(qpu));
  }
  return farm;
}

void save_farm(const std::vector<QpuDescriptor>& farm, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& qpu : farm) {
    save_qpu(qpu, (std::filesystem::path(dir) /
                   (qpu.id + ".cycle" + std::to_string(qpu.calibration.timestamp) + ".json"))
                      .string());
  }
}

}  // namespace qos
