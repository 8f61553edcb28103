#include "qos/circuit.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

namespace qos {

namespace {

constexpr std::array<std::pair<GateKind, std::string_view>, 10> kGateNames{{
    {GateKind::X, "x"},
    {GateKind::SX, "sx"},
    {GateKind::H, "h"},
    {GateKind::RZ, "rz"},
    {GateKind::CX, "cx"},
    {GateKind::CZ, "cz"},
    {GateKind::RZZ, "rzz"},
    {GateKind::Measure, "measure"},
    {GateKind::Reset, "reset"},
    {GateKind::Virtual, "virtual"},
}};

constexpr std::array<std::pair<VirtualRole, std::string_view>, 7> kRoleNames{{
    {VirtualRole::GateCut, "gate"},
    {VirtualRole::GateSide0, "gate0"},
    {VirtualRole::GateSide1, "gate1"},
    {VirtualRole::WireCut, "wire"},
    {VirtualRole::WireSource, "wire_src"},
    {VirtualRole::WireSink, "wire_dst"},
    {VirtualRole::Freeze, "freeze"},
}};

int virtual_arity(VirtualRole role) {
  return role == VirtualRole::GateCut || role == VirtualRole::WireCut ? 2 : 1;
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), ptr};
}

struct Token {
  std::string_view text;
  int column;
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
      ++i;
    }
    if (i >= line.size() || line[i] == '#') {
      break;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' &&
           line[i] != '#') {
      ++i;
    }
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

int parse_int(const Token& tok, int line) {
  int value = 0;
  const auto* end = tok.text.data() + tok.text.size();
  auto [ptr, ec] = std::from_chars(tok.text.data(), end, value);
  if (ec != std::errc{} || ptr != end || value < 0) {
    throw CircuitError("expected non-negative integer, got '" + std::string(tok.text) + "'",
                       line, tok.column);
  }
  return value;
}

double parse_double(const Token& tok, int line) {
  // from_chars for double is available in libstdc++ 11.
  double value = 0.0;
  const auto* end = tok.text.data() + tok.text.size();
  auto [ptr, ec] = std::from_chars(tok.text.data(), end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    throw CircuitError("expected finite number, got '" + std::string(tok.text) + "'", line,
                       tok.column);
  }
  return value;
}

}  // namespace

std::string_view to_string(GateKind kind) {
  for (const auto& [k, name] : kGateNames) {
    if (k == kind) {
      return name;
    }
  }
  return "?";
}

std::string_view to_string(VirtualRole role) {
  for (const auto& [r, name] : kRoleNames) {
    if (r == role) {
      return name;
    }
  }
  return "?";
}

std::optional<GateKind> gate_kind_from_string(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (const auto& [k, n] : kGateNames) {
    if (n == lower) {
      return k;
    }
  }
  return std::nullopt;
}

std::optional<VirtualRole> virtual_role_from_string(std::string_view name) {
  for (const auto& [r, n] : kRoleNames) {
    if (n == name) {
      return r;
    }
  }
  return std::nullopt;
}

bool is_two_qubit(GateKind kind) {
  return kind == GateKind::CX || kind == GateKind::CZ || kind == GateKind::RZZ;
}

bool has_angle(GateKind kind) { return kind == GateKind::RZ || kind == GateKind::RZZ; }

bool is_diagonal(GateKind kind) {
  return kind == GateKind::RZ || kind == GateKind::CZ || kind == GateKind::RZZ;
}

CircuitError::CircuitError(const std::string& what, int line, int column)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ", column " +
                                        std::to_string(column) + ": " + what
                                  : what),
      line_(line),
      column_(column) {}

Circuit::Circuit(int num_qubits, std::string name)
    : num_qubits_(num_qubits), name_(std::move(name)) {}

Circuit::Circuit(int num_qubits, int num_clbits, std::string name)
    : num_qubits_(num_qubits), num_clbits_(num_clbits), name_(std::move(name)) {}

Circuit& Circuit::add(Gate g) {
  if (g.kind == GateKind::Measure && g.clbit >= total_clbits()) {
    if (num_aux_clbits_ > 0) {
      throw CircuitError("output bit added after auxiliary bits");
    }
    num_clbits_ = g.clbit + 1;
  }
  gates_.push_back(std::move(g));
  return *this;
}

Circuit& Circuit::measure_all() {
  for (int q = 0; q < num_qubits_; ++q) {
    add(Gate::measure(q, q));
  }
  return *this;
}

bool Circuit::has_measurements() const {
  return std::any_of(gates_.begin(), gates_.end(),
                     [](const Gate& g) { return g.kind == GateKind::Measure; });
}

bool Circuit::has_virtual_gates() const {
  return std::any_of(gates_.begin(), gates_.end(),
                     [](const Gate& g) { return g.kind == GateKind::Virtual; });
}

int Circuit::count(GateKind kind) const {
  return static_cast<int>(
      std::count_if(gates_.begin(), gates_.end(), [kind](const Gate& g) { return g.kind == kind; }));
}

int Circuit::num_two_qubit_gates() const {
  return static_cast<int>(std::count_if(gates_.begin(), gates_.end(),
                                        [](const Gate& g) { return is_two_qubit(g.kind); }));
}

void Circuit::validate() const {
  if (num_qubits_ < 0 || num_clbits_ < 0 || num_aux_clbits_ < 0) {
    throw CircuitError("negative register size");
  }
  std::vector<bool> bit_written(static_cast<std::size_t>(total_clbits()), false);
  // qubit -> measured into an output bit and not reset since
  std::vector<bool> closed(static_cast<std::size_t>(num_qubits_), false);
  std::set<std::pair<int, VirtualRole>> virtual_seen;

  for (std::size_t i = 0; i < gates_.size(); ++i) {
    const Gate& g = gates_[i];
    const std::string where = "gate " + std::to_string(i) + " (" + std::string(to_string(g.kind)) + ")";
    std::size_t arity = 1;
    if (is_two_qubit(g.kind)) {
      arity = 2;
    } else if (g.kind == GateKind::Virtual) {
      arity = static_cast<std::size_t>(virtual_arity(g.role));
    }
    if (g.qubits.size() != arity) {
      throw CircuitError(where + ": arity mismatch");
    }
    for (int q : g.qubits) {
      if (q < 0 || q >= num_qubits_) {
        throw CircuitError(where + ": qubit index " + std::to_string(q) + " out of range");
      }
    }
    if (arity == 2 && g.qubits[0] == g.qubits[1]) {
      throw CircuitError(where + ": qubits must be distinct");
    }
    if (!std::isfinite(g.theta)) {
      throw CircuitError(where + ": non-finite angle");
    }
    if (g.kind == GateKind::Virtual) {
      if (g.vg_id < 0) {
        throw CircuitError(where + ": virtual gate without id");
      }
      if (g.role != VirtualRole::Freeze && !virtual_seen.emplace(g.vg_id, g.role).second) {
        throw CircuitError(where + ": duplicate virtual gate id " + std::to_string(g.vg_id));
      }
    }
    for (int q : g.qubits) {
      if (closed[static_cast<std::size_t>(q)] && g.kind != GateKind::Reset) {
        throw CircuitError(where + ": qubit " + std::to_string(q) + " used after measurement");
      }
    }
    if (g.kind == GateKind::Reset) {
      closed[static_cast<std::size_t>(g.qubits[0])] = false;
    }
    if (g.kind == GateKind::Measure) {
      if (g.clbit < 0 || g.clbit >= total_clbits()) {
        throw CircuitError(where + ": classical bit out of range");
      }
      if (bit_written[static_cast<std::size_t>(g.clbit)]) {
        throw CircuitError(where + ": classical bit " + std::to_string(g.clbit) +
                           " written twice");
      }
      bit_written[static_cast<std::size_t>(g.clbit)] = true;
      if (g.clbit < num_clbits_) {
        closed[static_cast<std::size_t>(g.qubits[0])] = true;
      }
    }
  }
}

int circuit_depth(const Circuit& c, DepthOptions options) {
  std::vector<int> level(static_cast<std::size_t>(c.num_qubits()), 0);
  int depth = 0;
  for (const Gate& g : c.gates()) {
    if (g.kind == GateKind::Measure && !options.count_measurements) {
      continue;
    }
    if (g.kind == GateKind::Virtual && !options.count_virtual) {
      continue;
    }
    int start = 0;
    for (int q : g.qubits) {
      start = std::max(start, level[static_cast<std::size_t>(q)]);
    }
    for (int q : g.qubits) {
      level[static_cast<std::size_t>(q)] = start + 1;
    }
    depth = std::max(depth, start + 1);
  }
  return depth;
}

Circuit with_default_measurements(const Circuit& c) {
  if (c.has_measurements() || c.num_clbits() > 0) {
    return c;
  }
  Circuit out = c;
  return out.measure_all();
}

Circuit parse_circuit(std::string_view text) {
  Circuit circuit;
  bool have_header = false;
  std::optional<int> declared_clbits;
  int declared_aux = 0;
  int line_no = 0;
  std::size_t pos = 0;

  auto require_header = [&](const Token& tok) {
    if (!have_header) {
      throw CircuitError("gate before 'qubits' header", line_no, tok.column);
    }
  };
  auto qubit_arg = [&](const Token& tok) {
    const int q = parse_int(tok, line_no);
    if (q >= circuit.num_qubits()) {
      throw CircuitError("qubit index " + std::to_string(q) + " out of range", line_no,
                         tok.column);
    }
    return q;
  };

  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto toks = tokenize(line);
    if (toks.empty()) {
      continue;
    }
    const Token& head = toks[0];
    if (head.text == "qubits") {
      if (have_header || toks.size() != 2) {
        throw CircuitError("malformed 'qubits' header", line_no, head.column);
      }
      circuit.set_num_qubits(parse_int(toks[1], line_no));
      have_header = true;
      continue;
    }
    if (head.text == "name") {
      if (toks.size() != 2) {
        throw CircuitError("malformed 'name' line", line_no, head.column);
      }
      circuit.set_name(std::string(toks[1].text));
      continue;
    }
    if (head.text == "clbits") {
      if (toks.size() != 2 && !(toks.size() == 4 && toks[2].text == "aux")) {
        throw CircuitError("malformed 'clbits' line", line_no, head.column);
      }
      declared_clbits = parse_int(toks[1], line_no);
      declared_aux = toks.size() == 4 ? parse_int(toks[3], line_no) : 0;
      circuit.set_num_clbits(*declared_clbits);
      circuit.set_num_aux_clbits(declared_aux);
      continue;
    }

    require_header(head);
    const auto kind = gate_kind_from_string(head.text);
    if (!kind) {
      throw CircuitError("unknown gate '" + std::string(head.text) + "'", line_no, head.column);
    }

    // Trailing "dur=<seconds>" is accepted on any gate line.
    std::optional<double> duration;
    std::vector<Token> args(toks.begin() + 1, toks.end());
    if (!args.empty() && args.back().text.substr(0, 4) == "dur=") {
      Token t{args.back().text.substr(4), args.back().column + 4};
      duration = parse_double(t, line_no);
      args.pop_back();
    }

    auto add_gate = [&](Gate g) {
      g.duration = duration;
      if (g.kind == GateKind::Measure && !declared_clbits &&
          g.clbit >= circuit.total_clbits()) {
        circuit.set_num_clbits(g.clbit + 1);
      }
      if (g.kind == GateKind::Measure && g.clbit >= circuit.total_clbits()) {
        throw CircuitError("classical bit out of range", line_no, head.column);
      }
      circuit.mutable_gates().push_back(std::move(g));
    };

    switch (*kind) {
    case GateKind::Measure: {
      if (args.empty()) {
        throw CircuitError("measure needs 'all' or qubit list", line_no, head.column);
      }
      if (args.size() == 1 && args[0].text == "all") {
        for (int q = 0; q < circuit.num_qubits(); ++q) {
          add_gate(Gate::measure(q, q));
        }
        break;
      }
      for (const Token& a : args) {
        const auto arrow = a.text.find("->");
        if (arrow == std::string_view::npos) {
          const int q = qubit_arg(a);
          add_gate(Gate::measure(q, q));
        } else {
          const int q = qubit_arg({a.text.substr(0, arrow), a.column});
          const int cbit = parse_int({a.text.substr(arrow + 2), a.column + static_cast<int>(arrow) + 2},
                                     line_no);
          add_gate(Gate::measure(q, cbit));
        }
      }
      break;
    }
    case GateKind::Virtual: {
      // virtual <id> <role> q0 [q1] [theta]
      if (args.size() < 3) {
        throw CircuitError("virtual needs id, role and qubits", line_no, head.column);
      }
      const int id = parse_int(args[0], line_no);
      const auto role = virtual_role_from_string(args[1].text);
      if (!role) {
        throw CircuitError("unknown virtual role '" + std::string(args[1].text) + "'", line_no,
                           args[1].column);
      }
      const std::size_t arity = static_cast<std::size_t>(virtual_arity(*role));
      if (args.size() != 2 + arity && args.size() != 3 + arity) {
        throw CircuitError("gate arity mismatch", line_no, head.column);
      }
      std::vector<int> qs;
      for (std::size_t i = 0; i < arity; ++i) {
        qs.push_back(qubit_arg(args[2 + i]));
      }
      const double theta = args.size() == 3 + arity ? parse_double(args.back(), line_no) : 0.0;
      add_gate(Gate::virtual_gate(std::move(qs), id, *role, theta));
      break;
    }
    default: {
      const std::size_t arity = is_two_qubit(*kind) ? 2 : 1;
      const std::size_t expected = arity + (has_angle(*kind) ? 1 : 0);
      if (args.size() != expected) {
        throw CircuitError("gate arity mismatch for '" + std::string(head.text) + "'", line_no,
                           head.column);
      }
      Gate g = Gate::make(*kind, {});
      for (std::size_t i = 0; i < arity; ++i) {
        g.qubits.push_back(qubit_arg(args[i]));
      }
      if (arity == 2 && g.qubits[0] == g.qubits[1]) {
        throw CircuitError("2-qubit gate on identical qubits", line_no, args[1].column);
      }
      if (has_angle(*kind)) {
        g.theta = parse_double(args[arity], line_no);
      }
      add_gate(std::move(g));
      break;
    }
    }
  }
  if (!have_header) {
    throw CircuitError("missing 'qubits' header", line_no, 1);
  }
  circuit.validate();
  return circuit;
}

Circuit load_circuit(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw CircuitError("cannot open circuit file '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  Circuit c = parse_circuit(ss.str());
  return c;
}

std::string print_circuit(const Circuit& c) {
  std::ostringstream out;
  out << "name " << c.name() << '\n';
  out << "qubits " << c.num_qubits() << '\n';
  if (c.total_clbits() > 0) {
    out << "clbits " << c.num_clbits();
    if (c.num_aux_clbits() > 0) {
      out << " aux " << c.num_aux_clbits();
    }
    out << '\n';
  }
  for (const Gate& g : c.gates()) {
    out << to_string(g.kind);
    if (g.kind == GateKind::Measure) {
      out << ' ' << g.qubits[0];
      if (g.clbit != g.qubits[0]) {
        out << "->" << g.clbit;
      }
    } else if (g.kind == GateKind::Virtual) {
      out << ' ' << g.vg_id << ' ' << to_string(g.role);
      for (int q : g.qubits) {
        out << ' ' << q;
      }
      out << ' ' << format_double(g.theta);
    } else {
      for (int q : g.qubits) {
        out << ' ' << q;
      }
      if (has_angle(g.kind)) {
        out << ' ' << format_double(g.theta);
      }
    }
    if (g.duration) {
      out << " dur=" << format_double(*g.duration);
    }
    out << '\n';
  }
  return out.str();
}

void save_circuit(const Circuit& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw CircuitError("cannot write circuit file '" + path + "'");
  }
  out << print_circuit(c);
}

}  // namespace qos
