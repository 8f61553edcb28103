#include "qos/virtualizer.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace qos {

using nlohmann::json;

namespace {

HalfOp rz_only(double angle) {
  HalfOp h;
  h.gates = {GateKind::RZ};
  h.angles = {angle};
  return h;
}

HalfOp measured() {
  HalfOp h;
  h.measure_first = true;
  return h;
}

HalfOp ops(std::vector<GateKind> kinds, std::vector<double> angles, bool measure_last = false) {
  HalfOp h;
  h.gates = std::move(kinds);
  h.angles = std::move(angles);
  h.measure_last = measure_last;
  return h;
}

}  // namespace

InstantiationMapping gate_cut_mapping(double theta) {
  const double c = std::cos(theta / 2);
  const double s = std::sin(theta / 2);
  const double h = M_PI / 2;
  InstantiationMapping m;
  m.kind = CutKind::Gate;
  m.terms = {
      {c * c, {}, {}},
      {s * s, rz_only(M_PI), rz_only(M_PI)},
      {c * s, measured(), rz_only(h)},
      {-c * s, measured(), rz_only(-h)},
      {c * s, rz_only(h), measured()},
      {-c * s, rz_only(-h), measured()},
  };
  return m;
}

InstantiationMapping wire_cut_mapping() {
  using K = GateKind;
  const double h = M_PI / 2;
  const HalfOp trace;
  const HalfOp z = ops({}, {}, true);
  const HalfOp x = ops({K::H}, {0.0}, true);
  const HalfOp y = ops({K::RZ, K::H}, {-h, 0.0}, true);
  InstantiationMapping m;
  m.kind = CutKind::Wire;
  m.terms = {
      {0.5, trace, {}},
      {0.5, trace, ops({K::X}, {0.0})},
      {0.5, z, {}},
      {-0.5, z, ops({K::X}, {0.0})},
      {0.5, x, ops({K::H}, {0.0})},
      {-0.5, x, ops({K::X, K::H}, {0.0, 0.0})},
      {0.5, y, ops({K::H, K::RZ}, {0.0, h})},
      {-0.5, y, ops({K::X, K::H, K::RZ}, {0.0, 0.0, h})},
  };
  return m;
}

InstantiationMapping freeze_mapping(bool leading_h) {
  InstantiationMapping m;
  m.kind = CutKind::Freeze;
  HalfOp plus;
  plus.rz_sign = 1.0;
  HalfOp minus;
  minus.rz_sign = -1.0;
  m.terms = {{leading_h ? 0.5 : 1.0, plus, {}}, {leading_h ? 0.5 : 0.0, minus, {}}};
  return m;
}

InstantiationMapping mapping_for(const VirtualGateRecord& rec) {
  switch (rec.kind) {
  case CutKind::Gate:
    // CX and CZ are cut as RZZ(-pi/2) with local dressing
    return gate_cut_mapping(rec.original.kind == GateKind::RZZ ? rec.original.theta : -M_PI / 2);
  case CutKind::Wire:
    return wire_cut_mapping();
  case CutKind::Freeze:
    return freeze_mapping(rec.leading_h);
  }
  throw std::invalid_argument("unknown cut kind");
}

namespace {

void emit_half(Circuit& c, int q, double theta, const HalfOp& h) {
  if (h.measure_first) {
    c.add(Gate::measure(q, c.add_aux_clbit()));
  }
  for (std::size_t i = 0; i < h.gates.size(); ++i) {
    c.add(h.gates[i] == GateKind::RZ ? Gate::rz(q, h.angles[i]) : Gate::make(h.gates[i], {q}));
  }
  if (h.rz_sign != 0.0) {
    c.add(Gate::rz(q, h.rz_sign * theta));
  }
  if (h.measure_last) {
    c.add(Gate::measure(q, c.add_aux_clbit()));
  }
}

std::string variant_key(const std::string& fragment_id, const std::vector<int>& idx) {
  std::string key = fragment_id + ".v";
  for (std::size_t i = 0; i < idx.size(); ++i) {
    key += (i == 0 ? "" : "-") + std::to_string(idx[i]);
  }
  return key;
}

// Advances a mixed-radix counter, last digit fastest; false after wrap-around.
bool next_index(std::vector<int>& idx, const std::vector<int>& radix) {
  for (std::size_t i = idx.size(); i-- > 0;) {
    if (++idx[i] < radix[i]) {
      return true;
    }
    idx[i] = 0;
  }
  return false;
}

}  // namespace

Instantiation instantiate(const Qernel& optimized) {
  std::vector<Qernel> fragments = optimized.children;
  int num_bits = optimized.circuit.num_clbits();
  if (fragments.empty()) {
    Qernel whole;
    whole.id = optimized.id + ".f0";
    whole.circuit = with_default_measurements(optimized.circuit);
    num_bits = whole.circuit.num_clbits();
    fragments.push_back(std::move(whole));
  }
  const auto& records = optimized.virtual_gate_records;
  std::map<int, int> record_of;
  std::vector<InstantiationMapping> maps;
  for (std::size_t r = 0; r < records.size(); ++r) {
    record_of[records[r].vg_id] = static_cast<int>(r);
    maps.push_back(mapping_for(records[r]));
  }
  auto record_index = [&](int vg_id) {
    const auto it = record_of.find(vg_id);
    if (it == record_of.end()) {
      throw std::invalid_argument("virtual gate " + std::to_string(vg_id) + " has no record");
    }
    return it->second;
  };

  Instantiation out;
  KnitPlan& plan = out.plan;
  plan.num_bits = num_bits;
  for (const auto& m : maps) {
    plan.arities.push_back(m.arity());
  }
  for (const auto& rec : records) {
    if (rec.kind == CutKind::Freeze && rec.frozen_clbit >= 0) {
      plan.frozen_mask |= Bitstring{1} << rec.frozen_clbit;
    }
  }

  std::vector<std::vector<int>> incident(fragments.size());
  std::vector<int> offset(fragments.size(), 0);
  for (std::size_t f = 0; f < fragments.size(); ++f) {
    const Qernel& frag = fragments[f];
    plan.fragment_ids.push_back(frag.id);
    if (frag.circuit.num_clbits() != num_bits) {
      throw std::invalid_argument("fragment " + frag.id + " does not share the output bits");
    }
    std::set<int> touched;
    for (const Gate& g : frag.circuit.gates()) {
      if (g.kind == GateKind::Virtual) {
        if (g.qubits.size() != 1) {
          throw std::invalid_argument("fragment " + frag.id + " holds an unsplit virtual gate");
        }
        touched.insert(record_index(g.vg_id));
      }
    }
    incident[f].assign(touched.begin(), touched.end());
    offset[f] = static_cast<int>(out.variants.size());

    std::vector<int> radix;
    for (int r : incident[f]) {
      radix.push_back(plan.arities[static_cast<std::size_t>(r)]);
    }
    std::vector<int> idx(radix.size(), 0);
    do {
      std::map<int, int> term_of;
      Variant v;
      v.fragment = static_cast<int>(f);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        term_of[incident[f][i]] = idx[i];
        v.choice.emplace_back(incident[f][i], idx[i]);
      }
      v.key = variant_key(frag.id, idx);
      Circuit c(frag.circuit.num_qubits(), frag.circuit.num_clbits(), v.key);
      c.set_num_aux_clbits(frag.circuit.num_aux_clbits());
      for (const Gate& g : frag.circuit.gates()) {
        if (g.kind != GateKind::Virtual) {
          c.add(g);
          continue;
        }
        const int r = record_index(g.vg_id);
        const InstantiationTerm& t =
            maps[static_cast<std::size_t>(r)].terms[static_cast<std::size_t>(term_of.at(r))];
        const bool second = g.role == VirtualRole::GateSide1 || g.role == VirtualRole::WireSink;
        emit_half(c, g.qubits[0], g.theta, second ? t.side1 : t.side0);
      }
      v.circuit = std::move(c);
      plan.variant_keys.push_back(v.key);
      plan.variant_fragment.push_back(v.fragment);
      out.variants.push_back(std::move(v));
    } while (next_index(idx, radix));
  }

  std::vector<int> idx(records.size(), 0);
  do {
    KnitLeaf leaf;
    leaf.indices = idx;
    for (std::size_t r = 0; r < records.size(); ++r) {
      leaf.coefficient *= maps[r].terms[static_cast<std::size_t>(idx[r])].coefficient;
      if (records[r].kind == CutKind::Freeze && records[r].frozen_clbit >= 0 && idx[r] == 1) {
        leaf.frozen_bits |= Bitstring{1} << records[r].frozen_clbit;
      }
    }
    for (std::size_t f = 0; f < fragments.size(); ++f) {
      int local = 0;
      for (int r : incident[f]) {
        local = local * plan.arities[static_cast<std::size_t>(r)] + idx[static_cast<std::size_t>(r)];
      }
      leaf.variants.push_back(offset[f] + local);
    }
    plan.leaves.push_back(std::move(leaf));
  } while (next_index(idx, plan.arities));
  return out;
}

json knit_plan_to_json(const KnitPlan& plan) {
  json leaves = json::array();
  for (const KnitLeaf& l : plan.leaves) {
    leaves.push_back({{"indices", l.indices},
                      {"coefficient", l.coefficient},
                      {"variants", l.variants},
                      {"frozen_bits", l.frozen_bits}});
  }
  return {{"num_bits", plan.num_bits},
          {"frozen_mask", plan.frozen_mask},
          {"arities", plan.arities},
          {"fragments", plan.fragment_ids},
          {"variant_keys", plan.variant_keys},
          {"variant_fragment", plan.variant_fragment},
          {"leaves", leaves}};
}

KnitPlan knit_plan_from_json(const json& j) {
  KnitPlan plan;
  plan.num_bits = j.at("num_bits").get<int>();
  plan.frozen_mask = j.at("frozen_mask").get<Bitstring>();
  plan.arities = j.at("arities").get<std::vector<int>>();
  plan.fragment_ids = j.at("fragments").get<std::vector<std::string>>();
  plan.variant_keys = j.at("variant_keys").get<std::vector<std::string>>();
  plan.variant_fragment = j.at("variant_fragment").get<std::vector<int>>();
  if (plan.variant_keys.size() != plan.variant_fragment.size()) {
    throw std::invalid_argument("knit plan: variant tables differ in length");
  }
  for (const auto& l : j.at("leaves")) {
    KnitLeaf leaf;
    leaf.indices = l.at("indices").get<std::vector<int>>();
    leaf.coefficient = l.at("coefficient").get<double>();
    leaf.variants = l.at("variants").get<std::vector<int>>();
    leaf.frozen_bits = l.at("frozen_bits").get<Bitstring>();
    if (leaf.indices.size() != plan.arities.size() || leaf.variants.size() != plan.fragment_ids.size()) {
      throw std::invalid_argument("knit plan: leaf arity mismatch");
    }
    for (int v : leaf.variants) {
      if (v < 0 || static_cast<std::size_t>(v) >= plan.variant_keys.size()) {
        throw std::invalid_argument("knit plan: leaf refers to unknown variant");
      }
    }
    plan.leaves.push_back(std::move(leaf));
  }
  return plan;
}

void save_knit_plan(const KnitPlan& plan, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << knit_plan_to_json(plan).dump(1) << '\n';
}

KnitPlan load_knit_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read " + path);
  }
  return knit_plan_from_json(json::parse(in));
}

}  // namespace qos
