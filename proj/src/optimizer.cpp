#include "qos/optimizer.hpp"

#include "qos/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

namespace qos {

using nlohmann::json;

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) {
      parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
  }
};

bool is_interaction(const Gate& g) { return g.qubits.size() == 2 && g.kind != GateKind::Virtual; }

std::vector<int> sizes_descending(UnionFind& uf, const std::vector<int>& members) {
  std::map<int, int> count;
  for (int m : members) {
    count[uf.find(m)]++;
  }
  std::vector<int> out;
  for (const auto& [r, c] : count) {
    out.push_back(c);
  }
  std::sort(out.rbegin(), out.rend());
  return out;
}

// Visits k-subsets of {0..n-1} in lexicographic order until fn returns true.
void for_each_combination(int n, int k, const std::function<bool(const std::vector<int>&)>& fn) {
  if (k > n) {
    return;
  }
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    if (fn(idx)) {
      return;
    }
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) {
      --i;
    }
    if (i < 0) {
      return;
    }
    idx[static_cast<std::size_t>(i)]++;
    for (int j = i + 1; j < k; ++j) {
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

std::uint64_t subsets_up_to(int n, int k) {
  std::uint64_t total = 0;
  for (int j = 1; j <= k; ++j) {
    double c = 1.0;
    for (int i = 0; i < j; ++i) {
      c = c * (n - i) / (i + 1);
    }
    if (c > 1e15) {
      return UINT64_MAX;
    }
    total += static_cast<std::uint64_t>(std::llround(c));
  }
  return total;
}

std::vector<int> active_list(const Circuit& c) {
  std::vector<int> out;
  const auto active = active_qubits(c);
  for (std::size_t q = 0; q < active.size(); ++q) {
    if (active[q]) {
      out.push_back(static_cast<int>(q));
    }
  }
  return out;
}

struct Candidate {
  int max_size = 0;
  int k = 0;
  std::vector<int> choice;
  std::vector<int> sizes;
};

// (max size, cuts, lexicographic choice)
bool better(const Candidate& a, const Candidate& b) {
  if (a.max_size != b.max_size) {
    return a.max_size < b.max_size;
  }
  if (a.k != b.k) {
    return a.k < b.k;
  }
  return a.choice < b.choice;
}

// Searches subsets of `n` candidate cuts; `eval` maps a subset to fragment sizes.
std::optional<Candidate> search_cuts(int n, int max_cuts, int s, const std::vector<int>& base,
                                     const std::function<std::vector<int>(const std::vector<int>&)>& eval) {
  std::optional<Candidate> best;
  for (int k = 1; k <= std::min(max_cuts, n); ++k) {
    std::optional<Candidate> at_k;
    for_each_combination(n, k, [&](const std::vector<int>& choice) {
      std::vector<int> sizes = eval(choice);
      const int m = sizes.empty() ? 0 : sizes.front();
      if (!at_k || m < at_k->max_size) {
        at_k = Candidate{m, k, choice, std::move(sizes)};
      }
      return false;
    });
    if (at_k && (!best || better(*at_k, *best))) {
      best = at_k;
    }
    if (best && best->max_size <= s) {
      return best;
    }
  }
  if (best && !base.empty() && best->max_size < base.front()) {
    return best;
  }
  return std::nullopt;
}

// Kernighan-Lin bisection of `nodes` over weighted edges; returns side flags.
std::map<int, bool> kl_bisect(const std::vector<int>& nodes,
                              const std::map<std::pair<int, int>, int>& weights) {
  std::map<int, std::vector<std::pair<int, int>>> adj;
  for (const auto& [e, w] : weights) {
    adj[e.first].emplace_back(e.second, w);
    adj[e.second].emplace_back(e.first, w);
  }
  // BFS order from the lowest node gives a connected first half.
  std::vector<int> order;
  std::set<int> seen;
  const std::set<int> in(nodes.begin(), nodes.end());
  for (int start : nodes) {
    if (seen.count(start) != 0) {
      continue;
    }
    std::vector<int> queue{start};
    seen.insert(start);
    for (std::size_t i = 0; i < queue.size(); ++i) {
      order.push_back(queue[i]);
      for (const auto& [w, wt] : adj[queue[i]]) {
        if (in.count(w) != 0 && seen.insert(w).second) {
          queue.push_back(w);
        }
      }
    }
  }
  std::map<int, bool> side;
  for (std::size_t i = 0; i < order.size(); ++i) {
    side[order[i]] = i >= order.size() / 2;
  }
  auto gain = [&](int v) {
    int ext = 0;
    int internal = 0;
    for (const auto& [w, wt] : adj[v]) {
      if (in.count(w) == 0) {
        continue;
      }
      (side[w] != side[v] ? ext : internal) += wt;
    }
    return ext - internal;
  };
  auto edge_w = [&](int a, int b) {
    const auto it = weights.find({std::min(a, b), std::max(a, b)});
    return it == weights.end() ? 0 : it->second;
  };
  for (int pass = 0; pass < 10; ++pass) {
    std::set<int> locked;
    std::vector<std::pair<int, int>> swaps;
    std::vector<int> gains;
    std::map<int, bool> trial = side;
    const std::map<int, bool> saved = side;
    for (std::size_t step = 0; step < order.size() / 2; ++step) {
      int best_g = INT32_MIN;
      std::pair<int, int> best_pair{-1, -1};
      for (int a : nodes) {
        if (locked.count(a) != 0 || side[a]) {
          continue;
        }
        for (int b : nodes) {
          if (locked.count(b) != 0 || !side[b]) {
            continue;
          }
          const int g = gain(a) + gain(b) - 2 * edge_w(a, b);
          if (g > best_g) {
            best_g = g;
            best_pair = {a, b};
          }
        }
      }
      if (best_pair.first < 0) {
        break;
      }
      side[best_pair.first] = true;
      side[best_pair.second] = false;
      locked.insert(best_pair.first);
      locked.insert(best_pair.second);
      swaps.push_back(best_pair);
      gains.push_back(best_g);
    }
    int acc = 0;
    int best_acc = 0;
    std::size_t best_prefix = 0;
    for (std::size_t i = 0; i < gains.size(); ++i) {
      acc += gains[i];
      if (acc > best_acc) {
        best_acc = acc;
        best_prefix = i + 1;
      }
    }
    side = saved;
    for (std::size_t i = 0; i < best_prefix; ++i) {
      side[swaps[i].first] = true;
      side[swaps[i].second] = false;
    }
    if (best_prefix == 0) {
      break;
    }
  }
  return side;
}

std::optional<Candidate> kl_gate_search(const Circuit& working, const std::vector<int>& cands,
                                        int max_cuts, const std::vector<int>& base,
                                        const std::function<std::vector<int>(const std::vector<int>&)>& eval) {
  std::vector<int> chosen;
  const auto& gates = working.gates();
  while (static_cast<int>(chosen.size()) < max_cuts) {
    // largest remaining component
    UnionFind uf(static_cast<std::size_t>(working.num_qubits()));
    const std::set<int> cut(chosen.begin(), chosen.end());
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (cut.count(static_cast<int>(i)) == 0) {
        const Gate& g = gates[static_cast<std::size_t>(cands[i])];
        uf.unite(g.qubits[0], g.qubits[1]);
      }
    }
    std::map<int, std::vector<int>> comps;
    for (int q : active_list(working)) {
      comps[uf.find(q)].push_back(q);
    }
    std::vector<int> largest;
    for (auto& [r, m] : comps) {
      if (m.size() > largest.size()) {
        largest = m;
      }
    }
    if (largest.size() < 2) {
      break;
    }
    const std::set<int> in(largest.begin(), largest.end());
    std::map<std::pair<int, int>, int> weights;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const Gate& g = gates[static_cast<std::size_t>(cands[i])];
      if (cut.count(static_cast<int>(i)) == 0 && in.count(g.qubits[0]) != 0) {
        weights[{std::min(g.qubits[0], g.qubits[1]), std::max(g.qubits[0], g.qubits[1])}]++;
      }
    }
    const auto side = kl_bisect(largest, weights);
    std::vector<int> crossing;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const Gate& g = gates[static_cast<std::size_t>(cands[i])];
      if (cut.count(static_cast<int>(i)) == 0 && in.count(g.qubits[0]) != 0 &&
          side.at(g.qubits[0]) != side.at(g.qubits[1])) {
        crossing.push_back(static_cast<int>(i));
      }
    }
    if (crossing.empty() || chosen.size() + crossing.size() > static_cast<std::size_t>(max_cuts)) {
      break;
    }
    chosen.insert(chosen.end(), crossing.begin(), crossing.end());
  }
  if (chosen.empty()) {
    return std::nullopt;
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<int> sizes = eval(chosen);
  if (sizes.front() >= base.front()) {
    return std::nullopt;
  }
  return Candidate{sizes.front(), static_cast<int>(chosen.size()), chosen, sizes};
}

int next_vg_id(const std::vector<VirtualGateRecord>& records) {
  int id = 0;
  for (const auto& r : records) {
    id = std::max(id, r.vg_id + 1);
  }
  return id;
}

PassReport make_report(const std::string& name, json outputs) {
  PassReport r;
  r.name = name;
  r.outputs = std::move(outputs);
  return r;
}

json fragments_json(const std::vector<Qernel>& children) {
  json out = json::array();
  for (const Qernel& c : children) {
    const FragmentStats st = fragment_stats(c.circuit);
    out.push_back({{"qubits", st.qubits}, {"interactions", st.interactions}});
  }
  return out;
}


}  // namespace

void OptimizationGoal::validate() const {
  if (size_target < 1) {
    throw std::invalid_argument("size target must be at least 1");
  }
  if (budget < 0) {
    throw std::invalid_argument("budget must be non-negative");
  }
}

std::uint64_t cut_cost(CutKind kind, int k) {
  const std::uint64_t base = kind == CutKind::Gate ? 6 : kind == CutKind::Wire ? 8 : 2;
  std::uint64_t c = 1;
  for (int i = 0; i < k; ++i) {
    c *= base;
  }
  return c;
}

std::vector<bool> active_qubits(const Circuit& c) {
  std::vector<bool> active(static_cast<std::size_t>(c.num_qubits()), false);
  for (const Gate& g : c.gates()) {
    for (int q : g.qubits) {
      active[static_cast<std::size_t>(q)] = true;
    }
  }
  return active;
}

std::vector<int> fragment_sizes(const Circuit& working) {
  UnionFind uf(static_cast<std::size_t>(working.num_qubits()));
  for (const Gate& g : working.gates()) {
    if (is_interaction(g)) {
      uf.unite(g.qubits[0], g.qubits[1]);
    }
  }
  return sizes_descending(uf, active_list(working));
}

CutPlan plan_gate_cuts(const Circuit& working, int max_cuts, int s, const OptimizerConfig& cfg) {
  CutPlan plan;
  plan.kind = CutKind::Gate;
  plan.expected_fragment_sizes = fragment_sizes(working);
  if (plan.max_fragment_size() <= s || max_cuts <= 0) {
    return plan;
  }
  std::vector<int> cands;
  for (std::size_t i = 0; i < working.gates().size(); ++i) {
    if (is_interaction(working.gates()[i])) {
      cands.push_back(static_cast<int>(i));
    }
  }
  const std::vector<int> members = active_list(working);
  const auto eval = [&](const std::vector<int>& choice) {
    UnionFind uf(static_cast<std::size_t>(working.num_qubits()));
    std::size_t next = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (next < choice.size() && choice[next] == static_cast<int>(i)) {
        ++next;
        continue;
      }
      const Gate& g = working.gates()[static_cast<std::size_t>(cands[i])];
      uf.unite(g.qubits[0], g.qubits[1]);
    }
    return sizes_descending(uf, members);
  };
  const int n = static_cast<int>(cands.size());
  const std::optional<Candidate> best =
      subsets_up_to(n, max_cuts) <= cfg.exhaustive_limit
          ? search_cuts(n, max_cuts, s, plan.expected_fragment_sizes, eval)
          : kl_gate_search(working, cands, max_cuts, plan.expected_fragment_sizes, eval);
  if (!best) {
    return plan;
  }
  for (int i : best->choice) {
    plan.locations.push_back(cands[static_cast<std::size_t>(i)]);
  }
  plan.expected_cost = cut_cost(CutKind::Gate, best->k);
  plan.expected_fragment_sizes = best->sizes;
  return plan;
}

CutPlan plan_wire_cuts(const Circuit& working, int max_cuts, int s, const OptimizerConfig& cfg) {
  CutPlan plan;
  plan.kind = CutKind::Wire;
  plan.expected_fragment_sizes = fragment_sizes(working);
  if (plan.max_fragment_size() <= s || max_cuts <= 0) {
    return plan;
  }
  // Candidate points sit right after a 2-qubit gate that is followed by another
  // 2-qubit gate on the same wire.
  const auto nq = static_cast<std::size_t>(working.num_qubits());
  std::vector<int> ops(nq, 0);
  std::vector<int> twoq(nq, 0);
  std::vector<std::vector<int>> after_twoq(nq);  // op count after the j-th 2q gate
  for (const Gate& g : working.gates()) {
    for (int q : g.qubits) {
      const auto uq = static_cast<std::size_t>(q);
      ops[uq]++;
      if (is_interaction(g)) {
        twoq[uq]++;
        after_twoq[uq].push_back(ops[uq]);
      }
    }
  }
  std::vector<WirePoint> cands;
  std::vector<int> cand_ordinal;  // cut after this many 2q gates on the wire
  for (std::size_t q = 0; q < nq; ++q) {
    for (int j = 1; j < twoq[q]; ++j) {
      cands.push_back({static_cast<int>(q), after_twoq[q][static_cast<std::size_t>(j - 1)]});
      cand_ordinal.push_back(j);
    }
  }
  const std::vector<int> members_q = active_list(working);
  const auto eval = [&](const std::vector<int>& choice) {
    // segment ids: qubit q, segment t -> base[q] + t
    std::vector<std::vector<int>> cuts_on(nq);
    for (int i : choice) {
      cuts_on[static_cast<std::size_t>(cands[static_cast<std::size_t>(i)].qubit)].push_back(
          cand_ordinal[static_cast<std::size_t>(i)]);
    }
    std::vector<int> base(nq + 1, 0);
    for (std::size_t q = 0; q < nq; ++q) {
      base[q + 1] = base[q] + 1 + static_cast<int>(cuts_on[q].size());
    }
    UnionFind uf(static_cast<std::size_t>(base[nq]));
    std::vector<int> seen(nq, 0);
    auto segment = [&](int q) {
      const auto uq = static_cast<std::size_t>(q);
      const int t = ++seen[uq];  // 1-based ordinal of this 2q gate on q
      int seg = 0;
      for (int j : cuts_on[uq]) {
        seg += j < t ? 1 : 0;
      }
      return base[uq] + seg;
    };
    for (const Gate& g : working.gates()) {
      if (is_interaction(g)) {
        uf.unite(segment(g.qubits[0]), segment(g.qubits[1]));
      }
    }
    std::vector<int> members;
    for (int q : members_q) {
      const auto uq = static_cast<std::size_t>(q);
      for (int t = base[uq]; t < base[uq + 1]; ++t) {
        members.push_back(t);
      }
    }
    return sizes_descending(uf, members);
  };
  const int n = static_cast<int>(cands.size());
  if (subsets_up_to(n, max_cuts) > cfg.exhaustive_limit) {
    return plan;  // gate cutting covers large instances
  }
  const std::optional<Candidate> best = search_cuts(n, max_cuts, s, plan.expected_fragment_sizes, eval);
  if (!best) {
    return plan;
  }
  for (int i : best->choice) {
    plan.wires.push_back(cands[static_cast<std::size_t>(i)]);
  }
  plan.expected_cost = cut_cost(CutKind::Wire, best->k);
  plan.expected_fragment_sizes = best->sizes;
  return plan;
}

Circuit apply_gate_cuts(const Circuit& working, const std::vector<int>& gates,
                        std::vector<VirtualGateRecord>& records) {
  const std::set<int> cut(gates.begin(), gates.end());
  int id = next_vg_id(records);
  Circuit out(working.num_qubits(), working.num_clbits(), working.name());
  out.set_num_aux_clbits(working.num_aux_clbits());
  const double half_pi = M_PI / 2;
  for (std::size_t i = 0; i < working.gates().size(); ++i) {
    const Gate& g = working.gates()[i];
    if (cut.count(static_cast<int>(i)) == 0) {
      out.mutable_gates().push_back(g);
      continue;
    }
    if (!is_interaction(g)) {
      throw std::invalid_argument("gate " + std::to_string(i) + " is not a 2-qubit gate");
    }
    const int a = g.qubits[0];
    const int b = g.qubits[1];
    // Every cut gate becomes single-qubit gates around one RZZ interaction.
    switch (g.kind) {
    case GateKind::RZZ:
      out.add(Gate::virtual_gate({a, b}, id, VirtualRole::GateCut, g.theta));
      break;
    case GateKind::CZ:
      out.add(Gate::rz(a, half_pi)).add(Gate::rz(b, half_pi));
      out.add(Gate::virtual_gate({a, b}, id, VirtualRole::GateCut, -half_pi));
      break;
    case GateKind::CX:
      out.add(Gate::h(b)).add(Gate::rz(a, half_pi)).add(Gate::rz(b, half_pi));
      out.add(Gate::virtual_gate({a, b}, id, VirtualRole::GateCut, -half_pi));
      out.add(Gate::h(b));
      break;
    default:
      throw std::invalid_argument("cannot cut gate kind " + std::string(to_string(g.kind)));
    }
    VirtualGateRecord rec;
    rec.vg_id = id++;
    rec.kind = CutKind::Gate;
    rec.original = g;
    rec.location = static_cast<int>(i);
    records.push_back(rec);
  }
  return out;
}

Circuit apply_wire_cuts(const Circuit& working, const std::vector<WirePoint>& points,
                        std::vector<VirtualGateRecord>& records) {
  std::vector<WirePoint> order = points;
  std::sort(order.begin(), order.end(), [](const WirePoint& x, const WirePoint& y) {
    return x.qubit != y.qubit ? x.qubit < y.qubit : x.position > y.position;
  });
  Circuit out = working;
  int id = next_vg_id(records);
  for (const WirePoint& p : order) {
    auto& gates = out.mutable_gates();
    int seen = 0;
    std::size_t at = gates.size();
    for (std::size_t i = 0; i < gates.size(); ++i) {
      const auto& qs = gates[i].qubits;
      if (std::find(qs.begin(), qs.end(), p.qubit) != qs.end()) {
        if (seen == p.position) {
          at = i;
          break;
        }
        ++seen;
      }
    }
    if (at == gates.size() && seen < p.position) {
      throw std::invalid_argument("wire cut position beyond the end of qubit " + std::to_string(p.qubit));
    }
    const int fresh = out.add_qubit();
    for (std::size_t i = at; i < gates.size(); ++i) {
      for (int& q : gates[i].qubits) {
        if (q == p.qubit) {
          q = fresh;
        }
      }
    }
    const Gate marker = Gate::virtual_gate({p.qubit, fresh}, id, VirtualRole::WireCut);
    gates.insert(gates.begin() + static_cast<std::ptrdiff_t>(at), marker);
    VirtualGateRecord rec;
    rec.vg_id = id++;
    rec.kind = CutKind::Wire;
    rec.original = marker;
    rec.location = p.qubit;
    rec.position = p.position;
    rec.new_qubit = fresh;
    records.push_back(rec);
  }
  return out;
}

bool is_freezable(const Circuit& c, int q) {
  bool first = true;
  bool measured = false;
  bool any = false;
  for (const Gate& g : c.gates()) {
    if (std::find(g.qubits.begin(), g.qubits.end(), q) == g.qubits.end()) {
      continue;
    }
    any = true;
    if (measured) {
      return false;
    }
    const bool leading_h = first && g.kind == GateKind::H;
    first = false;
    if (leading_h) {
      continue;
    }
    switch (g.kind) {
    case GateKind::RZ:
    case GateKind::RZZ:
    case GateKind::CZ:
      break;
    case GateKind::Virtual:
      if (g.role != VirtualRole::Freeze) {
        return false;
      }
      break;
    case GateKind::Measure:
      measured = true;
      break;
    default:
      return false;
    }
  }
  return any;
}

Circuit apply_freeze(const Circuit& working, int q, std::vector<VirtualGateRecord>& records) {
  if (!is_freezable(working, q)) {
    throw std::invalid_argument("qubit " + std::to_string(q) + " cannot be frozen");
  }
  VirtualGateRecord rec;
  rec.vg_id = next_vg_id(records);
  rec.kind = CutKind::Freeze;
  rec.location = q;
  rec.original = Gate::measure(q, -1);
  Circuit out(working.num_qubits(), working.num_clbits(), working.name());
  out.set_num_aux_clbits(working.num_aux_clbits());
  bool first = true;
  for (const Gate& g : working.gates()) {
    const auto it = std::find(g.qubits.begin(), g.qubits.end(), q);
    if (it == g.qubits.end()) {
      out.mutable_gates().push_back(g);
      continue;
    }
    if (first && g.kind == GateKind::H) {
      rec.leading_h = true;
    }
    first = false;
    if (g.kind == GateKind::Measure) {
      rec.frozen_clbit = g.clbit;
      rec.original = g;
    } else if (g.qubits.size() == 2) {
      const int other = g.qubits[0] == q ? g.qubits[1] : g.qubits[0];
      if (g.kind == GateKind::CZ) {
        out.add(Gate::rz(other, M_PI / 2));
        out.add(Gate::virtual_gate({other}, rec.vg_id, VirtualRole::Freeze, -M_PI / 2));
      } else {
        out.add(Gate::virtual_gate({other}, rec.vg_id, VirtualRole::Freeze, g.theta));
      }
    }
    // single-qubit phases on the frozen qubit are dropped
  }
  records.push_back(rec);
  return out;
}

std::vector<Qernel> split_fragments(const Circuit& working, const std::string& parent_id) {
  const auto nq = static_cast<std::size_t>(working.num_qubits());
  UnionFind uf(nq);
  for (const Gate& g : working.gates()) {
    if (is_interaction(g)) {
      uf.unite(g.qubits[0], g.qubits[1]);
    }
  }
  std::map<int, std::vector<int>> comps;
  for (int q : active_list(working)) {
    comps[uf.find(q)].push_back(q);
  }
  std::vector<int> frag_of(nq, -1);
  std::vector<int> local(nq, -1);
  std::vector<Circuit> circuits;
  std::vector<std::vector<std::vector<int>>> maps;
  for (const auto& [root, members] : comps) {
    const int f = static_cast<int>(circuits.size());
    std::vector<std::vector<int>> map;
    for (std::size_t i = 0; i < members.size(); ++i) {
      frag_of[static_cast<std::size_t>(members[i])] = f;
      local[static_cast<std::size_t>(members[i])] = static_cast<int>(i);
      map.push_back({members[i]});
    }
    circuits.emplace_back(static_cast<int>(members.size()), working.num_clbits(),
                          parent_id + ".f" + std::to_string(f));
    maps.push_back(std::move(map));
  }
  auto place = [&](int q, Gate g) {
    const auto uq = static_cast<std::size_t>(q);
    for (int& x : g.qubits) {
      x = local[static_cast<std::size_t>(x)];
    }
    circuits[static_cast<std::size_t>(frag_of[uq])].mutable_gates().push_back(std::move(g));
  };
  for (const Gate& g : working.gates()) {
    if (g.kind == GateKind::Virtual && g.qubits.size() == 2) {
      const bool gate_cut = g.role == VirtualRole::GateCut;
      place(g.qubits[0], Gate::virtual_gate({g.qubits[0]}, g.vg_id,
                                            gate_cut ? VirtualRole::GateSide0 : VirtualRole::WireSource, g.theta));
      place(g.qubits[1], Gate::virtual_gate({g.qubits[1]}, g.vg_id,
                                            gate_cut ? VirtualRole::GateSide1 : VirtualRole::WireSink, g.theta));
      continue;
    }
    place(g.qubits[0], g);
  }
  std::vector<Qernel> out;
  for (std::size_t f = 0; f < circuits.size(); ++f) {
    Qernel child;
    child.id = circuits[f].name();
    child.source = circuits[f];
    child.circuit = circuits[f];
    child.qubit_map = maps[f];
    child.analyze();
    out.push_back(std::move(child));
  }
  return out;
}

FragmentStats fragment_stats(const Circuit& fragment) {
  FragmentStats st;
  for (bool a : active_qubits(fragment)) {
    st.qubits += a ? 1 : 0;
  }
  for (const Gate& g : fragment.gates()) {
    if (is_interaction(g) ||
        (g.kind == GateKind::Virtual &&
         (g.role == VirtualRole::GateSide0 || g.role == VirtualRole::GateSide1 || g.role == VirtualRole::GateCut))) {
      st.interactions++;
    }
  }
  return st;
}

namespace {

Qernel with_fragments(Qernel q) {
  q.analyze();
  q.children = split_fragments(q.circuit, q.id);
  return q;
}

json stats_json(const Circuit& working) {
  const FragmentStats st = fragment_stats(working);
  return {{"active_qubits", st.qubits}, {"interactions", st.interactions}};
}

}  // namespace

Qernel gate_cutting_pass(const Qernel& q, int max_cuts, int s, CutPlan* plan_out,
                         const OptimizerConfig& cfg) {
  const CutPlan plan = plan_gate_cuts(q.circuit, max_cuts, s, cfg);
  Qernel out = q;
  out.circuit = apply_gate_cuts(q.circuit, plan.locations, out.virtual_gate_records);
  out = with_fragments(std::move(out));
  out.reports.push_back(make_report("gate_cutting", {{"gates", plan.locations},
                                                     {"cost", plan.expected_cost},
                                                     {"fragments", fragments_json(out.children)}}));
  if (plan_out != nullptr) {
    *plan_out = plan;
  }
  return out;
}

Qernel wire_cutting_pass(const Qernel& q, int max_cuts, int s, CutPlan* plan_out,
                         const OptimizerConfig& cfg) {
  const CutPlan plan = plan_wire_cuts(q.circuit, max_cuts, s, cfg);
  Qernel out = q;
  out.circuit = apply_wire_cuts(q.circuit, plan.wires, out.virtual_gate_records);
  out = with_fragments(std::move(out));
  json points = json::array();
  for (const WirePoint& p : plan.wires) {
    points.push_back({p.qubit, p.position});
  }
  out.reports.push_back(make_report("wire_cutting", {{"wires", points},
                                                     {"cost", plan.expected_cost},
                                                     {"fragments", fragments_json(out.children)}}));
  if (plan_out != nullptr) {
    *plan_out = plan;
  }
  return out;
}

namespace {

// Highest-degree active qubit of the non-virtual interaction graph, and the
// average degree over active qubits.
std::pair<int, double> interaction_hotspot(const Circuit& c) {
  RefinedQIR r(c.num_qubits());
  for (const Gate& g : c.gates()) {
    if (is_interaction(g)) {
      r.add_interaction(g.qubits[0], g.qubits[1]);
    }
  }
  const auto active = active_list(c);
  int best = -1;
  int best_deg = -1;
  double sum = 0.0;
  for (int q : active) {
    const int d = r.degree(q);
    sum += d;
    if (d > best_deg) {
      best_deg = d;
      best = q;
    }
  }
  return {best, active.empty() ? 0.0 : sum / static_cast<double>(active.size())};
}

int interaction_degree(const Circuit& c, int q) {
  std::set<int> nb;
  for (const Gate& g : c.gates()) {
    if (is_interaction(g) && (g.qubits[0] == q || g.qubits[1] == q)) {
      nb.insert(g.qubits[0] == q ? g.qubits[1] : g.qubits[0]);
    }
  }
  return static_cast<int>(nb.size());
}

}  // namespace

Qernel qubit_freezing_pass(const Qernel& q, int m) {
  if (m > 0 && !is_qaoa_structured(q.circuit)) {
    throw std::invalid_argument("qubit freezing needs a QAOA-structured circuit");
  }
  Qernel out = q;
  out.circuit = with_default_measurements(q.circuit);
  for (int i = 0; i < m; ++i) {
    const int hot = interaction_hotspot(out.circuit).first;
    if (hot < 0) {
      throw std::invalid_argument("no qubit left to freeze");
    }
    out.circuit = apply_freeze(out.circuit, hot, out.virtual_gate_records);
    out.reports.push_back(make_report("qubit_freezing", {{"qubit", hot}, {"after", stats_json(out.circuit)}}));
  }
  return with_fragments(std::move(out));
}

namespace {

struct ReuseMove {
  int depth = 0;
  int a = 0;
  int b = 0;
  Circuit merged;  // wire b already removed
};

// All valid merges of a wire b onto a wire a, ordered by (depth, a, b).
std::vector<ReuseMove> reuse_moves(const Circuit& cur) {
  const QIR qir = build_qir(cur);
  const std::size_t n = qir.size();
  const std::size_t words = (n + 63) / 64;
  // desc[v]: v and everything after it in the DAG
  std::vector<std::vector<std::uint64_t>> desc(n, std::vector<std::uint64_t>(words, 0));
  const auto order = qir.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto v = static_cast<std::size_t>(*it);
    desc[v][v / 64] |= std::uint64_t{1} << (v % 64);
    for (int w : qir.successors(*it)) {
      for (std::size_t k = 0; k < words; ++k) {
        desc[v][k] |= desc[static_cast<std::size_t>(w)][k];
      }
    }
  }
  const auto nq = static_cast<std::size_t>(cur.num_qubits());
  std::vector<std::vector<std::uint64_t>> desc_q(nq, std::vector<std::uint64_t>(words, 0));
  std::vector<std::vector<std::size_t>> nodes_q(nq);
  for (std::size_t v = 0; v < n; ++v) {
    for (int q : qir.nodes()[v].qubits) {
      nodes_q[static_cast<std::size_t>(q)].push_back(v);
      for (std::size_t k = 0; k < words; ++k) {
        desc_q[static_cast<std::size_t>(q)][k] |= desc[v][k];
      }
    }
  }
  auto in = [&](const std::vector<std::uint64_t>& set, std::size_t v) {
    return ((set[v / 64] >> (v % 64)) & 1U) != 0;
  };
  std::vector<ReuseMove> moves;
  for (std::size_t a = 0; a < nq; ++a) {
    for (std::size_t b = 0; b < nq; ++b) {
      if (a == b || nodes_q[a].empty() || nodes_q[b].empty()) {
        continue;
      }
      const bool blocked = std::any_of(nodes_q[a].begin(), nodes_q[a].end(),
                                       [&](std::size_t v) { return in(desc_q[b], v); });
      if (blocked) {
        continue;
      }
      const auto ia = static_cast<int>(a);
      const auto ib = static_cast<int>(b);
      Circuit merged(cur.num_qubits(), cur.num_clbits(), cur.name());
      merged.set_num_aux_clbits(cur.num_aux_clbits());
      std::vector<Gate> tail;
      for (std::size_t v = 0; v < n; ++v) {
        Gate g = cur.gates()[v];
        if (in(desc_q[b], v)) {
          for (int& q : g.qubits) {
            q = q == ib ? ia : q;
          }
          tail.push_back(std::move(g));
        } else {
          merged.mutable_gates().push_back(std::move(g));
        }
      }
      merged.mutable_gates().push_back(Gate::reset(ia));
      for (Gate& g : tail) {
        merged.mutable_gates().push_back(std::move(g));
      }
      const int depth = circuit_depth(merged, {.count_measurements = true});
      for (Gate& g : merged.mutable_gates()) {
        for (int& q : g.qubits) {
          q = q > ib ? q - 1 : q;
        }
      }
      merged.set_num_qubits(cur.num_qubits() - 1);
      moves.push_back({depth, ia, ib, std::move(merged)});
    }
  }
  std::sort(moves.begin(), moves.end(), [](const ReuseMove& x, const ReuseMove& y) {
    return std::tie(x.depth, x.a, x.b) < std::tie(y.depth, y.a, y.b);
  });
  return moves;
}

struct ReuseSearch {
  int s = 1;
  int expansions = 0;
  static constexpr int kMaxExpansions = 2000;
  Circuit best;
  std::vector<std::vector<int>> best_hosts;

  // Depth-first over merges in preference order; true once width <= s.
  bool run(const Circuit& cur, const std::vector<std::vector<int>>& host) {
    if (cur.num_qubits() < best.num_qubits()) {
      best = cur;
      best_hosts = host;
    }
    if (cur.num_qubits() <= s) {
      return true;
    }
    ++expansions;
    for (ReuseMove& m : reuse_moves(cur)) {
      std::vector<std::vector<int>> next = host;
      auto& ha = next[static_cast<std::size_t>(m.a)];
      const auto hb = next[static_cast<std::size_t>(m.b)];
      ha.insert(ha.end(), hb.begin(), hb.end());
      next.erase(next.begin() + m.b);
      if (run(m.merged, next)) {
        return true;
      }
      if (expansions >= kMaxExpansions) {
        return false;  // keep the best width found so far
      }
    }
    return false;
  }
};

}  // namespace

Circuit reuse_qubits(const Circuit& c, int s, std::vector<std::vector<int>>* hosts) {
  std::vector<std::vector<int>> host(static_cast<std::size_t>(c.num_qubits()));
  for (int q = 0; q < c.num_qubits(); ++q) {
    host[static_cast<std::size_t>(q)] = {q};
  }
  ReuseSearch search;
  search.s = s;
  search.best = c;
  search.best_hosts = host;
  search.run(c, host);
  if (hosts != nullptr) {
    *hosts = std::move(search.best_hosts);
  }
  return search.best;
}

Qernel qubit_reuse_pass(const Qernel& q, int s) {
  Qernel out = q;
  if (out.children.empty()) {
    out.circuit = with_default_measurements(out.circuit);
    out = with_fragments(std::move(out));
  }
  for (Qernel& child : out.children) {
    if (child.circuit.num_qubits() <= s) {
      continue;
    }
    std::vector<std::vector<int>> hosts;
    child.circuit = reuse_qubits(child.circuit, s, &hosts);
    std::vector<std::vector<int>> map;
    for (const auto& h : hosts) {
      std::vector<int> working;
      for (int local : h) {
        const auto& prev = child.qubit_map[static_cast<std::size_t>(local)];
        working.insert(working.end(), prev.begin(), prev.end());
      }
      map.push_back(std::move(working));
    }
    child.qubit_map = std::move(map);
    child.analyze();
  }
  out.reports.push_back(make_report("qubit_reuse", {{"size_target", s}, {"fragments", fragments_json(out.children)}}));
  return out;
}

Qernel optimize(const Qernel& input, const OptimizationGoal& goal, const OptimizerConfig& cfg) {
  goal.validate();
  Qernel q = input;
  q.circuit = with_default_measurements(input.circuit);
  q.analyze();
  int budget = goal.budget;
  const int s = goal.size_target;

  auto max_size = [](const Circuit& c) {
    const auto sizes = fragment_sizes(c);
    return sizes.empty() ? 0 : sizes.front();
  };

  const auto [hot, avg] = interaction_hotspot(q.circuit);
  q.reports.push_back(make_report("hotspot_selection", {{"qubit", hot},
                                              {"degree", hot < 0 ? 0 : interaction_degree(q.circuit, hot)},
                                              {"average_degree", avg}}));

  // (2) freeze hotspots of QAOA-structured circuits while it pays off
  if (cfg.allow_freeze && is_qaoa_structured(q.circuit)) {
    while (budget > 0 && max_size(q.circuit) > s) {
      const auto [h, mean] = interaction_hotspot(q.circuit);
      if (h < 0 || interaction_degree(q.circuit, h) < mean + 1.0 || !is_freezable(q.circuit, h)) {
        break;
      }
      q.circuit = apply_freeze(q.circuit, h, q.virtual_gate_records);
      --budget;
      q.reports.push_back(make_report("qubit_freezing", {{"qubit", h}, {"after", stats_json(q.circuit)}}));
    }
  }

  // (3) the cheaper of gate and wire cutting
  if (budget > 0 && max_size(q.circuit) > s) {
    std::optional<CutPlan> chosen;
    auto consider = [&](const CutPlan& p) {
      if (p.num_cuts() == 0) {
        return;
      }
      if (!chosen) {
        chosen = p;
        return;
      }
      const bool p_ok = p.max_fragment_size() <= s;
      const bool c_ok = chosen->max_fragment_size() <= s;
      if (p_ok != c_ok) {
        if (p_ok) {
          chosen = p;
        }
        return;
      }
      const auto key_p = std::make_pair(p_ok ? 0 : p.max_fragment_size(), p.expected_cost);
      const auto key_c = std::make_pair(c_ok ? 0 : chosen->max_fragment_size(), chosen->expected_cost);
      if (key_p < key_c) {
        chosen = p;
      }
    };
    if (cfg.allow_gate_cuts) {
      consider(plan_gate_cuts(q.circuit, budget, s, cfg));
    }
    if (cfg.allow_wire_cuts) {
      consider(plan_wire_cuts(q.circuit, budget, s, cfg));
    }
    if (chosen) {
      if (chosen->kind == CutKind::Gate) {
        q.circuit = apply_gate_cuts(q.circuit, chosen->locations, q.virtual_gate_records);
      } else {
        q.circuit = apply_wire_cuts(q.circuit, chosen->wires, q.virtual_gate_records);
      }
      budget -= chosen->num_cuts();
      const std::vector<Qernel> frags = split_fragments(q.circuit, q.id);
      q.reports.push_back(make_report(chosen->kind == CutKind::Gate ? "gate_cutting" : "wire_cutting",
                                      {{"cuts", chosen->num_cuts()},
                                       {"cost", chosen->expected_cost},
                                       {"fragments", fragments_json(frags)}}));
    }
  }

  q = with_fragments(std::move(q));

  // (4) qubit reuse as the last resort
  if (cfg.allow_reuse && max_fragment_width(q) > s) {
    q = qubit_reuse_pass(q, s);
  }
  if (max_fragment_width(q) > s) {
    q.reports.push_back(make_report("warning", {{"message", "size target not reached"},
                                                {"size_target", s},
                                                {"achieved", max_fragment_width(q)}}));
  }
  q.reports.push_back(make_report("budget", {{"initial", goal.budget}, {"remaining", budget}}));
  return q;
}

int max_fragment_width(const Qernel& optimized) {
  if (optimized.children.empty()) {
    const auto sizes = fragment_sizes(optimized.circuit);
    return sizes.empty() ? 0 : sizes.front();
  }
  int w = 0;
  for (const Qernel& c : optimized.children) {
    w = std::max(w, c.circuit.num_qubits());
  }
  return w;
}

}  // namespace qos
