#include "qos/transpiler.hpp"

#include "qos/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

namespace qos {

namespace {

std::map<std::pair<int, int>, int> interaction_weights(const Circuit& c) {
  std::map<std::pair<int, int>, int> w;
  for (const Gate& g : c.gates()) {
    if (g.qubits.size() == 2) {
      w[{std::min(g.qubits[0], g.qubits[1]), std::max(g.qubits[0], g.qubits[1])}]++;
    }
  }
  return w;
}

double link_error(const QpuDescriptor& qpu, int a, int b) {
  return qpu.calibration.error(qpu.two_qubit_basis(), {std::min(a, b), std::max(a, b)});
}

// Shortest path from a to b, preferring lower-numbered neighbours.
std::vector<int> shortest_path(const std::vector<std::vector<int>>& adj, int a, int b) {
  std::vector<int> prev(adj.size(), -1);
  std::vector<bool> seen(adj.size(), false);
  std::queue<int> queue;
  queue.push(a);
  seen[static_cast<std::size_t>(a)] = true;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop();
    if (v == b) {
      break;
    }
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = true;
        prev[static_cast<std::size_t>(w)] = v;
        queue.push(w);
      }
    }
  }
  if (!seen[static_cast<std::size_t>(b)]) {
    throw TranspileError("physical qubits " + std::to_string(a) + " and " + std::to_string(b) +
                         " are not connected");
  }
  std::vector<int> path;
  for (int v = b; v != -1; v = prev[static_cast<std::size_t>(v)]) {
    path.push_back(v);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

bool has(const QpuDescriptor& qpu, GateKind k) { return qpu.basis_gates.count(k) != 0; }

void emit_h(std::vector<Gate>& out, int q) {
  out.push_back(Gate::rz(q, M_PI / 2));
  out.push_back(Gate::sx(q));
  out.push_back(Gate::rz(q, M_PI / 2));
}

void emit_cx(std::vector<Gate>& out, int c, int t, const QpuDescriptor& qpu) {
  if (has(qpu, GateKind::CX)) {
    out.push_back(Gate::cx(c, t));
    return;
  }
  emit_h(out, t);
  out.push_back(Gate::cz(c, t));
  emit_h(out, t);
}

void emit_cz(std::vector<Gate>& out, int a, int b, const QpuDescriptor& qpu) {
  if (has(qpu, GateKind::CZ)) {
    out.push_back(Gate::cz(a, b));
    return;
  }
  emit_h(out, b);
  out.push_back(Gate::cx(a, b));
  emit_h(out, b);
}

void emit_basis(std::vector<Gate>& out, const Gate& g, const QpuDescriptor& qpu) {
  switch (g.kind) {
  case GateKind::X:
    if (has(qpu, GateKind::X)) {
      out.push_back(g);
    } else {
      out.push_back(Gate::sx(g.qubits[0]));
      out.push_back(Gate::sx(g.qubits[0]));
    }
    break;
  case GateKind::SX:
  case GateKind::RZ:
  case GateKind::Measure:
  case GateKind::Reset:
    out.push_back(g);
    break;
  case GateKind::H:
    emit_h(out, g.qubits[0]);
    break;
  case GateKind::CX:
    emit_cx(out, g.qubits[0], g.qubits[1], qpu);
    break;
  case GateKind::CZ:
    emit_cz(out, g.qubits[0], g.qubits[1], qpu);
    break;
  case GateKind::RZZ:
    emit_cx(out, g.qubits[0], g.qubits[1], qpu);
    out.push_back(Gate::rz(g.qubits[1], g.theta));
    emit_cx(out, g.qubits[0], g.qubits[1], qpu);
    break;
  case GateKind::Virtual:
    throw TranspileError("virtual gates must be instantiated before transpilation");
  }
}

void emit_swap(std::vector<Gate>& out, int a, int b, const QpuDescriptor& qpu) {
  emit_cx(out, a, b, qpu);
  emit_cx(out, b, a, qpu);
  emit_cx(out, a, b, qpu);
}

double wrap_angle(double theta) {
  double t = std::remainder(theta, 2.0 * M_PI);
  return std::abs(t) < 1e-12 ? 0.0 : t;
}

// Merges runs of RZ on a qubit and drops rotations by multiples of 2*pi.
// `source` runs parallel to `gates` and is filtered the same way.
void merge_rz(std::vector<Gate>& gates, std::vector<int>& source, int num_qubits) {
  std::vector<Gate> out;
  std::vector<int> out_src;
  std::vector<long> last(static_cast<std::size_t>(num_qubits), -1);
  for (std::size_t k = 0; k < gates.size(); ++k) {
    const Gate& g = gates[k];
    if (g.kind == GateKind::RZ) {
      const long i = last[static_cast<std::size_t>(g.qubits[0])];
      if (i >= 0 && out[static_cast<std::size_t>(i)].kind == GateKind::RZ) {
        out[static_cast<std::size_t>(i)].theta += g.theta;
        continue;
      }
    }
    out.push_back(g);
    out_src.push_back(source[k]);
    for (int q : g.qubits) {
      last[static_cast<std::size_t>(q)] = static_cast<long>(out.size()) - 1;
    }
  }
  gates.clear();
  source.clear();
  for (std::size_t k = 0; k < out.size(); ++k) {
    Gate& g = out[k];
    if (g.kind == GateKind::RZ) {
      g.theta = wrap_angle(g.theta);
      if (g.theta == 0.0) {
        continue;
      }
    }
    gates.push_back(std::move(g));
    source.push_back(out_src[k]);
  }
}

}  // namespace

std::vector<int> choose_layout(const Circuit& logical, const QpuDescriptor& qpu) {
  const int n = logical.num_qubits();
  if (n > qpu.num_qubits) {
    throw TranspileError("circuit with " + std::to_string(n) + " qubits does not fit " + qpu.id +
                         " (" + std::to_string(qpu.num_qubits) + " qubits)");
  }
  const auto weights = interaction_weights(logical);
  std::vector<std::vector<std::pair<int, int>>> partners(static_cast<std::size_t>(n));
  std::vector<int> total(static_cast<std::size_t>(n), 0);
  for (const auto& [e, w] : weights) {
    partners[static_cast<std::size_t>(e.first)].emplace_back(e.second, w);
    partners[static_cast<std::size_t>(e.second)].emplace_back(e.first, w);
    total[static_cast<std::size_t>(e.first)] += w;
    total[static_cast<std::size_t>(e.second)] += w;
  }
  std::vector<bool> active(static_cast<std::size_t>(n), false);
  for (const Gate& g : logical.gates()) {
    for (int q : g.qubits) {
      active[static_cast<std::size_t>(q)] = true;
    }
  }
  const auto dist = qpu.distances();
  const auto adj = qpu.neighbors();
  std::vector<int> layout;
  std::vector<bool> used;

  auto place = [&](int l, int forced) {
    double best = std::numeric_limits<double>::infinity();
    int best_p = -1;
    for (int p = 0; p < qpu.num_qubits; ++p) {
      if (used[static_cast<std::size_t>(p)] || (forced >= 0 && p != forced)) {
        continue;
      }
      double cost = qpu.calibration.readout(p);
      bool placed_partner = false;
      for (const auto& [m, w] : partners[static_cast<std::size_t>(l)]) {
        const int pm = layout[static_cast<std::size_t>(m)];
        if (pm < 0) {
          continue;
        }
        placed_partner = true;
        const int d = dist[static_cast<std::size_t>(p)][static_cast<std::size_t>(pm)];
        cost += w * (d == 1 ? link_error(qpu, p, pm) : static_cast<double>(d - 1));
      }
      const auto& nb = adj[static_cast<std::size_t>(p)];
      if (!placed_partner && !partners[static_cast<std::size_t>(l)].empty()) {
        // a seed qubit: prefer low-error neighbourhoods
        double link = 0.0;
        for (int w : nb) {
          link += link_error(qpu, p, w);
        }
        cost += nb.empty() ? 1.0 : link / static_cast<double>(nb.size());
      }
      // leave room next to p for partners that are still unplaced
      int pending = 0;
      for (const auto& [m, w] : partners[static_cast<std::size_t>(l)]) {
        pending += layout[static_cast<std::size_t>(m)] < 0 ? 1 : 0;
      }
      int free_nb = 0;
      for (int w : nb) {
        free_nb += used[static_cast<std::size_t>(w)] ? 0 : 1;
      }
      cost += std::max(0, pending - free_nb);
      if (cost < best) {
        best = cost;
        best_p = p;
      }
    }
    layout[static_cast<std::size_t>(l)] = best_p;
    used[static_cast<std::size_t>(best_p)] = true;
  };

  // Greedy pass; `start` pins the first logical qubit when >= 0.
  auto greedy = [&](int start) {
    layout.assign(static_cast<std::size_t>(n), -1);
    used.assign(static_cast<std::size_t>(qpu.num_qubits), false);
    std::vector<bool> done(static_cast<std::size_t>(n), false);
    for (int placed = 0; placed < n; ++placed) {
      // next: strongest tie to the placed set, then total weight, then index
      int pick = -1;
      std::tuple<int, int, int> key{-1, -1, 0};
      for (int l = 0; l < n; ++l) {
        if (done[static_cast<std::size_t>(l)]) {
          continue;
        }
        int tie = 0;
        for (const auto& [m, w] : partners[static_cast<std::size_t>(l)]) {
          tie += done[static_cast<std::size_t>(m)] ? w : 0;
        }
        const std::tuple<int, int, int> k{
            tie, total[static_cast<std::size_t>(l)] + (active[static_cast<std::size_t>(l)] ? 1 : 0), -l};
        if (pick < 0 || k > key) {
          key = k;
          pick = l;
        }
      }
      place(pick, placed == 0 ? start : -1);
      done[static_cast<std::size_t>(pick)] = true;
    }
    return layout;
  };

  std::vector<int> best = greedy(-1);
  if (weights.empty()) {
    return best;
  }
  // Restarts from every seed position; a distance-d interaction is charged
  // the link errors of its 3(d-1) SWAP CXs plus the gate itself.
  double mean_link = 0.0;
  for (const Edge& e : qpu.coupling_map) {
    mean_link += link_error(qpu, e.a, e.b);
  }
  mean_link /= qpu.coupling_map.empty() ? 1.0 : static_cast<double>(qpu.coupling_map.size());
  auto score = [&](const std::vector<int>& lay) {
    double cost = 0.0;
    int hops = 0;
    for (int l = 0; l < n; ++l) {
      if (active[static_cast<std::size_t>(l)]) {
        cost += qpu.calibration.readout(lay[static_cast<std::size_t>(l)]);
      }
    }
    for (const auto& [e, w] : weights) {
      const int pa = lay[static_cast<std::size_t>(e.first)];
      const int pb = lay[static_cast<std::size_t>(e.second)];
      const int d = dist[static_cast<std::size_t>(pa)][static_cast<std::size_t>(pb)];
      cost += w * (d == 1 ? link_error(qpu, pa, pb) : (3.0 * (d - 1) + 1.0) * mean_link);
      hops += w * (d - 1);
    }
    return std::pair<double, int>{cost, hops};
  };
  auto best_score = score(best);
  for (int p = 0; p < qpu.num_qubits; ++p) {
    const std::vector<int> cand = greedy(p);
    const auto sc = score(cand);
    if (sc.first < best_score.first - 1e-15 ||
        (std::abs(sc.first - best_score.first) <= 1e-15 && sc.second < best_score.second)) {
      best = cand;
      best_score = sc;
    }
  }
  return best;
}

std::vector<Gate> to_basis(const Gate& g, const QpuDescriptor& qpu) {
  std::vector<Gate> out;
  emit_basis(out, g, qpu);
  return out;
}

TranspiledCircuit transpile(const Circuit& logical, const QpuDescriptor& qpu) {
  if (logical.has_virtual_gates()) {
    throw TranspileError("virtual gates must be instantiated before transpilation");
  }
  const Circuit c = with_default_measurements(logical);
  TranspiledCircuit out;
  out.target = qpu.id;
  out.initial_layout = choose_layout(c, qpu);
  std::vector<int> l2p = out.initial_layout;
  std::vector<int> p2l(static_cast<std::size_t>(qpu.num_qubits), -1);
  for (std::size_t l = 0; l < l2p.size(); ++l) {
    p2l[static_cast<std::size_t>(l2p[l])] = static_cast<int>(l);
  }
  const auto adj = qpu.neighbors();
  std::vector<Gate> routed;
  std::vector<int> routed_src;
  for (std::size_t gi = 0; gi < c.gates().size(); ++gi) {
    const Gate& g = c.gates()[gi];
    Gate pg = g;
    if (g.qubits.size() == 2) {
      int pa = l2p[static_cast<std::size_t>(g.qubits[0])];
      const int pb = l2p[static_cast<std::size_t>(g.qubits[1])];
      if (!qpu.adjacent(pa, pb)) {
        const auto path = shortest_path(adj, pa, pb);
        for (std::size_t i = 0; i + 2 < path.size(); ++i) {
          const int x = path[i];
          const int y = path[i + 1];
          emit_swap(routed, x, y, qpu);
          ++out.swaps;
          const int lx = p2l[static_cast<std::size_t>(x)];
          const int ly = p2l[static_cast<std::size_t>(y)];
          std::swap(p2l[static_cast<std::size_t>(x)], p2l[static_cast<std::size_t>(y)]);
          if (lx >= 0) {
            l2p[static_cast<std::size_t>(lx)] = y;
          }
          if (ly >= 0) {
            l2p[static_cast<std::size_t>(ly)] = x;
          }
        }
        pa = l2p[static_cast<std::size_t>(g.qubits[0])];
      }
      pg.qubits = {pa, pb};
    } else {
      pg.qubits = {l2p[static_cast<std::size_t>(g.qubits[0])]};
    }
    emit_basis(routed, pg, qpu);
    routed_src.resize(routed.size(), static_cast<int>(gi));
  }
  merge_rz(routed, routed_src, qpu.num_qubits);
  Circuit physical(qpu.num_qubits, c.num_clbits(), c.name());
  physical.set_num_aux_clbits(c.num_aux_clbits());
  for (Gate& g : routed) {
    g.duration = qpu.calibration.duration(g.kind, g.qubits);
    physical.mutable_gates().push_back(std::move(g));
  }
  out.physical = std::move(physical);
  out.final_layout = std::move(l2p);
  out.source = std::move(routed_src);
  return out;
}

std::string_view to_string(TranspileMode m) {
  return m == TranspileMode::PerQpu ? "per_qpu" : "per_arch";
}

std::optional<TranspileMode> transpile_mode_from_string(std::string_view s) {
  if (s == "per_qpu") {
    return TranspileMode::PerQpu;
  }
  if (s == "per_arch" || s == "per_architecture") {
    return TranspileMode::PerArchitecture;
  }
  return std::nullopt;
}

TranspileMode default_transpile_mode(int budget) {
  return budget < 5 ? TranspileMode::PerQpu : TranspileMode::PerArchitecture;
}

TranspileTable transpile_all(const std::vector<Circuit>& circuits, const std::vector<QpuDescriptor>& farm,
                             TranspileMode mode, int workers) {
  if (farm.empty()) {
    throw TranspileError("empty QPU farm");
  }
  // target name -> representative QPU
  std::map<std::string, const QpuDescriptor*> targets;
  for (const QpuDescriptor& q : farm) {
    const std::string name = mode == TranspileMode::PerQpu ? q.id : q.architecture_tag;
    auto [it, fresh] = targets.emplace(name, &q);
    if (!fresh && q.id < it->second->id) {
      it->second = &q;
    }
  }
  std::vector<std::pair<std::size_t, std::string>> jobs;
  for (std::size_t i = 0; i < circuits.size(); ++i) {
    bool fits = false;
    for (const auto& [name, qpu] : targets) {
      if (circuits[i].num_qubits() <= qpu->num_qubits) {
        jobs.emplace_back(i, name);
        fits = true;
      }
    }
    if (!fits) {
      throw TranspileError("no QPU fits circuit " + circuits[i].name() + " (" +
                           std::to_string(circuits[i].num_qubits()) + " qubits)");
    }
  }
  std::vector<TranspiledCircuit> results(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t j) {
    results[j] = transpile(circuits[jobs[j].first], *targets.at(jobs[j].second));
  });
  TranspileTable table;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    table.emplace(jobs[j], std::move(results[j]));
  }
  return table;
}

}  // namespace qos
