#include "doctest.h"

#include "qos/analyzer.hpp"
#include "qos/benchmarks.hpp"
#include "qos/optimizer.hpp"
#include "qos/simulator.hpp"
#include "support.hpp"

#include <algorithm>

using namespace qos;

namespace {

std::vector<const PassReport*> reports_named(const Qernel& q, const std::string& name) {
  std::vector<const PassReport*> out;
  for (const PassReport& r : q.reports) {
    if (r.name == name) {
      out.push_back(&r);
    }
  }
  return out;
}

Qernel frontend(const Circuit& c) { return run_frontend(c, default_passes(), c.name()); }

std::vector<int> widths(const Qernel& q) {
  std::vector<int> w;
  for (const Qernel& c : q.children) {
    w.push_back(c.circuit.num_qubits());
  }
  std::sort(w.rbegin(), w.rend());
  return w;
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("hub QAOA follows freeze, cut, reuse with the expected sizes") {
  const Qernel q = optimize(frontend(hub_qaoa()), {.size_target = 2, .budget = 3});

  const auto hot = reports_named(q, "hotspot_selection");
  REQUIRE(hot.size() == 1);
  CHECK(hot[0]->outputs.at("qubit") == 3);
  CHECK(hot[0]->outputs.at("degree") == 6);

  const auto freeze = reports_named(q, "qubit_freezing");
  REQUIRE(freeze.size() == 1);
  CHECK(freeze[0]->outputs.at("qubit") == 3);
  CHECK(freeze[0]->outputs.at("after").at("active_qubits") == 6);
  CHECK(freeze[0]->outputs.at("after").at("interactions") == 6);

  const auto cut = reports_named(q, "gate_cutting");
  REQUIRE(cut.size() == 1);
  CHECK(cut[0]->outputs.at("cuts") == 2);
  const auto& frags = cut[0]->outputs.at("fragments");
  REQUIRE(frags.size() == 2);
  for (const auto& f : frags) {
    CHECK(f.at("qubits") == 3);
    CHECK(f.at("interactions") == 4);
  }
  CHECK(reports_named(q, "wire_cutting").empty());

  const auto reuse = reports_named(q, "qubit_reuse");
  REQUIRE(reuse.size() == 1);
  for (const auto& f : reuse[0]->outputs.at("fragments")) {
    CHECK(f.at("qubits") == 2);
    CHECK(f.at("interactions") == 4);
  }
  CHECK(widths(q) == std::vector<int>{2, 2});
  CHECK(reports_named(q, "warning").empty());
  CHECK(reports_named(q, "budget")[0]->outputs.at("remaining") == 0);

  // every working qubit except the frozen one is hosted exactly once
  std::vector<int> hosted;
  for (const Qernel& c : q.children) {
    for (const auto& wire : c.qubit_map) {
      hosted.insert(hosted.end(), wire.begin(), wire.end());
    }
  }
  std::sort(hosted.begin(), hosted.end());
  CHECK(hosted == std::vector<int>{0, 1, 2, 4, 5, 6});
}

TEST_CASE("single gate cut halves GHZ(8)") {
  const Qernel q = optimize(frontend(ghz(8)), {.size_target = 4, .budget = 1});
  CHECK(widths(q) == std::vector<int>{4, 4});
  REQUIRE(q.virtual_gate_records.size() == 1);
  CHECK(q.virtual_gate_records[0].kind == CutKind::Gate);
  CHECK(q.virtual_gate_records[0].original.qubits == std::vector<int>{3, 4});
}

TEST_CASE("GHZ(16) needs three cuts for size 4") {
  const Qernel q = optimize(frontend(ghz(16)), {.size_target = 4, .budget = 3});
  CHECK(widths(q) == std::vector<int>{4, 4, 4, 4});
  CHECK(q.virtual_gate_records.size() == 3);
}

TEST_CASE("nothing to do when the circuit already fits") {
  const Circuit c = ghz(4);
  const Qernel q = optimize(frontend(c), {.size_target = 4, .budget = 3});
  CHECK(q.virtual_gate_records.empty());
  REQUIRE(q.children.size() == 1);
  CHECK(q.children[0].circuit.gates() == c.gates());
}

TEST_CASE("unreachable target reports a warning and keeps the best size") {
  const Qernel q = optimize(frontend(ghz(8)), {.size_target = 2, .budget = 1},
                            {.allow_reuse = false});
  CHECK(max_fragment_width(q) == 4);
  CHECK(reports_named(q, "warning").size() == 1);
}

TEST_CASE("invalid goals are rejected") {
  CHECK_THROWS_AS(optimize(frontend(ghz(4)), {.size_target = 0, .budget = 1}), std::invalid_argument);
  CHECK_THROWS_AS(optimize(frontend(ghz(4)), {.size_target = 2, .budget = -1}), std::invalid_argument);
}

TEST_CASE("cut cost grows with the kind base") {
  CHECK(cut_cost(CutKind::Gate, 0) == 1);
  CHECK(cut_cost(CutKind::Gate, 3) == 216);
  CHECK(cut_cost(CutKind::Wire, 2) == 64);
  CHECK(cut_cost(CutKind::Freeze, 4) == 16);
}

TEST_CASE("gate cut rewrites into a single marker with single-qubit dressing") {
  Circuit c(2);
  c.add(Gate::h(0)).add(Gate::cx(0, 1)).measure_all();
  std::vector<VirtualGateRecord> recs;
  const Circuit cut = apply_gate_cuts(c, {1}, recs);
  int markers = 0;
  for (const Gate& g : cut.gates()) {
    markers += g.kind == GateKind::Virtual ? 1 : 0;
    CHECK((g.kind == GateKind::Virtual || g.qubits.size() == 1));
  }
  CHECK(markers == 1);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].location == 1);
  CHECK(fragment_sizes(cut) == std::vector<int>{1, 1});
  CHECK_THROWS_AS(apply_gate_cuts(c, {0}, recs), std::invalid_argument);
}

TEST_CASE("wire cut adds a qubit and relabels the downstream segment") {
  Circuit c(3);
  c.add(Gate::cx(0, 1)).add(Gate::cx(1, 2)).measure_all();
  std::vector<VirtualGateRecord> recs;
  const Circuit cut = apply_wire_cuts(c, {{1, 1}}, recs);
  CHECK(cut.num_qubits() == 4);
  CHECK(cut.gates()[0] == Gate::cx(0, 1));
  CHECK(cut.gates()[1].kind == GateKind::Virtual);
  CHECK(cut.gates()[1].qubits == std::vector<int>{1, 3});
  CHECK(cut.gates()[2] == Gate::cx(3, 2));
  CHECK(fragment_sizes(cut) == std::vector<int>{2, 2});
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].new_qubit == 3);

  const auto frags = split_fragments(cut, "w");
  REQUIRE(frags.size() == 2);
  CHECK(frags[0].qubit_map == std::vector<std::vector<int>>{{0}, {1}});
  CHECK(frags[1].qubit_map == std::vector<std::vector<int>>{{2}, {3}});
}

TEST_CASE("wire plan matches segment sizes after application") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Circuit c = test::random_circuit(rng, 6, 5);
    const CutPlan plan = plan_wire_cuts(c, 2, 3);
    std::vector<VirtualGateRecord> recs;
    const Circuit cut = apply_wire_cuts(c, plan.wires, recs);
    CHECK(fragment_sizes(cut) == plan.expected_fragment_sizes);
  }
}

TEST_CASE("gate plan matches fragment sizes after application") {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const Circuit c = test::random_circuit(rng, 7, 4);
    const CutPlan plan = plan_gate_cuts(c, 2, 3);
    std::vector<VirtualGateRecord> recs;
    const Circuit cut = apply_gate_cuts(c, plan.locations, recs);
    CHECK(fragment_sizes(cut) == plan.expected_fragment_sizes);
    const auto before = fragment_sizes(c);
    CHECK(plan.max_fragment_size() <= before.front());
  }
}

TEST_CASE("local search handles large candidate sets") {
  const Circuit c = qaoa_regular(20, 3, 9);
  const CutPlan plan = plan_gate_cuts(c, 12, 10, {.exhaustive_limit = 100});
  REQUIRE(plan.num_cuts() > 0);
  CHECK(plan.num_cuts() <= 12);
  CHECK(plan.max_fragment_size() < 20);
  std::vector<VirtualGateRecord> recs;
  CHECK(fragment_sizes(apply_gate_cuts(c, plan.locations, recs)) == plan.expected_fragment_sizes);
}

TEST_CASE("freezing needs diagonal-only qubits") {
  CHECK(is_freezable(hub_qaoa(), 3));
  CHECK_FALSE(is_freezable(six_vertex_qaoa(), 0));  // mixer
  CHECK_FALSE(is_freezable(ghz(3), 1));
  CHECK_THROWS_AS(qubit_freezing_pass(frontend(ghz(4)), 1), std::invalid_argument);
  CHECK_THROWS_AS(qubit_freezing_pass(frontend(six_vertex_qaoa()), 1), std::invalid_argument);
}

TEST_CASE("freezing the hub removes its interactions") {
  const Qernel q = qubit_freezing_pass(frontend(hub_qaoa()), 1);
  REQUIRE(q.virtual_gate_records.size() == 1);
  const auto& rec = q.virtual_gate_records[0];
  CHECK(rec.kind == CutKind::Freeze);
  CHECK(rec.location == 3);
  CHECK(rec.frozen_clbit == 3);
  CHECK(rec.leading_h);
  const FragmentStats st = fragment_stats(q.circuit);
  CHECK(st.qubits == 6);
  CHECK(st.interactions == 6);
  int halves = 0;
  for (const Gate& g : q.circuit.gates()) {
    halves += g.kind == GateKind::Virtual && g.role == VirtualRole::Freeze ? 1 : 0;
  }
  CHECK(halves == 6);
}

TEST_CASE("reuse keeps the output distribution") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 3 + trial % 4;
    const Circuit c = test::random_circuit(rng, n, 3);
    std::vector<std::vector<int>> hosts;
    const Circuit r = reuse_qubits(c, 1, &hosts);
    CHECK(r.num_qubits() <= n);
    CHECK(static_cast<int>(hosts.size()) == r.num_qubits());
    const Distribution a = simulate_ideal(c);
    const Distribution b = simulate_ideal(r);
    CHECK(hellinger_fidelity(a, b) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("reuse on a chain reaches two wires") {
  Circuit c(4);
  c.add(Gate::h(0)).add(Gate::cx(0, 1)).add(Gate::cx(1, 2)).add(Gate::cx(2, 3)).measure_all();
  std::vector<std::vector<int>> hosts;
  const Circuit r = reuse_qubits(c, 2, &hosts);
  CHECK(r.num_qubits() == 2);
  CHECK(hellinger_fidelity(simulate_ideal(c), simulate_ideal(r)) == doctest::Approx(1.0));
  std::vector<int> all;
  for (const auto& h : hosts) {
    all.insert(all.end(), h.begin(), h.end());
  }
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("fragment children preserve global classical bits") {
  const Qernel q = optimize(frontend(ghz(6)), {.size_target = 3, .budget = 1});
  for (const Qernel& c : q.children) {
    CHECK(c.circuit.num_clbits() == 6);
    CHECK_NOTHROW(c.circuit.validate());
  }
}

}
