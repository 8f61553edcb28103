#include "doctest.h"

#include "qos/benchmarks.hpp"
#include "qos/estimator.hpp"
#include "qos/multiprogrammer.hpp"
#include "qos/simulator.hpp"
#include "support.hpp"

using namespace qos;

namespace {

// Single-qubit work handed down a chain; every gate waits for the previous one.
Circuit staircase(int n, const std::string& name) {
  Circuit c(n, name);
  for (int q = 0; q < n; ++q) {
    if (q > 0) {
      c.add(Gate::cx(q - 1, q));
    }
    c.add(Gate::sx(q)).add(Gate::rz(q, 0.3 + q)).add(Gate::sx(q));
  }
  c.measure_all();
  return c;
}

Circuit measure_only(const std::string& name) {
  Circuit c(1, 1, name);
  c.add(Gate::measure(0, 0));
  return c;
}

// 0-1-2 and 4-5-6 joined through 1-3-5; the 1-3 and 3-5 links are the best.
QpuDescriptor seven_qubit_h() {
  QpuTemplate t;
  t.id = "h7";
  t.architecture_tag = "h7";
  t.num_qubits = 7;
  t.coupling_map = {Edge::of(0, 1), Edge::of(1, 2), Edge::of(1, 3), Edge::of(3, 5), Edge::of(4, 5), Edge::of(5, 6)};
  QpuDescriptor qpu = make_qpu(t, ideal_calibration(t));
  for (const Edge& e : t.coupling_map) {
    const bool best = e == Edge::of(1, 3) || e == Edge::of(3, 5);
    qpu.calibration.gate_error[GateKey::of(GateKind::CX, {e.a, e.b})] = best ? 0.001 : 0.01;
  }
  return qpu;
}

std::set<int> owner_qubits(const Bundle& b, int owner) {
  std::set<int> out;
  const Circuit logical = b.merged.circuit;
  for (std::size_t i = 0; i < b.physical.physical.size(); ++i) {
    const Gate& src = logical.gates()[static_cast<std::size_t>(b.physical.source[i])];
    if (b.merged.qubit_owner[static_cast<std::size_t>(src.qubits[0])] == owner) {
      const auto& qs = b.physical.physical.gates()[i].qubits;
      out.insert(qs.begin(), qs.end());
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("multiprogrammer") {

TEST_CASE("effective utilization worked examples") {
  CHECK(effective_utilization({{10, 3}, {10, 1}}, 20) == doctest::Approx(50.0 + 50.0 / 3.0));
  CHECK(effective_utilization({{27, 5}}, 27) == doctest::Approx(100.0));
  CHECK(effective_utilization({{5, 4}, {5, 4}}, 10) == doctest::Approx(100.0));
  CHECK(effective_utilization({{3, 1}, {5, 2}}, 10) == doctest::Approx(50.0 + 15.0));
  CHECK_THROWS_AS(effective_utilization({{11, 1}}, 10), std::invalid_argument);
  CHECK_THROWS_AS(effective_utilization({}, 10), std::invalid_argument);
}

TEST_CASE("utilization stays within the QPU") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int size = 2 + static_cast<int>(rng() % 30);
    const int a = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(size - 1));
    const int b = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(size - a));
    const double u = effective_utilization({{a, static_cast<int>(rng() % 20)}, {b, static_cast<int>(rng() % 20)}}, size);
    CHECK(u > 0.0);
    CHECK(u <= 100.0 + 1e-9);
  }
}

TEST_CASE("compatibility score arithmetic") {
  CHECK(compatibility_score(100.0, 0.0, 0.0) == doctest::Approx(1.0));
  CHECK(compatibility_score(100.0, 1.0, 1.0) == doctest::Approx(0.25));
  CHECK(compatibility_score(60.0, 0.2, 0.1) == doctest::Approx(0.15 + 0.2 + 0.45));
  CHECK(0.9 >= CompatibilityWeights{}.threshold);
  const QpuDescriptor two = make_qpu(line_template("l2", 2), ideal_calibration(line_template("l2", 2)));
  CHECK(compatibility(measure_only("a"), measure_only("b"), two) == doctest::Approx(1.0));
  CHECK_THROWS_AS(compatibility(ghz(2), ghz(1), two), std::invalid_argument);
}

TEST_CASE("merge places members side by side") {
  const MergedCircuit m = merge_circuits({ghz(2), ghz(3)}, {"x", "y"}, "xy");
  CHECK(m.circuit.num_qubits() == 5);
  CHECK(m.circuit.num_clbits() == 5);
  REQUIRE(m.record.slices.size() == 2);
  CHECK(m.record.slices[0].offset == 0);
  CHECK(m.record.slices[0].width == 2);
  CHECK(m.record.slices[1].offset == 2);
  CHECK(m.record.slices[1].width == 3);
  CHECK(m.qubit_owner == std::vector<int>{0, 0, 1, 1, 1});

  const MergedCircuit solo = merge_circuits({ghz(3), Circuit(0)}, {"x", "e"}, "x");
  CHECK(solo.circuit.gates() == ghz(3).gates());
  CHECK(solo.record.slices[1].width == 0);
}

TEST_CASE("unbundling inverts merging") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Circuit a = test::random_circuit(rng, 2 + trial % 3, 4);
    const Circuit b = test::random_circuit(rng, 1 + trial % 4, 4);
    const MergedCircuit m = merge_circuits({a, b}, {"a", "b"}, "ab");
    const auto parts = unbundle(simulate_ideal(m.circuit), m.record);
    CHECK(total_variation(parts[0], simulate_ideal(a)) < 1e-12);
    CHECK(total_variation(parts[1], simulate_ideal(b)) < 1e-12);
  }
}

TEST_CASE("overlapping best layouts bundle only under re-evaluation") {
  const std::vector<QpuDescriptor> farm{seven_qubit_h()};
  const std::vector<PendingProgram> pending{prepare_program("p0", staircase(3, "p0"), farm),
                                            prepare_program("p1", staircase(3, "p1"), farm)};
  CHECK(compatibility(pending[0].circuit, pending[1].circuit, farm[0]) >= 0.75);
  const auto u0 = used_qubits(pending[0].solo.physical);
  const auto u1 = used_qubits(pending[1].solo.physical);
  CHECK(std::count(u0.begin(), u0.end(), 3) == 1);
  CHECK(u0 == u1);

  const BundleOutcome restrict = try_bundle(pending, farm, BundlePolicy::Restrict);
  CHECK(restrict.bundles.empty());
  CHECK(restrict.leftovers == std::vector<std::string>{"p0", "p1"});

  const BundleOutcome re = try_bundle(pending, farm, BundlePolicy::Reevaluate);
  REQUIRE(re.bundles.size() == 1);
  const Bundle& b = re.bundles[0];
  CHECK(b.members == std::vector<std::string>{"p0", "p1"});
  for (int m = 0; m < 2; ++m) {
    CHECK(b.bundled_fidelity[static_cast<std::size_t>(m)] >= b.solo_fidelity[static_cast<std::size_t>(m)] - 0.05);
  }
  CHECK_NOTHROW(check_executable(b.physical.physical, farm[0]));
  const auto parts = unbundle(simulate_ideal(b.physical.physical), b.merged.record);
  CHECK(total_variation(parts[0], simulate_ideal(pending[0].circuit)) < 1e-9);
  CHECK(total_variation(parts[1], simulate_ideal(pending[1].circuit)) < 1e-9);

  // a strict epsilon refuses the same pair
  CompatibilityWeights strict;
  strict.epsilon = 1e-4;
  CHECK(try_bundle(pending, farm, BundlePolicy::Reevaluate, strict).bundles.empty());
}

TEST_CASE("pairs sharing a best QPU are bundled, others run solo") {
  // q5 is a quiet 27-qubit device; the small line is perfect but only fits p1
  const QpuTemplate quiet = falcon27_template("q5");
  QpuTemplate noisy = falcon27_template("q4");
  noisy.baseline.gate_error_2q = 0.05;
  noisy.baseline.readout_error = 0.08;
  QpuTemplate quiet_base = quiet;
  quiet_base.baseline.gate_error_2q = 0.002;
  quiet_base.baseline.readout_error = 0.005;
  quiet_base.baseline.t2 = 500e-6;
  const QpuTemplate small = line_template("s6", 6);
  const std::vector<QpuDescriptor> farm{make_qpu(noisy, sample_calibration(noisy, 0, 0.2, 1)),
                                        make_qpu(quiet_base, sample_calibration(quiet_base, 0, 0.2, 1)),
                                        make_qpu(small, ideal_calibration(small))};
  const std::vector<PendingProgram> pending{prepare_program("q0", staircase(8, "q0"), farm),
                                            prepare_program("q1", staircase(4, "q1"), farm),
                                            prepare_program("q2", staircase(10, "q2"), farm)};
  CHECK(pending[0].estimations.front().qpu_id == "q5");
  CHECK(pending[1].estimations.front().qpu_id == "s6");
  CHECK(pending[2].estimations.front().qpu_id == "q5");
  const BundleOutcome out = try_bundle(pending, farm, BundlePolicy::Reevaluate);
  REQUIRE(out.bundles.size() == 1);
  CHECK(out.bundles[0].members == std::vector<std::string>{"q0", "q2"});
  CHECK(out.bundles[0].qpu_id == "q5");
  CHECK(out.bundles[0].qc >= 0.75);
  CHECK(out.bundles[0].utilization <= 100.0);
  CHECK(out.leftovers == std::vector<std::string>{"q1"});

  const BundleOutcome single = try_bundle({pending[1]}, farm, BundlePolicy::Restrict);
  CHECK(single.bundles.empty());
  CHECK(single.leftovers == std::vector<std::string>{"q1"});
}

TEST_CASE("restrict reuses disjoint solo placements") {
  // q0 has the best readout, link 2-3 the best CX
  const QpuTemplate t = line_template("l4", 4);
  QpuDescriptor qpu = make_qpu(t, ideal_calibration(t));
  qpu.calibration.readout_error = {0.001, 0.01, 0.01, 0.01};
  for (const Edge& e : t.coupling_map) {
    qpu.calibration.gate_error[GateKey::of(GateKind::CX, {e.a, e.b})] = e == Edge::of(2, 3) ? 0.001 : 0.02;
  }
  const std::vector<QpuDescriptor> farm{qpu};
  const std::vector<PendingProgram> pending{prepare_program("one", staircase(1, "one"), farm),
                                            prepare_program("two", staircase(2, "two"), farm)};
  CHECK(used_qubits(pending[0].solo.physical) == std::vector<int>{0});
  CHECK(used_qubits(pending[1].solo.physical) == std::vector<int>{2, 3});
  const BundleOutcome out = try_bundle(pending, farm, BundlePolicy::Restrict);
  REQUIRE(out.bundles.size() == 1);
  const Bundle& b = out.bundles[0];
  CHECK(owner_qubits(b, 0) == std::set<int>{0});
  CHECK(owner_qubits(b, 1) == std::set<int>{2, 3});
  CHECK_NOTHROW(check_executable(b.physical.physical, qpu));
  const auto parts = unbundle(simulate_ideal(b.physical.physical), b.merged.record);
  CHECK(total_variation(parts[0], simulate_ideal(pending[0].circuit)) < 1e-9);
  CHECK(total_variation(parts[1], simulate_ideal(pending[1].circuit)) < 1e-9);
}

TEST_CASE("bundles respect the QPU and keep restrict members disjoint") {
  const auto farm = make_falcon_farm(2, 0.4, 5);
  Rng rng(12);
  int bundled = 0;
  for (int trial = 0; trial < 6; ++trial) {
    std::vector<PendingProgram> pending;
    for (int k = 0; k < 4; ++k) {
      // small pairs leave most of a 27-qubit device idle and score low
      const int n = 6 + static_cast<int>(rng() % 7);
      pending.push_back(prepare_program("t" + std::to_string(trial) + "." + std::to_string(k),
                                        staircase(n, "s"), farm));
    }
    for (BundlePolicy p : {BundlePolicy::Restrict, BundlePolicy::Reevaluate}) {
      const BundleOutcome out = try_bundle(pending, farm, p);
      CHECK(out.bundles.size() * 2 + out.leftovers.size() == pending.size());
      for (const Bundle& b : out.bundles) {
        ++bundled;
        const auto a0 = owner_qubits(b, 0);
        const auto a1 = owner_qubits(b, 1);
        std::vector<int> both;
        std::set_intersection(a0.begin(), a0.end(), a1.begin(), a1.end(), std::back_inserter(both));
        if (p == BundlePolicy::Restrict) {
          CHECK(both.empty());
        }
        CHECK(b.merged.circuit.num_qubits() <= 27);
        CHECK(b.utilization <= 100.0 + 1e-9);
        CHECK(b.qc >= 0.75);
      }
    }
  }
  CHECK(bundled > 0);
}

TEST_CASE("naive bundling pairs by arrival") {
  const auto farm = make_falcon_farm(2, 0.3, 8);
  std::vector<PendingProgram> pending;
  for (int k = 0; k < 5; ++k) {
    pending.push_back(prepare_program("n" + std::to_string(k), ghz(3 + k), farm));
  }
  const BundleOutcome out = naive_bundle(pending, farm);
  REQUIRE(out.bundles.size() == 2);
  CHECK(out.bundles[0].members == std::vector<std::string>{"n0", "n1"});
  CHECK(out.bundles[1].members == std::vector<std::string>{"n2", "n3"});
  CHECK(out.leftovers == std::vector<std::string>{"n4"});
}

TEST_CASE("policy names round trip") {
  CHECK(bundle_policy_from_string(to_string(BundlePolicy::Restrict)) == BundlePolicy::Restrict);
  CHECK(bundle_policy_from_string("reevaluate") == BundlePolicy::Reevaluate);
  CHECK_FALSE(bundle_policy_from_string("greedy").has_value());
}

}
