#include "doctest.h"

#include "oracle.hpp"
#include "qos/simulator.hpp"
#include "support.hpp"

#include <cmath>

using namespace qos;

namespace {

QpuDescriptor line_qpu(int n, double e_r, double e_2q, double e_1q = 0.0) {
  QpuTemplate t = line_template("line", n);
  CalibrationData cal = ideal_calibration(t);
  for (double& e : cal.readout_error) {
    e = e_r;
  }
  for (auto& [k, v] : cal.gate_error) {
    v = is_two_qubit(k.kind) ? e_2q : e_1q;
  }
  return make_qpu(t, cal);
}

Circuit ghz(int n, bool physical) {
  Circuit c(n, "ghz");
  if (physical) {
    c.add(Gate::rz(0, M_PI / 2)).add(Gate::sx(0)).add(Gate::rz(0, M_PI / 2));
  } else {
    c.add(Gate::h(0));
  }
  for (int q = 0; q + 1 < n; ++q) {
    c.add(Gate::cx(q, q + 1));
  }
  return c.measure_all();
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("ghz exact") {
  const Distribution d = simulate_ideal(ghz(3, false));
  CHECK(d.support_size() == 2);
  CHECK(d.probability(0b000) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.probability(0b111) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("empty circuit is measured on all qubits") {
  const Distribution d = simulate_ideal(Circuit(2));
  CHECK(d.num_bits() == 2);
  CHECK(d.probability(0) == 1.0);
}

TEST_CASE("agrees with dense unitary oracle") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Rng rng(seed);
    const Circuit c = test::random_circuit(rng, 1 + static_cast<int>(seed % 5), 6);
    CHECK(total_variation(simulate_ideal(c), test::dense_distribution(c)) < 1e-12);
  }
}

TEST_CASE("statevector keeps unit norm") {
  Rng rng(3);
  const Circuit c = test::random_circuit(rng, 5, 10, false);
  StateVector sv(5);
  for (const Gate& g : c.gates()) {
    sv.apply(g);
    CHECK(std::abs(sv.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("mid-circuit measurement and reset branch exactly") {
  // H; measure -> c0; reset; X; measure -> c1: c0 uniform, c1 always 1
  Circuit c(1, 2, "mid");
  c.add(Gate::h(0)).add(Gate::measure(0, 0)).add(Gate::reset(0)).add(Gate::x(0)).add(Gate::measure(0, 1));
  const Distribution d = simulate_ideal(c);
  CHECK(d.probability(0b10) == doctest::Approx(0.5));
  CHECK(d.probability(0b11) == doctest::Approx(0.5));
  // aux measurement of a Bell half then continuing
  Circuit e(2, 2, "aux");
  e.set_num_aux_clbits(1);
  e.add(Gate::h(0)).add(Gate::cx(0, 1)).add(Gate::measure(0, 2)).add(Gate::h(0));
  e.add(Gate::measure(0, 0)).add(Gate::measure(1, 1));
  const Distribution f = simulate_ideal(e);
  // qubit 1 equals the aux bit, qubit 0 uniform afterwards
  for (Bitstring k = 0; k < 8; ++k) {
    const bool consistent = ((k >> 1) & 1U) == ((k >> 2) & 1U);
    CHECK(f.probability(k) == doctest::Approx(consistent ? 0.25 : 0.0));
  }
}

TEST_CASE("virtual gates and cap are rejected") {
  Circuit c(2);
  c.add(Gate::virtual_gate({0, 1}, 0, VirtualRole::GateCut, 0.3));
  CHECK_THROWS_AS(simulate_ideal(c), SimulationError);
  Circuit wide(16);
  for (int q = 0; q + 1 < 16; ++q) {
    wide.add(Gate::cx(q, q + 1));
  }
  CHECK_THROWS_AS(simulate_ideal(wide), SimulationError);
  SimulatorConfig cfg;
  cfg.qubit_cap = 16;
  CHECK_NOTHROW(simulate_ideal(wide, cfg));
  // disconnected qubits form independent blocks below the cap
  Circuit blocks(20);
  for (int q = 0; q < 20; ++q) {
    blocks.add(Gate::h(q));
  }
  CHECK(simulate_ideal(blocks).support_size() == (std::size_t{1} << 20));
}

TEST_CASE("shot sampling is seeded") {
  const Circuit c = ghz(3, false);
  const Distribution a = simulate_ideal(c, 1000, 11);
  const Distribution b = simulate_ideal(c, 1000, 11);
  CHECK(a == b);
  CHECK(hellinger_fidelity(a, simulate_ideal(c)) > 0.99);
}

TEST_CASE("readout flips") {
  const QpuDescriptor qpu = line_qpu(1, 0.1, 0.0);
  Circuit c(1);
  c.add(Gate::x(0)).add(Gate::measure(0, 0));
  const Distribution d = simulate_noisy(c, qpu, 200000, 5);
  CHECK(d.probability(1) == doctest::Approx(0.9).epsilon(0.005));
}

TEST_CASE("zero noise matches ideal") {
  const QpuDescriptor qpu = line_qpu(4, 0.0, 0.0);
  const Circuit c = ghz(4, true);
  const Distribution noisy = simulate_noisy(c, qpu, kDefaultShots, 1);
  CHECK(hellinger_fidelity(noisy, simulate_ideal(c)) >= 0.99);
}

TEST_CASE("fidelity decreases with gate error") {
  const Circuit c = ghz(3, true);
  const Distribution ideal = simulate_ideal(c);
  double prev = 1.1;
  for (double e : {0.0, 0.05, 0.15, 0.3}) {
    const double f = hellinger_fidelity(simulate_noisy(c, line_qpu(3, 0.0, e), 20000, 3), ideal);
    if (e > 0) {
      CHECK(f < 1.0);
    }
    CHECK(f < prev + 0.005);
    prev = f;
  }
}

TEST_CASE("noisy results independent of worker count") {
  const QpuDescriptor qpu = line_qpu(4, 0.03, 0.05, 0.01);
  const Circuit c = ghz(4, true);
  SimulatorConfig one;
  SimulatorConfig many;
  many.workers = 8;
  CHECK(simulate_noisy(c, qpu, 5000, 9, one) == simulate_noisy(c, qpu, 5000, 9, many));
  CHECK(simulate_noisy(c, qpu, 5000, 9, one) != simulate_noisy(c, qpu, 5000, 10, one));
}

TEST_CASE("untranspiled circuits are rejected") {
  const QpuDescriptor qpu = line_qpu(3, 0.0, 0.0);
  Circuit h(3);
  h.add(Gate::h(0));
  CHECK_THROWS_AS(simulate_noisy(h, qpu, 10, 1), SimulationError);
  Circuit far(3);
  far.add(Gate::cx(0, 2));
  CHECK_THROWS_AS(simulate_noisy(far, qpu, 10, 1), SimulationError);
}

TEST_CASE("dephasing from idle time") {
  // qubit 0 sits in |+> while qubit 1 runs a long sequence; a finite T2
  // lowers the X-basis fidelity.
  QpuTemplate t = line_template("line", 2);
  CalibrationData cal = ideal_calibration(t);
  cal.t2 = {1e-7, 1e-7};
  const QpuDescriptor qpu = make_qpu(t, cal);
  Circuit c(2);
  c.add(Gate::rz(0, M_PI / 2)).add(Gate::sx(0)).add(Gate::rz(0, M_PI / 2));
  for (int i = 0; i < 8; ++i) {
    c.add(Gate::sx(1));
  }
  // identity on qubit 0 that waits for qubit 1
  c.add(Gate::cx(1, 0));
  c.add(Gate::rz(0, M_PI / 2)).add(Gate::sx(0)).add(Gate::rz(0, M_PI / 2));
  c.measure_all();
  CHECK(simulate_ideal(c).probability(0) == doctest::Approx(1.0));
  const NoiseSpec noise = derive_noise(c, qpu);
  double max_deph = 0;
  for (const auto& d : noise.dephasing) {
    for (double p : d) {
      max_deph = std::max(max_deph, p);
    }
  }
  CHECK(max_deph > 0.1);
  const Distribution d = simulate_noisy(c, qpu, 20000, 2);
  CHECK(d.probability(0b01) + d.probability(0b11) > 0.1);
}

}
