#pragma once

#include "qos/circuit.hpp"
#include "qos/distribution.hpp"
#include "qos/qpu.hpp"

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qos {

inline constexpr int kDefaultShots = 8192;

struct SimulatorConfig {
  int qubit_cap = 14;  // per independently simulated qubit block
  int workers = 1;
  std::size_t pattern_cache_limit = 4096;
};

class SimulationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class StateVector {
public:
  explicit StateVector(int num_qubits);

  int num_qubits() const { return num_qubits_; }
  const std::vector<std::complex<double>>& amplitudes() const { return amps_; }

  // Unitary gate kinds only (X, SX, H, RZ, CX, CZ, RZZ).
  void apply(const Gate& g);
  // 'X', 'Y' or 'Z' on qubit q.
  void apply_pauli(int q, char pauli);
  double probability_one(int q) const;
  // Projects qubit q onto `outcome` given that outcome's probability.
  void collapse(int q, int outcome, double probability);
  double norm() const;
  std::vector<double> probabilities() const;

private:
  int num_qubits_;
  std::vector<std::complex<double>> amps_;
};

// Per-gate error probabilities derived from calibration data for a physical
// circuit: depolarizing after each gate, dephasing for each idle gap with
// p = e_d(t) / 2 where e_d(t) = 1 - exp(-t / T2), readout flips per bit.
struct NoiseSpec {
  std::vector<double> depolarizing;                // per gate
  std::vector<std::vector<double>> dephasing;      // per gate, per operand qubit
  std::vector<double> readout_flip;                // per classical bit
  bool missing_calibration = false;
};

NoiseSpec derive_noise(const Circuit& physical, const QpuDescriptor& qpu);

// Exact Born distribution over the circuit's classical bits. A circuit
// without measurements is measured on every qubit.
Distribution simulate_ideal(const Circuit& c, const SimulatorConfig& config = {});
// Shot-sampled variant of simulate_ideal.
Distribution simulate_ideal(const Circuit& c, int shots, std::uint64_t seed,
                            const SimulatorConfig& config = {});

// Monte-Carlo trajectories of a circuit already transpiled to `qpu`.
Distribution simulate_noisy(const Circuit& physical, const QpuDescriptor& qpu, int shots,
                            std::uint64_t seed, const SimulatorConfig& config = {});
// Same, with an explicit noise specification (used for what-if studies).
Distribution simulate_noisy(const Circuit& physical, const NoiseSpec& noise, int shots,
                            std::uint64_t seed, const SimulatorConfig& config = {});

// Throws SimulationError when the circuit is not executable on the QPU
// (gate outside the basis, 2-qubit gate off the coupling map).
void check_executable(const Circuit& physical, const QpuDescriptor& qpu);

}  // namespace qos
