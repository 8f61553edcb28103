#pragma once

#include "qos/circuit.hpp"
#include "qos/qernel.hpp"
#include "qos/qpu.hpp"
#include "qos/transpiler.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qos {

// Success-probability product over readout, idle dephasing, gate and
// crosstalk errors of a circuit transpiled to `qpu`. estimated_exec_time is
// the per-shot makespan.
Estimation estimate_numerical(const TranspiledCircuit& t, const QpuDescriptor& qpu);
// Same for a bare physical circuit; gate durations are taken from `qpu`.
Estimation estimate_numerical(const Circuit& physical, const QpuDescriptor& qpu);
// Per-owner scores of one transpiled circuit whose logical qubits belong to
// independent programs (qubit_owner[q] in 0..k-1). Every physical gate is
// charged to the program of the logical gate it was emitted for.
std::vector<double> estimate_members(const Circuit& logical, const TranspiledCircuit& t, const QpuDescriptor& qpu,
                                     const std::vector<int>& qubit_owner);

// Static circuit features followed by calibration aggregates.
std::vector<double> regression_features(const StaticProperties& p, const QpuDescriptor& qpu);
// Mean readout error, mean 2-qubit gate error, mean T2 in microseconds.
std::vector<double> calibration_summary(const QpuDescriptor& qpu);

struct RegressionSample {
  std::vector<double> features;
  double fidelity = 0.0;
};

class FidelityRegression {
public:
  // Ordinary least squares on standardized features; throws on fewer
  // samples than features + 1 or ragged input.
  void train(const std::vector<RegressionSample>& samples);
  bool trained() const { return trained_; }
  // Clipped to [0, 1]; throws std::logic_error when untrained.
  double predict(const std::vector<double>& features) const;
  // Prediction at the all-zero feature vector, unclipped.
  double intercept() const;
  // Coefficient of determination on `samples`.
  double r_squared(const std::vector<RegressionSample>& samples) const;

private:
  double raw(const std::vector<double>& features) const;

  bool trained_ = false;
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
  Eigen::VectorXd weights_;
  double bias_ = 0.0;
};

enum class FidelityLabel : std::uint8_t { Simulated, Numerical };

// Random circuits of 2..max_qubits qubits transpiled onto QPUs drawn from
// `farm`; labels are noisy-simulation Hellinger fidelities or numerical
// estimates.
std::vector<RegressionSample> synthetic_samples(const std::vector<QpuDescriptor>& farm, int count,
                                                int max_qubits, FidelityLabel label, std::uint64_t seed,
                                                int shots = 2048);

Estimation estimate_regression(const FidelityRegression& model, const Circuit& logical,
                               const QpuDescriptor& qpu);

// Scores one Qernel's executables (its instantiated subcircuits) on one QPU:
// mean numerical fidelity, summed per-shot makespan, layout of the first.
Estimation estimate_isqs(const std::vector<Circuit>& isqs, const QpuDescriptor& qpu);

struct RankOptions {
  TranspileMode mode = TranspileMode::PerQpu;
  int workers = 1;
  // QPU id -> queued work in seconds; missing ids count as empty queues.
  std::map<std::string, double> queue_seconds;
};

// Best fidelity first; exact ties go to the shorter queue, then the lower id.
void sort_estimations(std::vector<Estimation>& estimations, const std::map<std::string, double>& queue_seconds = {});

// Estimations for every QPU that fits, best fidelity first; exact ties go to
// the shorter queue, then the lower QPU id. Throws on an empty farm or when
// no QPU fits.
std::vector<Estimation> rank_assignments(const std::vector<Circuit>& isqs,
                                         const std::vector<QpuDescriptor>& farm,
                                         const RankOptions& options = {});
std::vector<Estimation> rank_assignments(const Circuit& logical, const std::vector<QpuDescriptor>& farm,
                                         const RankOptions& options = {});

}  // namespace qos
