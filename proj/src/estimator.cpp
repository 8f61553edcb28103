#include "qos/estimator.hpp"

#include "qos/benchmarks.hpp"
#include "qos/parallel.hpp"
#include "qos/random.hpp"
#include "qos/schedule.hpp"
#include "qos/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qos {

namespace {

Circuit with_durations(const Circuit& physical, const QpuDescriptor& qpu) {
  Circuit out = physical;
  for (Gate& g : out.mutable_gates()) {
    g.duration = qpu.calibration.duration(g.kind, g.qubits);
  }
  return out;
}

// Mean fidelity, summed makespan, layout of the first part.
Estimation combine(const std::vector<Estimation>& parts, const QpuDescriptor& qpu) {
  Estimation total;
  double fid = 0.0;
  for (const Estimation& e : parts) {
    fid += e.fidelity_score;
    total.estimated_exec_time += e.estimated_exec_time;
    total.missing_calibration = total.missing_calibration || e.missing_calibration;
  }
  total.layout = parts.front().layout;
  total.qpu_id = qpu.id;
  total.fidelity_score = fid / static_cast<double>(parts.size());
  total.calibration_timestamp = qpu.calibration.timestamp;
  return total;
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) {
    return 0.0;
  }
  double s = 0.0;
  for (double x : xs) {
    s += x;
  }
  return s / static_cast<double>(xs.size());
}

}  // namespace

namespace {

struct OwnedScore {
  std::vector<double> score;
  double makespan = 0.0;
  bool missing = false;
};

// Success-probability product split by gate owner. Idle decay is charged to
// the owner of the gate that ends the gap; a crosstalk pair charges both.
OwnedScore owned_score(const Circuit& physical, const QpuDescriptor& qpu, const std::vector<int>& owner,
                       int owners) {
  if (physical.num_qubits() > qpu.num_qubits) {
    throw std::invalid_argument("circuit has more wires than QPU " + qpu.id);
  }
  const GateSchedule sched = schedule_circuit(physical, qpu);
  const CalibrationData& cal = qpu.calibration;
  const auto& gates = physical.gates();
  OwnedScore out;
  out.score.assign(static_cast<std::size_t>(owners), 1.0);
  out.makespan = sched.makespan;
  out.missing = sched.missing_calibration;
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate& g = gates[i];
    double& s = out.score[static_cast<std::size_t>(owner[i])];
    bool m = false;
    if (g.kind == GateKind::Measure) {
      s *= 1.0 - cal.readout(g.qubits[0], &m);
    } else {
      s *= 1.0 - cal.error(g.kind, g.qubits, &m);
    }
    out.missing = out.missing || m;
    for (std::size_t k = 0; k < g.qubits.size(); ++k) {
      const double gap = sched.idle_gap[i][k];
      bool mt = false;
      const double t2 = cal.t2_of(g.qubits[k], &mt);
      out.missing = out.missing || mt;
      if (gap > 0.0 && std::isfinite(t2)) {
        s *= std::exp(-gap / t2);
      }
    }
  }
  for (const auto& [i, j] : sched.crosstalk_pairs) {
    const double f = 1.0 - cal.crosstalk(Edge::of(gates[i].qubits[0], gates[i].qubits[1]),
                                         Edge::of(gates[j].qubits[0], gates[j].qubits[1]));
    out.score[static_cast<std::size_t>(owner[i])] *= f;
    if (owner[j] != owner[i]) {
      out.score[static_cast<std::size_t>(owner[j])] *= f;
    }
  }
  for (double& x : out.score) {
    x = std::clamp(x, 0.0, 1.0);
  }
  return out;
}

}  // namespace

Estimation estimate_numerical(const Circuit& input, const QpuDescriptor& qpu) {
  const Circuit physical = with_default_measurements(input);
  const OwnedScore s = owned_score(physical, qpu, std::vector<int>(physical.size(), 0), 1);
  Estimation e;
  e.qpu_id = qpu.id;
  e.fidelity_score = s.score[0];
  e.estimated_exec_time = s.makespan;
  e.calibration_timestamp = qpu.calibration.timestamp;
  e.missing_calibration = s.missing;
  return e;
}

std::vector<double> estimate_members(const Circuit& logical, const TranspiledCircuit& t, const QpuDescriptor& qpu,
                                     const std::vector<int>& qubit_owner) {
  const Circuit c = with_default_measurements(logical);
  if (t.source.size() != t.physical.size() || static_cast<int>(qubit_owner.size()) != c.num_qubits()) {
    throw std::invalid_argument("transpilation does not match the logical circuit");
  }
  int owners = 0;
  for (int o : qubit_owner) {
    owners = std::max(owners, o + 1);
  }
  std::vector<int> owner;
  owner.reserve(t.source.size());
  for (int src : t.source) {
    owner.push_back(qubit_owner[static_cast<std::size_t>(c.gates()[static_cast<std::size_t>(src)].qubits[0])]);
  }
  const Circuit physical = t.target == qpu.id ? t.physical : with_durations(t.physical, qpu);
  return owned_score(physical, qpu, owner, owners).score;
}

Estimation estimate_numerical(const TranspiledCircuit& t, const QpuDescriptor& qpu) {
  Estimation e = estimate_numerical(t.target == qpu.id ? t.physical : with_durations(t.physical, qpu), qpu);
  e.layout = t.initial_layout;
  return e;
}

std::vector<double> calibration_summary(const QpuDescriptor& qpu) {
  const CalibrationData& cal = qpu.calibration;
  std::vector<double> readout;
  std::vector<double> t2;
  for (int q = 0; q < qpu.num_qubits; ++q) {
    readout.push_back(cal.readout(q));
    const double t = cal.t2_of(q);
    t2.push_back(std::isfinite(t) ? t * 1e6 : 1e6);
  }
  std::vector<double> gate;
  const GateKind k2 = qpu.two_qubit_basis();
  for (const Edge& e : qpu.coupling_map) {
    gate.push_back(cal.error(k2, {e.a, e.b}));
  }
  return {mean(readout), mean(gate), mean(t2)};
}

std::vector<double> regression_features(const StaticProperties& p, const QpuDescriptor& qpu) {
  std::vector<double> f{static_cast<double>(p.num_qubits), static_cast<double>(p.depth),
                        static_cast<double>(p.num_gates), static_cast<double>(p.num_nonlocal),
                        static_cast<double>(p.num_measurements)};
  for (double x : p.features()) {
    f.push_back(x);
  }
  for (double x : calibration_summary(qpu)) {
    f.push_back(x);
  }
  return f;
}

void FidelityRegression::train(const std::vector<RegressionSample>& samples) {
  if (samples.empty()) {
    throw std::invalid_argument("regression needs training samples");
  }
  const auto dims = static_cast<Eigen::Index>(samples.front().features.size());
  const auto n = static_cast<Eigen::Index>(samples.size());
  if (n < dims + 1) {
    throw std::invalid_argument("regression needs at least features + 1 samples");
  }
  Eigen::MatrixXd x(n, dims);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(s.features.size()) != dims) {
      throw std::invalid_argument("ragged regression features");
    }
    for (Eigen::Index j = 0; j < dims; ++j) {
      x(i, j) = s.features[static_cast<std::size_t>(j)];
    }
    y(i) = s.fidelity;
  }
  mean_ = x.colwise().mean().transpose();
  scale_ = Eigen::VectorXd::Ones(dims);
  for (Eigen::Index j = 0; j < dims; ++j) {
    const double sd = std::sqrt((x.col(j).array() - mean_(j)).square().mean());
    // constant columns carry no information and get zero weight
    scale_(j) = sd > 1e-12 ? 1.0 / sd : 0.0;
  }
  const Eigen::MatrixXd z = (x.rowwise() - mean_.transpose()) * scale_.asDiagonal();
  bias_ = y.mean();
  const Eigen::VectorXd yc = y.array() - bias_;
  weights_ = z.completeOrthogonalDecomposition().solve(yc);
  trained_ = true;
}

double FidelityRegression::raw(const std::vector<double>& features) const {
  if (!trained_) {
    throw std::logic_error("regression model is not trained");
  }
  if (static_cast<Eigen::Index>(features.size()) != mean_.size()) {
    throw std::invalid_argument("feature vector has the wrong length");
  }
  const Eigen::Map<const Eigen::VectorXd> f(features.data(), mean_.size());
  return bias_ + weights_.dot(((f - mean_).array() * scale_.array()).matrix());
}

double FidelityRegression::predict(const std::vector<double>& features) const {
  return std::clamp(raw(features), 0.0, 1.0);
}

double FidelityRegression::intercept() const {
  return raw(std::vector<double>(static_cast<std::size_t>(mean_.size()), 0.0));
}

double FidelityRegression::r_squared(const std::vector<RegressionSample>& samples) const {
  double m = 0.0;
  for (const auto& s : samples) {
    m += s.fidelity;
  }
  m /= static_cast<double>(samples.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (const auto& s : samples) {
    const double r = s.fidelity - predict(s.features);
    ss_res += r * r;
    ss_tot += (s.fidelity - m) * (s.fidelity - m);
  }
  return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
}

std::vector<RegressionSample> synthetic_samples(const std::vector<QpuDescriptor>& farm, int count,
                                                int max_qubits, FidelityLabel label, std::uint64_t seed,
                                                int shots) {
  if (farm.empty() || count < 0 || max_qubits < 2) {
    throw std::invalid_argument("invalid synthetic sample request");
  }
  std::vector<RegressionSample> out;
  out.reserve(static_cast<std::size_t>(count));
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const int n = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_qubits - 1));
    const int depth = 1 + static_cast<int>(rng() % 6);
    const Circuit c = random_circuit(n, depth, rng());
    const QpuDescriptor& qpu = farm[rng() % farm.size()];
    const TranspiledCircuit t = transpile(c, qpu);
    RegressionSample s;
    s.features = regression_features(compute_static_properties(with_default_measurements(c)), qpu);
    if (label == FidelityLabel::Numerical) {
      s.fidelity = estimate_numerical(t, qpu).fidelity_score;
    } else {
      const std::uint64_t sim_seed = rng();
      s.fidelity = hellinger_fidelity(simulate_noisy(t.physical, qpu, shots, sim_seed), simulate_ideal(c));
    }
    out.push_back(std::move(s));
  }
  return out;
}

Estimation estimate_regression(const FidelityRegression& model, const Circuit& logical,
                               const QpuDescriptor& qpu) {
  Estimation e;
  e.qpu_id = qpu.id;
  e.fidelity_score =
      model.predict(regression_features(compute_static_properties(with_default_measurements(logical)), qpu));
  e.calibration_timestamp = qpu.calibration.timestamp;
  return e;
}

Estimation estimate_isqs(const std::vector<Circuit>& isqs, const QpuDescriptor& qpu) {
  if (isqs.empty()) {
    throw std::invalid_argument("no subcircuits to estimate");
  }
  std::vector<Estimation> parts;
  for (const Circuit& c : isqs) {
    parts.push_back(estimate_numerical(transpile(c, qpu), qpu));
  }
  return combine(parts, qpu);
}

void sort_estimations(std::vector<Estimation>& estimations, const std::map<std::string, double>& queue_seconds) {
  auto queue = [&](const std::string& id) {
    const auto it = queue_seconds.find(id);
    return it == queue_seconds.end() ? 0.0 : it->second;
  };
  std::stable_sort(estimations.begin(), estimations.end(), [&](const Estimation& a, const Estimation& b) {
    if (a.fidelity_score != b.fidelity_score) {
      return a.fidelity_score > b.fidelity_score;
    }
    if (queue(a.qpu_id) != queue(b.qpu_id)) {
      return queue(a.qpu_id) < queue(b.qpu_id);
    }
    return a.qpu_id < b.qpu_id;
  });
}

std::vector<Estimation> rank_assignments(const std::vector<Circuit>& isqs,
                                         const std::vector<QpuDescriptor>& farm, const RankOptions& options) {
  if (farm.empty()) {
    throw std::invalid_argument("empty QPU farm");
  }
  if (isqs.empty()) {
    throw std::invalid_argument("no subcircuits to rank");
  }
  int width = 0;
  for (const Circuit& c : isqs) {
    width = std::max(width, c.num_qubits());
  }
  std::vector<const QpuDescriptor*> fitting;
  for (const QpuDescriptor& q : farm) {
    if (q.num_qubits >= width) {
      fitting.push_back(&q);
    }
  }
  if (fitting.empty()) {
    throw std::invalid_argument("no QPU fits a " + std::to_string(width) + "-qubit circuit");
  }

  const TranspileTable table = transpile_all(isqs, farm, options.mode, options.workers);
  std::vector<Estimation> out(fitting.size());
  parallel_for(fitting.size(), options.workers, [&](std::size_t k) {
    const QpuDescriptor& qpu = *fitting[k];
    const std::string target = options.mode == TranspileMode::PerQpu ? qpu.id : qpu.architecture_tag;
    std::vector<Estimation> parts;
    for (std::size_t i = 0; i < isqs.size(); ++i) {
      parts.push_back(estimate_numerical(table.at({i, target}), qpu));
    }
    out[k] = combine(parts, qpu);
  });

  sort_estimations(out, options.queue_seconds);
  return out;
}

std::vector<Estimation> rank_assignments(const Circuit& logical, const std::vector<QpuDescriptor>& farm,
                                         const RankOptions& options) {
  return rank_assignments(std::vector<Circuit>{logical}, farm, options);
}

}  // namespace qos
