#pragma once

#include "qos/circuit.hpp"
#include "qos/multiprogrammer.hpp"
#include "qos/qpu.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qos {

struct ExecModel {
  // Seconds per job (setup, loading, transfer). With 8192 shots the default
  // workload keeps a six-device farm about 88% busy.
  double job_overhead = 10.5;
  double shot_overhead = 250e-6;  // seconds per shot (reset and readout latency)
};

// job_overhead + shots * (longest-duration path + shot_overhead).
double estimate_exec_time(const Circuit& physical, const QpuDescriptor& qpu, int shots, const ExecModel& m = {});

// Predicted (fidelity, turnaround seconds, utilization in (0, 1]) of one choice.
struct ScheduleOption {
  double f = 0.0;
  double t = 0.0;
  double u = 0.0;
};

struct PairScore {
  double score = 0.0;
  bool floored = false;  // a denominator was raised to the 1e-9 floor
};

// c (f2 - f1) / f1 - (1 - c)(t2 - t1) / t1 + beta (u2 - u1) / u1; positive
// prefers option 2.
PairScore score_pair(const ScheduleOption& o1, const ScheduleOption& o2, double c = 0.5, double beta = 0.5);

struct QueueEntry {
  std::string unit_id;
  double exec_time = 0.0;
  double enqueue_time = 0.0;
  double start_time = 0.0;
};

// FIFO queue of one QPU. Entries never overlap and the QPU never idles while
// work is queued.
struct QpuQueue {
  std::string qpu_id;
  std::vector<QueueEntry> entries;
  double free_at = 0.0;
  double busy_time = 0.0;

  double waiting_time(double now) const { return free_at > now ? free_at - now : 0.0; }
  const QueueEntry& enqueue(const std::string& unit_id, double exec_time, double now);
};

// A schedulable item (solo job or bundle) with its per-QPU predictions.
struct UnitChoice {
  std::size_t queue = 0;  // index into the queue list
  double fidelity = 0.0;
  double exec_time = 0.0;
  double utilization = 0.0;
};
struct SchedulingUnit {
  std::string id;
  std::vector<UnitChoice> choices;  // nonempty
};

struct ScheduleDecision {
  std::string unit_id;
  std::string qpu_id;
  std::size_t queue = 0;
  ScheduleOption predicted;
  double wait = 0.0;
  std::string policy;
  double score = 0.0;
};

// Tournament over each unit's choices in queue order; the current winner is
// replaced when score_pair(winner, next) > 0. Units are placed in order and
// enqueued.
std::vector<ScheduleDecision> schedule_formula(const std::vector<SchedulingUnit>& units,
                                               std::vector<QpuQueue>& queues, double now, double c = 0.5,
                                               double beta = 0.5);

struct GeneticOptions {
  double c = 0.5;
  double beta = 0.5;
  int population = 64;
  int generations = 50;
  double crossover = 0.9;
  std::uint64_t seed = 1;
  // Assignments to insert into the first generation (choice indices per unit).
  std::vector<std::vector<int>> seeds;
};

struct ParetoPoint {
  std::vector<int> assignment;  // choice index per unit
  double mean_fidelity = 0.0;
  double mean_wait = 0.0;
  double mean_turnaround = 0.0;
  double mean_utilization = 0.0;
};

// Objectives of an assignment when units are enqueued in order.
ParetoPoint evaluate_assignment(const std::vector<SchedulingUnit>& units, const std::vector<QpuQueue>& queues,
                                double now, const std::vector<int>& assignment);
bool dominates(const ParetoPoint& a, const ParetoPoint& b);

struct GeneticResult {
  std::vector<ScheduleDecision> decisions;
  std::vector<ParetoPoint> front;  // every non-dominated assignment found
  std::size_t selected = 0;        // index into front
};

// NSGA-II over assignments (maximize mean fidelity, minimize mean waiting
// time); the pick is the front member with the best score_pair against the
// front's fidelity median. The chosen assignment is enqueued.
GeneticResult schedule_genetic(const std::vector<SchedulingUnit>& units, std::vector<QpuQueue>& queues,
                               double now, const GeneticOptions& options = {});

// Eq.-1 view of a whole schedule: mean fidelity, turnaround and utilization.
ScheduleOption summarize(const std::vector<ScheduleDecision>& decisions);

// ---------------------------------------------------------------------------
// Farm simulation

struct Workload {
  double rate_per_hour = 1500.0;
  double load_factor = 1.0;
  double hours = 2.0;
  std::uint64_t seed = 1;
  std::vector<std::string> benchmarks{"ghz", "qaoa", "vqe", "wstate", "random"};
  std::vector<int> sizes{4, 6, 8, 10, 12};
  int shots = 8192;
};

struct JobArrival {
  std::string id;
  double time = 0.0;
  std::string benchmark;
  int qubits = 0;
};

// Homogeneous Poisson arrivals at rate * load_factor over the horizon.
std::vector<JobArrival> generate_arrivals(const Workload& w);

enum class SchedulingPolicy : std::uint8_t { Formula, Genetic };
std::string_view to_string(SchedulingPolicy p);
std::optional<SchedulingPolicy> scheduling_policy_from_string(std::string_view s);

struct FarmOptions {
  SchedulingPolicy policy = SchedulingPolicy::Formula;
  double c = 0.5;
  double beta = 0.5;
  bool multiprogramming = false;
  BundlePolicy bundle_policy = BundlePolicy::Reevaluate;
  CompatibilityWeights weights;
  double dispatch_interval = 60.0;  // seconds between dispatch rounds
  int genetic_population = 64;
  int genetic_generations = 50;
  ExecModel exec;
};

struct QpuUsage {
  std::string qpu_id;
  double busy_time = 0.0;
  double utilization = 0.0;  // busy time / horizon
  int jobs = 0;
};

struct JobRecord {
  std::string id;
  std::string qpu_id;
  double arrival = 0.0;
  double start = 0.0;
  double end = 0.0;
  double fidelity = 0.0;
  bool bundled = false;
  bool estimated = false;  // fidelity taken from the estimator (too wide to simulate)
};

struct FarmMetrics {
  int jobs = 0;
  double mean_fidelity = 0.0;
  double mean_wait = 0.0;
  double p95_wait = 0.0;
  double horizon = 0.0;
  double max_busy_difference = 0.0;  // (max - min) / max over QPUs
  int bundled_jobs = 0;
  int estimated_jobs = 0;
  std::vector<QpuUsage> qpus;
  std::vector<JobRecord> records;
};

struct FarmConfig {
  std::vector<QpuTemplate> qpus;
  double drift_sigma = 0.3;
  double calibration_period = 24.0 * 3600.0;
  std::uint64_t calibration_seed = 7;
  int simulation_cap = 10;    // widest simulated block; wider jobs use the estimate
  int simulation_shots = 500;
  int workers = 1;
};

// Falcon27 devices whose nominal error rates range from 0.8x to 1.25x.
FarmConfig default_farm_config(int qpus = 6);

// Discrete-event farm: dispatch rounds collect arrivals, optionally bundle
// them, place them with the chosen policy and run them FIFO. Estimates and
// noisy fidelities are cached per (program, QPU, calibration cycle), so runs
// sharing a simulator reuse them. Deterministic given the workload seed.
class FarmSimulator {
public:
  explicit FarmSimulator(FarmConfig config);
  ~FarmSimulator();
  FarmSimulator(const FarmSimulator&) = delete;
  FarmSimulator& operator=(const FarmSimulator&) = delete;

  FarmMetrics run(const Workload& w, const FarmOptions& options);
  const FarmConfig& config() const { return config_; }
  std::vector<QpuDescriptor> farm_at(std::int64_t cycle) const;

private:
  struct Cache;
  FarmConfig config_;
  std::unique_ptr<Cache> cache_;
};

}  // namespace qos
