#pragma once

#include "qos/estimator.hpp"
#include "qos/optimizer.hpp"
#include "qos/qernel.hpp"
#include "qos/scheduler.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qos {

class JobNotFound : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ServiceConfig {
  double c = 0.5;
  double beta = 0.5;
  int shots = 4096;
  bool exact = false;  // ideal simulation instead of noisy trajectories
  int workers = 1;
  ExecModel exec;
};

ServiceConfig service_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ServiceConfig& c);

struct Job {
  std::string id;
  std::string circuit_path;  // relative to the run directory
  OptimizationGoal goal;
  std::uint64_t seed = 0;
  JobStatus status = JobStatus::Queued;
  // Simulated seconds.
  std::optional<double> submitted;
  std::optional<double> scheduled;
  std::optional<double> started;
  std::optional<double> done;
  std::string qpu_id;
  int num_isqs = 0;
  double estimated_fidelity = 0.0;
  std::string result_path;  // set iff status is Done
  std::string error;        // set iff status is Failed
};

nlohmann::json to_json(const Job& j);

struct JobView {
  Job job;
  DynamicProperties dynamic;
};

// Job submission and execution backed by a run directory:
//   jobs.log            append-only JSON lines, replayed on open
//   jobs/<id>/          circuit, optimized Qernel, estimations, result
// Per-job files are written before the log line that refers to them, so a
// crash leaves at most an unreferenced file and a torn last line, which replay
// ignores.
class JobService {
public:
  // An existing log's recorded root seed takes precedence over `root_seed`.
  JobService(std::string run_dir, std::uint64_t root_seed, ServiceConfig config = {});

  // Parses, analyzes and optimizes the circuit, then queues it. Throws
  // CircuitError on malformed input and std::invalid_argument on a bad goal.
  std::string submit(const std::string& circuit_text, const OptimizationGoal& goal);
  std::string submit_file(const std::string& path, const OptimizationGoal& goal);

  // Throws JobNotFound.
  JobView status(const std::string& id) const;
  const std::vector<Job>& jobs() const { return jobs_; }
  std::uint64_t root_seed() const { return root_seed_; }
  const std::string& run_dir() const { return run_dir_; }

  // Places every queued job with the formula policy, runs its variants and
  // knits the result. Returns the ids handled in this call.
  std::vector<std::string> process(const std::vector<QpuDescriptor>& farm);

private:
  void replay();
  void apply(const nlohmann::json& event);
  void append(const nlohmann::json& event);
  Job& find(const std::string& id);
  std::string job_dir(const std::string& id) const;

  std::string run_dir_;
  std::uint64_t root_seed_;
  ServiceConfig config_;
  std::vector<Job> jobs_;
  double clock_ = 0.0;
};

// Farm experiments stored under <run dir>/experiments/<name>.json.
nlohmann::json metrics_to_json(const FarmMetrics& m);
double mean_utilization(const FarmMetrics& m);
nlohmann::json run_c_sweep(FarmSimulator& sim, const Workload& w, FarmOptions options,
                           const std::vector<double>& cs);
nlohmann::json run_multiprogramming_pair(FarmSimulator& sim, const Workload& w, FarmOptions options);
void save_experiment(const std::string& run_dir, const std::string& name, const nlohmann::json& doc);

// Tables for plotting. Empty inputs give header-only CSVs.
struct Report {
  nlohmann::json summary;
  std::string jobs_csv;
  std::string sweep_csv;
  std::string multiprogramming_csv;
};

Report build_report(const std::string& run_dir);
// Writes summary.json and the CSVs to <run dir>/report and returns that path.
std::string write_report(const std::string& run_dir);

}  // namespace qos
