#include "qos/service.hpp"

#include "qos/analyzer.hpp"
#include "qos/knitter.hpp"
#include "qos/random.hpp"
#include "qos/simulator.hpp"
#include "qos/transpiler.hpp"
#include "qos/virtualizer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace qos {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  out << text;
}

json optional_time(const std::optional<double>& t) { return t ? json(*t) : json(nullptr); }

std::optional<double> time_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) {
    return std::nullopt;
  }
  return j.at(key).get<double>();
}

std::string num(double x) { return fmt::format("{:.6f}", x); }

}  // namespace

ServiceConfig service_config_from_json(const json& j) {
  ServiceConfig c;
  c.c = j.value("c", c.c);
  c.beta = j.value("beta", c.beta);
  c.shots = j.value("shots", c.shots);
  c.exact = j.value("exact", c.exact);
  c.workers = j.value("workers", c.workers);
  c.exec.job_overhead = j.value("job_overhead", c.exec.job_overhead);
  c.exec.shot_overhead = j.value("shot_overhead", c.exec.shot_overhead);
  if (c.shots < 1 || c.workers < 1 || c.c < 0.0 || c.c > 1.0 || c.beta < 0.0) {
    throw std::invalid_argument("invalid service configuration");
  }
  return c;
}

json to_json(const ServiceConfig& c) {
  return {{"c", c.c},
          {"beta", c.beta},
          {"shots", c.shots},
          {"exact", c.exact},
          {"workers", c.workers},
          {"job_overhead", c.exec.job_overhead},
          {"shot_overhead", c.exec.shot_overhead}};
}

json to_json(const Job& j) {
  return {{"id", j.id},
          {"circuit", j.circuit_path},
          {"size_target", j.goal.size_target},
          {"budget", j.goal.budget},
          {"seed", j.seed},
          {"status", std::string(to_string(j.status))},
          {"submitted", optional_time(j.submitted)},
          {"scheduled", optional_time(j.scheduled)},
          {"started", optional_time(j.started)},
          {"done", optional_time(j.done)},
          {"qpu", j.qpu_id},
          {"num_isqs", j.num_isqs},
          {"estimated_fidelity", j.estimated_fidelity},
          {"result", j.result_path},
          {"error", j.error}};
}

JobService::JobService(std::string run_dir, std::uint64_t root_seed, ServiceConfig config)
    : run_dir_(std::move(run_dir)), root_seed_(root_seed), config_(config) {
  fs::create_directories(fs::path(run_dir_) / "jobs");
  replay();
  if (!fs::exists(fs::path(run_dir_) / "jobs.log")) {
    append({{"event", "open"}, {"seed", root_seed_}});
  }
}

void JobService::replay() {
  std::ifstream in(fs::path(run_dir_) / "jobs.log");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    json event;
    try {
      event = json::parse(line);
    } catch (const json::parse_error&) {
      // torn write of the last record
      break;
    }
    apply(event);
  }
}

void JobService::apply(const json& e) {
  const std::string kind = e.at("event").get<std::string>();
  if (kind == "open") {
    root_seed_ = e.at("seed").get<std::uint64_t>();
    return;
  }
  const double t = e.value("time", clock_);
  clock_ = std::max(clock_, t);
  if (kind == "submit") {
    Job j;
    j.id = e.at("job").get<std::string>();
    j.circuit_path = e.at("circuit").get<std::string>();
    j.goal = {e.at("size_target").get<int>(), e.at("budget").get<int>()};
    j.seed = e.at("seed").get<std::uint64_t>();
    j.num_isqs = e.at("num_isqs").get<int>();
    j.submitted = t;
    jobs_.push_back(j);
    return;
  }
  Job& j = find(e.at("job").get<std::string>());
  if (kind == "schedule") {
    j.status = JobStatus::Scheduled;
    j.scheduled = t;
    j.qpu_id = e.at("qpu").get<std::string>();
    j.estimated_fidelity = e.at("estimated_fidelity").get<double>();
    j.started = time_from(e, "start");
  } else if (kind == "done") {
    j.status = JobStatus::Done;
    j.done = t;
    j.result_path = e.at("result").get<std::string>();
  } else if (kind == "fail") {
    j.status = JobStatus::Failed;
    j.done = t;
    j.error = e.at("error").get<std::string>();
  } else {
    throw std::runtime_error("unknown job log event '" + kind + "'");
  }
}

void JobService::append(const json& event) {
  std::ofstream out(fs::path(run_dir_) / "jobs.log", std::ios::app);
  if (!out) {
    throw std::runtime_error("cannot append to the job log in '" + run_dir_ + "'");
  }
  out << event.dump() << '\n';
  out.flush();
}

Job& JobService::find(const std::string& id) {
  for (Job& j : jobs_) {
    if (j.id == id) {
      return j;
    }
  }
  throw JobNotFound("unknown job '" + id + "'");
}

std::string JobService::job_dir(const std::string& id) const { return (fs::path(run_dir_) / "jobs" / id).string(); }

std::string JobService::submit(const std::string& circuit_text, const OptimizationGoal& goal) {
  goal.validate();
  Circuit c = parse_circuit(circuit_text);
  c.validate();
  const std::string id = fmt::format("job-{:04d}", jobs_.size() + 1);
  const std::uint64_t seed = derive_seed(root_seed_, jobs_.size());

  const Qernel q = optimize(run_frontend(c, default_passes(), id), goal);
  const Instantiation inst = instantiate(q);

  fs::create_directories(job_dir(id));
  const std::string circuit_rel = "jobs/" + id + "/circuit.txt";
  write_file((fs::path(run_dir_) / circuit_rel).string(), print_circuit(c));
  save_qernel(q, job_dir(id) + "/qernel.json");
  save_knit_plan(inst.plan, job_dir(id) + "/plan.json");

  const json event = {{"event", "submit"},
                      {"job", id},
                      {"time", clock_},
                      {"circuit", circuit_rel},
                      {"size_target", goal.size_target},
                      {"budget", goal.budget},
                      {"seed", seed},
                      {"num_isqs", static_cast<int>(inst.num_isqs())}};
  append(event);
  apply(event);
  return id;
}

std::string JobService::submit_file(const std::string& path, const OptimizationGoal& goal) {
  return submit(read_file(path), goal);
}

JobView JobService::status(const std::string& id) const {
  for (const Job& j : jobs_) {
    if (j.id != id) {
      continue;
    }
    JobView v{j, {}};
    const fs::path est = fs::path(job_dir(id)) / "estimations.json";
    if (fs::exists(est)) {
      for (const json& e : json::parse(read_file(est.string()))) {
        Estimation x;
        x.qpu_id = e.at("qpu").get<std::string>();
        x.fidelity_score = e.at("fidelity").get<double>();
        x.estimated_exec_time = e.at("exec_time").get<double>();
        x.layout = e.at("layout").get<std::vector<int>>();
        x.calibration_timestamp = e.at("calibration_timestamp").get<std::int64_t>();
        x.missing_calibration = e.at("missing_calibration").get<bool>();
        v.dynamic.estimations().push_back(x);
      }
    }
    if (j.status == JobStatus::Done) {
      v.dynamic.set_result(load_distribution((fs::path(run_dir_) / j.result_path).string()));
    } else {
      v.dynamic.set_status(j.status);
    }
    return v;
  }
  throw JobNotFound("unknown job '" + id + "'");
}

std::vector<std::string> JobService::process(const std::vector<QpuDescriptor>& farm) {
  if (farm.empty()) {
    throw std::invalid_argument("empty farm");
  }
  std::vector<QpuQueue> queues;
  for (const QpuDescriptor& q : farm) {
    queues.push_back({q.id, {}, 0.0, 0.0});
  }
  for (const Job& j : jobs_) {
    for (QpuQueue& q : queues) {
      if (q.qpu_id == j.qpu_id && j.done) {
        q.free_at = std::max(q.free_at, *j.done);
      }
    }
  }
  const double now = clock_;

  std::vector<std::string> handled;
  for (std::size_t index = 0; index < jobs_.size(); ++index) {
    if (jobs_[index].status != JobStatus::Queued) {
      continue;
    }
    const std::string id = jobs_[index].id;
    const std::uint64_t seed = jobs_[index].seed;
    handled.push_back(id);
    try {
      const Qernel q = load_qernel(job_dir(id) + "/qernel.json");
      const Instantiation inst = instantiate(q);
      std::vector<Circuit> isqs;
      int width = 0;
      for (const Variant& v : inst.variants) {
        isqs.push_back(v.circuit);
        width = std::max(width, v.circuit.num_qubits());
      }
      RankOptions ro;
      ro.mode = default_transpile_mode(jobs_[index].goal.budget);
      ro.workers = config_.workers;
      const std::vector<Estimation> ranked = rank_assignments(isqs, farm, ro);
      json est = json::array();
      SchedulingUnit unit{id, {}};
      for (const Estimation& e : ranked) {
        est.push_back({{"qpu", e.qpu_id},
                       {"fidelity", e.fidelity_score},
                       {"exec_time", e.estimated_exec_time},
                       {"layout", e.layout},
                       {"calibration_timestamp", e.calibration_timestamp},
                       {"missing_calibration", e.missing_calibration}});
        for (std::size_t k = 0; k < farm.size(); ++k) {
          if (farm[k].id == e.qpu_id) {
            const double exec = config_.exec.job_overhead +
                                config_.shots * (e.estimated_exec_time +
                                                 static_cast<double>(isqs.size()) * config_.exec.shot_overhead);
            unit.choices.push_back({k, e.fidelity_score, exec,
                                    static_cast<double>(width) / farm[k].num_qubits});
          }
        }
      }
      write_file(job_dir(id) + "/estimations.json", est.dump(1) + "\n");

      const ScheduleDecision d = schedule_formula({unit}, queues, now, config_.c, config_.beta).front();
      const double start = queues[d.queue].entries.back().start_time;
      const double end = start + queues[d.queue].entries.back().exec_time;
      const json sched = {{"event", "schedule"},
                          {"job", id},
                          {"time", now},
                          {"qpu", d.qpu_id},
                          {"estimated_fidelity", d.predicted.f},
                          {"start", start}};
      append(sched);
      apply(sched);

      const QpuDescriptor& qpu = farm[d.queue];
      std::map<std::string, Distribution> results;
      for (std::size_t k = 0; k < inst.variants.size(); ++k) {
        const Variant& v = inst.variants[k];
        const std::uint64_t s = derive_seed(seed, k);
        if (config_.exact) {
          results.emplace(v.key, simulate_ideal(v.circuit));
        } else {
          const TranspiledCircuit t = transpile(v.circuit, qpu);
          results.emplace(v.key, simulate_noisy(t.physical, qpu, config_.shots, s));
        }
      }
      const KnitResult r = knit(inst.plan, results, {.partitions = config_.workers, .workers = config_.workers});
      const std::string result_rel = "jobs/" + id + "/result.txt";
      save_distribution(r.distribution, (fs::path(run_dir_) / result_rel).string());
      const json done = {{"event", "done"}, {"job", id}, {"time", end}, {"result", result_rel}};
      append(done);
      apply(done);
    } catch (const std::exception& ex) {
      const json fail = {{"event", "fail"}, {"job", id}, {"time", std::max(now, clock_)}, {"error", ex.what()}};
      append(fail);
      apply(fail);
    }
  }
  return handled;
}

json metrics_to_json(const FarmMetrics& m) {
  json qpus = json::array();
  for (const QpuUsage& q : m.qpus) {
    qpus.push_back({{"qpu", q.qpu_id}, {"busy_time", q.busy_time}, {"utilization", q.utilization}, {"jobs", q.jobs}});
  }
  return {{"jobs", m.jobs},
          {"mean_fidelity", m.mean_fidelity},
          {"mean_wait", m.mean_wait},
          {"p95_wait", m.p95_wait},
          {"horizon", m.horizon},
          {"max_busy_difference", m.max_busy_difference},
          {"mean_utilization", mean_utilization(m)},
          {"bundled_jobs", m.bundled_jobs},
          {"estimated_jobs", m.estimated_jobs},
          {"qpus", qpus}};
}

double mean_utilization(const FarmMetrics& m) {
  if (m.qpus.empty()) {
    return 0.0;
  }
  double s = 0.0;
  for (const QpuUsage& q : m.qpus) {
    s += q.utilization;
  }
  return s / static_cast<double>(m.qpus.size());
}

namespace {

json workload_json(const Workload& w) {
  return {{"seed", w.seed},         {"rate_per_hour", w.rate_per_hour}, {"load_factor", w.load_factor},
          {"hours", w.hours},       {"benchmarks", w.benchmarks},       {"sizes", w.sizes},
          {"shots", w.shots}};
}

}  // namespace

json run_c_sweep(FarmSimulator& sim, const Workload& w, FarmOptions options, const std::vector<double>& cs) {
  json points = json::array();
  for (double c : cs) {
    options.c = c;
    json p = metrics_to_json(sim.run(w, options));
    p["c"] = c;
    points.push_back(p);
  }
  return {{"kind", "c_sweep"},
          {"policy", std::string(to_string(options.policy))},
          {"beta", options.beta},
          {"workload", workload_json(w)},
          {"points", points}};
}

json run_multiprogramming_pair(FarmSimulator& sim, const Workload& w, FarmOptions options) {
  json runs = json::array();
  for (bool on : {false, true}) {
    options.multiprogramming = on;
    json r = metrics_to_json(sim.run(w, options));
    r["multiprogramming"] = on;
    runs.push_back(r);
  }
  return {{"kind", "multiprogramming"},
          {"bundle_policy", std::string(to_string(options.bundle_policy))},
          {"workload", workload_json(w)},
          {"runs", runs}};
}

void save_experiment(const std::string& run_dir, const std::string& name, const json& doc) {
  const fs::path dir = fs::path(run_dir) / "experiments";
  fs::create_directories(dir);
  write_file((dir / (name + ".json")).string(), doc.dump(1) + "\n");
}

Report build_report(const std::string& run_dir) {
  Report r;
  r.jobs_csv = "id,status,qpu,size_target,budget,num_isqs,submitted,scheduled,started,done,estimated_fidelity\n";
  r.sweep_csv = "c,mean_fidelity,mean_wait,p95_wait,max_busy_difference,mean_utilization,jobs\n";
  r.multiprogramming_csv = "multiprogramming,mean_utilization,mean_fidelity,mean_wait,bundled_jobs,jobs\n";

  std::uint64_t seed = 0;
  int total = 0;
  std::map<std::string, int> by_status;
  if (fs::exists(fs::path(run_dir) / "jobs.log")) {
    const JobService svc(run_dir, 0);
    seed = svc.root_seed();
    auto t = [](const std::optional<double>& x) { return x ? num(*x) : std::string(); };
    for (const Job& j : svc.jobs()) {
      ++total;
      ++by_status[std::string(to_string(j.status))];
      r.jobs_csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", j.id, to_string(j.status), j.qpu_id,
                                j.goal.size_target, j.goal.budget, j.num_isqs, t(j.submitted), t(j.scheduled),
                                t(j.started), t(j.done), j.status == JobStatus::Queued ? "" : num(j.estimated_fidelity));
    }
  }

  std::vector<fs::path> files;
  const fs::path exp_dir = fs::path(run_dir) / "experiments";
  if (fs::is_directory(exp_dir)) {
    for (const auto& entry : fs::directory_iterator(exp_dir)) {
      if (entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
  }
  std::sort(files.begin(), files.end());
  json experiments = json::array();
  for (const fs::path& f : files) {
    const json doc = json::parse(read_file(f.string()));
    const std::string kind = doc.at("kind").get<std::string>();
    experiments.push_back({{"name", f.stem().string()}, {"kind", kind}, {"workload", doc.at("workload")}});
    if (kind == "c_sweep") {
      for (const json& p : doc.at("points")) {
        r.sweep_csv += fmt::format("{},{},{},{},{},{},{}\n", num(p.at("c").get<double>()),
                                   num(p.at("mean_fidelity").get<double>()), num(p.at("mean_wait").get<double>()),
                                   num(p.at("p95_wait").get<double>()),
                                   num(p.at("max_busy_difference").get<double>()),
                                   num(p.at("mean_utilization").get<double>()), p.at("jobs").get<int>());
      }
    } else if (kind == "multiprogramming") {
      for (const json& p : doc.at("runs")) {
        r.multiprogramming_csv += fmt::format(
            "{},{},{},{},{},{}\n", p.at("multiprogramming").get<bool>() ? "on" : "off",
            num(p.at("mean_utilization").get<double>()), num(p.at("mean_fidelity").get<double>()),
            num(p.at("mean_wait").get<double>()), p.at("bundled_jobs").get<int>(), p.at("jobs").get<int>());
      }
    }
  }
  r.summary = {{"seed", seed}, {"jobs", total}, {"jobs_by_status", by_status}, {"experiments", experiments}};
  return r;
}

std::string write_report(const std::string& run_dir) {
  const Report r = build_report(run_dir);
  const fs::path dir = fs::path(run_dir) / "report";
  fs::create_directories(dir);
  write_file((dir / "summary.json").string(), r.summary.dump(1) + "\n");
  write_file((dir / "jobs.csv").string(), r.jobs_csv);
  write_file((dir / "c_sweep.csv").string(), r.sweep_csv);
  write_file((dir / "multiprogramming.csv").string(), r.multiprogramming_csv);
  return dir.string();
}

}  // namespace qos
