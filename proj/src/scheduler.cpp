#include "qos/scheduler.hpp"

#include "qos/benchmarks.hpp"
#include "qos/estimator.hpp"
#include "qos/knitter.hpp"
#include "qos/parallel.hpp"
#include "qos/random.hpp"
#include "qos/schedule.hpp"
#include "qos/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <tuple>

namespace qos {

double estimate_exec_time(const Circuit& physical, const QpuDescriptor& qpu, int shots, const ExecModel& m) {
  if (shots < 1) {
    throw std::invalid_argument("shots must be positive");
  }
  const GateSchedule s = schedule_circuit(with_default_measurements(physical), qpu);
  return m.job_overhead + shots * (s.makespan + m.shot_overhead);
}

PairScore score_pair(const ScheduleOption& o1, const ScheduleOption& o2, double c, double beta) {
  constexpr double kFloor = 1e-9;
  PairScore out;
  auto denom = [&](double x) {
    if (std::abs(x) < kFloor) {
      out.floored = true;
      return kFloor;
    }
    return x;
  };
  out.score = c * (o2.f - o1.f) / denom(o1.f) - (1.0 - c) * (o2.t - o1.t) / denom(o1.t) +
              beta * (o2.u - o1.u) / denom(o1.u);
  return out;
}

const QueueEntry& QpuQueue::enqueue(const std::string& unit_id, double exec_time, double now) {
  const double start = std::max(now, free_at);
  entries.push_back({unit_id, exec_time, now, start});
  free_at = start + exec_time;
  busy_time += exec_time;
  return entries.back();
}

namespace {

void check_units(const std::vector<SchedulingUnit>& units, const std::vector<QpuQueue>& queues) {
  for (const SchedulingUnit& u : units) {
    if (u.choices.empty()) {
      throw std::invalid_argument("unit " + u.id + " has no QPU choices");
    }
    for (const UnitChoice& ch : u.choices) {
      if (ch.queue >= queues.size()) {
        throw std::invalid_argument("unit " + u.id + " refers to an unknown queue");
      }
    }
  }
}

ScheduleOption option_of(const UnitChoice& ch, const std::vector<QpuQueue>& queues, double now) {
  return {ch.fidelity, queues[ch.queue].waiting_time(now) + ch.exec_time, ch.utilization};
}

ScheduleDecision commit(const SchedulingUnit& unit, const UnitChoice& ch, std::vector<QpuQueue>& queues,
                        double now, const std::string& policy, double score) {
  ScheduleDecision d;
  d.unit_id = unit.id;
  d.queue = ch.queue;
  d.qpu_id = queues[ch.queue].qpu_id;
  d.predicted = option_of(ch, queues, now);
  d.policy = policy;
  d.score = score;
  const QueueEntry& e = queues[ch.queue].enqueue(unit.id, ch.exec_time, now);
  d.wait = e.start_time - now;
  return d;
}

}  // namespace

std::vector<ScheduleDecision> schedule_formula(const std::vector<SchedulingUnit>& units,
                                               std::vector<QpuQueue>& queues, double now, double c, double beta) {
  check_units(units, queues);
  std::vector<ScheduleDecision> out;
  for (const SchedulingUnit& unit : units) {
    std::size_t winner = 0;
    double last = 0.0;
    for (std::size_t k = 1; k < unit.choices.size(); ++k) {
      const PairScore s = score_pair(option_of(unit.choices[winner], queues, now),
                                     option_of(unit.choices[k], queues, now), c, beta);
      if (s.score > 0.0) {
        winner = k;
        last = s.score;
      }
    }
    out.push_back(commit(unit, unit.choices[winner], queues, now, "formula", last));
  }
  return out;
}

ParetoPoint evaluate_assignment(const std::vector<SchedulingUnit>& units, const std::vector<QpuQueue>& queues,
                                double now, const std::vector<int>& assignment) {
  if (assignment.size() != units.size()) {
    throw std::invalid_argument("assignment length does not match the batch");
  }
  std::vector<double> free_at(queues.size());
  for (std::size_t q = 0; q < queues.size(); ++q) {
    free_at[q] = std::max(now, queues[q].free_at);
  }
  ParetoPoint p;
  p.assignment = assignment;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const UnitChoice& ch = units[i].choices.at(static_cast<std::size_t>(assignment[i]));
    const double wait = free_at[ch.queue] - now;
    free_at[ch.queue] += ch.exec_time;
    p.mean_fidelity += ch.fidelity;
    p.mean_wait += wait;
    p.mean_turnaround += wait + ch.exec_time;
    p.mean_utilization += ch.utilization;
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, units.size()));
  p.mean_fidelity /= n;
  p.mean_wait /= n;
  p.mean_turnaround /= n;
  p.mean_utilization /= n;
  return p;
}

bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
  const bool no_worse = a.mean_fidelity >= b.mean_fidelity && a.mean_wait <= b.mean_wait;
  const bool better = a.mean_fidelity > b.mean_fidelity || a.mean_wait < b.mean_wait;
  return no_worse && better;
}

namespace {

// Fast non-dominated sort: front index per individual.
std::vector<int> nondominated_ranks(const std::vector<ParetoPoint>& pop) {
  const std::size_t n = pop.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<int> count(n, 0);
  std::vector<int> rank(n, 0);
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && dominates(pop[i], pop[j])) {
        dominated[i].push_back(j);
      } else if (i != j && dominates(pop[j], pop[i])) {
        ++count[i];
      }
    }
    if (count[i] == 0) {
      current.push_back(i);
    }
  }
  int r = 0;
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t i : current) {
      rank[i] = r;
      for (std::size_t j : dominated[i]) {
        if (--count[j] == 0) {
          next.push_back(j);
        }
      }
    }
    current = std::move(next);
    ++r;
  }
  return rank;
}

std::vector<double> crowding(const std::vector<ParetoPoint>& pop, const std::vector<std::size_t>& members) {
  std::vector<double> dist(pop.size(), 0.0);
  auto one_objective = [&](auto key) {
    std::vector<std::size_t> order = members;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key(pop[a]) < key(pop[b]); });
    const double span = key(pop[order.back()]) - key(pop[order.front()]);
    dist[order.front()] = std::numeric_limits<double>::infinity();
    dist[order.back()] = std::numeric_limits<double>::infinity();
    if (span <= 0.0) {
      return;
    }
    for (std::size_t k = 1; k + 1 < order.size(); ++k) {
      dist[order[k]] += (key(pop[order[k + 1]]) - key(pop[order[k - 1]])) / span;
    }
  };
  one_objective([](const ParetoPoint& p) { return p.mean_fidelity; });
  one_objective([](const ParetoPoint& p) { return p.mean_wait; });
  return dist;
}

class Archive {
public:
  void offer(const ParetoPoint& p) {
    for (const ParetoPoint& a : points_) {
      if (dominates(a, p) || a.assignment == p.assignment) {
        return;
      }
    }
    std::erase_if(points_, [&](const ParetoPoint& a) { return dominates(p, a); });
    points_.push_back(p);
  }
  std::vector<ParetoPoint> sorted() const {
    std::vector<ParetoPoint> out = points_;
    std::sort(out.begin(), out.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
      return std::tie(b.mean_fidelity, a.mean_wait, a.assignment) < std::tie(a.mean_fidelity, b.mean_wait, b.assignment);
    });
    return out;
  }

private:
  std::vector<ParetoPoint> points_;
};

}  // namespace

GeneticResult schedule_genetic(const std::vector<SchedulingUnit>& units, std::vector<QpuQueue>& queues, double now,
                               const GeneticOptions& options) {
  if (units.empty()) {
    throw std::invalid_argument("genetic scheduling needs a nonempty batch");
  }
  if (options.population < 2 || options.generations < 0) {
    throw std::invalid_argument("invalid genetic parameters");
  }
  check_units(units, queues);
  Rng rng(options.seed);
  const std::size_t len = units.size();
  const auto pop_size = static_cast<std::size_t>(options.population);
  auto gene = [&](std::size_t i) {
    return static_cast<int>(rng() % units[i].choices.size());
  };
  auto evaluate = [&](const std::vector<int>& a) { return evaluate_assignment(units, queues, now, a); };

  Archive archive;
  std::vector<ParetoPoint> pop;
  for (const auto& s : options.seeds) {
    if (pop.size() < pop_size && s.size() == len) {
      pop.push_back(evaluate(s));
    }
  }
  while (pop.size() < pop_size) {
    std::vector<int> a(len);
    for (std::size_t i = 0; i < len; ++i) {
      a[i] = gene(i);
    }
    pop.push_back(evaluate(a));
  }
  for (const ParetoPoint& p : pop) {
    archive.offer(p);
  }

  std::vector<int> rank = nondominated_ranks(pop);
  std::vector<std::size_t> all(pop.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<double> crowd(pop.size(), 0.0);
  for (int r = 0;; ++r) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      if (rank[i] == r) {
        members.push_back(i);
      }
    }
    if (members.empty()) {
      break;
    }
    const auto d = crowding(pop, members);
    for (std::size_t i : members) {
      crowd[i] = d[i];
    }
  }

  const double mutation = 1.0 / static_cast<double>(len);
  for (int gen = 0; gen < options.generations; ++gen) {
    auto tournament = [&]() {
      const std::size_t a = rng() % pop.size();
      const std::size_t b = rng() % pop.size();
      if (rank[a] != rank[b]) {
        return rank[a] < rank[b] ? a : b;
      }
      return crowd[a] >= crowd[b] ? a : b;
    };
    std::vector<ParetoPoint> next = pop;
    while (next.size() < 2 * pop_size) {
      std::vector<int> x = pop[tournament()].assignment;
      std::vector<int> y = pop[tournament()].assignment;
      if (len > 1 && uniform01(rng) < options.crossover) {
        const std::size_t cut = 1 + rng() % (len - 1);
        for (std::size_t i = cut; i < len; ++i) {
          std::swap(x[i], y[i]);
        }
      }
      for (auto* child : {&x, &y}) {
        for (std::size_t i = 0; i < len; ++i) {
          if (uniform01(rng) < mutation) {
            (*child)[i] = gene(i);
          }
        }
        if (next.size() < 2 * pop_size) {
          next.push_back(evaluate(*child));
          archive.offer(next.back());
        }
      }
    }
    // environmental selection: whole fronts, then the least crowded
    const std::vector<int> r = nondominated_ranks(next);
    std::vector<ParetoPoint> chosen;
    std::vector<int> chosen_rank;
    std::vector<double> chosen_crowd;
    for (int front = 0; chosen.size() < pop_size; ++front) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < next.size(); ++i) {
        if (r[i] == front) {
          members.push_back(i);
        }
      }
      const auto d = crowding(next, members);
      if (chosen.size() + members.size() > pop_size) {
        std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
        members.resize(pop_size - chosen.size());
      }
      for (std::size_t i : members) {
        chosen.push_back(next[i]);
        chosen_rank.push_back(front);
        chosen_crowd.push_back(d[i]);
      }
    }
    pop = std::move(chosen);
    rank = std::move(chosen_rank);
    crowd = std::move(chosen_crowd);
  }

  GeneticResult out;
  out.front = archive.sorted();
  const ParetoPoint& median = out.front[out.front.size() / 2];
  const ScheduleOption base{median.mean_fidelity, median.mean_turnaround, median.mean_utilization};
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.front.size(); ++i) {
    const ParetoPoint& p = out.front[i];
    const double s =
        score_pair(base, {p.mean_fidelity, p.mean_turnaround, p.mean_utilization}, options.c, options.beta).score;
    if (s > best) {
      best = s;
      out.selected = i;
    }
  }
  const std::vector<int>& pick = out.front[out.selected].assignment;
  for (std::size_t i = 0; i < len; ++i) {
    out.decisions.push_back(
        commit(units[i], units[i].choices[static_cast<std::size_t>(pick[i])], queues, now, "genetic", best));
  }
  return out;
}

ScheduleOption summarize(const std::vector<ScheduleDecision>& decisions) {
  ScheduleOption o;
  for (const ScheduleDecision& d : decisions) {
    o.f += d.predicted.f;
    o.t += d.predicted.t;
    o.u += d.predicted.u;
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, decisions.size()));
  return {o.f / n, o.t / n, o.u / n};
}

}  // namespace qos

namespace qos {

std::vector<JobArrival> generate_arrivals(const Workload& w) {
  if (w.rate_per_hour <= 0.0 || w.load_factor <= 0.0) {
    throw std::invalid_argument("arrival rate must be positive");
  }
  if (w.benchmarks.empty() || w.sizes.empty()) {
    throw std::invalid_argument("workload needs benchmarks and sizes");
  }
  Rng rng(w.seed);
  std::exponential_distribution<double> gap(w.rate_per_hour * w.load_factor / 3600.0);
  std::vector<JobArrival> out;
  const double horizon = w.hours * 3600.0;
  for (double t = gap(rng); t < horizon; t += gap(rng)) {
    JobArrival a;
    a.id = "j" + std::to_string(out.size());
    a.time = t;
    a.benchmark = w.benchmarks[rng() % w.benchmarks.size()];
    a.qubits = w.sizes[rng() % w.sizes.size()];
    out.push_back(std::move(a));
  }
  return out;
}

std::string_view to_string(SchedulingPolicy p) { return p == SchedulingPolicy::Formula ? "formula" : "genetic"; }

std::optional<SchedulingPolicy> scheduling_policy_from_string(std::string_view s) {
  if (s == "formula") {
    return SchedulingPolicy::Formula;
  }
  if (s == "genetic") {
    return SchedulingPolicy::Genetic;
  }
  return std::nullopt;
}

FarmConfig default_farm_config(int qpus) {
  FarmConfig c;
  for (int i = 0; i < qpus; ++i) {
    QpuTemplate t = falcon27_template("qpu" + std::to_string(i));
    // error scale from 0.8x to 1.25x the nominal device
    const double scale = qpus > 1 ? 0.8 * std::pow(1.25 / 0.8, static_cast<double>(i) / (qpus - 1)) : 1.0;
    t.baseline.gate_error_1q *= scale;
    t.baseline.gate_error_2q *= scale;
    t.baseline.readout_error *= scale;
    t.baseline.crosstalk_error *= scale;
    t.baseline.t2 /= scale;
    c.qpus.push_back(std::move(t));
  }
  return c;
}

namespace {

std::string program_key(const std::string& benchmark, int qubits) {
  return benchmark + ":" + std::to_string(qubits);
}

struct ProgramEval {
  Estimation estimate;
  TranspiledCircuit transpiled;
  double exec_time = 0.0;
  double fidelity = 0.0;
  bool estimated = false;
};

struct BundleEval {
  std::vector<double> fidelity;
  bool estimated = false;
};

using EvalKey = std::tuple<std::string, std::size_t, std::int64_t>;
using BundleKey = std::tuple<std::string, std::string, std::size_t, std::int64_t>;

}  // namespace

struct FarmSimulator::Cache {
  std::map<std::string, Circuit> programs;
  std::map<std::string, Distribution> ideal;
  std::map<std::int64_t, std::vector<QpuDescriptor>> farms;
  std::map<EvalKey, ProgramEval> evals;
  std::map<BundleKey, BundleEval> bundles;
};

FarmSimulator::FarmSimulator(FarmConfig config) : config_(std::move(config)), cache_(std::make_unique<Cache>()) {
  if (config_.qpus.empty()) {
    throw std::invalid_argument("empty QPU farm");
  }
}

FarmSimulator::~FarmSimulator() = default;

std::vector<QpuDescriptor> FarmSimulator::farm_at(std::int64_t cycle) const {
  std::vector<QpuDescriptor> farm;
  for (const QpuTemplate& t : config_.qpus) {
    farm.push_back(make_qpu(t, sample_calibration(t, cycle, config_.drift_sigma, config_.calibration_seed)));
  }
  return farm;
}

FarmMetrics FarmSimulator::run(const Workload& w, const FarmOptions& options) {
  Cache& cache = *cache_;
  SimulatorConfig sim_config;
  sim_config.qubit_cap = config_.simulation_cap;
  const std::vector<JobArrival> arrivals = generate_arrivals(w);
  std::vector<QpuQueue> queues;
  for (const QpuTemplate& t : config_.qpus) {
    queues.push_back({t.id, {}, 0.0, 0.0});
  }
  auto farm_for = [&](std::int64_t cycle) -> const std::vector<QpuDescriptor>& {
    auto it = cache.farms.find(cycle);
    if (it == cache.farms.end()) {
      it = cache.farms.emplace(cycle, farm_at(cycle)).first;
    }
    return it->second;
  };
  auto program = [&](const JobArrival& a) -> const Circuit& {
    const std::string key = program_key(a.benchmark, a.qubits);
    auto it = cache.programs.find(key);
    if (it == cache.programs.end()) {
      it = cache.programs.emplace(key, make_benchmark(a.benchmark, a.qubits, fnv1a(key))).first;
      cache.ideal.emplace(key, simulate_ideal(it->second));
    }
    return it->second;
  };

  // Fills evaluations for the given programs on every fitting QPU.
  auto ensure_evals = [&](const std::set<std::string>& keys, std::int64_t cycle) {
    const auto& farm = farm_for(cycle);
    std::vector<EvalKey> missing;
    for (const std::string& k : keys) {
      for (std::size_t q = 0; q < farm.size(); ++q) {
        if (cache.programs.at(k).num_qubits() <= farm[q].num_qubits && !cache.evals.count({k, q, cycle})) {
          missing.emplace_back(k, q, cycle);
        }
      }
    }
    std::vector<ProgramEval> fresh(missing.size());
    parallel_for(missing.size(), config_.workers, [&](std::size_t i) {
      const auto& [k, q, cyc] = missing[i];
      const Circuit& c = cache.programs.at(k);
      ProgramEval& e = fresh[i];
      e.transpiled = transpile(c, farm[q]);
      e.estimate = estimate_numerical(e.transpiled, farm[q]);
      e.exec_time = estimate_exec_time(e.transpiled.physical, farm[q], w.shots, options.exec);
      const std::uint64_t seed =
          derive_seed(config_.calibration_seed, fnv1a(k) ^ (q * 0x9E37U) ^ static_cast<std::uint64_t>(cyc));
      try {
        e.fidelity = hellinger_fidelity(
            simulate_noisy(e.transpiled.physical, farm[q], config_.simulation_shots, seed, sim_config),
            cache.ideal.at(k));
      } catch (const SimulationError&) {
        e.fidelity = e.estimate.fidelity_score;
        e.estimated = true;
      }
    });
    for (std::size_t i = 0; i < missing.size(); ++i) {
      cache.evals.emplace(missing[i], std::move(fresh[i]));
    }
  };

  FarmMetrics m;
  std::map<std::string, std::size_t> queue_index;
  for (std::size_t q = 0; q < queues.size(); ++q) {
    queue_index[queues[q].qpu_id] = q;
  }
  std::size_t next = 0;
  for (double now = options.dispatch_interval; next < arrivals.size(); now += options.dispatch_interval) {
    std::vector<const JobArrival*> batch;
    while (next < arrivals.size() && arrivals[next].time <= now) {
      batch.push_back(&arrivals[next++]);
    }
    if (batch.empty()) {
      continue;
    }
    const auto cycle = static_cast<std::int64_t>(std::floor(now / config_.calibration_period));
    const auto& farm = farm_for(cycle);
    std::set<std::string> keys;
    for (const JobArrival* a : batch) {
      program(*a);
      keys.insert(program_key(a->benchmark, a->qubits));
    }
    ensure_evals(keys, cycle);
    auto eval = [&](const JobArrival* a, std::size_t q) -> const ProgramEval& {
      return cache.evals.at({program_key(a->benchmark, a->qubits), q, cycle});
    };

    // unit -> member jobs, actual fidelities and flags
    struct UnitInfo {
      std::vector<const JobArrival*> jobs;
      std::vector<double> fidelity;  // per member, for the chosen QPU (solo: per queue)
      std::optional<Bundle> bundle;
    };
    std::vector<SchedulingUnit> units;
    std::vector<UnitInfo> info;
    auto add_solo = [&](const JobArrival* a) {
      SchedulingUnit u;
      u.id = a->id;
      for (std::size_t q = 0; q < farm.size(); ++q) {
        if (a->qubits > farm[q].num_qubits) {
          continue;
        }
        const ProgramEval& e = eval(a, q);
        u.choices.push_back({q, e.estimate.fidelity_score, e.exec_time,
                             static_cast<double>(a->qubits) / farm[q].num_qubits});
      }
      units.push_back(std::move(u));
      info.push_back({{a}, {}, std::nullopt});
    };

    if (options.multiprogramming && batch.size() > 1) {
      std::map<std::string, double> waits;
      for (const QpuQueue& q : queues) {
        waits[q.qpu_id] = q.waiting_time(now);
      }
      std::vector<PendingProgram> pending;
      std::map<std::string, const JobArrival*> by_id;
      for (const JobArrival* a : batch) {
        PendingProgram p;
        p.id = a->id;
        p.circuit = cache.programs.at(program_key(a->benchmark, a->qubits));
        for (std::size_t q = 0; q < farm.size(); ++q) {
          if (a->qubits <= farm[q].num_qubits) {
            p.estimations.push_back(eval(a, q).estimate);
          }
        }
        sort_estimations(p.estimations, waits);
        p.solo = eval(a, queue_index.at(p.estimations.front().qpu_id)).transpiled;
        by_id[a->id] = a;
        pending.push_back(std::move(p));
      }
      BundleOutcome outcome = try_bundle(pending, farm, options.bundle_policy, options.weights);
      for (Bundle& b : outcome.bundles) {
        const std::size_t q = queue_index.at(b.qpu_id);
        SchedulingUnit u;
        u.id = b.id;
        const double f = 0.5 * (b.bundled_fidelity[0] + b.bundled_fidelity[1]);
        u.choices.push_back({q, f, estimate_exec_time(b.physical.physical, farm[q], w.shots, options.exec),
                             b.utilization / 100.0});
        units.push_back(std::move(u));
        info.push_back({{by_id.at(b.members[0]), by_id.at(b.members[1])}, {}, std::move(b)});
      }
      for (const std::string& id : outcome.leftovers) {
        add_solo(by_id.at(id));
      }
    } else {
      for (const JobArrival* a : batch) {
        add_solo(a);
      }
    }

    std::vector<ScheduleDecision> decisions;
    if (options.policy == SchedulingPolicy::Formula) {
      decisions = schedule_formula(units, queues, now, options.c, options.beta);
    } else {
      // the formula placement seeds the first generation
      std::vector<QpuQueue> probe = queues;
      const auto formula = schedule_formula(units, probe, now, options.c, options.beta);
      std::vector<int> seed_assignment;
      for (std::size_t i = 0; i < units.size(); ++i) {
        for (std::size_t k = 0; k < units[i].choices.size(); ++k) {
          if (units[i].choices[k].queue == formula[i].queue) {
            seed_assignment.push_back(static_cast<int>(k));
            break;
          }
        }
      }
      GeneticOptions g;
      g.c = options.c;
      g.beta = options.beta;
      g.population = options.genetic_population;
      g.generations = options.genetic_generations;
      g.seed = derive_seed(w.seed, static_cast<std::uint64_t>(now));
      g.seeds = {seed_assignment};
      decisions = schedule_genetic(units, queues, now, g).decisions;
    }

    for (std::size_t i = 0; i < decisions.size(); ++i) {
      const ScheduleDecision& d = decisions[i];
      const UnitInfo& ui = info[i];
      const double exec = d.predicted.t - d.wait;
      std::vector<double> fid;
      bool estimated = false;
      if (ui.bundle) {
        const Bundle& b = *ui.bundle;
        const BundleKey key{program_key(ui.jobs[0]->benchmark, ui.jobs[0]->qubits),
                            program_key(ui.jobs[1]->benchmark, ui.jobs[1]->qubits), d.queue, cycle};
        auto it = cache.bundles.find(key);
        if (it == cache.bundles.end()) {
          BundleEval be;
          const std::uint64_t seed =
              derive_seed(config_.calibration_seed, fnv1a(b.id) ^ static_cast<std::uint64_t>(cycle));
          try {
            const auto parts =
                unbundle(simulate_noisy(b.physical.physical, farm[d.queue], config_.simulation_shots, seed, sim_config),
                         b.merged.record);
            for (std::size_t k = 0; k < 2; ++k) {
              be.fidelity.push_back(hellinger_fidelity(
                  parts[k], cache.ideal.at(program_key(ui.jobs[k]->benchmark, ui.jobs[k]->qubits))));
            }
          } catch (const SimulationError&) {
            be.fidelity = b.bundled_fidelity;
            be.estimated = true;
          }
          it = cache.bundles.emplace(key, std::move(be)).first;
        }
        fid = it->second.fidelity;
        estimated = it->second.estimated;
      } else {
        const ProgramEval& e = eval(ui.jobs[0], d.queue);
        fid = {e.fidelity};
        estimated = e.estimated;
      }
      for (std::size_t k = 0; k < ui.jobs.size(); ++k) {
        JobRecord r;
        r.id = ui.jobs[k]->id;
        r.qpu_id = d.qpu_id;
        r.arrival = ui.jobs[k]->time;
        r.start = now + d.wait;
        r.end = r.start + exec;
        r.fidelity = fid[k];
        r.bundled = ui.bundle.has_value();
        r.estimated = estimated;
        m.records.push_back(std::move(r));
      }
    }
  }

  std::sort(m.records.begin(), m.records.end(), [](const JobRecord& a, const JobRecord& b) {
    return std::tie(a.arrival, a.id) < std::tie(b.arrival, b.id);
  });
  m.jobs = static_cast<int>(m.records.size());
  m.horizon = w.hours * 3600.0;
  std::vector<double> waits;
  std::map<std::string, int> per_qpu;
  for (const JobRecord& r : m.records) {
    m.mean_fidelity += r.fidelity;
    waits.push_back(r.start - r.arrival);
    m.horizon = std::max(m.horizon, r.end);
    m.bundled_jobs += r.bundled ? 1 : 0;
    m.estimated_jobs += r.estimated ? 1 : 0;
    per_qpu[r.qpu_id]++;
  }
  if (!waits.empty()) {
    m.mean_fidelity /= static_cast<double>(waits.size());
    m.mean_wait = std::accumulate(waits.begin(), waits.end(), 0.0) / static_cast<double>(waits.size());
    std::vector<double> sorted = waits;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size()))) - 1;
    m.p95_wait = sorted[std::min(idx, sorted.size() - 1)];
  }
  double hi = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  for (const QpuQueue& q : queues) {
    m.qpus.push_back({q.qpu_id, q.busy_time, m.horizon > 0.0 ? q.busy_time / m.horizon : 0.0, per_qpu[q.qpu_id]});
    hi = std::max(hi, q.busy_time);
    lo = std::min(lo, q.busy_time);
  }
  m.max_busy_difference = hi > 0.0 ? (hi - lo) / hi : 0.0;
  return m;
}

}  // namespace qos
