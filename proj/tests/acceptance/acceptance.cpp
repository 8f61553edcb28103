#include "pipeline.hpp"
#include "support.hpp"

#include "qos/analyzer.hpp"
#include "qos/benchmarks.hpp"
#include "qos/estimator.hpp"
#include "qos/multiprogrammer.hpp"
#include "qos/optimizer.hpp"
#include "qos/scheduler.hpp"
#include "qos/transpiler.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstring>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace qos;

namespace {

struct Context {
  std::uint64_t seed = 1;
  int workers = 1;
  bool quick = false;  // reduced sizes for the determinism reruns
};

// Order-sensitive hash of every number a criterion produced.
class Fingerprint {
public:
  void add(double x) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &x, sizeof bits);
    h_ = splitmix64(h_ ^ bits);
  }
  void add(const Distribution& d) {
    for (const auto& [b, p] : d.probabilities()) {
      add(static_cast<double>(b));
      add(p);
    }
  }
  void add(const std::string& s) { h_ = splitmix64(h_ ^ fnv1a(s)); }
  std::uint64_t value() const { return h_; }

private:
  std::uint64_t h_ = 0x5157;
};

struct Outcome {
  bool pass = false;
  std::string detail;
  std::uint64_t fingerprint = 0;
};

std::string fmt(double x, int precision = 3) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

std::vector<int> two_qubit_gates(const Circuit& c) {
  std::vector<int> out;
  for (std::size_t i = 0; i < c.gates().size(); ++i) {
    if (c.gates()[i].qubits.size() == 2) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

Qernel frontend(const Circuit& c) { return run_frontend(c, default_passes(), c.name()); }

Qernel with_circuit(const Circuit& source, Circuit working) {
  Qernel q = frontend(source);
  q.circuit = std::move(working);
  q.children = split_fragments(q.circuit, q.id);
  return q;
}

// Random block on the lower half, one bridging CX, random block on the upper
// half: the lower wires finish early and can host the upper ones.
Circuit staggered_circuit(Rng& rng, int n) {
  const int h = n / 2;
  Circuit c(n, "staggered");
  const Circuit lower = test::random_circuit(rng, h, 2, false);
  for (const Gate& g : lower.gates()) {
    c.add(g);
  }
  c.add(Gate::cx(h - 1, h));
  const Circuit upper = test::random_circuit(rng, n - h, 2, false);
  for (Gate g : upper.gates()) {
    for (int& q : g.qubits) {
      q += h;
    }
    c.add(g);
  }
  c.measure_all();
  return c;
}

Circuit random_qaoa(Rng& rng, int nodes) {
  const Graph g = random_regular_graph(nodes, 3, rng());
  std::vector<bool> mixer(static_cast<std::size_t>(nodes), true);
  mixer[0] = false;
  return qaoa_maxcut(nodes, g, 0.2 + uniform01(rng), 0.2 + uniform01(rng), mixer);
}

// ---------------------------------------------------------------------------

Outcome cut_knit_equivalence(const Context& ctx) {
  const int circuits = ctx.quick ? 10 : 100;
  Rng rng(derive_seed(ctx.seed, 1));
  Fingerprint fp;
  double worst = 0.0;
  int cases = 0;
  int reused = 0;
  const KnitOptions ko{.partitions = ctx.workers, .workers = ctx.workers};
  auto check = [&](const Qernel& q, const Circuit& original) {
    const KnitResult r = test::exact_knit(q, ko);
    const double tv = total_variation(r.distribution, simulate_ideal(original));
    worst = std::max(worst, tv);
    fp.add(r.distribution);
    ++cases;
  };
  for (int i = 0; i < circuits; ++i) {
    const int n = 4 + i % 7;
    Circuit c;
    do {
      c = test::random_circuit(rng, n, 2 + static_cast<int>(rng() % 3));
    } while (circuit_depth(c) > 12 || two_qubit_gates(c).size() < 2);
    const auto twoq = two_qubit_gates(c);
    const int g1 = twoq[rng() % twoq.size()];
    int g2 = twoq[rng() % twoq.size()];
    while (g2 == g1) {
      g2 = twoq[rng() % twoq.size()];
    }

    std::vector<VirtualGateRecord> rec;
    Qernel one = with_circuit(c, apply_gate_cuts(c, {g1}, rec));
    one.virtual_gate_records = rec;
    check(one, c);

    rec.clear();
    Qernel two = with_circuit(c, apply_gate_cuts(c, {std::min(g1, g2), std::max(g1, g2)}, rec));
    two.virtual_gate_records = rec;
    check(two, c);

    // wire cut at an interior point of a wire with at least two operations
    int q = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    auto ops_on = [&](int wire) {
      int ops = 0;
      for (const Gate& g : c.gates()) {
        ops += std::count(g.qubits.begin(), g.qubits.end(), wire) > 0 ? 1 : 0;
      }
      return ops;
    };
    while (ops_on(q) < 2) {
      q = (q + 1) % n;
    }
    const int position = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(ops_on(q) - 1));
    rec.clear();
    Qernel wire = with_circuit(c, apply_wire_cuts(c, {{q, position}}, rec));
    wire.virtual_gate_records = rec;
    check(wire, c);

    const Circuit qaoa = random_qaoa(rng, 4 + 2 * (i % 4));
    rec.clear();
    Qernel frozen = with_circuit(qaoa, apply_freeze(qaoa, 0, rec));
    frozen.virtual_gate_records = rec;
    check(frozen, qaoa);

    const Circuit st = staggered_circuit(rng, n);
    const Qernel reuse = qubit_reuse_pass(frontend(st), 1);
    reused += max_fragment_width(reuse) < n ? 1 : 0;
    check(reuse, st);
  }
  Outcome o;
  o.pass = worst <= 1e-6;
  o.detail = "max TV " + fmt(worst) + " over " + std::to_string(cases) + " knits (" + std::to_string(reused) +
             " of " + std::to_string(circuits) + " reuse cases narrowed)";
  o.fingerprint = fp.value();
  return o;
}

Outcome isq_counts(const Context&) {
  Fingerprint fp;
  bool ok = true;
  std::string counts;
  const Circuit chain = ghz(8);
  const Graph g = random_regular_graph(8, 3, 5);
  std::vector<bool> mixer(8, true);
  mixer[0] = mixer[1] = mixer[2] = false;
  const Circuit qaoa = qaoa_maxcut(8, g, 0.4, 0.3, mixer);
  for (int k = 0; k <= 3; ++k) {
    std::vector<VirtualGateRecord> rec;
    std::vector<int> gates;
    std::vector<WirePoint> points;
    for (int i = 0; i < k; ++i) {
      gates.push_back(2 + 2 * i);  // CX(1,2), CX(3,4), CX(5,6)
      points.push_back({1 + 2 * i, 1});
    }
    Qernel gq = with_circuit(chain, apply_gate_cuts(chain, gates, rec));
    gq.virtual_gate_records = rec;
    rec.clear();
    Qernel wq = with_circuit(chain, apply_wire_cuts(chain, points, rec));
    wq.virtual_gate_records = rec;
    rec.clear();
    Circuit f = qaoa;
    for (int i = 0; i < k; ++i) {
      f = apply_freeze(f, i, rec);
    }
    Qernel fq = with_circuit(qaoa, f);
    fq.virtual_gate_records = rec;

    const std::size_t n_gate = instantiate(gq).num_isqs();
    const std::size_t n_wire = instantiate(wq).num_isqs();
    const std::size_t n_freeze = instantiate(fq).num_isqs();
    auto pow = [](std::size_t b, int e) {
      std::size_t r = 1;
      for (int i = 0; i < e; ++i) {
        r *= b;
      }
      return r;
    };
    ok = ok && n_gate == pow(6, k) && n_wire == pow(8, k) && n_freeze == pow(2, k);
    counts += (k ? " " : "") + std::string("k=") + std::to_string(k) + ":" + std::to_string(n_gate) + "/" +
              std::to_string(n_wire) + "/" + std::to_string(n_freeze);
    fp.add(static_cast<double>(n_gate * 1000000 + n_wire * 1000 + n_freeze));
  }
  return {ok, "gate/wire/freeze leaves " + counts, fp.value()};
}

Outcome pass_sequence(const Context&) {
  const Qernel q = optimize(frontend(hub_qaoa()), {.size_target = 2, .budget = 3});
  auto named = [&](const std::string& n) {
    std::vector<const PassReport*> out;
    for (const PassReport& r : q.reports) {
      if (r.name == n) {
        out.push_back(&r);
      }
    }
    return out;
  };
  Fingerprint fp;
  bool ok = true;
  std::string seq;
  const auto freeze = named("qubit_freezing");
  ok = ok && freeze.size() == 1;
  if (ok) {
    const auto& after = freeze[0]->outputs.at("after");
    ok = freeze[0]->outputs.at("qubit") == 3 && after.at("active_qubits") == 6 && after.at("interactions") == 6;
    seq += "freeze q" + freeze[0]->outputs.at("qubit").dump() + " -> (" + after.at("active_qubits").dump() + "," +
           after.at("interactions").dump() + ")";
  }
  const auto cut = named("gate_cutting");
  ok = ok && cut.size() == 1 && cut[0]->outputs.at("cuts") == 2 && named("wire_cutting").empty();
  if (ok) {
    seq += "; " + cut[0]->outputs.at("cuts").dump() + " gate cuts ->";
    ok = cut[0]->outputs.at("fragments").size() == 2;
    for (const auto& f : cut[0]->outputs.at("fragments")) {
      ok = ok && f.at("qubits") == 3 && f.at("interactions") == 4;
      seq += " (" + f.at("qubits").dump() + "," + f.at("interactions").dump() + ")";
    }
  }
  const auto reuse = named("qubit_reuse");
  ok = ok && reuse.size() == 1;
  if (ok) {
    seq += "; reuse ->";
    for (const auto& f : reuse[0]->outputs.at("fragments")) {
      ok = ok && f.at("qubits") == 2 && f.at("interactions") == 4;
      seq += " (" + f.at("qubits").dump() + "," + f.at("interactions").dump() + ")";
    }
  }
  ok = ok && q.children.size() == 2 && max_fragment_width(q) == 2;
  fp.add(seq);
  return {ok, seq, fp.value()};
}

Outcome estimator_ranking(const Context& ctx) {
  Fingerprint fp;
  SimulatorConfig sc;
  sc.workers = ctx.workers;

  // (a) rank correlation against noisy simulation
  const int pairs = ctx.quick ? 10 : 50;
  Rng rng(derive_seed(ctx.seed, 4));
  const QpuTemplate tmpl = falcon27_template("f");
  std::vector<double> est;
  std::vector<double> sim;
  for (int t = 0; t < pairs; ++t) {
    const QpuDescriptor qpu = make_qpu(tmpl, sample_calibration(tmpl, t, 0.5, rng()));
    const Circuit c = test::random_circuit(rng, 2 + t % 6, 2 + t % 5);
    const TranspiledCircuit tc = transpile(c, qpu);
    est.push_back(estimate_numerical(tc, qpu).fidelity_score);
    sim.push_back(hellinger_fidelity(simulate_noisy(tc.physical, qpu, 4096, rng(), sc), simulate_ideal(c)));
    fp.add(est.back());
    fp.add(sim.back());
  }
  const double rho = test::spearman(est, sim);

  // (b) estimator pick vs the day's on-average best QPU
  FarmConfig fc = default_farm_config(6);
  fc.calibration_seed = derive_seed(ctx.seed, 40);
  const FarmSimulator farm_source(fc);
  const std::vector<std::string> names{"ghz", "qaoa", "vqe", "wstate", "random"};
  const int days = ctx.quick ? 1 : 5;
  const int per_day = 10;
  int wins = 0;
  int trials = 0;
  int same = 0;
  for (int day = 0; day < days; ++day) {
    const std::vector<QpuDescriptor> farm = farm_source.farm_at(day);
    std::vector<Circuit> circuits;
    std::vector<std::vector<double>> f(per_day, std::vector<double>(farm.size()));
    std::vector<double> mean(farm.size(), 0.0);
    for (int i = 0; i < per_day; ++i) {
      circuits.push_back(make_benchmark(names[static_cast<std::size_t>(i) % names.size()], 4 + 2 * ((i + day) % 3),
                                        derive_seed(ctx.seed, 400 + 16 * day + i)));
      const Distribution ideal = simulate_ideal(circuits.back());
      for (std::size_t q = 0; q < farm.size(); ++q) {
        const TranspiledCircuit tc = transpile(circuits.back(), farm[q]);
        f[i][q] = hellinger_fidelity(
            simulate_noisy(tc.physical, farm[q], 2000, derive_seed(ctx.seed, 1000 * day + 10 * i + q), sc), ideal);
        mean[q] += f[i][q] / per_day;
        fp.add(f[i][q]);
      }
    }
    const std::size_t best = static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
    RankOptions ro;
    ro.workers = ctx.workers;
    for (int i = 0; i < per_day; ++i) {
      const std::string pick = rank_assignments(circuits[static_cast<std::size_t>(i)], farm, ro).front().qpu_id;
      std::size_t p = 0;
      while (farm[p].id != pick) {
        ++p;
      }
      fp.add(pick);
      wins += f[i][p] >= f[i][best] ? 1 : 0;
      same += p == best ? 1 : 0;
      ++trials;
    }
  }
  const double share = static_cast<double>(wins) / trials;
  Outcome o;
  o.pass = rho >= 0.8 && share >= 0.8;
  o.detail = "spearman " + fmt(rho) + " over " + std::to_string(pairs) + " pairs; estimator pick >= average-best in " +
             std::to_string(wins) + "/" + std::to_string(trials) + " trials (" + std::to_string(same) +
             " picked the same QPU)";
  o.fingerprint = fp.value();
  return o;
}

Outcome multiprogramming(const Context& ctx) {
  Fingerprint fp;
  const double u66 = effective_utilization({{10, 3}, {10, 1}}, 20);
  const bool worked = std::abs(u66 - 200.0 / 3.0) < 1e-12 && static_cast<int>(u66) == 66;

  SimulatorConfig sc;
  sc.workers = ctx.workers;
  const std::vector<std::string> names{"ghz", "qaoa", "vqe", "wstate"};
  // The suite fixes the utilization level, so the compatibility threshold is
  // not applied; partners are still ordered by compatibility and re-evaluated.
  CompatibilityWeights target;
  target.threshold = 0.0;
  const int trials = ctx.quick ? 1 : 3;
  const int pool_size = 6;
  int estimated = 0;
  double bundled_sum = 0.0;
  double solo_of_bundled = 0.0;
  int bundled_members = 0;
  double qos_total = 0.0;
  double naive_total = 0.0;
  int programs = 0;
  std::string levels;
  for (const int m : {4, 8, 12}) {
    double level_qos = 0.0;
    double level_naive = 0.0;
    double level_util_qos = 0.0;
    double level_util_naive = 0.0;
    int level_bundles = 0;
    int level_programs = 0;
    for (int t = 0; t < (ctx.quick && m == 12 ? 0 : trials); ++t) {
      const std::vector<QpuDescriptor> farm = make_falcon_farm(1, 0.3, derive_seed(ctx.seed, 500 + 10 * m + t));
      const QpuDescriptor& qpu = farm.front();
      std::vector<PendingProgram> pool;
      std::map<std::string, Distribution> ideal;
      std::map<std::string, double> solo;
      for (int i = 0; i < pool_size; ++i) {
        const std::string name = names[static_cast<std::size_t>(i + t) % names.size()];
        const Circuit c = make_benchmark(name, m, derive_seed(ctx.seed, 5000 + 100 * m + 10 * t + i));
        const std::string id = name + "-" + std::to_string(i);
        pool.push_back(prepare_program(id, c, farm));
        ideal.emplace(id, simulate_ideal(c));
        solo[id] = hellinger_fidelity(
            simulate_noisy(pool.back().solo.physical, qpu, 2000, derive_seed(ctx.seed, fnv1a(id) + m + t), sc),
            ideal.at(id));
      }
      auto delivered = [&](const BundleOutcome& o, double& util) {
        std::map<std::string, double> f;
        double busy = 0.0;
        for (const Bundle& b : o.bundles) {
          std::vector<double> got;
          try {
            const auto parts = unbundle(
                simulate_noisy(b.physical.physical, qpu, 2000, derive_seed(ctx.seed, fnv1a(b.id) + m + t), sc),
                b.merged.record);
            for (std::size_t k = 0; k < 2; ++k) {
              got.push_back(hellinger_fidelity(parts[k], ideal.at(b.members[k])));
            }
          } catch (const SimulationError&) {
            // Too wide to simulate: scale the simulated solo fidelity by the
            // estimated bundling loss so every value comes from simulation.
            got.clear();
            for (std::size_t k = 0; k < 2; ++k) {
              got.push_back(solo.at(b.members[k]) * b.bundled_fidelity[k] / b.solo_fidelity[k]);
            }
            ++estimated;
          }
          for (std::size_t k = 0; k < 2; ++k) {
            f[b.members[k]] = got[k];
          }
          busy += 2.0 * m;
        }
        for (const std::string& id : o.leftovers) {
          f[id] = solo.at(id);
          busy += m;
        }
        util += busy / (qpu.num_qubits * static_cast<double>(o.bundles.size() + o.leftovers.size()));
        return f;
      };
      const BundleOutcome qos = try_bundle(pool, farm, BundlePolicy::Reevaluate, target);
      const BundleOutcome naive = naive_bundle(pool, farm);
      const auto fq = delivered(qos, level_util_qos);
      const auto fn = delivered(naive, level_util_naive);
      for (const Bundle& b : qos.bundles) {
        for (const std::string& id : b.members) {
          bundled_sum += fq.at(id);
          solo_of_bundled += solo.at(id);
          ++bundled_members;
        }
        fp.add(b.id);
      }
      level_bundles += static_cast<int>(qos.bundles.size());
      for (const PendingProgram& p : pool) {
        level_qos += fq.at(p.id);
        level_naive += fn.at(p.id);
        fp.add(fq.at(p.id));
        fp.add(fn.at(p.id));
        ++level_programs;
      }
    }
    if (level_programs == 0) {
      continue;
    }
    qos_total += level_qos;
    naive_total += level_naive;
    programs += level_programs;
    const int pct = static_cast<int>(std::lround(200.0 * m / 27.0));
    levels += " " + std::to_string(pct) + "%: qos " + fmt(level_qos / level_programs) + " naive " +
              fmt(level_naive / level_programs) + " bundles " + std::to_string(level_bundles) + " util " +
              fmt(100.0 * level_util_qos / (ctx.quick ? 1 : trials), 2) + "/" +
              fmt(100.0 * level_util_naive / (ctx.quick ? 1 : trials), 2) + "%;";
  }
  const double penalty = bundled_members > 0 ? 1.0 - bundled_sum / solo_of_bundled : 1.0;
  const double qos_mean = qos_total / programs;
  const double naive_mean = naive_total / programs;
  Outcome o;
  o.pass = worked && bundled_members > 0 && penalty < 0.10 && qos_mean > naive_mean;
  o.detail = "u_eff(10q x3d, 10q x d on 20) = " + fmt(u66, 6) + "%; bundled penalty " + fmt(100.0 * penalty, 3) +
             "% over " + std::to_string(bundled_members) + " members; mean fidelity qos " + fmt(qos_mean) +
             " vs naive " + fmt(naive_mean) + ";" + levels + " " + std::to_string(estimated) +
             " bundles too wide to simulate scaled by estimated loss";
  o.fingerprint = fp.value();
  return o;
}

Outcome scheduler_tradeoff(const Context& ctx) {
  FarmConfig fc = default_farm_config(6);
  fc.workers = ctx.workers;
  FarmSimulator sim(fc);
  Workload w;
  w.hours = ctx.quick ? 0.1 : 2.0;
  w.load_factor = 1.0;
  w.seed = derive_seed(ctx.seed, 6);
  Fingerprint fp;
  std::vector<double> fid;
  std::vector<double> wait;
  double imbalance = 0.0;
  for (int i = 0; i <= 10; ++i) {
    FarmOptions o;
    o.c = i / 10.0;
    const FarmMetrics m = sim.run(w, o);
    fid.push_back(m.mean_fidelity);
    wait.push_back(m.mean_wait);
    if (i == 5) {
      imbalance = m.max_busy_difference;
    }
    fp.add(m.mean_fidelity);
    fp.add(m.mean_wait);
    fp.add(m.max_busy_difference);
  }
  int fid_violations = 0;
  int wait_violations = 0;
  for (std::size_t i = 1; i < fid.size(); ++i) {
    fid_violations += fid[i] < fid[i - 1] ? 1 : 0;
    wait_violations += wait[i] < wait[i - 1] ? 1 : 0;
  }
  const double ratio = wait[10] / std::max(wait[5], 1e-9);
  Outcome o;
  o.pass = fid_violations <= 1 && wait_violations <= 1 && ratio >= 3.0 && imbalance <= 0.25;
  o.detail = "fidelity " + fmt(fid.front()) + "->" + fmt(fid.back()) + " (" + std::to_string(fid_violations) +
             " drops), wait " + fmt(wait.front(), 4) + "s->" + fmt(wait.back(), 5) + "s (" +
             std::to_string(wait_violations) + " drops), wait(c=1)/wait(c=0.5) " + fmt(ratio) +
             ", busy-time imbalance at c=0.5 " + fmt(100.0 * imbalance) + "%";
  o.fingerprint = fp.value();
  return o;
}

std::set<std::vector<int>> exhaustive_front(const std::vector<SchedulingUnit>& units,
                                            const std::vector<QpuQueue>& queues) {
  std::vector<ParetoPoint> all;
  std::vector<int> a(units.size(), 0);
  while (true) {
    all.push_back(evaluate_assignment(units, queues, 0.0, a));
    std::size_t i = 0;
    while (i < a.size() && ++a[i] == static_cast<int>(units[i].choices.size())) {
      a[i++] = 0;
    }
    if (i == a.size()) {
      break;
    }
  }
  std::set<std::vector<int>> front;
  for (const ParetoPoint& p : all) {
    bool dominated = false;
    for (const ParetoPoint& q : all) {
      dominated = dominated || (q.mean_fidelity >= p.mean_fidelity && q.mean_wait <= p.mean_wait &&
                                (q.mean_fidelity > p.mean_fidelity || q.mean_wait < p.mean_wait));
    }
    if (!dominated) {
      front.insert(p.assignment);
    }
  }
  return front;
}

Outcome genetic_policy(const Context& ctx) {
  Fingerprint fp;
  Rng rng(derive_seed(ctx.seed, 7));
  const int batches = ctx.quick ? 10 : 60;
  int exact = 0;
  for (int b = 0; b < batches; ++b) {
    const int nu = 1 + b % 4;
    const int nq = 1 + (b / 4) % 3;
    std::vector<SchedulingUnit> units;
    for (int u = 0; u < nu; ++u) {
      SchedulingUnit unit{"u" + std::to_string(u), {}};
      for (int q = 0; q < nq; ++q) {
        unit.choices.push_back({static_cast<std::size_t>(q), 0.5 + 0.5 * uniform01(rng), 5.0 + 50.0 * uniform01(rng),
                                0.1 + 0.9 * uniform01(rng)});
      }
      units.push_back(unit);
    }
    std::vector<QpuQueue> queues;
    for (int q = 0; q < nq; ++q) {
      queues.push_back({"q" + std::to_string(q), {}, 100.0 * uniform01(rng), 0.0});
    }
    auto work = queues;
    GeneticOptions g;
    g.seed = derive_seed(ctx.seed, 700 + b);
    const GeneticResult r = schedule_genetic(units, work, 0.0, g);
    std::set<std::vector<int>> found;
    for (const ParetoPoint& p : r.front) {
      found.insert(p.assignment);
      fp.add(p.mean_fidelity);
    }
    exact += found == exhaustive_front(units, queues) ? 1 : 0;
  }

  // Dispatch rounds drawn from the farm workload: each arrival is ranked on
  // the farm and the queues start with a random backlog.
  FarmConfig fc = default_farm_config(6);
  const std::vector<QpuDescriptor> farm = FarmSimulator(fc).farm_at(0);
  const ExecModel em;
  const int seeds = ctx.quick ? 3 : 20;
  int better = 0;
  std::map<std::string, std::vector<Estimation>> ranked;
  for (int s = 0; s < seeds; ++s) {
    Workload w;
    w.seed = derive_seed(ctx.seed, 7000 + s);
    w.hours = 0.01;
    const std::vector<JobArrival> arrivals = generate_arrivals(w);
    std::vector<SchedulingUnit> units;
    for (const JobArrival& a : arrivals) {
      const std::string key = a.benchmark + ":" + std::to_string(a.qubits);
      if (!ranked.count(key)) {
        ranked[key] = rank_assignments(make_benchmark(a.benchmark, a.qubits, fnv1a(key)), farm);
      }
      SchedulingUnit u{a.id, {}};
      for (const Estimation& e : ranked.at(key)) {
        std::size_t q = 0;
        while (farm[q].id != e.qpu_id) {
          ++q;
        }
        u.choices.push_back({q, e.fidelity_score,
                             em.job_overhead + w.shots * (e.estimated_exec_time + em.shot_overhead),
                             static_cast<double>(a.qubits) / farm[q].num_qubits});
      }
      units.push_back(u);
    }
    Rng backlog(derive_seed(ctx.seed, 7100 + s));
    std::vector<QpuQueue> queues;
    for (const QpuDescriptor& q : farm) {
      queues.push_back({q.id, {}, 300.0 * uniform01(backlog), 0.0});
    }
    auto fq = queues;
    auto gq = queues;
    const ScheduleOption formula = summarize(schedule_formula(units, fq, 0.0));
    GeneticOptions g;
    g.seed = derive_seed(ctx.seed, 7200 + s);
    const ScheduleOption genetic = summarize(schedule_genetic(units, gq, 0.0, g).decisions);
    better += score_pair(formula, genetic).score >= 0.0 ? 1 : 0;
    fp.add(genetic.f);
    fp.add(genetic.t);
  }
  Outcome o;
  o.pass = exact == batches && better >= 0.7 * seeds;
  o.detail = "front equals exhaustive front in " + std::to_string(exact) + "/" + std::to_string(batches) +
             " batches; genetic score >= formula in " + std::to_string(better) + "/" + std::to_string(seeds) +
             " seeds";
  o.fingerprint = fp.value();
  return o;
}

Outcome depth_reduction(const Context& ctx) {
  const QpuDescriptor qpu = make_falcon_farm(1, 0.3, derive_seed(ctx.seed, 9)).front();
  Fingerprint fp;
  bool ok = true;
  std::string rows;
  const std::vector<int> sizes = ctx.quick ? std::vector<int>{12} : std::vector<int>{12, 14, 16};
  double depth_ratio = 0.0;
  double cx_ratio = 0.0;
  int cases = 0;
  for (const std::string name : {"ghz", "qaoa", "vqe", "wstate"}) {
    for (const int n : sizes) {
      const Circuit c = make_benchmark(name, n, derive_seed(ctx.seed, 90 + n));
      const TranspiledCircuit base = transpile(c, qpu);
      const int base_depth = circuit_depth(base.physical);
      const int base_cx = base.physical.count(GateKind::CX);
      const Qernel q = optimize(frontend(c), {.size_target = n / 2, .budget = 3});
      int depth = 0;
      int cx = 0;
      for (const Variant& v : instantiate(q).variants) {
        const TranspiledCircuit t = transpile(v.circuit, qpu);
        depth = std::max(depth, circuit_depth(t.physical));
        cx = std::max(cx, t.physical.count(GateKind::CX));
      }
      const bool lower = depth < base_depth && cx < base_cx;
      ok = ok && lower;
      depth_ratio += 1.0 - static_cast<double>(depth) / base_depth;
      cx_ratio += 1.0 - static_cast<double>(cx) / base_cx;
      ++cases;
      if (!lower) {
        rows += " " + name + std::to_string(n) + " depth " + std::to_string(depth) + "/" + std::to_string(base_depth) +
                " cx " + std::to_string(cx) + "/" + std::to_string(base_cx) + ";";
      }
      fp.add(static_cast<double>(depth));
      fp.add(static_cast<double>(cx));
    }
  }
  Outcome o;
  o.pass = ok;
  o.detail = std::to_string(cases) + " circuits, mean depth reduction " + fmt(100.0 * depth_ratio / cases) +
             "%, mean CNOT reduction " + fmt(100.0 * cx_ratio / cases) + "%" +
             (rows.empty() ? std::string() : "; not lower:" + rows);
  o.fingerprint = fp.value();
  return o;
}

using Criterion = std::function<Outcome(const Context&)>;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::uint64_t seed = 2024;
  std::vector<int> only;
  std::vector<int> allowed;
  app.add_option("--seed", seed, "Root seed")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria (1-9)");
  app.add_option("--allow-fail", allowed, "Criteria whose failure does not affect the exit code");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, Criterion>> criteria{
      {"cut-knit oracle equivalence", cut_knit_equivalence},
      {"ISQ counts", isq_counts},
      {"pass sequence of the 7-qubit QAOA instance", pass_sequence},
      {"estimator ranking", estimator_ranking},
      {"multi-programming", multiprogramming},
      {"scheduler tradeoff", scheduler_tradeoff},
      {"genetic policy", genetic_policy},
  };
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  auto counts = [&](int id) { return std::find(allowed.begin(), allowed.end(), id) == allowed.end(); };
  auto timed = [](const Criterion& c, const Context& ctx, double& seconds) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = c(ctx);
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return o;
  };
  auto report = [](int id, const std::string& name, const Outcome& o, double seconds) {
    std::cout << "C" << id << ' ' << (o.pass ? "PASS" : "FAIL") << ' ' << name << ": " << o.detail << " ["
              << fmt(seconds, 3) << "s]" << std::endl;
  };

  bool all = true;
  const Context base{seed, 1, false};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted(id)) {
      continue;
    }
    double seconds = 0.0;
    const Outcome o = timed(criteria[i].second, base, seconds);
    report(id, criteria[i].first, o, seconds);
    all = all && (o.pass || !counts(id));
  }

  if (wanted(8)) {
    // Every criterion in reduced form (plus depth reduction), rerun with
    // 1, 2, 4 and 8 workers and twice with the same seed.
    std::vector<Criterion> all_criteria;
    for (const auto& c : criteria) {
      all_criteria.push_back(c.second);
    }
    all_criteria.push_back(depth_reduction);
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> mismatched;
    for (std::size_t i = 0; i < all_criteria.size(); ++i) {
      const std::uint64_t ref = all_criteria[i]({seed, 1, true}).fingerprint;
      bool same = all_criteria[i]({seed, 1, true}).fingerprint == ref;
      for (int w : {2, 4, 8}) {
        same = same && all_criteria[i]({seed, w, true}).fingerprint == ref;
      }
      if (!same) {
        mismatched.push_back("C" + std::to_string(i < criteria.size() ? i + 1 : 9));
      }
    }
    Outcome o;
    o.pass = mismatched.empty();
    o.detail = o.pass ? "criteria 1-7 and 9 bit-identical across 1, 2, 4, 8 workers and repeated runs" : "differs:";
    for (const std::string& m : mismatched) {
      o.detail += " " + m;
    }
    report(8, "determinism", o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    all = all && (o.pass || !counts(8));
  }

  if (wanted(9)) {
    double seconds = 0.0;
    const Outcome o = timed(depth_reduction, base, seconds);
    report(9, "depth and CNOT reduction", o, seconds);
    all = all && (o.pass || !counts(9));
  }
  return all ? 0 : 1;
}
