#include "qos/analyzer.hpp"
#include "qos/estimator.hpp"
#include "qos/knitter.hpp"
#include "qos/optimizer.hpp"
#include "qos/qernel.hpp"
#include "qos/random.hpp"
#include "qos/scheduler.hpp"
#include "qos/service.hpp"
#include "qos/simulator.hpp"
#include "qos/transpiler.hpp"
#include "qos/virtualizer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

using namespace qos;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string config;
  std::string farm;
  std::string run_dir = "qos-run";
};

json load_config(const Globals& g) {
  if (g.config.empty()) {
    return json::object();
  }
  std::ifstream in(g.config);
  if (!in) {
    throw std::runtime_error("cannot read config '" + g.config + "'");
  }
  return json::parse(in);
}

std::vector<QpuDescriptor> load_farm_or_default(const Globals& g) {
  if (!g.farm.empty()) {
    return load_farm(g.farm);
  }
  return FarmSimulator(default_farm_config()).farm_at(0);
}

FarmOptions farm_options(const json& cfg) {
  FarmOptions o;
  o.c = cfg.value("c", o.c);
  o.beta = cfg.value("beta", o.beta);
  o.multiprogramming = cfg.value("multiprogramming", o.multiprogramming);
  if (cfg.contains("policy")) {
    const auto p = scheduling_policy_from_string(cfg.at("policy").get<std::string>());
    if (!p) {
      throw std::invalid_argument("unknown scheduling policy");
    }
    o.policy = *p;
  }
  if (cfg.contains("bundle_policy")) {
    const auto p = bundle_policy_from_string(cfg.at("bundle_policy").get<std::string>());
    if (!p) {
      throw std::invalid_argument("unknown bundle policy");
    }
    o.bundle_policy = *p;
  }
  o.exec.job_overhead = cfg.value("job_overhead", o.exec.job_overhead);
  return o;
}

void print_estimations(const std::vector<Estimation>& es) {
  std::cout << std::left << std::setw(12) << "qpu" << std::setw(12) << "fidelity" << "makespan_s\n";
  for (const Estimation& e : es) {
    std::cout << std::left << std::setw(12) << e.qpu_id << std::setw(12) << std::setprecision(6) << e.fidelity_score
              << e.estimated_exec_time << (e.missing_calibration ? "  (missing calibration)" : "") << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qos: quantum program analysis, cutting, estimation and farm scheduling"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Root seed")->capture_default_str();
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--farm", g.farm, "Directory of QPU descriptor JSON files (default: generated six-device farm)");
  app.add_option("--run-dir", g.run_dir, "Run directory for jobs and reports")->capture_default_str();

  std::string circuit_path;
  int size_target = 0;
  int budget = 0;
  std::string out_path;

  auto* analyze = app.add_subcommand("analyze", "Static properties of a circuit");
  analyze->add_option("circuit", circuit_path)->required();

  auto* compile = app.add_subcommand("compile", "Analyze and optimize a circuit for a size target and budget");
  compile->add_option("circuit", circuit_path)->required();
  compile->add_option("-s,--size", size_target, "Max qubits per fragment (default: circuit width)");
  compile->add_option("-b,--budget", budget, "Cuts plus freezes allowed")->capture_default_str();
  compile->add_option("-o,--output", out_path, "Write the optimized Qernel JSON here");

  std::string qernel_path;
  auto* virtualize = app.add_subcommand("virtualize", "Instantiate an optimized Qernel into executable variants");
  virtualize->add_option("qernel", qernel_path)->required();
  virtualize->add_option("-o,--output", out_path, "Output directory for plan.json and variants")->required();

  auto* estimate = app.add_subcommand("estimate", "Rank farm QPUs for a circuit");
  estimate->add_option("circuit", circuit_path)->required();

  int shots = 0;
  bool noisy = false;
  std::string qpu_id;
  bool pending = false;
  std::string sweep;
  double hours = 2.0;
  double load = 1.0;
  auto* simulate = app.add_subcommand(
      "simulate", "Simulate a circuit, run queued jobs (--pending) or run a farm experiment (--sweep)");
  simulate->add_option("circuit", circuit_path);
  simulate->add_option("--shots", shots, "Sample this many shots (default: exact when ideal, 4096 when noisy)");
  simulate->add_flag("--noisy", noisy, "Transpile and simulate with the QPU's noise");
  simulate->add_option("--qpu", qpu_id, "QPU id for --noisy (default: best estimate)");
  simulate->add_flag("--pending", pending, "Execute every queued job in the run directory");
  simulate->add_option("--sweep", sweep, "Farm experiment: c or multiprogramming")
      ->check(CLI::IsMember({"c", "multiprogramming"}));
  simulate->add_option("--hours", hours, "Simulated hours for --sweep")->capture_default_str();
  simulate->add_option("--load", load, "Load factor for --sweep")->capture_default_str();

  std::string plan_path;
  std::string results_dir;
  auto* knit_cmd = app.add_subcommand("knit", "Knit variant results (<results>/<variant key>.txt) into a distribution");
  knit_cmd->add_option("plan", plan_path)->required();
  knit_cmd->add_option("results", results_dir)->required();

  auto* submit = app.add_subcommand("submit", "Queue a circuit as a job");
  submit->add_option("circuit", circuit_path)->required();
  submit->add_option("-s,--size", size_target, "Max qubits per fragment (default: circuit width)");
  submit->add_option("-b,--budget", budget, "Cuts plus freezes allowed")->capture_default_str();

  std::string job_id;
  auto* status = app.add_subcommand("status", "Show a job");
  status->add_option("job", job_id)->required();

  auto* report = app.add_subcommand("report", "Write metrics and CSV tables for the run directory");

  CLI11_PARSE(app, argc, argv);

  try {
    const json cfg = load_config(g);
    auto width_default = [&](const Circuit& c) { return size_target > 0 ? size_target : c.num_qubits(); };

    if (*analyze) {
      const Circuit c = load_circuit(circuit_path);
      const Qernel q = run_frontend(c, default_passes(), c.name());
      json out = {{"static_properties", to_json(q.static_props)}, {"tags", q.tags}};
      json passes = json::array();
      for (const PassReport& r : q.reports) {
        passes.push_back({{"pass", r.name}, {"outputs", r.outputs}});
      }
      out["passes"] = passes;
      std::cout << out.dump(2) << '\n';
    } else if (*compile) {
      const Circuit c = load_circuit(circuit_path);
      const OptimizationGoal goal{width_default(c), budget};
      const Qernel q = optimize(run_frontend(c, default_passes(), c.name()), goal);
      json frags = json::array();
      for (const Qernel& f : q.children) {
        frags.push_back({{"id", f.id}, {"qubits", f.circuit.num_qubits()}, {"gates", f.static_props.num_gates}});
      }
      std::cout << json{{"virtual_gates", q.virtual_gate_records.size()},
                        {"max_fragment_width", max_fragment_width(q)},
                        {"num_isqs", instantiate(q).num_isqs()},
                        {"fragments", frags}}
                       .dump(2)
                << '\n';
      if (!out_path.empty()) {
        save_qernel(q, out_path);
      }
    } else if (*virtualize) {
      const Instantiation inst = instantiate(load_qernel(qernel_path));
      fs::create_directories(fs::path(out_path) / "variants");
      save_knit_plan(inst.plan, (fs::path(out_path) / "plan.json").string());
      for (const Variant& v : inst.variants) {
        save_circuit(v.circuit, (fs::path(out_path) / "variants" / (v.key + ".txt")).string());
      }
      std::cout << "isqs " << inst.num_isqs() << "\nvariants " << inst.variants.size() << '\n';
    } else if (*estimate) {
      const Circuit c = load_circuit(circuit_path);
      const auto farm = load_farm_or_default(g);
      RankOptions ro;
      ro.workers = cfg.value("workers", 1);
      print_estimations(rank_assignments(c, farm, ro));
    } else if (*simulate) {
      if (pending) {
        JobService svc(g.run_dir, g.seed, service_config_from_json(cfg));
        for (const std::string& id : svc.process(load_farm_or_default(g))) {
          const Job& j = svc.status(id).job;
          std::cout << id << ' ' << to_string(j.status) << ' ' << (j.error.empty() ? j.result_path : j.error)
                    << '\n';
        }
      } else if (!sweep.empty()) {
        FarmConfig fc = default_farm_config(cfg.value("qpus", 6));
        fc.workers = cfg.value("workers", 1);
        FarmSimulator sim(fc);
        Workload w;
        w.seed = g.seed;
        w.hours = hours;
        w.load_factor = load;
        const FarmOptions fo = farm_options(cfg);
        json doc;
        if (sweep == "c") {
          std::vector<double> cs;
          for (int i = 0; i <= 10; ++i) {
            cs.push_back(i / 10.0);
          }
          doc = run_c_sweep(sim, w, fo, cs);
        } else {
          doc = run_multiprogramming_pair(sim, w, fo);
        }
        save_experiment(g.run_dir, sweep == "c" ? "c_sweep" : "multiprogramming", doc);
        std::cout << doc.dump(1) << '\n';
      } else {
        if (circuit_path.empty()) {
          throw std::invalid_argument("simulate needs a circuit, --pending or --sweep");
        }
        const Circuit c = load_circuit(circuit_path);
        Distribution d;
        if (noisy) {
          const auto farm = load_farm_or_default(g);
          const QpuDescriptor* qpu = nullptr;
          const std::string want = qpu_id.empty() ? rank_assignments(c, farm).front().qpu_id : qpu_id;
          for (const QpuDescriptor& q : farm) {
            qpu = q.id == want ? &q : qpu;
          }
          if (qpu == nullptr) {
            throw std::invalid_argument("unknown QPU '" + want + "'");
          }
          d = simulate_noisy(transpile(c, *qpu).physical, *qpu, shots > 0 ? shots : 4096, g.seed);
        } else {
          d = shots > 0 ? simulate_ideal(c, shots, g.seed) : simulate_ideal(c);
        }
        std::cout << format_distribution(d);
      }
    } else if (*knit_cmd) {
      const KnitPlan plan = load_knit_plan(plan_path);
      std::map<std::string, Distribution> results;
      for (const std::string& key : plan.variant_keys) {
        results.emplace(key, load_distribution((fs::path(results_dir) / (key + ".txt")).string()));
      }
      const KnitResult r = knit(plan, results, {.partitions = 1, .workers = cfg.value("workers", 1)});
      std::cout << format_distribution(r.distribution);
      if (r.clipped_mass > 1e-12) {
        std::cerr << "clipped negative mass " << r.clipped_mass << '\n';
      }
    } else if (*submit) {
      JobService svc(g.run_dir, g.seed, service_config_from_json(cfg));
      const Circuit c = load_circuit(circuit_path);
      std::cout << svc.submit_file(circuit_path, {width_default(c), budget}) << '\n';
    } else if (*status) {
      const JobService svc(g.run_dir, g.seed, service_config_from_json(cfg));
      const JobView v = svc.status(job_id);
      json out = to_json(v.job);
      json est = json::array();
      for (const Estimation& e : v.dynamic.estimations()) {
        est.push_back({{"qpu", e.qpu_id}, {"fidelity", e.fidelity_score}});
      }
      out["estimations"] = est;
      std::cout << out.dump(2) << '\n';
    } else if (*report) {
      std::cout << write_report(g.run_dir) << '\n';
    }
  } catch (const JobNotFound& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
