#include "doctest.h"

#include "qos/analyzer.hpp"
#include "qos/benchmarks.hpp"
#include "support.hpp"

#include <algorithm>

using namespace qos;

namespace {

const PassReport& report(const Qernel& q, const std::string& name) {
  for (const PassReport& r : q.reports) {
    if (r.name == name) {
      return r;
    }
  }
  throw std::runtime_error("missing report " + name);
}

RefinedQIR graph(int n, const Graph& edges) {
  RefinedQIR r(n);
  for (const auto& [a, b] : edges) {
    r.add_interaction(a, b);
  }
  return r;
}

}  // namespace

TEST_SUITE("analyzer") {

TEST_CASE("default frontend on the layered example") {
  const Qernel q = run_frontend(layered_example());
  CHECK(q.reports.size() == default_passes().size());
  const auto& hot = report(q, "hotspot").outputs.at("gates");
  REQUIRE(!hot.empty());
  CHECK(hot[0].at("gate") == 2);
  CHECK(hot[0].at("degree") == 4);
  CHECK(q.static_props.num_gates == 5);
  CHECK_FALSE(q.has_tag("qaoa"));
}

TEST_CASE("empty circuit") {
  const Qernel q = run_frontend(Circuit(2));
  CHECK(q.qir.size() == 0);
  CHECK(q.refined.weights().empty());
  CHECK(report(q, "hotspot").outputs.at("gates").empty());
}

TEST_CASE("hub instance hotspot qubit") {
  const Qernel q = run_frontend(hub_qaoa());
  const auto& hot = report(q, "hotspot").outputs.at("qubits");
  CHECK(hot[0].at("qubit") == 3);
  CHECK(hot[0].at("degree") == 6);
  CHECK(q.has_tag("qaoa"));
  CHECK(hotspot_nodes(q.refined, 1) == std::vector<int>{3});
}

TEST_CASE("hotspot ranking") {
  CHECK(hotspot_nodes(graph(6, {{4, 0}, {4, 1}, {4, 2}, {4, 3}, {4, 5}}), 1) == std::vector<int>{4});
  CHECK(hotspot_nodes(graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}), 1) == std::vector<int>{0});
  CHECK_THROWS_AS(hotspot_nodes(build_qir(Circuit(1)), 1), AnalysisError);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const Circuit c = test::random_circuit(rng, 6, 5);
    const QIR qir = build_qir(c);
    const auto ranked = hotspot_nodes(qir, 100);
    for (std::size_t i = 0; i + 1 < ranked.size(); ++i) {
      CHECK(qir.degree(ranked[i]) >= qir.degree(ranked[i + 1]));
    }
    for (int v : ranked) {
      CHECK_FALSE(qir.nodes()[static_cast<std::size_t>(v)].is_measurement());
    }
  }
}

TEST_CASE("pass dependencies are enforced") {
  CHECK_THROWS_AS(run_frontend(ghz(3), {"refine", "qir"}), AnalysisError);
  CHECK_THROWS_AS(run_frontend(ghz(3), {"qir", "supermarq_features"}), AnalysisError);
  CHECK_THROWS_AS(run_frontend(ghz(3), {}), AnalysisError);
  CHECK_THROWS_AS(run_frontend(ghz(3), {"qir", "nope"}), AnalysisError);
}

TEST_CASE("independent analysis passes commute") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Circuit c = test::random_circuit(rng, 5, 5);
    const Qernel a = run_frontend(c, {"qir", "refine", "basic_analysis", "supermarq_features",
                                      "structure", "hotspot", "dependency_graph"});
    const Qernel b = run_frontend(c, {"qir", "refine", "dependency_graph", "hotspot", "structure",
                                      "supermarq_features", "basic_analysis"});
    CHECK(to_json(a.static_props) == to_json(b.static_props));
    CHECK(a.tags == b.tags);
    for (const PassReport& r : a.reports) {
      CHECK(report(b, r.name).outputs == r.outputs);
    }
  }
}

TEST_CASE("dependency reduction drops implied edges") {
  // cx 0 1; cx 0 1: two parallel wire edges collapse to one dependency
  Circuit c(3);
  c.add(Gate::cx(0, 1)).add(Gate::cx(0, 1)).add(Gate::cx(1, 2)).add(Gate::cx(0, 2));
  const QIR qir = build_qir(c);
  const auto red = dependency_reduction(qir);
  // 0->1, 1->2, 2->3; edge 1->3 (qubit 0) is implied through node 2
  CHECK(red == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}});
}

}
