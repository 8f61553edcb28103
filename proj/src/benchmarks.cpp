#include "qos/benchmarks.hpp"

#include "qos/random.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace qos {

Circuit ghz(int n) {
  Circuit c(n, "ghz" + std::to_string(n));
  c.add(Gate::h(0));
  for (int q = 0; q + 1 < n; ++q) {
    c.add(Gate::cx(q, q + 1));
  }
  return c.measure_all();
}

Circuit layered_example() {
  Circuit c(4, "layered");
  c.add(Gate::cx(0, 1)).add(Gate::cx(2, 3)).add(Gate::cx(1, 2)).add(Gate::cx(0, 1)).add(Gate::cx(2, 3));
  return c.measure_all();
}

Circuit qaoa_maxcut(int n, const Graph& edges, double gamma, double beta,
                    const std::vector<bool>& mixer, const std::vector<double>& field) {
  Circuit c(n, "qaoa" + std::to_string(n));
  for (int q = 0; q < n; ++q) {
    c.add(Gate::h(q));
  }
  for (const auto& [a, b] : edges) {
    c.add(Gate::rzz(a, b, 2.0 * gamma));
  }
  for (int q = 0; q < n && !field.empty(); ++q) {
    if (field[static_cast<std::size_t>(q)] != 0.0) {
      c.add(Gate::rz(q, 2.0 * gamma * field[static_cast<std::size_t>(q)]));
    }
  }
  for (int q = 0; q < n; ++q) {
    if (mixer.empty() || mixer[static_cast<std::size_t>(q)]) {
      c.add(Gate::h(q)).add(Gate::rz(q, 2.0 * beta)).add(Gate::h(q));
    }
  }
  return c.measure_all();
}

Graph hub_graph() {
  Graph g;
  for (int q : {0, 1, 2, 4, 5, 6}) {
    g.emplace_back(3, q);
  }
  const int ring[] = {0, 1, 2, 4, 5, 6};
  for (int i = 0; i < 6; ++i) {
    g.emplace_back(ring[i], ring[(i + 1) % 6]);
  }
  return g;
}

Circuit hub_qaoa() {
  Circuit c = qaoa_maxcut(7, hub_graph(), 0.4, 0.0, std::vector<bool>(7, false));
  c.set_name("qaoa-hub");
  return c;
}

Graph six_vertex_graph() {
  return {{0, 1}, {0, 4}, {0, 5}, {1, 2}, {2, 5}, {3, 4}, {3, 5}};
}

Circuit six_vertex_qaoa() {
  // A weak field on qubit 0 separates the optimal cut from its complement.
  std::vector<double> field(6, 0.0);
  field[0] = 0.2;
  Circuit c = qaoa_maxcut(6, six_vertex_graph(), 0.4, 1.1, {}, field);
  c.set_name("qaoa6");
  return c;
}

Graph random_regular_graph(int n, int degree, std::uint64_t seed) {
  if (n * degree % 2 != 0 || degree >= n) {
    throw std::invalid_argument("no regular graph with these parameters");
  }
  Rng rng(derive_seed(seed, 0x7265));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<int> stubs;
    for (int v = 0; v < n; ++v) {
      for (int d = 0; d < degree; ++d) {
        stubs.push_back(v);
      }
    }
    std::shuffle(stubs.begin(), stubs.end(), rng);
    std::set<std::pair<int, int>> edges;
    bool ok = true;
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
      const int a = std::min(stubs[i], stubs[i + 1]);
      const int b = std::max(stubs[i], stubs[i + 1]);
      if (a == b || !edges.emplace(a, b).second) {
        ok = false;
        break;
      }
    }
    if (ok) {
      return Graph(edges.begin(), edges.end());
    }
  }
  throw std::runtime_error("failed to sample a regular graph");
}

Circuit qaoa_regular(int n, int degree, std::uint64_t seed) {
  Circuit c = qaoa_maxcut(n, random_regular_graph(n, degree, seed), 0.4, 0.3);
  c.set_name("qaoa-regular" + std::to_string(n));
  return c;
}

void append_ry(Circuit& c, int q, double theta) {
  // RY = S RX S^dagger with RX = H RZ H.
  c.add(Gate::rz(q, -M_PI / 2)).add(Gate::h(q)).add(Gate::rz(q, theta)).add(Gate::h(q)).add(Gate::rz(q, M_PI / 2));
}

Circuit vqe_linear(int n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x76716));
  auto angle = [&] { return (uniform01(rng) * 2.0 - 1.0) * M_PI; };
  Circuit c(n, "vqe" + std::to_string(n));
  for (int q = 0; q < n; ++q) {
    append_ry(c, q, angle());
    c.add(Gate::rz(q, angle()));
  }
  for (int q = 0; q + 1 < n; ++q) {
    c.add(Gate::cx(q, q + 1));
  }
  for (int q = 0; q < n; ++q) {
    append_ry(c, q, angle());
    c.add(Gate::rz(q, angle()));
  }
  return c.measure_all();
}

Circuit w_state(int n) {
  Circuit c(n, "wstate" + std::to_string(n));
  c.add(Gate::x(0));
  for (int k = 0; k + 1 < n; ++k) {
    const double theta = 2.0 * std::acos(std::sqrt(1.0 / (n - k)));
    // controlled-RY(theta) from q_k onto q_{k+1}
    append_ry(c, k + 1, theta / 2);
    c.add(Gate::cx(k, k + 1));
    append_ry(c, k + 1, -theta / 2);
    c.add(Gate::cx(k, k + 1));
    c.add(Gate::cx(k + 1, k));
  }
  return c.measure_all();
}

Circuit random_circuit(int n, int depth, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x72616e64));
  Circuit c(n, "random" + std::to_string(n));
  auto pick = [&](int m) { return static_cast<int>(rng() % static_cast<std::uint64_t>(m)); };
  auto angle = [&] { return (uniform01(rng) * 2.0 - 1.0) * M_PI; };
  for (int layer = 0; layer < depth; ++layer) {
    for (int q = 0; q < n; ++q) {
      const int r = pick(n > 1 ? 6 : 3);
      if (r == 0) {
        c.add(Gate::h(q));
      } else if (r == 1) {
        c.add(Gate::sx(q));
      } else if (r == 2) {
        c.add(Gate::rz(q, angle()));
      } else {
        int t = pick(n - 1);
        t += t >= q ? 1 : 0;
        const int k = pick(3);
        c.add(k == 0 ? Gate::cx(q, t) : k == 1 ? Gate::cz(q, t) : Gate::rzz(q, t, angle()));
      }
    }
  }
  return c.measure_all();
}

Circuit make_benchmark(const std::string& name, int n, std::uint64_t seed) {
  if (name == "ghz") {
    return ghz(n);
  }
  if (name == "qaoa") {
    return qaoa_regular(n, 3, seed);
  }
  if (name == "qaoa-hub") {
    return hub_qaoa();
  }
  if (name == "vqe") {
    return vqe_linear(n, seed);
  }
  if (name == "wstate") {
    return w_state(n);
  }
  if (name == "random") {
    return random_circuit(n, n, seed);
  }
  throw std::invalid_argument("unknown benchmark '" + name + "'");
}

int cut_value(const Graph& g, std::uint64_t bits) {
  int v = 0;
  for (const auto& [a, b] : g) {
    v += static_cast<int>(((bits >> a) ^ (bits >> b)) & 1U);
  }
  return v;
}

}  // namespace qos
