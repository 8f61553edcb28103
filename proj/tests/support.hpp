#pragma once

#include "qos/circuit.hpp"
#include "qos/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace qos::test {

// Random circuit over the logical gate set, measured on every qubit.
inline Circuit random_circuit(Rng& rng, int n, int depth, bool measure = true) {
  Circuit c(n, "random");
  auto pick = [&](int m) { return static_cast<int>(rng() % static_cast<std::uint64_t>(m)); };
  auto angle = [&] { return (uniform01(rng) * 2.0 - 1.0) * M_PI; };
  for (int layer = 0; layer < depth; ++layer) {
    for (int q = 0; q < n; ++q) {
      switch (pick(n > 1 ? 8 : 4)) {
      case 0: c.add(Gate::h(q)); break;
      case 1: c.add(Gate::sx(q)); break;
      case 2: c.add(Gate::rz(q, angle())); break;
      case 3: c.add(Gate::x(q)); break;
      default: {
        int t = pick(n - 1);
        if (t >= q) {
          ++t;
        }
        switch (pick(3)) {
        case 0: c.add(Gate::cx(q, t)); break;
        case 1: c.add(Gate::cz(q, t)); break;
        default: c.add(Gate::rzz(q, t, angle())); break;
        }
      }
      }
    }
  }
  if (measure) {
    c.measure_all();
  }
  return c;
}

// Average ranks (ties share the mean rank), 1-based.
inline std::vector<double> ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> r(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) {
      ++j;
    }
    for (std::size_t k = i; k <= j; ++k) {
      r[order[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    }
    i = j + 1;
  }
  return r;
}

// Spearman correlation as the Pearson correlation of ranks.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto rx = ranks(xs);
  const auto ry = ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace qos::test
