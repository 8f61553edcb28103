#include "qos/knitter.hpp"

#include "qos/parallel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qos {

void ExactSum::add(double x) {
  std::size_t i = 0;
  for (double y : partials_) {
    if (std::abs(x) < std::abs(y)) {
      std::swap(x, y);
    }
    const double hi = x + y;
    const double lo = y - (hi - x);
    if (lo != 0.0) {
      partials_[i++] = lo;
    }
    x = hi;
  }
  partials_.resize(i);
  partials_.push_back(x);
}

void ExactSum::merge(const ExactSum& other) {
  for (double p : other.partials_) {
    add(p);
  }
}

double ExactSum::value() const {
  // Round-half-even correction over the non-overlapping partials.
  std::size_t n = partials_.size();
  if (n == 0) {
    return 0.0;
  }
  double hi = partials_[--n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials_[--n];
    hi = x + y;
    lo = y - (hi - x);
    if (lo != 0.0) {
      break;
    }
  }
  if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    if (y == x - hi) {
      hi = x;
    }
  }
  return hi;
}

std::map<Bitstring, double> signed_marginal(const Distribution& d, int num_bits) {
  if (d.num_bits() < num_bits) {
    throw std::invalid_argument("result has fewer bits than the plan's output");
  }
  const Bitstring mask = num_bits >= 64 ? ~Bitstring{0} : (Bitstring{1} << num_bits) - 1;
  std::map<Bitstring, ExactSum> acc;
  for (const auto& [bits, p] : d.probabilities()) {
    const bool odd = (std::popcount(bits & ~mask) & 1) != 0;
    acc[bits & mask].add(odd ? -p : p);
  }
  std::map<Bitstring, double> out;
  for (const auto& [bits, s] : acc) {
    const double v = s.value();
    if (v != 0.0) {
      out[bits] = v;
    }
  }
  return out;
}

KnitResult knit(const KnitPlan& plan, const std::map<std::string, Distribution>& results,
                const KnitOptions& options) {
  if (options.partitions < 1) {
    throw std::invalid_argument("partitions must be at least 1");
  }
  using Terms = std::vector<std::pair<Bitstring, double>>;
  std::vector<Terms> marginals(plan.variant_keys.size());
  std::vector<bool> used(plan.variant_keys.size(), false);
  for (const KnitLeaf& leaf : plan.leaves) {
    if (leaf.indices.size() != plan.arities.size() || leaf.variants.size() != plan.fragment_ids.size()) {
      throw std::invalid_argument("knit plan: leaf arity mismatch");
    }
    for (int v : leaf.variants) {
      used[static_cast<std::size_t>(v)] = true;
    }
  }
  for (std::size_t v = 0; v < plan.variant_keys.size(); ++v) {
    if (!used[v]) {
      continue;
    }
    const auto it = results.find(plan.variant_keys[v]);
    if (it == results.end()) {
      throw std::invalid_argument("missing result for " + plan.variant_keys[v]);
    }
    const auto m = signed_marginal(it->second, plan.num_bits);
    marginals[v].assign(m.begin(), m.end());
  }

  const auto k = static_cast<std::size_t>(options.partitions);
  std::vector<std::map<Bitstring, ExactSum>> partial(k);
  parallel_for(k, options.workers, [&](std::size_t p) {
    auto& acc = partial[p];
    Terms cur;
    Terms next;
    for (const KnitLeaf& leaf : plan.leaves) {
      const std::size_t owner = leaf.indices.empty() ? 0 : static_cast<std::size_t>(leaf.indices[0]) % k;
      if (owner != p || leaf.coefficient == 0.0) {
        continue;
      }
      cur.assign(1, {leaf.frozen_bits, leaf.coefficient});
      for (int v : leaf.variants) {
        const Terms& q = marginals[static_cast<std::size_t>(v)];
        next.clear();
        next.reserve(cur.size() * q.size());
        for (const auto& [a, x] : cur) {
          for (const auto& [b, y] : q) {
            next.emplace_back(a | b, x * y);
          }
        }
        cur.swap(next);
      }
      for (const auto& [bits, value] : cur) {
        acc[bits].add(value);
      }
    }
  });

  std::map<Bitstring, ExactSum> total;
  for (const auto& part : partial) {
    for (const auto& [bits, s] : part) {
      total[bits].merge(s);
    }
  }
  KnitResult out;
  out.quasi = QuasiDistribution(plan.num_bits);
  for (const auto& [bits, s] : total) {
    const double v = s.value();
    if (v != 0.0) {
      out.quasi.add(bits, v);
    }
  }
  out.distribution = out.quasi.to_distribution(&out.clipped_mass);
  return out;
}

std::vector<Distribution> unbundle(const Distribution& result, const UnbundleRecord& rec) {
  int next = 0;
  for (const BundleSlice& s : rec.slices) {
    if (s.offset != next || s.width < 0) {
      throw std::invalid_argument("bundle " + rec.bundle_id + ": slices do not partition the bits");
    }
    next += s.width;
  }
  if (next != result.num_bits()) {
    throw std::invalid_argument("bundle " + rec.bundle_id + ": slice widths sum to " +
                                std::to_string(next) + ", result has " +
                                std::to_string(result.num_bits()) + " bits");
  }
  std::vector<Distribution> out;
  for (const BundleSlice& s : rec.slices) {
    std::vector<int> bits;
    for (int b = 0; b < s.width; ++b) {
      bits.push_back(s.offset + b);
    }
    out.push_back(result.marginal(bits));
  }
  return out;
}

FrozenReport select_frozen(const Distribution& knitted, Bitstring frozen_mask,
                           const std::function<double(Bitstring)>& objective) {
  FrozenReport report;
  // every sub-mask of the frozen bits, in increasing order
  std::vector<Bitstring> assignments;
  Bitstring sub = 0;
  do {
    assignments.push_back(sub);
    sub = (sub - frozen_mask) & frozen_mask;
  } while (sub != 0);
  std::sort(assignments.begin(), assignments.end());
  double best = -std::numeric_limits<double>::infinity();
  for (Bitstring a : assignments) {
    FrozenChoice c;
    c.assignment = a;
    std::map<Bitstring, double> cond;
    for (const auto& [bits, p] : knitted.probabilities()) {
      if ((bits & frozen_mask) == a) {
        cond[bits] = p;
        c.weight += p;
      }
    }
    if (c.weight > 0.0) {
      for (auto& [bits, p] : cond) {
        p /= c.weight;
        c.objective += p * objective(bits);
      }
      c.conditional = Distribution(knitted.num_bits(), std::move(cond));
      if (c.objective > best) {
        best = c.objective;
        report.selected = static_cast<int>(report.choices.size());
      }
    } else {
      c.conditional = Distribution(knitted.num_bits());
    }
    report.choices.push_back(std::move(c));
  }
  return report;
}

}  // namespace qos
