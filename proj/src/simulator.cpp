#include "qos/simulator.hpp"

#include "qos/parallel.hpp"
#include "qos/random.hpp"
#include "qos/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace qos {

using cplx = std::complex<double>;

StateVector::StateVector(int num_qubits)
    : num_qubits_(num_qubits), amps_(std::size_t{1} << num_qubits, cplx{0.0, 0.0}) {
  amps_[0] = 1.0;
}

namespace {

template <typename Fn>
void for_each_pair(std::size_t dim, int q, Fn&& fn) {
  const std::size_t bit = std::size_t{1} << q;
  for (std::size_t i = 0; i < dim; ++i) {
    if ((i & bit) == 0) {
      fn(i, i | bit);
    }
  }
}

void apply_1q(std::vector<cplx>& a, int q, cplx m00, cplx m01, cplx m10, cplx m11) {
  for_each_pair(a.size(), q, [&](std::size_t i0, std::size_t i1) {
    const cplx x0 = a[i0];
    const cplx x1 = a[i1];
    a[i0] = m00 * x0 + m01 * x1;
    a[i1] = m10 * x0 + m11 * x1;
  });
}

}  // namespace

void StateVector::apply(const Gate& g) {
  const std::size_t dim = amps_.size();
  switch (g.kind) {
  case GateKind::X:
    for_each_pair(dim, g.qubits[0], [&](std::size_t i0, std::size_t i1) { std::swap(amps_[i0], amps_[i1]); });
    break;
  case GateKind::SX: {
    const cplx p{0.5, 0.5};
    const cplx m{0.5, -0.5};
    apply_1q(amps_, g.qubits[0], p, m, m, p);
    break;
  }
  case GateKind::H: {
    const double r = M_SQRT1_2;
    apply_1q(amps_, g.qubits[0], r, r, r, -r);
    break;
  }
  case GateKind::RZ: {
    const cplx lo = std::polar(1.0, -g.theta / 2.0);
    const cplx hi = std::polar(1.0, g.theta / 2.0);
    const std::size_t bit = std::size_t{1} << g.qubits[0];
    for (std::size_t i = 0; i < dim; ++i) {
      amps_[i] *= (i & bit) != 0 ? hi : lo;
    }
    break;
  }
  case GateKind::CX: {
    const std::size_t c = std::size_t{1} << g.qubits[0];
    const std::size_t t = std::size_t{1} << g.qubits[1];
    for (std::size_t i = 0; i < dim; ++i) {
      if ((i & c) != 0 && (i & t) == 0) {
        std::swap(amps_[i], amps_[i | t]);
      }
    }
    break;
  }
  case GateKind::CZ: {
    const std::size_t mask = (std::size_t{1} << g.qubits[0]) | (std::size_t{1} << g.qubits[1]);
    for (std::size_t i = 0; i < dim; ++i) {
      if ((i & mask) == mask) {
        amps_[i] = -amps_[i];
      }
    }
    break;
  }
  case GateKind::RZZ: {
    const cplx same = std::polar(1.0, -g.theta / 2.0);
    const cplx diff = std::polar(1.0, g.theta / 2.0);
    const int a = g.qubits[0];
    const int b = g.qubits[1];
    for (std::size_t i = 0; i < dim; ++i) {
      const bool parity = (((i >> a) ^ (i >> b)) & 1U) != 0;
      amps_[i] *= parity ? diff : same;
    }
    break;
  }
  default:
    throw SimulationError("StateVector::apply: non-unitary gate " + std::string(to_string(g.kind)));
  }
}

void StateVector::apply_pauli(int q, char pauli) {
  switch (pauli) {
  case 'X':
    apply(Gate::x(q));
    break;
  case 'Y':
    apply_1q(amps_, q, 0.0, cplx{0.0, -1.0}, cplx{0.0, 1.0}, 0.0);
    break;
  case 'Z': {
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t i = 0; i < amps_.size(); ++i) {
      if ((i & bit) != 0) {
        amps_[i] = -amps_[i];
      }
    }
    break;
  }
  default:
    break;
  }
}

double StateVector::probability_one(int q) const {
  const std::size_t bit = std::size_t{1} << q;
  double p = 0.0;
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    if ((i & bit) != 0) {
      p += std::norm(amps_[i]);
    }
  }
  return p;
}

void StateVector::collapse(int q, int outcome, double probability) {
  const std::size_t bit = std::size_t{1} << q;
  const double scale = probability > 0.0 ? 1.0 / std::sqrt(probability) : 0.0;
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    const bool one = (i & bit) != 0;
    if (one == (outcome == 1)) {
      amps_[i] *= scale;
    } else {
      amps_[i] = 0.0;
    }
  }
}

double StateVector::norm() const {
  double s = 0.0;
  for (const cplx& a : amps_) {
    s += std::norm(a);
  }
  return std::sqrt(s);
}

std::vector<double> StateVector::probabilities() const {
  std::vector<double> p(amps_.size());
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    p[i] = std::norm(amps_[i]);
  }
  return p;
}

namespace {

constexpr double kBranchCutoff = 1e-14;

// Qubits coupled by multi-qubit gates are simulated together; disjoint
// blocks evolve independently under local noise.
struct Block {
  std::vector<int> qubits;                 // global qubit ids, ascending
  std::vector<std::size_t> gate_index;     // indices into the parent circuit
  std::vector<Gate> gates;                 // local qubit ids, global clbits
  std::vector<bool> terminal;              // per local gate
  bool has_midcircuit = false;
};

std::vector<Block> split_blocks(const Circuit& c, int cap) {
  const auto n = static_cast<std::size_t>(c.num_qubits());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  std::vector<bool> used(n, false);
  for (const Gate& g : c.gates()) {
    if (g.kind == GateKind::Virtual) {
      throw SimulationError("circuit contains a virtual gate; instantiate it first");
    }
    for (int q : g.qubits) {
      used[static_cast<std::size_t>(q)] = true;
    }
    if (g.qubits.size() == 2) {
      const int ra = find(g.qubits[0]);
      const int rb = find(g.qubits[1]);
      if (ra != rb) {
        parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
      }
    }
  }
  std::map<int, std::size_t> block_of_root;
  std::vector<Block> blocks;
  std::vector<int> local(n, -1);
  for (std::size_t q = 0; q < n; ++q) {
    if (!used[q]) {
      continue;
    }
    const int r = find(static_cast<int>(q));
    auto [it, inserted] = block_of_root.emplace(r, blocks.size());
    if (inserted) {
      blocks.emplace_back();
    }
    Block& b = blocks[it->second];
    local[q] = static_cast<int>(b.qubits.size());
    b.qubits.push_back(static_cast<int>(q));
  }
  const auto terminal = terminal_measurements(c);
  for (std::size_t i = 0; i < c.gates().size(); ++i) {
    const Gate& g = c.gates()[i];
    Block& b = blocks[block_of_root.at(find(g.qubits[0]))];
    Gate lg = g;
    for (int& q : lg.qubits) {
      q = local[static_cast<std::size_t>(q)];
    }
    b.gate_index.push_back(i);
    b.gates.push_back(std::move(lg));
    b.terminal.push_back(terminal[i]);
    if ((g.kind == GateKind::Measure && !terminal[i]) || g.kind == GateKind::Reset) {
      b.has_midcircuit = true;
    }
  }
  for (const Block& b : blocks) {
    if (static_cast<int>(b.qubits.size()) > cap) {
      throw SimulationError("qubit cap exceeded: block of " + std::to_string(b.qubits.size()) +
                            " qubits, cap " + std::to_string(cap));
    }
  }
  return blocks;
}

Bitstring terminal_bits(const Block& b, std::size_t basis_index) {
  Bitstring bits = 0;
  for (std::size_t k = 0; k < b.gates.size(); ++k) {
    if (b.terminal[k]) {
      const Gate& g = b.gates[k];
      if ((basis_index >> g.qubits[0]) & 1U) {
        bits |= Bitstring{1} << g.clbit;
      }
    }
  }
  return bits;
}

struct Branch {
  StateVector state;
  double weight;
  Bitstring bits;
};

std::map<Bitstring, double> exact_block(const Block& b) {
  std::vector<Branch> branches;
  branches.push_back({StateVector(static_cast<int>(b.qubits.size())), 1.0, 0});
  for (std::size_t k = 0; k < b.gates.size(); ++k) {
    const Gate& g = b.gates[k];
    if (b.terminal[k]) {
      continue;
    }
    if (g.kind == GateKind::Measure || g.kind == GateKind::Reset) {
      std::vector<Branch> next;
      next.reserve(branches.size() * 2);
      for (Branch& br : branches) {
        const double p1 = std::clamp(br.state.probability_one(g.qubits[0]), 0.0, 1.0);
        const double p0 = 1.0 - p1;
        for (int outcome : {0, 1}) {
          const double p = outcome == 1 ? p1 : p0;
          if (p * br.weight < kBranchCutoff) {
            continue;
          }
          Branch nb{br.state, br.weight * p, br.bits};
          nb.state.collapse(g.qubits[0], outcome, p);
          if (g.kind == GateKind::Measure) {
            if (outcome == 1) {
              nb.bits |= Bitstring{1} << g.clbit;
            }
          } else if (outcome == 1) {
            nb.state.apply(Gate::x(g.qubits[0]));
          }
          next.push_back(std::move(nb));
        }
      }
      branches = std::move(next);
      continue;
    }
    for (Branch& br : branches) {
      br.state.apply(g);
    }
  }
  std::map<Bitstring, double> out;
  for (const Branch& br : branches) {
    const auto& amps = br.state.amplitudes();
    for (std::size_t i = 0; i < amps.size(); ++i) {
      const double p = std::norm(amps[i]) * br.weight;
      if (p > 0.0) {
        out[br.bits | terminal_bits(b, i)] += p;
      }
    }
  }
  return out;
}

std::map<Bitstring, double> product(const std::map<Bitstring, double>& a,
                                    const std::map<Bitstring, double>& b) {
  std::map<Bitstring, double> out;
  for (const auto& [ka, pa] : a) {
    for (const auto& [kb, pb] : b) {
      out[ka | kb] += pa * pb;
    }
  }
  return out;
}

std::size_t sample_index(const std::vector<double>& cumulative, double u) {
  const double target = u * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                               cumulative.size() - 1);
}

// Error event encoding: ((local gate index * 4 + slot) << 4) | pauli code.
// slot 0 is post-gate depolarizing, slots 1..2 dephasing of operand k-1.
using Pattern = std::vector<std::uint64_t>;

constexpr char kPauli[4] = {'I', 'X', 'Y', 'Z'};

struct BlockNoise {
  std::vector<double> depolarizing;              // per local gate
  std::vector<std::vector<double>> dephasing;    // per local gate, operand
};

void sample_pattern(const Block& b, const BlockNoise& noise, Rng& rng, Pattern& out) {
  out.clear();
  for (std::size_t k = 0; k < b.gates.size(); ++k) {
    const auto& deph = noise.dephasing[k];
    for (std::size_t op = 0; op < deph.size(); ++op) {
      if (deph[op] > 0.0 && uniform01(rng) < deph[op]) {
        out.push_back(((k * 4 + 1 + op) << 4) | 3U);
      }
    }
    const double p = noise.depolarizing[k];
    if (p > 0.0 && uniform01(rng) < p) {
      const std::uint64_t choices = b.gates[k].qubits.size() == 2 ? 15 : 3;
      const std::uint64_t code = 1 + static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(choices));
      out.push_back(((k * 4) << 4) | std::min(code, choices));
    }
  }
}

void apply_event(StateVector& sv, const Gate& g, std::uint64_t event) {
  const std::uint64_t slot = (event >> 4) & 3U;
  const std::uint64_t code = event & 15U;
  if (slot != 0) {
    sv.apply_pauli(g.qubits[slot - 1], 'Z');
    return;
  }
  if (g.qubits.size() == 1) {
    sv.apply_pauli(g.qubits[0], kPauli[code]);
  } else {
    sv.apply_pauli(g.qubits[0], kPauli[code & 3U]);
    sv.apply_pauli(g.qubits[1], kPauli[(code >> 2) & 3U]);
  }
}

// Evolves one trajectory. Mid-circuit measurements and resets are sampled
// with `rng`; the returned state is before terminal readout.
StateVector run_trajectory(const Block& b, const Pattern& pattern, Rng* rng, Bitstring* midbits,
                           const std::vector<double>* readout_flip) {
  StateVector sv(static_cast<int>(b.qubits.size()));
  std::size_t ev = 0;
  for (std::size_t k = 0; k < b.gates.size(); ++k) {
    const Gate& g = b.gates[k];
    // dephasing events precede the gate
    while (ev < pattern.size() && (pattern[ev] >> 6) == k && ((pattern[ev] >> 4) & 3U) != 0) {
      apply_event(sv, g, pattern[ev]);
      ++ev;
    }
    if (b.terminal[k]) {
      // Z errors before readout do not change the outcome.
      while (ev < pattern.size() && (pattern[ev] >> 6) == k) {
        ++ev;
      }
      continue;
    }
    if (g.kind == GateKind::Measure || g.kind == GateKind::Reset) {
      const double p1 = std::clamp(sv.probability_one(g.qubits[0]), 0.0, 1.0);
      const int outcome = uniform01(*rng) < p1 ? 1 : 0;
      sv.collapse(g.qubits[0], outcome, outcome == 1 ? p1 : 1.0 - p1);
      if (g.kind == GateKind::Measure) {
        int recorded = outcome;
        const double flip = (*readout_flip)[static_cast<std::size_t>(g.clbit)];
        if (flip > 0.0 && uniform01(*rng) < flip) {
          recorded ^= 1;
        }
        if (recorded == 1) {
          *midbits |= Bitstring{1} << g.clbit;
        }
      } else if (outcome == 1) {
        sv.apply(Gate::x(g.qubits[0]));
      }
    } else {
      sv.apply(g);
    }
    while (ev < pattern.size() && (pattern[ev] >> 6) == k) {
      apply_event(sv, g, pattern[ev]);
      ++ev;
    }
  }
  return sv;
}

Bitstring readout(const Block& b, std::size_t basis_index, const std::vector<double>& flip,
                  Rng& rng) {
  Bitstring bits = 0;
  for (std::size_t k = 0; k < b.gates.size(); ++k) {
    if (!b.terminal[k]) {
      continue;
    }
    const Gate& g = b.gates[k];
    int v = static_cast<int>((basis_index >> g.qubits[0]) & 1U);
    const double f = flip[static_cast<std::size_t>(g.clbit)];
    if (f > 0.0 && uniform01(rng) < f) {
      v ^= 1;
    }
    if (v == 1) {
      bits |= Bitstring{1} << g.clbit;
    }
  }
  return bits;
}

constexpr int kShotsPerChunk = 512;

}  // namespace

Distribution simulate_ideal(const Circuit& input, const SimulatorConfig& config) {
  const Circuit c = with_default_measurements(input);
  const auto blocks = split_blocks(c, config.qubit_cap);
  std::map<Bitstring, double> joint{{0, 1.0}};
  for (const Block& b : blocks) {
    joint = product(joint, exact_block(b));
  }
  std::map<Bitstring, double> cleaned;
  for (const auto& [k, p] : joint) {
    if (p > 1e-16) {
      cleaned.emplace(k, p);
    }
  }
  return Distribution(c.total_clbits(), std::move(cleaned));
}

Distribution simulate_ideal(const Circuit& c, int shots, std::uint64_t seed,
                            const SimulatorConfig& config) {
  const Distribution exact = simulate_ideal(c, config);
  std::vector<Bitstring> keys;
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& [k, p] : exact.probabilities()) {
    keys.push_back(k);
    acc += p;
    cumulative.push_back(acc);
  }
  std::map<Bitstring, std::uint64_t> counts;
  Rng rng(derive_seed(seed, 0));
  for (int s = 0; s < shots; ++s) {
    counts[keys[sample_index(cumulative, uniform01(rng))]]++;
  }
  return Distribution::from_counts(exact.num_bits(), counts);
}

void check_executable(const Circuit& physical, const QpuDescriptor& qpu) {
  if (physical.num_qubits() > qpu.num_qubits) {
    throw SimulationError("circuit wider than QPU " + qpu.id);
  }
  for (const Gate& g : physical.gates()) {
    if (g.kind == GateKind::Measure || g.kind == GateKind::Reset) {
      continue;
    }
    if (qpu.basis_gates.count(g.kind) == 0) {
      throw SimulationError("gate " + std::string(to_string(g.kind)) + " not in basis of QPU " +
                            qpu.id);
    }
    if (g.qubits.size() == 2 && !qpu.adjacent(g.qubits[0], g.qubits[1])) {
      throw SimulationError("connectivity violation on QPU " + qpu.id + ": (" +
                            std::to_string(g.qubits[0]) + "," + std::to_string(g.qubits[1]) + ")");
    }
  }
}

NoiseSpec derive_noise(const Circuit& input, const QpuDescriptor& qpu) {
  const Circuit physical = with_default_measurements(input);
  const GateSchedule sched = schedule_circuit(physical, qpu);
  const auto& gates = physical.gates();
  NoiseSpec noise;
  noise.missing_calibration = sched.missing_calibration;
  noise.depolarizing.assign(gates.size(), 0.0);
  noise.dephasing.assign(gates.size(), {});
  noise.readout_flip.assign(static_cast<std::size_t>(physical.total_clbits()), 0.0);
  std::vector<double> survive(gates.size(), 1.0);
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate& g = gates[i];
    bool missing = false;
    survive[i] = 1.0 - qpu.calibration.error(g.kind, g.qubits, &missing);
    noise.missing_calibration = noise.missing_calibration || missing;
    noise.dephasing[i].assign(g.qubits.size(), 0.0);
    for (std::size_t k = 0; k < g.qubits.size(); ++k) {
      const double t2 = qpu.calibration.t2_of(g.qubits[k]);
      const double gap = sched.idle_gap[i][k];
      if (gap > 0.0 && std::isfinite(t2)) {
        noise.dephasing[i][k] = 0.5 * (1.0 - std::exp(-gap / t2));
      }
    }
    if (g.kind == GateKind::Measure) {
      noise.readout_flip[static_cast<std::size_t>(g.clbit)] = qpu.calibration.readout(g.qubits[0]);
    }
  }
  for (const auto& [i, j] : sched.crosstalk_pairs) {
    const double ct = qpu.calibration.crosstalk(Edge::of(gates[i].qubits[0], gates[i].qubits[1]),
                                                Edge::of(gates[j].qubits[0], gates[j].qubits[1]));
    survive[i] *= 1.0 - ct;
    survive[j] *= 1.0 - ct;
  }
  for (std::size_t i = 0; i < gates.size(); ++i) {
    noise.depolarizing[i] = 1.0 - survive[i];
  }
  return noise;
}

Distribution simulate_noisy(const Circuit& physical, const QpuDescriptor& qpu, int shots,
                            std::uint64_t seed, const SimulatorConfig& config) {
  check_executable(physical, qpu);
  return simulate_noisy(physical, derive_noise(physical, qpu), shots, seed, config);
}

Distribution simulate_noisy(const Circuit& input, const NoiseSpec& noise, int shots,
                            std::uint64_t seed, const SimulatorConfig& config) {
  const Circuit c = with_default_measurements(input);
  if (noise.depolarizing.size() != c.gates().size()) {
    throw SimulationError("noise specification does not match circuit");
  }
  const auto blocks = split_blocks(c, config.qubit_cap);
  std::vector<BlockNoise> block_noise;
  for (const Block& b : blocks) {
    BlockNoise bn;
    for (std::size_t idx : b.gate_index) {
      bn.depolarizing.push_back(noise.depolarizing[idx]);
      bn.dephasing.push_back(noise.dephasing[idx]);
    }
    block_noise.push_back(std::move(bn));
  }

  const std::size_t chunks = (static_cast<std::size_t>(shots) + kShotsPerChunk - 1) / kShotsPerChunk;
  std::vector<std::map<Bitstring, std::uint64_t>> chunk_counts(chunks);

  parallel_for(chunks, config.workers, [&](std::size_t chunk) {
    Rng rng(derive_seed(seed, chunk));
    const int begin = static_cast<int>(chunk) * kShotsPerChunk;
    const int end = std::min(shots, begin + kShotsPerChunk);
    // Per-chunk cache of cumulative output probabilities keyed by error pattern.
    std::vector<std::map<Pattern, std::vector<double>>> cache(blocks.size());
    Pattern pattern;
    auto& counts = chunk_counts[chunk];
    for (int s = begin; s < end; ++s) {
      Bitstring bits = 0;
      for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        const Block& b = blocks[bi];
        sample_pattern(b, block_noise[bi], rng, pattern);
        if (b.has_midcircuit) {
          Bitstring mid = 0;
          StateVector sv = run_trajectory(b, pattern, &rng, &mid, &noise.readout_flip);
          std::vector<double> cumulative = sv.probabilities();
          std::partial_sum(cumulative.begin(), cumulative.end(), cumulative.begin());
          bits |= mid | readout(b, sample_index(cumulative, uniform01(rng)), noise.readout_flip, rng);
          continue;
        }
        auto it = cache[bi].find(pattern);
        std::vector<double> local;
        const std::vector<double>* cumulative = nullptr;
        if (it != cache[bi].end()) {
          cumulative = &it->second;
        } else {
          StateVector sv = run_trajectory(b, pattern, nullptr, nullptr, nullptr);
          local = sv.probabilities();
          std::partial_sum(local.begin(), local.end(), local.begin());
          if (cache[bi].size() < config.pattern_cache_limit) {
            cumulative = &cache[bi].emplace(pattern, std::move(local)).first->second;
          } else {
            cumulative = &local;
          }
        }
        bits |= readout(b, sample_index(*cumulative, uniform01(rng)), noise.readout_flip, rng);
      }
      counts[bits]++;
    }
  });

  std::map<Bitstring, std::uint64_t> total;
  for (const auto& cc : chunk_counts) {
    for (const auto& [k, n] : cc) {
      total[k] += n;
    }
  }
  return Distribution::from_counts(c.total_clbits(), total);
}

}  // namespace qos
