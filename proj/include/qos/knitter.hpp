#pragma once

#include "qos/distribution.hpp"
#include "qos/virtualizer.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace qos {

// Exact floating-point sum (Shewchuk partials). value() is the correctly
// rounded total, so the result does not depend on the order of additions.
class ExactSum {
public:
  void add(double x);
  void merge(const ExactSum& other);
  double value() const;

private:
  std::vector<double> partials_;
};

struct KnitOptions {
  int partitions = 1;  // map tasks; leaves are split by their first index
  int workers = 1;
};

struct KnitResult {
  QuasiDistribution quasi;
  Distribution distribution;  // clipped and renormalized
  double clipped_mass = 0.0;
};

// Signed marginal of a variant result onto the output bits: the auxiliary
// bits (index >= num_bits) contribute (-1)^popcount.
std::map<Bitstring, double> signed_marginal(const Distribution& d, int num_bits);

// Map-reduce over the plan's leaves. `results` is keyed by variant key.
KnitResult knit(const KnitPlan& plan, const std::map<std::string, Distribution>& results,
                const KnitOptions& options = {});

// Multi-programmed bundle bookkeeping: member i owns bits [offset, offset + width).
struct BundleSlice {
  std::string qernel_id;
  int offset = 0;
  int width = 0;
};
struct UnbundleRecord {
  std::string bundle_id;
  std::vector<BundleSlice> slices;
};

std::vector<Distribution> unbundle(const Distribution& result, const UnbundleRecord& rec);

// Answer selection for frozen qubits: one conditional distribution per
// assignment of the frozen bits, scored by the expected objective.
struct FrozenChoice {
  Bitstring assignment = 0;
  double weight = 0.0;
  Distribution conditional;
  double objective = 0.0;
};
struct FrozenReport {
  std::vector<FrozenChoice> choices;
  int selected = -1;
};
FrozenReport select_frozen(const Distribution& knitted, Bitstring frozen_mask,
                           const std::function<double(Bitstring)>& objective);

}  // namespace qos
