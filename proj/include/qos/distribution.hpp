#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace qos {

// Bit i of a Bitstring is classical bit i. Rendered as text, the leftmost
// character is the highest bit index.
using Bitstring = std::uint64_t;

std::string bitstring_to_string(Bitstring bits, int width);
Bitstring bitstring_from_string(std::string_view text);

// Probability distribution over bitstrings of a fixed width.
class Distribution {
public:
  Distribution() = default;
  explicit Distribution(int num_bits) : num_bits_(num_bits) {}
  Distribution(int num_bits, std::map<Bitstring, double> probs);

  static Distribution point(int num_bits, Bitstring bits);
  static Distribution from_counts(int num_bits, const std::map<Bitstring, std::uint64_t>& counts);

  int num_bits() const { return num_bits_; }
  const std::map<Bitstring, double>& probabilities() const { return probs_; }
  double probability(Bitstring bits) const;
  std::size_t support_size() const { return probs_.size(); }
  double total() const;
  Bitstring most_likely() const;

  // Distribution over the given bits; bit i of the result is bits[i].
  Distribution marginal(const std::vector<int>& bits) const;

  // Throws std::invalid_argument unless entries are >= 0 and sum to 1 within tol.
  void validate(double tol = 1e-9) const;

  bool operator==(const Distribution&) const = default;

private:
  int num_bits_ = 0;
  std::map<Bitstring, double> probs_;
};

// Signed coefficients produced while knitting cut circuits.
class QuasiDistribution {
public:
  QuasiDistribution() = default;
  explicit QuasiDistribution(int num_bits) : num_bits_(num_bits) {}

  int num_bits() const { return num_bits_; }
  const std::map<Bitstring, double>& values() const { return values_; }
  std::map<Bitstring, double>& values() { return values_; }
  void add(Bitstring bits, double value) { values_[bits] += value; }
  double negative_mass() const;

  // Clips negative entries to zero and renormalizes. The clipped (negative)
  // mass is written to clipped_mass when non-null.
  Distribution to_distribution(double* clipped_mass = nullptr) const;

private:
  int num_bits_ = 0;
  std::map<Bitstring, double> values_;
};

// (1 - H^2)^2 with H the Hellinger distance.
double hellinger_fidelity(const Distribution& p, const Distribution& q);
double total_variation(const Distribution& p, const Distribution& q);

// `bitstring<TAB>value` lines sorted by bitstring.
std::string format_distribution(const Distribution& d);
Distribution parse_distribution(std::string_view text);
Distribution load_distribution(const std::string& path);
void save_distribution(const Distribution& d, const std::string& path);

}  // namespace qos
