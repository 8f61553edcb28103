#include "qos/distribution.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qos {

std::string bitstring_to_string(Bitstring bits, int width) {
  std::string s(static_cast<std::size_t>(width), '0');
  for (int i = 0; i < width; ++i) {
    if ((bits >> i) & 1U) {
      s[static_cast<std::size_t>(width - 1 - i)] = '1';
    }
  }
  return s;
}

Bitstring bitstring_from_string(std::string_view text) {
  if (text.size() > 64) {
    throw std::invalid_argument("bitstring wider than 64 bits");
  }
  Bitstring bits = 0;
  for (char ch : text) {
    if (ch != '0' && ch != '1') {
      throw std::invalid_argument("invalid bitstring '" + std::string(text) + "'");
    }
    bits = (bits << 1) | static_cast<Bitstring>(ch == '1');
  }
  return bits;
}

Distribution::Distribution(int num_bits, std::map<Bitstring, double> probs)
    : num_bits_(num_bits), probs_(std::move(probs)) {}

Distribution Distribution::point(int num_bits, Bitstring bits) {
  return Distribution(num_bits, {{bits, 1.0}});
}

Distribution Distribution::from_counts(int num_bits,
                                       const std::map<Bitstring, std::uint64_t>& counts) {
  std::uint64_t shots = 0;
  for (const auto& [bits, n] : counts) {
    shots += n;
  }
  Distribution d(num_bits);
  if (shots == 0) {
    return d;
  }
  for (const auto& [bits, n] : counts) {
    if (n > 0) {
      d.probs_[bits] = static_cast<double>(n) / static_cast<double>(shots);
    }
  }
  return d;
}

double Distribution::probability(Bitstring bits) const {
  const auto it = probs_.find(bits);
  return it == probs_.end() ? 0.0 : it->second;
}

double Distribution::total() const {
  double s = 0.0;
  for (const auto& [bits, p] : probs_) {
    s += p;
  }
  return s;
}

Bitstring Distribution::most_likely() const {
  Bitstring best = 0;
  double best_p = -1.0;
  for (const auto& [bits, p] : probs_) {
    if (p > best_p) {
      best_p = p;
      best = bits;
    }
  }
  return best;
}

Distribution Distribution::marginal(const std::vector<int>& bits) const {
  Distribution out(static_cast<int>(bits.size()));
  for (const auto& [key, p] : probs_) {
    Bitstring sub = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      sub |= ((key >> bits[i]) & 1U) << i;
    }
    out.probs_[sub] += p;
  }
  return out;
}

void Distribution::validate(double tol) const {
  double s = 0.0;
  for (const auto& [bits, p] : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("negative or non-finite probability");
    }
    if (num_bits_ < 64 && (bits >> num_bits_) != 0) {
      throw std::invalid_argument("bitstring wider than distribution");
    }
    s += p;
  }
  if (std::abs(s - 1.0) > tol) {
    throw std::invalid_argument("probabilities sum to " + std::to_string(s));
  }
}

double QuasiDistribution::negative_mass() const {
  double m = 0.0;
  for (const auto& [bits, v] : values_) {
    if (v < 0.0) {
      m -= v;
    }
  }
  return m;
}

Distribution QuasiDistribution::to_distribution(double* clipped_mass) const {
  double positive = 0.0;
  for (const auto& [bits, v] : values_) {
    if (v > 0.0) {
      positive += v;
    }
  }
  if (clipped_mass != nullptr) {
    *clipped_mass = negative_mass();
  }
  std::map<Bitstring, double> probs;
  if (positive <= 0.0) {
    return Distribution(num_bits_, std::move(probs));
  }
  // An already normalized input is passed through unchanged.
  const bool rescale = negative_mass() > 0.0 || std::abs(positive - 1.0) > 1e-12;
  for (const auto& [bits, v] : values_) {
    if (v > 0.0) {
      probs.emplace(bits, rescale ? v / positive : v);
    }
  }
  return Distribution(num_bits_, std::move(probs));
}

namespace {

void require_same_width(const Distribution& p, const Distribution& q) {
  if (p.num_bits() != q.num_bits()) {
    throw std::invalid_argument("distributions over different bitstring lengths (" +
                                std::to_string(p.num_bits()) + " vs " +
                                std::to_string(q.num_bits()) + ")");
  }
}

}  // namespace

double hellinger_fidelity(const Distribution& p, const Distribution& q) {
  require_same_width(p, q);
  bool equal = true;
  double overlap = 0.0;
  auto ip = p.probabilities().begin();
  auto iq = q.probabilities().begin();
  const auto ep = p.probabilities().end();
  const auto eq = q.probabilities().end();
  while (ip != ep || iq != eq) {
    if (iq == eq || (ip != ep && ip->first < iq->first)) {
      equal = equal && std::abs(ip->second) <= 1e-12;
      ++ip;
    } else if (ip == ep || iq->first < ip->first) {
      equal = equal && std::abs(iq->second) <= 1e-12;
      ++iq;
    } else {
      equal = equal && std::abs(ip->second - iq->second) <= 1e-12;
      overlap += std::sqrt(ip->second * iq->second);
      ++ip;
      ++iq;
    }
  }
  if (equal) {
    return 1.0;
  }
  // 1 - H^2 equals the Bhattacharyya coefficient.
  const double fid = overlap * overlap;
  return std::clamp(fid, 0.0, 1.0);
}

double total_variation(const Distribution& p, const Distribution& q) {
  require_same_width(p, q);
  std::set<Bitstring> keys;
  for (const auto& [k, v] : p.probabilities()) {
    keys.insert(k);
  }
  for (const auto& [k, v] : q.probabilities()) {
    keys.insert(k);
  }
  double tv = 0.0;
  for (Bitstring k : keys) {
    tv += std::abs(p.probability(k) - q.probability(k));
  }
  return 0.5 * tv;
}

std::string format_distribution(const Distribution& d) {
  std::ostringstream out;
  for (const auto& [bits, p] : d.probabilities()) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), p);
    out << bitstring_to_string(bits, d.num_bits()) << '\t' << std::string_view(buf.data(), static_cast<std::size_t>(ptr - buf.data()))
        << '\n';
  }
  return out.str();
}

Distribution parse_distribution(std::string_view text) {
  std::map<Bitstring, double> probs;
  int width = -1;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
      line.remove_suffix(1);
    }
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw std::invalid_argument("distribution line " + std::to_string(line_no) +
                                  ": expected bitstring<TAB>value");
    }
    const std::string_view key = line.substr(0, tab);
    const std::string_view val = line.substr(tab + 1);
    if (width >= 0 && static_cast<int>(key.size()) != width) {
      throw std::invalid_argument("distribution line " + std::to_string(line_no) +
                                  ": inconsistent bitstring length");
    }
    width = static_cast<int>(key.size());
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
    if (ec != std::errc{} || ptr != val.data() + val.size()) {
      throw std::invalid_argument("distribution line " + std::to_string(line_no) +
                                  ": bad value");
    }
    probs[bitstring_from_string(key)] += v;
  }
  return Distribution(std::max(width, 0), std::move(probs));
}

Distribution load_distribution(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open distribution file '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_distribution(ss.str());
}

void save_distribution(const Distribution& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write distribution file '" + path + "'");
  }
  out << format_distribution(d);
}

}  // namespace qos
