#pragma once

// Dense-matrix reference used to check the statevector simulator: every gate
// is expanded to a full 2^n x 2^n unitary via Kronecker products.

#include "qos/circuit.hpp"
#include "qos/distribution.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>

namespace qos::test {

using Mat = Eigen::MatrixXcd;
using C = std::complex<double>;

inline Mat single(GateKind k, double theta) {
  Mat m(2, 2);
  const double r = 1.0 / std::sqrt(2.0);
  switch (k) {
  case GateKind::X: m << 0, 1, 1, 0; break;
  case GateKind::H: m << r, r, r, -r; break;
  case GateKind::SX: m << C(0.5, 0.5), C(0.5, -0.5), C(0.5, -0.5), C(0.5, 0.5); break;
  case GateKind::RZ: m << std::exp(C(0, -theta / 2)), 0, 0, std::exp(C(0, theta / 2)); break;
  default: throw std::logic_error("not single");
  }
  return m;
}

// Full operator for a gate; qubit q is bit q of the basis index.
inline Mat full_operator(const Gate& g, int n) {
  const std::size_t dim = std::size_t{1} << n;
  Mat u = Mat::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t col = 0; col < dim; ++col) {
    if (g.qubits.size() == 1) {
      const Mat m = single(g.kind, g.theta);
      const int q = g.qubits[0];
      const int b = static_cast<int>((col >> q) & 1U);
      for (int out = 0; out < 2; ++out) {
        const std::size_t row = (col & ~(std::size_t{1} << q)) | (static_cast<std::size_t>(out) << q);
        u(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) += m(out, b);
      }
      continue;
    }
    const int a = g.qubits[0];
    const int b = g.qubits[1];
    const int va = static_cast<int>((col >> a) & 1U);
    const int vb = static_cast<int>((col >> b) & 1U);
    std::size_t row = col;
    C phase = 1.0;
    switch (g.kind) {
    case GateKind::CX:
      if (va == 1) {
        row ^= std::size_t{1} << b;
      }
      break;
    case GateKind::CZ:
      if (va == 1 && vb == 1) {
        phase = -1.0;
      }
      break;
    case GateKind::RZZ:
      phase = std::exp(C(0, (va == vb ? -1.0 : 1.0) * g.theta / 2));
      break;
    default:
      throw std::logic_error("not two-qubit");
    }
    u(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = phase;
  }
  return u;
}

// Born distribution of a unitary circuit followed by terminal measurements
// (qubit q into bit q when the circuit has no measurement).
inline Distribution dense_distribution(const Circuit& c) {
  const int n = c.num_qubits();
  const std::size_t dim = std::size_t{1} << n;
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim));
  psi(0) = 1.0;
  std::map<int, int> bit_of;
  for (const Gate& g : c.gates()) {
    if (g.kind == GateKind::Measure) {
      bit_of[g.qubits[0]] = g.clbit;
      continue;
    }
    psi = full_operator(g, n) * psi;
  }
  if (bit_of.empty()) {
    for (int q = 0; q < n; ++q) {
      bit_of[q] = q;
    }
  }
  std::map<Bitstring, double> probs;
  for (std::size_t i = 0; i < dim; ++i) {
    const double p = std::norm(psi(static_cast<Eigen::Index>(i)));
    Bitstring bits = 0;
    for (const auto& [q, b] : bit_of) {
      if ((i >> q) & 1U) {
        bits |= Bitstring{1} << b;
      }
    }
    if (p > 1e-15) {
      probs[bits] += p;
    }
  }
  int width = c.num_clbits();
  for (const auto& [q, b] : bit_of) {
    width = std::max(width, b + 1);
  }
  return Distribution(width, probs);
}

}  // namespace qos::test
