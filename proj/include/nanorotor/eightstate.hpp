// Copyright 2026 The nanorotor Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nanorotor/angular.hpp"
#include "nanorotor/core.hpp"
#include "nanorotor/rotor.hpp"

namespace nanorotor::eightstate {

using Matrix7 = Eigen::Matrix<cplx, 7, 7>;
using Matrix8 = Eigen::Matrix<cplx, 8, 8>;
using Vector8 = Eigen::Matrix<cplx, 8, 1>;

/// Packet amplitudes on xi_1..xi_7 (xi_n centred at beta = n pi/8) and a global phase.
struct EightState {
  std::array<cplx, 7> amplitudes{};
  double global_phase = 0.0;

  double norm2() const {
    double s = 0.0;
    for (const auto& a : amplitudes) s += std::norm(a);
    return s;
  }
};

struct Model {
  Matrix7 M;                  // rows l = 1..7, columns n = 1..7
  std::array<double, 9> nu{};  // nu[l] for l = 1..8; nu[0] = 0 is the initial state
};

inline Model m_matrix() {
  const double s = std::sqrt(2.0);
  const cplx i(0.0, 1.0);
  Model m;
  m.M << 1, 0, 1, 0, 1, 0, 1,
         0, s, 0, 0, 0, s, 0,
         1, 0, i, 0, -i, 0, -1,
         0, 0, 0, 2, 0, 0, 0,
         1, 0, -1, 0, -1, 0, 1,
         0, s, 0, 0, 0, -s, 0,
         1, 0, -i, 0, i, 0, -1;
  m.M *= 0.5;
  m.nu = {0.0, 0.0, 0.0, -pi / 8, 0.0, pi / 2, pi / 4, 3 * pi / 8, 0.0};
  return m;
}

/// psi_l = U(l T_rev/8) psi_0 as a packet superposition, l = 1..7.
inline EightState state_at(int l) {
  if (l < 1 || l > 7) throw DomainError("packet states exist for l = 1..7");
  const auto m = m_matrix();
  EightState s;
  for (int n = 0; n < 7; ++n) s.amplitudes[n] = m.M(l - 1, n);
  s.global_phase = m.nu[l];
  return s;
}

/// Diagonal phase imprinted on the packets, exp(i sqrt2 phi cos^2(n pi/8)).
inline Matrix7 pulse_gate(double phi) {
  Matrix7 g = Matrix7::Zero();
  for (int n = 1; n <= 7; ++n) g(n - 1, n - 1) = std::polar(1.0, std::sqrt(2.0) * phi * std::pow(std::cos(n * pi / 8), 2));
  return g;
}

/// One T_rev/8 step on span{psi_0, xi_1..xi_7}, fixed by U psi_l = psi_{l+1}
/// with psi_8 = psi_0.
inline Matrix8 fractional_propagator() {
  const auto m = m_matrix();
  auto psi = [&](int l) {
    Vector8 v = Vector8::Zero();
    if (l % 8 == 0) {
      v[0] = 1.0;
      return v;
    }
    for (int n = 0; n < 7; ++n) v[n + 1] = std::polar(1.0, m.nu[l]) * m.M(l - 1, n);
    return v;
  };
  Matrix8 u = Matrix8::Zero();
  u.col(0) = psi(1);
  // xi_n = sum_l conj(M_ln) e^{-i nu_l} psi_l over l = 1..7.
  for (int n = 0; n < 7; ++n)
    for (int l = 1; l <= 7; ++l) u.col(n + 1) += std::conj(m.M(l - 1, n)) * std::polar(1.0, -m.nu[l]) * psi(l + 1);
  return u;
}

inline Vector8 embed(const EightState& s) {
  Vector8 v = Vector8::Zero();
  for (int n = 0; n < 7; ++n) v[n + 1] = std::polar(1.0, s.global_phase) * s.amplitudes[n];
  return v;
}

/// Amplitudes on (psi_0, xi_4) after U^7 * gate(phi) * U applied to psi_0.
inline std::pair<cplx, cplx> interfere(double phi) {
  const Matrix8 u = fractional_propagator();
  Matrix8 g = Matrix8::Identity();
  g.bottomRightCorner<7, 7>() = pulse_gate(phi);
  Vector8 v = Vector8::Zero();
  v[0] = 1.0;
  v = g * (u * v);
  for (int s = 0; s < 7; ++s) v = u * v;
  return {v[0], v[4]};
}

/// Packet amplitudes read off simulated m = k = 0 states psi[l-1] = U(l/8) psi_0,
/// l = 1..7, by overlaps on |beta - n pi/8| < pi/16 (measure sin(beta) dbeta).
/// Packet shapes are fixed by psi_1 (odd n), psi_2 (n = 2, 6) and psi_4 (n = 4);
/// the returned (l, n) entry estimates e^{i nu_l} M_ln.
inline Matrix7 extract_packet_amplitudes(const std::vector<CVector>& psi) {
  if (psi.size() != 7) throw DomainError("need the seven states psi_1..psi_7");
  const auto model = m_matrix();
  const int jmax = static_cast<int>(psi[0].size()) - 1;
  Matrix7 out = Matrix7::Zero();
  for (int n = 1; n <= 7; ++n) {
    const int ref = (n % 2) ? 1 : (n == 4 ? 4 : 2);
    const auto g = angular::make_window_grid(n * pi / 8 - pi / 16, n * pi / 8 + pi / 16, angular::default_grid_order(jmax));
    const angular::WignerTable table(g, jmax, 0, 0);
    std::vector<std::vector<cplx>> samples;
    for (const auto& c : psi) samples.push_back(angular::synthesize_beta(c, table, g).psi);
    auto inner = [&](int a, int b) {
      cplx acc = 0.0;
      for (int i = 0; i < g.order; ++i) acc += g.weights[i] * std::conj(samples[a - 1][i]) * samples[b - 1][i];
      return acc;
    };
    const cplx scale = std::polar(1.0, model.nu[ref]) * model.M(ref - 1, n - 1) / inner(ref, ref);
    for (int l = 1; l <= 7; ++l) out(l - 1, n - 1) = scale * inner(ref, l);
  }
  return out;
}

/// Delta weights of u_c(beta; T_rev/q) at beta_l = 2 pi l / P (P = 2q), from
/// summing the j-periodic phases by residue class.
inline std::vector<std::pair<double, cplx>> resummed_deltas(int q) {
  if (q < 1) throw DomainError("q must be positive");
  const int P = 2 * q;
  std::vector<std::pair<double, cplx>> out;
  for (int l = 1; 2 * l < P; ++l) {
    const double beta = 2.0 * pi * l / P;
    cplx w = 0.0;
    for (int r = 0; r < P; ++r) {
      const double ph = -pi * std::fmod(static_cast<double>(r) * (r + 1) / q, 2.0);
      w += std::polar(1.0, ph) * std::cos((r + 0.5) * beta);
    }
    w /= static_cast<double>(P);
    if (std::abs(w) > 1e-12) out.emplace_back(beta, w);
  }
  return out;
}

/// Closed-form weight of the packet at (2n+1) pi/8 in u_c(beta; T_rev/8).
inline cplx eighth_revival_weight(int n) {
  return std::sqrt(2.0) / 4.0 * std::polar(1.0, -3.0 * pi / 16.0) * std::polar(1.0, n * (n + 1) * pi / 8.0);
}

struct ResumResult {
  double t_fraction = 0.0;
  double damping = 0.0;
  int jmax = 0;
  std::vector<double> locations;
  std::vector<cplx> weights;
  std::vector<double> predicted_locations;
  std::vector<cplx> predicted_weights;
};

/// Damped u_c(beta; t) = (1/pi) sum_j e^{-i pi j(j+1) t} e^{-eta^2 j^2/2} cos((j+1/2) beta).
inline cplx damped_uc(double beta, const std::vector<cplx>& a) {
  cplx acc = 0.0;
  // cos((j+1/2) beta) by the Chebyshev recurrence in j.
  const double c1 = 2.0 * std::cos(beta);
  double prev = std::cos(-0.5 * beta), cur = std::cos(0.5 * beta);
  for (size_t j = 0; j < a.size(); ++j) {
    acc += a[j] * cur;
    const double next = c1 * cur - prev;
    prev = cur;
    cur = next;
  }
  return acc / pi;
}

inline ResumResult resum_check(double t_fraction, double damping) {
  int q = 0;
  if (t_fraction == 0.125) q = 8;
  if (t_fraction == 0.25) q = 4;
  if (t_fraction == 0.5) q = 2;
  if (q == 0) throw DomainError("t_fraction must be 1/8, 1/4 or 1/2");
  if (!(damping > 0.0 && damping <= 0.05)) throw DomainError("damping must lie in (0, 0.05]");
  ResumResult r;
  r.t_fraction = t_fraction;
  r.damping = damping;
  r.jmax = static_cast<int>(std::ceil(10.0 / damping)) + 1;
  std::vector<cplx> a(r.jmax + 1);
  for (int j = 0; j <= r.jmax; ++j)
    a[j] = std::polar(std::exp(-0.5 * damping * damping * j * j), -pi * std::fmod(static_cast<double>(j) * (j + 1) * t_fraction, 2.0));

  const double h = damping / 20.0;
  const int nb = static_cast<int>(pi / h);
  std::vector<double> mag(nb + 1);
  for (int i = 0; i <= nb; ++i) mag[i] = std::abs(damped_uc(i * h, a));
  const double top = *std::max_element(mag.begin() + 1, mag.end() - 1);
  const double halfwidth = pi / q / 2.0;
  const double kernel_mass = std::erf(halfwidth / (std::sqrt(2.0) * damping));
  const auto rule = angular::make_grid(r.jmax / 2 + 64);
  for (int i = 1; i < nb; ++i) {
    if (!(mag[i] > mag[i - 1] && mag[i] >= mag[i + 1] && mag[i] > 0.25 * top)) continue;
    const double d1 = mag[i + 1] - mag[i - 1], d2 = mag[i + 1] - 2.0 * mag[i] + mag[i - 1];
    const double beta = i * h - (d2 != 0.0 ? 0.5 * h * d1 / d2 : 0.0);
    r.locations.push_back(beta);
    // Integral of u_c over the window, by Gauss-Legendre in beta.
    cplx w = 0.0;
    for (int k = 0; k < rule.order; ++k)
      w += halfwidth * rule.weights[k] * damped_uc(beta + halfwidth * rule.cosines[k], a);
    r.weights.push_back(w / kernel_mass);
  }
  for (const auto& [b, w] : resummed_deltas(q)) {
    r.predicted_locations.push_back(b);
    r.predicted_weights.push_back(w);
  }
  return r;
}

}  // namespace nanorotor::eightstate
