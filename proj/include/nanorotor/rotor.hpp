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
#include <map>
#include <string>
#include <vector>

#include <lapacke.h>

#include "nanorotor/angular.hpp"
#include "nanorotor/core.hpp"

namespace nanorotor::rotor {

/// Rigid-body data. I_c is about the symmetry axis; I_a >= I_b are transverse.
struct InertiaModel {
  std::array<double, 3> semi_axes{0.0, 0.0, 0.0};  // m; the third is the symmetry axis
  double density = 0.0;                             // kg/m^3
  double mass = 0.0;                                // kg
  double I_a = 0.0, I_b = 0.0, I_c = 0.0;           // kg m^2
  double b_asym = 0.0;
  double T_rev = 0.0;  // s
  bool degenerate = false;

  double I() const { return 0.5 * (I_a + I_b); }
  double ratio() const { return I() / I_c; }
  double mass_amu() const { return mass / constants::amu; }
};

inline double asymmetry_parameter(double Ia, double Ib, double Ic) {
  const double den = 2.0 / Ic - 1.0 / Ia - 1.0 / Ib;
  if (den == 0.0) return 0.0;
  return (1.0 / Ia - 1.0 / Ib) / den;
}

inline InertiaModel inertia_from_ellipsoid(std::array<double, 3> semi_axes, double density) {
  for (double a : semi_axes)
    if (!(a > 0.0)) throw DomainError("semi-axes must be positive");
  if (!(density > 0.0)) throw DomainError("density must be positive");
  InertiaModel m;
  m.semi_axes = semi_axes;
  m.density = density;
  const double a = semi_axes[0], b = semi_axes[1], c = semi_axes[2];
  m.mass = 4.0 / 3.0 * pi * a * b * c * density;
  m.I_c = m.mass * (a * a + b * b) / 5.0;
  const double Ix = m.mass * (b * b + c * c) / 5.0;
  const double Iy = m.mass * (a * a + c * c) / 5.0;
  m.I_a = std::max(Ix, Iy);
  m.I_b = std::min(Ix, Iy);
  const double tol = 1e-12 * m.I_a;
  m.degenerate = std::abs(m.I_a - m.I_c) < tol && std::abs(m.I_b - m.I_c) < tol;
  m.b_asym = m.degenerate ? 0.0 : asymmetry_parameter(m.I_a, m.I_b, m.I_c);
  m.T_rev = 2.0 * pi * m.I() / constants::hbar;
  return m;
}

/// Rotor from the mean transverse moment I, ratio I/I_c and |b|; I_a >= I_b.
inline InertiaModel inertia_direct(double I, double ratio, double b_abs) {
  if (!(I > 0.0) || !(ratio > 0.0) || b_abs < 0.0) throw DomainError("invalid direct rotor parameters");
  InertiaModel m;
  m.mass = 0.0;
  double eps = 0.0;
  if (b_abs > 0.0) eps = 2.0 * b_abs * (ratio - 1.0) / (1.0 + std::sqrt(1.0 + 4.0 * b_abs * b_abs * ratio * (ratio - 1.0)));
  m.I_a = I * (1.0 + eps);
  m.I_b = I * (1.0 - eps);
  m.I_c = I / ratio;
  m.b_asym = asymmetry_parameter(m.I_a, m.I_b, m.I_c);
  m.T_rev = 2.0 * pi * I / constants::hbar;
  return m;
}

enum class SpectrumKind { symmetric, asymmetric, perturbative };
enum class AssignmentPolicy { strict, lenient };

inline std::string to_string(SpectrumKind k) {
  switch (k) {
    case SpectrumKind::symmetric: return "symmetric";
    case SpectrumKind::asymmetric: return "asymmetric";
    case SpectrumKind::perturbative: return "perturbative";
  }
  return "?";
}

/// Rotational energies in units of hbar^2/(2I), so the phase over dt (in units
/// of T_rev) is pi * E * dt. Stored as residual = E - j(j+1) per (j, |k|).
struct SpectrumModel {
  SpectrumKind kind = SpectrumKind::symmetric;
  double ratio = 1.0;
  int jmax = 0;
  int kmax = 0;
  std::vector<double> residual;
  std::vector<double> purity;
  double min_purity = 1.0;

  bool covers(int j, int k) const { return j <= jmax && std::abs(k) <= kmax; }
  double residual_at(int j, int k) const {
    return residual[static_cast<size_t>(j) * (kmax + 1) + std::abs(k)];
  }
  double energy(int j, int k) const { return j * (j + 1.0) + residual_at(j, k); }
  /// pi * E * dt, reduced mod 2 pi piecewise so dyadic times stay exact.
  double phase(int j, int k, double dt) const {
    const double n = static_cast<double>(j) * (j + 1);
    return pi * (std::fmod(n * dt, 2.0) + std::fmod(residual_at(j, k) * dt, 2.0));
  }
};

namespace detail {

struct RotorCoefficients {
  double a, b, c;  // I/I_a, I/I_b, I/I_c
};

inline RotorCoefficients coefficients(const InertiaModel& m) {
  const double I = m.I();
  return {I / m.I_a, I / m.I_b, I / m.I_c};
}

inline double ladder2(int j, int k) {
  // <k+2| J_+^2 |k>
  const double v = static_cast<double>(j - k) * (j + k + 1) * (j - k - 1) * (j + k + 2);
  return v > 0.0 ? std::sqrt(v) : 0.0;
}

struct BlockResult {
  std::vector<double> values;
  std::vector<double> purity;
};

// Lowest `count` eigenpairs of a symmetric tridiagonal matrix; purity is the
// squared weight of the i-th eigenvector on the i-th basis element.
inline BlockResult lowest_levels(std::vector<double> diag, std::vector<double> off, int count) {
  const int n = static_cast<int>(diag.size());
  BlockResult r;
  if (n == 0 || count <= 0) return r;
  count = std::min(count, n);
  if (n == 1) {
    r.values = {diag[0]};
    r.purity = {1.0};
    return r;
  }
  std::vector<double> w(n), z(static_cast<size_t>(n) * count);
  std::vector<lapack_int> isuppz(2 * static_cast<size_t>(n));
  lapack_int found = 0;
  off.push_back(0.0);
  const lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', n, diag.data(), off.data(), 0.0, 0.0, 1, count,
                                         0.0, &found, w.data(), z.data(), n, isuppz.data());
  if (info != 0 || found != count) throw IntegrationError("tridiagonal eigensolver failed");
  for (int i = 0; i < count; ++i) {
    r.values.push_back(w[i]);
    const double c = z[static_cast<size_t>(i) * n + i];
    r.purity.push_back(c * c);
  }
  return r;
}

}  // namespace detail

/// Energies for j <= jmax, |k| <= kmax.
inline SpectrumModel rotational_energies(int jmax, int kmax, const InertiaModel& model, SpectrumKind method,
                                         AssignmentPolicy policy = AssignmentPolicy::strict) {
  if (kmax > jmax || kmax < 0 || jmax < 0) throw DomainError("need 0 <= kmax <= jmax");
  SpectrumModel s;
  s.kind = method;
  s.ratio = model.ratio();
  s.jmax = jmax;
  s.kmax = kmax;
  const size_t stride = kmax + 1;
  s.residual.assign((jmax + 1) * stride, 0.0);
  s.purity.assign((jmax + 1) * stride, 1.0);
  const auto co = detail::coefficients(model);
  const double M = 0.5 * (co.a + co.b);
  const double D = 0.25 * (co.a - co.b);

  if (method == SpectrumKind::symmetric) {
    for (int j = 0; j <= jmax; ++j)
      for (int k = 0; k <= std::min(j, kmax); ++k) s.residual[j * stride + k] = (s.ratio - 1.0) * k * k;
    return s;
  }

  auto diag_of = [&](int j, int k) { return M * (j * (j + 1.0) - k * k) + co.c * k * k; };

  if (method == SpectrumKind::perturbative) {
    for (int j = 0; j <= jmax; ++j)
      for (int k = 0; k <= std::min(j, kmax); ++k) {
        double e = diag_of(j, k);
        const double ek = e;
        if (k + 2 <= j) {
          const double v = D * detail::ladder2(j, k);
          e += v * v / (ek - diag_of(j, k + 2));
        }
        if (k - 2 >= -j && k != 1) {
          const double v = D * detail::ladder2(j, k - 2);
          e += v * v / (ek - diag_of(j, k - 2));
        }
        s.residual[j * stride + k] = e - j * (j + 1.0);
      }
    return s;
  }

  if (co.c < M) throw DomainError("asymmetric level assignment requires a prolate rotor");
  // Exact per-j diagonalization in the four Wang blocks.
  for (int j = 0; j <= jmax; ++j) {
    const int kj = std::min(j, kmax);
    auto block = [&](int k_first, bool plus_sign_k0, double k1_shift) {
      std::vector<double> d, o;
      for (int k = k_first; k <= j; k += 2) d.push_back(diag_of(j, k));
      if (k_first == 1 && !d.empty()) d[0] += k1_shift * D * detail::ladder2(j, -1);
      for (int k = k_first; k + 2 <= j; k += 2) {
        double v = D * detail::ladder2(j, k);
        if (k == 0 && plus_sign_k0) v *= std::sqrt(2.0);
        o.push_back(v);
      }
      const int need = (kj >= k_first) ? (kj - k_first) / 2 + 1 : 0;
      return detail::lowest_levels(d, o, need);
    };
    const auto ep = block(0, true, 0.0);
    const auto em = block(2, false, 0.0);
    const auto op = block(1, false, +1.0);
    const auto om = block(1, false, -1.0);
    for (int k = 0; k <= kj; ++k) {
      double e, p;
      if (k == 0) {
        e = ep.values[0];
        p = ep.purity[0];
      } else if (k % 2 == 0) {
        const int i = k / 2;
        e = 0.5 * (ep.values[i] + em.values[i - 1]);
        p = std::min(ep.purity[i], em.purity[i - 1]);
      } else {
        const int i = (k - 1) / 2;
        e = 0.5 * (op.values[i] + om.values[i]);
        p = std::min(op.purity[i], om.purity[i]);
      }
      s.residual[j * stride + k] = e - j * (j + 1.0);
      s.purity[j * stride + k] = p;
      s.min_purity = std::min(s.min_purity, p);
      if (policy == AssignmentPolicy::strict && p < 0.5)
        throw AssignmentError("level assignment ambiguous at j=" + std::to_string(j) + " k=" + std::to_string(k) +
                              " (purity " + std::to_string(p) + ")");
    }
  }
  return s;
}

/// All 2j+1 asymmetric-top levels at fixed j (units of hbar^2/(2I)), ascending.
inline std::vector<double> asymmetric_levels(int j, const InertiaModel& model) {
  const auto co = detail::coefficients(model);
  const double M = 0.5 * (co.a + co.b);
  const double D = 0.25 * (co.a - co.b);
  auto diag_of = [&](int k) { return M * (j * (j + 1.0) - k * k) + co.c * k * k; };
  std::vector<double> all;
  auto block = [&](int k_first, bool sqrt2_k0, double k1_shift) {
    std::vector<double> d, o;
    for (int k = k_first; k <= j; k += 2) d.push_back(diag_of(k));
    if (k_first == 1 && !d.empty()) d[0] += k1_shift * D * detail::ladder2(j, -1);
    for (int k = k_first; k + 2 <= j; k += 2) o.push_back(D * detail::ladder2(j, k) * ((k == 0 && sqrt2_k0) ? std::sqrt(2.0) : 1.0));
    const auto r = detail::lowest_levels(d, o, static_cast<int>(d.size()));
    all.insert(all.end(), r.values.begin(), r.values.end());
  };
  block(0, true, 0.0);
  block(2, false, 0.0);
  block(1, false, +1.0);
  block(1, false, -1.0);
  std::sort(all.begin(), all.end());
  return all;
}

/// Pure component of a k-diagonal mixture: amplitudes per m sector, indexed by j.
struct Component {
  int k0 = 0;
  double weight = 1.0;
  std::map<int, CVector> sectors;

  double norm2() const {
    double n = 0.0;
    for (const auto& [m, v] : sectors) n += v.squaredNorm();
    return n;
  }
  void normalize() {
    const double n = std::sqrt(norm2());
    if (n > 0.0)
      for (auto& [m, v] : sectors) v /= n;
  }
};

struct RotorState {
  int jmax = 0;
  double time = 0.0;
  std::map<int, Component> components;  // keyed by k0
  Diagnostics diagnostics;

  int jmin() const {
    int lo = jmax;
    for (const auto& [k0, c] : components)
      for (const auto& [m, v] : c.sectors) lo = std::min(lo, std::max(std::abs(m), std::abs(k0)));
    return lo;
  }
  double total_weight() const {
    double w = 0.0;
    for (const auto& [k0, c] : components) w += c.weight;
    return w;
  }
};

enum class StateMode { gaussian_beta, gaussian_j };

struct StateSpec {
  StateMode mode = StateMode::gaussian_j;
  double sigma_beta = 3e-3;
  double sigma_j2 = 800.0;
};

inline constexpr double tail_tolerance = 1e-10;
inline constexpr int truncation_guard = 8;

namespace detail {

inline void validate(const StateSpec& spec) {
  if (spec.mode == StateMode::gaussian_beta && !(spec.sigma_beta > 0.0))
    throw DomainError("sigma_beta must be positive");
  if (spec.mode == StateMode::gaussian_j && !(spec.sigma_j2 > 0.0)) throw DomainError("sigma_j2 must be positive");
}

inline int cumulative_cut(const CVector& c) {
  const double total = c.squaredNorm();
  double acc = 0.0;
  for (int j = 0; j < c.size(); ++j) {
    acc += std::norm(c[j]);
    if (acc >= (1.0 - tail_tolerance) * total) return j;
  }
  return static_cast<int>(c.size()) - 1;
}

inline CVector gaussian_j_coeffs(double sigma_j2, int k0, int jmax) {
  CVector c = CVector::Zero(jmax + 1);
  for (int j = std::abs(k0); j <= jmax; ++j) c[j] = std::exp(-static_cast<double>(j) * j / (2.0 * sigma_j2));
  return c;
}

inline std::vector<cplx> gaussian_beta_samples(double sigma_beta, const angular::AngularGrid& g) {
  std::vector<cplx> psi(g.order);
  for (int i = 0; i < g.order; ++i) {
    const double s = std::sin(g.nodes[i]);
    psi[i] = std::exp(-s * s / (4.0 * sigma_beta * sigma_beta));
  }
  return psi;
}

}  // namespace detail

/// Smallest jmax with cumulative weight >= 1 - 1e-10, plus the guard band,
/// evaluated for k0 = 0; nonzero k0 adds |k0| to this estimate.
inline int truncation_jmax(const StateSpec& spec, int k0 = 0) {
  detail::validate(spec);
  int cut;
  if (spec.mode == StateMode::gaussian_j) {
    const int trial = static_cast<int>(std::ceil(std::sqrt(2.0 * spec.sigma_j2 * 40.0))) + 16;
    cut = detail::cumulative_cut(detail::gaussian_j_coeffs(spec.sigma_j2, 0, trial));
  } else {
    const int trial = std::max(64, static_cast<int>(std::ceil(5.0 / spec.sigma_beta)) + 32);
    const auto g = angular::make_grid(angular::default_grid_order(trial));
    const auto p = angular::project_beta(detail::gaussian_beta_samples(spec.sigma_beta, g), 0, trial, g);
    cut = detail::cumulative_cut(p.coeffs);
  }
  return cut + truncation_guard + std::abs(k0);
}

/// Aligned pure state with m = k = k0.
inline RotorState prepare_aligned_state(const StateSpec& spec, int k0, int jmax) {
  detail::validate(spec);
  if (jmax < std::abs(k0)) throw DomainError("jmax below |k0|");
  RotorState st;
  st.jmax = jmax;
  Component comp;
  comp.k0 = k0;
  CVector c;
  double captured = 1.0;
  if (spec.mode == StateMode::gaussian_j) {
    const int wide = std::max(jmax, truncation_jmax(spec, k0) + 64);
    const CVector full = detail::gaussian_j_coeffs(spec.sigma_j2, k0, wide);
    c = full.head(jmax + 1);
    captured = c.squaredNorm() / full.squaredNorm();
  } else {
    const auto g = angular::make_grid(angular::default_grid_order(jmax));
    const auto p = angular::project_beta(detail::gaussian_beta_samples(spec.sigma_beta, g), k0, jmax, g);
    c = p.coeffs;
    captured = p.captured_norm;
  }
  const int needed = truncation_jmax(spec, 0) + std::abs(k0);
  if (captured < 1.0 - tail_tolerance || jmax < needed)
    st.diagnostics.warn("truncation: jmax=" + std::to_string(jmax) + " k0=" + std::to_string(k0) +
                        " captured norm " + std::to_string(captured) + " (rule asks for jmax >= " +
                        std::to_string(needed) + ")");
  st.diagnostics.record_min("captured_norm_min", captured);
  c.normalize();
  comp.sectors[k0] = c;
  st.components[k0] = std::move(comp);
  return st;
}

/// Mixture over k0 with Gaussian weights, |k0| <= ceil(4 sigma_k).
inline RotorState prepare_mixture(const StateSpec& spec, double sigma_k, int jmax) {
  if (sigma_k < 0.0) throw DomainError("sigma_k must be non-negative");
  if (sigma_k == 0.0) return prepare_aligned_state(spec, 0, jmax);
  const int kcut = static_cast<int>(std::ceil(4.0 * sigma_k));
  RotorState st;
  st.jmax = jmax;
  double total = 0.0;
  for (int k0 = -kcut; k0 <= kcut; ++k0) total += std::exp(-k0 * k0 / (2.0 * sigma_k * sigma_k));
  for (int k0 = -kcut; k0 <= kcut; ++k0) {
    auto one = prepare_aligned_state(spec, k0, jmax);
    auto comp = std::move(one.components.at(k0));
    comp.weight = std::exp(-k0 * k0 / (2.0 * sigma_k * sigma_k)) / total;
    st.components[k0] = std::move(comp);
    st.diagnostics.merge(one.diagnostics);
  }
  return st;
}

/// Zero-pads every sector to a larger jmax (headroom for couplings that raise j).
inline RotorState extend_basis(RotorState s, int jmax) {
  if (jmax < s.jmax) throw DomainError("extend_basis cannot shrink the basis");
  for (auto& [k0, c] : s.components)
    for (auto& [m, v] : c.sectors) {
      CVector w = CVector::Zero(jmax + 1);
      w.head(v.size()) = v;
      v = std::move(w);
    }
  s.jmax = jmax;
  return s;
}

/// Mixture jmax: the k0 = 0 rule plus the largest |k0|.
inline int mixture_jmax(const StateSpec& spec, double sigma_k) {
  const int kcut = sigma_k > 0.0 ? static_cast<int>(std::ceil(4.0 * sigma_k)) : 0;
  return truncation_jmax(spec, 0) + kcut;
}

inline void propagate_in_place(Component& c, double dt, const SpectrumModel& spectrum) {
  for (auto& [m, v] : c.sectors) {
    const int jmax = static_cast<int>(v.size()) - 1;
    if (!spectrum.covers(jmax, c.k0)) throw DomainError("spectrum does not cover state support");
    for (int j = std::max(std::abs(m), std::abs(c.k0)); j <= jmax; ++j) {
      const double ph = spectrum.phase(j, c.k0, dt);
      v[j] *= cplx(std::cos(ph), -std::sin(ph));
    }
  }
}

inline RotorState free_propagate(const RotorState& state, double dt, const SpectrumModel& spectrum) {
  RotorState out = state;
  for (auto& [k0, c] : out.components) propagate_in_place(c, dt, spectrum);
  out.time = state.time + dt;
  return out;
}

}  // namespace nanorotor::rotor
