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
#include <cmath>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include "nanorotor/core.hpp"

namespace nanorotor::angular {

/// Gauss-Legendre rule in cos(beta). Weights integrate f(beta) sin(beta) dbeta.
struct AngularGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> cosines;
  int order = 0;
};

namespace detail {

// (P_n(x), P_{n-1}(x)) by upward recurrence, n >= 1.
inline std::pair<double, double> legendre_pair(int n, double x) {
  double p0 = 1.0, p1 = x;
  for (int l = 1; l < n; ++l) {
    const double p2 = ((2 * l + 1) * x * p1 - l * p0) / (l + 1);
    p0 = p1;
    p1 = p2;
  }
  return {p1, p0};
}

}  // namespace detail

inline AngularGrid make_grid(int order) {
  if (order < 1) throw DomainError("grid order must be positive");
  AngularGrid g;
  g.order = order;
  g.nodes.resize(order);
  g.weights.resize(order);
  g.cosines.resize(order);
  const int n = order;
  for (int i = 0; i < n; ++i) {
    // Newton in theta keeps full relative accuracy near the poles.
    double theta = pi * (i + 0.75) / (n + 0.5);
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
      const double x = std::cos(theta);
      const auto [pn, pn1] = detail::legendre_pair(n, x);
      const double slope = -n * (pn1 - x * pn) / std::sin(theta);
      const double step = pn / slope;
      theta -= step;
      if (converged) break;
      converged = std::abs(step) < 1e-11 * theta;
    }
    const double x = std::cos(theta);
    const auto [pn, pn1] = detail::legendre_pair(n, x);
    const double s = std::sin(theta);
    const double q = n * (pn1 - x * pn);
    g.nodes[i] = theta;
    g.cosines[i] = x;
    g.weights[i] = 2.0 * s * s / (q * q);
  }
  return g;
}

inline int default_grid_order(int jmax) { return 2 * jmax + 16; }

/// Gauss-Legendre rule in beta on [lo, hi] within [0, pi], same weight convention.
inline AngularGrid make_window_grid(double lo, double hi, int order) {
  lo = std::max(lo, 0.0);
  hi = std::min(hi, pi);
  if (!(hi > lo)) throw DomainError("empty beta window");
  const AngularGrid ref = make_grid(order);
  AngularGrid g = ref;
  const double mid = 0.5 * (hi + lo), half = 0.5 * (hi - lo);
  for (int i = 0; i < order; ++i) {
    const double u = ref.cosines[order - 1 - i];
    g.nodes[i] = mid + half * u;
    g.cosines[i] = std::cos(g.nodes[i]);
    g.weights[i] = half * ref.weights[order - 1 - i] * std::sin(g.nodes[i]);
  }
  return g;
}

namespace detail {

inline void check_quantum_numbers(int j, int m, int k) {
  if (j < 0 || std::abs(m) > j || std::abs(k) > j)
    throw DomainError("invalid quantum numbers j=" + std::to_string(j) + " m=" +
                      std::to_string(m) + " k=" + std::to_string(k));
}

// log|d^{j}_{j,mp}(beta)| and its sign, with j = max(|m|,|k|).
struct SeedValue {
  double log_abs;
  int sign;
  bool zero;
};

inline SeedValue top_row(int j, int mp, double beta) {
  const double c = std::cos(0.5 * beta), s = std::sin(0.5 * beta);
  const int pc = j + mp, ps = j - mp;
  SeedValue v{0.0, ((j - mp) % 2 == 0) ? 1 : -1, false};
  if ((pc > 0 && c == 0.0) || (ps > 0 && s == 0.0)) {
    v.zero = true;
    return v;
  }
  v.log_abs = 0.5 * (std::lgamma(2.0 * j + 1) - std::lgamma(j + mp + 1.0) - std::lgamma(j - mp + 1.0));
  if (pc > 0) v.log_abs += pc * std::log(std::abs(c));
  if (ps > 0) v.log_abs += ps * std::log(std::abs(s));
  return v;
}

// d^{j0}_{mk} at the lowest admissible j0 = max(|m|,|k|).
inline SeedValue seed(int m, int k, double beta) {
  const int j0 = std::max(std::abs(m), std::abs(k));
  auto parity = [](int p) { return (std::abs(p) % 2 == 0) ? 1 : -1; };
  if (m == j0) return top_row(j0, k, beta);
  if (k == j0) {
    SeedValue v = top_row(j0, m, beta);
    v.sign *= parity(j0 - m);
    return v;
  }
  if (m == -j0) {
    SeedValue v = top_row(j0, -k, beta);
    v.sign *= parity(j0 + k);
    return v;
  }
  return top_row(j0, -m, beta);  // k == -j0
}

}  // namespace detail

/// Fills out[j] = d^j_{mk}(beta) for j = 0..jmax (zero below max(|m|,|k|)).
inline void wigner_d_sweep(int jmax, int m, int k, double beta, double* out) {
  const int j0 = std::max(std::abs(m), std::abs(k));
  for (int j = 0; j <= jmax && j < j0; ++j) out[j] = 0.0;
  if (jmax < j0) return;
  const auto sv = detail::seed(m, k, beta);
  if (sv.zero) {
    for (int j = j0; j <= jmax; ++j) out[j] = 0.0;
    return;
  }
  int exponent = static_cast<int>(std::floor(sv.log_abs / std::numbers::ln2));
  double cur = sv.sign * std::exp(sv.log_abs - exponent * std::numbers::ln2);
  double prev = 0.0;
  out[j0] = std::ldexp(cur, exponent);
  const double x = std::cos(beta);
  const double mk = static_cast<double>(m) * k;
  const double m2 = static_cast<double>(m) * m, k2 = static_cast<double>(k) * k;
  for (int j = j0; j < jmax; ++j) {
    double next;
    if (j == 0) {
      next = x * cur;
    } else {
      const double jd = j, j1 = j + 1.0;
      const double a = (2.0 * jd + 1.0) * (jd * j1 * x - mk);
      const double b = j1 * std::sqrt((jd * jd - m2) * (jd * jd - k2));
      const double den = jd * std::sqrt((j1 * j1 - m2) * (j1 * j1 - k2));
      next = (a * cur - b * prev) / den;
    }
    prev = cur;
    cur = next;
    if ((j - j0) % 64 == 63) {
      const double big = std::max(std::abs(cur), std::abs(prev));
      if (big > 0.0) {
        const int e = std::ilogb(big);
        cur = std::ldexp(cur, -e);
        prev = std::ldexp(prev, -e);
        exponent += e;
      }
    }
    out[j + 1] = std::ldexp(cur, exponent);
  }
}

inline double wigner_d_exact(int j, int m, int k, double beta) {
  detail::check_quantum_numbers(j, m, k);
  if (beta < 0.0 || beta > pi) throw DomainError("beta outside [0, pi]");
  std::vector<double> col(j + 1);
  wigner_d_sweep(j, m, k, beta, col.data());
  return col[j];
}

/// Large-j asymptotic form; singular at the poles.
inline double wigner_d_semiclassical(int j, int m, int k, double beta) {
  detail::check_quantum_numbers(j, m, k);
  const double s = std::sin(beta);
  const double jh = j + 0.5;
  if (!(beta > 0.0 && beta < pi) || jh * s < 1.0)
    throw SingularityError("semiclassical d-matrix is singular at beta=" + std::to_string(beta));
  return std::cos(jh * beta + (m - k) * 0.5 * pi - 0.25 * pi) / std::sqrt(0.5 * pi * jh * s);
}

/// Condon-Shortley coefficient <j1 m1; j2 m2 | J M> via the Racah sum.
inline double clebsch_gordan(int j1, int m1, int j2, int m2, int J, int M) {
  if (M != m1 + m2) return 0.0;
  if (j1 < 0 || j2 < 0 || J < 0) return 0.0;
  if (J < std::abs(j1 - j2) || J > j1 + j2) return 0.0;
  if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(M) > J) return 0.0;
  using ld = long double;
  auto lf = [](int n) { return std::lgamma(static_cast<ld>(n) + 1.0L); };
  const ld pre = 0.5L * (std::log(static_cast<ld>(2 * J + 1)) + lf(J + j1 - j2) + lf(J - j1 + j2) +
                         lf(j1 + j2 - J) - lf(j1 + j2 + J + 1) + lf(J + M) + lf(J - M) + lf(j1 - m1) +
                         lf(j1 + m1) + lf(j2 - m2) + lf(j2 + m2));
  const int kmin = std::max({0, j2 - J - m1, j1 - J + m2});
  const int kmax = std::min({j1 + j2 - J, j1 - m1, j2 + m2});
  ld sum = 0.0L;
  for (int s = kmin; s <= kmax; ++s) {
    const ld den = lf(s) + lf(j1 + j2 - J - s) + lf(j1 - m1 - s) + lf(j2 + m2 - s) +
                   lf(J - j2 + m1 + s) + lf(J - j1 - m2 + s);
    const ld term = std::exp(pre - den);
    sum += (s % 2 == 0) ? term : -term;
  }
  return static_cast<double>(sum);
}

/// Band storage over j for operators between fixed-(m,k) sectors.
/// Vectors passed to apply() are indexed by j = 0..jmax.
template <class T>
class BandedMatrix {
 public:
  BandedMatrix() = default;
  BandedMatrix(int jmin, int jmax, int bandwidth, int m_row, int m_col, int k)
      : jmin_(jmin), jmax_(jmax), bw_(bandwidth), m_row_(m_row), m_col_(m_col), k_(k),
        band_(Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>::Zero(std::max(0, jmax - jmin + 1),
                                                                     2 * bandwidth + 1)) {}

  int jmin() const { return jmin_; }
  int jmax() const { return jmax_; }
  int bandwidth() const { return bw_; }
  int m() const { return m_row_; }
  int m_row() const { return m_row_; }
  int m_col() const { return m_col_; }
  int k() const { return k_; }

  bool in_band(int j, int jp) const {
    return j >= jmin_ && j <= jmax_ && jp >= jmin_ && jp <= jmax_ && std::abs(j - jp) <= bw_;
  }
  T operator()(int j, int jp) const { return in_band(j, jp) ? band_(j - jmin_, jp - j + bw_) : T(0); }
  T& at(int j, int jp) {
    if (!in_band(j, jp)) throw DomainError("banded entry outside band");
    return band_(j - jmin_, jp - j + bw_);
  }

  /// y = A x, with x, y indexed by j.
  void apply(const CVector& x, CVector& y) const {
    y = CVector::Zero(jmax_ + 1);
    for (int j = jmin_; j <= jmax_; ++j) {
      cplx acc = 0.0;
      const int lo = std::max(jmin_, j - bw_), hi = std::min(jmax_, j + bw_);
      for (int jp = lo; jp <= hi; ++jp) acc += band_(j - jmin_, jp - j + bw_) * x[jp];
      y[j] = acc;
    }
  }
  CVector apply(const CVector& x) const {
    CVector y;
    apply(x, y);
    return y;
  }

  /// <x|A|x> for a square sector operator.
  cplx expectation(const CVector& x) const {
    cplx acc = 0.0;
    for (int j = jmin_; j <= jmax_; ++j) {
      const int lo = std::max(jmin_, j - bw_), hi = std::min(jmax_, j + bw_);
      cplx row = 0.0;
      for (int jp = lo; jp <= hi; ++jp) row += band_(j - jmin_, jp - j + bw_) * x[jp];
      acc += std::conj(x[j]) * row;
    }
    return acc;
  }

  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> dense() const {
    const int n = jmax_ - jmin_ + 1;
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> d =
        Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
    for (int j = jmin_; j <= jmax_; ++j)
      for (int jp = std::max(jmin_, j - bw_); jp <= std::min(jmax_, j + bw_); ++jp)
        d(j - jmin_, jp - jmin_) = (*this)(j, jp);
    return d;
  }

  double hermiticity_defect() const {
    double worst = 0.0;
    for (int j = jmin_; j <= jmax_; ++j)
      for (int jp = j; jp <= std::min(jmax_, j + bw_); ++jp)
        worst = std::max(worst, std::abs(cplx((*this)(j, jp)) - std::conj(cplx((*this)(jp, j)))));
    return worst;
  }

 private:
  int jmin_ = 0, jmax_ = -1, bw_ = 0, m_row_ = 0, m_col_ = 0, k_ = 0;
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> band_;
};

using BandedHermitian = BandedMatrix<double>;

inline void check_band_range(int jmin, int jmax, int m, int k) {
  if (jmin < std::max(std::abs(m), std::abs(k)))
    throw DomainError("jmin below max(|m|,|k|)");
  if (jmax < jmin) throw DomainError("jmax < jmin");
}

/// <j'mk|cos^2 beta|jmk> on jmin..jmax.
inline BandedHermitian cos2beta_matrix(int jmin, int jmax, int m, int k) {
  check_band_range(jmin, jmax, m, k);
  BandedHermitian a(jmin, jmax, 2, m, m, k);
  for (int j = jmin; j <= jmax; ++j) {
    for (int jp = j; jp <= std::min(jmax, j + 2); ++jp) {
      const double p2 = std::sqrt((2.0 * j + 1) / (2.0 * jp + 1)) * clebsch_gordan(j, m, 2, 0, jp, m) *
                        clebsch_gordan(j, k, 2, 0, jp, k);
      const double v = 2.0 * p2 / 3.0 + (jp == j ? 1.0 / 3.0 : 0.0);
      a.at(jp, j) = v;
      a.at(j, jp) = v;
    }
  }
  return a;
}

/// Direction cosines of the symmetry axis at fixed k. c_z keeps m, c_+ raises
/// it by one, c_- = c_+^T lowers it; c_x = (c_+ + c_-)/2, c_y = (c_+ - c_-)/(2i).
class DirectionCosines {
 public:
  DirectionCosines(int jmin, int jmax, int k) : jmin_(jmin), jmax_(jmax), k_(k) {
    if (jmin < std::abs(k)) throw DomainError("jmin below |k|");
    if (jmax < jmin) throw DomainError("jmax < jmin");
  }
  int jmin() const { return jmin_; }
  int jmax() const { return jmax_; }
  int k() const { return k_; }

  /// <j'mk|c_z|jmk>.
  BandedHermitian cz(int m) const {
    const int lo = std::max({jmin_, std::abs(m), std::abs(k_)});
    BandedHermitian a(lo, jmax_, 1, m, m, k_);
    for (int j = lo; j <= jmax_; ++j)
      for (int jp = std::max(lo, j - 1); jp <= std::min(jmax_, j + 1); ++jp)
        a.at(jp, j) = std::sqrt((2.0 * j + 1) / (2.0 * jp + 1)) * clebsch_gordan(j, m, 1, 0, jp, m) *
                      clebsch_gordan(j, k_, 1, 0, jp, k_);
    return a;
  }

  /// <j' m+1 k|c_+|j m k>; rows live in sector m+1, columns in sector m.
  BandedMatrix<double> cplus(int m) const {
    const int lo = std::max({jmin_, std::min(std::abs(m), std::abs(m + 1)), std::abs(k_)});
    BandedMatrix<double> a(lo, jmax_, 1, m + 1, m, k_);
    for (int jp = lo; jp <= jmax_; ++jp)
      for (int j = std::max(lo, jp - 1); j <= std::min(jmax_, jp + 1); ++j) {
        if (std::abs(m) > j || std::abs(m + 1) > jp) continue;
        a.at(jp, j) = -std::sqrt(2.0) * std::sqrt((2.0 * j + 1) / (2.0 * jp + 1)) *
                      clebsch_gordan(j, m, 1, 1, jp, m + 1) * clebsch_gordan(j, k_, 1, 0, jp, k_);
      }
    return a;
  }

  /// Apply c_- to the m+1 sector given the c_+ block for m (transpose action).
  static CVector apply_transpose(const BandedMatrix<double>& cp, const CVector& x) {
    CVector y = CVector::Zero(cp.jmax() + 1);
    for (int jp = cp.jmin(); jp <= cp.jmax(); ++jp)
      for (int j = std::max(cp.jmin(), jp - 1); j <= std::min(cp.jmax(), jp + 1); ++j)
        y[j] += cp(jp, j) * x[jp];
    return y;
  }

 private:
  int jmin_, jmax_, k_;
};

inline DirectionCosines direction_cosine_matrices(int jmin, int jmax, int k) {
  return DirectionCosines(jmin, jmax, k);
}

/// Tabulated d^j_{mk}(beta_i) for repeated transforms on one grid.
class WignerTable {
 public:
  WignerTable(const AngularGrid& grid, int jmax, int m, int k)
      : jmax_(jmax), m_(m), k_(k), n_(grid.order), values_(static_cast<size_t>(grid.order) * (jmax + 1)) {
    for (int i = 0; i < n_; ++i) wigner_d_sweep(jmax, m, k, grid.nodes[i], &values_[static_cast<size_t>(i) * (jmax + 1)]);
    scale_.resize(jmax + 1);
    for (int j = 0; j <= jmax; ++j) scale_[j] = std::sqrt(j + 0.5);
  }
  int jmax() const { return jmax_; }
  int m() const { return m_; }
  int k() const { return k_; }
  const double* row(int i) const { return &values_[static_cast<size_t>(i) * (jmax_ + 1)]; }
  double scale(int j) const { return scale_[j]; }

 private:
  int jmax_, m_, k_, n_;
  std::vector<double> values_;
  std::vector<double> scale_;
};

struct BetaSamples {
  std::vector<cplx> psi;
  std::vector<double> prob;  // sin(beta) |psi|^2
};

inline void check_resolution(const AngularGrid& grid, int jmax) {
  if (grid.order < 2 * jmax)
    throw ResolutionError("grid order " + std::to_string(grid.order) + " below 2*jmax=" +
                          std::to_string(2 * jmax));
}

inline BetaSamples synthesize_beta(const CVector& c, const WignerTable& table, const AngularGrid& grid) {
  const int jmax = static_cast<int>(c.size()) - 1;
  if (jmax > table.jmax()) throw DomainError("state exceeds table jmax");
  check_resolution(grid, jmax);
  BetaSamples out;
  out.psi.resize(grid.order);
  out.prob.resize(grid.order);
  std::vector<cplx> cs(jmax + 1);
  for (int j = 0; j <= jmax; ++j) cs[j] = c[j] * table.scale(j);
  for (int i = 0; i < grid.order; ++i) {
    const double* d = table.row(i);
    cplx acc = 0.0;
    for (int j = 0; j <= jmax; ++j) acc += cs[j] * d[j];
    out.psi[i] = acc;
    out.prob[i] = std::sin(grid.nodes[i]) * std::norm(acc);
  }
  return out;
}

inline BetaSamples synthesize_beta(const CVector& c, int m, int k, const AngularGrid& grid) {
  const int jmax = static_cast<int>(c.size()) - 1;
  check_resolution(grid, jmax);
  return synthesize_beta(c, WignerTable(grid, jmax, m, k), grid);
}

/// Integral of prob(beta) dbeta given grid samples.
inline double integrate_prob(const BetaSamples& s, const AngularGrid& grid) {
  double acc = 0.0;
  for (int i = 0; i < grid.order; ++i) acc += grid.weights[i] * std::norm(s.psi[i]);
  return acc;
}

struct Projection {
  CVector coeffs;
  double captured_norm = 1.0;
  bool truncated = false;
};

inline CVector project_with(const std::vector<cplx>& psi, const WignerTable& table, const AngularGrid& grid) {
  const int jmax = table.jmax();
  CVector c = CVector::Zero(jmax + 1);
  for (int i = 0; i < grid.order; ++i) {
    const double* d = table.row(i);
    const cplx wpsi = grid.weights[i] * psi[i];
    for (int j = 0; j <= jmax; ++j) c[j] += wpsi * d[j];
  }
  for (int j = 0; j <= jmax; ++j) c[j] *= table.scale(j);
  return c;
}

/// Projects psi(beta) exp(i k0 (alpha+gamma)) onto |j k0 k0>, j <= jmax.
inline Projection project_beta(const std::vector<cplx>& psi, int k0, int jmax, const AngularGrid& grid,
                               double tail_tolerance = 1e-10) {
  if (static_cast<int>(psi.size()) != grid.order) throw DomainError("psi size does not match grid");
  Projection p;
  p.coeffs = project_with(psi, WignerTable(grid, jmax, k0, k0), grid);
  double total = 0.0;
  for (int i = 0; i < grid.order; ++i) total += grid.weights[i] * std::norm(psi[i]);
  p.captured_norm = total > 0.0 ? p.coeffs.squaredNorm() / total : 0.0;
  p.truncated = p.captured_norm < 1.0 - tail_tolerance;
  return p;
}

}  // namespace nanorotor::angular
