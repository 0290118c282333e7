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
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "nanorotor/angular.hpp"
#include "nanorotor/core.hpp"
#include "nanorotor/rotor.hpp"

namespace nanorotor::observables {

struct TimeSeries {
  std::vector<double> times;
  std::vector<double> values;
  std::string label;
};

/// cos^2(beta) bands built once per (m, k) and shared across threads.
class AlignmentOperator {
 public:
  explicit AlignmentOperator(int jmax) : jmax_(jmax) {}
  int jmax() const { return jmax_; }

  const angular::BandedHermitian& band(int m, int k) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto& slot = cache_[{m, k}];
    if (!slot) {
      const int lo = std::max(std::abs(m), std::abs(k));
      slot = std::make_shared<const angular::BandedHermitian>(angular::cos2beta_matrix(lo, std::max(lo, jmax_), m, k));
    }
    return *slot;
  }

  double sector(const CVector& c, int m, int k) const {
    if (c.size() - 1 > jmax_) throw DomainError("state jmax exceeds alignment operator");
    return band(m, k).expectation(c).real();
  }

  /// Unnormalized <c|cos^2|c> summed over the m sectors of one component.
  double raw(const rotor::Component& c) const {
    double a = 0.0;
    for (const auto& [m, v] : c.sectors) a += sector(v, m, c.k0);
    return a;
  }

  double operator()(const rotor::Component& c) const { return raw(c) / c.norm2(); }

  double operator()(const rotor::RotorState& s) const {
    double a = 0.0, w = 0.0;
    for (const auto& [k0, c] : s.components) {
      a += c.weight * (*this)(c);
      w += c.weight;
    }
    return a / w;
  }

 private:
  int jmax_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<int, int>, std::shared_ptr<const angular::BandedHermitian>> cache_;
};

inline double alignment(const rotor::RotorState& s) { return AlignmentOperator(s.jmax)(s); }

/// Alignment of U(dt) applied to a component, without modifying it.
inline double alignment_after(const rotor::Component& c, double dt, const rotor::SpectrumModel& spectrum,
                              const AlignmentOperator& op) {
  rotor::Component tmp = c;
  rotor::propagate_in_place(tmp, dt, spectrum);
  return op(tmp);
}

inline double alignment_after(const rotor::RotorState& s, double dt, const rotor::SpectrumModel& spectrum,
                              const AlignmentOperator& op) {
  double a = 0.0, w = 0.0;
  for (const auto& [k0, c] : s.components) {
    a += c.weight * alignment_after(c, dt, spectrum, op);
    w += c.weight;
  }
  return a / w;
}

/// Mixture-weighted prob(beta) = sin(beta) |psi(beta)|^2 on the grid nodes.
inline std::vector<double> beta_distribution(const rotor::RotorState& s, const angular::AngularGrid& grid) {
  angular::check_resolution(grid, s.jmax);
  std::vector<double> prob(grid.order, 0.0);
  double wsum = 0.0;
  for (const auto& [k0, c] : s.components) wsum += c.weight;
  for (const auto& [k0, c] : s.components) {
    const double n2 = c.norm2();
    for (const auto& [m, v] : c.sectors) {
      const auto smp = angular::synthesize_beta(v, m, k0, grid);
      for (int i = 0; i < grid.order; ++i) prob[i] += c.weight / wsum * smp.prob[i] / n2;
    }
  }
  return prob;
}

/// Probability within |beta - center| < halfwidth, by quadrature on the window.
inline double window_probability(const rotor::RotorState& s, double center, double halfwidth) {
  const auto g = angular::make_window_grid(center - halfwidth, center + halfwidth, angular::default_grid_order(s.jmax));
  const auto prob = beta_distribution(s, g);
  double acc = 0.0;
  for (int i = 0; i < g.order; ++i) acc += g.weights[i] * prob[i] / std::sin(g.nodes[i]);
  return acc;
}

struct Peak {
  double t = 0.0;
  double value = 0.0;
};

/// Vertex of the parabola through three (possibly unevenly spaced) samples.
inline Peak parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double d01 = (y1 - y0) / (x1 - x0), d12 = (y2 - y1) / (x2 - x1);
  const double a = (d12 - d01) / (x2 - x0);
  if (a == 0.0) return {x1, y1};
  const double b = d01 - a * (x0 + x1);
  const double x = -b / (2.0 * a);
  const double c = y0 - a * x0 * x0 - b * x0;
  return {x, (a * x + b) * x + c};
}

inline Peak find_revival_peak(const TimeSeries& s, double window_center, double window_halfwidth) {
  std::vector<size_t> idx;
  for (size_t i = 0; i < s.times.size(); ++i)
    if (std::abs(s.times[i] - window_center) <= window_halfwidth) idx.push_back(i);
  if (idx.size() < 5) throw DomainError("fewer than 5 samples in peak window");
  size_t best = idx.front();
  for (size_t i : idx)
    if (s.values[i] > s.values[best]) best = i;
  if (best == idx.front() || best == idx.back()) throw AmbiguousPeakError("maximum at window edge");
  return parabola_vertex(s.times[best - 1], s.values[best - 1], s.times[best], s.values[best], s.times[best + 1],
                         s.values[best + 1]);
}

/// Zooming maximum search of f near center; the first pass samples the
/// window at `spacing`, each later pass narrows to four samples around the
/// running maximum. The window doubles (up to max_halfwidth) while the
/// maximum sits on its edge.
inline Peak locate_revival(const std::function<double(double)>& f, double center, double halfwidth,
                           double spacing, double max_halfwidth = 0.5, double tolerance = 1e-9) {
  for (;;) {
    const int n = std::max(5, static_cast<int>(std::ceil(2.0 * halfwidth / spacing)) + 1);
    TimeSeries s;
    for (int i = 0; i < n; ++i) {
      const double t = center - halfwidth + 2.0 * halfwidth * i / (n - 1);
      s.times.push_back(t);
      s.values.push_back(f(t));
    }
    try {
      Peak p = find_revival_peak(s, center, halfwidth);
      double h = 2.0 * halfwidth / (n - 1);
      double c = s.times[std::max_element(s.values.begin(), s.values.end()) - s.values.begin()];
      while (h > tolerance) {
        TimeSeries z;
        for (int i = -4; i <= 4; ++i) {
          z.times.push_back(c + i * h / 4.0);
          z.values.push_back(f(c + i * h / 4.0));
        }
        p = find_revival_peak(z, c, h);
        c = z.times[std::max_element(z.values.begin(), z.values.end()) - z.values.begin()];
        h /= 4.0;
      }
      return p;
    } catch (const AmbiguousPeakError&) {
      if (halfwidth >= max_halfwidth) throw;
      const double edge = (s.values.front() > s.values.back()) ? -1.0 : 1.0;
      center += edge * halfwidth;
      halfwidth = std::min(max_halfwidth, 2.0 * halfwidth);
    }
  }
}

/// Inner product of two single-component states over shared (k0, m) sectors.
inline cplx overlap(const rotor::Component& a, const rotor::Component& b) {
  if (a.k0 != b.k0) return 0.0;
  cplx acc = 0.0;
  for (const auto& [m, va] : a.sectors) {
    auto it = b.sectors.find(m);
    if (it == b.sectors.end()) continue;
    const int n = static_cast<int>(std::min(va.size(), it->second.size()));
    acc += va.head(n).dot(it->second.head(n));
  }
  return acc;
}

inline cplx overlap(const rotor::RotorState& a, const rotor::RotorState& b) {
  if (a.components.size() != 1 || b.components.size() != 1)
    throw DomainError("complex overlap needs pure states; use fidelity for mixtures");
  return overlap(a.components.begin()->second, b.components.begin()->second);
}

/// Fidelity of two k-block-diagonal mixtures of pure components.
inline double fidelity(const rotor::RotorState& a, const rotor::RotorState& b) {
  double root = 0.0;
  for (const auto& [k0, ca] : a.components) {
    auto it = b.components.find(k0);
    if (it == b.components.end()) continue;
    const double na = std::sqrt(ca.norm2()), nb = std::sqrt(it->second.norm2());
    root += std::sqrt(ca.weight * it->second.weight) * std::abs(overlap(ca, it->second)) / (na * nb);
  }
  return root * root;
}

}  // namespace nanorotor::observables
