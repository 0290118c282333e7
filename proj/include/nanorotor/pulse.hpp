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

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/bessel_prime.hpp>

#include "nanorotor/angular.hpp"
#include "nanorotor/core.hpp"
#include "nanorotor/rotor.hpp"

namespace nanorotor::pulse {

/// Peak intensity-like |E0|^2 of a Gaussian beam, V^2/m^2.
inline double field_squared(double power, double waist) {
  return 4.0 * power / (pi * waist * waist * constants::epsilon0 * constants::c_light);
}

/// Pulse phase from laser parameters (SI units).
inline double phase_from_laser(double power, double waist, double tau, double delta_alpha) {
  if (power < 0.0 || tau < 0.0 || !(waist > 0.0) || !(delta_alpha > 0.0))
    throw DomainError("laser parameters must be positive");
  return delta_alpha * field_squared(power, waist) * tau / (4.0 * std::sqrt(2.0) * constants::hbar);
}

/// Polarizability anisotropy that yields `phi` for the given beam.
inline double delta_alpha_for_phase(double phi, double power, double waist, double tau) {
  if (!(power > 0.0) || !(waist > 0.0) || !(tau > 0.0) || phi < 0.0) throw DomainError("laser parameters must be positive");
  return phi * 4.0 * std::sqrt(2.0) * constants::hbar / (field_squared(power, waist) * tau);
}

namespace presets {
inline constexpr double power = 1.3e-3;   // W
inline constexpr double tau = 100e-9;     // s
inline constexpr double waist = 30e-6;    // m
// Silicon nanorod, fixed so the beam above imprints phi = 2 pi.
inline constexpr double silicon_delta_alpha = 5.409903141976385e-35;  // C m^2/V
}  // namespace presets

enum class PulseMethod { exact_grid, exact_dense, semiclassical };

inline std::string to_string(PulseMethod m) {
  switch (m) {
    case PulseMethod::exact_grid: return "exact_grid";
    case PulseMethod::exact_dense: return "exact_dense";
    case PulseMethod::semiclassical: return "semiclassical";
  }
  return "?";
}

struct PulseEvent {
  double t = 0.125;  // units of T_rev
  double phi = 0.0;
};

struct PulseSpec {
  double phi = 0.0;
  std::vector<PulseEvent> schedule;
  PulseMethod method = PulseMethod::exact_grid;

  void validate() const {
    if (!std::isfinite(phi)) throw DomainError("phi must be finite");
    for (const auto& e : schedule) {
      if (!std::isfinite(e.phi)) throw DomainError("pulse phi must be finite");
      if (!(e.t >= 0.0 && e.t <= 8.0)) throw DomainError("pulse time outside [0, 8]");
    }
  }
};

using BandedComplex = angular::BandedMatrix<cplx>;

inline constexpr double bessel_cutoff = 1e-14;
inline constexpr int min_bandwidth = 8;

/// Even j-bandwidth past which |J_nu(phi/sqrt 2)| < 1e-14.
inline int semiclassical_bandwidth(double phi) {
  const double x = phi / std::sqrt(2.0);
  int nu = static_cast<int>(std::ceil(x));
  while (std::abs(boost::math::cyl_bessel_j(nu, x)) >= bessel_cutoff) ++nu;
  return std::max(min_bandwidth, 2 * nu);
}

inline double amplitude_A(int J, int m, int k) {
  const double j2 = static_cast<double>(J) * J;
  return (1.0 - 4.0 * k * k / j2) * (1.0 - 4.0 * m * m / j2) / std::sqrt(2.0);
}

/// Large-j matrix elements <jmk|exp(i sqrt2 phi cos^2 beta)|j'mk> on jmin..jmax.
/// Odd |j-j'| vanish. For m k != 0 the xi-derivative acts on
/// xi^{-1/2} exp(-iA/xi) J_nu(A/xi) as a whole.
inline BandedComplex phase_matrix_semiclassical(int jmin, int jmax, int m, int k, double phi) {
  angular::check_band_range(jmin, jmax, m, k);
  if (!std::isfinite(phi)) throw DomainError("phi must be finite");
  if (phi < 0.0) throw DomainError("negative phi; use the adjoint of the positive-phi matrix");
  if (phi == 0.0) {
    BandedComplex id(jmin, jmax, 0, m, m, k);
    for (int j = jmin; j <= jmax; ++j) id.at(j, j) = 1.0;
    return id;
  }
  const int bw = semiclassical_bandwidth(phi);
  BandedComplex u(jmin, jmax, bw, m, m, k);
  const double mk2 = static_cast<double>(m) * m * k * k;
  for (int j = jmin; j <= jmax; ++j) {
    for (int jp = j; jp <= std::min(jmax, j + bw); jp += 2) {
      const int d = jp - j;
      const int J = j + jp + 1;
      const double nu = 0.5 * d;
      const double A = amplitude_A(J, m, k);
      const double x = A * phi;
      const cplx rot(std::cos(x), -std::sin(x));
      const double bj = boost::math::cyl_bessel_j(nu, x);
      const cplx G = rot * bj;
      cplx val = G;
      if (mk2 != 0.0) {
        const double q = 32.0 * mk2 / (static_cast<double>(J) * J * J * J);
        const cplx dG = rot * cplx(boost::math::cyl_bessel_j_prime(nu, x), -bj);
        val += cplx(0.0, std::sqrt(2.0) * q) * (-0.5 * phi * G - A * phi * phi * dG);
      }
      val *= std::polar(1.0, -pi * d / 4.0);
      val = std::conj(val);
      u.at(j, jp) = val;
      u.at(jp, j) = val;
    }
  }
  return u;
}

/// Caches per-sector tables and eigenbases so phase sweeps stay cheap.
class PulseEngine {
 public:
  explicit PulseEngine(int jmax, std::size_t cache_bytes = std::size_t(512) << 20)
      : jmax_(jmax), budget_(cache_bytes) {}

  int jmax() const { return jmax_; }

  /// Grid order used by the exact grid path for a given phase.
  int grid_order(double phi) const {
    return angular::default_grid_order(jmax_) + semiclassical_bandwidth(std::abs(phi));
  }

  void apply_sector(CVector& c, int m, int k, double phi, PulseMethod method, Diagnostics& diag) const {
    if (static_cast<int>(c.size()) - 1 > jmax_) throw DomainError("sector exceeds pulse engine jmax");
    if (!std::isfinite(phi)) throw DomainError("phi must be finite");
    if (phi == 0.0) return;
    const int jmin = std::max(std::abs(m), std::abs(k));
    const int jmax = static_cast<int>(c.size()) - 1;
    switch (method) {
      case PulseMethod::exact_grid: apply_grid(c, m, k, phi); break;
      case PulseMethod::exact_dense: apply_dense(c, jmin, m, k, phi); break;
      case PulseMethod::semiclassical: {
        const double n0 = c.norm();
        const auto up = semiclassical(jmin, jmax, m, k, phi);
        const auto& u = *up;
        double edge = 0.0;
        for (int j = std::max(jmin, jmax - u.bandwidth() + 1); j <= jmax; ++j) edge += std::norm(c[j]);
        diag.record_max("pulse_boundary_weight", edge / (n0 * n0));
        if (edge > 1e-6 * n0 * n0)
          diag.warn("semiclassical pulse: weight " + std::to_string(edge / (n0 * n0)) + " within one band of jmax");
        c = u.apply(c);
        const double n1 = c.norm();
        diag.record_max("pulse_norm_defect", std::abs(n1 / n0 - 1.0));
        if (n1 > 0.0) c *= n0 / n1;
        break;
      }
    }
  }

  void apply(rotor::RotorState& s, double phi, PulseMethod method) const {
    for (auto& [k0, comp] : s.components)
      for (auto& [m, v] : comp.sectors) apply_sector(v, m, k0, phi, method, s.diagnostics);
  }

 private:
  struct GridEntry {
    angular::AngularGrid grid;
    std::map<std::pair<int, int>, std::shared_ptr<const angular::WignerTable>> tables;
  };
  struct DenseEntry {
    Eigen::MatrixXd vectors;
    Eigen::VectorXd values;
  };

  bool reserve(std::size_t bytes) const {
    if (used_ + bytes > budget_) return false;
    used_ += bytes;
    return true;
  }

  void apply_grid(CVector& c, int m, int k, double phi) const {
    const int order = grid_order(phi);
    std::shared_ptr<const angular::AngularGrid> grid;
    std::shared_ptr<const angular::WignerTable> table;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto& ge = grids_[order];
      if (!ge) ge = std::make_shared<GridEntry>(GridEntry{angular::make_grid(order), {}});
      grid = std::shared_ptr<const angular::AngularGrid>(ge, &ge->grid);
      auto it = ge->tables.find({m, k});
      if (it != ge->tables.end()) table = it->second;
    }
    if (!table) {
      table = std::make_shared<const angular::WignerTable>(*grid, jmax_, m, k);
      std::lock_guard<std::mutex> lock(mu_);
      if (reserve(sizeof(double) * static_cast<std::size_t>(order) * (jmax_ + 1)))
        grids_[order]->tables.emplace(std::make_pair(m, k), table);
    }
    const int jmax = static_cast<int>(c.size()) - 1;
    CVector full = CVector::Zero(jmax_ + 1);
    full.head(jmax + 1) = c;
    const auto smp = angular::synthesize_beta(full, *table, *grid);
    std::vector<cplx> psi(grid->order);
    const double s2 = std::sqrt(2.0) * phi;
    for (int i = 0; i < grid->order; ++i) {
      const double c2 = grid->cosines[i] * grid->cosines[i];
      psi[i] = smp.psi[i] * std::polar(1.0, s2 * c2);
    }
    const CVector out = angular::project_with(psi, *table, *grid);
    const double n0 = c.squaredNorm();
    const double n1 = out.head(jmax + 1).squaredNorm();
    if (std::abs(n1 - n0) > 1e-6 * n0)
      throw ResolutionError("exact pulse lost norm " + std::to_string(1.0 - n1 / n0) + "; raise jmax");
    c = out.head(jmax + 1);
  }

  void apply_dense(CVector& c, int jmin, int m, int k, double phi) const {
    const int jmax = static_cast<int>(c.size()) - 1;
    std::shared_ptr<const DenseEntry> e;
    const auto key = std::make_tuple(m, k, jmax);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = dense_.find(key);
      if (it != dense_.end()) e = it->second;
    }
    if (!e) {
      const Eigen::MatrixXd a = angular::cos2beta_matrix(jmin, jmax, m, k).dense();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
      if (es.info() != Eigen::Success) throw IntegrationError("cos^2 eigensolver failed");
      auto made = std::make_shared<DenseEntry>(DenseEntry{es.eigenvectors(), es.eigenvalues()});
      std::lock_guard<std::mutex> lock(mu_);
      if (reserve(sizeof(double) * made->vectors.size())) dense_.emplace(key, made);
      e = made;
    }
    const int n = jmax - jmin + 1;
    Eigen::VectorXcd y = e->vectors.transpose().cast<cplx>() * c.segment(jmin, n);
    for (int i = 0; i < n; ++i) y[i] *= std::polar(1.0, std::sqrt(2.0) * phi * e->values[i]);
    c.segment(jmin, n) = e->vectors.cast<cplx>() * y;
  }

  std::shared_ptr<const BandedComplex> semiclassical(int jmin, int jmax, int m, int k, double phi) const {
    std::lock_guard<std::mutex> lock(mu_);
    const auto key = std::make_tuple(m, k, jmax, phi);
    auto it = semi_.find(key);
    if (it == semi_.end()) {
      auto u = std::make_shared<const BandedComplex>(phase_matrix_semiclassical(jmin, jmax, m, k, phi));
      if (semi_.size() > 256) semi_.clear();
      it = semi_.emplace(key, u).first;
    }
    return it->second;
  }

  int jmax_;
  std::size_t budget_;
  mutable std::size_t used_ = 0;
  mutable std::mutex mu_;
  mutable std::map<int, std::shared_ptr<GridEntry>> grids_;
  mutable std::map<std::tuple<int, int, int>, std::shared_ptr<const DenseEntry>> dense_;
  mutable std::map<std::tuple<int, int, int, double>, std::shared_ptr<const BandedComplex>> semi_;
};

/// Pulses every sector of every k0 component; mixture weights are untouched.
inline rotor::RotorState apply_pulse(const rotor::RotorState& state, double phi, PulseMethod method) {
  rotor::RotorState out = state;
  PulseEngine(state.jmax).apply(out, phi, method);
  return out;
}

}  // namespace nanorotor::pulse
