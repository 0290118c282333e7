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
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <boost/numeric/odeint.hpp>

#include "nanorotor/angular.hpp"
#include "nanorotor/core.hpp"
#include "nanorotor/observables.hpp"
#include "nanorotor/parallel.hpp"
#include "nanorotor/pulse.hpp"
#include "nanorotor/rng.hpp"
#include "nanorotor/rotor.hpp"
#include "nanorotor/schedule.hpp"

namespace nanorotor::decoherence {

/// Gas collision rate at 5e-9 mbar of nitrogen.
inline constexpr double preset_collision_rate_hz = 20.7;

inline double gamma_from_hz(double rate_hz, double t_rev_seconds) { return rate_hz * t_rev_seconds; }
inline double hz_from_gamma(double gamma, double t_rev_seconds) { return gamma / t_rev_seconds; }

/// spherical: c_z, c_+/sqrt2, c_-/sqrt2. cartesian: c_x, c_y, c_z. Same master equation.
enum class JumpBasis { spherical, cartesian };
enum class Channel { x, y, z, plus, minus };

inline std::string to_string(Channel c) {
  switch (c) {
    case Channel::x: return "x";
    case Channel::y: return "y";
    case Channel::z: return "z";
    case Channel::plus: return "plus";
    case Channel::minus: return "minus";
  }
  return "?";
}

struct TrajectoryConfig {
  double gamma = 0.0;  // units of 1/T_rev
  double t_end = 1.0;
  std::vector<double> observation_times;
  std::uint64_t seed = 0;
  pulse::PulseSpec pulse_schedule;
  JumpBasis basis = JumpBasis::spherical;
  double truncation_threshold = 1e-10;  // weight allowed at j = jmax before a jump

  void validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be finite and >= 0");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw DomainError("t_end must be finite and >= 0");
    if (!std::is_sorted(observation_times.begin(), observation_times.end()))
      throw DomainError("observation_times must be sorted");
    for (double t : observation_times)
      if (!(t >= 0.0 && t <= t_end)) throw DomainError("observation time outside [0, t_end]");
    pulse_schedule.validate();
  }
};

struct EnsembleResult {
  std::vector<double> times;
  std::vector<double> mean_alignment;
  std::vector<double> standard_error;  // sample sd / sqrt(n)
  int n_trajectories = 0;
  std::map<int, long> jump_count_histogram;  // jumps per component trajectory -> occurrences
  Diagnostics diagnostics;
};

struct TrajectoryResult {
  observables::TimeSeries alignment;
  std::vector<double> jump_times;
  std::vector<Channel> channels;
  Diagnostics diagnostics;
};

/// Homogeneous Poisson process of rate gamma on [0, t_end].
inline std::vector<double> sample_jump_times(double gamma, double t_end, rng::Stream& rng) {
  if (!(gamma >= 0.0)) throw DomainError("gamma must be >= 0");
  std::vector<double> out;
  if (gamma == 0.0) return out;
  double t = 0.0;
  for (;;) {
    t += rng.exponential() / gamma;
    if (t > t_end) break;
    out.push_back(t);
  }
  return out;
}

/// Direction-cosine blocks per (m, k), built once and shared across threads.
class JumpOperators {
 public:
  explicit JumpOperators(int jmax) : jmax_(jmax) {}
  int jmax() const { return jmax_; }

  const angular::BandedHermitian& cz(int m, int k) const { return *get(m, k).cz; }
  /// c_+ from sector m to m+1.
  const angular::BandedMatrix<double>& cplus(int m, int k) const { return *get(m, k).cp; }

  CVector apply_cz(const CVector& v, int m, int k) const { return cz(m, k).apply(v); }
  CVector apply_plus(const CVector& v, int m, int k) const {
    if (m + 1 > jmax_) return CVector::Zero(jmax_ + 1);
    return cplus(m, k).apply(v);
  }
  CVector apply_minus(const CVector& v, int m, int k) const {
    if (m - 1 < -jmax_) return CVector::Zero(jmax_ + 1);
    return angular::DirectionCosines::apply_transpose(cplus(m - 1, k), v);
  }

 private:
  struct Entry {
    std::shared_ptr<const angular::BandedHermitian> cz;
    std::shared_ptr<const angular::BandedMatrix<double>> cp;
  };
  const Entry& get(int m, int k) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto& e = cache_[{m, k}];
    if (!e.cz) {
      const angular::DirectionCosines dc(std::abs(k), jmax_, k);
      e.cz = std::make_shared<const angular::BandedHermitian>(dc.cz(m));
      e.cp = std::make_shared<const angular::BandedMatrix<double>>(dc.cplus(m));
    }
    return e;
  }
  int jmax_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<int, int>, Entry> cache_;
};

/// L_l |psi> for one channel, unnormalized.
inline rotor::Component apply_channel(const rotor::Component& c, Channel ch, const JumpOperators& ops) {
  rotor::Component out;
  out.k0 = c.k0;
  out.weight = c.weight;
  const int k = c.k0;
  const double r2 = 1.0 / std::sqrt(2.0);
  const cplx half_i(0.0, 0.5);
  auto add = [&](int m, const CVector& v, cplx f) {
    if (std::max(std::abs(m), std::abs(k)) > ops.jmax()) return;
    auto it = out.sectors.find(m);
    if (it == out.sectors.end()) it = out.sectors.emplace(m, CVector::Zero(ops.jmax() + 1)).first;
    it->second += f * v;
  };
  for (const auto& [m, v] : c.sectors) {
    switch (ch) {
      case Channel::z: add(m, ops.apply_cz(v, m, k), 1.0); break;
      case Channel::plus: add(m + 1, ops.apply_plus(v, m, k), r2); break;
      case Channel::minus: add(m - 1, ops.apply_minus(v, m, k), r2); break;
      case Channel::x:
        add(m + 1, ops.apply_plus(v, m, k), 0.5);
        add(m - 1, ops.apply_minus(v, m, k), 0.5);
        break;
      case Channel::y:  // (c_+ - c_-)/(2i)
        add(m + 1, ops.apply_plus(v, m, k), -half_i);
        add(m - 1, ops.apply_minus(v, m, k), half_i);
        break;
    }
  }
  return out;
}

inline std::vector<Channel> channels(JumpBasis basis) {
  if (basis == JumpBasis::spherical) return {Channel::z, Channel::plus, Channel::minus};
  return {Channel::x, Channel::y, Channel::z};
}

/// <psi|L_l^dag L_l|psi> per channel for a normalized component.
inline std::vector<double> jump_weights(const rotor::Component& c, JumpBasis basis, const JumpOperators& ops) {
  std::vector<double> w;
  for (Channel ch : channels(basis)) w.push_back(apply_channel(c, ch, ops).norm2() / c.norm2());
  return w;
}

inline double boundary_weight(const rotor::Component& c) {
  double edge = 0.0;
  for (const auto& [m, v] : c.sectors) edge += std::norm(v[v.size() - 1]);
  return edge / c.norm2();
}

/// One quantum jump: channel drawn with probability <L^dag L>, state renormalized.
inline Channel apply_jump(rotor::Component& c, rng::Stream& rng, JumpBasis basis, const JumpOperators& ops,
                          double truncation_threshold) {
  const double edge = boundary_weight(c);
  if (edge > truncation_threshold)
    throw TruncationError("jump with weight " + std::to_string(edge) + " at j = jmax = " +
                          std::to_string(ops.jmax()));
  const auto chs = channels(basis);
  std::vector<rotor::Component> cand;
  std::vector<double> w;
  double total = 0.0;
  for (Channel ch : chs) {
    cand.push_back(apply_channel(c, ch, ops));
    w.push_back(cand.back().norm2());
    total += w.back();
  }
  const double u = rng.uniform() * total;
  std::size_t pick = 0;
  double acc = w[0];
  while (pick + 1 < chs.size() && u >= acc) acc += w[++pick];
  c = std::move(cand[pick]);
  // Drop sectors that carry nothing (edge m beyond the support).
  for (auto it = c.sectors.begin(); it != c.sectors.end();) it = it->second.squaredNorm() == 0.0 ? c.sectors.erase(it) : std::next(it);
  c.normalize();
  return chs[pick];
}

/// Operators reused across trajectories.
struct Workspace {
  Workspace(int jmax, rotor::SpectrumModel spectrum_)
      : spectrum(std::move(spectrum_)), engine(jmax), align(jmax), jumps(jmax) {}
  rotor::SpectrumModel spectrum;
  pulse::PulseEngine engine;
  observables::AlignmentOperator align;
  JumpOperators jumps;
};

/// Single trajectory of one pure component. The RNG stream is (seed, index, k0).
inline TrajectoryResult run_trajectory(const rotor::Component& initial, const TrajectoryConfig& cfg,
                                       const Workspace& ws, std::uint64_t index = 0) {
  cfg.validate();
  rng::Stream rng(cfg.seed, index, rng::component_stream(initial.k0));
  TrajectoryResult r;
  r.jump_times = sample_jump_times(cfg.gamma, cfg.t_end, rng);
  auto jump = [&](rotor::Component& c, std::size_t) {
    r.channels.push_back(apply_jump(c, rng, cfg.basis, ws.jumps, cfg.truncation_threshold));
  };
  r.alignment.times = cfg.observation_times;
  r.alignment.label = "alignment";
  r.alignment.values = schedule::run_component(initial, ws.spectrum, schedule::effective_pulses(cfg.pulse_schedule),
                                               cfg.pulse_schedule.method, r.jump_times, cfg.observation_times,
                                               ws.engine, ws.align, r.diagnostics, jump);
  return r;
}

inline TrajectoryResult run_trajectory(const rotor::RotorState& initial, const rotor::SpectrumModel& spectrum,
                                       const TrajectoryConfig& cfg, std::uint64_t index = 0) {
  if (initial.components.size() != 1) throw DomainError("run_trajectory needs a pure state");
  const Workspace ws(initial.jmax, spectrum);
  return run_trajectory(initial.components.begin()->second, cfg, ws, index);
}

/// Ensemble mean over n trajectories and the k0 mixture weights. Trajectory i
/// uses streams (seed, i, k0) only, so results do not depend on threads.
inline EnsembleResult run_ensemble(const rotor::RotorState& initial, const TrajectoryConfig& cfg, int n,
                                   const Workspace& ws, int threads = 0) {
  if (n < 1) throw DomainError("n must be >= 1");
  cfg.validate();
  const std::size_t nt = cfg.observation_times.size();
  const double wsum = initial.total_weight();
  std::vector<double> values(static_cast<std::size_t>(n) * nt, 0.0);
  std::vector<std::vector<int>> counts(n);
  std::vector<Diagnostics> diags(n);
  parallel::parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    double* row = &values[i * nt];
    for (const auto& [k0, c] : initial.components) {
      auto r = run_trajectory(c, cfg, ws, i);
      for (std::size_t t = 0; t < nt; ++t) row[t] += c.weight * r.alignment.values[t];
      counts[i].push_back(static_cast<int>(r.jump_times.size()));
      diags[i].merge(r.diagnostics);
    }
    for (std::size_t t = 0; t < nt; ++t) row[t] /= wsum;
  });

  EnsembleResult out;
  out.times = cfg.observation_times;
  out.n_trajectories = n;
  out.mean_alignment.assign(nt, 0.0);
  out.standard_error.assign(nt, 0.0);
  // Shifted sums about the first trajectory: identical trajectories give that value exactly.
  for (std::size_t t = 0; t < nt; ++t) {
    const double ref = values[t];
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = values[static_cast<std::size_t>(i) * nt + t] - ref;
      s += d;
      s2 += d * d;
    }
    out.mean_alignment[t] = ref + s / n;
    if (n > 1) {
      const double var = std::max(0.0, (s2 - s * s / n) / (n - 1));
      out.standard_error[t] = std::sqrt(var / n);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int c : counts[i]) ++out.jump_count_histogram[c];
    out.diagnostics.merge(diags[i]);
  }
  return out;
}

inline EnsembleResult run_ensemble(const rotor::RotorState& initial, const rotor::SpectrumModel& spectrum,
                                   const TrajectoryConfig& cfg, int n, int threads = 0) {
  const Workspace ws(initial.jmax, spectrum);
  return run_ensemble(initial, cfg, n, ws, threads);
}

// Dense master-equation oracle.

/// Basis |j m k> at fixed k, ordered by m then j.
struct DenseBasis {
  int jmax = 0;
  int k = 0;
  std::vector<std::pair<int, int>> states;  // (j, m)
  std::map<std::pair<int, int>, int> index;

  DenseBasis(int jmax_, int k_) : jmax(jmax_), k(k_) {
    if (jmax < std::abs(k)) throw DomainError("jmax below |k|");
    for (int m = -jmax; m <= jmax; ++m)
      for (int j = std::max(std::abs(m), std::abs(k)); j <= jmax; ++j) {
        index[{j, m}] = static_cast<int>(states.size());
        states.emplace_back(j, m);
      }
  }
  int size() const { return static_cast<int>(states.size()); }
};

inline Eigen::VectorXcd to_dense(const rotor::Component& c, const DenseBasis& b) {
  if (c.k0 != b.k) throw DomainError("component k0 differs from basis k");
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(b.size());
  for (const auto& [m, s] : c.sectors)
    for (int j = std::max(std::abs(m), std::abs(b.k)); j < s.size(); ++j) {
      if (j > b.jmax) {
        if (s[j] != 0.0) throw DomainError("component exceeds basis jmax");
        continue;
      }
      v[b.index.at({j, m})] = s[j];
    }
  return v;
}

/// Cartesian direction cosines c_x, c_y, c_z on the dense basis.
inline std::array<Eigen::SparseMatrix<cplx>, 3> cartesian_cosines(const DenseBasis& b) {
  const angular::DirectionCosines dc(std::abs(b.k), b.jmax, b.k);
  std::array<std::vector<Eigen::Triplet<cplx>>, 3> trip;
  const cplx half_i(0.0, 0.5);
  for (int m = -b.jmax; m <= b.jmax; ++m) {
    if (std::abs(b.k) > b.jmax) break;
    const int lo = std::max(std::abs(m), std::abs(b.k));
    const auto z = dc.cz(m);
    for (int j = lo; j <= b.jmax; ++j)
      for (int jp = std::max(lo, j - 1); jp <= std::min(b.jmax, j + 1); ++jp)
        if (z(jp, j) != 0.0) trip[2].emplace_back(b.index.at({jp, m}), b.index.at({j, m}), z(jp, j));
    if (m + 1 > b.jmax) continue;
    const auto cp = dc.cplus(m);
    for (int jp = std::max(std::abs(m + 1), std::abs(b.k)); jp <= b.jmax; ++jp)
      for (int j = std::max(lo, jp - 1); j <= std::min(b.jmax, jp + 1); ++j) {
        const double v = cp(jp, j);
        if (v == 0.0) continue;
        const int row = b.index.at({jp, m + 1}), col = b.index.at({j, m});
        // c_x = (c_+ + c_-)/2, c_y = (c_+ - c_-)/(2i); c_- is the transpose of c_+.
        trip[0].emplace_back(row, col, 0.5 * v);
        trip[0].emplace_back(col, row, 0.5 * v);
        trip[1].emplace_back(row, col, -half_i * v);
        trip[1].emplace_back(col, row, half_i * v);
      }
  }
  std::array<Eigen::SparseMatrix<cplx>, 3> out;
  for (int l = 0; l < 3; ++l) {
    out[l].resize(b.size(), b.size());
    out[l].setFromTriplets(trip[l].begin(), trip[l].end());
  }
  return out;
}

/// Block-diagonal cos^2 on the dense basis.
inline Eigen::SparseMatrix<cplx> cos2_dense(const DenseBasis& b) {
  std::vector<Eigen::Triplet<cplx>> trip;
  for (int m = -b.jmax; m <= b.jmax; ++m) {
    const int lo = std::max(std::abs(m), std::abs(b.k));
    const auto a = angular::cos2beta_matrix(lo, b.jmax, m, b.k);
    for (int j = lo; j <= b.jmax; ++j)
      for (int jp = std::max(lo, j - 2); jp <= std::min(b.jmax, j + 2); ++jp)
        trip.emplace_back(b.index.at({j, m}), b.index.at({jp, m}), a(j, jp));
  }
  Eigen::SparseMatrix<cplx> s(b.size(), b.size());
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

struct OracleResult {
  observables::TimeSeries alignment;
  std::vector<double> trace;
  std::vector<double> min_eigenvalue;
  double max_trace_defect = 0.0;
  double min_eigenvalue_overall = 0.0;
  std::size_t steps = 0;
};

inline constexpr int oracle_max_jmax = 24;

/// drho/dt = -i[H, rho] + gamma (sum_l c_l rho c_l - {sum_l c_l^2, rho}/2) with
/// Cartesian c_l and H diagonal, integrated in the interaction picture by
/// adaptive Dormand-Prince 5(4).
inline OracleResult lindblad_oracle(const Eigen::MatrixXcd& rho0, const DenseBasis& basis,
                                    const rotor::SpectrumModel& spectrum, double gamma,
                                    const std::vector<double>& times, double abs_tol = 1e-10,
                                    double rel_tol = 1e-10) {
  if (basis.jmax > oracle_max_jmax) throw DomainError("oracle limited to jmax <= 24");
  if (!(gamma >= 0.0)) throw DomainError("gamma must be >= 0");
  if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < 0.0))
    throw DomainError("times must be sorted and non-negative");
  const int d = basis.size();
  if (rho0.rows() != d || rho0.cols() != d) throw DomainError("density matrix does not match basis");
  if (!spectrum.covers(basis.jmax, basis.k)) throw DomainError("spectrum does not cover basis");

  const auto c = cartesian_cosines(basis);
  Eigen::SparseMatrix<cplx> s = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
  const auto cos2 = cos2_dense(basis);

  // U(t) = diag(exp(-i phase_a(t))).
  auto phases = [&](double t) {
    Eigen::VectorXcd u(d);
    for (int a = 0; a < d; ++a) {
      const double ph = spectrum.phase(basis.states[a].first, basis.k, t);
      u[a] = cplx(std::cos(ph), -std::sin(ph));
    }
    return u;
  };

  using State = std::vector<cplx>;
  State x(rho0.data(), rho0.data() + static_cast<std::ptrdiff_t>(d) * d);
  Eigen::MatrixXcd rho(d, d), diss(d, d);
  auto rhs = [&](const State& xi, State& dxdt, double t) {
    const Eigen::VectorXcd u = phases(t);
    Eigen::Map<const Eigen::MatrixXcd> ri(xi.data(), d, d);
    rho = u.asDiagonal() * ri * u.conjugate().asDiagonal();
    diss = -0.5 * (s * rho);
    diss -= 0.5 * (rho * s);
    for (int l = 0; l < 3; ++l) {
      const Eigen::MatrixXcd cr = c[l] * rho;
      diss += cr * c[l];
    }
    Eigen::Map<Eigen::MatrixXcd> out(dxdt.data(), d, d);
    out = gamma * (u.conjugate().asDiagonal() * diss * u.asDiagonal());
  };

  OracleResult res;
  res.alignment.times = times;
  res.alignment.label = "alignment";
  auto observe = [&](const State& xi, double t) {
    const Eigen::VectorXcd u = phases(t);
    Eigen::Map<const Eigen::MatrixXcd> ri(xi.data(), d, d);
    const Eigen::MatrixXcd r = u.asDiagonal() * ri * u.conjugate().asDiagonal();
    const double tr = r.trace().real();
    res.alignment.values.push_back((cos2 * r).trace().real() / tr);
    res.trace.push_back(tr);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (r + r.adjoint()), Eigen::EigenvaluesOnly);
    res.min_eigenvalue.push_back(es.eigenvalues().minCoeff());
  };

  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_dense_output(abs_tol, rel_tol, ode::runge_kutta_dopri5<State>());
  std::size_t next = 0;
  while (next < times.size() && times[next] == 0.0) observe(x, 0.0), ++next;
  if (next < times.size()) {
    if (gamma == 0.0) {
      // Interaction-picture state is constant.
      for (; next < times.size(); ++next) observe(x, times[next]);
    } else {
      try {
        std::vector<double> tail(times.begin() + static_cast<std::ptrdiff_t>(next), times.end());
        tail.insert(tail.begin(), 0.0);
        std::size_t i = 0;
        res.steps = ode::integrate_times(stepper, rhs, x, tail.begin(), tail.end(), 1e-3,
                                         [&](const State& xi, double t) {
                                           if (i++ > 0) observe(xi, t);
                                         });
      } catch (const std::exception& e) {
        throw IntegrationError(std::string("master equation integration failed: ") + e.what());
      }
    }
  }
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    res.max_trace_defect = std::max(res.max_trace_defect, std::abs(res.trace[i] - 1.0));
    res.min_eigenvalue_overall = i == 0 ? res.min_eigenvalue[i] : std::min(res.min_eigenvalue_overall, res.min_eigenvalue[i]);
  }
  return res;
}

inline OracleResult lindblad_oracle(const rotor::Component& initial, int jmax, const rotor::SpectrumModel& spectrum,
                                    double gamma, const std::vector<double>& times) {
  const DenseBasis b(jmax, initial.k0);
  Eigen::VectorXcd v = to_dense(initial, b);
  v /= v.norm();
  return lindblad_oracle(Eigen::MatrixXcd(v * v.adjoint()), b, spectrum, gamma, times);
}

}  // namespace nanorotor::decoherence
