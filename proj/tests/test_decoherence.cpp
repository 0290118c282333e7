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

#include <atomic>
#include <cmath>
#include <iostream>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <gtest/gtest.h>

#include "nanorotor/decoherence.hpp"
#include "nanorotor/parallel.hpp"
#include "nanorotor/rng.hpp"
#include "nanorotor/schedule.hpp"

using namespace nanorotor;
using namespace nanorotor::decoherence;

namespace {

rotor::SpectrumModel symmetric_spectrum(int jmax, int kmax = 0) {
  return rotor::rotational_energies(jmax, kmax, rotor::inertia_direct(1e-40, 41.8, 0.0), rotor::SpectrumKind::symmetric);
}

rotor::RotorState small_state(int k0 = 0) {
  rotor::StateSpec s;
  s.sigma_j2 = 3.0;
  return rotor::prepare_aligned_state(s, k0, 16 + std::abs(k0));
}

rotor::RotorState tight_state() {
  rotor::StateSpec s;
  s.sigma_j2 = 800.0;
  return rotor::prepare_aligned_state(s, 0, rotor::truncation_jmax(s));
}

std::vector<double> checkpoints(int n, double t_end) {
  std::vector<double> t;
  for (int i = 1; i <= n; ++i) t.push_back(t_end * i / n);
  return t;
}

}  // namespace

TEST(Philox, KnownAnswers) {
  using rng::philox4x32;
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}), (rng::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (rng::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (rng::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, StreamsAreReproducibleAndDistinct) {
  rng::Stream a(7, 3), b(7, 3), c(7, 4), d(7, 3, 1);
  std::set<double> seen;
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    seen.insert(u);
    EXPECT_NE(u, c.uniform());
    EXPECT_NE(u, d.uniform());
  }
  EXPECT_EQ(seen.size(), 1000u);
  rng::Stream e(11, 0);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) mean += e.exponential();
  EXPECT_NEAR(mean / 100000, 1.0, 4.0 / std::sqrt(100000.0));
}

TEST(Parallel, CoversEveryIndexOnceAndRethrows) {
  std::vector<std::atomic<int>> hits(1000);
  parallel::parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel::parallel_for(100, 3, [](std::size_t i) {
                 if (i == 42) throw DomainError("boom");
               }),
               DomainError);
}

TEST(JumpTimes, ZeroRateIsEmpty) {
  rng::Stream r(1, 0);
  EXPECT_TRUE(sample_jump_times(0.0, 5.0, r).empty());
  EXPECT_THROW(sample_jump_times(-1.0, 1.0, r), DomainError);
}

TEST(JumpTimes, PoissonMeanAndDistribution) {
  const double gamma = 0.29;
  const int draws = 10000;
  std::map<int, int> hist;
  double total = 0.0;
  for (int i = 0; i < draws; ++i) {
    rng::Stream r(2026, static_cast<std::uint64_t>(i));
    const auto t = sample_jump_times(gamma, 1.0, r);
    EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
    for (double x : t) EXPECT_TRUE(x > 0.0 && x <= 1.0);
    total += static_cast<double>(t.size());
    ++hist[static_cast<int>(t.size())];
  }
  EXPECT_NEAR(total / draws, gamma, 3.0 * std::sqrt(gamma / draws));

  const boost::math::poisson_distribution<double> pois(gamma);
  double chi2 = 0.0;
  const int bins = 3;  // 0, 1, >= 2
  for (int k = 0; k < bins; ++k) {
    const double p = k < bins - 1 ? boost::math::pdf(pois, k) : 1.0 - boost::math::cdf(pois, k - 1);
    double obs = 0.0;
    for (const auto& [n, c] : hist)
      if (n == k || (k == bins - 1 && n >= k)) obs += c;
    const double expect = p * draws;
    chi2 += (obs - expect) * (obs - expect) / expect;
  }
  const double p_value = 1.0 - boost::math::cdf(boost::math::chi_squared_distribution<double>(bins - 1), chi2);
  std::cout << "Poisson chi2 = " << chi2 << ", p = " << p_value << "\n";
  EXPECT_GT(p_value, 0.01);
}

TEST(Jump, ChannelWeightsSumToOne) {
  for (int k0 : {0, 3}) {
    const auto st = small_state(k0);
    const JumpOperators ops(st.jmax);
    for (auto basis : {JumpBasis::spherical, JumpBasis::cartesian}) {
      const auto w = jump_weights(st.components.at(k0), basis, ops);
      EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-10);
      for (double x : w) EXPECT_GE(x, 0.0);
    }
  }
}

TEST(Jump, SelectionRulesAndConservation) {
  const auto st = small_state(0);
  const JumpOperators ops(st.jmax);
  const auto z = apply_channel(st.components.at(0), Channel::z, ops);
  ASSERT_EQ(z.sectors.size(), 1u);
  EXPECT_EQ(z.sectors.begin()->first, 0);

  const auto st3 = small_state(3);
  const JumpOperators ops3(st3.jmax);
  for (auto basis : {JumpBasis::spherical, JumpBasis::cartesian}) {
    for (std::uint64_t i = 0; i < 40; ++i) {
      rng::Stream r(5, i);
      rotor::Component c = st3.components.at(3);
      const auto before = c.sectors.size();
      apply_jump(c, r, basis, ops3, 1e-10);
      EXPECT_EQ(c.k0, 3);
      EXPECT_NEAR(c.norm2(), 1.0, 1e-12);
      if (basis == JumpBasis::spherical) EXPECT_LE(c.sectors.size(), before + 1);
      for (const auto& [m, v] : c.sectors)
        for (int j = 0; j < std::max(std::abs(m), 3); ++j) EXPECT_EQ(v[j], cplx(0.0));
    }
  }
}

TEST(Jump, BoundaryWeightRaisesTruncationError) {
  rotor::Component c;
  c.sectors[0] = CVector::Zero(11);
  c.sectors[0][10] = 1.0;
  c.sectors[0][9] = 1.0;
  c.normalize();
  const JumpOperators ops(10);
  rng::Stream r(1, 0);
  EXPECT_THROW(apply_jump(c, r, JumpBasis::spherical, ops, 1e-10), TruncationError);
}

TEST(Jump, ForcedZJumpSharpensAlignment) {
  const auto st = tight_state();
  const auto& c = st.components.at(0);
  const JumpOperators ops(st.jmax);
  const observables::AlignmentOperator op(st.jmax);
  const double before = op(c);
  rotor::Component after = apply_channel(c, Channel::z, ops);
  after.normalize();
  const double a = op(after);
  // Oracle: <cos^4>/<cos^2> by quadrature of the prepared wave function.
  const auto g = angular::make_grid(angular::default_grid_order(st.jmax) + 8);
  const angular::WignerTable table(g, st.jmax, 0, 0);
  const auto psi = angular::synthesize_beta(c.sectors.at(0), table, g).psi;
  double c2 = 0.0, c4 = 0.0;
  for (int i = 0; i < g.order; ++i) {
    const double x = g.cosines[i] * g.cosines[i], w = g.weights[i] * std::norm(psi[i]);
    c2 += w * x;
    c4 += w * x * x;
  }
  EXPECT_GE(a, before);
  EXPECT_NEAR(a, c4 / c2, 1e-10);
}

TEST(Trajectory, ZeroRateMatchesDeterministicPipeline) {
  rotor::StateSpec s;
  s.sigma_j2 = 200.0;
  const auto st = rotor::prepare_mixture(s, 1.0, rotor::mixture_jmax(s, 1.0));
  const auto sp = symmetric_spectrum(st.jmax, 8);
  TrajectoryConfig cfg;
  cfg.t_end = 1.0;
  cfg.observation_times = checkpoints(64, 1.0);
  cfg.pulse_schedule.phi = 2.0;
  const Workspace ws(st.jmax, sp);
  Diagnostics d;
  const auto det = schedule::evolve_alignment(st, sp, cfg.pulse_schedule, cfg.observation_times, ws.engine, ws.align, d);
  const auto ens = run_ensemble(st, cfg, 3, ws, 2);
  EXPECT_EQ(ens.mean_alignment, det.values);
  for (double e : ens.standard_error) EXPECT_EQ(e, 0.0);
  EXPECT_EQ(ens.jump_count_histogram.at(0), 3L * static_cast<long>(st.components.size()));
}

TEST(Trajectory, SingleTrajectoryEnsembleEqualsTrajectory) {
  const auto st = small_state();
  const auto sp = symmetric_spectrum(st.jmax);
  TrajectoryConfig cfg;
  cfg.gamma = 2.0;
  cfg.observation_times = checkpoints(20, 1.0);
  cfg.seed = 99;
  const auto one = run_trajectory(st, sp, cfg, 0);
  const auto ens = run_ensemble(st, sp, cfg, 1, 1);
  EXPECT_EQ(ens.mean_alignment, one.alignment.values);
  EXPECT_EQ(ens.n_trajectories, 1);
}

TEST(Trajectory, JumpsDegradeRevival) {
  const auto st = tight_state();
  const auto sp = symmetric_spectrum(st.jmax);
  TrajectoryConfig cfg;
  cfg.gamma = 1.0;
  cfg.observation_times = {1.0};
  cfg.seed = 3;
  const Workspace ws(st.jmax, sp);
  const double vacuum = observables::alignment_after(st, 1.0, sp, ws.align);
  int found = 0;
  for (std::uint64_t i = 0; i < 40 && found < 3; ++i) {
    const auto r = run_trajectory(st.components.at(0), cfg, ws, i);
    if (r.jump_times.empty() || r.jump_times.front() < 0.1 || r.jump_times.back() > 0.9) continue;
    EXPECT_LT(r.alignment.values[0], vacuum - 0.05) << i;
    ++found;
  }
  EXPECT_EQ(found, 3);
}

TEST(Ensemble, BitwiseIndependentOfThreadCount) {
  rotor::StateSpec s;
  s.sigma_j2 = 3.0;
  const auto st = rotor::prepare_mixture(s, 0.7, 20);
  const auto sp = symmetric_spectrum(st.jmax, 4);
  TrajectoryConfig cfg;
  cfg.gamma = 1.5;
  cfg.observation_times = checkpoints(25, 1.0);
  cfg.seed = 1234;
  const Workspace ws(st.jmax, sp);
  const auto a = run_ensemble(st, cfg, 200, ws, 1);
  const auto b = run_ensemble(st, cfg, 200, ws, 4);
  const auto c = run_ensemble(st, cfg, 200, ws, 7);
  EXPECT_EQ(a.mean_alignment, b.mean_alignment);
  EXPECT_EQ(a.standard_error, b.standard_error);
  EXPECT_EQ(a.mean_alignment, c.mean_alignment);
  EXPECT_EQ(a.jump_count_histogram, c.jump_count_histogram);
}

TEST(Oracle, ZeroRateIsUnitary) {
  const auto st = small_state();
  const auto sp = symmetric_spectrum(st.jmax);
  const auto t = checkpoints(10, 1.0);
  const auto o = lindblad_oracle(st.components.at(0), st.jmax, sp, 0.0, t);
  const observables::AlignmentOperator op(st.jmax);
  for (std::size_t i = 0; i < t.size(); ++i)
    EXPECT_NEAR(o.alignment.values[i], observables::alignment_after(st, t[i], sp, op), 1e-8);
  EXPECT_THROW(lindblad_oracle(tight_state().components.at(0), 25, symmetric_spectrum(25), 0.1, t), DomainError);
}

TEST(Oracle, TraceAndPositivity) {
  const auto st = small_state();
  const auto sp = symmetric_spectrum(st.jmax);
  const auto o = lindblad_oracle(st.components.at(0), st.jmax, sp, 0.5, checkpoints(8, 1.0));
  EXPECT_LE(o.max_trace_defect, 1e-8);
  EXPECT_GE(o.min_eigenvalue_overall, -1e-8);
}

TEST(Oracle, MonteCarloAgreesWithinThreeStandardErrors) {
  const auto st = small_state();
  const auto sp = symmetric_spectrum(st.jmax);
  const auto t = checkpoints(50, 1.0);
  const auto o = lindblad_oracle(st.components.at(0), st.jmax, sp, 0.5, t);
  for (auto basis : {JumpBasis::spherical, JumpBasis::cartesian}) {
    TrajectoryConfig cfg;
    cfg.gamma = 0.5;
    cfg.observation_times = t;
    cfg.seed = 2026;
    cfg.basis = basis;
    const auto e = run_ensemble(st, sp, cfg, 2000);
    double worst = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double z = std::abs(e.mean_alignment[i] - o.alignment.values[i]) / e.standard_error[i];
      worst = std::max(worst, z);
      EXPECT_LE(z, 3.0) << "t = " << t[i];
    }
    std::cout << (basis == JumpBasis::spherical ? "spherical" : "cartesian") << " jumps: worst |z| = " << worst << "\n";
  }
}

TEST(Oracle, ErrorScalesAsInverseSqrtN) {
  const auto st = small_state();
  const auto sp = symmetric_spectrum(st.jmax);
  const auto t = checkpoints(50, 1.0);
  const auto o = lindblad_oracle(st.components.at(0), st.jmax, sp, 0.5, t);
  const Workspace ws(st.jmax, sp);
  // RMS deviation from the oracle pooled over 16 independent seeds.
  auto rms = [&](int n) {
    double acc = 0.0;
    for (std::uint64_t seed = 0; seed < 16; ++seed) {
      TrajectoryConfig cfg;
      cfg.gamma = 0.5;
      cfg.observation_times = t;
      cfg.seed = 1000 + seed;
      const auto e = run_ensemble(st, cfg, n, ws);
      for (std::size_t i = 0; i < t.size(); ++i) acc += std::pow(e.mean_alignment[i] - o.alignment.values[i], 2);
    }
    return std::sqrt(acc / (16.0 * t.size()));
  };
  const double ratio = rms(500) / rms(2000);
  std::cout << "error ratio n=500 / n=2000: " << ratio << "\n";
  EXPECT_GE(ratio, 1.6);
  EXPECT_LE(ratio, 2.4);
}

TEST(Ensemble, PresetGasRateSlightlyDegradesRevival) {
  const auto rod = rotor::inertia_from_ellipsoid({2.75e-9, 2.75e-9, 25e-9}, 2329.0);
  const double gamma = gamma_from_hz(preset_collision_rate_hz, rod.T_rev);
  EXPECT_NEAR(gamma, 0.29, 0.01);
  EXPECT_NEAR(hz_from_gamma(gamma, rod.T_rev), preset_collision_rate_hz, 1e-12);
  const auto st = tight_state();
  const auto sp = symmetric_spectrum(st.jmax);
  TrajectoryConfig cfg;
  cfg.gamma = gamma;
  cfg.observation_times = {1.0};
  cfg.seed = 20;
  const auto e = run_ensemble(st, sp, cfg, 2000);
  const double vacuum = observables::alignment_after(st, 1.0, sp, observables::AlignmentOperator(st.jmax));
  const double reduction = vacuum - e.mean_alignment[0];
  std::cout << "revival alignment " << vacuum << " -> " << e.mean_alignment[0] << " +- " << e.standard_error[0]
            << " (reduction " << reduction << ")\n";
  EXPECT_GE(reduction, 0.05);
  EXPECT_LE(reduction, 0.35);
}
