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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "nanorotor/observables.hpp"
#include "nanorotor/rotor.hpp"

using namespace nanorotor;
using namespace nanorotor::rotor;

namespace {

constexpr double nm = 1e-9;
const std::array<double, 3> rod{2.75 * nm, 2.75 * nm, 25.0 * nm};
const std::array<double, 3> flat_rod{2.75 * nm, 2.5 * nm, 25.0 * nm};
constexpr double silicon = 2329.0;

// Full (2j+1) k-basis asymmetric-top Hamiltonian, units hbar^2/(2I).
std::vector<double> dense_levels(int j, const InertiaModel& m) {
  const double I = m.I();
  const double a = I / m.I_a, b = I / m.I_b, c = I / m.I_c;
  const int n = 2 * j + 1;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (int k = -j; k <= j; ++k) {
    h(k + j, k + j) = 0.5 * (a + b) * (j * (j + 1.0) - k * k) + c * k * k;
    if (k + 2 <= j) {
      const double v = 0.25 * (a - b) * std::sqrt(double(j - k) * (j + k + 1) * (j - k - 1) * (j + k + 2));
      h(k + 2 + j, k + j) = v;
      h(k + j, k + 2 + j) = v;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + n);
  return out;
}

RotorState fig1_state() {
  StateSpec s;
  s.mode = StateMode::gaussian_j;
  s.sigma_j2 = 800.0;
  return prepare_aligned_state(s, 0, truncation_jmax(s));
}

}  // namespace

TEST(Inertia, SiliconNanorodPreset) {
  const auto m = inertia_from_ellipsoid(rod, silicon);
  EXPECT_NEAR(m.mass_amu(), 1.1e6, 0.02 * 1.1e6);
  EXPECT_NEAR(m.T_rev, 14e-3, 0.02 * 14e-3);
  EXPECT_DOUBLE_EQ(m.b_asym, 0.0);
  EXPECT_GE(m.I_a, m.I_b);
  EXPECT_GT(m.I_b, m.I_c);
  EXPECT_NEAR(m.T_rev, 2 * pi * m.I_a / constants::hbar, 1e-15);
  EXPECT_FALSE(m.degenerate);
}

TEST(Inertia, MinorDiameterAsymmetry) {
  const auto m = inertia_from_ellipsoid(flat_rod, silicon);
  EXPECT_NEAR(std::abs(m.b_asym), 2.3e-5, 0.05 * 2.3e-5);
  EXPECT_GE(m.I_a, m.I_b);
  EXPECT_GE(m.I_b, m.I_c);
  EXPECT_NEAR(m.T_rev, 2 * pi * 0.5 * (m.I_a + m.I_b) / constants::hbar, 1e-15);
}

TEST(Inertia, SphereIsDegenerate) {
  const auto m = inertia_from_ellipsoid({3 * nm, 3 * nm, 3 * nm}, 1000.0);
  EXPECT_TRUE(m.degenerate);
  EXPECT_EQ(m.b_asym, 0.0);
  EXPECT_NEAR(m.I_a, m.I_c, 1e-12 * m.I_a);
  EXPECT_THROW(inertia_from_ellipsoid({0.0, 1.0, 1.0}, 1.0), DomainError);
  EXPECT_THROW(inertia_from_ellipsoid({1.0, 1.0, 1.0}, -1.0), DomainError);
}

TEST(Inertia, DirectParametrizationRoundTrips) {
  for (double b : {0.0, 1e-6, 2.3e-5, 1e-3}) {
    const auto m = inertia_direct(1e-40, 41.8, b);
    EXPECT_NEAR(std::abs(m.b_asym), b, 1e-9 * std::max(b, 1e-12));
    EXPECT_NEAR(m.I(), 1e-40, 1e-52);
    EXPECT_NEAR(m.ratio(), 41.8, 1e-10);
    EXPECT_GE(m.I_a, m.I_b);
  }
}

TEST(Spectrum, SymmetricClosedForm) {
  const auto m = inertia_from_ellipsoid(rod, silicon);
  const auto s = rotational_energies(50, 5, m, SpectrumKind::symmetric);
  for (int j = 0; j <= 50; ++j)
    for (int k = 0; k <= std::min(j, 5); ++k)
      EXPECT_DOUBLE_EQ(s.energy(j, k), j * (j + 1.0) + (m.ratio() - 1.0) * k * k);
  EXPECT_THROW(rotational_energies(3, 4, m, SpectrumKind::symmetric), DomainError);
}

TEST(Spectrum, AsymmetricReducesToSymmetricAtZeroB) {
  const auto m = inertia_direct(1e-40, 41.8, 0.0);
  const auto sym = rotational_energies(300, 6, m, SpectrumKind::symmetric);
  const auto asym = rotational_energies(300, 6, m, SpectrumKind::asymmetric);
  for (int j = 0; j <= 300; ++j)
    for (int k = 0; k <= std::min(j, 6); ++k) EXPECT_NEAR(asym.residual_at(j, k), sym.residual_at(j, k), 1e-12 * j * j + 1e-12);
  double last = 1e300;
  for (double b : {1e-4, 1e-5, 1e-6, 1e-7}) {
    const auto s = rotational_energies(100, 4, inertia_direct(1e-40, 41.8, b), SpectrumKind::asymmetric);
    double worst = 0.0;
    for (int j = 0; j <= 100; ++j)
      for (int k = 0; k <= std::min(j, 4); ++k) worst = std::max(worst, std::abs(s.residual_at(j, k) - sym.residual_at(j, k)));
    EXPECT_LT(worst, last);
    last = worst;
  }
}

TEST(Spectrum, JEqualsOneAnalyticLevels) {
  const auto m = inertia_from_ellipsoid({2.0 * nm, 3.0 * nm, 11.0 * nm}, silicon);
  const double I = m.I();
  // hbar^2/2 {1/Ia+1/Ib, 1/Ib+1/Ic, 1/Ia+1/Ic} in units hbar^2/(2I).
  std::vector<double> exact{I / m.I_a + I / m.I_b, I / m.I_b + I / m.I_c, I / m.I_a + I / m.I_c};
  std::sort(exact.begin(), exact.end());
  const auto lv = asymmetric_levels(1, m);
  ASSERT_EQ(lv.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(lv[i], exact[i], 1e-12 * exact[2]);
  const auto s = rotational_energies(1, 1, m, SpectrumKind::asymmetric);
  EXPECT_NEAR(s.energy(1, 0), I / m.I_a + I / m.I_b, 1e-12);
  EXPECT_NEAR(s.energy(1, 1), 0.5 * (exact[1] + exact[2]), 1e-12);
}

TEST(Spectrum, WangBlocksMatchDenseDiagonalization) {
  const auto m = inertia_from_ellipsoid({2.0 * nm, 3.0 * nm, 11.0 * nm}, silicon);
  for (int j = 0; j <= 12; ++j) {
    const auto a = asymmetric_levels(j, m);
    const auto d = dense_levels(j, m);
    ASSERT_EQ(a.size(), d.size());
    for (size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], d[i], 1e-10 * (1.0 + std::abs(d[i]))) << j << " " << i;
  }
}

TEST(Spectrum, KZeroShiftIsSecondOrderInB) {
  const int j = 50;
  const auto ref = rotational_energies(j, 0, inertia_direct(1e-40, 41.8, 0.0), SpectrumKind::symmetric);
  std::vector<double> lb, ls;
  for (double b = 1e-6; b <= 1.0001e-4; b *= std::pow(10.0, 0.25)) {
    const auto s = rotational_energies(j, 0, inertia_direct(1e-40, 41.8, b), SpectrumKind::asymmetric);
    lb.push_back(std::log(b));
    ls.push_back(std::log(std::abs(s.energy(j, 0) - ref.energy(j, 0))));
  }
  const double n = lb.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < lb.size(); ++i) {
    sx += lb[i];
    sy += ls[i];
    sxx += lb[i] * lb[i];
    sxy += lb[i] * ls[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(slope, 2.0, 0.1);
}

TEST(Spectrum, PerturbativeAgreesWithExactForWeakMixing) {
  const auto m = inertia_direct(1e-40, 45.75, 2.3e-5);
  const auto ex = rotational_energies(200, 3, m, SpectrumKind::asymmetric);
  const auto pt = rotational_energies(200, 3, m, SpectrumKind::perturbative);
  const auto sy = rotational_energies(200, 3, m, SpectrumKind::symmetric);
  for (int j : {10, 50, 100})
    for (int k = 0; k <= 3; ++k) {
      const double shift_ex = ex.energy(j, k) - sy.energy(j, k);
      const double shift_pt = pt.energy(j, k) - sy.energy(j, k);
      EXPECT_NEAR(shift_pt, shift_ex, 0.02 * std::abs(shift_ex) + 1e-9) << j << " " << k;
    }
  // Closed form for k = 0: -(c'-M') b^2 (j-1)j(j+1)(j+2)/8.
  const double I = m.I();
  const double cm = I / m.I_c - 0.5 * (I / m.I_a + I / m.I_b);
  for (int j : {10, 150}) {
    const double expect = -cm * m.b_asym * m.b_asym * (j - 1.0) * j * (j + 1.0) * (j + 2.0) / 8.0;
    const double got = pt.energy(j, 0) - 0.5 * (I / m.I_a + I / m.I_b) * j * (j + 1.0);
    EXPECT_NEAR(got, expect, 1e-9 * std::abs(expect) + 1e-12);
  }
}

TEST(Spectrum, StrictAssignmentRejectsStrongMixing) {
  const auto m = inertia_direct(1e-40, 45.75, 2.3e-5);
  EXPECT_THROW(rotational_energies(1200, 0, m, SpectrumKind::asymmetric, AssignmentPolicy::strict), AssignmentError);
  const auto s = rotational_energies(1200, 0, m, SpectrumKind::asymmetric, AssignmentPolicy::lenient);
  EXPECT_LT(s.min_purity, 0.5);
  EXPECT_NO_THROW(rotational_energies(200, 0, m, SpectrumKind::asymmetric, AssignmentPolicy::strict));
}

TEST(Preparation, TruncationRule) {
  StateSpec s;
  s.mode = StateMode::gaussian_j;
  s.sigma_j2 = 800.0;
  const int jm = truncation_jmax(s);
  EXPECT_GE(jm, 120);
  EXPECT_LE(jm, 160);
  StateSpec b;
  b.mode = StateMode::gaussian_beta;
  b.sigma_beta = 3e-3;
  const int jb = truncation_jmax(b);
  const auto st = prepare_aligned_state(b, 0, jb);
  EXPECT_GE(st.diagnostics.values.at("captured_norm_min"), 1.0 - 1e-10);
  EXPECT_TRUE(st.diagnostics.warnings.empty());
  const auto small = prepare_aligned_state(b, 0, jb / 2);
  EXPECT_FALSE(small.diagnostics.warnings.empty());
}

TEST(Preparation, GaussianJNormAndAlignment) {
  const auto st = fig1_state();
  const auto& c = st.components.at(0);
  EXPECT_NEAR(c.norm2(), 1.0, 1e-12);
  EXPECT_EQ(c.sectors.size(), 1u);
  EXPECT_EQ(c.sectors.begin()->first, 0);
  // Frozen from the beta-quadrature evaluation of cos^2 on this state.
  const int jmax = st.jmax;
  const auto g = angular::make_grid(angular::default_grid_order(jmax) + 40);
  const auto smp = angular::synthesize_beta(c.sectors.at(0), 0, 0, g);
  double q = 0.0;
  for (int i = 0; i < g.order; ++i) q += g.weights[i] * std::norm(smp.psi[i]) * std::pow(std::cos(g.nodes[i]), 2);
  EXPECT_NEAR(observables::alignment(st), q, 1e-12);
  EXPECT_NEAR(observables::alignment(st), 0.985630, 1e-6);
}

TEST(Preparation, WideGaussianIsIsotropic) {
  StateSpec s;
  s.mode = StateMode::gaussian_beta;
  s.sigma_beta = 50.0;
  const auto st = prepare_aligned_state(s, 0, 16);
  EXPECT_NEAR(observables::alignment(st), 1.0 / 3.0, 1e-4);
  EXPECT_NEAR(st.components.at(0).norm2(), 1.0, 1e-12);
  StateSpec bad;
  bad.mode = StateMode::gaussian_beta;
  bad.sigma_beta = 0.0;
  EXPECT_THROW(prepare_aligned_state(bad, 0, 10), DomainError);
}

TEST(Preparation, Mixtures) {
  StateSpec s;
  s.mode = StateMode::gaussian_j;
  s.sigma_j2 = 200.0;
  const auto one = prepare_mixture(s, 0.0, 80);
  ASSERT_EQ(one.components.size(), 1u);
  EXPECT_DOUBLE_EQ(one.components.at(0).weight, 1.0);
  const auto three = prepare_mixture(s, 3.0, 80);
  EXPECT_EQ(three.components.size(), 25u);
  EXPECT_NEAR(three.total_weight(), 1.0, 1e-14);
  for (int k = 1; k <= 12; ++k) EXPECT_DOUBLE_EQ(three.components.at(k).weight, three.components.at(-k).weight);
  for (const auto& [k0, c] : three.components) {
    EXPECT_EQ(c.sectors.size(), 1u);
    EXPECT_EQ(c.sectors.begin()->first, k0);
    EXPECT_NEAR(c.norm2(), 1.0, 1e-12);
  }
}

TEST(Propagation, IdentityUnitarityComposition) {
  const auto st = fig1_state();
  const auto m = inertia_from_ellipsoid(rod, silicon);
  const auto sp = rotational_energies(st.jmax, 0, m, SpectrumKind::symmetric);
  const auto z = free_propagate(st, 0.0, sp);
  EXPECT_EQ((z.components.at(0).sectors.at(0) - st.components.at(0).sectors.at(0)).norm(), 0.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 10; ++i) {
    const double t1 = u(rng), t2 = u(rng);
    const auto a = free_propagate(free_propagate(st, t1, sp), t2, sp);
    const auto b = free_propagate(st, t1 + t2, sp);
    EXPECT_NEAR(a.components.at(0).norm2(), 1.0, 1e-12);
    EXPECT_LT((a.components.at(0).sectors.at(0) - b.components.at(0).sectors.at(0)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(b.time, t1 + t2, 1e-15);
  }
  const auto d1 = free_propagate(free_propagate(st, 0.125, sp), 0.875, sp);
  EXPECT_LT((d1.components.at(0).sectors.at(0) - st.components.at(0).sectors.at(0)).cwiseAbs().maxCoeff(), 1e-13);
  const SpectrumModel tiny = rotational_energies(10, 0, m, SpectrumKind::symmetric);
  EXPECT_THROW(free_propagate(st, 0.1, tiny), DomainError);
}

TEST(Propagation, MixtureRevivesAtIntegerTimes) {
  StateSpec s;
  s.mode = StateMode::gaussian_beta;
  s.sigma_beta = 0.05;
  const int jmax = mixture_jmax(s, 2.0);
  const auto st = prepare_mixture(s, 2.0, jmax);
  const auto m = inertia_from_ellipsoid(rod, silicon);
  const auto sp = rotational_energies(jmax, 8, m, SpectrumKind::symmetric);
  observables::AlignmentOperator op(jmax);
  const double a0 = op(st);
  const auto g = angular::make_grid(angular::default_grid_order(jmax));
  const auto p0 = observables::beta_distribution(st, g);
  for (double t : {1.0, 2.0, 5.0}) {
    const auto s1 = free_propagate(st, t, sp);
    EXPECT_NEAR(op(s1), a0, 1e-10);
    const auto p1 = observables::beta_distribution(s1, g);
    for (int i = 0; i < g.order; i += 7) EXPECT_NEAR(p1[i], p0[i], 1e-10);
  }
  EXPECT_GT(std::abs(op(free_propagate(st, 0.37, sp)) - a0), 1e-3);
}

TEST(Propagation, HalfRevivalIsAntialigned) {
  const auto st = fig1_state();
  const auto sp = rotational_energies(st.jmax, 0, inertia_from_ellipsoid(rod, silicon), SpectrumKind::symmetric);
  EXPECT_LE(observables::alignment(free_propagate(st, 0.5, sp)), 0.05);
}

TEST(Propagation, FractionalRevivalWindows) {
  const auto st = fig1_state();
  const auto sp = rotational_energies(st.jmax, 0, inertia_from_ellipsoid(rod, silicon), SpectrumKind::symmetric);
  const auto s8 = free_propagate(st, 0.125, sp);
  for (int n = 0; n < 4; ++n) EXPECT_NEAR(observables::window_probability(s8, (2 * n + 1) * pi / 8, pi / 16), 0.25, 0.02) << n;
  const auto s4 = free_propagate(st, 0.25, sp);
  for (double c : {pi / 4, 3 * pi / 4}) EXPECT_NEAR(observables::window_probability(s4, c, pi / 8), 0.5, 0.02);
}

TEST(Propagation, AsymmetryDelaysRevival) {
  StateSpec s;
  s.mode = StateMode::gaussian_j;
  s.sigma_j2 = 800.0;
  const auto st = prepare_aligned_state(s, 0, truncation_jmax(s));
  observables::AlignmentOperator op(st.jmax);
  double last = 0.0;
  for (double b : {0.0, 1e-5, 3e-5, 1e-4}) {
    const auto sp = rotational_energies(st.jmax, 0, inertia_direct(1e-40, 41.8, b), SpectrumKind::asymmetric,
                                        AssignmentPolicy::lenient);
    const auto pk = observables::locate_revival(
        [&](double t) { return observables::alignment_after(st, t, sp, op); }, 1.0, 0.05, 2e-4);
    if (b == 0.0)
      EXPECT_NEAR(pk.t, 1.0, 1e-8);
    else
      EXPECT_GT(pk.t, last);
    last = pk.t;
  }
}
