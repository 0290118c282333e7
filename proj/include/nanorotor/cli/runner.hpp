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

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "nanorotor/cli/config.hpp"
#include "nanorotor/decoherence.hpp"
#include "nanorotor/eightstate.hpp"
#include "nanorotor/observables.hpp"
#include "nanorotor/parallel.hpp"
#include "nanorotor/pulse.hpp"
#include "nanorotor/rotor.hpp"
#include "nanorotor/schedule.hpp"

namespace nanorotor::cli {

inline constexpr std::size_t engine_cache_bytes = std::size_t(256) << 20;

inline rotor::InertiaModel build_model(const RotorConfig& r) {
  if (r.direct) return rotor::inertia_direct(r.I, r.ratio, r.b);
  return rotor::inertia_from_ellipsoid({0.5e-9 * r.diameters_nm[0], 0.5e-9 * r.diameters_nm[1], 0.5e-9 * r.diameters_nm[2]},
                                       r.density);
}

struct SpectrumChoice {
  rotor::SpectrumModel model;
  std::string used;
  std::string note;
};

/// "auto": symmetric when b = 0, else exact diagonalization, falling back to
/// the perturbative energies when level assignment is ambiguous.
inline SpectrumChoice build_spectrum(const rotor::InertiaModel& m, int jmax, int kmax, const std::string& method,
                                     rotor::AssignmentPolicy policy) {
  using rotor::SpectrumKind;
  SpectrumChoice out;
  if (method == "symmetric" || (method == "auto" && (m.b_asym == 0.0 || m.degenerate))) {
    out.model = rotor::rotational_energies(jmax, kmax, m, SpectrumKind::symmetric);
    out.used = "symmetric";
  } else if (method == "perturbative") {
    out.model = rotor::rotational_energies(jmax, kmax, m, SpectrumKind::perturbative);
    out.used = "perturbative";
  } else if (method == "asymmetric") {
    out.model = rotor::rotational_energies(jmax, kmax, m, SpectrumKind::asymmetric, policy);
    out.used = "asymmetric";
  } else {
    try {
      out.model = rotor::rotational_energies(jmax, kmax, m, SpectrumKind::asymmetric, policy);
      out.used = "asymmetric";
    } catch (const AssignmentError& e) {
      out.model = rotor::rotational_energies(jmax, kmax, m, SpectrumKind::perturbative);
      out.used = "perturbative";
      out.note = std::string("exact levels not assignable (") + e.what() + "); perturbative energies used";
    }
  }
  return out;
}

inline int kmax_for(double sigma_k) { return sigma_k > 0.0 ? static_cast<int>(std::ceil(4.0 * sigma_k)) : 0; }

inline int resolved_jmax(const ExperimentConfig& c, const rotor::StateSpec& spec, double sigma_k) {
  return c.jmax > 0 ? c.jmax : rotor::mixture_jmax(spec, sigma_k);
}

/// j headroom above the state truncation so exact pulses act without leaking
/// weight past the basis edge: one kick bandwidth per scheduled pulse.
inline int pulse_headroom(const ExperimentConfig& c, const std::vector<double>& phis) {
  int h = 0;
  if (!c.pulse.schedule.empty()) {
    for (const auto& e : c.pulse.schedule)
      if (e.phi != 0.0) h += pulse::semiclassical_bandwidth(std::abs(e.phi));
    return h;
  }
  for (double phi : phis)
    if (phi != 0.0) h = std::max(h, pulse::semiclassical_bandwidth(std::abs(phi)));
  return h;
}

/// Prepared mixture, zero-padded by the pulse headroom.
inline rotor::RotorState working_state(const ExperimentConfig& c, const rotor::StateSpec& spec, double sigma_k,
                                       const std::vector<double>& phis) {
  const int jmax = resolved_jmax(c, spec, sigma_k);
  return rotor::extend_basis(rotor::prepare_mixture(spec, sigma_k, jmax), jmax + pulse_headroom(c, phis));
}

/// Uniform samples plus `refine`-times denser samples within refine_halfwidth
/// of every multiple of 1/8.
inline std::vector<double> make_times(const ExperimentConfig& c) {
  if (!c.times_list.empty()) return c.times_list;
  const double h = c.t_end / (c.points - 1);
  std::vector<double> t;
  for (int i = 0; i < c.points; ++i) t.push_back(i == c.points - 1 ? c.t_end : i * h);
  if (c.refine > 1 && c.refine_halfwidth > 0.0) {
    const double hr = h / c.refine;
    const int nr = static_cast<int>(std::floor(c.refine_halfwidth / hr));
    for (int q = 0; q / 8.0 <= c.t_end + c.refine_halfwidth; ++q)
      for (int i = -nr; i <= nr; ++i) {
        const double x = q / 8.0 + i * hr;
        if (x >= 0.0 && x <= c.t_end) t.push_back(x);
      }
  }
  std::sort(t.begin(), t.end());
  std::vector<double> out;
  for (double x : t)
    if (out.empty() || x - out.back() > 1e-12) out.push_back(x);
  return out;
}

inline pulse::PulseSpec pulse_spec(const ExperimentConfig& c, double phi) {
  pulse::PulseSpec p;
  p.method = c.pulse.method;
  p.phi = phi;
  if (!c.pulse.schedule.empty())
    p.schedule = c.pulse.schedule;
  else if (phi != 0.0)
    p.schedule = {pulse::PulseEvent{c.pulse.time, phi}};
  return p;
}

/// State right after the last scheduled pulse (or the initial state).
inline rotor::RotorState after_pulses(rotor::RotorState s, const rotor::SpectrumModel& sp, const pulse::PulseSpec& p,
                                      const pulse::PulseEngine& engine) {
  for (const auto& e : schedule::effective_pulses(p)) {
    if (e.t < s.time) throw DomainError("pulse schedule not sorted");
    s = rotor::free_propagate(s, e.t - s.time, sp);
    engine.apply(s, e.phi, p.method);
  }
  return s;
}

struct Revival {
  double t = 1.0;
  double value = 0.0;
};

/// Alignment at the revival: t = 1 for symmetric spectra, else the located maximum near 1.
/// Revival peaks of tight states are ~1e-3 wide, hence the fine first pass; the
/// window may double once.
inline Revival revival(const rotor::RotorState& post, const rotor::SpectrumModel& sp,
                       const observables::AlignmentOperator& op, double halfwidth) {
  auto f = [&](double t) { return observables::alignment_after(post, t - post.time, sp, op); };
  if (sp.kind == rotor::SpectrumKind::symmetric) return {1.0, f(1.0)};
  const auto p = observables::locate_revival(f, 1.0, halfwidth, halfwidth / 200.0, 2.0 * halfwidth, 1e-9);
  return {p.t, f(p.t)};
}

/// Fits y = A cos^2(phi/2) + B; returns A, B and the RMS residual.
inline std::array<double, 3> fit_cos2(const std::vector<double>& phi, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double x = std::pow(std::cos(phi[i] / 2), 2);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  const double det = n * sxx - sx * sx;
  const double A = det != 0.0 ? (n * sxy - sx * sy) / det : 0.0;
  const double B = (sy - A * sx) / n;
  double r2 = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) r2 += std::pow(A * std::pow(std::cos(phi[i] / 2), 2) + B - y[i], 2);
  return {A, B, std::sqrt(r2 / n)};
}

using Cell = std::variant<double, std::string>;

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

/// Writes `<prefix><suffix>.csv` files headed by the manifest path.
class Output {
 public:
  explicit Output(std::string prefix) : prefix_(std::move(prefix)) {
    const auto parent = std::filesystem::path(prefix_).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
  }
  std::string manifest_path() const { return prefix_ + ".manifest.json"; }

  void csv(const std::string& suffix, const std::string& description, const std::vector<std::string>& columns,
           const std::vector<std::vector<Cell>>& rows, json parameters = json::object()) {
    const std::string path = prefix_ + suffix + ".csv";
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << "# manifest: " << manifest_path() << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ",";
        if (std::holds_alternative<double>(row[i]))
          out << format_number(std::get<double>(row[i]));
        else
          out << std::get<std::string>(row[i]);
      }
      out << "\n";
    }
    files.push_back({{"path", path}, {"description", description}, {"columns", columns}, {"parameters", parameters}});
  }

  json files = json::array();

 private:
  std::string prefix_;
};

struct RunResult {
  json manifest;
  std::vector<std::string> files;
};

namespace detail {

inline constexpr std::size_t max_listed_warnings = 50;

/// Distinct warnings in first-seen order, capped; the total count is kept.
inline json diagnostics_json(const Diagnostics& d) {
  json j;
  std::vector<std::string> distinct;
  std::set<std::string> seen;
  for (const auto& w : d.warnings)
    if (seen.insert(w).second && distinct.size() < max_listed_warnings) distinct.push_back(w);
  j["warnings"] = distinct;
  j["warning_count"] = d.warnings.size();
  j["values"] = json::object();
  for (const auto& [k, v] : d.values) j["values"][k] = v;
  return j;
}

inline std::vector<std::vector<Cell>> series_rows(const std::vector<double>& t, const std::vector<double>& v,
                                                  const std::vector<double>* err = nullptr) {
  std::vector<std::vector<Cell>> rows;
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::vector<Cell> r{t[i], v[i]};
    if (err) r.push_back((*err)[i]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace detail

/// Static checks and forecasts; never runs dynamics.
inline json validate_report(const json& raw) {
  json rep;
  auto [c, problems] = parse_config(raw);
  rep["problems"] = json::array();
  for (const auto& p : problems) rep["problems"].push_back({{"key", p.key}, {"message", p.message}});
  rep["valid"] = problems.empty();
  if (!problems.empty()) return rep;
  try {
    std::vector<rotor::StateSpec> specs{c.state};
    std::vector<double> sks{c.sigma_k};
    if (c.scenario == Scenario::sweep_sigma) {
      specs.clear();
      for (double sb : c.sweep_sigma_beta) {
        auto s = c.state;
        s.mode = rotor::StateMode::gaussian_beta;
        s.sigma_beta = sb;
        specs.push_back(s);
      }
      sks = c.sweep_sigma_k;
    }
    int jmax = 0, kmax = 0;
    for (const auto& s : specs)
      for (double sk : sks) {
        jmax = std::max(jmax, resolved_jmax(c, s, sk));
        kmax = std::max(kmax, kmax_for(sk));
      }
    const std::vector<double>& phis = c.scenario == Scenario::sweep_phi ? c.sweep_phi : c.pulse.phis;
    const int working = jmax + pulse_headroom(c, phis);
    const int components = 2 * kmax + 1;
    const auto times = make_times(c);
    const double order = 2.0 * working + 16 + pulse::semiclassical_bandwidth(M_PI);
    const double table_bytes = order * (working + 1) * 8.0;
    const double state_bytes = components * (working + 1) * 16.0 * 3;
    const double mem = state_bytes + std::min<double>(engine_cache_bytes, table_bytes * components) +
                       (c.scenario == Scenario::decohere ? c.n * times.size() * 8.0 : 0.0);
    double ops = components * order * (working + 1) * 6.0 + times.size() * components * (working + 1) * 12.0;
    if (c.scenario == Scenario::decohere) ops *= c.n * std::max<std::size_t>(1, c.pulse.phis.size());
    if (c.scenario == Scenario::sweep_phi) ops *= c.sweep_phi.size();
    if (c.scenario == Scenario::sweep_asymmetry) ops *= c.sweep_b.size() * 40.0;
    if (c.scenario == Scenario::sweep_sigma) ops *= specs.size() * sks.size();
    rep["estimates"] = {{"jmax", jmax},
                        {"working_jmax", working},
                        {"kmax", kmax},
                        {"components", components},
                        {"time_samples", times.size()},
                        {"memory_bytes", mem},
                        {"time_seconds_rough", ops / 2e8}};
    if (c.jmax > 0 && c.jmax < rotor::mixture_jmax(c.state, c.sigma_k))
      rep["warnings"].push_back("state.jmax below the truncation rule (" +
                                std::to_string(rotor::mixture_jmax(c.state, c.sigma_k)) + ")");
  } catch (const Error& e) {
    rep["valid"] = false;
    rep["problems"].push_back({{"key", "state"}, {"message", e.what()}});
  }
  return rep;
}

/// Executes a resolved config; `threads` > 0 overrides ensemble.threads.
inline RunResult run(const ExperimentConfig& c, int threads = 0) {
  const auto t0 = std::chrono::steady_clock::now();
  const int nthreads = parallel::resolve_threads(threads > 0 ? threads : c.threads);
  Output out(c.prefix);
  Diagnostics diag;
  json results = json::object();
  json derived = json::object();

  const auto model = build_model(c.rotor);
  derived["mass_amu"] = model.mass_amu();
  derived["T_rev_s"] = model.T_rev;
  derived["b_asym"] = model.b_asym;
  derived["I_over_Ic"] = model.ratio();
  derived["I_kg_m2"] = model.I();
  derived["phis"] = c.pulse.phis;

  auto make_state = [&](const rotor::StateSpec& spec, double sigma_k, const std::vector<double>& phis) {
    derived["state_jmax"] = resolved_jmax(c, spec, sigma_k);
    auto st = working_state(c, spec, sigma_k, phis);
    diag.merge(st.diagnostics);
    return st;
  };
  auto phi_params = [&](std::size_t i) { return json{{"phi", c.pulse.phis[i]}}; };

  switch (c.scenario) {
    case Scenario::params: {
      std::vector<std::vector<Cell>> rows{{std::string("mass_amu"), model.mass_amu()},
                                          {std::string("T_rev_s"), model.T_rev},
                                          {std::string("b_asym"), model.b_asym},
                                          {std::string("I_a_kg_m2"), model.I_a},
                                          {std::string("I_b_kg_m2"), model.I_b},
                                          {std::string("I_c_kg_m2"), model.I_c}};
      const LaserConfig lc = c.pulse.laser.value_or(LaserConfig{});
      const double phi = pulse::phase_from_laser(lc.power, lc.waist, lc.tau, lc.delta_alpha);
      const double gamma = c.gamma_in_hz ? decoherence::gamma_from_hz(c.gamma, model.T_rev)
                                         : decoherence::gamma_from_hz(decoherence::preset_collision_rate_hz, model.T_rev);
      rows.push_back({std::string("laser_phi"), phi});
      rows.push_back({std::string("gamma_dimensionless"), gamma});
      results = {{"mass_amu", model.mass_amu()}, {"T_rev_s", model.T_rev}, {"b_asym", model.b_asym},
                 {"laser_phi", phi}, {"gamma_dimensionless", gamma}};
      json variants = json::array();
      for (const auto& d : c.variants_nm) {
        RotorConfig rc = c.rotor;
        rc.direct = false;
        rc.diameters_nm = d;
        const auto vm = build_model(rc);
        variants.push_back({{"diameters_nm", d}, {"mass_amu", vm.mass_amu()}, {"T_rev_s", vm.T_rev},
                            {"b_asym", vm.b_asym}, {"abs_b", std::abs(vm.b_asym)}});
        const std::string tag = format_number(d[0]) + "x" + format_number(d[1]) + "x" + format_number(d[2]);
        rows.push_back({"variant_" + tag + "_mass_amu", vm.mass_amu()});
        rows.push_back({"variant_" + tag + "_T_rev_s", vm.T_rev});
        rows.push_back({"variant_" + tag + "_abs_b", std::abs(vm.b_asym)});
      }
      results["variants"] = variants;
      out.csv("", "physical parameters", {"quantity", "value"}, rows);
      break;
    }

    case Scenario::evolve: {
      const auto st = make_state(c.state, c.sigma_k, c.pulse.phis);
      const auto sp = build_spectrum(model, st.jmax, kmax_for(c.sigma_k), c.spectrum, c.assignment);
      derived["jmax"] = st.jmax;
      derived["spectrum"] = sp.used;
      if (!sp.note.empty()) diag.warn(sp.note);
      const pulse::PulseEngine engine(st.jmax, engine_cache_bytes);
      const observables::AlignmentOperator op(st.jmax);
      const auto times = make_times(c);
      results["initial_alignment"] = op(st);
      results["curves"] = json::array();
      for (std::size_t i = 0; i < c.pulse.phis.size(); ++i) {
        const auto ps = pulse_spec(c, c.pulse.phis[i]);
        const auto ts = schedule::evolve_alignment(st, sp.model, ps, times, engine, op, diag);
        out.csv(".phi" + std::to_string(i), "alignment time series", {"t_over_Trev", "value"},
                detail::series_rows(ts.times, ts.values), phi_params(i));
        const auto rv = revival(after_pulses(st, sp.model, ps, engine), sp.model, op, c.revival_halfwidth);
        results["curves"].push_back({{"phi", c.pulse.phis[i]}, {"revival_t", rv.t}, {"revival_alignment", rv.value}});
      }
      break;
    }

    case Scenario::sweep_phi: {
      const auto st = make_state(c.state, c.sigma_k, c.sweep_phi);
      const auto sp = build_spectrum(model, st.jmax, kmax_for(c.sigma_k), c.spectrum, c.assignment);
      derived["jmax"] = st.jmax;
      derived["spectrum"] = sp.used;
      if (!sp.note.empty()) diag.warn(sp.note);
      const pulse::PulseEngine engine(st.jmax, engine_cache_bytes);
      const observables::AlignmentOperator op(st.jmax);
      std::vector<double> values(c.sweep_phi.size()), tpk(c.sweep_phi.size());
      std::vector<Diagnostics> dd(c.sweep_phi.size());
      parallel::parallel_for(c.sweep_phi.size(), nthreads, [&](std::size_t i) {
        auto post = after_pulses(st, sp.model, pulse_spec(c, c.sweep_phi[i]), engine);
        const auto rv = revival(post, sp.model, op, c.revival_halfwidth);
        values[i] = rv.value;
        tpk[i] = rv.t;
        dd[i] = post.diagnostics;
      });
      for (const auto& d : dd) diag.merge(d);
      std::vector<std::vector<Cell>> rows;
      for (std::size_t i = 0; i < values.size(); ++i) rows.push_back({c.sweep_phi[i], values[i]});
      out.csv("", "alignment at revival vs phi", {"phi", "value"}, rows);
      const auto fit = fit_cos2(c.sweep_phi, values);
      results = {{"fit", {{"A", fit[0]}, {"B", fit[1]}, {"rms", fit[2]}}}, {"revival_t", tpk}};
      break;
    }

    case Scenario::sweep_sigma: {
      struct Point {
        std::size_t ib, ik;
      };
      std::vector<Point> pts;
      for (std::size_t ib = 0; ib < c.sweep_sigma_beta.size(); ++ib)
        for (std::size_t ik = 0; ik < c.sweep_sigma_k.size(); ++ik) pts.push_back({ib, ik});
      const std::size_t nphi = c.pulse.phis.size();
      std::vector<double> values(pts.size() * nphi);
      std::vector<int> jm(pts.size());
      std::vector<Diagnostics> dd(pts.size());
      parallel::parallel_for(pts.size(), nthreads, [&](std::size_t p) {
        auto spec = c.state;
        spec.mode = rotor::StateMode::gaussian_beta;
        spec.sigma_beta = c.sweep_sigma_beta[pts[p].ib];
        const double sk = c.sweep_sigma_k[pts[p].ik];
        const auto st = working_state(c, spec, sk, c.pulse.phis);
        const int jmax = st.jmax;
        dd[p].merge(st.diagnostics);
        jm[p] = jmax;
        const auto sp = build_spectrum(model, jmax, kmax_for(sk), c.spectrum, c.assignment);
        if (!sp.note.empty()) dd[p].warn(sp.note);
        const pulse::PulseEngine engine(jmax, engine_cache_bytes);
        const observables::AlignmentOperator op(jmax);
        for (std::size_t f = 0; f < nphi; ++f) {
          auto post = after_pulses(st, sp.model, pulse_spec(c, c.pulse.phis[f]), engine);
          values[p * nphi + f] = revival(post, sp.model, op, c.revival_halfwidth).value;
          dd[p].merge(post.diagnostics);
        }
      });
      for (const auto& d : dd) diag.merge(d);
      results["working_jmax"] = jm;
      for (std::size_t ib = 0; ib < c.sweep_sigma_beta.size(); ++ib)
        for (std::size_t f = 0; f < nphi; ++f) {
          std::vector<std::vector<Cell>> rows;
          for (std::size_t p = 0; p < pts.size(); ++p)
            if (pts[p].ib == ib) rows.push_back({c.sweep_sigma_k[pts[p].ik], values[p * nphi + f]});
          out.csv(".sigma_beta" + std::to_string(ib) + ".phi" + std::to_string(f), "alignment at revival vs sigma_k",
                  {"sigma_k", "value"}, rows, {{"sigma_beta", c.sweep_sigma_beta[ib]}, {"phi", c.pulse.phis[f]}});
        }
      break;
    }

    case Scenario::sweep_asymmetry: {
      const auto st = make_state(c.state, c.sigma_k, c.pulse.phis);
      derived["jmax"] = st.jmax;
      const pulse::PulseEngine engine(st.jmax, engine_cache_bytes);
      const observables::AlignmentOperator op(st.jmax);
      const std::size_t nb = c.sweep_b.size(), nphi = c.pulse.phis.size();
      std::vector<double> values(nb * nphi), tpk(nb);
      std::vector<std::string> used(nb), notes(nb);
      std::vector<Diagnostics> dd(nb);
      parallel::parallel_for(nb, nthreads, [&](std::size_t i) {
        const auto mb = rotor::inertia_direct(model.I(), model.ratio(), c.sweep_b[i]);
        const auto sp = build_spectrum(mb, st.jmax, kmax_for(c.sigma_k), c.spectrum, c.assignment);
        used[i] = sp.used;
        notes[i] = sp.note;
        std::vector<rotor::RotorState> pp;
        for (double phi : c.pulse.phis) pp.push_back(after_pulses(st, sp.model, pulse_spec(c, phi), engine));
        const auto base = revival(pp[0], sp.model, op, c.revival_halfwidth);
        tpk[i] = base.t;
        for (std::size_t f = 0; f < nphi; ++f)
          values[i * nphi + f] = observables::alignment_after(pp[f], base.t - pp[f].time, sp.model, op);
        for (const auto& s : pp) dd[i].merge(s.diagnostics);
      });
      for (const auto& d : dd) diag.merge(d);
      for (const auto& n : notes)
        if (!n.empty()) diag.warn(n);
      for (std::size_t f = 0; f < nphi; ++f) {
        std::vector<std::vector<Cell>> rows;
        for (std::size_t i = 0; i < nb; ++i) rows.push_back({c.sweep_b[i], values[i * nphi + f]});
        out.csv(".phi" + std::to_string(f), "alignment at the revival peak vs b", {"b", "value"}, rows, phi_params(f));
      }
      std::vector<std::vector<Cell>> rows;
      for (std::size_t i = 0; i < nb; ++i) rows.push_back({c.sweep_b[i], tpk[i]});
      out.csv(".tpeak", "revival peak time vs b (first phi)", {"b", "value"}, rows);
      results = {{"b", c.sweep_b}, {"t_peak", tpk}, {"spectrum", used}};
      break;
    }

    case Scenario::decohere: {
      const auto st = make_state(c.state, c.sigma_k, c.pulse.phis);
      const auto sp = build_spectrum(model, st.jmax, kmax_for(c.sigma_k), c.spectrum, c.assignment);
      derived["jmax"] = st.jmax;
      derived["spectrum"] = sp.used;
      if (!sp.note.empty()) diag.warn(sp.note);
      const double gamma = c.gamma_in_hz ? decoherence::gamma_from_hz(c.gamma, model.T_rev) : c.gamma;
      derived["gamma_dimensionless"] = gamma;
      const decoherence::Workspace ws(st.jmax, sp.model);
      const auto times = make_times(c);
      const auto it1 = std::find(times.begin(), times.end(), 1.0);
      std::vector<std::vector<Cell>> rev, rev_vac;
      results["curves"] = json::array();
      for (std::size_t i = 0; i < c.pulse.phis.size(); ++i) {
        decoherence::TrajectoryConfig tc;
        tc.gamma = gamma;
        tc.t_end = times.back();
        tc.observation_times = times;
        tc.seed = c.seed;
        tc.pulse_schedule = pulse_spec(c, c.pulse.phis[i]);
        tc.basis = c.basis;
        const auto e = decoherence::run_ensemble(st, tc, c.n, ws, nthreads);
        diag.merge(e.diagnostics);
        out.csv(".phi" + std::to_string(i), "ensemble mean alignment", {"t_over_Trev", "value", "stderr"},
                detail::series_rows(e.times, e.mean_alignment, &e.standard_error), phi_params(i));
        const auto vac = schedule::evolve_alignment(st, sp.model, tc.pulse_schedule, times, ws.engine, ws.align, diag);
        out.csv(".vacuum.phi" + std::to_string(i), "alignment without collisions", {"t_over_Trev", "value"},
                detail::series_rows(times, vac.values), phi_params(i));
        const auto& comp = std::max_element(st.components.begin(), st.components.end(), [](const auto& a, const auto& b) {
                             return a.second.weight < b.second.weight;
                           })->second;
        for (int s = 0; s < c.samples; ++s) {
          const auto tr = decoherence::run_trajectory(comp, tc, ws, static_cast<std::uint64_t>(s));
          json par = phi_params(i);
          par["trajectory_index"] = s;
          par["k0"] = comp.k0;
          par["jump_times"] = tr.jump_times;
          out.csv(".phi" + std::to_string(i) + ".trajectory" + std::to_string(s), "single quantum-jump trajectory",
                  {"t_over_Trev", "value"}, detail::series_rows(times, tr.alignment.values), par);
        }
        json hist = json::object();
        for (const auto& [k, v] : e.jump_count_histogram) hist[std::to_string(k)] = v;
        json curve = {{"phi", c.pulse.phis[i]}, {"jump_count_histogram", hist}};
        if (it1 != times.end()) {
          const auto k = static_cast<std::size_t>(it1 - times.begin());
          curve["revival_alignment"] = e.mean_alignment[k];
          curve["revival_stderr"] = e.standard_error[k];
          curve["vacuum_revival_alignment"] = vac.values[k];
          curve["reduction"] = vac.values[k] - e.mean_alignment[k];
          rev.push_back({c.pulse.phis[i], e.mean_alignment[k], e.standard_error[k]});
          rev_vac.push_back({c.pulse.phis[i], vac.values[k]});
        }
        results["curves"].push_back(curve);
      }
      if (!rev.empty() && c.pulse.phis.size() > 1) {
        out.csv(".revival", "ensemble alignment at t = T_rev vs phi", {"phi", "value", "stderr"}, rev);
        out.csv(".revival_vacuum", "alignment at t = T_rev vs phi without collisions", {"phi", "value"}, rev_vac);
      }
      break;
    }

    case Scenario::fractional: {
      const auto st = make_state(c.state, c.sigma_k, c.pulse.phis);
      const auto sp = build_spectrum(model, st.jmax, kmax_for(c.sigma_k), c.spectrum, c.assignment);
      derived["jmax"] = st.jmax;
      derived["spectrum"] = sp.used;
      const observables::AlignmentOperator op(st.jmax);
      const int nbeta = std::max(c.beta_points, 2 * st.jmax + 16);
      angular::AngularGrid g;
      g.order = nbeta;
      for (int i = 0; i < nbeta; ++i) {
        const double b = pi * i / (nbeta - 1);
        g.nodes.push_back(b);
        g.cosines.push_back(std::cos(b));
        g.weights.push_back(0.0);
      }
      results["fractions"] = json::array();
      for (std::size_t i = 0; i < c.fractions.size(); ++i) {
        const double f = c.fractions[i];
        const auto s = rotor::free_propagate(st, f, sp.model);
        const auto prob = observables::beta_distribution(s, g);
        out.csv(".t" + std::to_string(i), "prob(beta) = sin(beta) |psi|^2", {"beta", "value"},
                detail::series_rows(g.nodes, prob), {{"t_over_Trev", f}});
        json entry = {{"t_over_Trev", f}, {"alignment", op(s)}, {"windows", json::array()}};
        const double inv = 1.0 / f;
        const int q = static_cast<int>(std::lround(inv));
        if (q >= 2 && std::abs(inv - q) < 1e-12) {
          for (const auto& [beta, w] : eightstate::resummed_deltas(q))
            entry["windows"].push_back({{"center", beta}, {"halfwidth", pi / (2.0 * q)},
                                        {"probability", observables::window_probability(s, beta, pi / (2.0 * q))}});
        }
        results["fractions"].push_back(entry);
      }
      break;
    }
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = {{"version", nanorotor::version},
                   {"scenario", to_string(c.scenario)},
                   {"config", to_json(c)},
                   {"seed", c.seed},
                   {"threads", nthreads},
                   {"derived", derived},
                   {"results", results},
                   {"files", out.files},
                   {"diagnostics", detail::diagnostics_json(diag)},
                   {"wall_time_s", wall}};
  std::ofstream mf(out.manifest_path());
  if (!mf) throw Error("cannot write " + out.manifest_path());
  mf << manifest.dump(2) << "\n";
  RunResult r;
  r.manifest = manifest;
  for (const auto& f : out.files) r.files.push_back(f["path"].get<std::string>());
  r.files.push_back(out.manifest_path());
  return r;
}

}  // namespace nanorotor::cli
