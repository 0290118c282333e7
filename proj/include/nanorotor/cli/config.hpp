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

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nanorotor/core.hpp"
#include "nanorotor/decoherence.hpp"
#include "nanorotor/pulse.hpp"
#include "nanorotor/rotor.hpp"

namespace nanorotor::cli {

using json = nlohmann::json;

enum class Scenario { evolve, sweep_phi, sweep_sigma, sweep_asymmetry, decohere, fractional, params };

inline const std::vector<std::pair<std::string, Scenario>>& scenario_names() {
  static const std::vector<std::pair<std::string, Scenario>> names = {
      {"evolve", Scenario::evolve},         {"sweep_phi", Scenario::sweep_phi},
      {"sweep_sigma", Scenario::sweep_sigma}, {"sweep_asymmetry", Scenario::sweep_asymmetry},
      {"decohere", Scenario::decohere},     {"fractional", Scenario::fractional},
      {"params", Scenario::params}};
  return names;
}

inline std::string to_string(Scenario s) {
  for (const auto& [n, v] : scenario_names())
    if (v == s) return n;
  return "?";
}

inline std::optional<Scenario> parse_scenario(const std::string& name) {
  for (const auto& [n, v] : scenario_names())
    if (n == name) return v;
  return std::nullopt;
}

struct RotorConfig {
  bool direct = false;
  std::array<double, 3> diameters_nm{5.5, 5.5, 50.0};
  double density = 2329.0;  // kg/m^3
  double I = 0.0;           // kg m^2
  double ratio = 0.0;       // I / I_c
  double b = 0.0;           // |b|
};

struct LaserConfig {
  double power = pulse::presets::power;
  double waist = pulse::presets::waist;
  double tau = pulse::presets::tau;
  double delta_alpha = pulse::presets::silicon_delta_alpha;
};

struct PulseConfig {
  std::vector<double> phis{0.0};
  std::optional<LaserConfig> laser;
  std::vector<pulse::PulseEvent> schedule;
  double time = 0.125;
  pulse::PulseMethod method = pulse::PulseMethod::exact_grid;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::evolve;
  RotorConfig rotor;
  std::string spectrum = "auto";  // auto | symmetric | asymmetric | perturbative
  rotor::AssignmentPolicy assignment = rotor::AssignmentPolicy::strict;
  rotor::StateSpec state;
  double sigma_k = 0.0;
  int jmax = 0;  // 0: truncation rule
  PulseConfig pulse;
  bool gamma_in_hz = false;
  double gamma = 0.0;
  std::vector<double> times_list;
  double t_end = 1.05;
  int points = 512;
  int refine = 8;
  double refine_halfwidth = 0.02;
  int n = 200;
  std::uint64_t seed = 1;
  int threads = 0;
  int samples = 0;
  decoherence::JumpBasis basis = decoherence::JumpBasis::spherical;
  std::vector<double> sweep_phi;
  std::vector<double> sweep_sigma_beta;
  std::vector<double> sweep_sigma_k;
  std::vector<double> sweep_b;
  std::vector<double> fractions{0.125, 0.25, 0.5};
  int beta_points = 721;
  double revival_halfwidth = 0.01;
  std::vector<std::array<double, 3>> variants_nm;
  std::string prefix = "nanorotor_out";
  std::string format = "csv";
};

struct Problem {
  std::string key;
  std::string message;
};

namespace detail {

/// Collects every problem instead of stopping at the first.
class Reader {
 public:
  std::vector<Problem> problems;

  void fail(const std::string& key, const std::string& msg) { problems.push_back({key, msg}); }

  void allow_keys(const json& obj, const std::string& path, std::set<std::string> keys) {
    if (!obj.is_object()) {
      fail(path, "must be an object");
      return;
    }
    for (const auto& [k, v] : obj.items())
      if (!keys.count(k)) fail(join(path, k), "unknown key");
  }

  static std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

  bool has(const json& obj, const std::string& k) const { return obj.is_object() && obj.contains(k) && !obj[k].is_null(); }

  double number(const json& obj, const std::string& path, const std::string& k, double def) {
    if (!has(obj, k)) return def;
    if (!obj[k].is_number()) {
      fail(join(path, k), "must be a number");
      return def;
    }
    const double v = obj[k].get<double>();
    if (!std::isfinite(v)) fail(join(path, k), "must be finite");
    return v;
  }

  double positive(const json& obj, const std::string& path, const std::string& k, double def) {
    const double v = number(obj, path, k, def);
    if (has(obj, k) && !(v > 0.0)) fail(join(path, k), "must be positive");
    return v;
  }

  double non_negative(const json& obj, const std::string& path, const std::string& k, double def) {
    const double v = number(obj, path, k, def);
    if (has(obj, k) && !(v >= 0.0)) fail(join(path, k), "must be >= 0");
    return v;
  }

  long long integer(const json& obj, const std::string& path, const std::string& k, long long def, long long lo,
                    long long hi) {
    if (!has(obj, k)) return def;
    if (!obj[k].is_number_integer()) {
      fail(join(path, k), "must be an integer");
      return def;
    }
    const long long v = obj[k].get<long long>();
    if (v < lo || v > hi) fail(join(path, k), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
  }

  std::string text(const json& obj, const std::string& path, const std::string& k, const std::string& def,
                    const std::vector<std::string>& allowed) {
    if (!has(obj, k)) return def;
    if (!obj[k].is_string()) {
      fail(join(path, k), "must be a string");
      return def;
    }
    const auto v = obj[k].get<std::string>();
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(join(path, k), "must be one of: " + list);
    }
    return v;
  }

  /// A list, {start, stop, count} or {log10_start, log10_stop, count, include}.
  std::vector<double> grid(const json& obj, const std::string& path, const std::string& k,
                           const std::vector<double>& def) {
    if (!has(obj, k)) return def;
    const auto& g = obj[k];
    const std::string p = join(path, k);
    std::vector<double> out;
    if (g.is_number()) return {g.get<double>()};
    if (g.is_array()) {
      for (const auto& x : g) {
        if (!x.is_number()) {
          fail(p, "list entries must be numbers");
          return def;
        }
        out.push_back(x.get<double>());
      }
      return out;
    }
    if (!g.is_object()) {
      fail(p, "must be a number, list or range object");
      return def;
    }
    allow_keys(g, p, {"start", "stop", "count", "log10_start", "log10_stop", "include"});
    const long long n = integer(g, p, "count", 0, 1, 100000);
    if (!has(g, "count")) fail(join(p, "count"), "required");
    const bool lin = has(g, "start") || has(g, "stop"), lg = has(g, "log10_start") || has(g, "log10_stop");
    if (lin == lg) {
      fail(p, "give either start/stop or log10_start/log10_stop");
      return def;
    }
    const double a = number(g, p, lin ? "start" : "log10_start", 0.0);
    const double b = number(g, p, lin ? "stop" : "log10_stop", 0.0);
    for (long long i = 0; i < n; ++i) {
      const double u = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
      out.push_back(lin ? u : std::pow(10.0, u));
    }
    if (has(g, "include")) {
      for (double x : grid(g, p, "include", {})) out.push_back(x);
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
    }
    return out;
  }
};

}  // namespace detail

/// Parses and validates a config; every problem is reported with its key path.
inline std::pair<ExperimentConfig, std::vector<Problem>> parse_config(const json& j) {
  detail::Reader r;
  ExperimentConfig c;
  if (!j.is_object()) {
    r.fail("", "config must be a JSON object");
    return {c, r.problems};
  }
  r.allow_keys(j, "", {"scenario", "description", "rotor", "spectrum", "state", "pulse", "gamma", "times",
                       "ensemble", "sweep", "params", "output"});
  if (!r.has(j, "scenario")) {
    r.fail("scenario", "required");
  } else if (!j["scenario"].is_string() || !parse_scenario(j["scenario"].get<std::string>())) {
    r.fail("scenario", "unknown scenario");
  } else {
    c.scenario = *parse_scenario(j["scenario"].get<std::string>());
  }

  // rotor
  if (!r.has(j, "rotor")) {
    r.fail("rotor", "required: give rotor.geometry or rotor.direct");
  } else {
    const auto& ro = j["rotor"];
    r.allow_keys(ro, "rotor", {"geometry", "direct"});
    const bool geo = r.has(ro, "geometry"), dir = r.has(ro, "direct");
    if (geo == dir) r.fail("rotor", "give exactly one of rotor.geometry, rotor.direct");
    if (geo) {
      const auto& g = ro["geometry"];
      r.allow_keys(g, "rotor.geometry", {"diameters_nm", "density"});
      if (!r.has(g, "diameters_nm") || !g["diameters_nm"].is_array() || g["diameters_nm"].size() != 3) {
        r.fail("rotor.geometry.diameters_nm", "required: three diameters in nm");
      } else {
        for (int i = 0; i < 3; ++i) {
          const auto& d = g["diameters_nm"][i];
          if (!d.is_number() || !(d.get<double>() > 0.0))
            r.fail("rotor.geometry.diameters_nm", "diameters must be positive numbers");
          else
            c.rotor.diameters_nm[i] = d.get<double>();
        }
      }
      c.rotor.density = r.positive(g, "rotor.geometry", "density", c.rotor.density);
    }
    if (dir) {
      const auto& d = ro["direct"];
      c.rotor.direct = true;
      r.allow_keys(d, "rotor.direct", {"I", "ratio", "b"});
      for (const char* k : {"I", "ratio"})
        if (!r.has(d, k)) r.fail(std::string("rotor.direct.") + k, "required");
      c.rotor.I = r.positive(d, "rotor.direct", "I", 0.0);
      c.rotor.ratio = r.positive(d, "rotor.direct", "ratio", 0.0);
      c.rotor.b = r.non_negative(d, "rotor.direct", "b", 0.0);
    }
  }

  // spectrum
  if (r.has(j, "spectrum")) {
    const auto& s = j["spectrum"];
    r.allow_keys(s, "spectrum", {"method", "assignment"});
    c.spectrum = r.text(s, "spectrum", "method", "auto", {"auto", "symmetric", "asymmetric", "perturbative"});
    c.assignment = r.text(s, "spectrum", "assignment", "strict", {"strict", "lenient"}) == "lenient"
                       ? rotor::AssignmentPolicy::lenient
                       : rotor::AssignmentPolicy::strict;
  }

  // state
  if (r.has(j, "state")) {
    const auto& s = j["state"];
    r.allow_keys(s, "state", {"mode", "sigma_j2", "sigma_beta", "sigma_k", "jmax"});
    const auto mode = r.text(s, "state", "mode", "gaussian_j", {"gaussian_j", "gaussian_beta"});
    c.state.mode = mode == "gaussian_beta" ? rotor::StateMode::gaussian_beta : rotor::StateMode::gaussian_j;
    if (r.has(s, "sigma_j2") && !(r.number(s, "state", "sigma_j2", 0.0) > 0.0))
      r.fail("state.sigma_j2", "must be positive (degenerate Gaussian)");
    if (r.has(s, "sigma_beta") && !(r.number(s, "state", "sigma_beta", 0.0) > 0.0))
      r.fail("state.sigma_beta", "must be positive (degenerate Gaussian)");
    c.state.sigma_j2 = r.number(s, "state", "sigma_j2", c.state.sigma_j2);
    c.state.sigma_beta = r.number(s, "state", "sigma_beta", c.state.sigma_beta);
    c.sigma_k = r.non_negative(s, "state", "sigma_k", 0.0);
    c.jmax = static_cast<int>(r.integer(s, "state", "jmax", 0, 0, 20000));
  }

  // pulse
  if (r.has(j, "pulse")) {
    const auto& p = j["pulse"];
    r.allow_keys(p, "pulse", {"phi", "laser", "schedule", "time", "method"});
    const int given = int(r.has(p, "phi")) + int(r.has(p, "laser")) + int(r.has(p, "schedule"));
    if (c.scenario == Scenario::sweep_phi) {
      if (given) r.fail("pulse", "sweep_phi takes its phases from sweep.phi");
    } else if (given != 1) {
      r.fail("pulse", "give exactly one of pulse.phi, pulse.laser, pulse.schedule");
    }
    c.pulse.phis = r.grid(p, "pulse", "phi", {0.0});
    if (r.has(p, "laser")) {
      const auto& l = p["laser"];
      r.allow_keys(l, "pulse.laser", {"power", "waist", "tau", "delta_alpha"});
      LaserConfig lc;
      lc.power = r.positive(l, "pulse.laser", "power", lc.power);
      lc.waist = r.positive(l, "pulse.laser", "waist", lc.waist);
      lc.tau = r.positive(l, "pulse.laser", "tau", lc.tau);
      lc.delta_alpha = r.positive(l, "pulse.laser", "delta_alpha", lc.delta_alpha);
      c.pulse.laser = lc;
      if (r.problems.empty()) c.pulse.phis = {pulse::phase_from_laser(lc.power, lc.waist, lc.tau, lc.delta_alpha)};
    }
    if (r.has(p, "schedule")) {
      if (!p["schedule"].is_array() || p["schedule"].empty()) {
        r.fail("pulse.schedule", "must be a non-empty list of {t, phi}");
      } else {
        for (const auto& e : p["schedule"]) {
          r.allow_keys(e, "pulse.schedule", {"t", "phi"});
          pulse::PulseEvent ev;
          ev.t = r.number(e, "pulse.schedule", "t", ev.t);
          ev.phi = r.number(e, "pulse.schedule", "phi", 0.0);
          if (!(ev.t >= 0.0 && ev.t <= 8.0)) r.fail("pulse.schedule.t", "must lie in [0, 8]");
          c.pulse.schedule.push_back(ev);
        }
        std::stable_sort(c.pulse.schedule.begin(), c.pulse.schedule.end(),
                         [](const auto& a, const auto& b) { return a.t < b.t; });
      }
    }
    c.pulse.time = r.number(p, "pulse", "time", c.pulse.time);
    if (!(c.pulse.time >= 0.0 && c.pulse.time <= 8.0)) r.fail("pulse.time", "must lie in [0, 8]");
    const auto m = r.text(p, "pulse", "method", "exact_grid", {"exact_grid", "exact_dense", "semiclassical"});
    c.pulse.method = m == "semiclassical" ? pulse::PulseMethod::semiclassical
                     : m == "exact_dense" ? pulse::PulseMethod::exact_dense
                                          : pulse::PulseMethod::exact_grid;
  } else if (c.scenario == Scenario::evolve || c.scenario == Scenario::decohere ||
             c.scenario == Scenario::sweep_sigma || c.scenario == Scenario::sweep_asymmetry) {
    r.fail("pulse", "required: give exactly one of pulse.phi, pulse.laser, pulse.schedule");
  }
  for (double phi : c.pulse.phis)
    if (!std::isfinite(phi)) r.fail("pulse.phi", "must be finite");

  // gamma
  if (r.has(j, "gamma")) {
    const auto& g = j["gamma"];
    r.allow_keys(g, "gamma", {"hz", "dimensionless"});
    const bool hz = r.has(g, "hz"), dl = r.has(g, "dimensionless");
    if (hz == dl) r.fail("gamma", "give exactly one of gamma.hz, gamma.dimensionless");
    c.gamma_in_hz = hz;
    c.gamma = r.non_negative(g, "gamma", hz ? "hz" : "dimensionless", 0.0);
  }

  // times
  if (r.has(j, "times")) {
    const auto& t = j["times"];
    r.allow_keys(t, "times", {"list", "t_end", "points", "refine", "refine_halfwidth"});
    if (r.has(t, "list")) {
      c.times_list = r.grid(t, "times", "list", {});
      if (c.times_list.empty()) r.fail("times.list", "must not be empty");
      if (!std::is_sorted(c.times_list.begin(), c.times_list.end())) r.fail("times.list", "must be sorted");
      for (double x : c.times_list)
        if (!(x >= 0.0 && x <= 8.0)) r.fail("times.list", "times must lie in [0, 8]");
    }
    c.t_end = r.positive(t, "times", "t_end", c.t_end);
    if (c.t_end > 8.0) r.fail("times.t_end", "must be <= 8");
    c.points = static_cast<int>(r.integer(t, "times", "points", c.points, 2, 1000000));
    c.refine = static_cast<int>(r.integer(t, "times", "refine", c.refine, 1, 1000));
    c.refine_halfwidth = r.non_negative(t, "times", "refine_halfwidth", c.refine_halfwidth);
  }

  // ensemble
  if (r.has(j, "ensemble")) {
    const auto& e = j["ensemble"];
    r.allow_keys(e, "ensemble", {"n", "seed", "threads", "samples", "jumps"});
    c.n = static_cast<int>(r.integer(e, "ensemble", "n", c.n, 1, 100000000));
    if (r.has(e, "seed")) {
      if (!e["seed"].is_number_unsigned()) r.fail("ensemble.seed", "must be a non-negative 64-bit integer");
      else c.seed = e["seed"].get<std::uint64_t>();
    }
    c.threads = static_cast<int>(r.integer(e, "ensemble", "threads", 0, 0, 4096));
    c.samples = static_cast<int>(r.integer(e, "ensemble", "samples", 0, 0, 1000));
    if (c.samples > c.n) r.fail("ensemble.samples", "must not exceed ensemble.n");
    c.basis = r.text(e, "ensemble", "jumps", "spherical", {"spherical", "cartesian"}) == "cartesian"
                  ? decoherence::JumpBasis::cartesian
                  : decoherence::JumpBasis::spherical;
  }

  // sweep
  if (r.has(j, "sweep")) {
    const auto& s = j["sweep"];
    r.allow_keys(s, "sweep", {"phi", "sigma_beta", "sigma_k", "b", "fractions", "beta_points", "revival_halfwidth"});
    c.sweep_phi = r.grid(s, "sweep", "phi", {});
    c.sweep_sigma_beta = r.grid(s, "sweep", "sigma_beta", {});
    c.sweep_sigma_k = r.grid(s, "sweep", "sigma_k", {});
    c.sweep_b = r.grid(s, "sweep", "b", {});
    c.fractions = r.grid(s, "sweep", "fractions", c.fractions);
    c.beta_points = static_cast<int>(r.integer(s, "sweep", "beta_points", c.beta_points, 3, 1000000));
    c.revival_halfwidth = r.positive(s, "sweep", "revival_halfwidth", c.revival_halfwidth);
    for (double x : c.sweep_sigma_beta)
      if (!(x > 0.0)) r.fail("sweep.sigma_beta", "must be positive (degenerate Gaussian)");
    for (double x : c.sweep_sigma_k)
      if (!(x >= 0.0)) r.fail("sweep.sigma_k", "must be >= 0");
    for (double x : c.sweep_b)
      if (!(x >= 0.0)) r.fail("sweep.b", "must be >= 0");
    for (double x : c.fractions)
      if (!(x > 0.0 && x <= 8.0)) r.fail("sweep.fractions", "must lie in (0, 8]");
  }
  if (c.scenario == Scenario::sweep_phi && c.sweep_phi.empty()) r.fail("sweep.phi", "required for sweep_phi");
  if (c.scenario == Scenario::sweep_sigma && (c.sweep_sigma_beta.empty() || c.sweep_sigma_k.empty()))
    r.fail("sweep", "sweep_sigma needs sweep.sigma_beta and sweep.sigma_k");
  if (c.scenario == Scenario::sweep_asymmetry && c.sweep_b.empty()) r.fail("sweep.b", "required for sweep_asymmetry");

  if (r.has(j, "params")) {
    const auto& p = j["params"];
    r.allow_keys(p, "params", {"variants_nm"});
    if (r.has(p, "variants_nm")) {
      if (!p["variants_nm"].is_array()) r.fail("params.variants_nm", "must be a list of diameter triples");
      else
        for (const auto& v : p["variants_nm"]) {
          if (!v.is_array() || v.size() != 3) {
            r.fail("params.variants_nm", "each entry needs three diameters");
            continue;
          }
          std::array<double, 3> d{};
          for (int i = 0; i < 3; ++i) {
            if (!v[i].is_number() || !(v[i].get<double>() > 0.0)) r.fail("params.variants_nm", "diameters must be positive");
            else d[i] = v[i].get<double>();
          }
          c.variants_nm.push_back(d);
        }
    }
  }

  if (r.has(j, "output")) {
    const auto& o = j["output"];
    r.allow_keys(o, "output", {"prefix", "format"});
    c.prefix = r.text(o, "output", "prefix", c.prefix, {});
    if (c.prefix.empty()) r.fail("output.prefix", "must not be empty");
    c.format = r.text(o, "output", "format", "csv", {"csv"});
  }
  return {c, r.problems};
}

inline ExperimentConfig resolve(const json& j) {
  auto [c, problems] = parse_config(j);
  if (!problems.empty()) throw ConfigError(problems.front().key, problems.front().message);
  return c;
}

/// Fully resolved config; parsing it again gives the same ExperimentConfig.
inline json to_json(const ExperimentConfig& c) {
  json j;
  j["scenario"] = to_string(c.scenario);
  if (c.rotor.direct)
    j["rotor"]["direct"] = {{"I", c.rotor.I}, {"ratio", c.rotor.ratio}, {"b", c.rotor.b}};
  else
    j["rotor"]["geometry"] = {{"diameters_nm", c.rotor.diameters_nm}, {"density", c.rotor.density}};
  j["spectrum"] = {{"method", c.spectrum},
                   {"assignment", c.assignment == rotor::AssignmentPolicy::lenient ? "lenient" : "strict"}};
  j["state"] = {{"mode", c.state.mode == rotor::StateMode::gaussian_beta ? "gaussian_beta" : "gaussian_j"},
                {"sigma_j2", c.state.sigma_j2},
                {"sigma_beta", c.state.sigma_beta},
                {"sigma_k", c.sigma_k},
                {"jmax", c.jmax}};
  json p;
  if (!c.pulse.schedule.empty()) {
    for (const auto& e : c.pulse.schedule) p["schedule"].push_back({{"t", e.t}, {"phi", e.phi}});
  } else if (c.pulse.laser) {
    p["laser"] = {{"power", c.pulse.laser->power},
                  {"waist", c.pulse.laser->waist},
                  {"tau", c.pulse.laser->tau},
                  {"delta_alpha", c.pulse.laser->delta_alpha}};
  } else if (c.scenario != Scenario::sweep_phi) {
    p["phi"] = c.pulse.phis;
  }
  p["time"] = c.pulse.time;
  p["method"] = pulse::to_string(c.pulse.method);
  j["pulse"] = p;
  j["gamma"] = {{c.gamma_in_hz ? "hz" : "dimensionless", c.gamma}};
  if (!c.times_list.empty())
    j["times"] = {{"list", c.times_list}};
  else
    j["times"] = {{"t_end", c.t_end}, {"points", c.points}, {"refine", c.refine}, {"refine_halfwidth", c.refine_halfwidth}};
  j["ensemble"] = {{"n", c.n},
                   {"seed", c.seed},
                   {"threads", c.threads},
                   {"samples", c.samples},
                   {"jumps", c.basis == decoherence::JumpBasis::cartesian ? "cartesian" : "spherical"}};
  json s = {{"fractions", c.fractions}, {"beta_points", c.beta_points}, {"revival_halfwidth", c.revival_halfwidth}};
  if (!c.sweep_phi.empty()) s["phi"] = c.sweep_phi;
  if (!c.sweep_sigma_beta.empty()) s["sigma_beta"] = c.sweep_sigma_beta;
  if (!c.sweep_sigma_k.empty()) s["sigma_k"] = c.sweep_sigma_k;
  if (!c.sweep_b.empty()) s["b"] = c.sweep_b;
  j["sweep"] = s;
  if (!c.variants_nm.empty()) j["params"] = {{"variants_nm", c.variants_nm}};
  j["output"] = {{"prefix", c.prefix}, {"format", c.format}};
  return j;
}

/// Sets a dotted path (`pulse.phi`) from a command-line value. The value is
/// read as JSON when it parses, else as a string; `null` removes the key.
inline void apply_override(json& j, const std::string& path, const std::string& value) {
  if (path.empty()) throw ConfigError(path, "empty override key");
  json v;
  try {
    v = json::parse(value);
  } catch (const json::parse_error&) {
    v = value;
  }
  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (parts[i].empty()) throw ConfigError(path, "malformed override key");
    if (!node->is_object()) *node = json::object();
    node = &(*node)[parts[i]];
  }
  if (!node->is_object()) *node = json::object();
  if (v.is_null())
    node->erase(parts.back());
  else
    (*node)[parts.back()] = v;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", path + ": " + e.what());
  }
}

#ifdef NANOROTOR_PRESET_DIR
inline std::string preset_dir() { return NANOROTOR_PRESET_DIR; }
#else
inline std::string preset_dir() { return "presets"; }
#endif

/// Scenario name, preset name (presets/<name>.json), config file or manifest.
inline json load_source(const std::string& source) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(source)) {
    json j = read_json_file(source);
    if (j.is_object() && j.contains("config") && j.contains("version")) return j["config"];
    return j;
  }
  const fs::path preset = fs::path(preset_dir()) / (source + ".json");
  if (fs::is_regular_file(preset)) return read_json_file(preset.string());
  if (parse_scenario(source)) {
    json j = {{"scenario", source}, {"rotor", {{"geometry", {{"diameters_nm", {5.5, 5.5, 50.0}}, {"density", 2329.0}}}}}};
    if (source == "evolve" || source == "decohere") j["pulse"] = {{"phi", 0.0}};
    if (source == "sweep_sigma") j["pulse"] = {{"phi", {pi}}};
    if (source == "sweep_asymmetry") j["pulse"] = {{"phi", {0.0, pi}}};
    if (source == "sweep_phi") j["sweep"] = {{"phi", {{"start", 0.0}, {"stop", 2 * pi}, {"count", 33}}}};
    if (source == "sweep_sigma") j["sweep"] = {{"sigma_beta", {0.1, 0.03}}, {"sigma_k", {0, 1, 2}}};
    if (source == "sweep_asymmetry") j["sweep"] = {{"b", {{"log10_start", -6}, {"log10_stop", -4}, {"count", 5}}}};
    return j;
  }
  throw ConfigError("scenario", "'" + source + "' is neither a scenario, a preset nor a readable file");
}

}  // namespace nanorotor::cli
