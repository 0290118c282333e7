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
#include <vector>

#include "nanorotor/core.hpp"
#include "nanorotor/observables.hpp"
#include "nanorotor/pulse.hpp"
#include "nanorotor/rotor.hpp"

// Time-ordered event loop shared by the deterministic and stochastic paths.
namespace nanorotor::schedule {

/// Ties at equal times resolve in enum order.
enum class EventKind { pulse = 0, jump = 1, observe = 2 };

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::observe;
  std::size_t index = 0;
};

/// Pulse events of a spec. An empty schedule with nonzero phi means one pulse at T_rev/8.
inline std::vector<pulse::PulseEvent> effective_pulses(const pulse::PulseSpec& spec) {
  spec.validate();
  if (!spec.schedule.empty()) return spec.schedule;
  if (spec.phi == 0.0) return {};
  return {pulse::PulseEvent{0.125, spec.phi}};
}

inline std::vector<Event> merge(const std::vector<pulse::PulseEvent>& pulses, const std::vector<double>& jumps,
                                const std::vector<double>& observations) {
  std::vector<Event> ev;
  ev.reserve(pulses.size() + jumps.size() + observations.size());
  for (std::size_t i = 0; i < pulses.size(); ++i) ev.push_back({pulses[i].t, EventKind::pulse, i});
  for (std::size_t i = 0; i < jumps.size(); ++i) ev.push_back({jumps[i], EventKind::jump, i});
  for (std::size_t i = 0; i < observations.size(); ++i) ev.push_back({observations[i], EventKind::observe, i});
  std::stable_sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  return ev;
}

/// Evolves one pure component from t = 0 through the merged events and returns
/// the alignment at each observation time. jump(c, index) mutates the component.
template <class JumpFn>
std::vector<double> run_component(rotor::Component c, const rotor::SpectrumModel& spectrum,
                                  const std::vector<pulse::PulseEvent>& pulses, pulse::PulseMethod method,
                                  const std::vector<double>& jump_times, const std::vector<double>& observations,
                                  const pulse::PulseEngine& engine, const observables::AlignmentOperator& op,
                                  Diagnostics& diag, JumpFn&& jump) {
  std::vector<double> out(observations.size(), 0.0);
  double now = 0.0;
  for (const auto& e : merge(pulses, jump_times, observations)) {
    if (e.t < now) throw DomainError("event before current time");
    if (e.t > now) {
      rotor::propagate_in_place(c, e.t - now, spectrum);
      now = e.t;
    }
    switch (e.kind) {
      case EventKind::pulse:
        for (auto& [m, v] : c.sectors) engine.apply_sector(v, m, c.k0, pulses[e.index].phi, method, diag);
        break;
      case EventKind::jump: jump(c, e.index); break;
      case EventKind::observe: out[e.index] = op(c); break;
    }
  }
  return out;
}

inline std::vector<double> run_component(const rotor::Component& c, const rotor::SpectrumModel& spectrum,
                                         const pulse::PulseSpec& pulses, const std::vector<double>& observations,
                                         const pulse::PulseEngine& engine, const observables::AlignmentOperator& op,
                                         Diagnostics& diag) {
  return run_component(c, spectrum, effective_pulses(pulses), pulses.method, {}, observations, engine, op, diag,
                       [](rotor::Component&, std::size_t) {});
}

/// Deterministic alignment trace of a (possibly mixed) state.
inline observables::TimeSeries evolve_alignment(const rotor::RotorState& state, const rotor::SpectrumModel& spectrum,
                                                const pulse::PulseSpec& pulses, const std::vector<double>& times,
                                                const pulse::PulseEngine& engine,
                                                const observables::AlignmentOperator& op, Diagnostics& diag) {
  observables::TimeSeries ts;
  ts.times = times;
  ts.values.assign(times.size(), 0.0);
  ts.label = "alignment";
  const double w = state.total_weight();
  for (const auto& [k0, c] : state.components) {
    const auto a = run_component(c, spectrum, pulses, times, engine, op, diag);
    for (std::size_t i = 0; i < a.size(); ++i) ts.values[i] += c.weight * a[i];
  }
  for (auto& v : ts.values) v /= w;
  return ts;
}

}  // namespace nanorotor::schedule
