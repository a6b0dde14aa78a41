// Copyright 2026 The Orgloop Authors.
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

#include "orgloop/plasticity.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "orgloop/electrode_io.hpp"

namespace orgloop::probe {
namespace {

mea::StimulusCommand test_pulse(mea::ElectrodeId e, const ProbeConfig& cfg) {
  return mea::StimulusCommand::single_pulse({e}, cfg.shape, cfg.amplitude_ua,
                                            cfg.pulse_width_us, cfg.record_ms);
}

void check_roles(const mea::MeaLayout& layout, mea::ElectrodeId probe,
                 const mea::ElectrodeGroup& group) {
  const auto role = layout.role_of(probe);
  if (!role || *role != mea::GroupRole::Stimulate) {
    throw std::invalid_argument(
        fmt::format("probe electrode {} is not a stimulation electrode", probe));
  }
  if (group.role != mea::GroupRole::Record) {
    throw std::invalid_argument(fmt::format("group {} does not record", group.id));
  }
}

void run_fine(snn::Agent& agent, double duration_ms, double dt_ms) {
  const auto steps = std::llround(duration_ms / dt_ms);
  for (long long k = 0; k < steps; ++k) agent.step(dt_ms);
}

}  // namespace

std::string to_string(Classification c) {
  switch (c) {
    case Classification::LTP: return "LTP";
    case Classification::LTD: return "LTD";
    case Classification::NoChange: return "NoChange";
  }
  return "NoChange";
}

Classification classification_from_string(std::string_view s) {
  for (auto c : {Classification::LTP, Classification::LTD, Classification::NoChange}) {
    if (to_string(c) == s) return c;
  }
  throw std::invalid_argument(fmt::format("unknown classification '{}'", s));
}

double least_squares_slope(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size() || t.size() < 2) {
    throw std::invalid_argument("slope fit needs two or more paired samples");
  }
  const double n = static_cast<double>(t.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sxy += (t[i] - mt) * (y[i] - my);
    sxx += (t[i] - mt) * (t[i] - mt);
  }
  if (sxx == 0.0) throw std::invalid_argument("slope fit needs distinct times");
  return sxy / sxx;
}

PlasticityMeasurement measure_fepsp(snn::Agent& agent, const mea::MeaLayout& layout,
                                    mea::ElectrodeId probe_electrode,
                                    const mea::ElectrodeGroup& record_group,
                                    const ProbeConfig& cfg) {
  check_roles(layout, probe_electrode, record_group);
  const auto neurons = agent.electrode_map().of_group(record_group);

  const auto saved = agent.save_dynamics();
  const bool was_frozen = agent.plasticity_frozen();
  agent.freeze_plasticity(true);
  agent.quiesce();
  agent.set_noise(false);

  PlasticityMeasurement m;
  m.probe_electrode = probe_electrode;
  m.record_group = record_group.id;
  m.timestamp_ms = agent.clock_ms();

  mea::apply_stimulus(agent, layout, test_pulse(probe_electrode, cfg));
  const auto steps = std::llround(cfg.record_ms / cfg.dt_ms);
  std::vector<double> t_fit, y_fit;
  m.trace.reserve(static_cast<std::size_t>(steps));
  for (long long k = 0; k < steps; ++k) {
    agent.step(cfg.dt_ms);
    const auto current = agent.synaptic_current();
    double sum = 0.0;
    for (auto n : neurons) sum += current[n];
    m.trace.push_back(sum);
    // Sample k is taken at the end of step k.
    const double t = static_cast<double>(k + 1) * cfg.dt_ms;
    if (t >= cfg.fit_from_ms - 1e-9 && t <= cfg.fit_to_ms + 1e-9) {
      t_fit.push_back(t);
      y_fit.push_back(sum);
    }
  }
  m.slope = least_squares_slope(t_fit, y_fit);

  agent.restore_dynamics(saved);
  agent.freeze_plasticity(was_frozen);
  return m;
}

PlasticityReport classify(const PlasticityMeasurement& before,
                          const PlasticityMeasurement& after, double theta_percent) {
  if (before.probe_electrode != after.probe_electrode ||
      before.record_group != after.record_group) {
    throw std::invalid_argument("measurements come from different probe/group pairs");
  }
  PlasticityReport r{before, after, 0.0, Classification::NoChange};
  if (before.slope == 0.0) {
    if (after.slope != 0.0) {
      r.percent_change = std::numeric_limits<double>::infinity();
      r.classification = Classification::LTP;
    }
    return r;
  }
  r.percent_change = 100.0 * (after.slope - before.slope) / std::abs(before.slope);
  if (r.percent_change > theta_percent) {
    r.classification = Classification::LTP;
  } else if (r.percent_change < -theta_percent) {
    r.classification = Classification::LTD;
  }
  return r;
}

void run_pairing_session(snn::Agent& agent, const mea::MeaLayout& layout,
                         mea::ElectrodeId probe_electrode,
                         const mea::ElectrodeGroup& record_group, const PairingConfig& cfg,
                         const feedback::FeedbackConfig& fb, SplitMix64& rng) {
  check_roles(layout, probe_electrode, record_group);
  const auto post_neurons = agent.electrode_map().of_group(record_group);
  const auto pulse = test_pulse(probe_electrode, cfg.pulse);
  const double post_dt = mea::injection_dt_ms(pulse);
  const auto post_samples = mea::render_waveform(pulse, post_dt);
  const double dt = cfg.pulse.dt_ms;
  const double gap = std::abs(cfg.offset_ms);

  for (int i = 0; i < cfg.pairings; ++i) {
    auto fire_pre = [&] { mea::apply_stimulus(agent, layout, pulse); };
    auto fire_post = [&] {
      agent.inject_series(post_neurons, post_samples, post_dt);
    };
    if (cfg.offset_ms >= 0.0) {
      fire_pre();
      run_fine(agent, gap, dt);
      fire_post();
    } else {
      fire_post();
      run_fine(agent, gap, dt);
      fire_pre();
    }
    run_fine(agent, cfg.window_ms, dt);
    const auto d = feedback::deliver({cfg.outcome, 1.0}, agent, layout, rng, fb);
    const double stim_ms = d.stimulus ? d.stimulus->duration_ms() : 0.0;
    agent.run(stim_ms + cfg.rest_ms, 1.0);
  }
}

void write_csv_header(std::ostream& os) {
  os << "label,probe_electrode,record_group,before_slope,after_slope,percent_change,"
        "classification\n";
}

void write_csv_row(std::ostream& os, const std::string& label, const PlasticityReport& r) {
  os << fmt::format("{},{},{},{},{},{},{}\n", label, r.before.probe_electrode,
                    r.before.record_group, r.before.slope, r.after.slope,
                    r.percent_change, to_string(r.classification));
}

}  // namespace orgloop::probe
