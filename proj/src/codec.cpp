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

#include "orgloop/codec.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include <fmt/format.h>

namespace orgloop::codec {
namespace {

void require_same_window(std::initializer_list<const mea::SpikeWindow*> ws) {
  const double w = (*ws.begin())->window_ms;
  for (const auto* x : ws) {
    if (x->window_ms != w) {
      throw std::invalid_argument(fmt::format(
          "decoder windows differ ({} ms vs {} ms)", w, x->window_ms));
    }
  }
}

mea::StimulusCommand train(std::vector<mea::ElectrodeId> targets,
                           const PulseParams& p, double frequency_hz) {
  return mea::StimulusCommand::pulse_train(std::move(targets), p.shape,
                                           p.amplitude_ua, p.pulse_width_us,
                                           frequency_hz, p.duration_ms);
}

}  // namespace

std::string to_string(Action a) {
  switch (a) {
    case Action::Left: return "left";
    case Action::Right: return "right";
    case Action::Up: return "up";
    case Action::Down: return "down";
    case Action::Stay: return "stay";
  }
  return "stay";
}

Action action_from_string(std::string_view s) {
  for (auto a : {Action::Left, Action::Right, Action::Up, Action::Down, Action::Stay}) {
    if (to_string(a) == s) return a;
  }
  throw std::invalid_argument(fmt::format("unknown action '{}'", s));
}

void RateCodeSpec::validate() const {
  if (!(f_min > 0.0 && f_max > f_min)) {
    throw std::invalid_argument("rate code needs f_max > f_min > 0");
  }
  if (!(d_max > 0.0)) throw std::invalid_argument("rate code needs d_max > 0");
}

void to_json(nlohmann::json& j, const PulseParams& p) {
  j = {{"shape", mea::to_string(p.shape)},
       {"amplitude_uA", p.amplitude_ua},
       {"pulse_duration_us", p.pulse_width_us},
       {"frequency_hz", p.frequency_hz},
       {"duration_ms", p.duration_ms}};
}

void from_json(const nlohmann::json& j, PulseParams& p) {
  if (j.contains("shape")) p.shape = mea::shape_from_string(j.at("shape").get<std::string>());
  p.amplitude_ua = j.value("amplitude_uA", p.amplitude_ua);
  p.pulse_width_us = j.value("pulse_duration_us", p.pulse_width_us);
  p.frequency_hz = j.value("frequency_hz", p.frequency_hz);
  p.duration_ms = j.value("duration_ms", p.duration_ms);
}

void to_json(nlohmann::json& j, const RateCodeSpec& r) {
  j = {{"f_min", r.f_min}, {"f_max", r.f_max}, {"d_max", r.d_max}};
}

void from_json(const nlohmann::json& j, RateCodeSpec& r) {
  r.f_min = j.value("f_min", r.f_min);
  r.f_max = j.value("f_max", r.f_max);
  r.d_max = j.value("d_max", r.d_max);
}

mea::StimulusCommand encode_position_spatial(int pos, const mea::ElectrodeGroup& group,
                                             const PulseParams& p) {
  const auto n = static_cast<int>(group.size());
  if (pos < 1 || pos > n) {
    throw std::out_of_range(
        fmt::format("position {} outside 1..{} of group {}", pos, n, group.id));
  }
  return train({group.electrodes[pos - 1]}, p, p.frequency_hz);
}

double rate_frequency(double distance, const RateCodeSpec& spec) {
  spec.validate();
  const double d = std::min(std::max(distance, 0.0), spec.d_max);
  return spec.f_max - (spec.f_max - spec.f_min) * d / spec.d_max;
}

mea::StimulusCommand encode_rate(double distance, const RateCodeSpec& spec,
                                 const mea::ElectrodeGroup& group,
                                 const PulseParams& p) {
  if (distance < 0.0) throw std::invalid_argument("distance must be >= 0");
  return train(group.electrodes, p, rate_frequency(distance, spec));
}

std::vector<mea::StimulusCommand> encode_xy(int x, int y, int grid_size,
                                            const mea::ElectrodeGroup& spatial_group,
                                            const mea::ElectrodeGroup& second_group,
                                            XyMode mode, const RateCodeSpec& freq,
                                            const PulseParams& p) {
  if (grid_size < 2) throw std::invalid_argument("grid size must be >= 2");
  if (x < 0 || x >= grid_size || y < 0 || y >= grid_size) {
    throw std::out_of_range(fmt::format("cell ({}, {}) outside a {}x{} grid", x, y,
                                        grid_size, grid_size));
  }
  if (static_cast<int>(spatial_group.size()) < grid_size) {
    throw std::invalid_argument(fmt::format("group {} has {} electrodes, grid needs {}",
                                            spatial_group.id, spatial_group.size(),
                                            grid_size));
  }
  if (mode == XyMode::FreqMod) {
    freq.validate();
    const double f = freq.f_min + (freq.f_max - freq.f_min) * y / (grid_size - 1);
    return {train({spatial_group.electrodes[x]}, p, f)};
  }
  if (static_cast<int>(second_group.size()) < grid_size) {
    throw std::invalid_argument(fmt::format("group {} has {} electrodes, grid needs {}",
                                            second_group.id, second_group.size(),
                                            grid_size));
  }
  return {train({spatial_group.electrodes[x]}, p, p.frequency_hz),
          train({second_group.electrodes[y]}, p, p.frequency_hz)};
}

Action decode_binary(const mea::SpikeWindow& a, const mea::SpikeWindow& b) {
  require_same_window({&a, &b});
  if (a.count > b.count) return Action::Left;
  if (b.count > a.count) return Action::Right;
  return Action::Stay;
}

Action decode_4way(const mea::SpikeWindow& up, const mea::SpikeWindow& down,
                   const mea::SpikeWindow& left, const mea::SpikeWindow& right) {
  require_same_window({&up, &down, &left, &right});
  const std::array<int, 4> c{up.count, down.count, left.count, right.count};
  constexpr std::array<Action, 4> act{Action::Up, Action::Down, Action::Left,
                                      Action::Right};
  const int best = *std::max_element(c.begin(), c.end());
  if (std::count(c.begin(), c.end(), best) != 1) return Action::Stay;
  return act[std::find(c.begin(), c.end(), best) - c.begin()];
}

Action decode_paddle(const mea::SpikeWindow& a, const mea::SpikeWindow& b,
                     PaddleAxis axis) {
  const Action d = decode_binary(a, b);
  if (axis == PaddleAxis::Horizontal || d == Action::Stay) return d;
  return d == Action::Left ? Action::Up : Action::Down;
}

}  // namespace orgloop::codec
