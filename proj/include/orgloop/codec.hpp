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

// Sensory encoders (world state -> stimuli) and motor decoders (spike counts
// -> actions). All functions are pure.

#ifndef ORGLOOP_CODEC_HPP_
#define ORGLOOP_CODEC_HPP_

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "orgloop/mea.hpp"

namespace orgloop::codec {

enum class Action { Left, Right, Up, Down, Stay };

std::string to_string(Action a);
Action action_from_string(std::string_view s);

// Pulse train used for spatial codes and as the carrier of rate codes.
struct PulseParams {
  mea::PulseShape shape = mea::PulseShape::BiPhasic;
  double amplitude_ua = 10.0;
  double pulse_width_us = 200.0;
  double frequency_hz = 40.0;
  double duration_ms = 100.0;
};

struct RateCodeSpec {
  double f_min = 5.0;
  double f_max = 45.0;
  double d_max = 10.0;

  // Throws std::invalid_argument unless f_max > f_min > 0 and d_max > 0.
  void validate() const;
};

void to_json(nlohmann::json& j, const PulseParams& p);
void from_json(const nlohmann::json& j, PulseParams& p);
void to_json(nlohmann::json& j, const RateCodeSpec& r);
void from_json(const nlohmann::json& j, RateCodeSpec& r);

// Pulse train on the pos-th electrode (1-based) of the group.
mea::StimulusCommand encode_position_spatial(int pos, const mea::ElectrodeGroup& group,
                                             const PulseParams& p = {});

// f_max - (f_max - f_min) * min(d, d_max) / d_max.
double rate_frequency(double distance, const RateCodeSpec& spec);

// Pulse train on every electrode of the group at rate_frequency(distance).
// Throws for negative distance.
mea::StimulusCommand encode_rate(double distance, const RateCodeSpec& spec,
                                 const mea::ElectrodeGroup& group,
                                 const PulseParams& p = {});

enum class XyMode { FreqMod, SplitGroups };

// Grid cell (x, y), both 0-based in [0, grid_size). x is spatial on
// `spatial_group`. FreqMod: y sets the train frequency of that same command,
// linearly from f_min (y = 0) to f_max (y = grid_size - 1). SplitGroups: y is
// spatial on `second_group`. Throws for out-of-range cells or groups with fewer
// than grid_size electrodes.
std::vector<mea::StimulusCommand> encode_xy(int x, int y, int grid_size,
                                            const mea::ElectrodeGroup& spatial_group,
                                            const mea::ElectrodeGroup& second_group,
                                            XyMode mode, const RateCodeSpec& freq,
                                            const PulseParams& p = {});

// Higher count wins; a tie is Stay. Throws std::invalid_argument when the
// windows differ in duration.
Action decode_binary(const mea::SpikeWindow& a, const mea::SpikeWindow& b);

// Unique maximum wins; any tie at the maximum is Stay.
Action decode_4way(const mea::SpikeWindow& up, const mea::SpikeWindow& down,
                   const mea::SpikeWindow& left, const mea::SpikeWindow& right);

// Pong moves Up/Down, Breakout moves Left/Right. A dominant means Up / Left.
enum class PaddleAxis { Vertical, Horizontal };
Action decode_paddle(const mea::SpikeWindow& a, const mea::SpikeWindow& b,
                     PaddleAxis axis = PaddleAxis::Vertical);

inline constexpr double kDecodeWindowMs = 100.0;
inline constexpr double kPaddleWindowMs = 10.0;

}  // namespace orgloop::codec

#endif  // ORGLOOP_CODEC_HPP_
