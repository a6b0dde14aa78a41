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

// Reward and punishment stimuli and their delivery to an agent.
//
// Reward is a predictable stimulus (a low-frequency sinusoid, or a fixed pulse
// train in protocol mode) on every stimulation electrode. Punishment is white
// noise on a random half of them. Each delivery also issues the agent's
// neuromodulatory signal: +1 for reward, -1 for punishment.

#ifndef ORGLOOP_FEEDBACK_HPP_
#define ORGLOOP_FEEDBACK_HPP_

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "orgloop/mea.hpp"
#include "orgloop/network.hpp"
#include "orgloop/rng.hpp"

namespace orgloop::feedback {

enum class Kind { Reward, Punishment };
enum class Channel { Electrical, DopamineUncaging };

std::string to_string(Kind k);
std::string to_string(Channel c);
Kind kind_from_string(std::string_view s);
Channel channel_from_string(std::string_view s);

struct FeedbackEvent {
  Kind kind = Kind::Reward;
  double magnitude = 1.0;  // amplitude multiplier
  Channel channel = Channel::Electrical;

  bool operator==(const FeedbackEvent&) const = default;
};

void to_json(nlohmann::json& j, const FeedbackEvent& e);
void from_json(const nlohmann::json& j, FeedbackEvent& e);

// Magnitude of the "high" punishment used when an adversary is touched.
inline constexpr double kHighMagnitude = 1.5;

enum class RewardWaveform { Sinusoid, PulseTrain };

struct FeedbackConfig {
  Channel reward_channel = Channel::Electrical;
  RewardWaveform reward_waveform = RewardWaveform::Sinusoid;
  double reward_amplitude_ua = 10.0;
  double reward_frequency_hz = 4.0;
  double reward_duration_ms = 500.0;
  mea::PulseShape reward_shape = mea::PulseShape::BiPhasic;  // pulse train only
  double reward_pulse_width_us = 200.0;                      // pulse train only

  double punishment_amplitude_ua = 10.0;  // base, scaled by magnitude
  double punishment_duration_ms = 500.0;
  double punishment_fraction = 0.5;

  double uncaging_duration_ms = 500.0;
  double safety_ceiling = 3.0;  // largest allowed magnitude

  void validate() const;
};

void to_json(nlohmann::json& j, const FeedbackConfig& c);
void from_json(const nlohmann::json& j, FeedbackConfig& c);

// Reward stimulus on every electrode of `stim` (normally the C+D union).
mea::StimulusCommand make_reward(const mea::ElectrodeGroup& stim,
                                 const FeedbackConfig& cfg = {});

// White noise on max(1, round(fraction * n)) electrodes drawn uniformly from
// `stim`, amplitude base * magnitude, with a fresh seed drawn from `rng`.
// Throws std::invalid_argument for magnitude <= 0 or above the ceiling.
mea::StimulusCommand make_punishment(const mea::ElectrodeGroup& stim, double magnitude,
                                     SplitMix64& rng, const FeedbackConfig& cfg = {});

struct Delivery {
  std::optional<mea::StimulusCommand> stimulus;
  double signal = 0.0;
};

// Applies the neuromodulatory signal, then queues the stimulus (if any) at the
// agent's clock. Dopamine uncaging bypasses the electrodes; its signal is
// uncaging_duration_ms / 1000. Throws for dopamine-channel punishment.
Delivery deliver(const FeedbackEvent& event, snn::Agent& agent,
                 const mea::MeaLayout& layout, SplitMix64& rng,
                 const FeedbackConfig& cfg = {});

}  // namespace orgloop::feedback

#endif  // ORGLOOP_FEEDBACK_HPP_
