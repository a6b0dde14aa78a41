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

#include "orgloop/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "orgloop/electrode_io.hpp"

namespace orgloop::feedback {

std::string to_string(Kind k) { return k == Kind::Reward ? "reward" : "punishment"; }

std::string to_string(Channel c) {
  return c == Channel::Electrical ? "electrical" : "dopamine_uncaging";
}

Kind kind_from_string(std::string_view s) {
  if (s == "reward") return Kind::Reward;
  if (s == "punishment") return Kind::Punishment;
  throw std::invalid_argument(fmt::format("unknown feedback kind '{}'", s));
}

Channel channel_from_string(std::string_view s) {
  if (s == "electrical") return Channel::Electrical;
  if (s == "dopamine_uncaging") return Channel::DopamineUncaging;
  throw std::invalid_argument(fmt::format("unknown feedback channel '{}'", s));
}

void to_json(nlohmann::json& j, const FeedbackEvent& e) {
  j = {{"kind", to_string(e.kind)},
       {"magnitude", e.magnitude},
       {"channel", to_string(e.channel)}};
}

void from_json(const nlohmann::json& j, FeedbackEvent& e) {
  e.kind = kind_from_string(j.at("kind").get<std::string>());
  e.magnitude = j.at("magnitude").get<double>();
  e.channel = channel_from_string(j.value("channel", std::string("electrical")));
}

void FeedbackConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(fmt::format("FeedbackConfig: {}", what));
  };
  require(reward_amplitude_ua > 0.0, "reward amplitude must be > 0");
  require(reward_frequency_hz > 0.0, "reward frequency must be > 0");
  require(reward_duration_ms > 0.0, "reward duration must be > 0");
  require(punishment_amplitude_ua > 0.0, "punishment amplitude must be > 0");
  require(punishment_duration_ms > 0.0, "punishment duration must be > 0");
  require(punishment_fraction > 0.0 && punishment_fraction <= 1.0,
          "punishment fraction must be in (0, 1]");
  require(uncaging_duration_ms > 0.0, "uncaging duration must be > 0");
  require(safety_ceiling > 0.0, "safety ceiling must be > 0");
}

void to_json(nlohmann::json& j, const FeedbackConfig& c) {
  j = {{"reward_channel", to_string(c.reward_channel)},
       {"reward_waveform",
        c.reward_waveform == RewardWaveform::Sinusoid ? "sinusoid" : "pulse_train"},
       {"reward_amplitude_uA", c.reward_amplitude_ua},
       {"reward_frequency_hz", c.reward_frequency_hz},
       {"reward_duration_ms", c.reward_duration_ms},
       {"reward_shape", mea::to_string(c.reward_shape)},
       {"reward_pulse_duration_us", c.reward_pulse_width_us},
       {"punishment_amplitude_uA", c.punishment_amplitude_ua},
       {"punishment_duration_ms", c.punishment_duration_ms},
       {"punishment_fraction", c.punishment_fraction},
       {"uncaging_duration_ms", c.uncaging_duration_ms},
       {"safety_ceiling", c.safety_ceiling}};
}

void from_json(const nlohmann::json& j, FeedbackConfig& c) {
  if (j.contains("reward_channel")) {
    c.reward_channel = channel_from_string(j.at("reward_channel").get<std::string>());
  }
  if (j.contains("reward_waveform")) {
    const auto w = j.at("reward_waveform").get<std::string>();
    if (w == "sinusoid") {
      c.reward_waveform = RewardWaveform::Sinusoid;
    } else if (w == "pulse_train") {
      c.reward_waveform = RewardWaveform::PulseTrain;
    } else {
      throw std::invalid_argument(fmt::format("unknown reward waveform '{}'", w));
    }
  }
  c.reward_amplitude_ua = j.value("reward_amplitude_uA", c.reward_amplitude_ua);
  c.reward_frequency_hz = j.value("reward_frequency_hz", c.reward_frequency_hz);
  c.reward_duration_ms = j.value("reward_duration_ms", c.reward_duration_ms);
  if (j.contains("reward_shape")) {
    c.reward_shape = mea::shape_from_string(j.at("reward_shape").get<std::string>());
  }
  c.reward_pulse_width_us = j.value("reward_pulse_duration_us", c.reward_pulse_width_us);
  c.punishment_amplitude_ua = j.value("punishment_amplitude_uA", c.punishment_amplitude_ua);
  c.punishment_duration_ms = j.value("punishment_duration_ms", c.punishment_duration_ms);
  c.punishment_fraction = j.value("punishment_fraction", c.punishment_fraction);
  c.uncaging_duration_ms = j.value("uncaging_duration_ms", c.uncaging_duration_ms);
  c.safety_ceiling = j.value("safety_ceiling", c.safety_ceiling);
}

mea::StimulusCommand make_reward(const mea::ElectrodeGroup& stim,
                                 const FeedbackConfig& cfg) {
  if (stim.electrodes.empty()) throw std::invalid_argument("no stimulation electrodes");
  if (cfg.reward_waveform == RewardWaveform::PulseTrain) {
    return mea::StimulusCommand::pulse_train(
        stim.electrodes, cfg.reward_shape, cfg.reward_amplitude_ua,
        cfg.reward_pulse_width_us, cfg.reward_frequency_hz, cfg.reward_duration_ms);
  }
  return mea::StimulusCommand::sinusoid(stim.electrodes, cfg.reward_amplitude_ua,
                                        cfg.reward_frequency_hz, cfg.reward_duration_ms);
}

mea::StimulusCommand make_punishment(const mea::ElectrodeGroup& stim, double magnitude,
                                     SplitMix64& rng, const FeedbackConfig& cfg) {
  if (stim.electrodes.empty()) throw std::invalid_argument("no stimulation electrodes");
  if (!(magnitude > 0.0)) throw std::invalid_argument("magnitude must be > 0");
  if (magnitude > cfg.safety_ceiling) {
    throw std::invalid_argument(fmt::format(
        "punishment magnitude {} exceeds the safety ceiling {}", magnitude,
        cfg.safety_ceiling));
  }
  std::vector<mea::ElectrodeId> pool = stim.electrodes;
  const auto n = pool.size();
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(cfg.punishment_fraction * static_cast<double>(n))),
      1, n);
  // Partial Fisher-Yates: the first k entries become a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  const std::uint64_t seed = rng();
  return mea::StimulusCommand::white_noise(std::move(pool),
                                           cfg.punishment_amplitude_ua * magnitude,
                                           cfg.punishment_duration_ms, seed);
}

Delivery deliver(const FeedbackEvent& event, snn::Agent& agent,
                 const mea::MeaLayout& layout, SplitMix64& rng,
                 const FeedbackConfig& cfg) {
  Delivery d;
  if (event.channel == Channel::DopamineUncaging) {
    if (event.kind == Kind::Punishment) {
      throw std::invalid_argument("dopamine uncaging cannot deliver punishment");
    }
    d.signal = std::min(1.0, cfg.uncaging_duration_ms / 1000.0);
    agent.apply_neuromodulation(d.signal);
    agent.normalize_inputs();
    return d;
  }
  const auto stim = layout.stimulation_union();
  if (event.kind == Kind::Reward) {
    d.signal = 1.0;
    d.stimulus = make_reward(stim, cfg);
  } else {
    d.signal = -1.0;
    d.stimulus = make_punishment(stim, event.magnitude, rng, cfg);
  }
  agent.apply_neuromodulation(d.signal);
  agent.normalize_inputs();
  mea::apply_stimulus(agent, layout, *d.stimulus);
  return d;
}

}  // namespace orgloop::feedback
