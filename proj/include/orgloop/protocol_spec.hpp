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

// Experiment protocol documents: strict parsing, safety validation and
// canonical serialization.
//
//   {
//     "reward_modality": "electrical" | "dopamine_uncaging",
//     "electrical_params": {"shape", "amplitude_uA", "pulse_duration_us",
//                           "frequency_hz"} | null,
//     "dopamine_params": {"uncaging_duration_ms"} | null,
//     "punishment_params": {"shape", "amplitude_uA", "pulse_duration_us"},
//     "curriculum": {"environment", "trials_per_block", "z",
//                    "prey_policy"}                        (optional)
//   }

#ifndef ORGLOOP_PROTOCOL_SPEC_HPP_
#define ORGLOOP_PROTOCOL_SPEC_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "orgloop/feedback.hpp"
#include "orgloop/mea.hpp"

namespace orgloop::protocol {

enum class RewardModality { Electrical, DopamineUncaging };

struct ElectricalParams {
  mea::PulseShape shape = mea::PulseShape::BiPhasic;
  double amplitude_ua = 0.0;
  int pulse_duration_us = 0;
  double frequency_hz = 0.0;
  bool operator==(const ElectricalParams&) const = default;
};

struct DopamineParams {
  int uncaging_duration_ms = 0;
  bool operator==(const DopamineParams&) const = default;
};

struct PunishmentParams {
  mea::PulseShape shape = mea::PulseShape::BiPhasic;
  double amplitude_ua = 0.0;
  int pulse_duration_us = 0;
  bool operator==(const PunishmentParams&) const = default;
};

struct Curriculum {
  std::optional<std::string> environment;
  std::optional<int> trials_per_block;
  std::optional<int> z;
  std::optional<std::string> prey_policy;
  bool operator==(const Curriculum&) const = default;
};

struct ProtocolSpec {
  RewardModality reward_modality = RewardModality::Electrical;
  std::optional<ElectricalParams> electrical_params;
  std::optional<DopamineParams> dopamine_params;
  PunishmentParams punishment_params;
  std::optional<Curriculum> curriculum;
  bool operator==(const ProtocolSpec&) const = default;
};

// Safety bounds.
inline constexpr double kAmplitudeMin = 0.1, kAmplitudeMax = 20.0;
inline constexpr int kPulseMin = 50, kPulseMax = 500;
inline constexpr int kUncagingMin = 100, kUncagingMax = 1000;
inline constexpr double kFrequencyMin = 0.1, kFrequencyMax = 200.0;

enum class ErrorKind { Syntax, UnknownField, TypeMismatch, Missing, Range, Consistency };
std::string to_string(ErrorKind k);

struct ValidationError {
  ErrorKind kind = ErrorKind::Syntax;
  std::string path;        // dotted field path, empty for the whole document
  std::string constraint;  // what was violated
  std::string value;       // offending value as JSON text
  bool operator==(const ValidationError&) const = default;
};

std::string to_string(const ValidationError& e);
void to_json(nlohmann::json& j, const ValidationError& e);

struct ParseResult {
  std::optional<ProtocolSpec> spec;
  std::vector<ValidationError> errors;  // structural errors; empty iff spec set
};

// Strict parse: unknown keys, wrong types and missing required fields are each
// reported, one error per offending field.
ParseResult parse_protocol(std::string_view text);

// Every range and consistency rule; all violations are returned.
std::vector<ValidationError> validate(const ProtocolSpec& spec);

nlohmann::json to_json(const ProtocolSpec& spec);
std::string serialize(const ProtocolSpec& spec);

// Feedback settings for a run under `spec`: the electrical reward becomes a
// pulse train with the given parameters (500 ms), dopamine reward switches the
// reward channel, and the punishment base amplitude comes from
// punishment_params.
feedback::FeedbackConfig feedback_config(const ProtocolSpec& spec,
                                         feedback::FeedbackConfig base = {});

// One-line digest, e.g. "Electrical reward (20Hz, 2uA)".
std::string describe(const ProtocolSpec& spec);

}  // namespace orgloop::protocol

#endif  // ORGLOOP_PROTOCOL_SPEC_HPP_
