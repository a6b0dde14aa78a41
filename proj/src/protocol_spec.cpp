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

#include "orgloop/protocol_spec.hpp"

#include <algorithm>
#include <initializer_list>

#include <fmt/format.h>

#include "orgloop/environments.hpp"

namespace orgloop::protocol {
namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

std::string join(const std::string& parent, std::string_view key) {
  return parent.empty() ? std::string(key) : fmt::format("{}.{}", parent, key);
}

class Reader {
 public:
  explicit Reader(std::vector<ValidationError>& errors) : errors_(errors) {}

  void add(ErrorKind kind, std::string path, std::string constraint, const json& value) {
    errors_.push_back({kind, std::move(path), std::move(constraint),
                       value.is_discarded() ? std::string() : value.dump()});
  }

  bool object(const json& j, const std::string& path,
              std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
      add(ErrorKind::TypeMismatch, path, "object", j);
      return false;
    }
    for (const auto& [key, value] : j.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        add(ErrorKind::UnknownField, join(path, key), "unknown field", value);
      }
    }
    return true;
  }

  const json* field(const json& obj, const std::string& path, std::string_view key,
                    bool required) {
    const auto it = obj.find(std::string(key));
    if (it == obj.end() || it->is_null()) {
      if (required) add(ErrorKind::Missing, join(path, key), "required", json(nullptr));
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> number(const json& obj, const std::string& path,
                               std::string_view key, bool required = true) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      add(ErrorKind::TypeMismatch, join(path, key), "number", *v);
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<int> integer(const json& obj, const std::string& path,
                             std::string_view key, bool required = true) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
      add(ErrorKind::TypeMismatch, join(path, key), "integer", *v);
      return std::nullopt;
    }
    return v->get<int>();
  }

  std::optional<std::string> string(const json& obj, const std::string& path,
                                    std::string_view key, bool required = true) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      add(ErrorKind::TypeMismatch, join(path, key), "string", *v);
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<mea::PulseShape> shape(const json& obj, const std::string& path) {
    const auto s = string(obj, path, "shape");
    if (!s) return std::nullopt;
    if (*s == "bi-phasic") return mea::PulseShape::BiPhasic;
    if (*s == "tri-phasic") return mea::PulseShape::TriPhasic;
    add(ErrorKind::Range, join(path, "shape"), "one of [\"bi-phasic\", \"tri-phasic\"]",
        json(*s));
    return std::nullopt;
  }

 private:
  std::vector<ValidationError>& errors_;
};

void check_range(std::vector<ValidationError>& errors, const std::string& path,
                 double value, double lo, double hi, const json& shown) {
  if (value < lo || value > hi) {
    errors.push_back({ErrorKind::Range, path, fmt::format("range [{:.1f}, {:.1f}]", lo, hi),
                      shown.dump()});
  }
}

}  // namespace

std::string to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Syntax: return "syntax";
    case ErrorKind::UnknownField: return "unknown_field";
    case ErrorKind::TypeMismatch: return "type_mismatch";
    case ErrorKind::Missing: return "missing";
    case ErrorKind::Range: return "range";
    case ErrorKind::Consistency: return "consistency";
  }
  return "syntax";
}

std::string to_string(const ValidationError& e) {
  const auto where = e.path.empty() ? std::string("<document>") : e.path;
  if (e.value.empty()) return fmt::format("{}: {} ({})", where, e.constraint, to_string(e.kind));
  return fmt::format("{}: {} violates {} ({})", where, e.value, e.constraint,
                     to_string(e.kind));
}

void to_json(json& j, const ValidationError& e) {
  j = {{"kind", to_string(e.kind)},
       {"path", e.path},
       {"constraint", e.constraint},
       {"value", e.value}};
}

ParseResult parse_protocol(std::string_view text) {
  ParseResult out;
  const json doc = json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded()) {
    out.errors.push_back({ErrorKind::Syntax, "", "well-formed JSON", ""});
    return out;
  }
  Reader r(out.errors);
  if (!r.object(doc, "", {"reward_modality", "electrical_params", "dopamine_params",
                          "punishment_params", "curriculum"})) {
    return out;
  }
  ProtocolSpec spec;
  if (auto m = r.string(doc, "", "reward_modality")) {
    if (*m == "electrical") {
      spec.reward_modality = RewardModality::Electrical;
    } else if (*m == "dopamine_uncaging") {
      spec.reward_modality = RewardModality::DopamineUncaging;
    } else {
      r.add(ErrorKind::Range, "reward_modality",
            "one of [\"electrical\", \"dopamine_uncaging\"]", json(*m));
    }
  }
  if (const json* e = r.field(doc, "", "electrical_params", false)) {
    const std::string p = "electrical_params";
    if (r.object(*e, p, {"shape", "amplitude_uA", "pulse_duration_us", "frequency_hz"})) {
      ElectricalParams ep;
      const auto shape = r.shape(*e, p);
      const auto amp = r.number(*e, p, "amplitude_uA");
      const auto pulse = r.integer(*e, p, "pulse_duration_us");
      const auto freq = r.number(*e, p, "frequency_hz");
      if (shape && amp && pulse && freq) {
        spec.electrical_params = ElectricalParams{*shape, *amp, *pulse, *freq};
      }
    }
  }
  if (const json* d = r.field(doc, "", "dopamine_params", false)) {
    const std::string p = "dopamine_params";
    if (r.object(*d, p, {"uncaging_duration_ms"})) {
      if (auto ms = r.integer(*d, p, "uncaging_duration_ms")) {
        spec.dopamine_params = DopamineParams{*ms};
      }
    }
  }
  if (const json* u = r.field(doc, "", "punishment_params", true)) {
    const std::string p = "punishment_params";
    if (r.object(*u, p, {"shape", "amplitude_uA", "pulse_duration_us"})) {
      const auto shape = r.shape(*u, p);
      const auto amp = r.number(*u, p, "amplitude_uA");
      const auto pulse = r.integer(*u, p, "pulse_duration_us");
      if (shape && amp && pulse) spec.punishment_params = PunishmentParams{*shape, *amp, *pulse};
    }
  }
  if (const json* c = r.field(doc, "", "curriculum", false)) {
    const std::string p = "curriculum";
    if (r.object(*c, p, {"environment", "trials_per_block", "z", "prey_policy"})) {
      Curriculum cur;
      cur.environment = r.string(*c, p, "environment", false);
      cur.trials_per_block = r.integer(*c, p, "trials_per_block", false);
      cur.z = r.integer(*c, p, "z", false);
      cur.prey_policy = r.string(*c, p, "prey_policy", false);
      spec.curriculum = cur;
    }
  }
  if (out.errors.empty()) out.spec = spec;
  return out;
}

std::vector<ValidationError> validate(const ProtocolSpec& spec) {
  std::vector<ValidationError> errors;
  const bool electrical = spec.reward_modality == RewardModality::Electrical;
  if (electrical) {
    if (!spec.electrical_params) {
      errors.push_back({ErrorKind::Consistency, "electrical_params",
                        "required when reward_modality is electrical", "null"});
    }
    if (spec.dopamine_params) {
      errors.push_back({ErrorKind::Consistency, "dopamine_params",
                        "must be null when reward_modality is electrical",
                        json{{"uncaging_duration_ms",
                              spec.dopamine_params->uncaging_duration_ms}}
                            .dump()});
    }
  } else {
    if (!spec.dopamine_params) {
      errors.push_back({ErrorKind::Consistency, "dopamine_params",
                        "required when reward_modality is dopamine_uncaging", "null"});
    }
    if (spec.electrical_params) {
      errors.push_back({ErrorKind::Consistency, "electrical_params",
                        "must be null when reward_modality is dopamine_uncaging",
                        "{...}"});
    }
  }
  if (const auto& e = spec.electrical_params) {
    check_range(errors, "electrical_params.amplitude_uA", e->amplitude_ua, kAmplitudeMin,
                kAmplitudeMax, json(e->amplitude_ua));
    check_range(errors, "electrical_params.pulse_duration_us", e->pulse_duration_us,
                kPulseMin, kPulseMax, json(e->pulse_duration_us));
    check_range(errors, "electrical_params.frequency_hz", e->frequency_hz, kFrequencyMin,
                kFrequencyMax, json(e->frequency_hz));
  }
  if (const auto& d = spec.dopamine_params) {
    check_range(errors, "dopamine_params.uncaging_duration_ms", d->uncaging_duration_ms,
                kUncagingMin, kUncagingMax, json(d->uncaging_duration_ms));
  }
  const auto& u = spec.punishment_params;
  check_range(errors, "punishment_params.amplitude_uA", u.amplitude_ua, kAmplitudeMin,
              kAmplitudeMax, json(u.amplitude_ua));
  check_range(errors, "punishment_params.pulse_duration_us", u.pulse_duration_us, kPulseMin,
              kPulseMax, json(u.pulse_duration_us));
  if (const auto& c = spec.curriculum) {
    if (c->environment) {
      const auto kinds = env::environment_kinds();
      if (std::find(kinds.begin(), kinds.end(), *c->environment) == kinds.end()) {
        errors.push_back({ErrorKind::Range, "curriculum.environment", "known environment",
                          json(*c->environment).dump()});
      }
    }
    if (c->trials_per_block && (*c->trials_per_block < 0 || *c->trials_per_block > 10000)) {
      errors.push_back({ErrorKind::Range, "curriculum.trials_per_block", "range [0, 10000]",
                        json(*c->trials_per_block).dump()});
    }
    if (c->z && (*c->z < 1 || *c->z > 1000)) {
      errors.push_back({ErrorKind::Range, "curriculum.z", "range [1, 1000]",
                        json(*c->z).dump()});
    }
    if (c->prey_policy) {
      const auto& p = *c->prey_policy;
      if (p != "stationary" && p != "predictable" && p != "random") {
        errors.push_back({ErrorKind::Range, "curriculum.prey_policy",
                          "one of [\"stationary\", \"predictable\", \"random\"]",
                          json(p).dump()});
      }
    }
  }
  return errors;
}

json to_json(const ProtocolSpec& spec) { return json::parse(serialize(spec)); }

std::string serialize(const ProtocolSpec& spec) {
  ordered doc;
  doc["reward_modality"] =
      spec.reward_modality == RewardModality::Electrical ? "electrical" : "dopamine_uncaging";
  if (const auto& e = spec.electrical_params) {
    ordered ep;
    ep["shape"] = mea::to_string(e->shape);
    ep["amplitude_uA"] = e->amplitude_ua;
    ep["pulse_duration_us"] = e->pulse_duration_us;
    ep["frequency_hz"] = e->frequency_hz;
    doc["electrical_params"] = ep;
  } else {
    doc["electrical_params"] = nullptr;
  }
  if (const auto& d = spec.dopamine_params) {
    doc["dopamine_params"] = ordered{{"uncaging_duration_ms", d->uncaging_duration_ms}};
  } else {
    doc["dopamine_params"] = nullptr;
  }
  ordered up;
  up["shape"] = mea::to_string(spec.punishment_params.shape);
  up["amplitude_uA"] = spec.punishment_params.amplitude_ua;
  up["pulse_duration_us"] = spec.punishment_params.pulse_duration_us;
  doc["punishment_params"] = up;
  if (const auto& c = spec.curriculum) {
    ordered cj = ordered::object();
    if (c->environment) cj["environment"] = *c->environment;
    if (c->trials_per_block) cj["trials_per_block"] = *c->trials_per_block;
    if (c->z) cj["z"] = *c->z;
    if (c->prey_policy) cj["prey_policy"] = *c->prey_policy;
    doc["curriculum"] = cj;
  }
  return doc.dump(2);
}

feedback::FeedbackConfig feedback_config(const ProtocolSpec& spec,
                                         feedback::FeedbackConfig base) {
  if (spec.reward_modality == RewardModality::Electrical && spec.electrical_params) {
    const auto& e = *spec.electrical_params;
    base.reward_channel = feedback::Channel::Electrical;
    base.reward_waveform = feedback::RewardWaveform::PulseTrain;
    base.reward_shape = e.shape;
    base.reward_amplitude_ua = e.amplitude_ua;
    base.reward_pulse_width_us = e.pulse_duration_us;
    base.reward_frequency_hz = e.frequency_hz;
  } else if (spec.dopamine_params) {
    base.reward_channel = feedback::Channel::DopamineUncaging;
    base.uncaging_duration_ms = spec.dopamine_params->uncaging_duration_ms;
  }
  base.punishment_amplitude_ua = spec.punishment_params.amplitude_ua;
  return base;
}

std::string describe(const ProtocolSpec& spec) {
  if (spec.reward_modality == RewardModality::DopamineUncaging) {
    const int ms = spec.dopamine_params ? spec.dopamine_params->uncaging_duration_ms : 0;
    return fmt::format("Dopamine uncaging reward ({}ms duration)", ms);
  }
  if (!spec.electrical_params) return "Electrical reward";
  return fmt::format("Electrical reward ({:g}Hz, {:g}uA)", spec.electrical_params->frequency_hz,
                     spec.electrical_params->amplitude_ua);
}

}  // namespace orgloop::protocol
