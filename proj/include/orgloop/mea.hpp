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

#ifndef ORGLOOP_MEA_HPP_
#define ORGLOOP_MEA_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace orgloop::mea {

using ElectrodeId = int;

enum class GroupRole { Record, Stimulate };

// A labelled set of electrodes. The four canonical groups are A and B
// (recording, motor output) and C and D (stimulation, sensory input).
struct ElectrodeGroup {
  std::string id;
  GroupRole role = GroupRole::Record;
  std::vector<ElectrodeId> electrodes;

  std::size_t size() const { return electrodes.size(); }
  bool contains(ElectrodeId e) const;
};

// Throws std::invalid_argument on an empty or duplicated electrode list.
ElectrodeGroup make_group(std::string id, GroupRole role,
                          std::vector<ElectrodeId> electrodes);

// The array: a set of groups with pairwise-disjoint electrodes. Groups A/B must
// record and C/D must stimulate; other labels are allowed as extensions.
class MeaLayout {
 public:
  explicit MeaLayout(std::vector<ElectrodeGroup> groups);

  // D = 1..n (self), C = n+1..2n (exteroceptive), A and B follow with
  // `record_per_group` electrodes each.
  static MeaLayout standard(int stim_per_group = 8, int record_per_group = 2);

  const ElectrodeGroup& group(std::string_view id) const;
  bool has_group(std::string_view id) const;
  const std::vector<ElectrodeGroup>& groups() const { return groups_; }

  const ElectrodeGroup& a() const { return group("A"); }
  const ElectrodeGroup& b() const { return group("B"); }
  const ElectrodeGroup& c() const { return group("C"); }
  const ElectrodeGroup& d() const { return group("D"); }

  // C followed by D, labelled "CD".
  ElectrodeGroup stimulation_union() const;

  // Four-way motor groups: A_up, A_down, B_left, B_right. Each recording group
  // is split in half (first half / second half of its electrodes).
  std::vector<ElectrodeGroup> four_way_groups() const;

  std::optional<GroupRole> role_of(ElectrodeId e) const;
  std::vector<ElectrodeId> all_electrodes() const;

 private:
  std::vector<ElectrodeGroup> groups_;
};

enum class Waveform { Sinusoid, WhiteNoise, PulseTrain, SinglePulse };
enum class PulseShape { BiPhasic, TriPhasic };

std::string to_string(Waveform w);
std::string to_string(PulseShape s);
Waveform waveform_from_string(std::string_view s);
PulseShape shape_from_string(std::string_view s);

// An immutable, validated stimulus. Construct through the named factories.
class StimulusCommand {
 public:
  static StimulusCommand sinusoid(std::vector<ElectrodeId> targets,
                                  double amplitude_ua, double frequency_hz,
                                  double duration_ms);
  static StimulusCommand white_noise(std::vector<ElectrodeId> targets,
                                     double amplitude_ua, double duration_ms,
                                     std::uint64_t seed);
  static StimulusCommand pulse_train(std::vector<ElectrodeId> targets,
                                     PulseShape shape, double amplitude_ua,
                                     double pulse_width_us, double frequency_hz,
                                     double duration_ms);
  static StimulusCommand single_pulse(std::vector<ElectrodeId> targets,
                                      PulseShape shape, double amplitude_ua,
                                      double pulse_width_us,
                                      double duration_ms);

  const std::vector<ElectrodeId>& targets() const { return targets_; }
  Waveform waveform() const { return waveform_; }
  PulseShape shape() const { return shape_; }
  double amplitude_ua() const { return amplitude_ua_; }
  double frequency_hz() const { return frequency_hz_; }
  double pulse_width_us() const { return pulse_width_us_; }
  double duration_ms() const { return duration_ms_; }
  std::optional<std::uint64_t> seed() const { return seed_; }

  bool operator==(const StimulusCommand&) const = default;

  // Canonical serialization; keys match the protocol document vocabulary
  // (amplitude_uA, pulse_duration_us, frequency_hz, shape).
  nlohmann::json to_json() const;
  static StimulusCommand from_json(const nlohmann::json& j);

 private:
  StimulusCommand() = default;
  void validate() const;

  std::vector<ElectrodeId> targets_;
  Waveform waveform_ = Waveform::Sinusoid;
  PulseShape shape_ = PulseShape::BiPhasic;
  double amplitude_ua_ = 0.0;
  double frequency_hz_ = 0.0;
  double pulse_width_us_ = 0.0;
  double duration_ms_ = 0.0;
  std::optional<std::uint64_t> seed_;
};

struct SpikeWindow {
  std::string group_id;
  double window_ms = 0.0;
  int count = 0;
  std::vector<double> timestamps;  // sorted offsets in [0, window_ms)

  bool operator==(const SpikeWindow&) const = default;
};

inline constexpr double kRenderDtMs = 0.1;
inline constexpr int kEntropyBins = 32;

// Sample series in microamps, one sample per dt. Pure in (cmd, dt).
// Throws std::invalid_argument for dt <= 0, dt not dividing the duration, or
// dt coarser than the pulse width of a pulse waveform.
std::vector<double> render_waveform(const StimulusCommand& cmd,
                                    double dt_ms = kRenderDtMs);

// Sample step used to inject `cmd` into a network: kRenderDtMs, or for pulse
// waveforms the coarsest step in {0.1, 0.05, 0.025, 0.02, 0.01, 0.005, 0.002,
// 0.001} ms that divides both the pulse width and the duration.
double injection_dt_ms(const StimulusCommand& cmd);

// Shannon entropy in bits of an equal-width histogram over [min, max].
// A zero-range series has entropy 0.
double shannon_entropy(std::span<const double> samples,
                       int bins = kEntropyBins);

}  // namespace orgloop::mea

#endif  // ORGLOOP_MEA_HPP_
