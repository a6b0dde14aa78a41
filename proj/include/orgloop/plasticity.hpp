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

// Synaptic-strength probes on the surrogate: a test pulse on one stimulation
// electrode, the summed synaptic input current of a recording group as the
// field-response analogue, and its early slope.

#ifndef ORGLOOP_PLASTICITY_HPP_
#define ORGLOOP_PLASTICITY_HPP_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "orgloop/feedback.hpp"
#include "orgloop/mea.hpp"
#include "orgloop/network.hpp"
#include "orgloop/rng.hpp"

namespace orgloop::probe {

struct ProbeConfig {
  mea::PulseShape shape = mea::PulseShape::BiPhasic;
  double amplitude_ua = 10.0;
  double pulse_width_us = 200.0;
  double record_ms = 5.0;
  double dt_ms = 0.1;
  double fit_from_ms = 0.5;
  double fit_to_ms = 2.5;
};

struct PlasticityMeasurement {
  mea::ElectrodeId probe_electrode = 0;
  std::string record_group;
  double slope = 0.0;         // current units per ms
  double timestamp_ms = 0.0;  // agent clock when taken
  std::vector<double> trace;  // summed input current, one sample per dt

  bool operator==(const PlasticityMeasurement&) const = default;
};

enum class Classification { LTP, LTD, NoChange };
std::string to_string(Classification c);
Classification classification_from_string(std::string_view s);

struct PlasticityReport {
  PlasticityMeasurement before;
  PlasticityMeasurement after;
  double percent_change = 0.0;  // +inf when the baseline slope is 0
  Classification classification = Classification::NoChange;
};

inline constexpr double kDefaultThetaPercent = 5.0;

// Ordinary least-squares slope of y against t.
double least_squares_slope(std::span<const double> t, std::span<const double> y);

// Freezes plasticity, silences noise, quiesces the network, delivers a single
// test pulse on `probe_electrode` and records 5 ms of summed synaptic input into
// the neurons behind `record_group`. The agent's dynamic state, noise setting
// and freeze flag are restored afterwards; weights and eligibility are never
// touched. Throws unless the probe is a stimulation electrode and the group
// records.
PlasticityMeasurement measure_fepsp(snn::Agent& agent, const mea::MeaLayout& layout,
                                    mea::ElectrodeId probe_electrode,
                                    const mea::ElectrodeGroup& record_group,
                                    const ProbeConfig& cfg = {});

// percent = 100 (after - before) / |before|. Beyond +theta is LTP, below -theta
// is LTD. A zero baseline with a non-zero result is LTP. Throws when the two
// measurements come from different probe/group pairs.
PlasticityReport classify(const PlasticityMeasurement& before,
                          const PlasticityMeasurement& after,
                          double theta_percent = kDefaultThetaPercent);

// Pairs a test pulse on the probe electrode with direct activation of the
// recording group's neurons `offset_ms` later (negative: post first), then
// delivers `outcome` and lets its stimulus play out. Repeated `pairings` times.
struct PairingConfig {
  int pairings = 100;
  double offset_ms = 5.0;
  feedback::Kind outcome = feedback::Kind::Reward;
  double window_ms = 20.0;  // simulated after the later of the two pulses
  double rest_ms = 100.0;   // quiet time after the feedback stimulus
  ProbeConfig pulse;
};

void run_pairing_session(snn::Agent& agent, const mea::MeaLayout& layout,
                         mea::ElectrodeId probe_electrode,
                         const mea::ElectrodeGroup& record_group, const PairingConfig& cfg,
                         const feedback::FeedbackConfig& fb, SplitMix64& rng);

// CSV columns: label,probe_electrode,record_group,before_slope,after_slope,
// percent_change,classification
void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const std::string& label, const PlasticityReport& r);

}  // namespace orgloop::probe

#endif  // ORGLOOP_PLASTICITY_HPP_
