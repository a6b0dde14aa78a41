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

// Experiment runner: configuration, seeding, the closed loop, metrics and
// persistence.
//
// Seeds. Every component seed is derive_seed(master, label) with the labels
// "agent", "noise", "env", "punishment" and "policy". The second player of a
// two-player environment uses "agent/1" and "noise/1".
//
// Event log. One JSON object per environment step (JSON Lines) with the keys
// trial, t, state, actions, counts, feedback and outcome. It carries no
// wall-clock fields, so equal configs give byte-identical logs.

#ifndef ORGLOOP_HARNESS_HPP_
#define ORGLOOP_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "orgloop/environments.hpp"
#include "orgloop/feedback.hpp"
#include "orgloop/network.hpp"
#include "orgloop/plasticity.hpp"
#include "orgloop/protocol_spec.hpp"

namespace orgloop::harness {

struct LayoutConfig {
  int stim_per_group = 0;  // 0: the larger of 8 and what the environment needs
  int record_per_group = 2;
  int neurons_per_stim = 8;
  int neurons_per_record = 8;
};

struct RunConfig {
  int trials = 200;
  int block_size = 50;
  // Environments without their own trial ends (avoidance) end a trial after
  // this many steps. 0 means the environment decides alone.
  int trial_step_limit = 0;
  std::int64_t max_steps = 1'000'000;
  std::uint64_t seed = 1;
  bool baseline_random = false;
  // Whether STDP keeps building eligibility while feedback stimuli play out.
  bool feedback_plasticity = false;
};

struct ProbeSchedule {
  bool enabled = true;
  std::optional<mea::ElectrodeId> electrode;  // default: first electrode of C
  std::string group = "A";
  double theta_percent = probe::kDefaultThetaPercent;
  probe::ProbeConfig pulse;
};

struct ExperimentConfig {
  std::string environment = "predator_prey";
  nlohmann::json environment_params = nlohmann::json::object();
  snn::NetworkConfig network;
  LayoutConfig layout;
  env::CodecConfig codec;
  feedback::FeedbackConfig feedback;
  std::optional<protocol::ProtocolSpec> protocol;
  RunConfig run;
  ProbeSchedule probe;
  std::string output_dir;  // empty: nothing is written

  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

// Missing sections and keys keep their defaults; unknown keys are errors. A
// "protocol" entry may be an inline document or a path to one.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

// Feedback parameters and curriculum of a protocol folded into a config.
void apply_protocol(ExperimentConfig& cfg, const protocol::ProtocolSpec& spec);

std::uint64_t derive_component_seed(std::uint64_t master, std::string_view label);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

using MetricTable = std::map<std::string, double>;

struct BlockResult {
  int block = 0;
  MetricTable metrics;
  std::optional<double> fepsp_slope;  // probe taken after the block
};

struct PlasticityEntry {
  std::string label;
  probe::PlasticityReport report;
};

struct ExperimentRecord {
  std::string config_digest;
  std::string environment;
  std::uint64_t seed = 0;
  bool baseline_random = false;
  MetricTable metrics;
  std::vector<BlockResult> blocks;
  std::vector<int> trial_success;  // 1 when the trial met its goal
  std::vector<PlasticityEntry> plasticity;
  std::optional<probe::PlasticityReport> overall_plasticity;
  std::string primary_metric;
  std::string curriculum_suggestion;
  std::string event_log = "events.jsonl";
  std::string started_at;
  std::string finished_at;
};

// Percent change is null in JSON when infinite.
nlohmann::json plasticity_to_json(const std::string& label, const probe::PlasticityReport& r);
PlasticityEntry plasticity_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExperimentRecord& r);
ExperimentRecord record_from_json(const nlohmann::json& j);

struct ExperimentResult {
  ExperimentRecord record;
  std::vector<std::string> events;  // the event log, one line per step
  MetricTable online_metrics;       // accumulated during the run
};

// The electrode layout and the seeded agent of `player` for a config.
mea::MeaLayout layout_for(const ExperimentConfig& cfg);
snn::Agent build_agent(const ExperimentConfig& cfg, const mea::MeaLayout& layout,
                       int player = 0);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Runs independent experiments on up to `threads` workers. Results keep the
// input order.
std::vector<ExperimentResult> run_experiments(const std::vector<ExperimentConfig>& cfgs,
                                              int threads);

// Metrics recomputed from the event log. Metrics without data are absent.
// Throws std::invalid_argument on a malformed or truncated log.
MetricTable compute_metrics(const std::vector<std::string>& events,
                            std::string_view environment);
MetricTable compute_metrics(std::istream& events, std::string_view environment);

// The metric that decides trial success and curriculum advancement.
std::string primary_metric(std::string_view environment);

// Advance above a 0.7 success rate, otherwise repeat with more salient reward.
std::string curriculum_suggestion(double rate);

// Text summary and learning-curve CSV (block,metric,value,fepsp_slope).
std::string summary(const ExperimentRecord& r);
void write_metrics_csv(std::ostream& os, const ExperimentRecord& r);
struct CsvRow {
  int block = 0;
  std::string metric;
  double value = 0.0;
  std::optional<double> fepsp_slope;
};
std::vector<CsvRow> read_metrics_csv(std::istream& is);

// Writes events.jsonl, record.json, metrics.csv and plasticity.csv.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace orgloop::harness

#endif  // ORGLOOP_HARNESS_HPP_
