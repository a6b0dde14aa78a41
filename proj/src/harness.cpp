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

#include "orgloop/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <omp.h>
#include <openssl/evp.h>

#include "orgloop/electrode_io.hpp"
#include "orgloop/rng.hpp"

namespace orgloop::harness {
namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

void check_keys(const json& j, std::string_view section,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) {
    throw std::invalid_argument(fmt::format("config section '{}' must be an object", section));
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw std::invalid_argument(fmt::format("unknown key '{}' in config section '{}'", key,
                                              section));
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

bool is_predator_kind(std::string_view kind) {
  return kind == "predator_prey" || kind == "predator_adversary" ||
         kind == "predator_prey2d" || kind == "multi_organoid";
}

bool is_avoidance_kind(std::string_view kind) {
  return kind == "avoidance1d" || kind == "avoidance_dynamic" || kind == "avoidance2d";
}

bool is_paddle_kind(std::string_view kind) {
  return kind == "pong" || kind == "breakout" || kind == "pong_versus";
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", tm.tm_year + 1900,
                     tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
}

// Counters behind the online metrics, fed from the loop's typed results.
class OnlineTally {
 public:
  void observe(const env::StepResult& r, int steps_in_trial) {
    ++steps_;
    switch (r.event) {
      case env::Event::SafeStep:
      case env::Event::SafeReward: ++safe_; break;
      case env::Event::Aversive: ++aversive_; break;
      case env::Event::Capture:
        ++captures_;
        capture_steps_ += steps_in_trial;
        break;
      case env::Event::Goal: ++goals_; break;
      case env::Event::Wall: ++walls_; break;
      case env::Event::Hit:
        ++hits_;
        ++rally_;
        break;
      case env::Event::Miss:
        ++misses_;
        rally_sum_ += rally_;
        max_rally_ = std::max(max_rally_, rally_);
        rally_ = 0;
        break;
      case env::Event::Brick:
      case env::Event::Cleared: ++bricks_; break;
      default: break;
    }
    if (r.winner == 1) ++wins_1_;
    if (r.winner == 2) ++wins_2_;
  }
  void end_trial() { ++trials_; }

  MetricTable table(std::string_view kind) const {
    MetricTable m;
    if (steps_ == 0) return m;
    m["steps"] = static_cast<double>(steps_);
    m["trials"] = static_cast<double>(trials_);
    const auto d = [](std::int64_t a, std::int64_t b) {
      return static_cast<double>(a) / static_cast<double>(b);
    };
    if (is_predator_kind(kind)) {
      if (trials_ > 0) m["capture_rate"] = d(captures_, trials_);
      if (captures_ > 0) m["mean_steps_to_capture"] = d(capture_steps_, captures_);
    }
    if (is_avoidance_kind(kind)) m["safe_zone_occupancy"] = d(safe_, steps_);
    if (kind == "maze") {
      m["goals"] = static_cast<double>(goals_);
      m["wall_rate"] = d(walls_, steps_);
      if (trials_ > 0) m["goal_rate"] = d(goals_, trials_);
    }
    if (is_paddle_kind(kind)) {
      if (hits_ + misses_ > 0) m["interception_rate"] = d(hits_, hits_ + misses_);
      if (misses_ > 0) {
        m["rally_length"] = d(rally_sum_, misses_);
        m["max_rally"] = static_cast<double>(max_rally_);
      }
    }
    if (kind == "breakout") m["bricks_broken"] = static_cast<double>(bricks_);
    if (kind == "pong_versus") {
      m["wins_1"] = static_cast<double>(wins_1_);
      m["wins_2"] = static_cast<double>(wins_2_);
      if (trials_ > 0) m["win_rate_1"] = d(wins_1_, trials_);
    }
    return m;
  }

 private:
  std::int64_t steps_ = 0, trials_ = 0, safe_ = 0, aversive_ = 0, captures_ = 0,
               capture_steps_ = 0, goals_ = 0, walls_ = 0, hits_ = 0, misses_ = 0,
               rally_ = 0, rally_sum_ = 0, max_rally_ = 0, bricks_ = 0, wins_1_ = 0,
               wins_2_ = 0;
};

// Per-trial success, judged from the events of one trial.
class TrialJudge {
 public:
  explicit TrialJudge(std::string kind) : kind_(std::move(kind)) {}
  void observe(const env::StepResult& r) {
    switch (r.event) {
      case env::Event::SafeStep:
      case env::Event::SafeReward: ++safe_; break;
      case env::Event::Aversive: ++aversive_; break;
      case env::Event::Capture:
      case env::Event::Goal:
      case env::Event::Cleared: goal_ = true; break;
      case env::Event::Hit: hit_ = true; break;
      default: break;
    }
    if (r.winner == 1) goal_ = true;
  }
  int finish() {
    int ok = 0;
    if (is_avoidance_kind(kind_)) {
      ok = safe_ > aversive_;
    } else if (kind_ == "pong" || kind_ == "breakout") {
      ok = hit_ || goal_;
    } else {
      ok = goal_;
    }
    safe_ = aversive_ = 0;
    goal_ = hit_ = false;
    return ok;
  }

 private:
  std::string kind_;
  int safe_ = 0, aversive_ = 0;
  bool goal_ = false, hit_ = false;
};

std::string format_percent(double p) {
  if (!std::isfinite(p)) return "+inf%";
  return fmt::format("{:+.1f}%", p);
}

}  // namespace

json plasticity_to_json(const std::string& label, const probe::PlasticityReport& r) {
  json j{{"label", label},
         {"probe_electrode", r.before.probe_electrode},
         {"record_group", r.before.record_group},
         {"before_slope", r.before.slope},
         {"after_slope", r.after.slope},
         {"before_ms", r.before.timestamp_ms},
         {"after_ms", r.after.timestamp_ms},
         {"classification", probe::to_string(r.classification)}};
  j["percent_change"] = std::isfinite(r.percent_change) ? json(r.percent_change) : json(nullptr);
  return j;
}

PlasticityEntry plasticity_from_json(const json& j) {
  PlasticityEntry e;
  e.label = j.value("label", "");
  auto& r = e.report;
  r.before.probe_electrode = j.at("probe_electrode").get<int>();
  r.after.probe_electrode = r.before.probe_electrode;
  r.before.record_group = j.at("record_group").get<std::string>();
  r.after.record_group = r.before.record_group;
  r.before.slope = j.at("before_slope").get<double>();
  r.after.slope = j.at("after_slope").get<double>();
  r.before.timestamp_ms = j.value("before_ms", 0.0);
  r.after.timestamp_ms = j.value("after_ms", 0.0);
  r.classification = probe::classification_from_string(j.at("classification").get<std::string>());
  r.percent_change = j.at("percent_change").is_null()
                         ? std::numeric_limits<double>::infinity()
                         : j.at("percent_change").get<double>();
  return e;
}

void ExperimentConfig::validate() const {
  const auto kinds = env::environment_kinds();
  if (std::find(kinds.begin(), kinds.end(), environment) == kinds.end()) {
    throw std::invalid_argument(fmt::format("unknown environment '{}'", environment));
  }
  network.validate();
  feedback.validate();
  if (run.trials < 0) throw std::invalid_argument("run.trials must be >= 0");
  if (run.block_size < 1) throw std::invalid_argument("run.block_size must be >= 1");
  if (run.trial_step_limit < 0) throw std::invalid_argument("run.trial_step_limit must be >= 0");
  if (run.max_steps < 1) throw std::invalid_argument("run.max_steps must be >= 1");
  if (layout.stim_per_group < 0 || layout.record_per_group < 1 ||
      layout.neurons_per_stim < 1 || layout.neurons_per_record < 1) {
    throw std::invalid_argument("layout sizes out of range");
  }
  if (!(codec.decode_window_ms > 0.0)) throw std::invalid_argument("codec.decode_window_ms must be > 0");
  if (protocol) {
    const auto errors = protocol::validate(*protocol);
    if (!errors.empty()) {
      throw std::invalid_argument("protocol: " + protocol::to_string(errors.front()));
    }
  }
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, "<root>", {"environment", "network", "layout", "codec", "feedback",
                           "protocol", "run", "probe", "output_dir"});
  ExperimentConfig c;
  if (j.contains("environment")) {
    const auto& e = j.at("environment");
    check_keys(e, "environment", {"kind", "params"});
    read(e, "kind", c.environment);
    if (e.contains("params")) c.environment_params = e.at("params");
  }
  c.codec = env::CodecConfig::for_kind(c.environment);
  if (c.environment == "avoidance1d" || c.environment == "avoidance_dynamic" ||
      c.environment == "avoidance2d" || c.environment == "maze") {
    c.run.trial_step_limit = 50;
  }
  if (j.contains("network")) j.at("network").get_to(c.network);
  if (j.contains("layout")) {
    const auto& l = j.at("layout");
    check_keys(l, "layout", {"stim_per_group", "record_per_group", "neurons_per_stim",
                             "neurons_per_record"});
    read(l, "stim_per_group", c.layout.stim_per_group);
    read(l, "record_per_group", c.layout.record_per_group);
    read(l, "neurons_per_stim", c.layout.neurons_per_stim);
    read(l, "neurons_per_record", c.layout.neurons_per_record);
  }
  if (j.contains("codec")) {
    json merged = c.codec;
    merged.merge_patch(j.at("codec"));
    merged.get_to(c.codec);
  }
  if (j.contains("feedback")) j.at("feedback").get_to(c.feedback);
  if (j.contains("run")) {
    const auto& r = j.at("run");
    check_keys(r, "run", {"trials", "block_size", "trial_step_limit", "max_steps", "seed",
                          "baseline_random", "feedback_plasticity"});
    read(r, "trials", c.run.trials);
    read(r, "block_size", c.run.block_size);
    read(r, "trial_step_limit", c.run.trial_step_limit);
    read(r, "max_steps", c.run.max_steps);
    read(r, "seed", c.run.seed);
    read(r, "baseline_random", c.run.baseline_random);
    read(r, "feedback_plasticity", c.run.feedback_plasticity);
  }
  if (j.contains("probe")) {
    const auto& p = j.at("probe");
    check_keys(p, "probe", {"enabled", "electrode", "group", "theta_percent", "amplitude_uA",
                            "pulse_duration_us"});
    read(p, "enabled", c.probe.enabled);
    if (p.contains("electrode") && !p.at("electrode").is_null()) {
      c.probe.electrode = p.at("electrode").get<int>();
    }
    read(p, "group", c.probe.group);
    read(p, "theta_percent", c.probe.theta_percent);
    read(p, "amplitude_uA", c.probe.pulse.amplitude_ua);
    read(p, "pulse_duration_us", c.probe.pulse.pulse_width_us);
  }
  read(j, "output_dir", c.output_dir);
  if (j.contains("protocol") && !j.at("protocol").is_null()) {
    const auto& p = j.at("protocol");
    std::string text;
    if (p.is_string()) {
      std::ifstream in(p.get<std::string>());
      if (!in) throw std::invalid_argument(fmt::format("cannot read protocol '{}'", p.get<std::string>()));
      std::stringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    } else {
      text = p.dump();
    }
    auto parsed = protocol::parse_protocol(text);
    if (!parsed.spec) {
      throw std::invalid_argument("protocol: " + protocol::to_string(parsed.errors.front()));
    }
    apply_protocol(c, *parsed.spec);
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["environment"] = {{"kind", c.environment}, {"params", c.environment_params}};
  j["network"] = c.network;
  j["layout"] = {{"stim_per_group", c.layout.stim_per_group},
                 {"record_per_group", c.layout.record_per_group},
                 {"neurons_per_stim", c.layout.neurons_per_stim},
                 {"neurons_per_record", c.layout.neurons_per_record}};
  j["codec"] = c.codec;
  j["feedback"] = c.feedback;
  j["protocol"] = c.protocol ? protocol::to_json(*c.protocol) : json(nullptr);
  j["run"] = {{"trials", c.run.trials},
              {"block_size", c.run.block_size},
              {"trial_step_limit", c.run.trial_step_limit},
              {"max_steps", c.run.max_steps},
              {"seed", c.run.seed},
              {"baseline_random", c.run.baseline_random},
              {"feedback_plasticity", c.run.feedback_plasticity}};
  j["probe"] = {{"enabled", c.probe.enabled},
                {"electrode", c.probe.electrode ? json(*c.probe.electrode) : json(nullptr)},
                {"group", c.probe.group},
                {"theta_percent", c.probe.theta_percent},
                {"amplitude_uA", c.probe.pulse.amplitude_ua},
                {"pulse_duration_us", c.probe.pulse.pulse_width_us}};
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(fmt::format("cannot read config '{}'", path.string()));
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(fmt::format("config '{}': {}", path.string(), e.what()));
  }
  return config_from_json(j);
}

void apply_protocol(ExperimentConfig& cfg, const protocol::ProtocolSpec& spec) {
  cfg.protocol = spec;
  cfg.feedback = protocol::feedback_config(spec, cfg.feedback);
  if (!spec.curriculum) return;
  const auto& cur = *spec.curriculum;
  if (cur.environment && *cur.environment != cfg.environment) {
    cfg.environment = *cur.environment;
    cfg.environment_params = json::object();
    cfg.codec = env::CodecConfig::for_kind(cfg.environment);
  }
  if (cur.trials_per_block) cfg.run.block_size = std::max(1, *cur.trials_per_block);
  const auto& kind = cfg.environment;
  const bool line_predator = kind == "predator_prey" || kind == "predator_adversary";
  if (cur.z) {
    if (line_predator || kind == "predator_prey2d") {
      cfg.environment_params["timeout_z"] = *cur.z;
    } else if (kind == "multi_organoid") {
      cfg.environment_params["round_limit"] = *cur.z;
    }
  }
  if (cur.prey_policy && line_predator) cfg.environment_params["prey_policy"] = *cur.prey_policy;
}

std::uint64_t derive_component_seed(std::uint64_t master, std::string_view label) {
  return derive_seed(master, label);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string primary_metric(std::string_view kind) {
  if (is_predator_kind(kind)) return "capture_rate";
  if (is_avoidance_kind(kind)) return "safe_zone_occupancy";
  if (kind == "maze") return "goal_rate";
  if (kind == "pong_versus") return "win_rate_1";
  return "interception_rate";
}

std::string curriculum_suggestion(double rate) {
  return rate > 0.7 ? "advance: make prey move predictably"
                    : "repeat with increased reward saliency";
}

mea::MeaLayout layout_for(const ExperimentConfig& cfg) {
  const int need = env::required_stim_per_group(cfg.environment, cfg.environment_params);
  const int stim = cfg.layout.stim_per_group > 0 ? cfg.layout.stim_per_group : std::max(8, need);
  return mea::MeaLayout::standard(stim, cfg.layout.record_per_group);
}

snn::Agent build_agent(const ExperimentConfig& cfg, const mea::MeaLayout& layout, int player) {
  const std::string suffix = player == 0 ? "" : fmt::format("/{}", player);
  snn::NetworkConfig net = cfg.network;
  net.seed = derive_seed(cfg.run.seed, "agent" + suffix);
  net.noise_seed = derive_seed(cfg.run.seed, "noise" + suffix);
  auto map = snn::ElectrodeMap::standard(layout, net, cfg.layout.neurons_per_stim,
                                         cfg.layout.neurons_per_record);
  mea::check_map(layout, map);
  return snn::Agent::create(net, std::move(map));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  auto& rec = result.record;
  rec.started_at = utc_now();
  rec.config_digest = sha256_hex(to_json(cfg).dump());
  rec.environment = cfg.environment;
  rec.seed = cfg.run.seed;
  rec.baseline_random = cfg.run.baseline_random;
  rec.primary_metric = primary_metric(cfg.environment);

  const auto layout = layout_for(cfg);
  auto environment = env::make_environment(cfg.environment, cfg.environment_params, layout,
                                           cfg.codec);
  const int players = environment->players();
  const std::uint64_t master = cfg.run.seed;

  std::vector<snn::Agent> agents;
  if (!cfg.run.baseline_random) {
    for (int p = 0; p < players; ++p) agents.push_back(build_agent(cfg, layout, p));
  }
  environment->reset(derive_seed(master, "env"));
  SplitMix64 punishment_rng(derive_seed(master, "punishment"));
  SplitMix64 policy_rng(derive_seed(master, "policy"));

  const bool probing = cfg.probe.enabled && !agents.empty();
  const mea::ElectrodeId probe_electrode =
      cfg.probe.electrode.value_or(layout.c().electrodes.front());
  const auto& probe_group = layout.group(cfg.probe.group);
  auto measure = [&] {
    return probe::measure_fepsp(agents.front(), layout, probe_electrode, probe_group,
                                cfg.probe.pulse);
  };
  std::optional<probe::PlasticityMeasurement> first_probe, last_probe;
  if (probing) first_probe = last_probe = measure();

  const auto motor = environment->motor_groups();
  const auto baseline_actions = environment->actions();
  OnlineTally total;
  OnlineTally block;
  TrialJudge judge(cfg.environment);
  int trials_done = 0;
  int steps_in_trial = 0;
  int block_index = 0;

  auto close_block = [&] {
    BlockResult b;
    b.block = block_index++;
    b.metrics = block.table(cfg.environment);
    if (probing) {
      auto now = measure();
      rec.plasticity.push_back({fmt::format("block {}", b.block),
                                probe::classify(*last_probe, now, cfg.probe.theta_percent)});
      b.fepsp_slope = now.slope;
      last_probe = std::move(now);
    }
    rec.blocks.push_back(std::move(b));
    block = OnlineTally{};
  };

  for (std::int64_t t = 0; t < cfg.run.max_steps && trials_done < cfg.run.trials; ++t) {
    environment->begin_step();
    const json state = environment->snapshot();
    std::vector<std::string> action_names;
    json counts = json::array();
    for (int p = 0; p < players; ++p) {
      env::Action a = env::Action::Stay;
      if (cfg.run.baseline_random) {
        a = baseline_actions[policy_rng() % baseline_actions.size()];
        counts.push_back(nullptr);
      } else {
        auto& agent = agents[static_cast<std::size_t>(p)];
        for (const auto& cmd : environment->sense(p)) mea::apply_stimulus(agent, layout, cmd);
        const auto windows = mea::record_groups(agent, motor, cfg.codec.decode_window_ms);
        a = environment->decode(windows);
        json c = json::array();
        for (const auto& w : windows) c.push_back(w.count);
        counts.push_back(std::move(c));
      }
      environment->act(p, a);
      action_names.push_back(codec::to_string(a));
    }
    auto r = environment->resolve();
    ++steps_in_trial;
    const bool limit_hit =
        cfg.run.trial_step_limit > 0 && steps_in_trial >= cfg.run.trial_step_limit;
    const bool trial_end = r.trial_end || limit_hit || environment->terminal();

    json fb = json::array();
    double settle_ms = 0.0;
    for (int p = 0; p < players; ++p) {
      const auto& ev = r.feedback[static_cast<std::size_t>(p)];
      if (!ev) {
        fb.push_back(nullptr);
        continue;
      }
      feedback::FeedbackEvent e = *ev;
      e.channel = e.kind == feedback::Kind::Reward ? cfg.feedback.reward_channel
                                                   : feedback::Channel::Electrical;
      fb.push_back(e);
      if (!agents.empty()) {
        const auto d = feedback::deliver(e, agents[static_cast<std::size_t>(p)], layout,
                                         punishment_rng, cfg.feedback);
        if (d.stimulus) settle_ms = std::max(settle_ms, d.stimulus->duration_ms());
      }
    }
    // Feedback stimuli play out before the next observation.
    if (settle_ms > 0.0) {
      for (auto& agent : agents) {
        const bool frozen = agent.plasticity_frozen();
        agent.freeze_plasticity(frozen || !cfg.run.feedback_plasticity);
        agent.run(settle_ms);
        agent.freeze_plasticity(frozen);
      }
    }

    ordered line;
    line["trial"] = trials_done;
    line["t"] = t;
    line["state"] = state;
    line["actions"] = action_names;
    line["counts"] = counts;
    line["feedback"] = fb;
    line["outcome"] = {{"event", env::to_string(r.event)},
                       {"trial_end", trial_end},
                       {"winner", r.winner}};
    result.events.push_back(line.dump());

    total.observe(r, steps_in_trial);
    block.observe(r, steps_in_trial);
    judge.observe(r);
    if (trial_end) {
      total.end_trial();
      block.end_trial();
      rec.trial_success.push_back(judge.finish());
      ++trials_done;
      steps_in_trial = 0;
      if (trials_done % cfg.run.block_size == 0) close_block();
    }
    if (environment->terminal()) break;
  }
  if (trials_done % cfg.run.block_size != 0 || (trials_done == 0 && !result.events.empty())) {
    close_block();
  }

  result.online_metrics = total.table(cfg.environment);
  rec.metrics = compute_metrics(result.events, cfg.environment);
  if (probing && first_probe && last_probe) {
    rec.overall_plasticity = probe::classify(*first_probe, *last_probe, cfg.probe.theta_percent);
  }
  double rate = 0.0;
  if (!rec.blocks.empty()) {
    const auto& last = rec.blocks.back().metrics;
    if (auto it = last.find(rec.primary_metric); it != last.end()) rate = it->second;
  }
  rec.curriculum_suggestion = curriculum_suggestion(rate);
  rec.finished_at = utc_now();
  if (!cfg.output_dir.empty()) write_outputs(result, cfg.output_dir);
  return result;
}

std::vector<ExperimentResult> run_experiments(const std::vector<ExperimentConfig>& cfgs,
                                              int threads) {
  std::vector<ExperimentResult> out(cfgs.size());
  std::vector<std::string> errors(cfgs.size());
  const auto n = static_cast<std::int64_t>(cfgs.size());
#pragma omp parallel for num_threads(std::max(1, threads)) schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = run_experiment(cfgs[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw std::runtime_error(fmt::format("experiment {}: {}", i, errors[i]));
    }
  }
  return out;
}

MetricTable compute_metrics(const std::vector<std::string>& events, std::string_view kind) {
  std::int64_t steps = 0, trials = 0, safe = 0, captures = 0, capture_steps = 0, goals = 0,
               walls = 0, hits = 0, misses = 0, rally = 0, rally_sum = 0, max_rally = 0,
               bricks = 0, wins_1 = 0, wins_2 = 0, in_trial = 0;
  std::int64_t expected_t = 0;
  for (const auto& text : events) {
    const json line = json::parse(text, nullptr, false);
    if (line.is_discarded() || !line.is_object() || !line.contains("outcome") ||
        !line.contains("t")) {
      throw std::invalid_argument(fmt::format("malformed event log line {}", steps + 1));
    }
    if (line.at("t").get<std::int64_t>() != expected_t++) {
      throw std::invalid_argument(fmt::format("event log skips at line {}", steps + 1));
    }
    const auto& o = line.at("outcome");
    const auto ev = o.at("event").get<std::string>();
    ++steps;
    ++in_trial;
    if (ev == "safe_step" || ev == "safe_reward") ++safe;
    if (ev == "capture") {
      ++captures;
      capture_steps += in_trial;
    }
    if (ev == "goal") ++goals;
    if (ev == "wall") ++walls;
    if (ev == "hit") {
      ++hits;
      ++rally;
    }
    if (ev == "miss") {
      ++misses;
      rally_sum += rally;
      if (rally > max_rally) max_rally = rally;
      rally = 0;
    }
    if (ev == "brick" || ev == "cleared") ++bricks;
    const int winner = o.at("winner").get<int>();
    if (winner == 1) ++wins_1;
    if (winner == 2) ++wins_2;
    if (o.at("trial_end").get<bool>()) {
      ++trials;
      in_trial = 0;
    }
  }
  MetricTable m;
  if (steps == 0) return m;
  auto ratio = [](std::int64_t a, std::int64_t b) {
    return static_cast<double>(a) / static_cast<double>(b);
  };
  m["steps"] = static_cast<double>(steps);
  m["trials"] = static_cast<double>(trials);
  const bool predator = kind == "predator_prey" || kind == "predator_adversary" ||
                        kind == "predator_prey2d" || kind == "multi_organoid";
  if (predator && trials > 0) m["capture_rate"] = ratio(captures, trials);
  if (predator && captures > 0) m["mean_steps_to_capture"] = ratio(capture_steps, captures);
  if (kind == "avoidance1d" || kind == "avoidance_dynamic" || kind == "avoidance2d") {
    m["safe_zone_occupancy"] = ratio(safe, steps);
  }
  if (kind == "maze") {
    m["goals"] = static_cast<double>(goals);
    m["wall_rate"] = ratio(walls, steps);
    if (trials > 0) m["goal_rate"] = ratio(goals, trials);
  }
  if (kind == "pong" || kind == "breakout" || kind == "pong_versus") {
    if (hits + misses > 0) m["interception_rate"] = ratio(hits, hits + misses);
    if (misses > 0) {
      m["rally_length"] = ratio(rally_sum, misses);
      m["max_rally"] = static_cast<double>(max_rally);
    }
  }
  if (kind == "breakout") m["bricks_broken"] = static_cast<double>(bricks);
  if (kind == "pong_versus") {
    m["wins_1"] = static_cast<double>(wins_1);
    m["wins_2"] = static_cast<double>(wins_2);
    if (trials > 0) m["win_rate_1"] = ratio(wins_1, trials);
  }
  return m;
}

MetricTable compute_metrics(std::istream& in, std::string_view kind) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return compute_metrics(lines, kind);
}

json to_json(const ExperimentRecord& r) {
  json j;
  j["config_digest"] = r.config_digest;
  j["environment"] = r.environment;
  j["seed"] = r.seed;
  j["baseline_random"] = r.baseline_random;
  j["metrics"] = r.metrics;
  json blocks = json::array();
  for (const auto& b : r.blocks) {
    blocks.push_back({{"block", b.block},
                      {"metrics", b.metrics},
                      {"fepsp_slope", b.fepsp_slope ? json(*b.fepsp_slope) : json(nullptr)}});
  }
  j["blocks"] = blocks;
  j["trial_success"] = r.trial_success;
  json plast = json::array();
  for (const auto& p : r.plasticity) plast.push_back(plasticity_to_json(p.label, p.report));
  j["plasticity"] = plast;
  j["overall_plasticity"] =
      r.overall_plasticity ? plasticity_to_json("overall", *r.overall_plasticity) : json(nullptr);
  j["primary_metric"] = r.primary_metric;
  j["curriculum_suggestion"] = r.curriculum_suggestion;
  j["event_log"] = r.event_log;
  j["started_at"] = r.started_at;
  j["finished_at"] = r.finished_at;
  return j;
}

ExperimentRecord record_from_json(const json& j) {
  for (const char* key : {"config_digest", "environment", "seed", "metrics", "blocks",
                          "primary_metric", "curriculum_suggestion"}) {
    if (!j.contains(key)) {
      throw std::invalid_argument(fmt::format("record is missing '{}'", key));
    }
  }
  ExperimentRecord r;
  r.config_digest = j.at("config_digest").get<std::string>();
  r.environment = j.at("environment").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.baseline_random = j.value("baseline_random", false);
  r.metrics = j.at("metrics").get<MetricTable>();
  for (const auto& b : j.at("blocks")) {
    BlockResult br;
    br.block = b.at("block").get<int>();
    br.metrics = b.at("metrics").get<MetricTable>();
    if (b.contains("fepsp_slope") && !b.at("fepsp_slope").is_null()) {
      br.fepsp_slope = b.at("fepsp_slope").get<double>();
    }
    r.blocks.push_back(std::move(br));
  }
  if (j.contains("trial_success")) r.trial_success = j.at("trial_success").get<std::vector<int>>();
  if (j.contains("plasticity")) {
    for (const auto& p : j.at("plasticity")) r.plasticity.push_back(plasticity_from_json(p));
  }
  if (j.contains("overall_plasticity") && !j.at("overall_plasticity").is_null()) {
    r.overall_plasticity = plasticity_from_json(j.at("overall_plasticity")).report;
  }
  r.primary_metric = j.at("primary_metric").get<std::string>();
  r.curriculum_suggestion = j.at("curriculum_suggestion").get<std::string>();
  r.event_log = j.value("event_log", "events.jsonl");
  r.started_at = j.value("started_at", "");
  r.finished_at = j.value("finished_at", "");
  return r;
}

std::string summary(const ExperimentRecord& r) {
  std::string out = fmt::format("environment: {}\nseed: {}\n", r.environment, r.seed);
  if (r.baseline_random) out += "policy: random baseline\n";
  for (const auto& [name, value] : r.metrics) out += fmt::format("{}: {:g}\n", name, value);
  for (const auto& b : r.blocks) {
    auto it = b.metrics.find(r.primary_metric);
    out += fmt::format("block {}: {} {}\n", b.block, r.primary_metric,
                       it == b.metrics.end() ? std::string("n/a") : fmt::format("{:.3f}", it->second));
  }
  if (r.overall_plasticity) {
    out += fmt::format("plasticity: {} ({})\n",
                       probe::to_string(r.overall_plasticity->classification),
                       format_percent(r.overall_plasticity->percent_change));
  }
  out += fmt::format("curriculum: {}\n", r.curriculum_suggestion);
  return out;
}

void write_metrics_csv(std::ostream& os, const ExperimentRecord& r) {
  os << "block,metric,value,fepsp_slope\n";
  for (const auto& b : r.blocks) {
    const std::string slope = b.fepsp_slope ? fmt::format("{}", *b.fepsp_slope) : "";
    for (const auto& [name, value] : b.metrics) {
      os << fmt::format("{},{},{},{}\n", b.block, name, value, slope);
    }
  }
}

std::vector<CsvRow> read_metrics_csv(std::istream& is) {
  std::vector<CsvRow> rows;
  std::string line;
  if (!std::getline(is, line) || line != "block,metric,value,fepsp_slope") {
    throw std::invalid_argument("metrics CSV header missing");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 4) throw std::invalid_argument(fmt::format("bad CSV row '{}'", line));
    CsvRow row;
    row.block = std::stoi(cells[0]);
    row.metric = cells[1];
    row.value = std::strtod(cells[2].c_str(), nullptr);
    if (!cells[3].empty()) row.fepsp_slope = std::strtod(cells[3].c_str(), nullptr);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw std::runtime_error(fmt::format("cannot write {}", (dir / name).string()));
    return os;
  };
  {
    auto os = open("events.jsonl");
    for (const auto& line : result.events) os << line << '\n';
  }
  {
    auto os = open("record.json");
    os << to_json(result.record).dump(2) << '\n';
  }
  {
    auto os = open("metrics.csv");
    write_metrics_csv(os, result.record);
  }
  {
    auto os = open("plasticity.csv");
    probe::write_csv_header(os);
    for (const auto& p : result.record.plasticity) probe::write_csv_row(os, p.label, p.report);
    if (result.record.overall_plasticity) {
      probe::write_csv_row(os, "overall", *result.record.overall_plasticity);
    }
  }
}

}  // namespace orgloop::harness
