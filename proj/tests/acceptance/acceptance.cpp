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

// Acceptance checks. `acceptance N` runs criterion N, `acceptance` runs all.
// Each criterion prints one line "criterion N PASS|FAIL: details" and the
// exit status is nonzero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "orgloop/environments.hpp"
#include "orgloop/feedback.hpp"
#include "orgloop/harness.hpp"
#include "orgloop/mea.hpp"
#include "orgloop/plasticity.hpp"
#include "orgloop/protocol.hpp"
#include "reference.hpp"

namespace orgloop::acceptance {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// Pinned thresholds.
constexpr double kOracleBudgetS = 1.0;
constexpr int kEntropySeeds = 100;
constexpr double kEntropyGapBits = 1.0;
constexpr double kEntropyBudgetS = 5.0;
constexpr double kConformanceBudgetS = 1.0;
constexpr int kMinMutations = 6;
constexpr int kLearningSeeds = 20;
constexpr int kLearningTrials = 200;
constexpr int kLearningWindow = 50;
constexpr int kPreyTimeout = 15;
constexpr double kLearningAlpha = 0.05;
constexpr double kLearningBudgetS = 60.0;
constexpr double kLtpPercent = 5.0;
constexpr int kPairings = 100;
constexpr double kPlasticityBudgetS = 10.0;
constexpr int kServes = 100;
constexpr int kBounces = 10'000;
constexpr double kPongBudgetS = 5.0;
constexpr int kMetaIterations = 10;
constexpr double kMetaBudgetS = 60.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ------------------------------------------------------------ criterion 1

// One line per transition case; the log compared for determinism.
std::vector<std::string> oracle_log(int& mismatches) {
  using codec::Action;
  constexpr std::array<Action, 3> actions{Action::Left, Action::Right, Action::Stay};
  std::vector<std::string> log;
  mismatches = 0;
  auto kind_name = [](const std::optional<feedback::Kind>& k) {
    return k ? feedback::to_string(*k) : std::string("none");
  };
  const env::Avoidance1DParams ap;
  for (int pos = 1; pos <= 8; ++pos) {
    for (auto a : actions) {
      env::Avoidance1DState s;
      s.position = pos;
      const auto t = env::avoidance1d_step(s, a, ap);
      const auto r = reference::avoidance(pos, 0, a, ap.safe_duration);
      const std::optional<feedback::Kind> k =
          t.feedback ? std::optional(t.feedback->kind) : std::nullopt;
      const double m = t.feedback ? t.feedback->magnitude : 0.0;
      if (s.position != r.position || s.safe_zone_timer != r.timer || k != r.kind ||
          (k && m != r.magnitude)) {
        ++mismatches;
      }
      log.push_back(fmt::format("avoid {} {} -> {} {} {} {}", pos, codec::to_string(a),
                                s.position, s.safe_zone_timer, kind_name(k), m));
    }
  }
  const env::PredatorPreyParams pp;
  int index = 0;
  for (int pred = 1; pred <= 8; ++pred) {
    for (int prey = 1; prey <= 8; ++prey) {
      for (auto a : actions) {
        env::PredatorPreyState s;
        s.predator = pred;
        s.prey = prey;
        s.time_since_reward = 0;
        s.rng = SplitMix64(static_cast<std::uint64_t>(1000 + index++));
        const auto r = reference::chase(pred, prey, 0, a, pp.timeout_z, s.rng);
        const auto t = env::predator_prey_step(s, a, pp);
        const std::optional<feedback::Kind> k =
            t.feedback ? std::optional(t.feedback->kind) : std::nullopt;
        if (s.predator != r.predator || s.prey != r.prey || s.time_since_reward != r.timer ||
            k != r.kind || t.trial_end != r.kind.has_value()) {
          ++mismatches;
        }
        log.push_back(fmt::format("chase {} {} {} -> {} {} {} {}", pred, prey,
                                  codec::to_string(a), s.predator, s.prey, s.time_since_reward,
                                  kind_name(k)));
      }
    }
  }
  return log;
}

Verdict criterion_1() {
  const auto t0 = Clock::now();
  int mismatches = 0;
  const auto log = oracle_log(mismatches);
  const double secs = seconds_since(t0);
  const bool pass = log.size() == 24 + 192 && mismatches == 0 && secs < kOracleBudgetS;
  return {pass, fmt::format("{} cases (24 avoidance, 192 predator-prey), {} mismatches, {:.3f} s",
                            log.size(), mismatches, secs)};
}

// ------------------------------------------------------------ criterion 2

Verdict criterion_2() {
  const auto t0 = Clock::now();
  const auto stim = mea::MeaLayout::standard().stimulation_union();
  feedback::FeedbackConfig fb;
  fb.reward_duration_ms = 1000.0;
  fb.punishment_duration_ms = 1000.0;
  fb.punishment_amplitude_ua = fb.reward_amplitude_ua;
  const double reward = mea::shannon_entropy(
      mea::render_waveform(feedback::make_reward(stim, fb), mea::kRenderDtMs), mea::kEntropyBins);
  double min_gap = std::numeric_limits<double>::infinity(), sum_gap = 0.0;
  for (int seed = 1; seed <= kEntropySeeds; ++seed) {
    SplitMix64 rng(static_cast<std::uint64_t>(seed));
    const auto cmd = feedback::make_punishment(stim, 1.0, rng, fb);
    const double noise = mea::shannon_entropy(mea::render_waveform(cmd, mea::kRenderDtMs),
                                              mea::kEntropyBins);
    const double gap = noise - reward;
    min_gap = std::min(min_gap, gap);
    sum_gap += gap;
  }
  const double secs = seconds_since(t0);
  const bool pass = min_gap >= kEntropyGapBits && secs < kEntropyBudgetS;
  return {pass, fmt::format("reward {:.3f} bits, gap min {:.3f} mean {:.3f} bits over {} seeds "
                            "(need >= {:.1f}), {:.3f} s",
                            reward, min_gap, sum_gap / kEntropySeeds, kEntropySeeds,
                            kEntropyGapBits, secs)};
}

// ------------------------------------------------------------ criterion 3

std::string example_protocol() {
  return R"({
  "reward_modality": "electrical",
  "electrical_params": {
    "shape": "tri-phasic",
    "amplitude_uA": 8.5,
    "pulse_duration_us": 150,
    "frequency_hz": 30
  },
  "dopamine_params": null,
  "punishment_params": {
    "shape": "bi-phasic",
    "amplitude_uA": 10.0,
    "pulse_duration_us": 200
  }
})";
}

std::vector<protocol::ValidationError> all_errors(const std::string& text) {
  auto parsed = protocol::parse_protocol(text);
  if (!parsed.spec) return parsed.errors;
  return protocol::validate(*parsed.spec);
}

Verdict criterion_3() {
  const auto t0 = Clock::now();
  const bool example_ok = all_errors(example_protocol()).empty();
  struct Mutation {
    const char* pointer;
    json value;
    const char* field;
  };
  const std::vector<Mutation> mutations = {
      {"/electrical_params/amplitude_uA", 25.0, "electrical_params.amplitude_uA"},
      {"/electrical_params/amplitude_uA", 0.0, "electrical_params.amplitude_uA"},
      {"/electrical_params/pulse_duration_us", 501, "electrical_params.pulse_duration_us"},
      {"/electrical_params/pulse_duration_us", 49, "electrical_params.pulse_duration_us"},
      {"/electrical_params/frequency_hz", 200.5, "electrical_params.frequency_hz"},
      {"/electrical_params/frequency_hz", 0.05, "electrical_params.frequency_hz"},
      {"/punishment_params/amplitude_uA", 20.1, "punishment_params.amplitude_uA"},
      {"/punishment_params/pulse_duration_us", 1000, "punishment_params.pulse_duration_us"},
  };
  int good = 0;
  std::string first_bad;
  for (const auto& m : mutations) {
    auto doc = json::parse(example_protocol());
    doc[json::json_pointer(m.pointer)] = m.value;
    const auto errors = all_errors(doc.dump());
    if (errors.size() == 1 && errors[0].path == m.field &&
        protocol::to_string(errors[0]).find(m.field) != std::string::npos) {
      ++good;
    } else if (first_bad.empty()) {
      first_bad = fmt::format(", {} = {} gave {} errors", m.pointer, m.value.dump(), errors.size());
    }
  }
  // The same checks on the dopamine branch.
  auto dopamine = json::parse(example_protocol());
  dopamine["reward_modality"] = "dopamine_uncaging";
  dopamine["electrical_params"] = nullptr;
  dopamine["dopamine_params"] = {{"uncaging_duration_ms", 50}};
  const auto d = all_errors(dopamine.dump());
  const bool dopamine_ok = d.size() == 1 && d[0].path == "dopamine_params.uncaging_duration_ms";
  const int total = static_cast<int>(mutations.size());
  const double secs = seconds_since(t0);
  const bool pass = example_ok && dopamine_ok && good == total && total >= kMinMutations &&
                    secs < kConformanceBudgetS;
  return {pass, fmt::format("example {}, {}/{} mutations give one named error{}, uncaging 50 ms "
                            "{}, {:.3f} s",
                            example_ok ? "ok" : "rejected", good, total, first_bad,
                            dopamine_ok ? "rejected" : "not rejected as expected", secs)};
}

// ------------------------------------------------------------ criterion 4

harness::ExperimentConfig learning_config(std::uint64_t seed, bool baseline) {
  harness::ExperimentConfig cfg;
  cfg.environment = "predator_prey";
  cfg.environment_params = {{"timeout_z", kPreyTimeout}};
  cfg.run.trials = kLearningTrials;
  cfg.run.block_size = kLearningWindow;
  cfg.run.seed = seed;
  cfg.run.baseline_random = baseline;
  cfg.probe.enabled = false;
  return cfg;
}

double window_mean(const std::vector<int>& v, std::size_t begin, std::size_t end) {
  return static_cast<double>(std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(begin),
                                             v.begin() + static_cast<std::ptrdiff_t>(end), 0)) /
         static_cast<double>(end - begin);
}

// One-sided paired t-test of mean(d) > 0.
double one_sided_p(const std::vector<double>& d) {
  const double n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) return mean > 0.0 ? 0.0 : 1.0;
  const boost::math::students_t dist(n - 1.0);
  return boost::math::cdf(boost::math::complement(dist, mean / (sd / std::sqrt(n))));
}

struct LearningRun {
  std::vector<std::string> agent_events, baseline_events;
  double first = 0.0, last = 0.0, baseline = 0.0;
};

LearningRun learning_run(std::uint64_t seed) {
  LearningRun out;
  auto agent = harness::run_experiment(learning_config(seed, false));
  auto base = harness::run_experiment(learning_config(seed, true));
  const auto& v = agent.record.trial_success;
  const auto& b = base.record.trial_success;
  if (v.size() != static_cast<std::size_t>(kLearningTrials) || b.size() != v.size()) {
    throw std::runtime_error(fmt::format("seed {} finished {} trials", seed, v.size()));
  }
  out.first = window_mean(v, 0, kLearningWindow);
  out.last = window_mean(v, v.size() - kLearningWindow, v.size());
  out.baseline = window_mean(b, b.size() - kLearningWindow, b.size());
  out.agent_events = std::move(agent.events);
  out.baseline_events = std::move(base.events);
  return out;
}

Verdict criterion_4() {
  const auto t0 = Clock::now();
  std::vector<double> vs_first, vs_baseline;
  double first = 0.0, last = 0.0, baseline = 0.0;
  for (int s = 1; s <= kLearningSeeds; ++s) {
    const auto r = learning_run(static_cast<std::uint64_t>(s));
    vs_first.push_back(r.last - r.first);
    vs_baseline.push_back(r.last - r.baseline);
    first += r.first;
    last += r.last;
    baseline += r.baseline;
  }
  const double p_first = one_sided_p(vs_first);
  const double p_baseline = one_sided_p(vs_baseline);
  const double secs = seconds_since(t0);
  const bool pass = p_first < kLearningAlpha && p_baseline < kLearningAlpha &&
                    secs < kLearningBudgetS;
  return {pass, fmt::format("capture rate first-{0} {1:.3f}, last-{0} {2:.3f}, random baseline "
                            "{3:.3f} over {4} seeds; p(last > first) = {5:.3f}, p(last > "
                            "baseline) = {6:.3f} (need < {7}), {8:.1f} s",
                            kLearningWindow, first / kLearningSeeds, last / kLearningSeeds,
                            baseline / kLearningSeeds, kLearningSeeds, p_first, p_baseline,
                            kLearningAlpha, secs)};
}

// ------------------------------------------------------------ criterion 5

Verdict criterion_5() {
  const auto t0 = Clock::now();
  const auto layout = mea::MeaLayout::standard();
  snn::NetworkConfig cfg;
  cfg.seed = 1;
  auto agent = snn::Agent::create(cfg, snn::ElectrodeMap::standard(layout, cfg));
  const auto probe_electrode = layout.c().electrodes.front();
  bool probe_neutral = true;
  auto measure = [&] {
    const std::vector<double> w(agent.weights().begin(), agent.weights().end());
    const auto e = agent.eligibility();
    auto m = probe::measure_fepsp(agent, layout, probe_electrode, layout.a());
    probe_neutral = probe_neutral &&
                    std::equal(w.begin(), w.end(), agent.weights().begin(),
                               agent.weights().end()) &&
                    e == agent.eligibility();
    return m;
  };
  const auto baseline = measure();
  SplitMix64 rng(5);
  const feedback::FeedbackConfig fb;
  probe::PairingConfig reward;
  reward.pairings = kPairings;
  reward.offset_ms = 5.0;
  reward.outcome = feedback::Kind::Reward;
  probe::run_pairing_session(agent, layout, probe_electrode, layout.a(), reward, fb, rng);
  const auto after_reward = measure();
  probe::PairingConfig punish = reward;
  punish.offset_ms = -5.0;
  punish.outcome = feedback::Kind::Punishment;
  probe::run_pairing_session(agent, layout, probe_electrode, layout.a(), punish, fb, rng);
  const auto after_punish = measure();
  const auto ltp = probe::classify(baseline, after_reward);
  const auto ltd = probe::classify(after_reward, after_punish);
  const double secs = seconds_since(t0);
  const bool pass = ltp.classification == probe::Classification::LTP &&
                    ltp.percent_change >= kLtpPercent && ltd.percent_change <= 0.0 &&
                    probe_neutral && secs < kPlasticityBudgetS;
  return {pass, fmt::format("slope {:.4g} -> {:.4g} after reward pairing ({:+.1f}%, {}), -> "
                            "{:.4g} after punishment session ({:+.1f}%), probe weight change {}, "
                            "{:.2f} s",
                            baseline.slope, after_reward.slope, ltp.percent_change,
                            probe::to_string(ltp.classification), after_punish.slope,
                            ltd.percent_change, probe_neutral ? "0" : "nonzero", secs)};
}

// ------------------------------------------------------------ criterion 6

// Moves the paddle toward where the ball will be after the next advance.
codec::Action track(const env::PongState& s, const env::PongParams& p) {
  env::PongState next = s;
  env::ball_advance(next, env::Court::Pong, p);
  const double d = next.by - s.paddle;
  return d > 0.5 ? codec::Action::Up : (d < -0.5 ? codec::Action::Down : codec::Action::Stay);
}

Verdict criterion_6() {
  const auto t0 = Clock::now();
  const env::PongParams p;
  int hits = 0, misses = 0;
  for (int serve = 1; serve <= kServes; ++serve) {
    auto s = env::make_pong(env::Court::Pong, p, static_cast<std::uint64_t>(serve));
    for (int i = 0; i < 1000; ++i) {
      const auto t = env::pong_step(s, track(s, p), p);
      if (t.event == env::Event::Hit) {
        ++hits;
        break;
      }
      if (t.event == env::Event::Miss) {
        ++misses;
        break;
      }
    }
  }
  env::PongParams wide = p;
  wide.half_length = wide.height / 2.0;  // paddle spans the whole wall
  auto s = env::make_pong(env::Court::Pong, wide, 1);
  s.bx = 3.0;
  s.by = 5.0;
  s.vx = 1.0;
  s.vy = 1.0;
  s.paddle = wide.height / 2.0;
  int bounces = 0, speed_errors = 0;
  while (bounces < kBounces) {
    const double vx = s.vx, vy = s.vy;
    env::pong_step(s, codec::Action::Stay, wide);
    bounces += (s.vx != vx) + (s.vy != vy);
    if (s.vx * s.vx + s.vy * s.vy != 2.0) ++speed_errors;
  }
  const double secs = seconds_since(t0);
  const bool pass = hits == kServes && speed_errors == 0 && secs < kPongBudgetS;
  return {pass, fmt::format("{}/{} serves intercepted ({} missed), {} bounces with {} speed "
                            "deviations, {:.3f} s",
                            hits, kServes, misses, bounces, speed_errors, secs)};
}

// ------------------------------------------------------------ criterion 7

json meta_responses() {
  auto valid = [](double amplitude, double frequency, int pulse) {
    return json{{"reward_modality", "electrical"},
                {"electrical_params",
                 {{"shape", "bi-phasic"},
                  {"amplitude_uA", amplitude},
                  {"pulse_duration_us", pulse},
                  {"frequency_hz", frequency}}},
                {"dopamine_params", nullptr},
                {"punishment_params",
                 {{"shape", "bi-phasic"}, {"amplitude_uA", 10.0}, {"pulse_duration_us", 200}}}};
  };
  json out = json::array();
  out.push_back(valid(2.0, 20.0, 200));
  out.push_back(valid(5.0, 10.0, 150));
  out.push_back("{\"reward_modality\": \"electrical\", \"electrical_params\": {");
  out.push_back(valid(8.5, 30.0, 150));
  out.push_back(valid(12.0, 40.0, 100));
  out.push_back(valid(4.0, 60.0, 250));
  out.push_back(valid(25.0, 30.0, 150));
  out.push_back(valid(15.0, 5.0, 300));
  out.push_back(valid(1.0, 100.0, 80));
  out.push_back(valid(10.0, 4.0, 200));
  return out;
}

protocol::MetaLoopConfig meta_config() {
  protocol::MetaLoopConfig cfg;
  cfg.experiment.environment = "predator_prey";
  cfg.experiment.environment_params = {{"timeout_z", kPreyTimeout}};
  cfg.experiment.run.block_size = kLearningWindow;
  cfg.experiment.run.seed = 7;
  cfg.blocks = 1;
  cfg.iterations = kMetaIterations;
  cfg.refine_every = 5;
  return cfg;
}

protocol::MetaLoopResult meta_run(bool& aborted, std::string& abort_reason) {
  aborted = false;
  try {
    auto stub = protocol::StubGenerator::from_json(meta_responses());
    return protocol::meta_loop(meta_config(), stub);
  } catch (const std::exception& e) {
    aborted = true;
    abort_reason = e.what();
    return {};
  }
}

Verdict criterion_7() {
  const auto t0 = Clock::now();
  bool aborted = false;
  std::string reason;
  const auto r = meta_run(aborted, reason);
  if (aborted) return {false, fmt::format("loop aborted: {}", reason)};
  int failures = 0, runs = 0;
  const protocol::DatasetRecord* best = nullptr;
  for (const auto& rec : r.dataset) {
    if (rec.status == protocol::Status::Executed) {
      ++runs;
      if (!best || *rec.primary_value > *best->primary_value) best = &rec;
    } else {
      ++failures;
    }
  }
  bool cites_best = false;
  if (best) {
    const auto section = r.final_template.find("Successful examples:\nExample 1 ");
    const auto citation = fmt::format("Example 1 (iteration {}, ", best->iteration);
    cites_best = section != std::string::npos &&
                 r.final_template.find(citation) != std::string::npos &&
                 r.final_template.find(protocol::serialize(*best->protocol)) != std::string::npos;
  }
  const double secs = seconds_since(t0);
  const bool pass = r.dataset.size() == static_cast<std::size_t>(kMetaIterations) &&
                    failures == 2 && runs == 8 && cites_best && secs < kMetaBudgetS;
  return {pass, fmt::format("{} records: {} failures, {} runs; best run iteration {} {}; {} "
                            "refinements, {:.2f} s",
                            r.dataset.size(), failures, runs, best ? best->iteration : 0,
                            cites_best ? "cited in the few-shot section" : "not cited",
                            r.refinements, secs)};
}

// ------------------------------------------------------------ criterion 8

Verdict criterion_8() {
  const auto t0 = Clock::now();
  std::vector<std::string> diverged;
  int m1 = 0, m2 = 0;
  if (oracle_log(m1) != oracle_log(m2)) diverged.push_back("oracle cases");
  std::size_t learning_lines = 0;
  for (int s = 1; s <= kLearningSeeds; ++s) {
    const auto a = learning_run(static_cast<std::uint64_t>(s));
    const auto b = learning_run(static_cast<std::uint64_t>(s));
    if (a.agent_events != b.agent_events || a.baseline_events != b.baseline_events) {
      diverged.push_back(fmt::format("learning seed {}", s));
    }
    learning_lines += a.agent_events.size() + a.baseline_events.size();
  }
  bool aborted_a = false, aborted_b = false;
  std::string reason;
  const auto ma = meta_run(aborted_a, reason);
  const auto mb = meta_run(aborted_b, reason);
  auto dataset_text = [](const protocol::MetaLoopResult& r) {
    std::string out;
    for (const auto& rec : r.dataset) out += protocol::to_json(rec).dump() + "\n";
    return out;
  };
  if (aborted_a || aborted_b || ma.events != mb.events || dataset_text(ma) != dataset_text(mb)) {
    diverged.push_back("meta loop");
  }
  const double secs = seconds_since(t0);
  std::string list;
  for (const auto& d : diverged) list += (list.empty() ? "" : ", ") + d;
  return {diverged.empty(),
          fmt::format("oracle, learning ({} lines per execution) and meta-loop logs {}, {:.1f} s",
                      learning_lines, diverged.empty() ? "byte-identical" : "differ: " + list,
                      secs)};
}

}  // namespace
}  // namespace orgloop::acceptance

int main(int argc, char** argv) {
  using namespace orgloop::acceptance;
  const std::vector<std::function<Verdict()>> criteria = {
      criterion_1, criterion_2, criterion_3, criterion_4,
      criterion_5, criterion_6, criterion_7, criterion_8};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      fmt::print(stderr, "unknown criterion '{}'\n", argv[i]);
      return 2;
    }
    selected.push_back(n);
  }
  if (selected.empty()) {
    for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) selected.push_back(n);
  }
  int failed = 0;
  for (int n : selected) {
    Verdict v;
    try {
      v = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      v = {false, fmt::format("error: {}", e.what())};
    }
    fmt::print("criterion {} {}: {}\n", n, v.pass ? "PASS" : "FAIL", v.detail);
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
