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

// Closed-loop wrappers around the step functions, and the factory.

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "orgloop/environments.hpp"

namespace orgloop::env {
namespace {

using nlohmann::json;

// Rejects keys outside `allowed` so that a typo in a config is an error.
void check_keys(const json& params, std::string_view kind,
                std::initializer_list<std::string_view> allowed) {
  if (params.is_null()) return;
  if (!params.is_object()) {
    throw std::invalid_argument(fmt::format("{}: params must be an object", kind));
  }
  for (const auto& [key, value] : params.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw std::invalid_argument(fmt::format("{}: unknown parameter '{}'", kind, key));
    }
  }
}

template <typename T>
T get_or(const json& params, const char* key, T fallback) {
  if (params.is_null() || !params.contains(key)) return fallback;
  return params.at(key).get<T>();
}

std::vector<Action> line_actions() { return {Action::Left, Action::Right, Action::Stay}; }
std::vector<Action> grid_actions() {
  return {Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay};
}

mea::StimulusCommand spatial(int pos, const mea::ElectrodeGroup& g, const CodecConfig& c,
                             std::optional<double> frequency = {}) {
  codec::PulseParams p = c.spatial;
  if (frequency) p.frequency_hz = *frequency;
  return codec::encode_position_spatial(pos, g, p);
}

// --------------------------------------------------------------- avoidance

class Avoidance1DEnv final : public Environment {
 public:
  Avoidance1DEnv(std::string kind, Avoidance1DParams p, mea::MeaLayout layout,
                 CodecConfig codec)
      : Environment(std::move(layout), std::move(codec)),
        kind_(std::move(kind)),
        p_(p) {}

  std::string kind() const override { return kind_; }
  void reset(std::uint64_t seed) override {
    s_ = Avoidance1DState{};
    s_.rng = SplitMix64(seed);
    s_.boundary = p_.boundary;
    s_.position = std::uniform_int_distribution<int>(1, std::max(1, p_.boundary))(s_.rng);
  }
  std::vector<mea::StimulusCommand> sense(int) const override {
    return {spatial(s_.position, layout_.c(), codec_),
            spatial(s_.position, layout_.d(), codec_)};
  }
  std::vector<Action> actions() const override { return line_actions(); }
  void act(int, Action a) override { action_ = a; }
  StepResult resolve() override {
    const auto t = avoidance1d_step(s_, action_, p_);
    return {{t.feedback}, t.event, t.trial_end, 0};
  }
  json snapshot() const override {
    return {{"position", s_.position},
            {"safe_zone_timer", s_.safe_zone_timer},
            {"boundary", s_.boundary},
            {"timestep", s_.timestep}};
  }

 private:
  std::string kind_;
  Avoidance1DParams p_;
  Avoidance1DState s_;
  Action action_ = Action::Stay;
};

class Grid2DBase : public Environment {
 protected:
  using Environment::Environment;

  std::vector<mea::StimulusCommand> encode_cell(int x, int y, int size,
                                                const mea::ElectrodeGroup& first,
                                                const mea::ElectrodeGroup& second) const {
    return codec::encode_xy(x, y, size, first, second, codec_.xy_mode, codec_.freq_mod,
                            codec_.spatial);
  }

 public:
  std::vector<mea::ElectrodeGroup> motor_groups() const override {
    return layout_.four_way_groups();
  }
  Action decode(std::span<const mea::SpikeWindow> w) const override {
    if (w.size() != 4) throw std::invalid_argument("four-way decoding needs 4 windows");
    return codec::decode_4way(w[0], w[1], w[2], w[3]);
  }
  std::vector<Action> actions() const override { return grid_actions(); }
};

class Avoidance2DEnv final : public Grid2DBase {
 public:
  Avoidance2DEnv(Grid2DParams p, mea::MeaLayout layout, CodecConfig codec)
      : Grid2DBase(std::move(layout), std::move(codec)), p_(p) {}

  std::string kind() const override { return "avoidance2d"; }
  void reset(std::uint64_t seed) override {
    SplitMix64 rng(seed);
    s_ = Grid2DState{};
    // Start anywhere in the safe (left) half.
    s_.x = std::uniform_int_distribution<int>(0, p_.grid_size / 2 - 1)(rng);
    s_.y = std::uniform_int_distribution<int>(0, p_.grid_size - 1)(rng);
  }
  std::vector<mea::StimulusCommand> sense(int) const override {
    return encode_cell(s_.x, s_.y, p_.grid_size, layout_.c(), layout_.d());
  }
  void act(int, Action a) override { action_ = a; }
  StepResult resolve() override {
    const auto t = avoidance2d_step(s_, action_, p_);
    return {{t.feedback}, t.event, t.trial_end, 0};
  }
  json snapshot() const override {
    return {{"x", s_.x}, {"y", s_.y}, {"safe_zone_timer", s_.safe_zone_timer},
            {"timestep", s_.timestep}};
  }

 private:
  Grid2DParams p_;
  Grid2DState s_;
  Action action_ = Action::Stay;
};

class MazeEnv final : public Grid2DBase {
 public:
  MazeEnv(mea::MeaLayout layout, CodecConfig codec)
      : Grid2DBase(std::move(layout), std::move(codec)) {}

  std::string kind() const override { return "maze"; }
  void reset(std::uint64_t) override {
    s_ = Grid2DState{kMazeStart[0], kMazeStart[1], 0, 0};
  }
  std::vector<mea::StimulusCommand> sense(int) const override {
    return encode_cell(s_.x, s_.y, kMazeSize, layout_.c(), layout_.d());
  }
  void act(int, Action a) override { action_ = a; }
  StepResult resolve() override {
    const auto t = maze_step(s_, action_);
    return {{t.feedback}, t.event, t.trial_end, 0};
  }
  json snapshot() const override {
    return {{"x", s_.x}, {"y", s_.y}, {"timestep", s_.timestep}};
  }

 private:
  Grid2DState s_;
  Action action_ = Action::Stay;
};

// ----------------------------------------------------------- predator-prey

class PredatorPreyEnv final : public Environment {
 public:
  PredatorPreyEnv(PredatorPreyParams p, mea::MeaLayout layout, CodecConfig codec)
      : Environment(std::move(layout), std::move(codec)), p_(p) {}

  std::string kind() const override {
    return p_.adversary ? "predator_adversary" : "predator_prey";
  }
  void reset(std::uint64_t seed) override {
    s_ = PredatorPreyState{};
    s_.rng = SplitMix64(seed);
    if (p_.adversary) {
      s_.adversary = p_.initial_adversary;
      const int adv = *s_.adversary;
      s_.predator = respawn(s_.rng, [&](int q) { return std::abs(q - adv) >= p_.danger_radius; });
    } else {
      s_.predator = respawn(s_.rng, [](int) { return true; });
    }
    s_.prey = respawn(s_.rng, [&](int q) { return q != s_.predator; });
  }
  void begin_step() override {
    move_prey(s_, p_);
    if (p_.adversary) adversary_advance(s_);
  }
  std::vector<mea::StimulusCommand> sense(int) const override {
    std::vector<mea::StimulusCommand> out{spatial(s_.prey, layout_.c(), codec_),
                                          spatial(s_.predator, layout_.d(), codec_)};
    if (s_.adversary) {
      out.push_back(spatial(*s_.adversary, layout_.c(), codec_,
                            codec_.adversary_frequency_hz));
    }
    return out;
  }
  std::vector<Action> actions() const override { return line_actions(); }
  void act(int, Action a) override { action_ = a; }
  StepResult resolve() override {
    const auto t = p_.adversary ? adversary_resolve(s_, action_, p_)
                                : predator_prey_step(s_, action_, p_);
    return {{t.feedback}, t.event, t.trial_end, 0};
  }
  json snapshot() const override {
    json j{{"predator", s_.predator},
           {"prey", s_.prey},
           {"time_since_reward", s_.time_since_reward},
           {"timestep", s_.timestep}};
    if (s_.adversary) j["adversary"] = *s_.adversary;
    return j;
  }

 private:
  PredatorPreyParams p_;
  PredatorPreyState s_;
  Action action_ = Action::Stay;
};

class PredatorPrey2DEnv final : public Grid2DBase {
 public:
  PredatorPrey2DEnv(PredatorPrey2DParams p, mea::MeaLayout layout, CodecConfig codec)
      : Grid2DBase(std::move(layout), std::move(codec)), p_(p) {}

  std::string kind() const override { return "predator_prey2d"; }
  void reset(std::uint64_t seed) override {
    s_ = PredatorPrey2DState{};
    s_.rng = SplitMix64(seed);
    std::uniform_int_distribution<int> cell(0, p_.grid_size - 1);
    s_.predator = {cell(s_.rng), cell(s_.rng)};
    do {
      s_.prey = {cell(s_.rng), cell(s_.rng)};
    } while (s_.prey == s_.predator);
  }
  std::vector<mea::StimulusCommand> sense(int) const override {
    auto prey = encode_cell(s_.prey[0], s_.prey[1], p_.grid_size, layout_.c(), layout_.d());
    auto self = encode_cell(s_.predator[0], s_.predator[1], p_.grid_size, layout_.d(),
                            layout_.c());
    prey.insert(prey.end(), self.begin(), self.end());
    return prey;
  }
  void act(int, Action a) override { action_ = a; }
  StepResult resolve() override {
    const auto t = predator_prey2d_step(s_, action_, p_);
    return {{t.feedback}, t.event, t.trial_end, 0};
  }
  json snapshot() const override {
    return {{"predator", s_.predator},
            {"prey", s_.prey},
            {"time_since_reward", s_.time_since_reward},
            {"timestep", s_.timestep}};
  }

 private:
  PredatorPrey2DParams p_;
  PredatorPrey2DState s_;
  Action action_ = Action::Stay;
};

class MultiOrganoidEnv final : public Environment {
 public:
  MultiOrganoidEnv(int round_limit, mea::MeaLayout layout, CodecConfig codec)
      : Environment(std::move(layout), std::move(codec)), round_limit_(round_limit) {}

  std::string kind() const override { return "multi_organoid"; }
  int players() const override { return 2; }
  void reset(std::uint64_t) override { s_ = MultiState{}; }
  // Each agent sees itself on D and the other animal on C.
  std::vector<mea::StimulusCommand> sense(int player) const override {
    const int self = player == 0 ? s_.predator : s_.prey;
    const int other = player == 0 ? s_.prey : s_.predator;
    return {spatial(other, layout_.c(), codec_), spatial(self, layout_.d(), codec_)};
  }
  std::vector<Action> actions() const override { return line_actions(); }
  // Moves are applied immediately so the prey senses the predator's new place.
  void act(int player, Action a) override {
    if (player == 0) {
      s_.predator = move_1d(s_.predator, a);
    } else {
      s_.prey = move_1d(s_.prey, a);
    }
  }
  StepResult resolve() override {
    const auto r = finish_round(s_, round_limit_);
    return {{r.predator_feedback, r.prey_feedback}, r.event, r.trial_end, 0};
  }
  json snapshot() const override {
    return {{"predator", s_.predator}, {"prey", s_.prey}, {"round", s_.round}};
  }

 private:
  int round_limit_;
  MultiState s_;
};

// -------------------------------------------------------------------- pong

class PongFamilyEnv final : public Environment {
 public:
  PongFamilyEnv(Court court, PongParams p, mea::MeaLayout layout, CodecConfig codec)
      : Environment(std::move(layout), std::move(codec)), court_(court), p_(p) {}

  std::string kind() const override {
    switch (court_) {
      case Court::Pong: return "pong";
      case Court::Breakout: return "breakout";
      case Court::Versus: return "pong_versus";
    }
    return "pong";
  }
  int players() const override { return court_ == Court::Versus ? 2 : 1; }
  void reset(std::uint64_t seed) override { s_ = make_pong(court_, p_, seed); }
  void begin_step() override { ball_advance(s_, court_, p_); }

  // Ball x spatially on C+D, and a distance rate-coded on C+D: to the own
  // paddle's centre in Pong, to the paddle row in Breakout.
  std::vector<mea::StimulusCommand> sense(int player) const override {
    const auto cd = layout_.stimulation_union();
    const int n = static_cast<int>(cd.size());
    const int column = std::clamp(static_cast<int>(std::floor(s_.bx * n / p_.width)), 0, n - 1);
    double distance = 0.0;
    if (court_ == Court::Breakout) {
      distance = std::max(0.0, s_.by);
    } else {
      const double paddle = player == 0 ? s_.paddle : *s_.paddle2;
      distance = std::abs(s_.by - paddle);
    }
    return {spatial(column + 1, cd, codec_),
            codec::encode_rate(distance, codec_.rate, cd, codec_.spatial)};
  }
  Action decode(std::span<const mea::SpikeWindow> w) const override {
    if (w.size() != 2) throw std::invalid_argument("paddle decoding needs 2 windows");
    return codec::decode_paddle(w[0], w[1],
                                court_ == Court::Breakout ? codec::PaddleAxis::Horizontal
                                                          : codec::PaddleAxis::Vertical);
  }
  std::vector<Action> actions() const override {
    if (court_ == Court::Breakout) return line_actions();
    return {Action::Up, Action::Down, Action::Stay};
  }
  void act(int player, Action a) override { actions_[player == 0 ? 0 : 1] = a; }
  StepResult resolve() override {
    if (court_ == Court::Versus) {
      const auto o = pong_versus_resolve(s_, actions_[0], actions_[1], p_);
      return {{o.feedback_1, o.feedback_2}, o.event, o.event == Event::Miss, o.winner};
    }
    const auto t = court_ == Court::Pong ? pong_resolve(s_, actions_[0], p_)
                                         : breakout_resolve(s_, actions_[0], p_);
    return {{t.feedback}, t.event, t.trial_end, 0};
  }
  json snapshot() const override {
    json j{{"ball", {s_.bx, s_.by}},
           {"velocity", {s_.vx, s_.vy}},
           {"paddle", s_.paddle},
           {"rally", s_.rally},
           {"timestep", s_.timestep}};
    if (s_.paddle2) j["paddle2"] = *s_.paddle2;
    if (court_ == Court::Breakout) j["bricks_left"] = bricks_left(s_);
    return j;
  }
  bool terminal() const override { return s_.terminal; }

 private:
  Court court_;
  PongParams p_;
  PongState s_;
  std::array<Action, 2> actions_{Action::Stay, Action::Stay};
};

const std::vector<std::string> kKinds{
    "avoidance1d",    "avoidance_dynamic", "avoidance2d", "maze",
    "predator_prey",  "predator_adversary", "predator_prey2d", "multi_organoid",
    "pong",           "breakout",          "pong_versus"};

}  // namespace

std::vector<mea::ElectrodeGroup> Environment::motor_groups() const {
  return {layout_.a(), layout_.b()};
}

Action Environment::decode(std::span<const mea::SpikeWindow> w) const {
  if (w.size() != 2) throw std::invalid_argument("binary decoding needs 2 windows");
  return codec::decode_binary(w[0], w[1]);
}

std::vector<Action> Environment::actions() const { return line_actions(); }

CodecConfig CodecConfig::for_kind(std::string_view kind) {
  CodecConfig c;
  if (kind == "pong" || kind == "breakout" || kind == "pong_versus") {
    c.decode_window_ms = codec::kPaddleWindowMs;
    c.spatial.duration_ms = codec::kPaddleWindowMs;
    c.rate.d_max = 12.0;
  }
  if (kind == "predator_prey2d") c.xy_mode = codec::XyMode::FreqMod;
  return c;
}

void to_json(json& j, const CodecConfig& c) {
  j = {{"spatial", c.spatial},
       {"rate", c.rate},
       {"freq_mod", c.freq_mod},
       {"xy_mode", c.xy_mode == codec::XyMode::FreqMod ? "freq_mod" : "split_groups"},
       {"adversary_frequency_hz", c.adversary_frequency_hz},
       {"decode_window_ms", c.decode_window_ms}};
}

void from_json(const json& j, CodecConfig& c) {
  if (j.contains("spatial")) c.spatial = j.at("spatial").get<codec::PulseParams>();
  if (j.contains("rate")) c.rate = j.at("rate").get<codec::RateCodeSpec>();
  if (j.contains("freq_mod")) c.freq_mod = j.at("freq_mod").get<codec::RateCodeSpec>();
  if (j.contains("xy_mode")) {
    const auto m = j.at("xy_mode").get<std::string>();
    if (m == "freq_mod") {
      c.xy_mode = codec::XyMode::FreqMod;
    } else if (m == "split_groups") {
      c.xy_mode = codec::XyMode::SplitGroups;
    } else {
      throw std::invalid_argument(fmt::format("unknown xy_mode '{}'", m));
    }
  }
  c.adversary_frequency_hz = j.value("adversary_frequency_hz", c.adversary_frequency_hz);
  c.decode_window_ms = j.value("decode_window_ms", c.decode_window_ms);
}

std::vector<std::string> environment_kinds() { return kKinds; }

int required_stim_per_group(std::string_view kind, const json& params) {
  if (kind == "avoidance2d" || kind == "predator_prey2d") {
    return get_or<int>(params, "grid_size", 10);
  }
  if (kind == "maze") return kMazeSize;
  return kLineLength;
}

std::unique_ptr<Environment> make_environment(std::string_view kind, const json& params,
                                              const mea::MeaLayout& layout,
                                              const CodecConfig& codec) {
  const auto need = required_stim_per_group(kind, params);
  if (static_cast<int>(layout.c().size()) < need ||
      static_cast<int>(layout.d().size()) < need) {
    throw std::invalid_argument(fmt::format(
        "{} needs at least {} electrodes in each stimulation group", kind, need));
  }
  if (kind == "avoidance1d" || kind == "avoidance_dynamic") {
    check_keys(params, kind, {"safe_duration", "boundary", "dynamic", "shift_interval",
                              "reward_every_step", "max_magnitude"});
    const bool dyn = kind == "avoidance_dynamic";
    Avoidance1DParams p;
    p.dynamic = dyn;
    p.reward_every_step = dyn;
    p.safe_duration = get_or(params, "safe_duration", p.safe_duration);
    p.boundary = get_or(params, "boundary", p.boundary);
    p.dynamic = get_or(params, "dynamic", p.dynamic);
    p.shift_interval = get_or(params, "shift_interval", p.shift_interval);
    p.reward_every_step = get_or(params, "reward_every_step", p.reward_every_step);
    p.max_magnitude = get_or(params, "max_magnitude", p.max_magnitude);
    if (p.boundary < 1 || p.boundary > kLineLength || p.safe_duration < 1 ||
        p.shift_interval < 1) {
      throw std::invalid_argument(fmt::format("{}: parameter out of range", kind));
    }
    return std::make_unique<Avoidance1DEnv>(std::string(kind), p, layout, codec);
  }
  if (kind == "avoidance2d") {
    check_keys(params, kind, {"grid_size", "reward_every_step", "safe_duration",
                              "max_magnitude"});
    Grid2DParams p;
    p.grid_size = get_or(params, "grid_size", p.grid_size);
    p.reward_every_step = get_or(params, "reward_every_step", p.reward_every_step);
    p.safe_duration = get_or(params, "safe_duration", p.safe_duration);
    p.max_magnitude = get_or(params, "max_magnitude", p.max_magnitude);
    if (p.grid_size < 2) throw std::invalid_argument("avoidance2d: grid_size must be >= 2");
    return std::make_unique<Avoidance2DEnv>(p, layout, codec);
  }
  if (kind == "maze") {
    check_keys(params, kind, {});
    return std::make_unique<MazeEnv>(layout, codec);
  }
  if (kind == "predator_prey" || kind == "predator_adversary") {
    check_keys(params, kind, {"timeout_z", "prey_policy", "danger_radius",
                              "initial_adversary"});
    PredatorPreyParams p;
    p.adversary = kind == "predator_adversary";
    p.timeout_z = get_or(params, "timeout_z", p.timeout_z);
    if (params.contains("prey_policy")) {
      p.prey_policy = prey_policy_from_string(params.at("prey_policy").get<std::string>());
    }
    p.danger_radius = get_or(params, "danger_radius", p.danger_radius);
    p.initial_adversary = get_or(params, "initial_adversary", p.initial_adversary);
    if (p.timeout_z < 1 || p.initial_adversary < 1 || p.initial_adversary > kLineLength) {
      throw std::invalid_argument(fmt::format("{}: parameter out of range", kind));
    }
    return std::make_unique<PredatorPreyEnv>(p, layout, codec);
  }
  if (kind == "predator_prey2d") {
    check_keys(params, kind, {"grid_size", "timeout_z"});
    PredatorPrey2DParams p;
    p.grid_size = get_or(params, "grid_size", p.grid_size);
    p.timeout_z = get_or(params, "timeout_z", p.timeout_z);
    if (p.grid_size < 2 || p.timeout_z < 1) {
      throw std::invalid_argument("predator_prey2d: parameter out of range");
    }
    return std::make_unique<PredatorPrey2DEnv>(p, layout, codec);
  }
  if (kind == "multi_organoid") {
    check_keys(params, kind, {"round_limit"});
    return std::make_unique<MultiOrganoidEnv>(get_or(params, "round_limit", 15), layout,
                                              codec);
  }
  if (kind == "pong" || kind == "breakout" || kind == "pong_versus") {
    check_keys(params, kind, {"width", "height", "half_length", "speed", "max_serve_deg"});
    PongParams p;
    p.width = get_or(params, "width", p.width);
    p.height = get_or(params, "height", p.height);
    p.half_length = get_or(params, "half_length", p.half_length);
    p.speed = get_or(params, "speed", p.speed);
    p.max_serve_deg = get_or(params, "max_serve_deg", p.max_serve_deg);
    p.serve_x = p.width / 2.0;
    p.serve_y = p.height / 2.0;
    if (!(p.speed > 0.0 && p.speed < 1.0 + 1e-12) || p.width < 4.0 || p.height < 4.0 ||
        p.half_length <= 0.0 || 2.0 * p.half_length > p.height) {
      throw std::invalid_argument(fmt::format("{}: parameter out of range", kind));
    }
    const Court court = kind == "pong"       ? Court::Pong
                        : kind == "breakout" ? Court::Breakout
                                             : Court::Versus;
    return std::make_unique<PongFamilyEnv>(court, p, layout, codec);
  }
  throw std::invalid_argument(fmt::format("unknown environment '{}'", kind));
}

}  // namespace orgloop::env
