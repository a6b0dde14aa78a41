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

// Virtual worlds the agent is embodied in.
//
// Every world exists as plain state plus free step functions (the reference
// semantics, exercised directly by the tests) and as an Environment object that
// wraps them for the closed loop: begin_step() moves whatever moves on its own,
// sense() turns the state into stimuli, act() records or applies each player's
// action, and resolve() finishes the transition and emits feedback.

#ifndef ORGLOOP_ENVIRONMENTS_HPP_
#define ORGLOOP_ENVIRONMENTS_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "orgloop/codec.hpp"
#include "orgloop/feedback.hpp"
#include "orgloop/mea.hpp"
#include "orgloop/rng.hpp"

namespace orgloop::env {

using codec::Action;
using feedback::FeedbackEvent;

inline constexpr int kLineLength = 8;

// What happened on a transition. Logged, and the input of every metric.
enum class Event {
  None,
  SafeStep,     // avoidance: in the safe zone, no reward yet
  SafeReward,   // avoidance: reward for staying safe
  Aversive,     // avoidance: in the aversive zone
  Capture,
  Timeout,
  Danger,       // predator came within reach of the adversary
  Goal,         // maze goal reached
  Wall,         // maze wall bump
  Move,         // maze step onto a path cell
  Hit,          // paddle returned the ball
  Miss,
  Brick,
  Cleared,      // last brick removed
};

std::string to_string(Event e);
Event event_from_string(std::string_view s);

struct Transition {
  std::optional<FeedbackEvent> feedback;
  Event event = Event::None;
  bool trial_end = false;
};

// Moves one cell; Up is +y. Clamped to [0, size).
std::array<int, 2> move_2d(int x, int y, Action a, int size);
// Left is -1. Clamped to [1, kLineLength].
int move_1d(int pos, Action a);

// ---------------------------------------------------------------- avoidance

struct Avoidance1DParams {
  int safe_duration = 10;  // Z
  int boundary = 5;        // initial last safe position
  bool dynamic = false;
  int shift_interval = 100;
  bool reward_every_step = false;
  double max_magnitude = 3.0;
};

struct Avoidance1DState {
  int position = 4;
  int safe_zone_timer = 0;
  int boundary = 5;
  std::int64_t timestep = 0;
  SplitMix64 rng;

  bool operator==(const Avoidance1DState&) const = default;
};

// Punishment multiplier for a position beyond the boundary: the depth,
// capped at `max_magnitude`.
double avoidance_magnitude(int position, int boundary, double max_magnitude = 3.0);

Transition avoidance1d_step(Avoidance1DState& s, Action a, const Avoidance1DParams& p);

// Every `shift_interval` timesteps the boundary moves by one in a random
// direction, clamped to [1, kLineLength].
void dynamic_boundary_update(Avoidance1DState& s, const Avoidance1DParams& p);

struct Grid2DParams {
  int grid_size = 10;
  bool reward_every_step = true;
  int safe_duration = 10;  // used when reward_every_step is off
  double max_magnitude = 3.0;
};

struct Grid2DState {
  int x = 0;
  int y = 0;
  int safe_zone_timer = 0;
  std::int64_t timestep = 0;

  bool operator==(const Grid2DState&) const = default;
};

// Right half of the grid is aversive; the multiplier grows linearly from 1 at
// its first column to max_magnitude at the far wall.
double avoidance2d_magnitude(int x, const Grid2DParams& p);

Transition avoidance2d_step(Grid2DState& s, Action a, const Grid2DParams& p);

// 1 = path, 0 = wall, indexed [y][x].
inline constexpr int kMazeSize = 5;
using MazeLayout = std::array<std::array<int, kMazeSize>, kMazeSize>;
inline constexpr MazeLayout kMazeLayout{{{1, 1, 1, 0, 1},
                                         {0, 1, 0, 0, 1},
                                         {1, 1, 1, 1, 1},
                                         {1, 0, 1, 0, 1},
                                         {1, 1, 1, 0, 1}}};
inline constexpr std::array<int, 2> kMazeStart{0, 0};
inline constexpr std::array<int, 2> kMazeGoal{4, 4};

Transition maze_step(Grid2DState& s, Action a, const MazeLayout& layout = kMazeLayout);

// ----------------------------------------------------------- predator-prey

enum class PreyPolicy { Stationary, Predictable, Random };
std::string to_string(PreyPolicy p);
PreyPolicy prey_policy_from_string(std::string_view s);

struct PredatorPreyParams {
  int timeout_z = 15;
  PreyPolicy prey_policy = PreyPolicy::Stationary;
  bool adversary = false;
  int danger_radius = 2;
  int initial_adversary = 8;
};

struct PredatorPreyState {
  int predator = 2;
  int prey = 6;
  int time_since_reward = 0;
  std::optional<int> adversary;
  int prey_direction = 1;
  std::int64_t timestep = 0;
  SplitMix64 rng;

  bool operator==(const PredatorPreyState&) const = default;
};

// Uniform over 1..kLineLength, resampled until `ok(pos)`.
int respawn(SplitMix64& rng, const std::function<bool(int)>& ok);

Transition predator_prey_step(PredatorPreyState& s, Action a,
                              const PredatorPreyParams& p);

// Prey movement at the top of a step: none, a back-and-forth sweep, or a
// random walk of -1/0/+1.
void move_prey(PredatorPreyState& s, const PredatorPreyParams& p);

// One step toward the predator.
void adversary_advance(PredatorPreyState& s);
// Predator move, then danger check, then capture and timeout.
Transition adversary_resolve(PredatorPreyState& s, Action a, const PredatorPreyParams& p);
// adversary_advance followed by adversary_resolve.
Transition adversary_step(PredatorPreyState& s, Action a, const PredatorPreyParams& p);

struct PredatorPrey2DParams {
  int grid_size = 10;
  int timeout_z = 40;
};

struct PredatorPrey2DState {
  std::array<int, 2> predator{0, 0};
  std::array<int, 2> prey{5, 5};
  int time_since_reward = 0;
  std::int64_t timestep = 0;
  SplitMix64 rng;

  bool operator==(const PredatorPrey2DState&) const = default;
};

Transition predator_prey2d_step(PredatorPrey2DState& s, Action a,
                                const PredatorPrey2DParams& p);

// Two agents on one line: the predator moves, then the prey.
struct MultiState {
  int predator = 5;
  int prey = 3;
  int rounds_since_capture = 0;
  std::int64_t round = 0;

  bool operator==(const MultiState&) const = default;
};

struct MultiRound {
  std::optional<FeedbackEvent> predator_feedback;
  std::optional<FeedbackEvent> prey_feedback;
  Event event = Event::None;
  bool trial_end = false;
};

inline constexpr int kMultiPredatorStart = 5;
inline constexpr int kMultiPreyStart = 3;

// End of a round, after both moves: a capture rewards the predator, punishes
// the prey and resets both. With `round_limit` > 0 a round count reaching the
// limit ends the trial with a reset and no feedback.
MultiRound finish_round(MultiState& s, int round_limit = 0);

// Predator decides and moves, then the prey decides and moves, then
// finish_round.
MultiRound multi_organoid_round(MultiState& s,
                                const std::function<Action(const MultiState&)>& predator,
                                const std::function<Action(const MultiState&)>& prey,
                                int round_limit = 0);

// -------------------------------------------------------------------- pong

enum class Court { Pong, Breakout, Versus };

struct PongParams {
  double width = 16.0;
  double height = 12.0;
  double half_length = 2.0;
  double speed = 1.0;
  double serve_x = 8.0;
  double serve_y = 6.0;
  double max_serve_deg = 45.0;
  int brick_rows = 3;
  int brick_cols = 8;
  double brick_bottom = 9.0;  // lowest brick row starts here
};

struct PongState {
  double bx = 8.0, by = 6.0;
  double vx = -1.0, vy = 0.0;
  double prev_bx = 8.0, prev_by = 6.0;
  double paddle = 6.0;                 // centre; y for Pong, x for Breakout
  std::optional<double> paddle2;       // right paddle in versus mode
  std::vector<std::uint8_t> bricks;    // row-major, 1 = present (Breakout)
  int rally = 0;
  int last_rally = 0;
  bool terminal = false;
  std::int64_t timestep = 0;
  SplitMix64 rng;

  bool operator==(const PongState&) const = default;
};

PongState make_pong(Court court, const PongParams& p, std::uint64_t seed);

// New serve from (serve_x, serve_y) at a uniform angle within +-max_serve_deg.
// Pong and Versus: horizontal, toward `direction` (-1 left, +1 right).
// Breakout: downward.
void serve(PongState& s, Court court, const PongParams& p, int direction = -1);

// Moves the ball and reflects it off the walls that are not guarded by a
// paddle. The paddle plane is handled by the resolve functions.
void ball_advance(PongState& s, Court court, const PongParams& p);

Transition pong_resolve(PongState& s, Action a, const PongParams& p);
Transition pong_step(PongState& s, Action a, const PongParams& p);

Transition breakout_resolve(PongState& s, Action a, const PongParams& p);
Transition breakout_step(PongState& s, Action a, const PongParams& p);
int bricks_left(const PongState& s);

struct VersusOutcome {
  std::optional<FeedbackEvent> feedback_1;
  std::optional<FeedbackEvent> feedback_2;
  Event event = Event::None;
  int winner = 0;  // 1 or 2 after a miss
};

VersusOutcome pong_versus_resolve(PongState& s, Action a1, Action a2, const PongParams& p);
VersusOutcome pong_versus_step(PongState& s, Action a1, Action a2, const PongParams& p);

// ------------------------------------------------------- closed-loop wrapper

struct CodecConfig {
  codec::PulseParams spatial;              // spatial codes and the rate carrier
  codec::RateCodeSpec rate;                // Pong distance code
  codec::RateCodeSpec freq_mod{5.0, 45.0, 10.0};  // 2D y-axis frequency code
  codec::XyMode xy_mode = codec::XyMode::SplitGroups;
  double adversary_frequency_hz = 10.0;
  double decode_window_ms = codec::kDecodeWindowMs;

  // Pong-family windows and pulse durations are 10 ms.
  static CodecConfig for_kind(std::string_view kind);
};

void to_json(nlohmann::json& j, const CodecConfig& c);
void from_json(const nlohmann::json& j, CodecConfig& c);

struct StepResult {
  std::vector<std::optional<FeedbackEvent>> feedback;  // one slot per player
  Event event = Event::None;
  bool trial_end = false;
  int winner = 0;  // versus mode
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string kind() const = 0;
  virtual int players() const { return 1; }
  virtual void reset(std::uint64_t seed) = 0;
  // Autonomous motion before sensing (ball flight, adversary, moving prey).
  virtual void begin_step() {}
  virtual std::vector<mea::StimulusCommand> sense(int player) const = 0;
  // Recording groups in decoder argument order.
  virtual std::vector<mea::ElectrodeGroup> motor_groups() const;
  virtual Action decode(std::span<const mea::SpikeWindow> windows) const;
  // Action set of the random baseline.
  virtual std::vector<Action> actions() const;
  virtual void act(int player, Action a) = 0;
  virtual StepResult resolve() = 0;
  virtual nlohmann::json snapshot() const = 0;
  virtual bool terminal() const { return false; }

  const mea::MeaLayout& layout() const { return layout_; }
  const CodecConfig& codec() const { return codec_; }

 protected:
  Environment(mea::MeaLayout layout, CodecConfig codec)
      : layout_(std::move(layout)), codec_(std::move(codec)) {}

  mea::MeaLayout layout_;
  CodecConfig codec_;
};

// kind: avoidance1d, avoidance_dynamic, avoidance2d, maze, predator_prey,
// predator_adversary, predator_prey2d, multi_organoid, pong, breakout,
// pong_versus. `params` overrides the kind's defaults; unknown keys are errors.
std::unique_ptr<Environment> make_environment(std::string_view kind,
                                              const nlohmann::json& params,
                                              const mea::MeaLayout& layout,
                                              const CodecConfig& codec);

std::vector<std::string> environment_kinds();

// Electrodes each stimulation group needs for `kind` with `params`.
int required_stim_per_group(std::string_view kind, const nlohmann::json& params);

}  // namespace orgloop::env

#endif  // ORGLOOP_ENVIRONMENTS_HPP_
