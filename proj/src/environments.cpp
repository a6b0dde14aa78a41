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

#include "orgloop/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace orgloop::env {
namespace {

constexpr std::array<std::pair<Event, const char*>, 14> kEventNames{{
    {Event::None, "none"},
    {Event::SafeStep, "safe_step"},
    {Event::SafeReward, "safe_reward"},
    {Event::Aversive, "aversive"},
    {Event::Capture, "capture"},
    {Event::Timeout, "timeout"},
    {Event::Danger, "danger"},
    {Event::Goal, "goal"},
    {Event::Wall, "wall"},
    {Event::Move, "move"},
    {Event::Hit, "hit"},
    {Event::Miss, "miss"},
    {Event::Brick, "brick"},
    {Event::Cleared, "cleared"},
}};

FeedbackEvent reward() { return {feedback::Kind::Reward, 1.0}; }
FeedbackEvent punishment(double magnitude = 1.0) {
  return {feedback::Kind::Punishment, magnitude};
}

int uniform_int(SplitMix64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Paddle centre moves one cell and stays fully on the court.
double move_paddle(double centre, int delta, double half, double extent) {
  return std::clamp(centre + delta, half, extent - half);
}

}  // namespace

std::string to_string(Event e) {
  for (const auto& [ev, name] : kEventNames) {
    if (ev == e) return name;
  }
  return "none";
}

Event event_from_string(std::string_view s) {
  for (const auto& [ev, name] : kEventNames) {
    if (s == name) return ev;
  }
  throw std::invalid_argument(fmt::format("unknown event '{}'", s));
}

std::array<int, 2> move_2d(int x, int y, Action a, int size) {
  switch (a) {
    case Action::Up: y = std::min(size - 1, y + 1); break;
    case Action::Down: y = std::max(0, y - 1); break;
    case Action::Left: x = std::max(0, x - 1); break;
    case Action::Right: x = std::min(size - 1, x + 1); break;
    case Action::Stay: break;
  }
  return {x, y};
}

int move_1d(int pos, Action a) {
  if (a == Action::Left) return std::max(1, pos - 1);
  if (a == Action::Right) return std::min(kLineLength, pos + 1);
  return pos;
}

// ---------------------------------------------------------------- avoidance

double avoidance_magnitude(int position, int boundary, double max_magnitude) {
  return std::min(static_cast<double>(position - boundary), max_magnitude);
}

void dynamic_boundary_update(Avoidance1DState& s, const Avoidance1DParams& p) {
  if (s.timestep == 0 || s.timestep % p.shift_interval != 0) return;
  if (uniform_int(s.rng, 0, 1) == 0) {
    s.boundary = std::max(1, s.boundary - 1);
  } else {
    s.boundary = std::min(s.boundary + 1, kLineLength);
  }
}

Transition avoidance1d_step(Avoidance1DState& s, Action a, const Avoidance1DParams& p) {
  Transition t;
  s.position = move_1d(s.position, a);
  if (s.position <= s.boundary) {
    ++s.safe_zone_timer;
    t.event = Event::SafeStep;
    if (p.reward_every_step || s.safe_zone_timer >= p.safe_duration) {
      t.feedback = reward();
      t.event = Event::SafeReward;
      s.safe_zone_timer = 0;
    }
  } else {
    s.safe_zone_timer = 0;
    t.feedback = punishment(avoidance_magnitude(s.position, s.boundary, p.max_magnitude));
    t.event = Event::Aversive;
  }
  ++s.timestep;
  if (p.dynamic) dynamic_boundary_update(s, p);
  return t;
}

double avoidance2d_magnitude(int x, const Grid2DParams& p) {
  const int first = p.grid_size / 2;
  const int span = p.grid_size - 1 - first;
  if (x < first) return 0.0;
  if (span == 0) return 1.0;
  return 1.0 + (p.max_magnitude - 1.0) * (x - first) / span;
}

Transition avoidance2d_step(Grid2DState& s, Action a, const Grid2DParams& p) {
  Transition t;
  const auto [x, y] = move_2d(s.x, s.y, a, p.grid_size);
  s.x = x;
  s.y = y;
  if (s.x >= p.grid_size / 2) {
    s.safe_zone_timer = 0;
    t.feedback = punishment(avoidance2d_magnitude(s.x, p));
    t.event = Event::Aversive;
  } else {
    ++s.safe_zone_timer;
    t.event = Event::SafeStep;
    if (p.reward_every_step || s.safe_zone_timer >= p.safe_duration) {
      t.feedback = reward();
      t.event = Event::SafeReward;
      s.safe_zone_timer = 0;
    }
  }
  ++s.timestep;
  return t;
}

Transition maze_step(Grid2DState& s, Action a, const MazeLayout& layout) {
  Transition t;
  ++s.timestep;
  int nx = s.x;
  int ny = s.y;
  switch (a) {
    case Action::Up: ++ny; break;
    case Action::Down: --ny; break;
    case Action::Left: --nx; break;
    case Action::Right: ++nx; break;
    case Action::Stay: return t;
  }
  const bool inside = nx >= 0 && ny >= 0 && nx < kMazeSize && ny < kMazeSize;
  if (!inside || layout[ny][nx] != 1) {
    t.feedback = punishment();
    t.event = Event::Wall;
    return t;
  }
  s.x = nx;
  s.y = ny;
  t.event = Event::Move;
  if (s.x == kMazeGoal[0] && s.y == kMazeGoal[1]) {
    t.feedback = reward();
    t.event = Event::Goal;
    t.trial_end = true;
    s.x = kMazeStart[0];
    s.y = kMazeStart[1];
  }
  return t;
}

// ----------------------------------------------------------- predator-prey

std::string to_string(PreyPolicy p) {
  switch (p) {
    case PreyPolicy::Stationary: return "stationary";
    case PreyPolicy::Predictable: return "predictable";
    case PreyPolicy::Random: return "random";
  }
  return "stationary";
}

PreyPolicy prey_policy_from_string(std::string_view s) {
  for (auto p : {PreyPolicy::Stationary, PreyPolicy::Predictable, PreyPolicy::Random}) {
    if (to_string(p) == s) return p;
  }
  throw std::invalid_argument(fmt::format("unknown prey policy '{}'", s));
}

int respawn(SplitMix64& rng, const std::function<bool(int)>& ok) {
  for (;;) {
    const int pos = uniform_int(rng, 1, kLineLength);
    if (ok(pos)) return pos;
  }
}

namespace {

void capture_or_timeout(PredatorPreyState& s, const PredatorPreyParams& p, Transition& t) {
  if (s.predator == s.prey) {
    t.feedback = reward();
    t.event = Event::Capture;
    t.trial_end = true;
    s.prey = respawn(s.rng, [&](int q) { return q != s.predator; });
    s.time_since_reward = 0;
    return;
  }
  ++s.time_since_reward;
  if (s.time_since_reward >= p.timeout_z) {
    t.feedback = punishment();
    t.event = Event::Timeout;
    t.trial_end = true;
    s.prey = respawn(s.rng, [&](int q) { return q != s.predator; });
    s.time_since_reward = 0;
  }
}

}  // namespace

void move_prey(PredatorPreyState& s, const PredatorPreyParams& p) {
  switch (p.prey_policy) {
    case PreyPolicy::Stationary: return;
    case PreyPolicy::Predictable:
      if (s.prey + s.prey_direction < 1 || s.prey + s.prey_direction > kLineLength) {
        s.prey_direction = -s.prey_direction;
      }
      s.prey += s.prey_direction;
      return;
    case PreyPolicy::Random:
      s.prey = std::clamp(s.prey + uniform_int(s.rng, -1, 1), 1, kLineLength);
      return;
  }
}

Transition predator_prey_step(PredatorPreyState& s, Action a,
                              const PredatorPreyParams& p) {
  Transition t;
  s.predator = move_1d(s.predator, a);
  capture_or_timeout(s, p, t);
  ++s.timestep;
  return t;
}

void adversary_advance(PredatorPreyState& s) {
  if (!s.adversary) throw std::logic_error("state has no adversary");
  int& adv = *s.adversary;
  if (adv < s.predator) {
    ++adv;
  } else if (adv > s.predator) {
    --adv;
  }
}

Transition adversary_resolve(PredatorPreyState& s, Action a, const PredatorPreyParams& p) {
  if (!s.adversary) throw std::logic_error("state has no adversary");
  Transition t;
  s.predator = move_1d(s.predator, a);
  const int adv = *s.adversary;
  if (std::abs(s.predator - adv) < p.danger_radius) {
    t.feedback = punishment(feedback::kHighMagnitude);
    t.event = Event::Danger;
    t.trial_end = true;
    s.predator = respawn(s.rng, [&](int q) {
      return std::abs(q - adv) >= p.danger_radius && q != s.prey;
    });
    s.time_since_reward = 0;
  } else {
    capture_or_timeout(s, p, t);
  }
  ++s.timestep;
  return t;
}

Transition adversary_step(PredatorPreyState& s, Action a, const PredatorPreyParams& p) {
  adversary_advance(s);
  return adversary_resolve(s, a, p);
}

Transition predator_prey2d_step(PredatorPrey2DState& s, Action a,
                                const PredatorPrey2DParams& p) {
  Transition t;
  s.predator = move_2d(s.predator[0], s.predator[1], a, p.grid_size);
  auto fresh_prey = [&] {
    for (;;) {
      std::array<int, 2> q{uniform_int(s.rng, 0, p.grid_size - 1),
                           uniform_int(s.rng, 0, p.grid_size - 1)};
      if (q != s.predator) return q;
    }
  };
  if (s.predator == s.prey) {
    t.feedback = reward();
    t.event = Event::Capture;
    t.trial_end = true;
    s.prey = fresh_prey();
    s.time_since_reward = 0;
  } else if (++s.time_since_reward >= p.timeout_z) {
    t.feedback = punishment();
    t.event = Event::Timeout;
    t.trial_end = true;
    s.prey = fresh_prey();
    s.time_since_reward = 0;
  }
  ++s.timestep;
  return t;
}

MultiRound finish_round(MultiState& s, int round_limit) {
  MultiRound r;
  ++s.round;
  if (s.predator == s.prey) {
    r.predator_feedback = reward();
    r.prey_feedback = punishment();
    r.event = Event::Capture;
    r.trial_end = true;
  } else if (round_limit > 0 && ++s.rounds_since_capture >= round_limit) {
    r.event = Event::Timeout;
    r.trial_end = true;
  }
  if (r.trial_end) {
    s.predator = kMultiPredatorStart;
    s.prey = kMultiPreyStart;
    s.rounds_since_capture = 0;
  }
  return r;
}

MultiRound multi_organoid_round(MultiState& s,
                                const std::function<Action(const MultiState&)>& predator,
                                const std::function<Action(const MultiState&)>& prey,
                                int round_limit) {
  if (!predator || !prey) {
    throw std::invalid_argument("a multi-organoid round needs two agents");
  }
  s.predator = move_1d(s.predator, predator(s));
  s.prey = move_1d(s.prey, prey(s));
  return finish_round(s, round_limit);
}

// -------------------------------------------------------------------- pong

PongState make_pong(Court court, const PongParams& p, std::uint64_t seed) {
  PongState s;
  s.rng = SplitMix64(seed);
  if (court == Court::Breakout) {
    s.paddle = p.width / 2.0;
    s.bricks.assign(static_cast<std::size_t>(p.brick_rows * p.brick_cols), 1);
  } else {
    s.paddle = p.height / 2.0;
  }
  if (court == Court::Versus) s.paddle2 = p.height / 2.0;
  serve(s, court, p, -1);
  return s;
}

void serve(PongState& s, Court court, const PongParams& p, int direction) {
  const double max_rad = p.max_serve_deg * std::numbers::pi / 180.0;
  const double theta = std::uniform_real_distribution<double>(-max_rad, max_rad)(s.rng);
  s.bx = s.prev_bx = p.serve_x;
  s.by = s.prev_by = p.serve_y;
  if (court == Court::Breakout) {
    s.vx = p.speed * std::sin(theta);
    s.vy = -p.speed * std::cos(theta);
  } else {
    s.vx = direction * p.speed * std::cos(theta);
    s.vy = p.speed * std::sin(theta);
  }
  s.last_rally = s.rally;
  s.rally = 0;
}

void ball_advance(PongState& s, Court court, const PongParams& p) {
  s.prev_bx = s.bx;
  s.prev_by = s.by;
  s.bx += s.vx;
  s.by += s.vy;
  if (court == Court::Breakout) {
    if (s.bx < 0.0) {
      s.bx = -s.bx;
      s.vx = -s.vx;
    } else if (s.bx > p.width) {
      s.bx = 2.0 * p.width - s.bx;
      s.vx = -s.vx;
    }
    if (s.by > p.height) {
      s.by = 2.0 * p.height - s.by;
      s.vy = -s.vy;
    }
    return;
  }
  if (s.by < 0.0) {
    s.by = -s.by;
    s.vy = -s.vy;
  } else if (s.by > p.height) {
    s.by = 2.0 * p.height - s.by;
    s.vy = -s.vy;
  }
  if (court == Court::Pong && s.bx > p.width) {
    s.bx = 2.0 * p.width - s.bx;
    s.vx = -s.vx;
  }
}

namespace {

int paddle_delta(Action a) {
  if (a == Action::Up || a == Action::Right) return 1;
  if (a == Action::Down || a == Action::Left) return -1;
  return 0;
}

}  // namespace

Transition pong_resolve(PongState& s, Action a, const PongParams& p) {
  Transition t;
  s.paddle = move_paddle(s.paddle, paddle_delta(a), p.half_length, p.height);
  if (s.bx < 0.0) {
    if (std::abs(s.by - s.paddle) <= p.half_length) {
      s.bx = -s.bx;
      s.vx = -s.vx;
      ++s.rally;
      t.feedback = reward();
      t.event = Event::Hit;
    } else {
      t.feedback = punishment();
      t.event = Event::Miss;
      serve(s, Court::Pong, p, -1);
    }
    t.trial_end = true;
  }
  ++s.timestep;
  return t;
}

Transition pong_step(PongState& s, Action a, const PongParams& p) {
  ball_advance(s, Court::Pong, p);
  return pong_resolve(s, a, p);
}

int bricks_left(const PongState& s) {
  return static_cast<int>(std::count(s.bricks.begin(), s.bricks.end(), 1));
}

Transition breakout_resolve(PongState& s, Action a, const PongParams& p) {
  Transition t;
  s.paddle = move_paddle(s.paddle, paddle_delta(a), p.half_length, p.width);
  if (s.by < 0.0) {
    if (std::abs(s.bx - s.paddle) <= p.half_length) {
      s.by = -s.by;
      s.vy = -s.vy;
      ++s.rally;
      t.event = Event::Hit;
    } else {
      t.feedback = punishment();
      t.event = Event::Miss;
      t.trial_end = true;
      serve(s, Court::Breakout, p);
    }
  } else {
    const double brick_w = p.width / p.brick_cols;
    const int row = static_cast<int>(std::floor(s.by - p.brick_bottom));
    const int col = static_cast<int>(std::floor(s.bx / brick_w));
    if (row >= 0 && row < p.brick_rows && col >= 0 && col < p.brick_cols) {
      auto& cell = s.bricks[static_cast<std::size_t>(row * p.brick_cols + col)];
      if (cell) {
        cell = 0;
        s.bx = s.prev_bx;
        s.by = s.prev_by;
        s.vy = -s.vy;
        t.feedback = reward();
        t.event = Event::Brick;
        if (bricks_left(s) == 0) {
          s.terminal = true;
          t.event = Event::Cleared;
          t.trial_end = true;
        }
      }
    }
  }
  ++s.timestep;
  return t;
}

Transition breakout_step(PongState& s, Action a, const PongParams& p) {
  ball_advance(s, Court::Breakout, p);
  return breakout_resolve(s, a, p);
}

VersusOutcome pong_versus_resolve(PongState& s, Action a1, Action a2, const PongParams& p) {
  if (!s.paddle2) throw std::logic_error("versus mode needs two paddles");
  VersusOutcome o;
  s.paddle = move_paddle(s.paddle, paddle_delta(a1), p.half_length, p.height);
  *s.paddle2 = move_paddle(*s.paddle2, paddle_delta(a2), p.half_length, p.height);
  auto miss = [&](int loser) {
    const FeedbackEvent lose = punishment();
    const FeedbackEvent win = reward();
    o.feedback_1 = loser == 1 ? lose : win;
    o.feedback_2 = loser == 1 ? win : lose;
    o.event = Event::Miss;
    o.winner = loser == 1 ? 2 : 1;
    // The opponent serves, toward the player who missed.
    serve(s, Court::Versus, p, loser == 1 ? -1 : 1);
  };
  if (s.bx < 0.0) {
    if (std::abs(s.by - s.paddle) <= p.half_length) {
      s.bx = -s.bx;
      s.vx = -s.vx;
      ++s.rally;
      o.event = Event::Hit;
    } else {
      miss(1);
    }
  } else if (s.bx > p.width) {
    if (std::abs(s.by - *s.paddle2) <= p.half_length) {
      s.bx = 2.0 * p.width - s.bx;
      s.vx = -s.vx;
      ++s.rally;
      o.event = Event::Hit;
    } else {
      miss(2);
    }
  }
  ++s.timestep;
  return o;
}

VersusOutcome pong_versus_step(PongState& s, Action a1, Action a2, const PongParams& p) {
  ball_advance(s, Court::Versus, p);
  return pong_versus_resolve(s, a1, a2, p);
}

}  // namespace orgloop::env
