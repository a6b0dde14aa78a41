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

// Brute-force reference transitions written from the task rules alone, used
// to check the environment step functions case by case.

#ifndef ORGLOOP_TESTS_REFERENCE_HPP_
#define ORGLOOP_TESTS_REFERENCE_HPP_

#include <array>
#include <deque>
#include <optional>
#include <random>

#include "orgloop/environments.hpp"
#include "orgloop/rng.hpp"

namespace orgloop::reference {

// Displacement of a 1D action: -1, 0 or +1.
inline int delta(codec::Action a) {
  switch (a) {
    case codec::Action::Left: return -1;
    case codec::Action::Right: return +1;
    default: return 0;
  }
}

inline int clamp_line(int p) { return p < 1 ? 1 : (p > 8 ? 8 : p); }

struct Outcome {
  int position = 0;
  int timer = 0;
  std::optional<feedback::Kind> kind;
  double magnitude = 0.0;
};

// Safe zone is 1..boundary. Z safe steps in a row earn a reward; a step into
// the aversive zone costs (position - boundary) times the base, at most 3.
inline Outcome avoidance(int pos, int timer, codec::Action a, int z, int boundary = 5) {
  Outcome o;
  o.position = clamp_line(pos + delta(a));
  if (o.position > boundary) {
    o.timer = 0;
    o.kind = feedback::Kind::Punishment;
    const int depth = o.position - boundary;
    o.magnitude = depth > 3 ? 3.0 : depth;
    return o;
  }
  o.timer = timer + 1;
  if (o.timer >= z) {
    o.timer = 0;
    o.kind = feedback::Kind::Reward;
    o.magnitude = 1.0;
  }
  return o;
}

struct ChaseOutcome {
  int predator = 0;
  int prey = 0;
  int timer = 0;
  std::optional<feedback::Kind> kind;
};

// Capture earns a reward, Z steps without one a punishment; both respawn the
// prey at the first uniform draw from 1..8 that differs from the predator.
inline ChaseOutcome chase(int predator, int prey, int timer, codec::Action a, int z,
                          SplitMix64 rng) {
  ChaseOutcome o;
  o.predator = clamp_line(predator + delta(a));
  o.prey = prey;
  o.timer = timer;
  auto redraw = [&] {
    std::uniform_int_distribution<int> d(1, 8);
    int q;
    do {
      q = d(rng);
    } while (q == o.predator);
    return q;
  };
  if (o.predator == prey) {
    o.kind = feedback::Kind::Reward;
    o.prey = redraw();
    o.timer = 0;
  } else if (++o.timer >= z) {
    o.kind = feedback::Kind::Punishment;
    o.prey = redraw();
    o.timer = 0;
  }
  return o;
}

struct GridOutcome {
  int x = 0;
  int y = 0;
  std::optional<feedback::Kind> kind;
  double magnitude = 0.0;
};

// Ten by ten grid, right half aversive with depth 1 at x = 5 rising linearly to
// 3 at x = 9, reward on every safe step.
inline GridOutcome grid(int x, int y, codec::Action a) {
  static constexpr std::array<std::array<int, 2>, 5> kMoves{{{-1, 0}, {1, 0}, {0, 1}, {0, -1}, {0, 0}}};
  const auto m = kMoves[static_cast<int>(a)];
  GridOutcome o;
  o.x = std::max(0, std::min(9, x + m[0]));
  o.y = std::max(0, std::min(9, y + m[1]));
  if (o.x >= 5) {
    o.kind = feedback::Kind::Punishment;
    o.magnitude = 1.0 + 2.0 * (o.x - 5) / 4.0;
  } else {
    o.kind = feedback::Kind::Reward;
    o.magnitude = 1.0;
  }
  return o;
}

// Breadth-first search over path cells; -1 when unreachable.
inline int maze_distance(const env::MazeLayout& layout, std::array<int, 2> from,
                         std::array<int, 2> to) {
  std::array<std::array<int, env::kMazeSize>, env::kMazeSize> dist{};
  for (auto& row : dist) row.fill(-1);
  std::deque<std::array<int, 2>> queue{from};
  dist[from[1]][from[0]] = 0;
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    for (const auto [dx, dy] : {std::array{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const int nx = x + dx, ny = y + dy;
      if (nx < 0 || ny < 0 || nx >= env::kMazeSize || ny >= env::kMazeSize) continue;
      if (layout[ny][nx] != 1 || dist[ny][nx] >= 0) continue;
      dist[ny][nx] = dist[y][x] + 1;
      queue.push_back({nx, ny});
    }
  }
  return dist[to[1]][to[0]];
}

}  // namespace orgloop::reference

#endif  // ORGLOOP_TESTS_REFERENCE_HPP_
