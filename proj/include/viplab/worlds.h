// Copyright 2026 The viplab Authors
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
// Deterministic goal-reaching worlds and their expert demonstrators.

#ifndef VIPLAB_WORLDS_H_
#define VIPLAB_WORLDS_H_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "viplab/parallel.h"
#include "viplab/trajstore.h"

namespace viplab {

enum class ObservationMode { kRawState, kImage16 };
enum class Difficulty { kEasy, kHard };

const char* to_string(ObservationMode m);
ObservationMode observation_mode_from_string(const std::string& s);
const char* to_string(Difficulty d);
Difficulty difficulty_from_string(const std::string& s);

inline constexpr std::size_t kRasterSide = 16;
inline constexpr std::size_t kRasterSize = kRasterSide * kRasterSide;

// Episode horizon of the Easy / Hard settings.
std::size_t episode_horizon(Difficulty d);

// ---------------------------------------------------------------------------
// Point mass on [0,1]^2.

using Vec2 = std::array<double, 2>;

double distance(const Vec2& a, const Vec2& b);

struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(const Vec2& p) const {
    return p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct PointTask {
  Vec2 start{};
  Vec2 goal{};
};

struct PointMassWorld {
  double dt = 0.05;
  double max_action = 1.0;
  double tolerance = 0.05;
  double expert_gain = 10.0;  // proportional controller gain
  double easy_radius = 0.2;
  double render_sigma = 1.0;  // agent blob width in image16 pixels
  std::vector<Rect> obstacles;

  void validate() const;  // throws std::invalid_argument
  bool is_free(const Vec2& p) const;

  // x' = clip(x + dt * clip(a), [0,1]); a move ending inside an obstacle is
  // rejected and the state is unchanged.
  Vec2 step(const Vec2& state, const Vec2& action) const;
  Vec2 clip_action(const Vec2& action) const;
  std::vector<double> observe(const Vec2& state, ObservationMode mode) const;
  std::size_t obs_dim(ObservationMode mode) const;

  // Noise-free expert action toward `goal`.
  Vec2 expert_action(const Vec2& state, const Vec2& goal) const;
  bool reached(const Vec2& state, const Vec2& goal) const {
    return distance(state, goal) <= tolerance;
  }

  friend bool operator==(const PointMassWorld&, const PointMassWorld&) = default;
};

void to_json(nlohmann::json& j, const PointMassWorld& w);
void from_json(const nlohmann::json& j, PointMassWorld& w);

// Proportional controller a = k (goal - x) + N(0, noise^2), clipped; stops
// once within tolerance (after at least one step). Actions and true states
// are recorded. Throws std::runtime_error if the goal is blocked or not
// reached within max_len frames.
Trajectory expert_rollout(const PointMassWorld& world, const Vec2& start,
                          const Vec2& goal, double noise_scale,
                          std::size_t max_len, ObservationMode mode, Rng& rng);

// Goal uniform over free space; start uniform (Hard) or uniform in the disk
// of radius easy_radius around the goal (Easy). start != goal.
PointTask sample_task(const PointMassWorld& world, Difficulty difficulty,
                      Rng& rng);
// Start only, for a given goal.
PointTask sample_task_to(const PointMassWorld& world, const Vec2& goal,
                         Difficulty difficulty, Rng& rng);

// ---------------------------------------------------------------------------
// 4-connected grid.

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Row-major cells: kUp is y - 1, kDown is y + 1.
enum class Move { kUp, kDown, kLeft, kRight, kStay };
inline constexpr std::array<Move, 5> kAllMoves = {Move::kUp, Move::kDown,
                                                  Move::kLeft, Move::kRight,
                                                  Move::kStay};

struct GridTask {
  Cell start{};
  Cell goal{};
};

struct GridWorld {
  int width = 16;
  int height = 16;
  std::vector<Cell> blocked;
  int easy_steps = 4;

  void validate() const;
  bool in_bounds(const Cell& c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
  }
  bool is_free(const Cell& c) const;
  std::size_t num_cells() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  // Moves into walls or blocked cells leave the state unchanged.
  Cell step(const Cell& state, Move move) const;
  // raw_state: one-hot over cells; image16: 16x16 raster, agent and blocked
  // cells set to 1 (grid must fit in the raster).
  std::vector<double> observe(const Cell& state, ObservationMode mode) const;
  std::size_t obs_dim(ObservationMode mode) const;

  // BFS distances from `goal` to every cell (-1 when unreachable).
  std::vector<int> distances_to(const Cell& goal) const;
  // Shortest path start..goal inclusive; empty if unreachable.
  std::vector<Cell> shortest_path(const Cell& start, const Cell& goal) const;

  friend bool operator==(const GridWorld&, const GridWorld&) = default;
};

void to_json(nlohmann::json& j, const GridWorld& w);
void from_json(const nlohmann::json& j, GridWorld& w);

// Follows a BFS shortest path; with probability noise_scale a step is
// replaced by a uniformly random move. start == goal yields a two-frame
// "stay" trajectory. Throws std::runtime_error if unreachable or not reached
// within max_len frames.
Trajectory expert_rollout(const GridWorld& world, const Cell& start,
                          const Cell& goal, double noise_scale,
                          std::size_t max_len, ObservationMode mode, Rng& rng);

// Uniform over free cells, start != goal; Easy restricts start to within
// easy_steps BFS steps of the goal.
GridTask sample_task(const GridWorld& world, Difficulty difficulty, Rng& rng);

}  // namespace viplab

#endif  // VIPLAB_WORLDS_H_
