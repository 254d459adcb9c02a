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
#include "viplab/worlds.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <stdexcept>

namespace viplab {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Cell displaced(const Cell& c, Move m) {
  switch (m) {
    case Move::kUp: return {c.x, c.y - 1};
    case Move::kDown: return {c.x, c.y + 1};
    case Move::kLeft: return {c.x - 1, c.y};
    case Move::kRight: return {c.x + 1, c.y};
    case Move::kStay: return c;
  }
  return c;
}

std::size_t cell_index(const GridWorld& w, const Cell& c) {
  return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(w.width) +
         static_cast<std::size_t>(c.x);
}

nlohmann::json vec_json(const Vec2& v) { return nlohmann::json::array({v[0], v[1]}); }

}  // namespace

const char* to_string(ObservationMode m) {
  return m == ObservationMode::kRawState ? "raw_state" : "image16";
}

ObservationMode observation_mode_from_string(const std::string& s) {
  if (s == "raw_state") return ObservationMode::kRawState;
  if (s == "image16") return ObservationMode::kImage16;
  throw std::invalid_argument("unknown observation mode '" + s + "'");
}

const char* to_string(Difficulty d) {
  return d == Difficulty::kEasy ? "easy" : "hard";
}

Difficulty difficulty_from_string(const std::string& s) {
  if (s == "easy") return Difficulty::kEasy;
  if (s == "hard") return Difficulty::kHard;
  throw std::invalid_argument("unknown difficulty '" + s + "'");
}

std::size_t episode_horizon(Difficulty d) {
  return d == Difficulty::kEasy ? 50 : 100;
}

double distance(const Vec2& a, const Vec2& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

// --- point mass ---------------------------------------------------------------

void PointMassWorld::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("point mass: dt must be > 0");
  if (!(tolerance > 0.0)) {
    throw std::invalid_argument("point mass: tolerance must be > 0");
  }
  if (!(max_action > 0.0)) {
    throw std::invalid_argument("point mass: max_action must be > 0");
  }
  if (!(render_sigma > 0.0)) {
    throw std::invalid_argument("point mass: render_sigma must be > 0");
  }
  for (const Rect& r : obstacles) {
    if (r.x0 < 0 || r.y0 < 0 || r.x1 > 1 || r.y1 > 1 || r.x0 > r.x1 ||
        r.y0 > r.y1) {
      throw std::invalid_argument("point mass: obstacle outside bounds");
    }
  }
}

bool PointMassWorld::is_free(const Vec2& p) const {
  return std::none_of(obstacles.begin(), obstacles.end(),
                      [&](const Rect& r) { return r.contains(p); });
}

Vec2 PointMassWorld::clip_action(const Vec2& a) const {
  return {std::clamp(a[0], -max_action, max_action),
          std::clamp(a[1], -max_action, max_action)};
}

Vec2 PointMassWorld::step(const Vec2& state, const Vec2& action) const {
  const Vec2 a = clip_action(action);
  const Vec2 next{clamp01(state[0] + dt * a[0]), clamp01(state[1] + dt * a[1])};
  return is_free(next) ? next : state;
}

Vec2 PointMassWorld::expert_action(const Vec2& state, const Vec2& goal) const {
  return clip_action({expert_gain * (goal[0] - state[0]),
                      expert_gain * (goal[1] - state[1])});
}

std::size_t PointMassWorld::obs_dim(ObservationMode mode) const {
  return mode == ObservationMode::kRawState ? 2 : kRasterSize;
}

std::vector<double> PointMassWorld::observe(const Vec2& state,
                                            ObservationMode mode) const {
  if (mode == ObservationMode::kRawState) return {state[0], state[1]};
  std::vector<double> raster(kRasterSize, 0.0);
  constexpr double side = static_cast<double>(kRasterSide);
  for (std::size_t j = 0; j < kRasterSide; ++j) {
    for (std::size_t i = 0; i < kRasterSide; ++i) {
      const Vec2 center{(static_cast<double>(i) + 0.5) / side,
                        (static_cast<double>(j) + 0.5) / side};
      if (!is_free(center)) raster[j * kRasterSide + i] = 1.0;
    }
  }
  // Gaussian blob of unit mass centred on the agent, width in pixels.
  std::vector<double> blob(kRasterSize);
  double mass = 0.0;
  const double inv = 1.0 / (2.0 * render_sigma * render_sigma);
  for (std::size_t j = 0; j < kRasterSide; ++j) {
    for (std::size_t i = 0; i < kRasterSide; ++i) {
      const double du = (static_cast<double>(i) + 0.5) - state[0] * side;
      const double dv = (static_cast<double>(j) + 0.5) - state[1] * side;
      const double w = std::exp(-(du * du + dv * dv) * inv);
      blob[j * kRasterSide + i] = w;
      mass += w;
    }
  }
  for (std::size_t k = 0; k < kRasterSize; ++k) raster[k] += blob[k] / mass;
  return raster;
}

void to_json(nlohmann::json& j, const PointMassWorld& w) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const Rect& r : w.obstacles) obstacles.push_back({r.x0, r.y0, r.x1, r.y1});
  j = nlohmann::json{{"dt", w.dt},
                     {"max_action", w.max_action},
                     {"tolerance", w.tolerance},
                     {"expert_gain", w.expert_gain},
                     {"easy_radius", w.easy_radius},
                     {"render_sigma", w.render_sigma},
                     {"obstacles", obstacles}};
}

void from_json(const nlohmann::json& j, PointMassWorld& w) {
  w = PointMassWorld{};
  w.dt = j.value("dt", w.dt);
  w.max_action = j.value("max_action", w.max_action);
  w.render_sigma = j.value("render_sigma", w.render_sigma);
  w.tolerance = j.value("tolerance", w.tolerance);
  w.expert_gain = j.value("expert_gain", w.expert_gain);
  w.easy_radius = j.value("easy_radius", w.easy_radius);
  if (j.contains("obstacles")) {
    for (const auto& r : j.at("obstacles")) {
      w.obstacles.push_back({r.at(0).get<double>(), r.at(1).get<double>(),
                             r.at(2).get<double>(), r.at(3).get<double>()});
    }
  }
  w.validate();
}

Trajectory expert_rollout(const PointMassWorld& world, const Vec2& start,
                          const Vec2& goal, double noise_scale,
                          std::size_t max_len, ObservationMode mode, Rng& rng) {
  if (!world.is_free(goal)) {
    throw std::runtime_error("expert_rollout: goal lies inside an obstacle");
  }
  if (max_len < 2) throw std::invalid_argument("expert_rollout: max_len < 2");
  std::normal_distribution<double> noise(0.0, 1.0);
  Trajectory traj;
  Vec2 x = start;
  traj.frames.append_row(world.observe(x, mode));
  traj.states.append_row(std::vector<double>{x[0], x[1]});
  while (traj.length() < max_len) {
    if (traj.length() >= 2 && world.reached(x, goal)) break;
    Vec2 a{world.expert_gain * (goal[0] - x[0]),
           world.expert_gain * (goal[1] - x[1])};
    if (noise_scale > 0.0) {
      a[0] += noise_scale * noise(rng);
      a[1] += noise_scale * noise(rng);
    }
    a = world.clip_action(a);
    x = world.step(x, a);
    traj.actions.append_row(std::vector<double>{a[0], a[1]});
    traj.frames.append_row(world.observe(x, mode));
    traj.states.append_row(std::vector<double>{x[0], x[1]});
  }
  if (!world.reached(x, goal)) {
    throw std::runtime_error("expert_rollout: goal not reached within " +
                             std::to_string(max_len) + " frames");
  }
  traj.metadata = {{"world", "point_mass"},
                   {"start", vec_json(start)},
                   {"goal", vec_json(goal)},
                   {"noise", noise_scale}};
  return traj;
}

PointTask sample_task(const PointMassWorld& world, Difficulty difficulty,
                      Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec2 goal;
  do {
    goal = {unit(rng), unit(rng)};
  } while (!world.is_free(goal));
  return sample_task_to(world, goal, difficulty, rng);
}

PointTask sample_task_to(const PointMassWorld& world, const Vec2& goal,
                         Difficulty difficulty, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointTask task;
  task.goal = goal;
  for (;;) {
    if (difficulty == Difficulty::kHard) {
      task.start = {unit(rng), unit(rng)};
    } else {
      const double r = world.easy_radius * std::sqrt(unit(rng));
      const double theta = 2.0 * std::numbers::pi * unit(rng);
      task.start = {task.goal[0] + r * std::cos(theta),
                    task.goal[1] + r * std::sin(theta)};
    }
    const bool inside = task.start[0] >= 0 && task.start[0] <= 1 &&
                        task.start[1] >= 0 && task.start[1] <= 1;
    if (inside && world.is_free(task.start) &&
        distance(task.start, task.goal) > world.tolerance) {
      return task;
    }
  }
}

// --- grid ---------------------------------------------------------------------

void GridWorld::validate() const {
  if (width < 1 || height < 1) throw std::invalid_argument("grid: empty grid");
  for (const Cell& c : blocked) {
    if (!in_bounds(c)) throw std::invalid_argument("grid: blocked cell out of bounds");
  }
}

bool GridWorld::is_free(const Cell& c) const {
  return in_bounds(c) && std::find(blocked.begin(), blocked.end(), c) == blocked.end();
}

Cell GridWorld::step(const Cell& state, Move move) const {
  const Cell next = displaced(state, move);
  return is_free(next) ? next : state;
}

std::size_t GridWorld::obs_dim(ObservationMode mode) const {
  return mode == ObservationMode::kRawState ? num_cells() : kRasterSize;
}

std::vector<double> GridWorld::observe(const Cell& state,
                                       ObservationMode mode) const {
  if (mode == ObservationMode::kRawState) {
    std::vector<double> onehot(num_cells(), 0.0);
    onehot[cell_index(*this, state)] = 1.0;
    return onehot;
  }
  if (width > static_cast<int>(kRasterSide) || height > static_cast<int>(kRasterSide)) {
    throw std::invalid_argument("grid: image16 needs a grid of at most 16x16");
  }
  std::vector<double> raster(kRasterSize, 0.0);
  for (const Cell& c : blocked) {
    raster[static_cast<std::size_t>(c.y) * kRasterSide + static_cast<std::size_t>(c.x)] = 1.0;
  }
  raster[static_cast<std::size_t>(state.y) * kRasterSide +
         static_cast<std::size_t>(state.x)] = 1.0;
  return raster;
}

std::vector<int> GridWorld::distances_to(const Cell& goal) const {
  std::vector<int> dist(num_cells(), -1);
  if (!is_free(goal)) return dist;
  std::deque<Cell> queue{goal};
  dist[cell_index(*this, goal)] = 0;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (Move m : kAllMoves) {
      const Cell n = displaced(c, m);
      if (!is_free(n) || dist[cell_index(*this, n)] >= 0) continue;
      dist[cell_index(*this, n)] = dist[cell_index(*this, c)] + 1;
      queue.push_back(n);
    }
  }
  return dist;
}

std::vector<Cell> GridWorld::shortest_path(const Cell& start,
                                           const Cell& goal) const {
  const auto dist = distances_to(goal);
  if (!is_free(start) || dist[cell_index(*this, start)] < 0) return {};
  std::vector<Cell> path{start};
  Cell c = start;
  while (!(c == goal)) {
    for (Move m : kAllMoves) {
      const Cell n = step(c, m);
      if (dist[cell_index(*this, n)] == dist[cell_index(*this, c)] - 1) {
        c = n;
        break;
      }
    }
    path.push_back(c);
  }
  return path;
}

void to_json(nlohmann::json& j, const GridWorld& w) {
  nlohmann::json blocked = nlohmann::json::array();
  for (const Cell& c : w.blocked) blocked.push_back({c.x, c.y});
  j = nlohmann::json{{"width", w.width},
                     {"height", w.height},
                     {"blocked", blocked},
                     {"easy_steps", w.easy_steps}};
}

void from_json(const nlohmann::json& j, GridWorld& w) {
  w = GridWorld{};
  w.width = j.value("width", w.width);
  w.height = j.value("height", w.height);
  w.easy_steps = j.value("easy_steps", w.easy_steps);
  if (j.contains("blocked")) {
    for (const auto& c : j.at("blocked")) {
      w.blocked.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    }
  }
  w.validate();
}

Trajectory expert_rollout(const GridWorld& world, const Cell& start,
                          const Cell& goal, double noise_scale,
                          std::size_t max_len, ObservationMode mode, Rng& rng) {
  if (max_len < 2) throw std::invalid_argument("expert_rollout: max_len < 2");
  const auto dist = world.distances_to(goal);
  if (!world.is_free(start) || dist[cell_index(world, start)] < 0) {
    throw std::runtime_error("expert_rollout: goal unreachable from start");
  }
  std::bernoulli_distribution detour(std::clamp(noise_scale, 0.0, 1.0));
  std::uniform_int_distribution<std::size_t> any_move(0, kAllMoves.size() - 1);
  Trajectory traj;
  Cell c = start;
  auto record_state = [&](const Cell& s) {
    traj.frames.append_row(world.observe(s, mode));
    traj.states.append_row(std::vector<double>{double(s.x), double(s.y)});
  };
  record_state(c);
  while (traj.length() < max_len) {
    if (traj.length() >= 2 && c == goal) break;
    Move move = Move::kStay;
    if (noise_scale > 0.0 && detour(rng)) {
      move = kAllMoves[any_move(rng)];
    } else if (!(c == goal)) {
      // Uniform tie-break among optimal moves.
      std::vector<Move> best;
      for (Move m : kAllMoves) {
        const Cell n = world.step(c, m);
        if (dist[cell_index(world, n)] == dist[cell_index(world, c)] - 1) {
          best.push_back(m);
        }
      }
      move = best.size() == 1
                 ? best.front()
                 : best[std::uniform_int_distribution<std::size_t>(
                       0, best.size() - 1)(rng)];
    }
    const Cell target = displaced(c, move);
    traj.actions.append_row(
        std::vector<double>{double(target.x - c.x), double(target.y - c.y)});
    c = world.step(c, move);
    record_state(c);
  }
  if (!(c == goal)) {
    throw std::runtime_error("expert_rollout: goal not reached within " +
                             std::to_string(max_len) + " frames");
  }
  traj.metadata = {{"world", "grid"},
                   {"start", {start.x, start.y}},
                   {"goal", {goal.x, goal.y}},
                   {"noise", noise_scale}};
  return traj;
}

GridTask sample_task(const GridWorld& world, Difficulty difficulty, Rng& rng) {
  std::vector<Cell> free;
  for (int y = 0; y < world.height; ++y) {
    for (int x = 0; x < world.width; ++x) {
      if (world.is_free({x, y})) free.push_back({x, y});
    }
  }
  if (free.size() < 2) throw std::invalid_argument("grid: fewer than 2 free cells");
  std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
  for (;;) {
    GridTask task{free[pick(rng)], free[pick(rng)]};
    if (task.start == task.goal) continue;
    const int d = world.distances_to(task.goal)[cell_index(world, task.start)];
    if (d < 0) continue;
    if (difficulty == Difficulty::kEasy && d > world.easy_steps) continue;
    return task;
  }
}

}  // namespace viplab
