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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <vector>

#include "test_util.h"
#include "viplab/worlds.h"

namespace viplab {
namespace {

// Independent BFS over 4-neighbour moves, used as the optimality oracle.
int bfs_length(const GridWorld& w, Cell s, Cell g) {
  std::map<std::pair<int, int>, int> seen{{{s.x, s.y}, 0}};
  std::queue<Cell> q;
  q.push(s);
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop();
    const int d = seen[{c.x, c.y}];
    if (c == g) return d;
    for (int k = 0; k < 4; ++k) {
      const Cell n{c.x + dx[k], c.y + dy[k]};
      if (n.x < 0 || n.y < 0 || n.x >= w.width || n.y >= w.height) continue;
      if (std::find(w.blocked.begin(), w.blocked.end(), n) != w.blocked.end()) continue;
      if (seen.count({n.x, n.y})) continue;
      seen[{n.x, n.y}] = d + 1;
      q.push(n);
    }
  }
  return -1;
}

GridWorld walled_grid() {
  GridWorld w;
  w.width = 8;
  w.height = 8;
  for (int y = 0; y < 6; ++y) w.blocked.push_back({4, y});  // wall with a gap at the top
  return w;
}

// --- point mass ----------------------------------------------------------------

TEST(PointMassStep, HandArithmetic) {
  PointMassWorld w;
  const Vec2 next = w.step({0.5, 0.5}, {1.0, 0.0});
  EXPECT_NEAR(next[0], 0.55, 1e-15);
  EXPECT_DOUBLE_EQ(next[1], 0.5);
}

TEST(PointMassStep, ZeroActionAndClipping) {
  PointMassWorld w;
  EXPECT_EQ(w.step({0.3, 0.7}, {0.0, 0.0}), (Vec2{0.3, 0.7}));
  // Action clipped to max_action, state clipped to the unit box.
  const Vec2 big = w.step({0.5, 0.5}, {100.0, -100.0});
  EXPECT_NEAR(big[0], 0.55, 1e-15);
  EXPECT_NEAR(big[1], 0.45, 1e-15);
  EXPECT_EQ(w.step({0.99, 0.01}, {1.0, -1.0}), (Vec2{1.0, 0.0}));
}

TEST(PointMassStep, ObstacleRejectsMove) {
  PointMassWorld w;
  w.obstacles.push_back({0.52, 0.0, 0.6, 1.0});
  EXPECT_EQ(w.step({0.5, 0.5}, {1.0, 0.0}), (Vec2{0.5, 0.5}));
  EXPECT_NE(w.step({0.5, 0.5}, {-1.0, 0.0}), (Vec2{0.5, 0.5}));
}

TEST(PointMassStep, Pure) {
  PointMassWorld w;
  Rng rng(2);
  std::uniform_real_distribution<double> u(0, 1), a(-2, 2);
  for (int i = 0; i < 200; ++i) {
    const Vec2 s{u(rng), u(rng)};
    const Vec2 act{a(rng), a(rng)};
    EXPECT_EQ(w.step(s, act), w.step(s, act));
  }
}

TEST(PointMassObserve, RawAndImageShapes) {
  PointMassWorld w;
  EXPECT_EQ(w.observe({0.2, 0.9}, ObservationMode::kRawState), (std::vector<double>{0.2, 0.9}));
  EXPECT_EQ(w.obs_dim(ObservationMode::kRawState), 2u);
  EXPECT_EQ(w.obs_dim(ObservationMode::kImage16), 256u);
  EXPECT_EQ(w.observe({0.2, 0.9}, ObservationMode::kImage16).size(), 256u);
}

TEST(PointMassObserve, RasterMassIsOnePlusObstacleCells) {
  PointMassWorld w;
  // Covers pixel centres with i in {0, 1} and j in {0..3}: 8 cells.
  w.obstacles.push_back({0.0, 0.0, 0.125, 0.25});
  const auto img = w.observe({0.7, 0.7}, ObservationMode::kImage16);
  const double total = std::accumulate(img.begin(), img.end(), 0.0);
  EXPECT_NEAR(total, 1.0 + 8.0, 1e-12);
  for (double v : img) EXPECT_GE(v, 0.0);
}

TEST(PointMassExpert, NoiseFreeDistanceStrictlyDecreases) {
  // Oracle: simulate the proportional controller step by step.
  PointMassWorld w;
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const PointTask task = sample_task(w, Difficulty::kHard, rng);
    const Trajectory t =
        expert_rollout(w, task.start, task.goal, 0.0, 200, ObservationMode::kRawState, rng);
    Vec2 x = task.start;
    double prev = distance(x, task.goal);
    for (std::size_t i = 1; i < t.length(); ++i) {
      const Vec2 sim = w.step(x, w.expert_action(x, task.goal));
      EXPECT_NEAR(t.states(i, 0), sim[0], 1e-15);
      EXPECT_NEAR(t.states(i, 1), sim[1], 1e-15);
      const double d = distance(sim, task.goal);
      EXPECT_LT(d, prev) << "trial " << trial << " step " << i;
      prev = d;
      x = sim;
    }
    EXPECT_LE(distance(x, task.goal), w.tolerance);
    EXPECT_GE(t.length(), 2u);
    EXPECT_EQ(t.actions.rows, t.length() - 1);
  }
}

TEST(PointMassExpert, StartAtGoalIsSelfLoop) {
  PointMassWorld w;
  Rng rng(1);
  const Trajectory t =
      expert_rollout(w, {0.4, 0.4}, {0.4, 0.4}, 0.0, 10, ObservationMode::kImage16, rng);
  ASSERT_GE(t.length(), 2u);
  const auto first = t.frame(0);
  const auto last = t.frame(t.length() - 1);
  EXPECT_TRUE(std::equal(first.begin(), first.end(), last.begin()));
}

TEST(PointMassExpert, UnreachableGoalThrows) {
  PointMassWorld w;
  Rng rng(1);
  EXPECT_THROW(expert_rollout(w, {0.1, 0.1}, {0.9, 0.9}, 0.0, 3, ObservationMode::kRawState, rng),
               std::runtime_error);
  w.obstacles.push_back({0.8, 0.8, 1.0, 1.0});
  EXPECT_THROW(expert_rollout(w, {0.1, 0.1}, {0.9, 0.9}, 0.0, 300, ObservationMode::kRawState, rng),
               std::runtime_error);
}

TEST(PointMassTasks, BoundsAndDifficulty) {
  PointMassWorld w;
  w.obstacles.push_back({0.4, 0.4, 0.6, 0.6});
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const PointTask hard = sample_task(w, Difficulty::kHard, rng);
    const PointTask easy = sample_task(w, Difficulty::kEasy, rng);
    for (const PointTask& t : {hard, easy}) {
      for (double v : {t.start[0], t.start[1], t.goal[0], t.goal[1]}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      EXPECT_TRUE(w.is_free(t.start));
      EXPECT_TRUE(w.is_free(t.goal));
      EXPECT_GT(distance(t.start, t.goal), w.tolerance);
    }
    EXPECT_LE(distance(easy.start, easy.goal), w.easy_radius);
  }
}

TEST(PointMassTasks, SeededDeterminism) {
  PointMassWorld w;
  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) {
    const PointTask x = sample_task(w, Difficulty::kHard, a);
    const PointTask y = sample_task(w, Difficulty::kHard, b);
    EXPECT_EQ(x.start, y.start);
    EXPECT_EQ(x.goal, y.goal);
  }
}

TEST(Horizons, EasyFiftyHardHundred) {
  EXPECT_EQ(episode_horizon(Difficulty::kEasy), 50u);
  EXPECT_EQ(episode_horizon(Difficulty::kHard), 100u);
}

TEST(PointMassConfig, ValidateAndJsonRoundTrip) {
  PointMassWorld w;
  w.obstacles.push_back({0.1, 0.2, 0.3, 0.4});
  const nlohmann::json j = w;
  EXPECT_EQ(j.get<PointMassWorld>(), w);
  PointMassWorld bad;
  bad.dt = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = PointMassWorld{};
  bad.tolerance = -1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = PointMassWorld{};
  bad.obstacles.push_back({0.5, 0.5, 1.5, 0.6});
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

// --- grid --------------------------------------------------------------------

TEST(GridStep, WallsAndBlockedCellsLeaveStateUnchanged) {
  const GridWorld w = walled_grid();
  EXPECT_EQ(w.step({0, 0}, Move::kLeft), (Cell{0, 0}));
  EXPECT_EQ(w.step({0, 0}, Move::kUp), (Cell{0, 0}));  // y grows downward
  EXPECT_EQ(w.step({0, 0}, Move::kDown), (Cell{0, 1}));
  EXPECT_EQ(w.step({7, 7}, Move::kDown), (Cell{7, 7}));
  EXPECT_EQ(w.step({7, 7}, Move::kRight), (Cell{7, 7}));
  EXPECT_EQ(w.step({3, 2}, Move::kRight), (Cell{3, 2}));  // into the wall
  EXPECT_EQ(w.step({3, 2}, Move::kLeft), (Cell{2, 2}));
  EXPECT_EQ(w.step({3, 2}, Move::kStay), (Cell{3, 2}));
}

TEST(GridObserve, OneHotAndRaster) {
  const GridWorld w = walled_grid();
  const auto onehot = w.observe({2, 5}, ObservationMode::kRawState);
  EXPECT_EQ(onehot.size(), 64u);
  EXPECT_EQ(std::count(onehot.begin(), onehot.end(), 1.0), 1);
  EXPECT_EQ(std::accumulate(onehot.begin(), onehot.end(), 0.0), 1.0);

  const auto img = w.observe({2, 5}, ObservationMode::kImage16);
  EXPECT_EQ(img.size(), 256u);
  EXPECT_EQ(std::accumulate(img.begin(), img.end(), 0.0), 1.0 + 6.0);
}

TEST(GridObserve, InjectiveOverFreeCells) {
  const GridWorld w = walled_grid();
  for (ObservationMode mode : {ObservationMode::kRawState, ObservationMode::kImage16}) {
    std::set<std::vector<double>> seen;
    std::size_t free = 0;
    for (int y = 0; y < w.height; ++y) {
      for (int x = 0; x < w.width; ++x) {
        if (!w.is_free({x, y})) continue;
        ++free;
        seen.insert(w.observe({x, y}, mode));
      }
    }
    EXPECT_EQ(seen.size(), free) << to_string(mode);
  }
}

TEST(GridObserve, Image16RejectsLargeGrid) {
  GridWorld w;
  w.width = 17;
  EXPECT_THROW(w.observe({0, 0}, ObservationMode::kImage16), std::invalid_argument);
}

TEST(GridExpert, NoiseFreeLengthMatchesBfs) {
  const GridWorld w = walled_grid();
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const GridTask task = sample_task(w, Difficulty::kHard, rng);
    const Trajectory t =
        expert_rollout(w, task.start, task.goal, 0.0, 200, ObservationMode::kRawState, rng);
    const int d = bfs_length(w, task.start, task.goal);
    ASSERT_GT(d, 0);
    EXPECT_EQ(t.length(), static_cast<std::size_t>(d) + 1);
    EXPECT_EQ(w.shortest_path(task.start, task.goal).size(), static_cast<std::size_t>(d) + 1);
    EXPECT_EQ(w.distances_to(task.goal)[task.start.y * w.width + task.start.x], d);
    // Consecutive states are one move apart.
    for (std::size_t i = 0; i + 1 < t.length(); ++i) {
      const double step = std::abs(t.states(i + 1, 0) - t.states(i, 0)) +
                          std::abs(t.states(i + 1, 1) - t.states(i, 1));
      EXPECT_EQ(step, 1.0);
    }
    EXPECT_EQ(t.frames.row(t.length() - 1)[task.goal.y * w.width + task.goal.x], 1.0);
  }
}

TEST(GridExpert, StartAtGoalAndUnreachable) {
  GridWorld w = walled_grid();
  Rng rng(1);
  const Trajectory self =
      expert_rollout(w, {1, 1}, {1, 1}, 0.0, 5, ObservationMode::kRawState, rng);
  ASSERT_GE(self.length(), 2u);
  EXPECT_TRUE(std::equal(self.frame(0).begin(), self.frame(0).end(),
                         self.frame(self.length() - 1).begin()));
  // Close the gap: the right half becomes unreachable.
  w.blocked.push_back({4, 6});
  w.blocked.push_back({4, 7});
  EXPECT_THROW(expert_rollout(w, {0, 0}, {7, 0}, 0.0, 100, ObservationMode::kRawState, rng),
               std::runtime_error);
}

TEST(GridExpert, NoisyRolloutStillEndsAtGoal) {
  const GridWorld w = walled_grid();
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const GridTask task = sample_task(w, Difficulty::kHard, rng);
    const Trajectory t =
        expert_rollout(w, task.start, task.goal, 0.3, 400, ObservationMode::kRawState, rng);
    EXPECT_GE(t.length(), static_cast<std::size_t>(bfs_length(w, task.start, task.goal)) + 1);
    EXPECT_EQ(t.states(t.length() - 1, 0), task.goal.x);
    EXPECT_EQ(t.states(t.length() - 1, 1), task.goal.y);
  }
}

TEST(GridTasks, BoundsUnblockedAndDeterministic) {
  const GridWorld w = walled_grid();
  Rng rng(4), again(4), easy_rng(5);
  for (int i = 0; i < 1000; ++i) {
    const GridTask t = sample_task(w, Difficulty::kHard, rng);
    EXPECT_TRUE(w.is_free(t.start));
    EXPECT_TRUE(w.is_free(t.goal));
    EXPECT_FALSE(t.start == t.goal);
    const GridTask u = sample_task(w, Difficulty::kHard, again);
    EXPECT_EQ(t.start, u.start);
    EXPECT_EQ(t.goal, u.goal);
    const GridTask e = sample_task(w, Difficulty::kEasy, easy_rng);
    const int d = bfs_length(w, e.start, e.goal);
    EXPECT_GE(d, 1);
    EXPECT_LE(d, w.easy_steps);
  }
}

TEST(GridTasks, StartsApproximatelyUniform) {
  // Chi-square of start-cell counts on an open 5x5 grid, 1000 draws.
  // Starts are uniform over cells (goal != start keeps the marginal uniform).
  GridWorld w;
  w.width = 5;
  w.height = 5;
  Rng rng(2024);
  std::vector<int> counts(25, 0);
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const GridTask t = sample_task(w, Difficulty::kHard, rng);
    ++counts[t.start.y * 5 + t.start.x];
  }
  const double expected = n / 25.0;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 24 degrees of freedom: 99.9th percentile is 51.18.
  EXPECT_LT(chi2, 51.18);
}

TEST(GridConfig, JsonRoundTripAndValidate) {
  const GridWorld w = walled_grid();
  const nlohmann::json j = w;
  EXPECT_EQ(j.get<GridWorld>(), w);
  GridWorld bad;
  bad.blocked.push_back({16, 0});
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Enums, StringRoundTrip) {
  for (auto m : {ObservationMode::kRawState, ObservationMode::kImage16}) {
    EXPECT_EQ(observation_mode_from_string(to_string(m)), m);
  }
  for (auto d : {Difficulty::kEasy, Difficulty::kHard}) {
    EXPECT_EQ(difficulty_from_string(to_string(d)), d);
  }
  EXPECT_THROW(difficulty_from_string("medium"), std::invalid_argument);
}

}  // namespace
}  // namespace viplab
