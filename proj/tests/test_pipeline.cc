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

#include <string>

#include "test_util.h"
#include "viplab/pipeline.h"

namespace viplab {
namespace {

using nlohmann::json;

std::string error_path(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<accepted>";
}

TEST(ConfigParse, EmptyObjectGivesDefaults) {
  const ExperimentConfig c = parse_config(json::object());
  EXPECT_EQ(c.world, WorldKind::kPointMass);
  EXPECT_EQ(c.observation, ObservationMode::kRawState);
  EXPECT_DOUBLE_EQ(c.loss.gamma, 0.98);
  EXPECT_EQ(c.loss.num_negatives, 3u);
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 1e-4);
  EXPECT_DOUBLE_EQ(c.rwr.tau, 0.1);
  EXPECT_EQ(c.encoder.input_dim, 2u);
  EXPECT_EQ(c.obs_dim(), 2u);
}

TEST(ConfigParse, StrictKeysAndTypesNamePath) {
  EXPECT_EQ(error_path({{"bogus", 1}}), "$.bogus");
  EXPECT_EQ(error_path({{"train", {{"batchsize", 4}}}}), "$.train.batchsize");
  EXPECT_EQ(error_path({{"train", {{"batch_size", "big"}}}}), "$.train.batch_size");
  EXPECT_EQ(error_path({{"train", {{"batch_size", 0}}}}), "$.train");
  EXPECT_EQ(error_path({{"loss", {{"gamma", 1.5}}}}), "$.loss");
  EXPECT_EQ(error_path({{"loss", {{"td_form", "sideways"}}}}), "$.loss.td_form");
  EXPECT_EQ(error_path({{"world", {{"kind", "moon"}}}}), "$.world.kind");
  EXPECT_EQ(error_path({{"observation", "pixels"}}), "$.observation");
  EXPECT_EQ(error_path({{"data", {{"kind", "mixed"}}}}), "$.data.goal");
  EXPECT_EQ(error_path({{"plan", {{"episodes", 0}}}}), "$.plan.episodes");
  EXPECT_EQ(error_path({{"analysis", {{"range", -1.0}}}}), "$.analysis.range");
  EXPECT_EQ(error_path({{"mppi", {{"num_samples", 1}}}}), "$.mppi");
  EXPECT_EQ(error_path({{"train", {{"seed", 3}}}}), "<accepted>");
  EXPECT_EQ(error_path(json::array()), "$");
}

TEST(ConfigParse, Image16NeedsSmallGrid) {
  const json big = {{"world", {{"kind", "grid"}, {"grid", {{"width", 20}, {"height", 4}}}}},
                    {"observation", "image16"}};
  EXPECT_EQ(error_path(big), "$.observation");
}

TEST(ConfigParse, EncoderInputFollowsObservation) {
  const ExperimentConfig c = parse_config({{"observation", "image16"}});
  EXPECT_EQ(c.obs_dim(), 256u);
  EXPECT_EQ(c.resolved_encoder().input_dim, 256u);
}

TEST(ConfigParse, ResolvedRoundTrip) {
  const json in = {{"seed", 17},
                   {"observation", "image16"},
                   {"data", {{"kind", "mixed"}, {"goal", {0.5, 0.25}}, {"num_trajectories", 7}}},
                   {"encoder", {{"hidden_widths", {16}}, {"output_dim", 4}}},
                   {"loss", {{"td_form", "literal"}, {"gamma", 0.9}}},
                   {"rwr", {{"tau", 0.0}, {"hidden_widths", {8, 8}}}},
                   {"analysis", {{"range", 0.5}}}};
  const ExperimentConfig c = parse_config(in);
  const json resolved = resolved_config_json(c);
  const ExperimentConfig back = parse_config(resolved);
  EXPECT_EQ(resolved_config_json(back), resolved);
  EXPECT_EQ(back.resolved_encoder(), c.resolved_encoder());
  EXPECT_EQ(back.resolved_rwr(), c.resolved_rwr());
  EXPECT_EQ(back.resolved_train(Objective::kVip).seed, c.resolved_train(Objective::kVip).seed);
  EXPECT_EQ(back.data.goal, c.data.goal);
  EXPECT_EQ(back.loss.td_form, TdForm::kLiteral);

  const auto dir = testing::scratch_dir();
  write_resolved_config(c, dir / "config.json");
  EXPECT_EQ(resolved_config_json(load_config(dir / "config.json")), resolved);
}

TEST(ConfigParse, LoadErrors) {
  const auto dir = testing::scratch_dir();
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
  testing::write_file(dir / "bad.json", "{ not json");
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
}

TEST(Seeds, StreamsDifferAndExplicitSeedsWin) {
  ExperimentConfig c;
  c.seed = 5;
  EXPECT_NE(stream_seed(c, SeedStream::kData), stream_seed(c, SeedStream::kTrain));
  EXPECT_EQ(c.resolved_encoder().init_seed, stream_seed(c, SeedStream::kEncoderInit));
  c.encoder_init_seed = 99;
  c.rwr_seed = 4;
  EXPECT_EQ(c.resolved_encoder().init_seed, 99u);
  EXPECT_EQ(c.resolved_rwr().seed, 4u);
}

TEST(GenerateDataset, DeterministicAndShaped) {
  ExperimentConfig c = parse_config({{"seed", 3}, {"data", {{"num_trajectories", 6}}}});
  const TrajectoryDataset a = generate_dataset(c);
  const TrajectoryDataset b = generate_dataset(c);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].frames, b[i].frames);
    EXPECT_EQ(a[i].frames.cols, 2u);
    EXPECT_EQ(a[i].actions.rows + 1, a[i].length());
    // Stored values already survive float32 storage.
    for (double v : a[i].frames.data) EXPECT_EQ(static_cast<double>(static_cast<float>(v)), v);
  }
  c.seed = 4;
  EXPECT_NE(generate_dataset(c)[0].frames, a[0].frames);
}

TEST(GenerateDataset, MixedRolesAndDemoGoals) {
  const ExperimentConfig c = parse_config(
      {{"data",
        {{"kind", "mixed"}, {"goal", {0.75, 0.75}}, {"num_trajectories", 4}, {"num_failures", 3}}}});
  const TrajectoryDataset ds = generate_dataset(c);
  ASSERT_EQ(ds.size(), 7u);
  std::size_t demos = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    demos += ds[i].metadata.value("role", "") == "demo" ? 1 : 0;
  }
  EXPECT_EQ(demos, 4u);
  const Matrix goals = demo_goal_frames(ds);
  ASSERT_EQ(goals.rows, 4u);
  for (std::size_t r = 0; r < goals.rows; ++r) {
    EXPECT_LE(std::hypot(goals(r, 0) - 0.75, goals(r, 1) - 0.75), c.point_mass.tolerance + 1e-6);
  }
}

TEST(DemoGoals, WithoutRolesUsesEveryTrajectory) {
  Rng rng(1);
  const TrajectoryDataset ds = testing::random_dataset(rng, 3, 2, 2, 5);
  const Matrix goals = demo_goal_frames(ds);
  ASSERT_EQ(goals.rows, 3u);
  EXPECT_EQ(std::vector<double>(goals.row(1).begin(), goals.row(1).end()),
            std::vector<double>(ds[1].frames.row(ds[1].length() - 1).begin(),
                                ds[1].frames.row(ds[1].length() - 1).end()));
}

TEST(TrainEncoder, DimensionMismatchNamesBothWidths) {
  const ExperimentConfig c = parse_config({{"observation", "image16"}});
  Rng rng(2);
  const TrajectoryDataset ds = testing::random_dataset(rng, 3, 2, 3, 5);
  try {
    train_encoder(c, ds, Objective::kVip);
    FAIL();
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("256"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2"), std::string::npos) << msg;
  }
  EXPECT_THROW(check_encoder_input(Encoder::identity(3), 2, "dataset"), std::runtime_error);
  EXPECT_NO_THROW(check_encoder_input(Encoder::identity(2), 2, "dataset"));
}

TEST(RunPlanner, IdentityOnEasyTasksIsDeterministic) {
  const ExperimentConfig c = parse_config({{"seed", 2}});
  const Encoder id = Encoder::identity(2);
  const auto tasks = sample_eval_tasks(c, 10, 77);
  ASSERT_EQ(tasks.size(), 10u);
  const EvalResult a = run_planner(c, id, tasks, 5, Exec::kSerial);
  const EvalResult b = run_planner(c, id, tasks, 5, Exec::kParallel);
  EXPECT_GE(a.success_rate, 0.9);
  ASSERT_EQ(a.episodes.size(), b.episodes.size());
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    EXPECT_EQ(a.episodes[i].states, b.episodes[i].states);
  }
  const GoalSpec g = task_goal(c, id, tasks[0]);
  EXPECT_EQ(g.embedding(), (std::vector<double>{tasks[0].goal[0], tasks[0].goal[1]}));
}

}  // namespace
}  // namespace viplab
