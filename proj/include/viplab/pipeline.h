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

// Experiment configuration (strict JSON) and the end-to-end steps shared by
// the command-line tool and the acceptance checks: dataset generation,
// encoder training, planning and offline policy learning.

#ifndef VIPLAB_PIPELINE_H_
#define VIPLAB_PIPELINE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "viplab/control.h"
#include "viplab/encoder.h"
#include "viplab/objectives.h"
#include "viplab/trajstore.h"
#include "viplab/worlds.h"

namespace viplab {

// Invalid configuration. path() is a JSON path such as $.train.batch_size.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class WorldKind { kPointMass, kGrid };
const char* to_string(WorldKind k);

struct DataConfig {
  std::string kind = "demos";  // demos | mixed
  std::size_t num_trajectories = 100;
  std::size_t num_failures = 20;  // mixed: rollouts toward the decoy
  double noise_scale = 0.1;
  Difficulty difficulty = Difficulty::kHard;
  std::size_t max_len = 400;
  std::optional<Vec2> goal;  // point mass: fixed goal for every demo
  Vec2 decoy{0.25, 0.75};
};

struct PlanConfig {
  std::size_t episodes = 50;
  Difficulty difficulty = Difficulty::kEasy;
  std::optional<Vec2> goal;  // fixed goal; else sampled per task
};

struct AnalysisConfig {
  std::size_t frame_cap = 50;
  std::size_t bins = 21;
  std::optional<double> range;
};

struct ExperimentConfig {
  WorldKind world = WorldKind::kPointMass;
  PointMassWorld point_mass;
  GridWorld grid;
  ObservationMode observation = ObservationMode::kRawState;
  DataConfig data;
  // input_dim always follows the world and observation mode. Unset seeds are
  // derived from the master seed.
  EncoderConfig encoder;
  std::optional<std::uint64_t> encoder_init_seed;
  VipLossConfig loss;
  TrainConfig train;
  std::optional<std::uint64_t> train_seed;
  MppiConfig mppi;
  PlanConfig plan;
  RwrConfig rwr;
  std::optional<std::uint64_t> rwr_seed;
  AnalysisConfig analysis;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  std::size_t obs_dim() const;
  EncoderConfig resolved_encoder() const;
  TrainConfig resolved_train(Objective objective) const;
  RwrConfig resolved_rwr() const;
};

// Rejects unknown keys and ill-typed or out-of-range values with the JSON
// path of the offending entry.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
// Every field, with derived seeds filled in; parse_config accepts it back.
nlohmann::json resolved_config_json(const ExperimentConfig& config);
void write_resolved_config(const ExperimentConfig& config,
                           const std::filesystem::path& path);

// Seed streams split from the master seed.
enum class SeedStream : std::uint64_t {
  kData = 1,
  kEncoderInit = 2,
  kTrain = 3,
  kTasks = 4,
  kPlan = 5,
  kRwr = 6,
  kEval = 7,
};
std::uint64_t stream_seed(const ExperimentConfig& config, SeedStream stream);

// Demos (or demos plus decoy-goal failures, metadata "role") with the
// generation parameters echoed into the manifest. Rounded to storage width.
TrajectoryDataset generate_dataset(const ExperimentConfig& config);

TrainResult train_encoder(
    const ExperimentConfig& config, const TrajectoryDataset& dataset,
    Objective objective,
    const std::optional<std::filesystem::path>& out_dir = {});

// Throws std::runtime_error naming both widths on a mismatch.
void check_encoder_input(const Encoder& encoder, std::size_t obs_dim,
                         const std::string& what);

// Point-mass tasks for planning and policy evaluation.
std::vector<PointTask> sample_eval_tasks(const ExperimentConfig& config,
                                         std::size_t count,
                                         std::uint64_t seed);
// Goal frames of a task under the configured observation mode.
GoalSpec task_goal(const ExperimentConfig& config, const Encoder& encoder,
                   const PointTask& task);

EvalResult run_planner(const ExperimentConfig& config, const Encoder& encoder,
                       std::span<const PointTask> tasks, std::uint64_t seed,
                       Exec exec = Exec::kParallel);

// Goal frames for offline RL: the last frame of every demo (metadata role
// "demo"), or of every trajectory when no roles are recorded.
Matrix demo_goal_frames(const TrajectoryDataset& dataset);

}  // namespace viplab

#endif  // VIPLAB_PIPELINE_H_
