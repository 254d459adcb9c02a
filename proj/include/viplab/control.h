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

// Downstream use of a frozen encoder: goal-embedding distance and reward,
// MPPI trajectory optimization against the embedding distance, and offline
// policy learning by reward-weighted regression (with behaviour cloning as
// the uniform-weight special case).

#ifndef VIPLAB_CONTROL_H_
#define VIPLAB_CONTROL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <span>
#include <vector>

#include "json.hpp"
#include "viplab/encoder.h"
#include "viplab/matrix.h"
#include "viplab/parallel.h"
#include "viplab/trajstore.h"
#include "viplab/worlds.h"

namespace viplab {

// One or more goal frames; the goal embedding is their mean embedding.
class GoalSpec {
 public:
  // Throws std::invalid_argument if frames is empty or has the wrong width.
  GoalSpec(const Encoder& encoder, const Matrix& frames);
  GoalSpec(const Encoder& encoder, std::span<const double> frame);

  const Matrix& frames() const { return frames_; }
  const std::vector<double>& embedding() const { return embedding_; }

 private:
  Matrix frames_;
  std::vector<double> embedding_;
};

// ||phi(o) - g||, and the score S = -||phi(o) - g|| <= 0.
double embedding_distance(const Encoder& encoder, std::span<const double> obs,
                          const GoalSpec& goal);
inline double goal_score(const Encoder& encoder, std::span<const double> obs,
                         const GoalSpec& goal) {
  return -embedding_distance(encoder, obs, goal);
}

// R = S(o') - S(o).
double embedding_reward(const Encoder& encoder, std::span<const double> obs,
                        std::span<const double> next_obs,
                        const GoalSpec& goal);
// (1 - gamma) S(o') + (gamma S(o') - S(o)): the shaped expansion, same value.
double embedding_reward_shaped(const Encoder& encoder,
                               std::span<const double> obs,
                               std::span<const double> next_obs,
                               const GoalSpec& goal, double gamma);

// --- MPPI --------------------------------------------------------------------

struct MppiConfig {
  std::size_t horizon = 12;
  std::size_t num_samples = 32;
  double noise_fraction = 0.2;  // sigma = noise_fraction * action range
  double temperature = 0.05;
  bool warm_start = true;
  // mppi_episode only: score rollouts by reaching the true goal (0) or not
  // (-1) instead of by embedding distance. Ablation.
  bool sparse_score = false;

  void validate() const;
  friend bool operator==(const MppiConfig&, const MppiConfig&) = default;
};

void to_json(nlohmann::json& j, const MppiConfig& c);
void from_json(const nlohmann::json& j, MppiConfig& c);

// Softmax of scores / temperature, shifted by the max.
std::vector<double> mppi_weights(std::span<const double> scores,
                                 double temperature);

// Running mean action sequence, horizon x 2.
struct MppiState {
  Matrix mean;
  static MppiState zeros(std::size_t horizon);
};

struct MppiStepInfo {
  std::vector<double> scores;
  std::vector<double> weights;
};

// Samples num_samples perturbations of the mean, rolls each out with the
// true dynamics, scores the final observation by S, and moves the mean to
// the weighted average. Returns the first action of the new mean; with
// warm_start the mean is then shifted one step (zero appended), else
// reset to zero.
Vec2 mppi_plan(const PointMassWorld& world, ObservationMode mode,
               const Vec2& state, const Encoder& encoder,
               const GoalSpec& goal, const MppiConfig& config,
               MppiState& mppi_state, Rng& rng, Exec exec = Exec::kParallel,
               MppiStepInfo* info = nullptr);

struct EpisodeResult {
  bool success = false;
  std::size_t steps = 0;  // first step within tolerance, else the horizon
  double final_error = 0.0;
  Matrix states;                         // (horizon + 1) x 2
  Matrix actions;                        // horizon x 2
  std::vector<double> true_error;        // ||x_t - goal||
  std::vector<double> embedding_distance;  // ||phi(o_t) - g||

  // Per-step decrease in true distance, error_t - error_{t+1}.
  std::vector<double> true_rewards() const;
  // Per-step embedding reward, d_t - d_{t+1}.
  std::vector<double> embedding_rewards() const;
};

EpisodeResult mppi_episode(const PointMassWorld& world, ObservationMode mode,
                           const PointTask& task, const Encoder& encoder,
                           const GoalSpec& goal, const MppiConfig& config,
                           std::size_t horizon, Rng& rng,
                           Exec exec = Exec::kParallel);

// --- policies ----------------------------------------------------------------

// Mean network (an MLP with linear output) and a learned per-dimension log
// standard deviation.
struct GaussianPolicy {
  Encoder mean_net;
  std::vector<double> log_std;

  std::size_t action_dim() const { return log_std.size(); }
  std::vector<double> mean(std::span<const double> input) const;
  // -log N(a; mu(x), diag sigma^2)
  double neg_log_prob(std::span<const double> input,
                      std::span<const double> action) const;
};

bool same_parameters(const GaussianPolicy& a, const GaussianPolicy& b);

struct RwrConfig {
  double tau = 0.1;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t num_steps = 20000;
  double log_weight_clip = 10.0;  // w <= exp(log_weight_clip)
  std::vector<std::size_t> hidden_widths = {256, 256};
  double init_log_std = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const RwrConfig&, const RwrConfig&) = default;
};

void to_json(nlohmann::json& j, const RwrConfig& c);
void from_json(const nlohmann::json& j, RwrConfig& c);

// Policy input: concat(phi(o), state).
std::vector<double> policy_input(const Encoder& encoder,
                                 std::span<const double> obs,
                                 std::span<const double> state);

// Per-transition regression targets and weights, built once.
struct RwrData {
  Matrix inputs;   // concat(phi(o_t), s_t)
  Matrix actions;  // a_t
  std::vector<double> rewards;
  std::vector<double> weights;  // min(exp(tau R), exp(clip))
};

// Throws std::invalid_argument when trajectories lack actions or states, or
// the encoder input width differs from the frames.
RwrData build_rwr_data(const TrajectoryDataset& dataset,
                       const Encoder& encoder, const GoalSpec& goal,
                       const RwrConfig& config);

// Weighted negative log-likelihood of the rows `batch` and its gradient
// (mean over the batch). Elements are processed in fixed chunks and the
// chunk gradients summed in chunk order, so both executions agree bitwise.
double rwr_batch_gradient(const GaussianPolicy& policy, const RwrData& data,
                          std::span<const std::size_t> batch,
                          std::vector<std::vector<double>>& grads,
                          Exec exec = Exec::kParallel);

GaussianPolicy init_policy(std::size_t input_dim, std::size_t action_dim,
                           const RwrConfig& config);

struct RwrResult {
  GaussianPolicy policy;
  std::vector<double> losses;  // per step
};

RwrResult rwr_train(const TrajectoryDataset& dataset, const Encoder& encoder,
                    const GoalSpec& goal, const RwrConfig& config,
                    Exec exec = Exec::kParallel);
// rwr_train with tau = 0.
RwrResult bc_train(const TrajectoryDataset& dataset, const Encoder& encoder,
                   const GoalSpec& goal, RwrConfig config,
                   Exec exec = Exec::kParallel);

void save_policy(const GaussianPolicy& policy,
                 const std::filesystem::path& path);
GaussianPolicy load_policy(const std::filesystem::path& path);

// --- evaluation --------------------------------------------------------------

using PolicyFn = std::function<Vec2(const Vec2& state,
                                    std::span<const double> obs, Rng& rng)>;

// Deterministic mean action (or a sample when stochastic) of the policy.
PolicyFn policy_fn(const GaussianPolicy& policy, const Encoder& encoder,
                   bool stochastic = false);
PolicyFn expert_policy_fn(const PointMassWorld& world, const Vec2& goal);

struct EvalResult {
  double success_rate = 0.0;
  std::vector<EpisodeResult> episodes;
};

// One episode per task, each with its own rng stream split from the call's
// rng; episodes run in parallel and are collected in task order.
EvalResult eval_policy(const PointMassWorld& world, ObservationMode mode,
                       const PolicyFn& policy, const Encoder& encoder,
                       const GoalSpec& goal, std::span<const PointTask> tasks,
                       std::size_t horizon, Rng& rng,
                       Exec exec = Exec::kParallel);

// episode,success,steps,final_error
void write_episode_summary_csv(std::span<const EpisodeResult> episodes,
                               const std::filesystem::path& path);
// episode,step,true_error,embedding_distance
void write_episode_steps_csv(std::span<const EpisodeResult> episodes,
                             const std::filesystem::path& path);

}  // namespace viplab

#endif  // VIPLAB_CONTROL_H_
