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
// Trajectory datasets, the VIPDATA1 binary format, and the samplers that
// feed each pre-training objective.

#ifndef VIPLAB_TRAJSTORE_H_
#define VIPLAB_TRAJSTORE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "viplab/matrix.h"
#include "viplab/parallel.h"

namespace viplab {

struct Trajectory {
  Matrix frames;   // T x D observations, T >= 2
  Matrix actions;  // (T-1) x A, or empty
  Matrix states;   // T x S, or empty
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t length() const { return frames.rows; }
  std::span<const double> frame(std::size_t t) const { return frames.row(t); }
  bool has_actions() const { return !actions.empty(); }
  bool has_states() const { return !states.empty(); }

  // Throws std::invalid_argument if row counts are inconsistent or T < 2.
  void validate() const;
  // Rounds every stored value to 32-bit precision (the on-disk width), so
  // an in-memory dataset and its reloaded copy are identical.
  void round_to_storage();
};

class TrajectoryDataset {
 public:
  TrajectoryDataset() = default;
  explicit TrajectoryDataset(std::vector<Trajectory> trajectories,
                             nlohmann::json manifest = nlohmann::json::object());

  void add(Trajectory trajectory);

  std::size_t size() const { return trajectories_.size(); }
  bool empty() const { return trajectories_.empty(); }
  std::size_t obs_dim() const;
  std::size_t num_transitions() const;
  const Trajectory& operator[](std::size_t i) const { return trajectories_[i]; }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }

  nlohmann::json& manifest() { return manifest_; }
  const nlohmann::json& manifest() const { return manifest_; }

  void round_to_storage();

 private:
  std::vector<Trajectory> trajectories_;
  nlohmann::json manifest_ = nlohmann::json::object();
};

// VIPDATA1 (little endian):
//   "VIPDATA1" | u32 N | N x (u32 T, u32 D, u32 A, u32 S)
//   | per trajectory: f32 frames[T*D], actions[(T-1)*A], states[T*S]
//   | JSON trailer {"manifest": ..., "metadata": [...]}
//   | u64 trailer offset
// Throws FormatError (kEmpty, kBadMagic, kTruncated, kCountMismatch, ...).
void save_dataset(const TrajectoryDataset& dataset,
                  const std::filesystem::path& path);
TrajectoryDataset load_dataset(const std::filesystem::path& path);

// --- samplers ----------------------------------------------------------------

// Consecutive pair (index, index + 1) inside one trajectory.
struct FramePair {
  std::size_t traj = 0;
  std::size_t index = 0;
};

// One sub-trajectory draw: start t, mid k, goal T with t <= k < T.
// With the goal self-loop enabled a draw may instead set k = T; then the mid
// pair is (goal, goal) and goal_flag is 1.
struct VipElement {
  std::size_t traj = 0;
  std::size_t start = 0;
  std::size_t mid = 0;
  std::size_t goal = 0;
  bool goal_flag = false;
  std::vector<FramePair> negatives;

  std::size_t mid_next() const { return goal_flag ? goal : mid + 1; }
};

struct VipBatch {
  const TrajectoryDataset* dataset = nullptr;
  std::vector<VipElement> elements;

  std::span<const double> frame(std::size_t traj, std::size_t t) const {
    return (*dataset)[traj].frame(t);
  }
};

struct VipSamplerOptions {
  std::size_t batch_size = 32;
  std::size_t num_negatives = 3;
  double goal_selfloop = 0.0;  // probability of a k = T draw
};

// Throws std::invalid_argument on violated preconditions.
VipBatch sample_vip_batch(const TrajectoryDataset& dataset,
                          const VipSamplerOptions& options, Rng& rng);

struct TcnTriplet {
  std::size_t traj = 0;
  std::size_t anchor = 0;    // t1
  std::size_t positive = 0;  // t2 = t1 + k, k in [1, window]
  std::size_t negative = 0;  // t3 > t2
  std::vector<FramePair> cross_negatives;  // index field is the frame
};

struct TcnBatch {
  const TrajectoryDataset* dataset = nullptr;
  std::vector<TcnTriplet> triplets;

  std::span<const double> frame(std::size_t traj, std::size_t t) const {
    return (*dataset)[traj].frame(t);
  }
};

struct TcnSamplerOptions {
  std::size_t batch_size = 32;
  std::size_t window = 3;
  std::size_t num_negatives = 3;
};

TcnBatch sample_tcn_triplets(const TrajectoryDataset& dataset,
                             const TcnSamplerOptions& options, Rng& rng);

// (o, o', g) = (o_k, o_{k+1}, o_T) from the VIP sub-trajectory sampler.
struct LstdTuple {
  std::size_t traj = 0;
  std::size_t obs = 0;
  std::size_t next = 0;
  std::size_t goal = 0;
  bool goal_flag = false;
};

struct LstdBatch {
  const TrajectoryDataset* dataset = nullptr;
  std::vector<LstdTuple> tuples;

  std::span<const double> frame(std::size_t traj, std::size_t t) const {
    return (*dataset)[traj].frame(t);
  }
};

LstdBatch sample_lstd_tuples(const TrajectoryDataset& dataset,
                             std::size_t batch_size, Rng& rng,
                             double goal_selfloop = 0.0);

}  // namespace viplab

#endif  // VIPLAB_TRAJSTORE_H_
