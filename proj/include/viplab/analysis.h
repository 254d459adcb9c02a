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

// Evaluation battery over frozen encoders: distance-to-goal curves, bump
// fractions, embedding-reward histograms, reward correlation and the
// strict-decrease check along optimal paths.

#ifndef VIPLAB_ANALYSIS_H_
#define VIPLAB_ANALYSIS_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "viplab/control.h"
#include "viplab/encoder.h"
#include "viplab/parallel.h"
#include "viplab/trajstore.h"

namespace viplab {

struct DistanceCurve {
  std::size_t traj_id = 0;
  std::vector<double> values;
  bool normalized = false;
  bool degenerate = false;  // initial distance 0; values left raw
};

// value_t = ||phi(o_t) - g||. With normalize, values are divided by value_0
// when value_0 > 0.
DistanceCurve distance_curve(const Encoder& encoder,
                             const Trajectory& trajectory,
                             const GoalSpec& goal, bool normalize,
                             std::size_t traj_id = 0);
// Same, over the first `frames` frames with the last of them as the goal.
DistanceCurve distance_curve_to_last(const Encoder& encoder,
                                     const Trajectory& trajectory,
                                     std::size_t frames, bool normalize,
                                     std::size_t traj_id = 0);

// Fraction of steps with value_{t+1} > value_t. Throws std::invalid_argument
// ("curve too short") below two values.
double bump_fraction(std::span<const double> curve);
// Fraction of steps with value_{t+1} <= value_t.
double non_increasing_fraction(std::span<const double> curve);

struct BumpReport {
  std::vector<std::size_t> traj_ids;
  std::vector<double> fractions;
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::vector<std::size_t> skipped_short;
  std::vector<std::size_t> degenerate;
};

// Each trajectory is cut to its first frame_cap frames (goal = last kept
// frame); shorter trajectories are skipped. frame_cap = 0 keeps every
// trajectory whole. Degenerate curves are listed and left out of the
// statistics. Throws std::invalid_argument if nothing qualifies.
BumpReport dataset_bump_report(const Encoder& encoder,
                               const TrajectoryDataset& dataset,
                               std::size_t frame_cap = 50,
                               Exec exec = Exec::kParallel);

struct HistogramOptions {
  std::size_t bins = 21;
  // Half-width of the symmetric range; unset uses the largest |reward|.
  std::optional<double> range;
};

struct HistogramReport {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts_a;
  std::vector<std::size_t> counts_b;  // empty for a single encoder
  // (|A| - |B|) / |B|, unset where |B| = 0.
  std::vector<std::optional<double>> ratio;
  std::size_t undefined_ratios = 0;
};

// Per-transition embedding rewards d_t - d_{t+1} with the goal at each
// trajectory's last frame, divided by that trajectory's initial distance
// (raw when it is 0). Out-of-range rewards fall into the end bins.
std::vector<double> normalized_rewards(const Encoder& encoder,
                                       const TrajectoryDataset& dataset);
HistogramReport reward_histogram(std::span<const Encoder* const> encoders,
                                 const TrajectoryDataset& dataset,
                                 const HistogramOptions& options = {});

struct CorrelationReport {
  std::vector<double> embedding_rewards;
  std::vector<double> true_rewards;
  double r2 = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  bool degenerate = false;  // zero-variance predictor; r2 reported as 0
  std::size_t n() const { return embedding_rewards.size(); }
};

// OLS of true reward on embedding reward. Throws below two samples.
CorrelationReport reward_correlation(std::span<const double> embedding_rewards,
                                     std::span<const double> true_rewards);
CorrelationReport reward_correlation(std::span<const EpisodeResult> episodes);

// Pooled fraction of steps along each trajectory where the distance to its
// last frame strictly decreases.
double prop2_check(const Encoder& encoder, const TrajectoryDataset& paths,
                   Exec exec = Exec::kParallel);

// traj_id,step,distance
void write_curves_csv(std::span<const DistanceCurve> curves,
                      const std::filesystem::path& path);
// traj_id,bump_fraction with trailing mean and std rows
void write_bumps_csv(const BumpReport& report,
                     const std::filesystem::path& path);
// bin_lo,bin_hi,count_a,count_b,ratio (empty cells when undefined)
void write_histogram_csv(const HistogramReport& report,
                         const std::filesystem::path& path);
// embedding_reward,true_reward
void write_correlation_csv(const CorrelationReport& report,
                           const std::filesystem::path& path);
// {r2, slope, intercept, n, degenerate}
nlohmann::json correlation_summary(const CorrelationReport& report);

}  // namespace viplab

#endif  // VIPLAB_ANALYSIS_H_
