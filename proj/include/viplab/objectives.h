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
// Pre-training objectives over a trajectory dataset: the value-implicit
// loss, single-view time-contrastive InfoNCE, and squared one-step TD
// (LSTD), plus the Adam training loop that produces encoder checkpoints.

#ifndef VIPLAB_OBJECTIVES_H_
#define VIPLAB_OBJECTIVES_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "viplab/encoder.h"
#include "viplab/gradcore.h"
#include "viplab/trajstore.h"

namespace viplab {

enum class Objective { kVip, kTcn, kLstd };
const char* to_string(Objective o);
Objective objective_from_string(const std::string& s);

// Sign convention of the one-step term inside the log-mean-exp.
//   kResidual: exp(-(r + gamma V(o') - V(o)))
//              = exp(-r + gamma d(o',g) - d(o,g)), V = -d.
//   kLiteral:  exp(d(o,g) - r - gamma d(o',g)).
// Both agree on collapsed embeddings; only kResidual orders frames so that
// distance to the goal grows with temporal distance.
enum class TdForm { kResidual, kLiteral };
const char* to_string(TdForm f);
TdForm td_form_from_string(const std::string& s);

struct VipLossConfig {
  double gamma = 0.98;
  std::size_t num_negatives = 3;
  double l1_embedding_coeff = 0.001;
  double norm_eps = grad::kDefaultNormEps;
  double goal_selfloop = 0.0;
  TdForm td_form = TdForm::kResidual;
  std::size_t tcn_window = 3;

  void validate() const;
  friend bool operator==(const VipLossConfig&, const VipLossConfig&) = default;
};

void to_json(nlohmann::json& j, const VipLossConfig& c);
void from_json(const nlohmann::json& j, VipLossConfig& c);

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  std::size_t num_batches = 2000;
  std::size_t eval_interval = 500;
  std::uint64_t seed = 0;
  Objective objective = Objective::kVip;
  // Wall-clock column of metrics.csv; off keeps the file seed-deterministic.
  bool record_timing = false;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Sparse pre-training reward: 0 at the goal frame, -1 elsewhere.
inline double sparse_reward(bool at_goal) { return at_goal ? 0.0 : -1.0; }

// Loss graphs. Every loss is recorded on `tape` against the encoder's bound
// parameters and returned as a scalar node.
grad::Var vip_loss(const Encoder& encoder, const Encoder::Bound& bound,
                   grad::Tape& tape, const VipBatch& batch,
                   const VipLossConfig& config);
grad::Var tcn_loss(const Encoder& encoder, const Encoder::Bound& bound,
                   grad::Tape& tape, const TcnBatch& batch,
                   const VipLossConfig& config);
grad::Var lstd_loss(const Encoder& encoder, const Encoder::Bound& bound,
                    grad::Tape& tape, const LstdBatch& batch,
                    const VipLossConfig& config);

// Value-only conveniences (own tape).
double vip_loss_value(const Encoder& encoder, const VipBatch& batch,
                      const VipLossConfig& config);
double tcn_loss_value(const Encoder& encoder, const TcnBatch& batch,
                      const VipLossConfig& config);
double lstd_loss_value(const Encoder& encoder, const LstdBatch& batch,
                       const VipLossConfig& config);

struct MetricsRow {
  std::size_t batch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double ms = 0.0;
};

struct TrainResult {
  Encoder encoder;
  std::vector<MetricsRow> metrics;
};

// Raised when the loss or a gradient turns non-finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t batch, const std::string& detail)
      : std::runtime_error("training diverged at batch " +
                           std::to_string(batch) + ": " + detail),
        batch_(batch) {}
  std::size_t batch() const { return batch_; }

 private:
  std::size_t batch_;
};

// Runs the selected objective. When out_dir is set, writes
// checkpoints/encoder_<batch>.venc every eval_interval batches,
// encoder.venc, metrics.csv (batch,loss,grad_norm,ms) and config.json.
TrainResult train(const TrajectoryDataset& dataset,
                  const EncoderConfig& encoder_config,
                  const TrainConfig& train_config,
                  const VipLossConfig& loss_config,
                  const std::optional<std::filesystem::path>& out_dir = {});

void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::filesystem::path& path);

}  // namespace viplab

#endif  // VIPLAB_OBJECTIVES_H_
