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
#include "viplab/objectives.h"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "viplab/parallel.h"

namespace viplab {

namespace {

// Embeds each distinct (trajectory, frame) once per tape.
class EmbeddingCache {
 public:
  EmbeddingCache(const Encoder& encoder, const Encoder::Bound& bound,
                 grad::Tape& tape, const TrajectoryDataset& dataset)
      : encoder_(encoder), bound_(bound), tape_(tape), dataset_(dataset) {}

  grad::Var operator()(std::size_t traj, std::size_t index) {
    const auto key = std::make_pair(traj, index);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    grad::Var e = encoder_.forward(bound_, tape_, dataset_[traj].frame(index));
    cache_.emplace(key, e);
    order_.push_back(e);
    return e;
  }

  const std::vector<grad::Var>& all() const { return order_; }

 private:
  const Encoder& encoder_;
  const Encoder::Bound& bound_;
  grad::Tape& tape_;
  const TrajectoryDataset& dataset_;
  std::map<std::pair<std::size_t, std::size_t>, grad::Var> cache_;
  std::vector<grad::Var> order_;
};

grad::Var dist(grad::Var a, grad::Var b, double eps) {
  return grad::l2norm(grad::sub(a, b), eps);
}

grad::Var plus_constant(grad::Tape& tape, grad::Var x, double c) {
  return grad::add(x, tape.constant(grad::Tensor::scalar(c)));
}

// Exponent of one log-mean-exp term for transition (o -> o') toward g.
grad::Var td_exponent(grad::Tape& tape, grad::Var d_o, grad::Var d_next,
                      double reward, const VipLossConfig& c) {
  if (c.td_form == TdForm::kResidual) {
    return plus_constant(tape, grad::sub(grad::scale(d_next, c.gamma), d_o),
                         -reward);
  }
  return plus_constant(tape, grad::sub(d_o, grad::scale(d_next, c.gamma)),
                       -reward);
}

template <typename Batch, typename LossFn>
double value_only(const Encoder& encoder, const Batch& batch,
                  const VipLossConfig& config, LossFn fn) {
  grad::Tape tape;
  const auto bound = encoder.bind(tape);
  return fn(encoder, bound, tape, batch, config).item();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

const char* to_string(Objective o) {
  switch (o) {
    case Objective::kVip: return "vip";
    case Objective::kTcn: return "tcn";
    case Objective::kLstd: return "lstd";
  }
  return "?";
}

Objective objective_from_string(const std::string& s) {
  if (s == "vip") return Objective::kVip;
  if (s == "tcn") return Objective::kTcn;
  if (s == "lstd") return Objective::kLstd;
  throw std::invalid_argument("unknown objective '" + s + "'");
}

const char* to_string(TdForm f) {
  return f == TdForm::kResidual ? "residual" : "literal";
}

TdForm td_form_from_string(const std::string& s) {
  if (s == "residual") return TdForm::kResidual;
  if (s == "literal") return TdForm::kLiteral;
  throw std::invalid_argument("unknown td_form '" + s + "'");
}

void VipLossConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("gamma must lie in (0,1)");
  }
  if (l1_embedding_coeff < 0.0) {
    throw std::invalid_argument("l1_embedding_coeff must be >= 0");
  }
  if (!(norm_eps > 0.0)) throw std::invalid_argument("norm_eps must be > 0");
  if (goal_selfloop < 0.0 || goal_selfloop > 1.0) {
    throw std::invalid_argument("goal_selfloop must lie in [0,1]");
  }
  if (tcn_window < 1) throw std::invalid_argument("tcn_window must be >= 1");
}

void to_json(nlohmann::json& j, const VipLossConfig& c) {
  j = nlohmann::json{{"gamma", c.gamma},
                     {"num_negatives", c.num_negatives},
                     {"l1_embedding_coeff", c.l1_embedding_coeff},
                     {"norm_eps", c.norm_eps},
                     {"goal_selfloop", c.goal_selfloop},
                     {"td_form", to_string(c.td_form)},
                     {"tcn_window", c.tcn_window}};
}

void from_json(const nlohmann::json& j, VipLossConfig& c) {
  c = VipLossConfig{};
  c.gamma = j.value("gamma", c.gamma);
  c.num_negatives = j.value("num_negatives", c.num_negatives);
  c.l1_embedding_coeff = j.value("l1_embedding_coeff", c.l1_embedding_coeff);
  c.norm_eps = j.value("norm_eps", c.norm_eps);
  c.goal_selfloop = j.value("goal_selfloop", c.goal_selfloop);
  if (j.contains("td_form")) {
    c.td_form = td_form_from_string(j.at("td_form").get<std::string>());
  }
  c.tcn_window = j.value("tcn_window", c.tcn_window);
  c.validate();
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (num_batches < 1) throw std::invalid_argument("num_batches must be >= 1");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be > 0");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"num_batches", c.num_batches},
                     {"eval_interval", c.eval_interval},
                     {"seed", c.seed},
                     {"objective", to_string(c.objective)},
                     {"record_timing", c.record_timing}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.num_batches = j.value("num_batches", c.num_batches);
  c.eval_interval = j.value("eval_interval", c.eval_interval);
  c.seed = j.value("seed", c.seed);
  if (j.contains("objective")) {
    c.objective = objective_from_string(j.at("objective").get<std::string>());
  }
  c.record_timing = j.value("record_timing", c.record_timing);
  c.validate();
}

// --- losses -------------------------------------------------------------------

grad::Var vip_loss(const Encoder& encoder, const Encoder::Bound& bound,
                   grad::Tape& tape, const VipBatch& batch,
                   const VipLossConfig& config) {
  if (batch.dataset == nullptr || batch.elements.empty()) {
    throw std::invalid_argument("vip_loss: empty batch");
  }
  EmbeddingCache embed(encoder, bound, tape, *batch.dataset);
  const double eps = config.norm_eps;
  std::vector<grad::Var> attraction;
  std::vector<grad::Var> exponents;
  for (const VipElement& e : batch.elements) {
    const grad::Var g = embed(e.traj, e.goal);
    attraction.push_back(dist(embed(e.traj, e.start), g, eps));
    const grad::Var d_o = dist(embed(e.traj, e.mid), g, eps);
    const grad::Var d_next = dist(embed(e.traj, e.mid_next()), g, eps);
    exponents.push_back(
        td_exponent(tape, d_o, d_next, sparse_reward(e.goal_flag), config));
    // Cross-trajectory negatives are scored against the anchor's goal.
    for (const FramePair& n : e.negatives) {
      const grad::Var dn_o = dist(embed(n.traj, n.index), g, eps);
      const grad::Var dn_next = dist(embed(n.traj, n.index + 1), g, eps);
      exponents.push_back(
          td_exponent(tape, dn_o, dn_next, sparse_reward(false), config));
    }
  }
  grad::Var loss = grad::add(
      grad::scale(grad::mean(attraction), 1.0 - config.gamma),
      grad::log_mean_exp(exponents));
  if (config.l1_embedding_coeff > 0.0) {
    std::vector<grad::Var> l1;
    for (grad::Var v : embed.all()) l1.push_back(grad::sum(grad::abs(v)));
    loss = grad::add(loss,
                     grad::scale(grad::mean(l1), config.l1_embedding_coeff));
  }
  return loss;
}

grad::Var tcn_loss(const Encoder& encoder, const Encoder::Bound& bound,
                   grad::Tape& tape, const TcnBatch& batch,
                   const VipLossConfig& config) {
  if (batch.dataset == nullptr || batch.triplets.empty()) {
    throw std::invalid_argument("tcn_loss: empty batch");
  }
  EmbeddingCache embed(encoder, bound, tape, *batch.dataset);
  const double eps = config.norm_eps;
  std::vector<grad::Var> terms;
  for (const TcnTriplet& t : batch.triplets) {
    const grad::Var a = embed(t.traj, t.anchor);
    const grad::Var d_pos = dist(a, embed(t.traj, t.positive), eps);
    std::vector<grad::Var> neg_logits{grad::neg(dist(a, embed(t.traj, t.negative), eps))};
    for (const FramePair& n : t.cross_negatives) {
      neg_logits.push_back(grad::neg(dist(a, embed(n.traj, n.index), eps)));
    }
    // -log(exp(-d_pos) / mean exp(-d_neg)) = d_pos + log mean exp(-d_neg)
    terms.push_back(grad::add(d_pos, grad::log_mean_exp(neg_logits)));
  }
  return grad::mean(terms);
}

grad::Var lstd_loss(const Encoder& encoder, const Encoder::Bound& bound,
                    grad::Tape& tape, const LstdBatch& batch,
                    const VipLossConfig& config) {
  if (batch.dataset == nullptr || batch.tuples.empty()) {
    throw std::invalid_argument("lstd_loss: empty batch");
  }
  EmbeddingCache embed(encoder, bound, tape, *batch.dataset);
  const double eps = config.norm_eps;
  std::vector<grad::Var> terms;
  for (const LstdTuple& t : batch.tuples) {
    const grad::Var g = embed(t.traj, t.goal);
    const grad::Var d_o = dist(embed(t.traj, t.obs), g, eps);
    const grad::Var d_next = dist(embed(t.traj, t.next), g, eps);
    // r + gamma V(o') - V(o) with V = -d
    const grad::Var td = plus_constant(
        tape, grad::sub(d_o, grad::scale(d_next, config.gamma)),
        sparse_reward(t.goal_flag));
    terms.push_back(grad::square(td));
  }
  return grad::mean(terms);
}

double vip_loss_value(const Encoder& encoder, const VipBatch& batch,
                      const VipLossConfig& config) {
  return value_only(encoder, batch, config, vip_loss);
}

double tcn_loss_value(const Encoder& encoder, const TcnBatch& batch,
                      const VipLossConfig& config) {
  return value_only(encoder, batch, config, tcn_loss);
}

double lstd_loss_value(const Encoder& encoder, const LstdBatch& batch,
                       const VipLossConfig& config) {
  return value_only(encoder, batch, config, lstd_loss);
}

// --- training -----------------------------------------------------------------

void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "batch,loss,grad_norm,ms\n";
  for (const auto& r : rows) {
    out << r.batch << ',' << fmt(r.loss) << ',' << fmt(r.grad_norm) << ','
        << fmt(r.ms) << '\n';
  }
}

TrainResult train(const TrajectoryDataset& dataset,
                  const EncoderConfig& encoder_config,
                  const TrainConfig& train_config,
                  const VipLossConfig& loss_config,
                  const std::optional<std::filesystem::path>& out_dir) {
  train_config.validate();
  loss_config.validate();
  if (dataset.obs_dim() != encoder_config.input_dim) {
    throw std::invalid_argument(
        "dataset observation dim " + std::to_string(dataset.obs_dim()) +
        " != encoder input dim " + std::to_string(encoder_config.input_dim));
  }
  if (out_dir) {
    std::filesystem::create_directories(*out_dir / "checkpoints");
    nlohmann::json resolved{{"encoder", encoder_config},
                            {"train", train_config},
                            {"loss", loss_config}};
    std::ofstream(*out_dir / "config.json") << resolved.dump(2) << '\n';
  }

  TrainResult result{Encoder::init(encoder_config), {}};
  Encoder& encoder = result.encoder;
  grad::AdamState adam = grad::AdamState::for_parameters(encoder.parameters());
  Rng rng = make_rng(train_config.seed, 0x7a11);

  VipSamplerOptions vip_opts{train_config.batch_size, loss_config.num_negatives,
                             loss_config.goal_selfloop};
  TcnSamplerOptions tcn_opts{train_config.batch_size, loss_config.tcn_window,
                             loss_config.num_negatives};

  for (std::size_t b = 1; b <= train_config.num_batches; ++b) {
    const auto t0 = std::chrono::steady_clock::now();
    grad::Tape tape;
    const auto bound = encoder.bind(tape);
    grad::Var loss;
    VipBatch vip_batch;
    TcnBatch tcn_batch;
    LstdBatch lstd_batch;
    switch (train_config.objective) {
      case Objective::kVip:
        vip_batch = sample_vip_batch(dataset, vip_opts, rng);
        loss = vip_loss(encoder, bound, tape, vip_batch, loss_config);
        break;
      case Objective::kTcn:
        tcn_batch = sample_tcn_triplets(dataset, tcn_opts, rng);
        loss = tcn_loss(encoder, bound, tape, tcn_batch, loss_config);
        break;
      case Objective::kLstd:
        lstd_batch = sample_lstd_tuples(dataset, train_config.batch_size, rng,
                                        loss_config.goal_selfloop);
        loss = lstd_loss(encoder, bound, tape, lstd_batch, loss_config);
        break;
    }
    const double loss_value = loss.item();
    tape.backward(loss);
    auto grads = encoder.gradients(bound, tape);
    double sq = 0.0;
    for (const auto& g : grads) {
      for (double v : g) sq += v * v;
    }
    if (!std::isfinite(loss_value) || !std::isfinite(sq)) {
      std::string detail = "loss=" + fmt(loss_value);
      if (out_dir) {
        nlohmann::json dump{{"batch", b}, {"objective", to_string(train_config.objective)}};
        if (train_config.objective == Objective::kVip) {
          for (const auto& e : vip_batch.elements) {
            dump["elements"].push_back({e.traj, e.start, e.mid, e.goal});
          }
        }
        const auto path = *out_dir / ("nan_batch_" + std::to_string(b) + ".json");
        std::ofstream(path) << dump.dump(2) << '\n';
        detail += ", batch dump " + path.string();
      }
      throw DivergenceError(b, detail);
    }
    grad::adam_step(encoder.parameters(), grads, adam, train_config.learning_rate);
    const double ms =
        train_config.record_timing
            ? std::chrono::duration<double, std::milli>(
                  std::chrono::steady_clock::now() - t0)
                  .count()
            : 0.0;
    result.metrics.push_back({b, loss_value, std::sqrt(sq), ms});
    if (out_dir && train_config.eval_interval > 0 &&
        b % train_config.eval_interval == 0) {
      save_encoder(encoder, *out_dir / "checkpoints" /
                                ("encoder_" + std::to_string(b) + ".venc"));
    }
  }
  if (out_dir) {
    save_encoder(encoder, *out_dir / "encoder.venc");
    write_metrics_csv(result.metrics, *out_dir / "metrics.csv");
  }
  return result;
}

}  // namespace viplab
