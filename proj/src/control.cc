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

#include "viplab/control.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "viplab/errors.h"

namespace viplab {

namespace {

double norm_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Chunk width for batched gradients; fixed so the summation order never
// depends on the thread count.
constexpr std::size_t kGradChunk = 8;

std::vector<std::vector<double>> zeros_like(
    const std::vector<grad::Parameter>& params) {
  std::vector<std::vector<double>> g;
  g.reserve(params.size());
  for (const auto& p : params) g.emplace_back(p.value.size(), 0.0);
  return g;
}

}  // namespace

// --- goal and reward ---------------------------------------------------------

GoalSpec::GoalSpec(const Encoder& encoder, const Matrix& frames)
    : frames_(frames) {
  if (frames.rows == 0) throw std::invalid_argument("goal: no goal frames");
  if (frames.cols != encoder.input_dim()) {
    throw std::invalid_argument(
        "goal: frames have " + std::to_string(frames.cols) +
        " dims, encoder expects " + std::to_string(encoder.input_dim()));
  }
  embedding_.assign(encoder.output_dim(), 0.0);
  for (std::size_t i = 0; i < frames.rows; ++i) {
    const auto e = encoder.embed(frames.row(i));
    for (std::size_t k = 0; k < e.size(); ++k) embedding_[k] += e[k];
  }
  for (double& v : embedding_) v /= static_cast<double>(frames.rows);
}

GoalSpec::GoalSpec(const Encoder& encoder, std::span<const double> frame)
    : GoalSpec(encoder, Matrix(1, frame.size(),
                               std::vector<double>(frame.begin(), frame.end()))) {}

double embedding_distance(const Encoder& encoder, std::span<const double> obs,
                          const GoalSpec& goal) {
  const auto e = encoder.embed(obs);
  return norm_diff(e, goal.embedding());
}

double embedding_reward(const Encoder& encoder, std::span<const double> obs,
                        std::span<const double> next_obs,
                        const GoalSpec& goal) {
  return goal_score(encoder, next_obs, goal) - goal_score(encoder, obs, goal);
}

double embedding_reward_shaped(const Encoder& encoder,
                               std::span<const double> obs,
                               std::span<const double> next_obs,
                               const GoalSpec& goal, double gamma) {
  const double s = goal_score(encoder, obs, goal);
  const double s_next = goal_score(encoder, next_obs, goal);
  return (1.0 - gamma) * s_next + (gamma * s_next - s);
}

// --- MPPI --------------------------------------------------------------------

void MppiConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("mppi: horizon must be >= 1");
  if (num_samples < 2) {
    throw std::invalid_argument("mppi: num_samples must be >= 2");
  }
  if (!(noise_fraction > 0.0)) {
    throw std::invalid_argument("mppi: noise_fraction must be > 0");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("mppi: temperature must be > 0");
  }
}

void to_json(nlohmann::json& j, const MppiConfig& c) {
  j = nlohmann::json{{"horizon", c.horizon},
                     {"num_samples", c.num_samples},
                     {"noise_fraction", c.noise_fraction},
                     {"temperature", c.temperature},
                     {"warm_start", c.warm_start},
                     {"sparse_score", c.sparse_score}};
}

void from_json(const nlohmann::json& j, MppiConfig& c) {
  c = MppiConfig{};
  c.horizon = j.value("horizon", c.horizon);
  c.num_samples = j.value("num_samples", c.num_samples);
  c.noise_fraction = j.value("noise_fraction", c.noise_fraction);
  c.temperature = j.value("temperature", c.temperature);
  c.warm_start = j.value("warm_start", c.warm_start);
  c.sparse_score = j.value("sparse_score", c.sparse_score);
}

std::vector<double> mppi_weights(std::span<const double> scores,
                                 double temperature) {
  if (scores.empty()) throw std::invalid_argument("mppi: no scores");
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> w(scores.size());
  double total = 0.0;
  for (std::size_t n = 0; n < scores.size(); ++n) {
    w[n] = std::exp((scores[n] - top) / temperature);
    total += w[n];
  }
  for (double& v : w) v /= total;
  return w;
}

MppiState MppiState::zeros(std::size_t horizon) {
  return MppiState{Matrix(horizon, 2)};
}

namespace {

using Scorer = std::function<double(const Vec2& final_state)>;

Vec2 plan_impl(const PointMassWorld& world, const Vec2& state,
               const Scorer& score, const MppiConfig& config,
               std::size_t steps_left, MppiState& mppi_state, Rng& rng,
               Exec exec, MppiStepInfo* info) {
  config.validate();
  if (steps_left < 1) throw std::invalid_argument("mppi: no steps left");
  const std::size_t h = std::min(config.horizon, steps_left);
  const std::size_t n = config.num_samples;
  if (mppi_state.mean.rows != config.horizon || mppi_state.mean.cols != 2) {
    mppi_state = MppiState::zeros(config.horizon);
  }
  const double sigma = config.noise_fraction * 2.0 * world.max_action;
  const std::uint64_t call_seed = rng();

  // samples[s] is an h x 2 clipped action sequence.
  std::vector<Matrix> samples(n, Matrix(h, 2));
  std::vector<double> scores(n, 0.0);
  const Matrix& mean = mppi_state.mean;
  auto rollout = [&](std::size_t s) {
    Rng local = make_rng(call_seed, s);
    std::normal_distribution<double> noise(0.0, sigma);
    Vec2 x = state;
    Matrix& seq = samples[s];
    for (std::size_t t = 0; t < h; ++t) {
      double n0 = noise(local);
      double n1 = noise(local);
      // Sample 0 keeps the current mean as a candidate.
      if (s == 0) n0 = n1 = 0.0;
      const Vec2 a = world.clip_action({mean(t, 0) + n0, mean(t, 1) + n1});
      seq(t, 0) = a[0];
      seq(t, 1) = a[1];
      x = world.step(x, a);
    }
    scores[s] = score(x);
  };
  const auto count = static_cast<std::int64_t>(n);
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t s = 0; s < count; ++s) rollout(static_cast<std::size_t>(s));
  } else {
    for (std::int64_t s = 0; s < count; ++s) rollout(static_cast<std::size_t>(s));
  }

  const auto weights = mppi_weights(scores, config.temperature);
  Matrix next = mean;
  std::fill(next.data.begin(), next.data.begin() + 2 * h, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < 2 * h; ++k) {
      next.data[k] += weights[s] * samples[s].data[k];
    }
  }
  const Vec2 action{next(0, 0), next(0, 1)};
  if (config.warm_start) {
    const std::size_t full = config.horizon;
    for (std::size_t t = 0; t + 1 < full; ++t) {
      next(t, 0) = next(t + 1, 0);
      next(t, 1) = next(t + 1, 1);
    }
    next(full - 1, 0) = 0.0;
    next(full - 1, 1) = 0.0;
  } else {
    next = Matrix(config.horizon, 2);
  }
  mppi_state.mean = std::move(next);
  if (info) {
    info->scores = std::move(scores);
    info->weights = weights;
  }
  return action;
}

}  // namespace

Vec2 mppi_plan(const PointMassWorld& world, ObservationMode mode,
               const Vec2& state, const Encoder& encoder,
               const GoalSpec& goal, const MppiConfig& config,
               MppiState& mppi_state, Rng& rng, Exec exec,
               MppiStepInfo* info) {
  const Scorer score = [&](const Vec2& x) {
    return goal_score(encoder, world.observe(x, mode), goal);
  };
  return plan_impl(world, state, score, config, config.horizon, mppi_state,
                   rng, exec, info);
}

std::vector<double> EpisodeResult::true_rewards() const {
  std::vector<double> r;
  for (std::size_t t = 0; t + 1 < true_error.size(); ++t) {
    r.push_back(true_error[t] - true_error[t + 1]);
  }
  return r;
}

std::vector<double> EpisodeResult::embedding_rewards() const {
  std::vector<double> r;
  for (std::size_t t = 0; t + 1 < embedding_distance.size(); ++t) {
    r.push_back(embedding_distance[t] - embedding_distance[t + 1]);
  }
  return r;
}

namespace {

// Shared closed loop for planners and policies.
template <typename ActFn>
EpisodeResult run_episode(const PointMassWorld& world, ObservationMode mode,
                          const PointTask& task, const Encoder& encoder,
                          const GoalSpec& goal, std::size_t horizon,
                          ActFn&& act) {
  EpisodeResult r;
  r.steps = horizon;
  bool reached = false;
  Vec2 x = task.start;
  auto record = [&](std::size_t t) {
    r.states.append_row(x);
    const auto obs = world.observe(x, mode);
    r.true_error.push_back(distance(x, task.goal));
    r.embedding_distance.push_back(embedding_distance(encoder, obs, goal));
    if (!reached && world.reached(x, task.goal)) {
      reached = true;
      r.steps = t;
    }
    return obs;
  };
  auto obs = record(0);
  for (std::size_t t = 0; t < horizon; ++t) {
    const Vec2 a = world.clip_action(act(x, obs, t));
    r.actions.append_row(a);
    x = world.step(x, a);
    obs = record(t + 1);
  }
  r.final_error = r.true_error.back();
  r.success = world.reached(x, task.goal);
  return r;
}

}  // namespace

EpisodeResult mppi_episode(const PointMassWorld& world, ObservationMode mode,
                           const PointTask& task, const Encoder& encoder,
                           const GoalSpec& goal, const MppiConfig& config,
                           std::size_t horizon, Rng& rng, Exec exec) {
  MppiState state = MppiState::zeros(config.horizon);
  Scorer score;
  if (config.sparse_score) {
    score = [&](const Vec2& x) {
      return world.reached(x, task.goal) ? 0.0 : -1.0;
    };
  } else {
    score = [&](const Vec2& x) {
      return goal_score(encoder, world.observe(x, mode), goal);
    };
  }
  return run_episode(world, mode, task, encoder, goal, horizon,
                     [&](const Vec2& x, std::span<const double>,
                         std::size_t t) {
                       return plan_impl(world, x, score, config, horizon - t,
                                        state, rng, exec, nullptr);
                     });
}

// --- policies ----------------------------------------------------------------

std::vector<double> GaussianPolicy::mean(std::span<const double> input) const {
  return mean_net.embed(input);
}

double GaussianPolicy::neg_log_prob(std::span<const double> input,
                                    std::span<const double> action) const {
  if (action.size() != log_std.size()) {
    throw std::invalid_argument("policy: action has " +
                                std::to_string(action.size()) +
                                " dims, policy has " +
                                std::to_string(log_std.size()));
  }
  const auto mu = mean(input);
  double nll = 0.0;
  for (std::size_t d = 0; d < mu.size(); ++d) {
    const double z = (action[d] - mu[d]) * std::exp(-log_std[d]);
    nll += 0.5 * z * z + log_std[d] + 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return nll;
}

bool same_parameters(const GaussianPolicy& a, const GaussianPolicy& b) {
  if (a.log_std != b.log_std) return false;
  if (!(a.mean_net.config() == b.mean_net.config())) return false;
  const auto& pa = a.mean_net.parameters();
  const auto& pb = b.mean_net.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].value.data != pb[i].value.data) return false;
  }
  return true;
}

void RwrConfig::validate() const {
  if (!(tau >= 0.0)) throw std::invalid_argument("rwr: tau must be >= 0");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("rwr: learning_rate must be > 0");
  }
  if (batch_size < 1) throw std::invalid_argument("rwr: batch_size must be >= 1");
  if (!(log_weight_clip >= 0.0)) {
    throw std::invalid_argument("rwr: log_weight_clip must be >= 0");
  }
  for (std::size_t w : hidden_widths) {
    if (w < 1) throw std::invalid_argument("rwr: hidden widths must be >= 1");
  }
}

void to_json(nlohmann::json& j, const RwrConfig& c) {
  j = nlohmann::json{{"tau", c.tau},
                     {"learning_rate", c.learning_rate},
                     {"batch_size", c.batch_size},
                     {"num_steps", c.num_steps},
                     {"log_weight_clip", c.log_weight_clip},
                     {"hidden_widths", c.hidden_widths},
                     {"init_log_std", c.init_log_std},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, RwrConfig& c) {
  c = RwrConfig{};
  c.tau = j.value("tau", c.tau);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.num_steps = j.value("num_steps", c.num_steps);
  c.log_weight_clip = j.value("log_weight_clip", c.log_weight_clip);
  c.hidden_widths = j.value("hidden_widths", c.hidden_widths);
  c.init_log_std = j.value("init_log_std", c.init_log_std);
  c.seed = j.value("seed", c.seed);
}

std::vector<double> policy_input(const Encoder& encoder,
                                 std::span<const double> obs,
                                 std::span<const double> state) {
  std::vector<double> x = encoder.embed(obs);
  x.insert(x.end(), state.begin(), state.end());
  return x;
}

RwrData build_rwr_data(const TrajectoryDataset& dataset,
                       const Encoder& encoder, const GoalSpec& goal,
                       const RwrConfig& config) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("rwr: empty dataset");
  RwrData data;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Trajectory& traj = dataset[i];
    if (!traj.has_actions() || !traj.has_states()) {
      throw std::invalid_argument("rwr: trajectory " + std::to_string(i) +
                                  " has no actions or states");
    }
    if (traj.frames.cols != encoder.input_dim()) {
      throw std::invalid_argument(
          "rwr: frames have " + std::to_string(traj.frames.cols) +
          " dims, encoder expects " + std::to_string(encoder.input_dim()));
    }
    const Matrix emb = encoder.embed_batch(traj.frames, Exec::kSerial);
    std::vector<double> dist(traj.length());
    for (std::size_t t = 0; t < traj.length(); ++t) {
      dist[t] = norm_diff(emb.row(t), goal.embedding());
    }
    for (std::size_t t = 0; t + 1 < traj.length(); ++t) {
      std::vector<double> x(emb.row(t).begin(), emb.row(t).end());
      x.insert(x.end(), traj.states.row(t).begin(), traj.states.row(t).end());
      data.inputs.append_row(x);
      data.actions.append_row(traj.actions.row(t));
      const double r = dist[t] - dist[t + 1];
      data.rewards.push_back(r);
      data.weights.push_back(
          std::exp(std::min(config.tau * r, config.log_weight_clip)));
    }
  }
  return data;
}

double rwr_batch_gradient(const GaussianPolicy& policy, const RwrData& data,
                          std::span<const std::size_t> batch,
                          std::vector<std::vector<double>>& grads,
                          Exec exec) {
  if (batch.empty()) throw std::invalid_argument("rwr: empty batch");
  const Encoder& net = policy.mean_net;
  const std::size_t adim = policy.action_dim();
  const std::size_t num_chunks = (batch.size() + kGradChunk - 1) / kGradChunk;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  std::vector<double> inv_var(adim);
  for (std::size_t d = 0; d < adim; ++d) {
    inv_var[d] = std::exp(-2.0 * policy.log_std[d]);
  }

  struct ChunkOut {
    std::vector<std::vector<double>> grads;
    std::vector<double> log_std_grad;
    double loss = 0.0;
  };
  std::vector<ChunkOut> chunks(num_chunks);
  auto run_chunk = [&](std::size_t c) {
    const std::size_t lo = c * kGradChunk;
    const std::size_t hi = std::min(batch.size(), lo + kGradChunk);
    ChunkOut& out = chunks[c];
    out.grads = zeros_like(net.parameters());
    out.log_std_grad.assign(adim, 0.0);
    Matrix x(hi - lo, data.inputs.cols);
    for (std::size_t r = lo; r < hi; ++r) {
      const auto src = data.inputs.row(batch[r]);
      std::copy(src.begin(), src.end(), x.row(r - lo).begin());
    }
    net.backprop_batch(
        x,
        [&](std::size_t row, std::span<const double> mu,
            std::span<double> dmu) {
          const std::size_t idx = batch[lo + row];
          const auto a = data.actions.row(idx);
          const double w = data.weights[idx] * inv_b;
          for (std::size_t d = 0; d < adim; ++d) {
            const double diff = mu[d] - a[d];
            const double z2 = diff * diff * inv_var[d];
            out.loss += w * (0.5 * z2 + policy.log_std[d] + half_log_2pi);
            dmu[d] = w * diff * inv_var[d];
            out.log_std_grad[d] += w * (1.0 - z2);
          }
        },
        out.grads);
  };
  const auto count = static_cast<std::int64_t>(num_chunks);
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < count; ++c) run_chunk(static_cast<std::size_t>(c));
  } else {
    for (std::int64_t c = 0; c < count; ++c) run_chunk(static_cast<std::size_t>(c));
  }

  grads = zeros_like(net.parameters());
  grads.emplace_back(adim, 0.0);
  double loss = 0.0;
  for (const ChunkOut& c : chunks) {
    for (std::size_t p = 0; p < c.grads.size(); ++p) {
      for (std::size_t k = 0; k < c.grads[p].size(); ++k) {
        grads[p][k] += c.grads[p][k];
      }
    }
    for (std::size_t d = 0; d < adim; ++d) grads.back()[d] += c.log_std_grad[d];
    loss += c.loss;
  }
  return loss;
}

GaussianPolicy init_policy(std::size_t input_dim, std::size_t action_dim,
                           const RwrConfig& config) {
  EncoderConfig ec;
  ec.input_dim = input_dim;
  ec.hidden_widths = config.hidden_widths;
  ec.output_dim = action_dim;
  ec.activation = Activation::kRelu;
  ec.init_seed = derive_seed(config.seed, 0x9011c7);
  return GaussianPolicy{Encoder::init(ec),
                        std::vector<double>(action_dim, config.init_log_std)};
}

RwrResult rwr_train(const TrajectoryDataset& dataset, const Encoder& encoder,
                    const GoalSpec& goal, const RwrConfig& config, Exec exec) {
  const RwrData data = build_rwr_data(dataset, encoder, goal, config);
  RwrResult result{init_policy(data.inputs.cols, data.actions.cols, config),
                   {}};
  GaussianPolicy& policy = result.policy;
  std::vector<grad::Parameter>& net_params = policy.mean_net.parameters();
  std::vector<grad::Parameter> std_param{
      {"log_std", grad::Tensor::vector(policy.log_std)}};
  auto net_adam = grad::AdamState::for_parameters(net_params);
  auto std_adam = grad::AdamState::for_parameters(std_param);

  Rng rng = make_rng(config.seed, 0x5a3d);
  std::uniform_int_distribution<std::size_t> pick(0, data.inputs.rows - 1);
  std::vector<std::size_t> batch(config.batch_size);
  std::vector<std::vector<double>> grads;
  result.losses.reserve(config.num_steps);
  for (std::size_t step = 0; step < config.num_steps; ++step) {
    for (auto& b : batch) b = pick(rng);
    const double loss = rwr_batch_gradient(policy, data, batch, grads, exec);
    result.losses.push_back(loss);
    const std::vector<double> std_grad = std::move(grads.back());
    grads.pop_back();
    grad::adam_step(net_params, grads, net_adam, config.learning_rate);
    grad::adam_step(std_param, std::span(&std_grad, 1), std_adam,
                    config.learning_rate);
    policy.log_std = std_param[0].value.data;
  }
  return result;
}

RwrResult bc_train(const TrajectoryDataset& dataset, const Encoder& encoder,
                   const GoalSpec& goal, RwrConfig config, Exec exec) {
  config.tau = 0.0;
  return rwr_train(dataset, encoder, goal, config, exec);
}

void save_policy(const GaussianPolicy& policy,
                 const std::filesystem::path& path) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : policy.mean_net.parameters()) {
    params.push_back({{"name", p.name},
                      {"shape", p.value.shape},
                      {"data", p.value.data}});
  }
  const nlohmann::json j{{"format", "viplab-policy-1"},
                         {"mean_net",
                          {{"config", policy.mean_net.config()},
                           {"parameters", params}}},
                         {"log_std", policy.log_std}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  }
  out << j.dump() << '\n';
  if (!out) {
    throw FormatError(FormatErrorCode::kIo, "write failed: " + path.string());
  }
}

GaussianPolicy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  }
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != "viplab-policy-1") {
      throw FormatError(FormatErrorCode::kBadMagic, path.string());
    }
    const auto config = j.at("mean_net").at("config").get<EncoderConfig>();
    GaussianPolicy policy{Encoder::zeros(config),
                          j.at("log_std").get<std::vector<double>>()};
    auto& params = policy.mean_net.parameters();
    const auto& stored = j.at("mean_net").at("parameters");
    if (stored.size() != params.size() ||
        policy.log_std.size() != config.output_dim) {
      throw FormatError(FormatErrorCode::kSizeMismatch,
                        "policy parameters disagree with config");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto data = stored[i].at("data").get<std::vector<double>>();
      if (data.size() != params[i].value.size()) {
        throw FormatError(FormatErrorCode::kSizeMismatch,
                          "parameter " + params[i].name + " has " +
                              std::to_string(data.size()) + " values, expected " +
                              std::to_string(params[i].value.size()));
      }
      params[i].value.data = std::move(data);
    }
    return policy;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorCode::kBadHeader, e.what());
  }
}

// --- evaluation --------------------------------------------------------------

PolicyFn policy_fn(const GaussianPolicy& policy, const Encoder& encoder,
                   bool stochastic) {
  return [&policy, &encoder, stochastic](const Vec2& state,
                                         std::span<const double> obs,
                                         Rng& rng) {
    const auto mu = policy.mean(policy_input(encoder, obs, state));
    Vec2 a{mu[0], mu[1]};
    if (stochastic) {
      std::normal_distribution<double> n(0.0, 1.0);
      for (std::size_t d = 0; d < 2; ++d) a[d] += std::exp(policy.log_std[d]) * n(rng);
    }
    return a;
  };
}

PolicyFn expert_policy_fn(const PointMassWorld& world, const Vec2& goal) {
  return [&world, goal](const Vec2& state, std::span<const double>, Rng&) {
    return world.expert_action(state, goal);
  };
}

EvalResult eval_policy(const PointMassWorld& world, ObservationMode mode,
                       const PolicyFn& policy, const Encoder& encoder,
                       const GoalSpec& goal, std::span<const PointTask> tasks,
                       std::size_t horizon, Rng& rng, Exec exec) {
  EvalResult result;
  result.episodes.resize(tasks.size());
  const std::uint64_t call_seed = rng();
  auto run = [&](std::size_t i) {
    Rng local = make_rng(call_seed, i);
    result.episodes[i] =
        run_episode(world, mode, tasks[i], encoder, goal, horizon,
                    [&](const Vec2& x, std::span<const double> obs,
                        std::size_t) { return policy(x, obs, local);
                    });
  };
  const auto count = static_cast<std::int64_t>(tasks.size());
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i) run(static_cast<std::size_t>(i));
  } else {
    for (std::int64_t i = 0; i < count; ++i) run(static_cast<std::size_t>(i));
  }
  std::size_t ok = 0;
  for (const auto& e : result.episodes) ok += e.success ? 1 : 0;
  result.success_rate =
      tasks.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(tasks.size());
  return result;
}

void write_episode_summary_csv(std::span<const EpisodeResult> episodes,
                               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  }
  out << std::setprecision(17) << "episode,success,steps,final_error\n";
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    out << i << ',' << (e.success ? 1 : 0) << ',' << e.steps << ','
        << e.final_error << '\n';
  }
}

void write_episode_steps_csv(std::span<const EpisodeResult> episodes,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  }
  out << std::setprecision(17) << "episode,step,true_error,embedding_distance\n";
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    for (std::size_t t = 0; t < e.true_error.size(); ++t) {
      out << i << ',' << t << ',' << e.true_error[t] << ','
          << e.embedding_distance[t] << '\n';
    }
  }
}

}  // namespace viplab
