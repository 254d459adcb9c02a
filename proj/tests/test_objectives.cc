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

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "test_util.h"
#include "viplab/objectives.h"

namespace viplab {
namespace {

using testing::scalar_trajectory;

VipLossConfig plain(TdForm form = TdForm::kResidual) {
  VipLossConfig c;
  c.num_negatives = 0;
  c.l1_embedding_coeff = 0.0;
  c.td_form = form;
  return c;
}

TrajectoryDataset one_trajectory(const std::vector<double>& values) {
  TrajectoryDataset ds;
  ds.add(scalar_trajectory(values));
  return ds;
}

// --- oracles over plain doubles -------------------------------------------------

double odist(const std::vector<double>& a, const std::vector<double>& b, double eps) {
  double s = eps;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double olme(const std::vector<double>& xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s / static_cast<double>(xs.size()));
}

double oracle_vip(const Encoder& enc, const VipBatch& b, const VipLossConfig& c) {
  auto phi = [&](std::size_t tr, std::size_t t) { return enc.embed(b.frame(tr, t)); };
  std::set<std::pair<std::size_t, std::size_t>> used;
  double attraction = 0.0;
  std::vector<double> ex;
  auto exponent = [&](double d_o, double d_next, double r) {
    return c.td_form == TdForm::kResidual ? -r + c.gamma * d_next - d_o
                                          : d_o - r - c.gamma * d_next;
  };
  for (const auto& e : b.elements) {
    const auto g = phi(e.traj, e.goal);
    attraction += odist(phi(e.traj, e.start), g, c.norm_eps);
    ex.push_back(exponent(odist(phi(e.traj, e.mid), g, c.norm_eps),
                          odist(phi(e.traj, e.mid_next()), g, c.norm_eps),
                          e.goal_flag ? 0.0 : -1.0));
    for (auto k : {e.start, e.goal, e.mid, e.mid_next()}) used.insert({e.traj, k});
    for (const auto& n : e.negatives) {
      ex.push_back(exponent(odist(phi(n.traj, n.index), g, c.norm_eps),
                            odist(phi(n.traj, n.index + 1), g, c.norm_eps), -1.0));
      used.insert({n.traj, n.index});
      used.insert({n.traj, n.index + 1});
    }
  }
  double loss = (1.0 - c.gamma) * attraction / static_cast<double>(b.elements.size()) + olme(ex);
  if (c.l1_embedding_coeff > 0.0) {
    double l1 = 0.0;
    for (const auto& [tr, t] : used) {
      for (double v : phi(tr, t)) l1 += std::abs(v);
    }
    loss += c.l1_embedding_coeff * l1 / static_cast<double>(used.size());
  }
  return loss;
}

double oracle_tcn(const Encoder& enc, const TcnBatch& b, const VipLossConfig& c) {
  auto phi = [&](std::size_t tr, std::size_t t) { return enc.embed(b.frame(tr, t)); };
  double total = 0.0;
  for (const auto& t : b.triplets) {
    const auto a = phi(t.traj, t.anchor);
    std::vector<double> neg{-odist(a, phi(t.traj, t.negative), c.norm_eps)};
    for (const auto& n : t.cross_negatives) neg.push_back(-odist(a, phi(n.traj, n.index), c.norm_eps));
    total += odist(a, phi(t.traj, t.positive), c.norm_eps) + olme(neg);
  }
  return total / static_cast<double>(b.triplets.size());
}

double oracle_lstd(const Encoder& enc, const LstdBatch& b, const VipLossConfig& c) {
  auto phi = [&](std::size_t tr, std::size_t t) { return enc.embed(b.frame(tr, t)); };
  double total = 0.0;
  for (const auto& t : b.tuples) {
    const auto g = phi(t.traj, t.goal);
    const double v_o = -odist(phi(t.traj, t.obs), g, c.norm_eps);
    const double v_next = -odist(phi(t.traj, t.next), g, c.norm_eps);
    const double td = (t.goal_flag ? 0.0 : -1.0) + c.gamma * v_next - v_o;
    total += td * td;
  }
  return total / static_cast<double>(b.tuples.size());
}

EncoderConfig random_config(std::uint64_t seed, std::size_t input_dim) {
  EncoderConfig c;
  c.input_dim = input_dim;
  c.hidden_widths = {7, 5};
  c.output_dim = 3;
  c.activation = seed % 2 ? Activation::kTanh : Activation::kRelu;
  c.init_seed = seed;
  return c;
}

// --- hand examples -------------------------------------------------------------------

TEST(VipLoss, HandExampleLiteralSign) {
  // phi(start)=0, phi(mid)=0.5, phi(mid_next)=0.8, phi(goal)=1, one element.
  const TrajectoryDataset ds = one_trajectory({0.0, 0.5, 0.8, 1.0});
  VipBatch b{&ds, {VipElement{0, 0, 1, 3, false, {}}}};
  const double loss = vip_loss_value(Encoder::identity(1), b, plain(TdForm::kLiteral));
  EXPECT_NEAR(loss, 0.02 * 1.0 + (0.5 + 1.0 - 0.98 * 0.2), 1e-9);
  EXPECT_NEAR(loss, 1.324, 1e-9);
}

TEST(VipLoss, HandExampleResidualSign) {
  // Same batch, residual form: exponent 1 + 0.98 * 0.2 - 0.5 = 0.696.
  const TrajectoryDataset ds = one_trajectory({0.0, 0.5, 0.8, 1.0});
  VipBatch b{&ds, {VipElement{0, 0, 1, 3, false, {}}}};
  EXPECT_NEAR(vip_loss_value(Encoder::identity(1), b, plain()), 0.02 + 0.696, 1e-9);
}

TEST(VipLoss, CollapsedEmbeddingIsOne) {
  const TrajectoryDataset ds = one_trajectory({0.3, 0.3, 0.3, 0.3});
  VipBatch b{&ds, {VipElement{0, 0, 1, 3, false, {}}}};
  for (TdForm form : {TdForm::kResidual, TdForm::kLiteral}) {
    EXPECT_NEAR(vip_loss_value(Encoder::identity(1), b, plain(form)), 1.0, 1e-6);
  }
  const Encoder zeros = Encoder::zeros(random_config(1, 1));
  const TrajectoryDataset ramp = one_trajectory({0.0, 1.0, 2.0, 3.0});
  VipBatch rb{&ramp, {VipElement{0, 0, 1, 3, false, {}}}};
  EXPECT_NEAR(vip_loss_value(zeros, rb, plain()), 1.0, 1e-6);
}

TEST(VipLoss, GoalSelfLoopRewardIsZero) {
  // mid = goal, flag set: exponent = 0 + gamma * 0 - 0 with collapsed terms.
  const TrajectoryDataset ds = one_trajectory({0.0, 1.0});
  VipBatch b{&ds, {VipElement{0, 0, 1, 1, true, {}}}};
  EXPECT_NEAR(vip_loss_value(Encoder::identity(1), b, plain()), 0.02 * 1.0 + 0.0, 1e-6);
}

TEST(TcnLoss, HandExample) {
  // anchor 0, positive 0.1, negative 1.0: 0.1 - 1.0.
  const TrajectoryDataset ds = one_trajectory({0.0, 0.1, 1.0});
  TcnBatch b{&ds, {TcnTriplet{0, 0, 1, 2, {}}}};
  EXPECT_NEAR(tcn_loss_value(Encoder::identity(1), b, plain()), -0.9, 1e-9);
}

TEST(TcnLoss, EquidistantIsZeroAndFartherNegativeLowers) {
  const TrajectoryDataset ds = one_trajectory({0.0, 0.5, -0.5});
  TcnBatch b{&ds, {TcnTriplet{0, 0, 1, 2, {}}}};
  EXPECT_NEAR(tcn_loss_value(Encoder::identity(1), b, plain()), 0.0, 1e-12);
  double prev = 0.0;
  for (double far : {-1.0, -2.0, -4.0}) {
    const TrajectoryDataset moved = one_trajectory({0.0, 0.5, far});
    TcnBatch mb{&moved, {TcnTriplet{0, 0, 1, 2, {}}}};
    const double v = tcn_loss_value(Encoder::identity(1), mb, plain());
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(LstdLoss, HandExamples) {
  // V(o) = -1, V(o') = -0.5 with the goal at 0.
  const TrajectoryDataset ds = one_trajectory({1.0, 0.5, 0.0});
  LstdBatch b{&ds, {LstdTuple{0, 0, 1, 2, false}}};
  EXPECT_NEAR(lstd_loss_value(Encoder::identity(1), b, plain()), 0.2401, 1e-9);

  const TrajectoryDataset flat = one_trajectory({2.0, 2.0, 2.0});
  LstdBatch fb{&flat, {LstdTuple{0, 0, 1, 2, false}}};
  EXPECT_NEAR(lstd_loss_value(Encoder::identity(1), fb, plain()), 1.0, 1e-5);
}

TEST(Losses, EmptyBatchThrows) {
  const TrajectoryDataset ds = one_trajectory({0.0, 1.0, 2.0});
  const Encoder e = Encoder::identity(1);
  EXPECT_THROW(vip_loss_value(e, VipBatch{&ds, {}}, plain()), std::invalid_argument);
  EXPECT_THROW(tcn_loss_value(e, TcnBatch{&ds, {}}, plain()), std::invalid_argument);
  EXPECT_THROW(lstd_loss_value(e, LstdBatch{&ds, {}}, plain()), std::invalid_argument);
}

// --- properties on random batches -----------------------------------------------

struct RandomSetup {
  TrajectoryDataset ds;
  Encoder encoder;
};

RandomSetup random_setup(std::uint64_t seed) {
  Rng rng(seed);
  return {testing::random_dataset(rng, 5, 4, 3, 10), Encoder::init(random_config(seed, 4))};
}

TEST(VipLoss, MatchesOracleOnRandomBatches) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = random_setup(seed);
    Rng rng(seed + 100);
    for (TdForm form : {TdForm::kResidual, TdForm::kLiteral}) {
      VipLossConfig c;  // defaults: 3 negatives, L1 0.001
      c.td_form = form;
      c.goal_selfloop = 0.2;
      const VipBatch b = sample_vip_batch(s.ds, {8, c.num_negatives, c.goal_selfloop}, rng);
      EXPECT_NEAR(vip_loss_value(s.encoder, b, c), oracle_vip(s.encoder, b, c), 1e-12);
    }
  }
}

TEST(TcnLoss, MatchesOracleOnRandomBatches) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = random_setup(seed);
    Rng rng(seed + 200);
    const VipLossConfig c;
    const TcnBatch b = sample_tcn_triplets(s.ds, {8, c.tcn_window, c.num_negatives}, rng);
    EXPECT_NEAR(tcn_loss_value(s.encoder, b, c), oracle_tcn(s.encoder, b, c), 1e-12);
  }
}

TEST(LstdLoss, MatchesOracleAndNonNegative) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = random_setup(seed);
    Rng rng(seed + 300);
    const VipLossConfig c;
    const LstdBatch b = sample_lstd_tuples(s.ds, 8, rng, 0.3);
    const double v = lstd_loss_value(s.encoder, b, c);
    EXPECT_NEAR(v, oracle_lstd(s.encoder, b, c), 1e-12);
    EXPECT_GE(v, 0.0);
  }
}

TEST(Losses, BatchPermutationInvariant) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = random_setup(seed);
    Rng rng(seed);
    const VipLossConfig c;
    VipBatch vb = sample_vip_batch(s.ds, {12, 3, 0.0}, rng);
    TcnBatch tb = sample_tcn_triplets(s.ds, {12, 3, 3}, rng);
    LstdBatch lb = sample_lstd_tuples(s.ds, 12, rng);
    const double v0 = vip_loss_value(s.encoder, vb, c);
    const double t0 = tcn_loss_value(s.encoder, tb, c);
    const double l0 = lstd_loss_value(s.encoder, lb, c);
    std::shuffle(vb.elements.begin(), vb.elements.end(), rng);
    std::shuffle(tb.triplets.begin(), tb.triplets.end(), rng);
    std::shuffle(lb.tuples.begin(), lb.tuples.end(), rng);
    EXPECT_NEAR(vip_loss_value(s.encoder, vb, c), v0, 1e-12);
    EXPECT_NEAR(tcn_loss_value(s.encoder, tb, c), t0, 1e-12);
    EXPECT_NEAR(lstd_loss_value(s.encoder, lb, c), l0, 1e-12);
  }
}

TEST(Losses, EmbeddingTranslationInvariant) {
  // Shift the final-layer bias: every term depends on differences only. The
  // L1 embedding penalty is not translation invariant, so it is off here.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto s = random_setup(seed);
    Rng rng(seed + 7);
    VipLossConfig c;
    c.l1_embedding_coeff = 0.0;
    const VipBatch vb = sample_vip_batch(s.ds, {10, 3, 0.1}, rng);
    const TcnBatch tb = sample_tcn_triplets(s.ds, {10, 3, 3}, rng);
    const LstdBatch lb = sample_lstd_tuples(s.ds, 10, rng);
    const double v0 = vip_loss_value(s.encoder, vb, c);
    const double t0 = tcn_loss_value(s.encoder, tb, c);
    const double l0 = lstd_loss_value(s.encoder, lb, c);
    auto& bias = s.encoder.parameters().back().value.data;
    const std::vector<double> shift = {3.5, -2.0, 0.75};
    for (std::size_t k = 0; k < bias.size(); ++k) bias[k] += shift[k];
    EXPECT_NEAR(vip_loss_value(s.encoder, vb, c), v0, 1e-9);
    EXPECT_NEAR(tcn_loss_value(s.encoder, tb, c), t0, 1e-9);
    EXPECT_NEAR(lstd_loss_value(s.encoder, lb, c), l0, 1e-9);
  }
}

TEST(VipLoss, AttractionWeightVanishesAsGammaApproachesOne) {
  // Moving every start onto its goal removes only the attraction term, so the
  // difference is (1 - gamma) times the mean start-goal distance.
  const auto s = random_setup(3);
  Rng rng(3);
  const VipBatch b = sample_vip_batch(s.ds, {8, 0, 0.0}, rng);
  VipBatch at_goal = b;
  for (auto& e : at_goal.elements) e.start = e.goal;
  VipLossConfig c = plain();
  double att = 0.0;
  for (const auto& e : b.elements) {
    att += odist(s.encoder.embed(b.frame(e.traj, e.start)),
                 s.encoder.embed(b.frame(e.traj, e.goal)), c.norm_eps) -
           std::sqrt(c.norm_eps);
  }
  att /= static_cast<double>(b.elements.size());
  for (double gamma : {0.9, 0.99, 0.999999}) {
    c.gamma = gamma;
    const double diff = vip_loss_value(s.encoder, b, c) - vip_loss_value(s.encoder, at_goal, c);
    EXPECT_NEAR(diff, (1.0 - gamma) * att, 1e-12) << gamma;
  }
}

// --- gradients -------------------------------------------------------------------------

template <typename Batch, typename Fn>
double loss_grad_error(const Encoder& enc, const Batch& b, const VipLossConfig& c, Fn fn) {
  grad::Tape tape;
  const auto bound = enc.bind(tape);
  tape.backward(fn(enc, bound, tape, b, c));
  const auto analytic = enc.gradients(bound, tape);
  double worst = 0.0;
  for (std::size_t p = 0; p < analytic.size(); ++p) {
    const auto numeric = testing::fd_gradient(
        [&](const std::vector<double>& w) {
          Encoder copy = enc;
          copy.parameters()[p].value.data = w;
          grad::Tape t;
          const auto bd = copy.bind(t);
          return fn(copy, bd, t, b, c).item();
        },
        enc.parameters()[p].value.data);
    worst = std::max(worst, testing::max_rel_error(analytic[p], numeric));
  }
  return worst;
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto s = random_setup(seed);
    Rng rng(seed + 50);
    // Zero biases put dead relu units exactly on the kink; move off it.
    for (std::size_t p = 1; p < s.encoder.parameters().size(); p += 2) {
      s.encoder.parameters()[p].value.data = testing::random_vector(
          rng, s.encoder.parameters()[p].value.data.size(), 0.2);
    }
    VipLossConfig c;
    c.goal_selfloop = 0.1;
    const VipBatch vb = sample_vip_batch(s.ds, {6, 3, 0.1}, rng);
    const TcnBatch tb = sample_tcn_triplets(s.ds, {6, 3, 3}, rng);
    const LstdBatch lb = sample_lstd_tuples(s.ds, 6, rng, 0.1);
    EXPECT_LE(loss_grad_error(s.encoder, vb, c, vip_loss), testing::kFdTol) << seed;
    EXPECT_LE(loss_grad_error(s.encoder, tb, c, tcn_loss), testing::kFdTol) << seed;
    EXPECT_LE(loss_grad_error(s.encoder, lb, c, lstd_loss), testing::kFdTol) << seed;
  }
}

// --- configs and training -------------------------------------------------------------

TEST(Configs, DefaultsAndValidation) {
  const VipLossConfig l;
  EXPECT_EQ(l.gamma, 0.98);
  EXPECT_EQ(l.num_negatives, 3u);
  EXPECT_EQ(l.l1_embedding_coeff, 0.001);
  EXPECT_EQ(l.goal_selfloop, 0.0);
  EXPECT_EQ(l.td_form, TdForm::kResidual);
  const TrainConfig t;
  EXPECT_EQ(t.batch_size, 32u);
  EXPECT_EQ(t.learning_rate, 1e-4);
  for (double g : {0.0, 1.0, -0.5, 1.5}) {
    VipLossConfig bad;
    bad.gamma = g;
    EXPECT_THROW(bad.validate(), std::invalid_argument) << g;
  }
  TrainConfig bad;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = TrainConfig{};
  bad.num_batches = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);

  const nlohmann::json jl = l;
  EXPECT_EQ(jl.get<VipLossConfig>(), l);
  const nlohmann::json jt = t;
  EXPECT_EQ(jt.get<TrainConfig>(), t);
  EXPECT_EQ(objective_from_string("lstd"), Objective::kLstd);
  EXPECT_THROW(objective_from_string("r3m"), std::invalid_argument);
}

TrajectoryDataset ramp_dataset(std::size_t n) {
  // Straight-line 2-d paths toward a shared corner, varied starts.
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TrajectoryDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = u(rng), y0 = u(rng);
    Trajectory t;
    for (int k = 0; k <= 10; ++k) {
      const double a = k / 10.0;
      t.frames.append_row(std::vector<double>{(1 - a) * x0 + a, (1 - a) * y0 + a});
    }
    ds.add(std::move(t));
  }
  return ds;
}

TEST(Train, SameSeedIdenticalOutputs) {
  const auto dir = testing::scratch_dir();
  const TrajectoryDataset ds = ramp_dataset(12);
  EncoderConfig ec = random_config(5, 2);
  TrainConfig tc;
  tc.num_batches = 40;
  tc.eval_interval = 20;
  tc.batch_size = 8;
  for (Objective o : {Objective::kVip, Objective::kTcn, Objective::kLstd}) {
    tc.objective = o;
    const auto a = dir / (std::string(to_string(o)) + "_a");
    const auto b = dir / (std::string(to_string(o)) + "_b");
    train(ds, ec, tc, VipLossConfig{}, a);
    train(ds, ec, tc, VipLossConfig{}, b);
    EXPECT_EQ(testing::read_file(a / "metrics.csv"), testing::read_file(b / "metrics.csv"));
    EXPECT_EQ(testing::read_file(a / "encoder.venc"), testing::read_file(b / "encoder.venc"));
    EXPECT_TRUE(std::filesystem::exists(a / "checkpoints" / "encoder_20.venc"));
    EXPECT_TRUE(std::filesystem::exists(a / "checkpoints" / "encoder_40.venc"));
    EXPECT_TRUE(std::filesystem::exists(a / "config.json"));
    const std::string csv = testing::read_file(a / "metrics.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "batch,loss,grad_norm,ms");
  }
}

TEST(Train, VipSmoothedLossDecreases) {
  const TrajectoryDataset ds = ramp_dataset(30);
  EncoderConfig ec;
  ec.input_dim = 2;
  ec.hidden_widths = {32, 32};
  ec.output_dim = 2;
  TrainConfig tc;
  tc.num_batches = 600;
  tc.learning_rate = 1e-3;
  VipLossConfig lc;
  lc.num_negatives = 0;
  lc.l1_embedding_coeff = 0.0;
  const TrainResult r = train(ds, ec, tc, lc);
  ASSERT_EQ(r.metrics.size(), 600u);
  auto window_mean = [&](std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < from + 50; ++i) s += r.metrics[i].loss;
    return s / 50.0;
  };
  EXPECT_LT(window_mean(550), window_mean(0));
  for (const auto& m : r.metrics) EXPECT_EQ(m.ms, 0.0);  // timing off by default
}

TEST(Train, DimensionMismatchAndDivergence) {
  const TrajectoryDataset ds = ramp_dataset(4);
  EXPECT_THROW(train(ds, random_config(1, 3), TrainConfig{}, VipLossConfig{}),
               std::invalid_argument);

  TrajectoryDataset bad = ramp_dataset(4);
  TrajectoryDataset with_nan;
  for (std::size_t i = 0; i < bad.size(); ++i) {
    Trajectory t = bad[i];
    t.frames(0, 0) = std::nan("");
    with_nan.add(t);
  }
  TrainConfig tc;
  tc.num_batches = 5;
  try {
    train(with_nan, random_config(1, 2), tc, VipLossConfig{});
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.batch(), 1u);
  }
}

}  // namespace
}  // namespace viplab
