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

#include "viplab/acceptance.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "viplab/analysis.h"
#include "viplab/control.h"
#include "viplab/objectives.h"
#include "viplab/pipeline.h"
#include "viplab/trajstore.h"
#include "viplab/worlds.h"

namespace viplab {

namespace {

using nlohmann::json;

constexpr std::size_t kSeeds = 3;
const Vec2 kFixedGoal{0.75, 0.75};

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0
                   : std::accumulate(v.begin(), v.end(), 0.0) /
                         static_cast<double>(v.size());
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::optional<std::filesystem::path> artifact_dir(const AcceptanceSuite& suite,
                                                  const std::string& id) {
  if (!suite.options().artifacts) return std::nullopt;
  auto dir = *suite.options().artifacts / id;
  std::filesystem::create_directories(dir);
  return dir;
}

std::uint64_t check_seed(const AcceptanceSuite& suite, std::uint64_t check,
                         std::uint64_t k = 0) {
  return derive_seed(suite.options().seed, check * 1000 + k);
}

// 200 noisy Hard demos on the point mass, K = 4, 5000 batches. Data depend
// only on the master seed; `rep` picks the encoder init and batch stream.
ExperimentConfig pretrain_config(const AcceptanceSuite& suite,
                                 ObservationMode mode, std::size_t rep) {
  ExperimentConfig c;
  c.world = WorldKind::kPointMass;
  c.observation = mode;
  c.seed = check_seed(suite, 100);
  c.data.num_trajectories = 200;
  c.data.noise_scale = 0.1;
  c.data.difficulty = Difficulty::kHard;
  c.encoder.output_dim = 4;
  c.encoder.input_dim = c.obs_dim();
  c.train.num_batches = 5000;
  c.encoder_init_seed = check_seed(suite, 101, rep);
  c.train_seed = check_seed(suite, 102, rep);
  return c;
}

const Encoder& pretrained(AcceptanceSuite& suite, ObservationMode mode,
                          Objective objective, std::size_t rep) {
  const std::string key = std::string(to_string(mode)) + "/" +
                          to_string(objective) + "/" + std::to_string(rep);
  return suite.cached(key, [&] {
    const ExperimentConfig c = pretrain_config(suite, mode, rep);
    suite.log("  training " + key);
    const TrajectoryDataset ds = generate_dataset(c);
    return train_encoder(c, ds, objective).encoder;
  });
}

// --- a1 ------------------------------------------------------------------------

struct GradCheck {
  double max_rel = 0.0;
  double max_abs = 0.0;
  std::size_t compared = 0;
};

// Central differences of `loss` in every weight, against the tape gradient.
template <typename LossValue, typename LossGraph>
GradCheck grad_check(Encoder encoder, LossValue loss_value, LossGraph loss_graph) {
  constexpr double h = 1e-5;
  // Denominator floor. Dead relu units give exact zero gradients, where the
  // difference quotient reads eps * |L| / h ~ 1e-10 of roundoff.
  constexpr double floor = 1e-5;
  grad::Tape tape;
  const Encoder::Bound bound = encoder.bind(tape);
  tape.backward(loss_graph(encoder, bound, tape));
  const auto analytic = encoder.gradients(bound, tape);

  GradCheck out;
  auto& params = encoder.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params[p].value.data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double keep = w[i];
      w[i] = keep + h;
      const double up = loss_value(encoder);
      w[i] = keep - h;
      const double down = loss_value(encoder);
      w[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double err = std::abs(a - numeric);
      out.max_abs = std::max(out.max_abs, err);
      out.max_rel = std::max(
          out.max_rel, err / std::max({std::abs(a), std::abs(numeric), floor}));
      ++out.compared;
    }
  }
  return out;
}

TrajectoryDataset random_dataset(Rng& rng, std::size_t n, std::size_t dim,
                                 std::size_t min_len, std::size_t max_len) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  TrajectoryDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    Trajectory t;
    const std::size_t T = len(rng);
    t.frames = Matrix(T, dim);
    for (double& v : t.frames.data) v = normal(rng);
    ds.add(std::move(t));
  }
  return ds;
}

CheckResult check_a1(AcceptanceSuite& suite) {
  CheckResult r;
  r.thresholds = {{"max_rel_error", 1e-4}, {"h", 1e-5}, {"seeds", 10}, {"denominator_floor", 1e-5}};
  bool ok = true;
  for (const Objective objective :
       {Objective::kVip, Objective::kTcn, Objective::kLstd}) {
    GradCheck worst;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng = make_rng(check_seed(suite, 1, seed), static_cast<int>(objective));
      std::uniform_int_distribution<std::size_t> width(4, 32), k(1, 8);
      EncoderConfig ec;
      ec.input_dim = 5;
      ec.hidden_widths = {width(rng), width(rng)};
      ec.output_dim = k(rng);
      ec.activation = seed % 2 == 0 ? Activation::kRelu : Activation::kTanh;
      ec.init_seed = rng();
      const Encoder encoder = Encoder::init(ec);
      const TrajectoryDataset ds = random_dataset(rng, 6, ec.input_dim, 6, 12);
      VipLossConfig lc;
      lc.goal_selfloop = 0.1;
      GradCheck g;
      if (objective == Objective::kVip) {
        const VipBatch b = sample_vip_batch(ds, {8, 3, 0.1}, rng);
        g = grad_check(
            encoder, [&](const Encoder& e) { return vip_loss_value(e, b, lc); },
            [&](const Encoder& e, const Encoder::Bound& bd, grad::Tape& t) {
              return vip_loss(e, bd, t, b, lc);
            });
      } else if (objective == Objective::kTcn) {
        const TcnBatch b = sample_tcn_triplets(ds, {8, 3, 3}, rng);
        g = grad_check(
            encoder, [&](const Encoder& e) { return tcn_loss_value(e, b, lc); },
            [&](const Encoder& e, const Encoder::Bound& bd, grad::Tape& t) {
              return tcn_loss(e, bd, t, b, lc);
            });
      } else {
        const LstdBatch b = sample_lstd_tuples(ds, 8, rng, 0.1);
        g = grad_check(
            encoder, [&](const Encoder& e) { return lstd_loss_value(e, b, lc); },
            [&](const Encoder& e, const Encoder::Bound& bd, grad::Tape& t) {
              return lstd_loss(e, bd, t, b, lc);
            });
      }
      worst.max_rel = std::max(worst.max_rel, g.max_rel);
      worst.max_abs = std::max(worst.max_abs, g.max_abs);
      worst.compared += g.compared;
    }
    r.measured[to_string(objective)] = {{"max_rel_error", worst.max_rel},
                                        {"max_abs_error", worst.max_abs},
                                        {"compared", worst.compared}};
    ok = ok && worst.max_rel <= 1e-4;
  }
  r.passed = ok;
  return r;
}

// --- a2 ------------------------------------------------------------------------

CheckResult check_a2(AcceptanceSuite& suite) {
  CheckResult r;
  r.thresholds = {{"vip_max", 0.15}, {"margin_below_tcn", 0.05}};
  ExperimentConfig c;
  c.observation = ObservationMode::kImage16;
  c.seed = check_seed(suite, 2);
  c.data.num_trajectories = 120;  // 100 for training, 20 held out
  c.data.noise_scale = 0.0;
  c.data.goal = kFixedGoal;
  c.encoder.output_dim = 2;
  c.encoder.input_dim = c.obs_dim();
  c.loss.num_negatives = 0;
  c.loss.l1_embedding_coeff = 0.0;
  c.train.num_batches = 2000;
  const TrajectoryDataset all = generate_dataset(c);
  std::vector<Trajectory> fit(all.trajectories().begin(),
                              all.trajectories().begin() + 100);
  std::vector<Trajectory> held(all.trajectories().begin() + 100,
                               all.trajectories().end());
  const TrajectoryDataset train_ds(std::move(fit), all.manifest());
  const TrajectoryDataset test_ds(std::move(held), all.manifest());
  const auto dir = artifact_dir(suite, "a2");
  if (dir) write_resolved_config(c, *dir / "config.json");

  std::map<std::string, std::vector<double>> bumps;
  for (const Objective objective : {Objective::kVip, Objective::kTcn}) {
    for (std::size_t s = 0; s < kSeeds; ++s) {
      ExperimentConfig cs = c;
      cs.encoder_init_seed = check_seed(suite, 20, s);
      cs.train_seed = check_seed(suite, 21, s);
      suite.log(std::string("  a2 ") + to_string(objective) + " seed " +
                std::to_string(s));
      const Encoder e = train_encoder(cs, train_ds, objective).encoder;
      const BumpReport report = dataset_bump_report(e, test_ds, 0, suite.options().exec);
      bumps[to_string(objective)].push_back(report.mean);
      if (dir) {
        const std::string stem = std::string(to_string(objective)) + "_seed" + std::to_string(s);
        write_bumps_csv(report, *dir / (stem + "_bumps.csv"));
        std::vector<DistanceCurve> curves;
        for (std::size_t i = 0; i < test_ds.size(); ++i) {
          curves.push_back(distance_curve_to_last(e, test_ds[i], test_ds[i].length(), true, i));
        }
        write_curves_csv(curves, *dir / (stem + "_curves.csv"));
        save_encoder(e, *dir / (stem + ".venc"));
      }
    }
  }
  const double vip = mean_of(bumps["vip"]);
  const double tcn = mean_of(bumps["tcn"]);
  r.measured = {{"vip_bump_mean", vip},
                {"tcn_bump_mean", tcn},
                {"vip_per_seed", bumps["vip"]},
                {"tcn_per_seed", bumps["tcn"]}};
  r.passed = vip <= tcn - 0.05 && vip <= 0.15;
  return r;
}

// --- a3 ------------------------------------------------------------------------

CheckResult check_a3(AcceptanceSuite& suite) {
  CheckResult r;
  r.thresholds = {{"min_strict_decrease_fraction_per_seed", 0.9}};
  ExperimentConfig c;
  c.world = WorldKind::kGrid;
  c.observation = ObservationMode::kImage16;
  c.seed = check_seed(suite, 3);
  c.data.num_trajectories = 200;
  c.data.noise_scale = 0.1;
  c.data.difficulty = Difficulty::kHard;
  c.encoder.input_dim = c.obs_dim();
  c.train.num_batches = 5000;
  const TrajectoryDataset ds = generate_dataset(c);

  // Held-out optimal paths, from their own stream.
  Rng rng = make_rng(check_seed(suite, 30), 0);
  TrajectoryDataset paths;
  while (paths.size() < 50) {
    const GridTask task = sample_task(c.grid, Difficulty::kHard, rng);
    Trajectory t;
    for (const Cell& cell : c.grid.shortest_path(task.start, task.goal)) {
      t.frames.append_row(c.grid.observe(cell, c.observation));
    }
    if (t.length() >= 2) paths.add(std::move(t));
  }
  const auto dir = artifact_dir(suite, "a3");
  if (dir) write_resolved_config(c, *dir / "config.json");

  std::vector<double> fractions;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    ExperimentConfig cs = c;
    cs.encoder_init_seed = check_seed(suite, 31, s);
    cs.train_seed = check_seed(suite, 32, s);
    suite.log("  a3 seed " + std::to_string(s));
    const Encoder e = train_encoder(cs, ds, Objective::kVip).encoder;
    fractions.push_back(prop2_check(e, paths, suite.options().exec));
  }
  r.measured = {{"per_seed", fractions},
                {"min", *std::min_element(fractions.begin(), fractions.end())},
                {"mean", mean_of(fractions)}};
  r.passed = std::all_of(fractions.begin(), fractions.end(),
                         [](double f) { return f >= 0.9; });
  return r;
}

// --- a4 / a5 -------------------------------------------------------------------

EvalResult plan_tasks(AcceptanceSuite& suite, const ExperimentConfig& c,
                      const Encoder& e, std::uint64_t task_seed,
                      std::uint64_t plan_seed) {
  const auto tasks = sample_eval_tasks(c, c.plan.episodes, task_seed);
  return run_planner(c, e, tasks, plan_seed, suite.options().exec);
}

CheckResult check_a4(AcceptanceSuite& suite) {
  CheckResult r;
  r.thresholds = {{"vip_min", 0.8}, {"random_gap_min", 0.3}, {"identity_min", 0.95}};
  ExperimentConfig c = pretrain_config(suite, ObservationMode::kImage16, 0);
  c.plan.episodes = 50;
  c.plan.difficulty = Difficulty::kEasy;
  const std::uint64_t task_seed = check_seed(suite, 40);
  const std::uint64_t plan_seed = check_seed(suite, 41);

  const Encoder& vip = pretrained(suite, ObservationMode::kImage16, Objective::kVip, 0);
  const Encoder random = Encoder::init(c.resolved_encoder());
  ExperimentConfig raw = c;
  raw.observation = ObservationMode::kRawState;
  raw.encoder.input_dim = raw.obs_dim();
  const Encoder identity = Encoder::identity(2);

  suite.log("  a4 planning");
  const EvalResult ev_vip = plan_tasks(suite, c, vip, task_seed, plan_seed);
  const EvalResult ev_rand = plan_tasks(suite, c, random, task_seed, plan_seed);
  const EvalResult ev_id = plan_tasks(suite, raw, identity, task_seed, plan_seed);
  if (const auto dir = artifact_dir(suite, "a4")) {
    write_resolved_config(c, *dir / "config.json");
    write_episode_summary_csv(ev_vip.episodes, *dir / "vip_episodes.csv");
    write_episode_steps_csv(ev_vip.episodes, *dir / "vip_steps.csv");
    write_episode_summary_csv(ev_rand.episodes, *dir / "random_episodes.csv");
    write_episode_summary_csv(ev_id.episodes, *dir / "identity_episodes.csv");
    save_encoder(vip, *dir / "vip.venc");
  }
  r.measured = {{"vip", ev_vip.success_rate},
                {"random", ev_rand.success_rate},
                {"identity", ev_id.success_rate}};
  r.passed = ev_vip.success_rate >= 0.8 &&
             ev_rand.success_rate <= ev_vip.success_rate - 0.3 + 1e-12 &&
             ev_id.success_rate >= 0.95;
  return r;
}

CheckResult check_a5(AcceptanceSuite& suite) {
  CheckResult r;
  r.thresholds = {{"rule", "vip >= lstd on every seed"}};
  std::vector<double> vip_rates, lstd_rates;
  bool ok = true;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    ExperimentConfig c = pretrain_config(suite, ObservationMode::kImage16, s);
    c.plan.episodes = 50;
    c.plan.difficulty = Difficulty::kHard;
    const Encoder& vip = pretrained(suite, ObservationMode::kImage16, Objective::kVip, s);
    const Encoder& lstd = pretrained(suite, ObservationMode::kImage16, Objective::kLstd, s);
    suite.log("  a5 planning seed " + std::to_string(s));
    const std::uint64_t task_seed = check_seed(suite, 50, s);
    const std::uint64_t plan_seed = check_seed(suite, 51, s);
    const EvalResult ev_vip = plan_tasks(suite, c, vip, task_seed, plan_seed);
    const EvalResult ev_lstd = plan_tasks(suite, c, lstd, task_seed, plan_seed);
    vip_rates.push_back(ev_vip.success_rate);
    lstd_rates.push_back(ev_lstd.success_rate);
    ok = ok && ev_vip.success_rate >= ev_lstd.success_rate;
    if (const auto dir = artifact_dir(suite, "a5")) {
      const std::string tag = "_seed" + std::to_string(s) + ".csv";
      write_episode_summary_csv(ev_vip.episodes, *dir / ("vip_episodes" + tag));
      write_episode_summary_csv(ev_lstd.episodes, *dir / ("lstd_episodes" + tag));
    }
  }
  r.measured = {{"vip_per_seed", vip_rates},
                {"lstd_per_seed", lstd_rates},
                {"vip_mean", mean_of(vip_rates)},
                {"lstd_mean", mean_of(lstd_rates)}};
  r.passed = ok;
  return r;
}

// --- a6 ------------------------------------------------------------------------

CheckResult check_a6(AcceptanceSuite& suite) {
  CheckResult r;
  r.thresholds = {{"telescoping_abs", 1e-9}, {"shaped_abs", 1e-12}};
  Rng rng = make_rng(check_seed(suite, 6), 0);
  const TrajectoryDataset ds = random_dataset(rng, 100, 6, 2, 40);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_tel = 0.0, worst_shaped = 0.0;
  std::size_t transitions = 0;
  for (std::size_t k = 0; k < 5; ++k) {
    EncoderConfig ec;
    ec.input_dim = 6;
    ec.hidden_widths = {32, 32};
    ec.output_dim = 4;
    ec.activation = k % 2 == 0 ? Activation::kRelu : Activation::kTanh;
    ec.init_seed = rng();
    const Encoder e = Encoder::init(ec);
    for (const Trajectory& t : ds.trajectories()) {
      const Trajectory& other = ds[rng() % ds.size()];
      const GoalSpec goal(e, other.frame(rng() % other.length()));
      const double gamma = unit(rng);
      double total = 0.0;
      for (std::size_t i = 0; i + 1 < t.length(); ++i) {
        const double step = embedding_reward(e, t.frame(i), t.frame(i + 1), goal);
        const double shaped =
            embedding_reward_shaped(e, t.frame(i), t.frame(i + 1), goal, gamma);
        worst_shaped = std::max(worst_shaped, std::abs(step - shaped));
        total += step;
        ++transitions;
      }
      const double direct = goal_score(e, t.frame(t.length() - 1), goal) -
                            goal_score(e, t.frame(0), goal);
      worst_tel = std::max(worst_tel, std::abs(total - direct));
    }
  }
  r.measured = {{"max_telescoping_error", worst_tel},
                {"max_shaped_error", worst_shaped},
                {"transitions", transitions}};
  r.passed = worst_tel <= 1e-9 && worst_shaped <= 1e-12;
  return r;
}

// --- a7 ------------------------------------------------------------------------

CheckResult check_a7(AcceptanceSuite& suite) {
  CheckResult r;
  r.thresholds = {{"tau", 0.1}, {"mean_gap_min", 0.10}, {"tau0_equals_bc", true}};
  ExperimentConfig c;
  c.observation = ObservationMode::kRawState;
  c.seed = check_seed(suite, 7);
  c.data.kind = "mixed";
  c.data.num_trajectories = 10;
  c.data.num_failures = 20;
  c.data.noise_scale = 0.1;
  c.data.difficulty = Difficulty::kHard;
  c.data.goal = kFixedGoal;
  c.plan.goal = kFixedGoal;
  c.plan.difficulty = Difficulty::kHard;
  c.encoder.output_dim = 4;
  c.encoder.input_dim = c.obs_dim();
  c.rwr.tau = 0.1;
  const TrajectoryDataset mixed = generate_dataset(c);
  const Encoder& vip = pretrained(suite, ObservationMode::kRawState, Objective::kVip, 0);
  const GoalSpec goal(vip, demo_goal_frames(mixed));
  const auto tasks = sample_eval_tasks(c, 100, check_seed(suite, 70));
  const std::size_t horizon = episode_horizon(Difficulty::kHard);
  const auto dir = artifact_dir(suite, "a7");
  if (dir) write_resolved_config(c, *dir / "config.json");

  std::vector<double> rwr_rates, bc_rates;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    RwrConfig rc = c.rwr;
    rc.seed = check_seed(suite, 71, s);
    suite.log("  a7 seed " + std::to_string(s));
    const RwrResult rwr = rwr_train(mixed, vip, goal, rc, suite.options().exec);
    const RwrResult bc = bc_train(mixed, vip, goal, rc, suite.options().exec);
    Rng er = make_rng(check_seed(suite, 72, s), 0);
    Rng eb = make_rng(check_seed(suite, 72, s), 0);
    const EvalResult ev_rwr = eval_policy(c.point_mass, c.observation, policy_fn(rwr.policy, vip),
                                          vip, goal, tasks, horizon, er, suite.options().exec);
    const EvalResult ev_bc = eval_policy(c.point_mass, c.observation, policy_fn(bc.policy, vip),
                                         vip, goal, tasks, horizon, eb, suite.options().exec);
    rwr_rates.push_back(ev_rwr.success_rate);
    bc_rates.push_back(ev_bc.success_rate);
    if (dir) {
      const std::string tag = "_seed" + std::to_string(s);
      write_episode_summary_csv(ev_rwr.episodes, *dir / ("rwr_episodes" + tag + ".csv"));
      write_episode_summary_csv(ev_bc.episodes, *dir / ("bc_episodes" + tag + ".csv"));
    }
  }

  // tau = 0 against bc under one seed, on a short run.
  RwrConfig small = c.rwr;
  small.tau = 0.0;
  small.num_steps = 300;
  small.seed = check_seed(suite, 73);
  const RwrResult zero = rwr_train(mixed, vip, goal, small, suite.options().exec);
  const RwrResult bc = bc_train(mixed, vip, goal, small, suite.options().exec);
  const bool identical = same_parameters(zero.policy, bc.policy) && zero.losses == bc.losses;

  const double gap = mean_of(rwr_rates) - mean_of(bc_rates);
  r.measured = {{"rwr_per_seed", rwr_rates},
                {"bc_per_seed", bc_rates},
                {"rwr_mean", mean_of(rwr_rates)},
                {"bc_mean", mean_of(bc_rates)},
                {"mean_gap", gap},
                {"tau0_equals_bc", identical}};
  r.passed = gap >= 0.10 - 1e-12 && identical;
  return r;
}

// --- a8 ------------------------------------------------------------------------

CheckResult check_a8(AcceptanceSuite& suite) {
  CheckResult r;
  r.thresholds = {{"vip_r2_min", 0.6}, {"identity_r2_min", 1.0 - 1e-9}};
  ExperimentConfig c = pretrain_config(suite, ObservationMode::kRawState, 0);
  c.plan.episodes = 50;
  c.plan.difficulty = Difficulty::kEasy;
  const Encoder& vip = pretrained(suite, ObservationMode::kRawState, Objective::kVip, 0);
  const std::uint64_t task_seed = check_seed(suite, 80);
  const std::uint64_t plan_seed = check_seed(suite, 81);
  suite.log("  a8 planning");
  const EvalResult ev_vip = plan_tasks(suite, c, vip, task_seed, plan_seed);
  const EvalResult ev_id = plan_tasks(suite, c, Encoder::identity(2), task_seed, plan_seed);
  const CorrelationReport cv = reward_correlation(ev_vip.episodes);
  const CorrelationReport ci = reward_correlation(ev_id.episodes);
  if (const auto dir = artifact_dir(suite, "a8")) {
    write_resolved_config(c, *dir / "config.json");
    write_correlation_csv(cv, *dir / "vip_correlation.csv");
    write_correlation_csv(ci, *dir / "identity_correlation.csv");
    std::ofstream(*dir / "vip_correlation.json") << correlation_summary(cv).dump(2) << '\n';
    std::ofstream(*dir / "identity_correlation.json") << correlation_summary(ci).dump(2) << '\n';
    write_episode_steps_csv(ev_vip.episodes, *dir / "vip_steps.csv");
  }
  r.measured = {{"vip_r2", cv.r2},
                {"vip_slope", cv.slope},
                {"identity_r2", ci.r2},
                {"n", cv.n()},
                {"vip_success", ev_vip.success_rate}};
  r.passed = !cv.degenerate && cv.r2 >= 0.6 && !ci.degenerate && ci.r2 >= 1.0 - 1e-9;
  return r;
}

// --- a9 ------------------------------------------------------------------------

bool same_trajectories(const TrajectoryDataset& a, const TrajectoryDataset& b) {
  if (a.size() != b.size() || a.manifest() != b.manifest()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].frames != b[i].frames || a[i].actions != b[i].actions ||
        a[i].states != b[i].states || a[i].metadata != b[i].metadata) {
      return false;
    }
  }
  return true;
}

bool same_weights(const Encoder& a, const Encoder& b) {
  if (a.config() != b.config()) return false;
  const auto& pa = a.parameters();
  const auto& pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].value.shape != pb[i].value.shape || pa[i].value.data != pb[i].value.data) {
      return false;
    }
  }
  return true;
}

CheckResult check_a9(AcceptanceSuite& suite) {
  CheckResult r;
  r.thresholds = {{"rule", "byte-identical reruns and exact round trips"}};
  ExperimentConfig c;
  c.observation = ObservationMode::kImage16;
  c.seed = check_seed(suite, 9);
  c.data.num_trajectories = 20;
  c.encoder.input_dim = c.obs_dim();
  c.train.num_batches = 300;
  c.train.eval_interval = 100;

  const auto dir = artifact_dir(suite, "a9");
  const std::filesystem::path root =
      dir ? *dir
          : std::filesystem::temp_directory_path() /
                ("viplab_a9_" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(root);

  const TrajectoryDataset d1 = generate_dataset(c);
  const TrajectoryDataset d2 = generate_dataset(c);
  save_dataset(d1, root / "data_1.vipd");
  save_dataset(d2, root / "data_2.vipd");
  const bool data_bytes = read_bytes(root / "data_1.vipd") == read_bytes(root / "data_2.vipd");
  const bool data_round_trip = same_trajectories(d1, load_dataset(root / "data_1.vipd"));

  const TrainResult t1 = train_encoder(c, d1, Objective::kVip, root / "run_1");
  const TrainResult t2 = train_encoder(c, d1, Objective::kVip, root / "run_2");
  const bool metrics_bytes = read_bytes(root / "run_1" / "metrics.csv") ==
                             read_bytes(root / "run_2" / "metrics.csv");
  const bool encoder_bytes = read_bytes(root / "run_1" / "encoder.venc") ==
                             read_bytes(root / "run_2" / "encoder.venc");
  const Encoder loaded = load_encoder(root / "run_1" / "encoder.venc");
  save_encoder(loaded, root / "resaved.venc");
  const bool encoder_round_trip =
      same_weights(loaded, t1.encoder) &&
      read_bytes(root / "resaved.venc") == read_bytes(root / "run_1" / "encoder.venc");
  if (!dir) std::filesystem::remove_all(root);

  r.measured = {{"dataset_bytes_identical", data_bytes},
                {"dataset_round_trip", data_round_trip},
                {"metrics_bytes_identical", metrics_bytes},
                {"encoder_bytes_identical", encoder_bytes},
                {"encoder_round_trip", encoder_round_trip}};
  r.passed = data_bytes && data_round_trip && metrics_bytes && encoder_bytes &&
             encoder_round_trip && same_weights(t1.encoder, t2.encoder);
  return r;
}

struct CheckDef {
  const char* id;
  const char* description;
  CheckResult (*run)(AcceptanceSuite&);
};

const std::vector<CheckDef>& checks() {
  static const std::vector<CheckDef> defs = {
      {"a1", "gradient correctness (vip, tcn, lstd) vs central differences", check_a1},
      {"a2", "toy bump fraction: vip below tcn", check_a2},
      {"a3", "gridworld strict decrease along optimal paths", check_a3},
      {"a4", "MPPI Easy: vip vs random init vs identity", check_a4},
      {"a5", "MPPI Hard: vip >= lstd", check_a5},
      {"a6", "telescoping reward identity", check_a6},
      {"a7", "RWR (tau 0.1) vs BC on mixed data; tau 0 equals BC", check_a7},
      {"a8", "reward correlation R^2 on Easy raw-state episodes", check_a8},
      {"a9", "determinism and persistence", check_a9},
  };
  return defs;
}

std::string fmt_value(const json& v) {
  if (v.is_number_float()) {
    std::ostringstream os;
    os << std::setprecision(4) << v.get<double>();
    return os.str();
  }
  if (v.is_array()) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt_value(v[i]);
    return s + "]";
  }
  if (v.is_object()) {
    std::string s = "{";
    bool first = true;
    for (const auto& item : v.items()) {
      s += (first ? "" : " ") + item.key() + "=" + fmt_value(item.value());
      first = false;
    }
    return s + "}";
  }
  return v.dump();
}

}  // namespace

const std::vector<std::string>& all_check_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> out;
    for (const auto& d : checks()) out.push_back(d.id);
    return out;
  }();
  return ids;
}

std::vector<std::string> parse_suite(const std::string& spec) {
  if (spec == "all") return all_check_ids();
  auto index = [](const std::string& id) -> std::size_t {
    const auto& ids = all_check_ids();
    std::string lower = id;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    const auto it = std::find(ids.begin(), ids.end(), lower);
    if (it == ids.end()) throw std::invalid_argument("unknown check '" + id + "'");
    return static_cast<std::size_t>(it - ids.begin());
  };
  std::vector<std::string> out;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) throw std::invalid_argument("empty entry in suite '" + spec + "'");
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(all_check_ids()[index(part)]);
      continue;
    }
    const std::size_t lo = index(part.substr(0, dots));
    const std::size_t hi = index(part.substr(dots + 2));
    if (lo > hi) throw std::invalid_argument("empty range '" + part + "'");
    for (std::size_t i = lo; i <= hi; ++i) out.push_back(all_check_ids()[i]);
  }
  if (out.empty()) throw std::invalid_argument("empty suite");
  return out;
}

AcceptanceSuite::AcceptanceSuite(SuiteOptions options)
    : options_(std::move(options)) {}

AcceptanceSuite::~AcceptanceSuite() = default;

void AcceptanceSuite::log(const std::string& line) const {
  if (options_.log) options_.log(line);
}

const Encoder& AcceptanceSuite::cached(const std::string& key,
                                       const std::function<Encoder()>& make) {
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    it = cache_.emplace(key, std::make_unique<Encoder>(make())).first;
  }
  return *it->second;
}

CheckResult AcceptanceSuite::run(const std::string& id) {
  const auto& defs = checks();
  const auto def = std::find_if(defs.begin(), defs.end(),
                                [&](const CheckDef& d) { return id == d.id; });
  if (def == defs.end()) throw std::invalid_argument("unknown check '" + id + "'");
  log("running " + id + ": " + def->description);
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult result;
  try {
    result = def->run(*this);
  } catch (const std::exception& e) {
    result = CheckResult{};
    result.passed = false;
    result.error = e.what();
  }
  result.id = def->id;
  result.description = def->description;
  result.seconds = elapsed(t0);
  return result;
}

std::vector<CheckResult> AcceptanceSuite::run_all(const std::vector<std::string>& ids) {
  std::vector<CheckResult> out;
  for (const auto& id : ids) {
    out.push_back(run(id));
    log(summary_line(out.back()));
  }
  return out;
}

std::string summary_line(const CheckResult& r) {
  std::string id = r.id;
  std::transform(id.begin(), id.end(), id.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  std::ostringstream os;
  os << id << (r.passed ? " PASS " : " FAIL ") << fmt_value(r.measured);
  if (!r.error.empty()) os << " error: " << r.error;
  os << " (" << std::fixed << std::setprecision(1) << r.seconds << "s)";
  return os.str();
}

json report_json(const std::vector<CheckResult>& results, std::uint64_t seed,
                 double total_seconds) {
  json checks_json = json::array();
  bool all = !results.empty();
  for (const auto& r : results) {
    json c = {{"id", r.id},
              {"description", r.description},
              {"passed", r.passed},
              {"measured", r.measured},
              {"thresholds", r.thresholds},
              {"seconds", r.seconds}};
    if (!r.error.empty()) c["error"] = r.error;
    checks_json.push_back(std::move(c));
    all = all && r.passed;
  }
  return {{"format", "viplab-report-1"},
          {"seed", seed},
          {"passed", all},
          {"total_seconds", total_seconds},
          {"checks", checks_json}};
}

std::vector<std::string> validate_report(const json& report) {
  std::vector<std::string> problems;
  auto need = [&](const json& obj, const char* key, auto pred, const std::string& where) {
    if (!obj.contains(key) || !pred(obj.at(key))) {
      problems.push_back(where + "." + key + " missing or mistyped");
    }
  };
  if (!report.is_object()) return {"$ is not an object"};
  const auto is_string = [](const json& v) { return v.is_string(); };
  const auto is_bool = [](const json& v) { return v.is_boolean(); };
  const auto is_number = [](const json& v) { return v.is_number(); };
  const auto is_uint = [](const json& v) { return v.is_number_unsigned(); };
  const auto is_object = [](const json& v) { return v.is_object(); };
  const auto is_array = [](const json& v) { return v.is_array(); };
  need(report, "format", is_string, "$");
  if (report.value("format", "") != "viplab-report-1") problems.push_back("$.format unexpected");
  need(report, "seed", is_uint, "$");
  need(report, "passed", is_bool, "$");
  need(report, "total_seconds", is_number, "$");
  need(report, "checks", is_array, "$");
  if (report.contains("checks") && report["checks"].is_array()) {
    bool all = !report["checks"].empty();
    for (std::size_t i = 0; i < report["checks"].size(); ++i) {
      const json& c = report["checks"][i];
      const std::string where = "$.checks[" + std::to_string(i) + "]";
      if (!c.is_object()) {
        problems.push_back(where + " is not an object");
        continue;
      }
      need(c, "id", is_string, where);
      need(c, "description", is_string, where);
      need(c, "passed", is_bool, where);
      need(c, "measured", is_object, where);
      need(c, "thresholds", is_object, where);
      need(c, "seconds", is_number, where);
      if (c.contains("error") && !c["error"].is_string()) problems.push_back(where + ".error mistyped");
      all = all && c.value("passed", false);
    }
    if (report.contains("passed") && report["passed"].is_boolean() &&
        report["passed"].get<bool>() != all) {
      problems.push_back("$.passed disagrees with the checks");
    }
  }
  return problems;
}

}  // namespace viplab
