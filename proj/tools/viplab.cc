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

// viplab: command-line driver. Logs go to stderr, artifacts to files.
// Exit codes: 0 ok, 1 bad configuration or flags, 2 runtime failure.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <vector>
#include <string>

#include "CLI11.hpp"
#include "viplab/acceptance.h"
#include "viplab/analysis.h"
#include "viplab/control.h"
#include "viplab/encoder.h"
#include "viplab/objectives.h"
#include "viplab/parallel.h"
#include "viplab/pipeline.h"
#include "viplab/trajstore.h"

namespace fs = std::filesystem;
using namespace viplab;

namespace {

constexpr int kOk = 0;
constexpr int kConfigExit = 1;
constexpr int kRuntimeExit = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

ExperimentConfig load(const Common& common) {
  ExperimentConfig c =
      common.config.empty() ? parse_config(nlohmann::json::object()) : load_config(common.config);
  if (common.seed) c.seed = *common.seed;
  return c;
}

fs::path beside(const fs::path& out, const std::string& suffix) {
  return fs::path(out.string() + suffix);
}

fs::path with_stem_suffix(const fs::path& out, const std::string& suffix,
                          const std::string& ext) {
  return out.parent_path() / (out.stem().string() + suffix + ext);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void log(const std::string& line) { std::cerr << line << '\n'; }

// Enum-valued flags: a bad value is a configuration error, not a runtime one.
template <typename F>
auto flag_value(const std::string& flag, F&& parse) -> decltype(parse()) {
  try {
    return parse();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(flag, e.what());
  }
}

// --- gen-data ---------------------------------------------------------------

struct GenDataArgs {
  std::string out;
};

int cmd_gen_data(const Common& common, const GenDataArgs& a) {
  const ExperimentConfig c = load(common);
  const TrajectoryDataset ds = generate_dataset(c);
  ensure_parent(a.out);
  save_dataset(ds, a.out);
  write_resolved_config(c, beside(a.out, ".config.json"));
  log("wrote " + std::to_string(ds.size()) + " trajectories (" +
      std::to_string(ds.num_transitions()) + " transitions) to " + a.out);
  return kOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string objective = "vip";
  std::string out;
};

int cmd_train(const Common& common, const TrainArgs& a) {
  const ExperimentConfig c = load(common);
  const Objective objective =
      flag_value("--objective", [&] { return objective_from_string(a.objective); });
  const TrajectoryDataset ds = load_dataset(a.data);
  fs::create_directories(a.out);
  write_resolved_config(c, fs::path(a.out) / "experiment.json");
  const TrainResult result = train_encoder(c, ds, objective, fs::path(a.out));
  log("trained " + std::string(to_string(objective)) + " for " +
      std::to_string(c.train.num_batches) + " batches, final loss " +
      std::to_string(result.metrics.empty() ? 0.0 : result.metrics.back().loss) +
      "; wrote " + a.out);
  return kOk;
}

// --- plan -------------------------------------------------------------------

struct PlanArgs {
  std::string encoder;
  std::optional<std::size_t> episodes;
  std::string difficulty;
  std::string out;
  std::string steps_out;
};

int cmd_plan(const Common& common, const PlanArgs& a) {
  ExperimentConfig c = load(common);
  if (a.episodes) {
    if (*a.episodes < 1) throw ConfigError("--episodes", "must be >= 1");
    c.plan.episodes = *a.episodes;
  }
  if (!a.difficulty.empty()) {
    c.plan.difficulty =
        flag_value("--difficulty", [&] { return difficulty_from_string(a.difficulty); });
  }
  if (c.world != WorldKind::kPointMass) {
    throw ConfigError("$.world.kind", "plan needs the point_mass world");
  }
  const Encoder encoder = load_encoder(a.encoder);
  check_encoder_input(encoder, c.obs_dim(), "the configured observation");
  const auto tasks = sample_eval_tasks(c, c.plan.episodes, stream_seed(c, SeedStream::kTasks));
  const EvalResult ev = run_planner(c, encoder, tasks, stream_seed(c, SeedStream::kPlan));
  ensure_parent(a.out);
  write_episode_summary_csv(ev.episodes, a.out);
  const fs::path steps = a.steps_out.empty() ? with_stem_suffix(a.out, "_steps", ".csv")
                                             : fs::path(a.steps_out);
  ensure_parent(steps);
  write_episode_steps_csv(ev.episodes, steps);
  write_resolved_config(c, beside(a.out, ".config.json"));
  log("success rate " + std::to_string(ev.success_rate) + " over " +
      std::to_string(ev.episodes.size()) + " episodes; wrote " + a.out);
  return kOk;
}

// --- offline-rl -------------------------------------------------------------

struct OfflineArgs {
  std::string mode = "rwr";
  std::string data;
  std::string encoder;
  std::optional<double> tau;
  std::optional<std::size_t> steps;
  std::size_t eval_episodes = 0;
  std::string out;
};

int cmd_offline_rl(const Common& common, const OfflineArgs& a) {
  ExperimentConfig c = load(common);
  if (a.mode != "rwr" && a.mode != "bc") {
    throw ConfigError("--mode", "expected rwr or bc, got '" + a.mode + "'");
  }
  if (a.tau) {
    if (a.mode == "bc") throw ConfigError("--tau", "bc has no temperature");
    c.rwr.tau = *a.tau;
  }
  if (a.steps) c.rwr.num_steps = *a.steps;
  RwrConfig rc = c.resolved_rwr();
  try {
    rc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("$.rwr", e.what());
  }
  if (c.world != WorldKind::kPointMass) {
    throw ConfigError("$.world.kind", "offline-rl needs the point_mass world");
  }
  const std::optional<Vec2> eval_goal = c.plan.goal ? c.plan.goal : c.data.goal;
  if (a.eval_episodes > 0 && !eval_goal) {
    throw ConfigError("$.plan.goal", "evaluation needs a fixed goal");
  }
  const TrajectoryDataset ds = load_dataset(a.data);
  const Encoder encoder = load_encoder(a.encoder);
  check_encoder_input(encoder, ds.obs_dim(), "the dataset");
  const GoalSpec goal(encoder, demo_goal_frames(ds));
  const RwrResult result =
      a.mode == "bc" ? bc_train(ds, encoder, goal, rc) : rwr_train(ds, encoder, goal, rc);
  ensure_parent(a.out);
  save_policy(result.policy, a.out);
  write_resolved_config(c, beside(a.out, ".config.json"));
  log(a.mode + ": " + std::to_string(rc.num_steps) + " steps, final loss " +
      std::to_string(result.losses.empty() ? 0.0 : result.losses.back()) + "; wrote " + a.out);
  if (a.eval_episodes > 0) {
    ExperimentConfig ce = c;
    ce.plan.goal = eval_goal;
    const auto tasks = sample_eval_tasks(ce, a.eval_episodes, stream_seed(c, SeedStream::kTasks));
    Rng rng = make_rng(c.seed, static_cast<std::uint64_t>(SeedStream::kEval));
    const EvalResult ev =
        eval_policy(c.point_mass, c.observation, policy_fn(result.policy, encoder), encoder,
                    goal, tasks, episode_horizon(c.plan.difficulty), rng);
    const fs::path csv = with_stem_suffix(a.out, "_eval", ".csv");
    write_episode_summary_csv(ev.episodes, csv);
    log("eval success rate " + std::to_string(ev.success_rate) + "; wrote " + csv.string());
  }
  return kOk;
}

// --- analyze ----------------------------------------------------------------

struct AnalyzeArgs {
  std::string kind;
  std::string encoder;
  std::string encoder_b;
  std::string data;
  std::string out;
  bool normalize = false;
  std::optional<std::size_t> frame_cap;
  std::optional<std::size_t> bins;
  std::optional<double> range;
};

int cmd_analyze(const Common& common, const AnalyzeArgs& a) {
  ExperimentConfig c = load(common);
  if (a.frame_cap) c.analysis.frame_cap = *a.frame_cap;
  if (a.bins) {
    if (*a.bins < 1) throw ConfigError("--bins", "must be >= 1");
    c.analysis.bins = *a.bins;
  }
  if (a.range) {
    if (!(*a.range > 0.0)) throw ConfigError("--range", "must be > 0");
    c.analysis.range = *a.range;
  }
  const bool needs_data = a.kind != "corr";
  if (needs_data && a.data.empty()) throw ConfigError("--data", "required for --kind " + a.kind);
  const Encoder encoder = load_encoder(a.encoder);
  ensure_parent(a.out);

  if (a.kind == "corr") {
    if (c.world != WorldKind::kPointMass) {
      throw ConfigError("$.world.kind", "corr plans on the point_mass world");
    }
    check_encoder_input(encoder, c.obs_dim(), "the configured observation");
    const auto tasks = sample_eval_tasks(c, c.plan.episodes, stream_seed(c, SeedStream::kTasks));
    const EvalResult ev = run_planner(c, encoder, tasks, stream_seed(c, SeedStream::kPlan));
    const CorrelationReport report = reward_correlation(ev.episodes);
    write_correlation_csv(report, a.out);
    write_json(correlation_summary(report), with_stem_suffix(a.out, "", ".json"));
    log("R^2 " + std::to_string(report.r2) + " over " + std::to_string(report.n()) + " steps");
  } else {
    const TrajectoryDataset ds = load_dataset(a.data);
    check_encoder_input(encoder, ds.obs_dim(), "the dataset");
    if (a.kind == "curves") {
      std::vector<DistanceCurve> curves;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        curves.push_back(distance_curve_to_last(encoder, ds[i], ds[i].length(), a.normalize, i));
      }
      write_curves_csv(curves, a.out);
      log("wrote " + std::to_string(curves.size()) + " curves to " + a.out);
    } else if (a.kind == "bumps") {
      const BumpReport report = dataset_bump_report(encoder, ds, c.analysis.frame_cap);
      write_bumps_csv(report, a.out);
      log("mean bump fraction " + std::to_string(report.mean) + " over " +
          std::to_string(report.fractions.size()) + " trajectories (" +
          std::to_string(report.skipped_short.size()) + " short, " +
          std::to_string(report.degenerate.size()) + " degenerate)");
    } else if (a.kind == "hist") {
      // One encoder gives counts only; a second adds the count-difference ratio.
      std::vector<const Encoder*> encoders{&encoder};
      std::optional<Encoder> other;
      if (!a.encoder_b.empty()) {
        other = load_encoder(a.encoder_b);
        check_encoder_input(*other, ds.obs_dim(), "the dataset");
        encoders.push_back(&*other);
      }
      const HistogramReport report =
          reward_histogram(encoders, ds, {c.analysis.bins, c.analysis.range});
      write_histogram_csv(report, a.out);
      log("wrote " + std::to_string(report.counts_a.size()) + " bins to " + a.out);
    } else if (a.kind == "prop2") {
      const double fraction = prop2_check(encoder, ds);
      write_json({{"strict_decrease_fraction", fraction},
                  {"trajectories", ds.size()},
                  {"steps", ds.num_transitions()}},
                 a.out);
      log("strict decrease on " + std::to_string(fraction) + " of steps");
    } else {
      throw ConfigError("--kind", "expected curves, bumps, hist, corr or prop2");
    }
  }
  write_resolved_config(c, beside(a.out, ".config.json"));
  return kOk;
}

// --- repro ------------------------------------------------------------------

struct ReproArgs {
  std::string suite = "a1..a9";
  std::string out = "report.json";
  std::string artifacts;
};

int cmd_repro(const Common& common, const ReproArgs& a) {
  std::vector<std::string> ids;
  try {
    ids = parse_suite(a.suite);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("--suite", e.what());
  }
  SuiteOptions options;
  options.seed = common.seed.value_or(0);
  if (!a.artifacts.empty()) options.artifacts = fs::path(a.artifacts);
  options.log = log;
  AcceptanceSuite suite(options);
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = suite.run_all(ids);
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const nlohmann::json report = report_json(results, options.seed, total);
  write_json(report, a.out);
  log("wrote " + a.out);
  return report["passed"].get<bool>() ? kOk : kRuntimeExit;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"viplab: value-implicit pre-training lab"};
  app.require_subcommand(1);
  app.fallthrough();  // --seed and --threads may follow the subcommand
  Common common;
  app.add_option("--seed", common.seed, "master seed (overrides the config)");
  app.add_option("--threads", common.threads, "worker threads (else VIPLAB_THREADS)")
      ->check(CLI::PositiveNumber);

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "experiment config JSON")
        ->check(CLI::ExistingFile);
  };

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a demo dataset (VIPDATA1)");
  add_config(gen_cmd);
  gen_cmd->add_option("--out", gen.out, "dataset path")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train an encoder");
  add_config(train_cmd);
  train_cmd->add_option("--data", tr.data, "dataset path")->required();
  train_cmd->add_option("--objective", tr.objective, "vip | tcn | lstd");
  train_cmd->add_option("--out", tr.out, "run directory")->required();

  PlanArgs pl;
  auto* plan_cmd = app.add_subcommand("plan", "MPPI episodes with an embedding reward");
  add_config(plan_cmd);
  plan_cmd->add_option("--encoder", pl.encoder, "encoder checkpoint")->required();
  plan_cmd->add_option("--episodes", pl.episodes, "number of episodes");
  plan_cmd->add_option("--difficulty", pl.difficulty, "easy | hard");
  plan_cmd->add_option("--out", pl.out, "episode summary CSV")->required();
  plan_cmd->add_option("--steps-out", pl.steps_out, "per-step CSV (default <out>_steps.csv)");

  OfflineArgs off;
  auto* off_cmd = app.add_subcommand("offline-rl", "reward-weighted regression or BC");
  add_config(off_cmd);
  off_cmd->add_option("--mode", off.mode, "rwr | bc");
  off_cmd->add_option("--data", off.data, "dataset path")->required();
  off_cmd->add_option("--encoder", off.encoder, "encoder checkpoint")->required();
  off_cmd->add_option("--tau", off.tau, "RWR temperature");
  off_cmd->add_option("--steps", off.steps, "gradient steps");
  off_cmd->add_option("--eval-episodes", off.eval_episodes, "evaluate the policy afterwards");
  off_cmd->add_option("--out", off.out, "policy JSON")->required();

  AnalyzeArgs an;
  auto* an_cmd = app.add_subcommand("analyze", "analyses of a frozen encoder");
  add_config(an_cmd);
  an_cmd->add_option("--kind", an.kind, "curves | bumps | hist | corr | prop2")->required();
  an_cmd->add_option("--encoder", an.encoder, "encoder checkpoint")->required();
  an_cmd->add_option("--encoder-b", an.encoder_b, "second encoder (hist, optional)");
  an_cmd->add_option("--data", an.data, "dataset path");
  an_cmd->add_option("--out", an.out, "output file")->required();
  an_cmd->add_flag("--normalize", an.normalize, "curves: divide by the initial distance");
  an_cmd->add_option("--frame-cap", an.frame_cap, "bumps: frames kept per trajectory (0 = all)");
  an_cmd->add_option("--bins", an.bins, "hist: bin count");
  an_cmd->add_option("--range", an.range, "hist: half-width of the range");

  ReproArgs rp;
  auto* repro_cmd = app.add_subcommand("repro", "run acceptance checks");
  repro_cmd->add_option("--suite", rp.suite, "e.g. a1..a9, a4, a1,a6");
  repro_cmd->add_option("--out", rp.out, "report JSON");
  repro_cmd->add_option("--artifacts", rp.artifacts, "directory for per-check artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigExit;
  }

  try {
    set_threads(flag_value("--threads", [&] { return resolve_threads(common.threads); }));
    if (*gen_cmd) return cmd_gen_data(common, gen);
    if (*train_cmd) return cmd_train(common, tr);
    if (*plan_cmd) return cmd_plan(common, pl);
    if (*off_cmd) return cmd_offline_rl(common, off);
    if (*an_cmd) return cmd_analyze(common, an);
    if (*repro_cmd) return cmd_repro(common, rp);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeExit;
  }
  return kConfigExit;
}
