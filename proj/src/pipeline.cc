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

#include "viplab/pipeline.h"

#include <cstdint>
#include <fstream>
#include <set>
#include <type_traits>

#include "viplab/errors.h"

namespace viplab {

namespace {

using nlohmann::json;

// Strict view of one JSON object: unknown keys are rejected up front and
// every read is type-checked against the target.
class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_, "expected an object");
    for (const auto& item : j.items()) {
      if (!allowed.count(item.key())) {
        throw ConfigError(path_ + "." + item.key(), "unknown key");
      }
    }
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }
  const json& at(const std::string& key) const { return j_.at(key); }

  template <typename T>
  void read(const std::string& key, T& out) const {
    if (!has(key)) return;
    out = convert<T>(j_.at(key), path(key));
  }

  template <typename T>
  void read_optional(const std::string& key, std::optional<T>& out) const {
    if (!has(key) || j_.at(key).is_null()) return;
    out = convert<T>(j_.at(key), path(key));
  }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      // Text parses non-negatives as unsigned; json built in code may hold
      // them as signed.
      if (!v.is_number_integer() ||
          (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError(where, "expected a non-negative integer");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where, "expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, Vec2>) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() ||
          !v[1].is_number()) {
        throw ConfigError(where, "expected [x, y]");
      }
      return Vec2{v[0].get<double>(), v[1].get<double>()};
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      if (!v.is_array()) throw ConfigError(where, "expected an array");
      std::vector<std::size_t> out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<std::size_t>(v[i], where + "[" + std::to_string(i) + "]"));
      }
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

 private:
  const json& j_;
  std::string path_;
};

template <typename F>
auto with_path(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

void parse_point_mass(const Section& s, PointMassWorld& w) {
  s.read("dt", w.dt);
  s.read("max_action", w.max_action);
  s.read("tolerance", w.tolerance);
  s.read("expert_gain", w.expert_gain);
  s.read("easy_radius", w.easy_radius);
  s.read("render_sigma", w.render_sigma);
  if (s.has("obstacles")) {
    const json& list = s.at("obstacles");
    const std::string where = s.path("obstacles");
    if (!list.is_array()) throw ConfigError(where, "expected an array");
    w.obstacles.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const json& r = list[i];
      const std::string at = where + "[" + std::to_string(i) + "]";
      if (!r.is_array() || r.size() != 4) {
        throw ConfigError(at, "expected [x0, y0, x1, y1]");
      }
      w.obstacles.push_back({Section::convert<double>(r[0], at),
                             Section::convert<double>(r[1], at),
                             Section::convert<double>(r[2], at),
                             Section::convert<double>(r[3], at)});
    }
  }
}

void parse_grid(const Section& s, GridWorld& g) {
  std::size_t width = static_cast<std::size_t>(g.width);
  std::size_t height = static_cast<std::size_t>(g.height);
  std::size_t easy = static_cast<std::size_t>(g.easy_steps);
  s.read("width", width);
  s.read("height", height);
  s.read("easy_steps", easy);
  g.width = static_cast<int>(width);
  g.height = static_cast<int>(height);
  g.easy_steps = static_cast<int>(easy);
  if (s.has("blocked")) {
    const json& list = s.at("blocked");
    const std::string where = s.path("blocked");
    if (!list.is_array()) throw ConfigError(where, "expected an array");
    g.blocked.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const json& c = list[i];
      const std::string at = where + "[" + std::to_string(i) + "]";
      if (!c.is_array() || c.size() != 2) throw ConfigError(at, "expected [x, y]");
      g.blocked.push_back({static_cast<int>(Section::convert<std::size_t>(c[0], at)),
                           static_cast<int>(Section::convert<std::size_t>(c[1], at))});
    }
  }
}

json vec2_json(const Vec2& v) { return json::array({v[0], v[1]}); }

}  // namespace

const char* to_string(WorldKind k) {
  return k == WorldKind::kPointMass ? "point_mass" : "grid";
}

std::size_t ExperimentConfig::obs_dim() const {
  return world == WorldKind::kPointMass ? point_mass.obs_dim(observation)
                                        : grid.obs_dim(observation);
}

std::uint64_t stream_seed(const ExperimentConfig& config, SeedStream stream) {
  return derive_seed(config.seed, static_cast<std::uint64_t>(stream));
}

EncoderConfig ExperimentConfig::resolved_encoder() const {
  EncoderConfig e = encoder;
  e.input_dim = obs_dim();
  e.init_seed = encoder_init_seed.value_or(
      stream_seed(*this, SeedStream::kEncoderInit));
  return e;
}

TrainConfig ExperimentConfig::resolved_train(Objective objective) const {
  TrainConfig t = train;
  t.objective = objective;
  t.seed = train_seed.value_or(stream_seed(*this, SeedStream::kTrain));
  return t;
}

RwrConfig ExperimentConfig::resolved_rwr() const {
  RwrConfig r = rwr;
  r.seed = rwr_seed.value_or(stream_seed(*this, SeedStream::kRwr));
  return r;
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  const Section root(j, "$",
                     {"world", "observation", "data", "encoder", "loss", "train",
                      "mppi", "plan", "rwr", "analysis", "output_dir", "seed"});
  root.read("seed", c.seed);
  root.read("output_dir", c.output_dir);
  if (root.has("observation")) {
    const auto s = Section::convert<std::string>(root.at("observation"), "$.observation");
    c.observation = with_path("$.observation", [&] { return observation_mode_from_string(s); });
  }

  if (root.has("world")) {
    const Section w(root.at("world"), "$.world", {"kind", "point_mass", "grid"});
    if (w.has("kind")) {
      const auto kind = Section::convert<std::string>(w.at("kind"), "$.world.kind");
      if (kind == "point_mass") {
        c.world = WorldKind::kPointMass;
      } else if (kind == "grid") {
        c.world = WorldKind::kGrid;
      } else {
        throw ConfigError("$.world.kind", "expected point_mass or grid, got '" + kind + "'");
      }
    }
    if (w.has("point_mass")) {
      parse_point_mass(Section(w.at("point_mass"), "$.world.point_mass",
                               {"dt", "max_action", "tolerance", "expert_gain",
                                "easy_radius", "render_sigma", "obstacles"}),
                       c.point_mass);
    }
    if (w.has("grid")) {
      parse_grid(Section(w.at("grid"), "$.world.grid",
                         {"width", "height", "blocked", "easy_steps"}),
                 c.grid);
    }
  }
  with_path("$.world.point_mass", [&] { c.point_mass.validate(); });
  with_path("$.world.grid", [&] { c.grid.validate(); });
  if (c.world == WorldKind::kGrid && c.observation == ObservationMode::kImage16 &&
      (c.grid.width > static_cast<int>(kRasterSide) ||
       c.grid.height > static_cast<int>(kRasterSide))) {
    throw ConfigError("$.observation", "image16 needs a grid of at most 16x16");
  }

  if (root.has("data")) {
    const Section d(root.at("data"), "$.data",
                    {"kind", "num_trajectories", "num_failures", "noise_scale",
                     "difficulty", "max_len", "goal", "decoy"});
    d.read("kind", c.data.kind);
    d.read("num_trajectories", c.data.num_trajectories);
    d.read("num_failures", c.data.num_failures);
    d.read("noise_scale", c.data.noise_scale);
    d.read("max_len", c.data.max_len);
    d.read_optional("goal", c.data.goal);
    d.read("decoy", c.data.decoy);
    if (d.has("difficulty")) {
      const auto s = Section::convert<std::string>(d.at("difficulty"), d.path("difficulty"));
      c.data.difficulty = with_path(d.path("difficulty"), [&] { return difficulty_from_string(s); });
    }
  }
  if (c.data.kind != "demos" && c.data.kind != "mixed") {
    throw ConfigError("$.data.kind", "expected demos or mixed, got '" + c.data.kind + "'");
  }
  if (c.data.num_trajectories < 1) {
    throw ConfigError("$.data.num_trajectories", "must be >= 1");
  }
  if (c.data.max_len < 2) throw ConfigError("$.data.max_len", "must be >= 2");
  if (!(c.data.noise_scale >= 0.0)) throw ConfigError("$.data.noise_scale", "must be >= 0");
  if (c.world == WorldKind::kGrid && (c.data.goal || c.data.kind == "mixed")) {
    throw ConfigError("$.data", "fixed goals and mixed data need the point_mass world");
  }
  if (c.data.kind == "mixed" && !c.data.goal) {
    throw ConfigError("$.data.goal", "mixed data needs a fixed goal");
  }

  if (root.has("encoder")) {
    const Section e(root.at("encoder"), "$.encoder",
                    {"hidden_widths", "output_dim", "activation", "init_seed"});
    e.read("hidden_widths", c.encoder.hidden_widths);
    e.read("output_dim", c.encoder.output_dim);
    e.read_optional("init_seed", c.encoder_init_seed);
    if (e.has("activation")) {
      const auto s = Section::convert<std::string>(e.at("activation"), e.path("activation"));
      c.encoder.activation = with_path(e.path("activation"), [&] { return activation_from_string(s); });
    }
  }
  c.encoder.input_dim = c.obs_dim();
  with_path("$.encoder", [&] { c.encoder.validate(); });

  if (root.has("loss")) {
    const Section l(root.at("loss"), "$.loss",
                    {"gamma", "num_negatives", "l1_embedding_coeff", "norm_eps",
                     "goal_selfloop", "td_form", "tcn_window"});
    l.read("gamma", c.loss.gamma);
    l.read("num_negatives", c.loss.num_negatives);
    l.read("l1_embedding_coeff", c.loss.l1_embedding_coeff);
    l.read("norm_eps", c.loss.norm_eps);
    l.read("goal_selfloop", c.loss.goal_selfloop);
    l.read("tcn_window", c.loss.tcn_window);
    if (l.has("td_form")) {
      const auto s = Section::convert<std::string>(l.at("td_form"), l.path("td_form"));
      c.loss.td_form = with_path(l.path("td_form"), [&] { return td_form_from_string(s); });
    }
  }
  with_path("$.loss", [&] { c.loss.validate(); });

  if (root.has("train")) {
    const Section t(root.at("train"), "$.train",
                    {"batch_size", "learning_rate", "num_batches", "eval_interval",
                     "seed", "record_timing"});
    t.read("batch_size", c.train.batch_size);
    t.read("learning_rate", c.train.learning_rate);
    t.read("num_batches", c.train.num_batches);
    t.read("eval_interval", c.train.eval_interval);
    t.read("record_timing", c.train.record_timing);
    t.read_optional("seed", c.train_seed);
  }
  with_path("$.train", [&] { c.train.validate(); });

  if (root.has("mppi")) {
    const Section m(root.at("mppi"), "$.mppi",
                    {"horizon", "num_samples", "noise_fraction", "temperature",
                     "warm_start", "sparse_score"});
    m.read("horizon", c.mppi.horizon);
    m.read("num_samples", c.mppi.num_samples);
    m.read("noise_fraction", c.mppi.noise_fraction);
    m.read("temperature", c.mppi.temperature);
    m.read("warm_start", c.mppi.warm_start);
    m.read("sparse_score", c.mppi.sparse_score);
  }
  with_path("$.mppi", [&] { c.mppi.validate(); });

  if (root.has("plan")) {
    const Section p(root.at("plan"), "$.plan", {"episodes", "difficulty", "goal"});
    p.read("episodes", c.plan.episodes);
    p.read_optional("goal", c.plan.goal);
    if (p.has("difficulty")) {
      const auto s = Section::convert<std::string>(p.at("difficulty"), p.path("difficulty"));
      c.plan.difficulty = with_path(p.path("difficulty"), [&] { return difficulty_from_string(s); });
    }
  }

  if (c.plan.episodes < 1) throw ConfigError("$.plan.episodes", "must be >= 1");

  if (root.has("rwr")) {
    const Section r(root.at("rwr"), "$.rwr",
                    {"tau", "learning_rate", "batch_size", "num_steps",
                     "log_weight_clip", "hidden_widths", "init_log_std", "seed"});
    r.read("tau", c.rwr.tau);
    r.read("learning_rate", c.rwr.learning_rate);
    r.read("batch_size", c.rwr.batch_size);
    r.read("num_steps", c.rwr.num_steps);
    r.read("log_weight_clip", c.rwr.log_weight_clip);
    r.read("hidden_widths", c.rwr.hidden_widths);
    r.read("init_log_std", c.rwr.init_log_std);
    r.read_optional("seed", c.rwr_seed);
  }
  with_path("$.rwr", [&] { c.rwr.validate(); });

  if (root.has("analysis")) {
    const Section a(root.at("analysis"), "$.analysis", {"frame_cap", "bins", "range"});
    a.read("frame_cap", c.analysis.frame_cap);
    a.read("bins", c.analysis.bins);
    a.read_optional("range", c.analysis.range);
  }
  if (c.analysis.bins < 1) throw ConfigError("$.analysis.bins", "must be >= 1");
  if (c.analysis.range && !(*c.analysis.range > 0.0)) {
    throw ConfigError("$.analysis.range", "must be > 0");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

json resolved_config_json(const ExperimentConfig& c) {
  json obstacles = json::array();
  for (const Rect& r : c.point_mass.obstacles) obstacles.push_back({r.x0, r.y0, r.x1, r.y1});
  json blocked = json::array();
  for (const Cell& b : c.grid.blocked) blocked.push_back({b.x, b.y});
  const EncoderConfig enc = c.resolved_encoder();
  return json{
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"observation", to_string(c.observation)},
      {"world",
       {{"kind", to_string(c.world)},
        {"point_mass",
         {{"dt", c.point_mass.dt},
          {"max_action", c.point_mass.max_action},
          {"tolerance", c.point_mass.tolerance},
          {"expert_gain", c.point_mass.expert_gain},
          {"easy_radius", c.point_mass.easy_radius},
          {"render_sigma", c.point_mass.render_sigma},
          {"obstacles", obstacles}}},
        {"grid",
         {{"width", c.grid.width},
          {"height", c.grid.height},
          {"blocked", blocked},
          {"easy_steps", c.grid.easy_steps}}}}},
      {"data",
       {{"kind", c.data.kind},
        {"num_trajectories", c.data.num_trajectories},
        {"num_failures", c.data.num_failures},
        {"noise_scale", c.data.noise_scale},
        {"difficulty", to_string(c.data.difficulty)},
        {"max_len", c.data.max_len},
        {"goal", c.data.goal ? vec2_json(*c.data.goal) : json(nullptr)},
        {"decoy", vec2_json(c.data.decoy)}}},
      {"encoder",
       {{"hidden_widths", enc.hidden_widths},
        {"output_dim", enc.output_dim},
        {"activation", to_string(enc.activation)},
        {"init_seed", enc.init_seed}}},
      {"loss",
       {{"gamma", c.loss.gamma},
        {"num_negatives", c.loss.num_negatives},
        {"l1_embedding_coeff", c.loss.l1_embedding_coeff},
        {"norm_eps", c.loss.norm_eps},
        {"goal_selfloop", c.loss.goal_selfloop},
        {"td_form", to_string(c.loss.td_form)},
        {"tcn_window", c.loss.tcn_window}}},
      {"train",
       {{"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"num_batches", c.train.num_batches},
        {"eval_interval", c.train.eval_interval},
        {"record_timing", c.train.record_timing},
        {"seed", c.resolved_train(c.train.objective).seed}}},
      {"mppi", c.mppi},
      {"plan",
       {{"episodes", c.plan.episodes},
        {"difficulty", to_string(c.plan.difficulty)},
        {"goal", c.plan.goal ? vec2_json(*c.plan.goal) : json(nullptr)}}},
      {"rwr", c.resolved_rwr()},
      {"analysis",
       {{"frame_cap", c.analysis.frame_cap},
        {"bins", c.analysis.bins},
        {"range", c.analysis.range ? json(*c.analysis.range) : json(nullptr)}}}};
}

void write_resolved_config(const ExperimentConfig& config,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  out << resolved_config_json(config).dump(2) << '\n';
}

TrajectoryDataset generate_dataset(const ExperimentConfig& c) {
  Rng rng = make_rng(c.seed, static_cast<std::uint64_t>(SeedStream::kData));
  TrajectoryDataset ds;
  const DataConfig& d = c.data;
  if (c.world == WorldKind::kGrid) {
    for (std::size_t i = 0; i < d.num_trajectories; ++i) {
      const GridTask task = sample_task(c.grid, d.difficulty, rng);
      ds.add(expert_rollout(c.grid, task.start, task.goal, d.noise_scale,
                            d.max_len, c.observation, rng));
    }
  } else {
    auto demo_task = [&]() {
      return d.goal ? sample_task_to(c.point_mass, *d.goal, d.difficulty, rng)
                    : sample_task(c.point_mass, d.difficulty, rng);
    };
    for (std::size_t i = 0; i < d.num_trajectories; ++i) {
      const PointTask task = demo_task();
      Trajectory t = expert_rollout(c.point_mass, task.start, task.goal,
                                    d.noise_scale, d.max_len, c.observation, rng);
      if (d.kind == "mixed") t.metadata["role"] = "demo";
      ds.add(std::move(t));
    }
    if (d.kind == "mixed") {
      for (std::size_t i = 0; i < d.num_failures; ++i) {
        const PointTask task = sample_task_to(c.point_mass, d.decoy, d.difficulty, rng);
        Trajectory t = expert_rollout(c.point_mass, task.start, task.goal,
                                      d.noise_scale, d.max_len, c.observation, rng);
        t.metadata["role"] = "failure";
        ds.add(std::move(t));
      }
    }
  }
  ds.manifest() = {{"generator", "viplab gen-data"},
                   {"world", to_string(c.world)},
                   {"observation", to_string(c.observation)},
                   {"seed", c.seed},
                   {"data", resolved_config_json(c).at("data")},
                   {"world_spec", resolved_config_json(c).at("world")}};
  ds.round_to_storage();
  return ds;
}

void check_encoder_input(const Encoder& encoder, std::size_t obs_dim,
                         const std::string& what) {
  if (encoder.input_dim() != obs_dim) {
    throw std::runtime_error("dimension mismatch: encoder expects " +
                             std::to_string(encoder.input_dim()) + " inputs, " +
                             what + " has " + std::to_string(obs_dim));
  }
}

TrainResult train_encoder(const ExperimentConfig& config,
                          const TrajectoryDataset& dataset, Objective objective,
                          const std::optional<std::filesystem::path>& out_dir) {
  if (dataset.empty()) throw std::runtime_error("train: dataset is empty");
  const EncoderConfig enc = config.resolved_encoder();
  if (dataset.obs_dim() != enc.input_dim) {
    throw std::runtime_error("dimension mismatch: config observations have " +
                             std::to_string(enc.input_dim) +
                             " dims, dataset has " +
                             std::to_string(dataset.obs_dim()));
  }
  return train(dataset, enc, config.resolved_train(objective), config.loss, out_dir);
}

std::vector<PointTask> sample_eval_tasks(const ExperimentConfig& config,
                                         std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PointTask> tasks;
  tasks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    tasks.push_back(config.plan.goal
                        ? sample_task_to(config.point_mass, *config.plan.goal,
                                         config.plan.difficulty, rng)
                        : sample_task(config.point_mass, config.plan.difficulty, rng));
  }
  return tasks;
}

GoalSpec task_goal(const ExperimentConfig& config, const Encoder& encoder,
                   const PointTask& task) {
  return GoalSpec(encoder, config.point_mass.observe(task.goal, config.observation));
}

EvalResult run_planner(const ExperimentConfig& config, const Encoder& encoder,
                       std::span<const PointTask> tasks, std::uint64_t seed,
                       Exec exec) {
  if (config.world != WorldKind::kPointMass) {
    throw ConfigError("$.world.kind", "planning needs the point_mass world");
  }
  check_encoder_input(encoder, config.obs_dim(), "the configured observation");
  EvalResult result;
  std::size_t ok = 0;
  const std::size_t horizon = episode_horizon(config.plan.difficulty);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    Rng rng = make_rng(seed, i);
    const GoalSpec goal = task_goal(config, encoder, tasks[i]);
    result.episodes.push_back(mppi_episode(config.point_mass, config.observation,
                                           tasks[i], encoder, goal, config.mppi,
                                           horizon, rng, exec));
    ok += result.episodes.back().success ? 1 : 0;
  }
  result.success_rate =
      tasks.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(tasks.size());
  return result;
}

Matrix demo_goal_frames(const TrajectoryDataset& dataset) {
  Matrix demos, all;
  for (const Trajectory& t : dataset.trajectories()) {
    const auto last = t.frame(t.length() - 1);
    all.append_row(last);
    if (t.metadata.is_object() && t.metadata.value("role", "") == "demo") {
      demos.append_row(last);
    }
  }
  return demos.empty() ? all : demos;
}

}  // namespace viplab
