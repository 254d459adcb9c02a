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

// Serial reference vs OpenMP kernel for the hot loops. The second benchmark
// argument selects the execution: 0 serial, 1 parallel.

#include <benchmark/benchmark.h>

#include <vector>

#include "viplab/control.h"
#include "viplab/encoder.h"
#include "viplab/worlds.h"

namespace viplab {
namespace {

Exec exec_of(const benchmark::State& state) {
  return state.range(1) == 0 ? Exec::kSerial : Exec::kParallel;
}

Encoder image_encoder() {
  EncoderConfig c;
  c.input_dim = kRasterSide * kRasterSide;
  c.hidden_widths = {64, 64};
  c.output_dim = 16;
  c.init_seed = 1;
  return Encoder::init(c);
}

void BM_EmbedBatch(benchmark::State& state) {
  const Encoder enc = image_encoder();
  const auto rows = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix x(rows, enc.input_dim());
  for (double& v : x.data) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(enc.embed_batch(x, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EmbedBatch)->ArgsProduct({{64, 1024}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_MppiPlanStep(benchmark::State& state) {
  const PointMassWorld world;
  const Encoder enc = image_encoder();
  const GoalSpec goal(enc, world.observe({0.8, 0.8}, ObservationMode::kImage16));
  MppiConfig cfg;
  cfg.num_samples = static_cast<std::size_t>(state.range(0));
  MppiState ms = MppiState::zeros(cfg.horizon);
  Rng rng(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mppi_plan(world, ObservationMode::kImage16, {0.2, 0.2}, enc, goal,
                                       cfg, ms, rng, exec_of(state)));
  }
}
BENCHMARK(BM_MppiPlanStep)->ArgsProduct({{32, 128}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_EvalPolicy(benchmark::State& state) {
  const PointMassWorld world;
  const Encoder enc = Encoder::identity(2);
  const GoalSpec goal(enc, std::vector<double>{0.75, 0.75});
  Rng task_rng(2);
  std::vector<PointTask> tasks;
  for (int i = 0; i < state.range(0); ++i) {
    tasks.push_back(sample_task_to(world, {0.75, 0.75}, Difficulty::kHard, task_rng));
  }
  RwrConfig rc;
  rc.hidden_widths = {64, 64};
  const GaussianPolicy policy = init_policy(4, 2, rc);
  const PolicyFn fn = policy_fn(policy, enc);
  for (auto _ : state) {
    Rng rng(9);
    benchmark::DoNotOptimize(eval_policy(world, ObservationMode::kRawState, fn, enc, goal, tasks,
                                         100, rng, exec_of(state)));
  }
}
BENCHMARK(BM_EvalPolicy)->ArgsProduct({{16, 64}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_RwrBatchGradient(benchmark::State& state) {
  const PointMassWorld world;
  const Encoder enc = Encoder::identity(2);
  const GoalSpec goal(enc, std::vector<double>{0.75, 0.75});
  Rng rng(4);
  TrajectoryDataset ds;
  for (int i = 0; i < 20; ++i) {
    const PointTask t = sample_task_to(world, {0.75, 0.75}, Difficulty::kHard, rng);
    ds.add(expert_rollout(world, t.start, t.goal, 0.1, 100, ObservationMode::kRawState, rng));
  }
  RwrConfig rc;
  const RwrData data = build_rwr_data(ds, enc, goal, rc);
  const GaussianPolicy policy = init_policy(data.inputs.cols, 2, rc);
  std::vector<std::size_t> batch(static_cast<std::size_t>(state.range(0)));
  for (auto& b : batch) b = rng() % data.inputs.rows;
  std::vector<std::vector<double>> grads;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rwr_batch_gradient(policy, data, batch, grads, exec_of(state)));
  }
}
BENCHMARK(BM_RwrBatchGradient)->ArgsProduct({{32, 256}, {0, 1}})->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace viplab

BENCHMARK_MAIN();
