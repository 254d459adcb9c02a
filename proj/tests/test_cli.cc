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
#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "test_util.h"
#include "viplab/acceptance.h"
#include "viplab/encoder.h"
#include "viplab/trajstore.h"

namespace viplab {
namespace {

struct CliRun {
  int code = -1;
  std::string output;  // stdout and stderr
};

CliRun run_cli(const std::string& args) {
  const std::string cmd = std::string(VIPLAB_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) {
    r.output += buf.data();
  }
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

// Small, fast configuration shared by the pipeline runs.
std::filesystem::path small_config(const std::filesystem::path& dir) {
  const auto path = dir / "small.json";
  testing::write_file(path, R"({
  "data": {"num_trajectories": 6, "max_len": 60},
  "encoder": {"hidden_widths": [16], "output_dim": 4},
  "train": {"num_batches": 20, "batch_size": 8},
  "plan": {"episodes": 3},
  "rwr": {"hidden_widths": [8], "num_steps": 30, "batch_size": 8}
})");
  return path;
}

TEST(Cli, NoSubcommandOrUnknownFlagIsConfigError) {
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("train --no-such-flag").code, 1);
  EXPECT_EQ(run_cli("gen-data").code, 1);  // --out is required
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run_cli("--help").code, 0); }

TEST(Cli, MissingDatasetIsRuntimeErrorNamingPath) {
  const auto dir = testing::scratch_dir();
  const auto missing = dir / "nowhere.vipd";
  const CliRun r = run_cli("train --data " + q(missing) + " --out " + q(dir / "run"));
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find(missing.string()), std::string::npos) << r.output;
}

TEST(Cli, BadConfigIsConfigErrorWithPath) {
  const auto dir = testing::scratch_dir();
  testing::write_file(dir / "bad.json", R"({"train": {"batch_size": -3}})");
  const CliRun r = run_cli("gen-data --config " + q(dir / "bad.json") + " --out " + q(dir / "d"));
  EXPECT_EQ(r.code, 1) << r.output;
  EXPECT_NE(r.output.find("$.train.batch_size"), std::string::npos) << r.output;
  EXPECT_EQ(run_cli("gen-data --threads 0 --out " + q(dir / "d")).code, 1);
  EXPECT_EQ(run_cli("train --objective nope --data x --out " + q(dir / "r")).code, 1);
}

TEST(Cli, PlanZeroEpisodesIsConfigError) {
  const auto dir = testing::scratch_dir();
  save_encoder(Encoder::identity(2), dir / "id.venc");
  const CliRun r = run_cli("plan --encoder " + q(dir / "id.venc") + " --episodes 0 --out " +
                        q(dir / "p.csv"));
  EXPECT_EQ(r.code, 1) << r.output;
}

TEST(Cli, OneFrameBumpsIsRuntimeError) {
  const auto dir = testing::scratch_dir();
  // A one-frame trajectory: VIPDATA1 rejects it when loading.
  Trajectory t;
  t.frames = Matrix(2, 1, {0.0, 1.0});
  TrajectoryDataset ds;
  ds.add(t);
  save_dataset(ds, dir / "one.vipd");
  std::string bytes = testing::read_file(dir / "one.vipd");
  // Patch T from 2 to 1 and drop one float so the blob sizes agree.
  const std::uint32_t one = 1;
  std::memcpy(bytes.data() + 12, &one, 4);
  bytes.erase(28, 4);
  std::uint64_t trailer = 0;
  std::memcpy(&trailer, bytes.data() + bytes.size() - 8, 8);
  trailer -= 4;
  std::memcpy(bytes.data() + bytes.size() - 8, &trailer, 8);
  testing::write_file(dir / "one.vipd", bytes);
  save_encoder(Encoder::identity(1), dir / "id.venc");
  const CliRun r = run_cli("analyze --kind bumps --frame-cap 0 --encoder " + q(dir / "id.venc") +
                        " --data " + q(dir / "one.vipd") + " --out " + q(dir / "b.csv"));
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("curve too short"), std::string::npos) << r.output;
}

TEST(Cli, GenDataIsDeterministicAndSeedMatters) {
  const auto dir = testing::scratch_dir();
  const auto cfg = small_config(dir);
  ASSERT_EQ(run_cli("gen-data --config " + q(cfg) + " --seed 4 --out " + q(dir / "a.vipd")).code,
            0);
  ASSERT_EQ(run_cli("gen-data --config " + q(cfg) + " --seed 4 --out " + q(dir / "b.vipd")).code,
            0);
  ASSERT_EQ(run_cli("gen-data --config " + q(cfg) + " --seed 5 --out " + q(dir / "c.vipd")).code,
            0);
  EXPECT_EQ(testing::read_file(dir / "a.vipd"), testing::read_file(dir / "b.vipd"));
  EXPECT_NE(testing::read_file(dir / "a.vipd"), testing::read_file(dir / "c.vipd"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a.vipd.config.json"));
}

TEST(Cli, PipelineRwrTauZeroEqualsBc) {
  const auto dir = testing::scratch_dir();
  const auto cfg = small_config(dir);
  const std::string c = " --config " + q(cfg) + " --threads 1";
  ASSERT_EQ(run_cli("gen-data" + c + " --out " + q(dir / "d.vipd")).code, 0);
  const CliRun tr = run_cli("train" + c + " --data " + q(dir / "d.vipd") + " --out " + q(dir / "run"));
  ASSERT_EQ(tr.code, 0) << tr.output;
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "encoder.venc"));
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "metrics.csv"));
  const std::string enc = " --encoder " + q(dir / "run" / "encoder.venc");

  const CliRun plan = run_cli("plan" + c + enc + " --out " + q(dir / "plan.csv"));
  ASSERT_EQ(plan.code, 0) << plan.output;
  const std::string summary = testing::read_file(dir / "plan.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "episode,success,steps,final_error");

  const std::string data = " --data " + q(dir / "d.vipd");
  ASSERT_EQ(run_cli("offline-rl" + c + enc + data + " --mode rwr --tau 0 --out " +
                    q(dir / "rwr0.json"))
                .code,
            0);
  ASSERT_EQ(run_cli("offline-rl" + c + enc + data + " --mode bc --out " + q(dir / "bc.json")).code,
            0);
  EXPECT_EQ(testing::read_file(dir / "rwr0.json"), testing::read_file(dir / "bc.json"));
  EXPECT_EQ(run_cli("offline-rl" + c + enc + data + " --mode bc --tau 0.5 --out " +
                    q(dir / "x.json"))
                .code,
            1);
  EXPECT_EQ(run_cli("offline-rl" + c + enc + data + " --mode dance --out " + q(dir / "x.json"))
                .code,
            1);

  // Demos here are shorter than the default frame cap.
  for (const std::string kind : {"curves", "bumps", "hist", "prop2"}) {
    const CliRun a = run_cli("analyze" + c + enc + data + " --kind " + kind +
                             " --frame-cap 0 --out " + q(dir / (kind + ".out")));
    EXPECT_EQ(a.code, 0) << kind << ": " << a.output;
  }
  const CliRun two = run_cli("analyze" + c + enc + data + " --kind hist --encoder-b " +
                             q(dir / "run" / "encoder.venc") + " --out " + q(dir / "h2.csv"));
  ASSERT_EQ(two.code, 0) << two.output;
  // Same encoder twice: every occupied bin has ratio 0.
  const std::string h2 = testing::read_file(dir / "h2.csv");
  EXPECT_NE(h2.find(",0\n"), std::string::npos) << h2;
  const std::string bumps = testing::read_file(dir / "bumps.out");
  EXPECT_EQ(bumps.substr(0, bumps.find('\n')), "traj_id,bump_fraction");

  // An image encoder against a raw-state dataset.
  save_encoder(Encoder::identity(256), dir / "wide.venc");
  const CliRun mismatch = run_cli("analyze --kind bumps --encoder " + q(dir / "wide.venc") + data +
                               " --out " + q(dir / "m.csv"));
  EXPECT_EQ(mismatch.code, 2);
  EXPECT_NE(mismatch.output.find("256"), std::string::npos) << mismatch.output;
}

TEST(Cli, ReproSingleCheckWritesValidReport) {
  const auto dir = testing::scratch_dir();
  const auto t0 = std::chrono::steady_clock::now();
  const CliRun r = run_cli("repro --suite a6 --out " + q(dir / "report.json"));
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_LT(secs, 5.0);
  const auto report = nlohmann::json::parse(testing::read_file(dir / "report.json"));
  EXPECT_TRUE(validate_report(report).empty());
  EXPECT_EQ(report["checks"].size(), 1u);
  EXPECT_EQ(run_cli("repro --suite a0 --out " + q(dir / "x.json")).code, 1);
}

}  // namespace
}  // namespace viplab
