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

// End-to-end acceptance checks a1..a9. Shared by `viplab repro` and the
// acceptance test binary; each check builds its own data from the master
// seed, so any subset can run alone.

#ifndef VIPLAB_ACCEPTANCE_H_
#define VIPLAB_ACCEPTANCE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "viplab/encoder.h"
#include "viplab/parallel.h"

namespace viplab {

struct SuiteOptions {
  std::uint64_t seed = 0;
  Exec exec = Exec::kParallel;
  // When set, per-check CSV/JSON artifacts go to <artifacts>/<id>/.
  std::optional<std::filesystem::path> artifacts;
  // Progress lines; silent when empty.
  std::function<void(const std::string&)> log;
};

struct CheckResult {
  std::string id;  // "a1" ... "a9"
  std::string description;
  bool passed = false;
  nlohmann::json measured = nlohmann::json::object();
  nlohmann::json thresholds = nlohmann::json::object();
  double seconds = 0.0;
  std::string error;  // set when the check threw
};

// "a1..a9", "a2..a4", "a1,a6", "a4" or "all". Throws std::invalid_argument.
std::vector<std::string> parse_suite(const std::string& spec);
const std::vector<std::string>& all_check_ids();

class AcceptanceSuite {
 public:
  explicit AcceptanceSuite(SuiteOptions options);
  ~AcceptanceSuite();

  // Never throws for a failing check: exceptions become error + failed.
  CheckResult run(const std::string& id);
  std::vector<CheckResult> run_all(const std::vector<std::string>& ids);

  // Trained encoders are cached by key for the lifetime of the suite.
  const Encoder& cached(const std::string& key,
                        const std::function<Encoder()>& make);
  const SuiteOptions& options() const { return options_; }
  void log(const std::string& line) const;

 private:
  SuiteOptions options_;
  std::map<std::string, std::unique_ptr<Encoder>> cache_;
};

// One line per check: "A4 PASS  <measured>  (12.3s)".
std::string summary_line(const CheckResult& result);

// {"format":"viplab-report-1","seed","passed","total_seconds","checks":[...]}
nlohmann::json report_json(const std::vector<CheckResult>& results,
                           std::uint64_t seed, double total_seconds);
// Structural check of a report; returns the problems found (empty = valid).
std::vector<std::string> validate_report(const nlohmann::json& report);

}  // namespace viplab

#endif  // VIPLAB_ACCEPTANCE_H_
