// Copyright 2026 The ssl-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Named experiment presets, seeded fan-out, CSV aggregation and plot scripts.

#ifndef SSL_LAB_EXPERIMENTS_HPP_
#define SSL_LAB_EXPERIMENTS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ssl_lab/io.hpp"
#include "ssl_lab/trainer.hpp"

namespace ssl_lab {

// Bad command-line input: unknown preset, malformed override, empty report dir.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  int seeds = 0;  // 0 selects the preset default
  std::uint64_t base_seed = 0;
  std::filesystem::path out_dir = "out";
  bool check = false;
  std::optional<int> epochs;
  std::vector<std::string> overrides;  // "section.key=value", applied to every variant
  std::string variant;                 // empty runs every variant
  int threads = 0;                     // 0 uses SSL_LAB_THREADS or the core count
};

struct PresetVariant {
  std::string label;
  TrainConfig config;
};

// One finished seeded training run.
struct SeedRun {
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<TrainRecord> records;
};

enum class PresetKind { kTraining, kOracle };

struct ExperimentPreset {
  std::string name;
  std::string description;
  PresetKind kind = PresetKind::kTraining;
  std::vector<PresetVariant> variants;
  int default_seeds = 5;
  // Oracle presets: run the check and report one row per verified quantity.
  std::function<std::vector<CertificationRow>(const RunOptions&)> certify;
  // Training presets: declared tolerances evaluated on finished runs.
  std::function<std::vector<CertificationRow>(const std::vector<SeedRun>&, const RunOptions&)>
      check;
};

const std::vector<ExperimentPreset>& preset_registry();
// nullptr when no preset has this name.
const ExperimentPreset* find_preset(std::string_view name);

// Shared defaults: p = 50, d = 10, m = 50, batch norm and SReLU, sparsity 0.1.
TrainConfig basic_config(LossKind kind);

struct RunSummary {
  int exit_code = 0;  // 0 ok, 1 a declared tolerance failed in check mode
  std::vector<SeedRun> runs;
  std::vector<CertificationRow> checks;
  std::vector<std::filesystem::path> written;
};

RunSummary run_preset(const ExperimentPreset& preset, const RunOptions& options);

// A config file names its experiment in [experiment] (keys name and seeds);
// everything else overlays the default TrainConfig.
ExperimentPreset preset_from_config(const std::filesystem::path& path);

// Worker count: `requested` if positive, else SSL_LAB_THREADS, else the core count.
int worker_count(int requested);

// Runs every job on a bounded pool; results come back in job order.
std::vector<SeedRun> run_jobs(const std::vector<std::pair<PresetVariant, std::uint64_t>>& jobs,
                              int threads);

struct GroupSummary {
  std::string group;  // file stem shared by all seeds, e.g. "table2_cl-basic-s0.1"
  std::vector<std::uint64_t> seeds;
  std::vector<int> epochs;
  // Per epoch, per statistic (loss, min, median, max): mean, min, max over seeds.
  std::vector<std::array<double, 12>> bands;
};

// Groups run_<group>_<seed>.csv files and aggregates each group.
std::vector<GroupSummary> aggregate_runs(const std::filesystem::path& dir);

// Writes summary_<group>.csv, plot_<group>.gp and final.csv; returns the paths.
std::vector<std::filesystem::path> report(const std::filesystem::path& dir);

}  // namespace ssl_lab

#endif  // SSL_LAB_EXPERIMENTS_HPP_
