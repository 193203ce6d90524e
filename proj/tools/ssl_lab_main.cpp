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


// ssl-lab: run named experiment presets, list them, aggregate run directories.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssl_lab/config.hpp"
#include "ssl_lab/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitTolerance = 1;
constexpr int kExitUsage = 2;

void print_checks(const std::vector<ssl_lab::CertificationRow>& rows) {
  for (const auto& r : rows) {
    std::printf("%s  %-36s %-28s value=%-12.6g bound=%-12.6g\n", r.pass ? "PASS" : "FAIL",
                r.check.c_str(), r.instance.c_str(), r.value, r.expected);
  }
}

int do_list() {
  for (const auto& p : ssl_lab::preset_registry()) {
    const bool oracle = p.kind == ssl_lab::PresetKind::kOracle;
    std::printf("%-8s %-8s %s\n", p.name.c_str(), oracle ? "oracle" : "training",
                p.description.c_str());
    for (const auto& v : p.variants) std::printf("           %s\n", v.label.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-coding testbed for contrastive and non-contrastive learning"};
  app.require_subcommand(1);

  ssl_lab::RunOptions opt;
  std::string target, config_path, out_dir = "out";
  int epochs = 0;
  CLI::App* run = app.add_subcommand("run", "Run a preset or a config file");
  run->add_option("preset", target, "Preset name (see `list`)");
  run->add_option("--config", config_path, "Config file with an [experiment] section")
      ->check(CLI::ExistingFile);
  run->add_option("--seeds", opt.seeds, "Seeds per variant (default: preset's)")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed", opt.base_seed, "First master seed");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--check", opt.check, "Exit 1 when a declared tolerance fails");
  run->add_option("--epochs", epochs, "Override the epoch count")->check(CLI::PositiveNumber);
  run->add_option("--set", opt.overrides, "Override a key, e.g. --set loss.tau=2");
  run->add_option("--variant", opt.variant, "Run only this variant");
  run->add_option("--threads", opt.threads, "Worker threads (default SSL_LAB_THREADS or cores)")
      ->check(CLI::PositiveNumber);

  app.add_subcommand("list", "List presets and their variants");

  std::string report_dir;
  CLI::App* rep = app.add_subcommand("report", "Aggregate run_<group>_<seed>.csv files");
  rep->add_option("dir", report_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand("list")) return do_list();
    if (app.got_subcommand("report")) {
      for (const auto& f : ssl_lab::report(report_dir)) std::cout << f.string() << '\n';
      return kExitOk;
    }
    if (target.empty() == config_path.empty()) {
      std::cerr << "run: give exactly one of a preset name or --config FILE\n";
      return kExitUsage;
    }
    opt.out_dir = out_dir;
    if (epochs > 0) opt.epochs = epochs;
    ssl_lab::ExperimentPreset from_file;
    const ssl_lab::ExperimentPreset* preset = nullptr;
    if (!config_path.empty()) {
      from_file = ssl_lab::preset_from_config(config_path);
      preset = &from_file;
    } else {
      preset = ssl_lab::find_preset(target);
      if (!preset) {
        std::cerr << "unknown preset '" << target << "'; try `ssl-lab list`\n";
        return kExitUsage;
      }
    }
    const ssl_lab::RunSummary s = ssl_lab::run_preset(*preset, opt);
    print_checks(s.checks);
    for (const auto& f : s.written) std::cout << "wrote " << f.string() << '\n';
    return s.exit_code == 0 ? kExitOk : kExitTolerance;
  } catch (const ssl_lab::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ssl_lab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
