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

#ifndef SSL_LAB_CONFIG_HPP_
#define SSL_LAB_CONFIG_HPP_

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ssl_lab/trainer.hpp"

namespace ssl_lab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat "[section]" / "key = value" text with '#' comments. Keys are stored
// as "section.key"; a key before any header lives in section "".
struct ConfigFile {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  const std::string& get(const std::string& key) const;
};

ConfigFile parse_config_text(std::string_view text);
ConfigFile load_config(const std::filesystem::path& path);

// Overlays every data/model/loss/optim/run key onto `base`. Keys in the
// "experiment" section are left to the caller; any other unknown key throws.
TrainConfig apply_config(const ConfigFile& file, TrainConfig base = {});

// Inverse of apply_config, for writing the effective config next to results.
std::string render_config(const TrainConfig& config);

DictionaryMode parse_dictionary_mode(std::string_view name);
std::string_view to_string(DictionaryMode mode);

}  // namespace ssl_lab

#endif  // SSL_LAB_CONFIG_HPP_
