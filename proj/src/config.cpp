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


#include "ssl_lab/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "ssl_lab/errors.hpp"
#include "ssl_lab/io.hpp"

namespace ssl_lab {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  for (char ch : s) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) return false;
  }
  return true;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const IoError&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

long long to_integer(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x) || std::abs(x) > 9.0e15) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return static_cast<long long>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

template <class F>
auto enum_value(const std::string& key, const std::string& v, F parse) {
  try {
    return parse(v);
  } catch (const ParameterError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

using Setter = std::function<void(TrainConfig&, const std::string& key, const std::string& v)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"loss.kind", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.loss.kind = enum_value(k, v, parse_loss_kind);
       }},
      {"loss.tau", [](TrainConfig& c, const std::string& k, const std::string& v) { c.loss.tau = to_double(k, v); }},
      {"loss.lambda", [](TrainConfig& c, const std::string& k, const std::string& v) { c.loss.lambda = to_double(k, v); }},
      {"loss.neg_batch", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.loss.neg_batch = static_cast<int>(to_integer(k, v));
       }},
      {"loss.stop_gradient", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.loss.stop_gradient = enum_value(k, v, parse_stop_gradient);
       }},
      {"loss.output_normalize", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.loss.output_normalize = to_bool(k, v);
       }},
      {"loss.normalize_floor", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.loss.normalize_floor = to_double(k, v);
       }},
      {"loss.ntxent", [](TrainConfig& c, const std::string& k, const std::string& v) { c.loss.ntxent = to_bool(k, v); }},

      {"data.p", [](TrainConfig& c, const std::string& k, const std::string& v) { c.p = to_integer(k, v); }},
      {"data.d", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.d = to_integer(k, v);
         c.latent.d = c.d;
       }},
      {"data.latent", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.latent.kind = enum_value(k, v, parse_latent_kind);
       }},
      {"data.sparsity", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.latent.sparsity = to_double(k, v);
       }},
      {"data.noise_sigma", [](TrainConfig& c, const std::string& k, const std::string& v) {
         if (v == "default") {
           c.noise_sigma.reset();
         } else {
           c.noise_sigma = to_double(k, v);
         }
       }},
      {"data.dictionary", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.dictionary = enum_value(k, v, parse_dictionary_mode);
       }},
      {"data.mask_scheme", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.mask_scheme = enum_value(k, v, parse_mask_scheme);
       }},
      {"data.mask_alpha", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.mask_alpha = to_double(k, v);
         c.loss.mask_alpha = c.mask_alpha;
       }},
      {"data.dataset_size", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.dataset_size = to_integer(k, v);
       }},

      {"model.m", [](TrainConfig& c, const std::string& k, const std::string& v) { c.m = to_integer(k, v); }},
      {"model.activation", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.activation = enum_value(k, v, parse_activation);
       }},
      {"model.srelu_bias", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.srelu_bias = to_double(k, v);
       }},
      {"model.batch_norm", [](TrainConfig& c, const std::string& k, const std::string& v) { c.batch_norm = to_bool(k, v); }},
      {"model.train_bias", [](TrainConfig& c, const std::string& k, const std::string& v) { c.train_bias = to_bool(k, v); }},
      {"model.predictor", [](TrainConfig& c, const std::string& k, const std::string& v) { c.predictor = to_bool(k, v); }},
      {"model.predictor_init", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.predictor_init = enum_value(k, v, parse_predictor_init);
       }},
      {"model.hidden_width", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.hidden_width = to_integer(k, v);
       }},

      {"optim.epochs", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.epochs = static_cast<int>(to_integer(k, v));
       }},
      {"optim.batch_size", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.batch_size = to_integer(k, v);
       }},
      {"optim.learning_rate", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.learning_rate = to_double(k, v);
       }},
      {"optim.weight_decay", [](TrainConfig& c, const std::string& k, const std::string& v) {
         if (v == "none") {
           c.weight_decay.reset();
         } else {
           c.weight_decay = to_double(k, v);
         }
       }},
      {"optim.normalization_hook", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.normalization_hook = enum_value(k, v, parse_normalization_hook);
       }},
      {"optim.alternate_every", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.alternate_every = static_cast<int>(to_integer(k, v));
       }},
      {"optim.gradient_mode", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.gradient_mode = enum_value(k, v, parse_gradient_mode);
       }},
      {"optim.init", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.init = enum_value(k, v, parse_init_kind);
       }},
      {"optim.warm_c", [](TrainConfig& c, const std::string& k, const std::string& v) { c.warm_c = to_double(k, v); }},
      {"optim.warm_sigma", [](TrainConfig& c, const std::string& k, const std::string& v) {
         if (v == "default") {
           c.warm_sigma.reset();
         } else {
           c.warm_sigma = to_double(k, v);
         }
       }},

      {"run.seed", [](TrainConfig& c, const std::string& k, const std::string& v) {
         const long long s = to_integer(k, v);
         if (s < 0) throw ConfigError(k + ": seed must be nonnegative");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"run.record_every", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.record_every = static_cast<int>(to_integer(k, v));
       }},
      {"run.wall_clock", [](TrainConfig& c, const std::string& k, const std::string& v) { c.wall_clock = to_bool(k, v); }},
  };
  return table;
}

}  // namespace

const std::string& ConfigFile::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw ConfigError("missing key '" + key + "'");
  return it->second;
}

ConfigFile parse_config_text(std::string_view text) {
  ConfigFile out;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!is_identifier(section)) throw ConfigError(where + "bad section name '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!is_identifier(key)) throw ConfigError(where + "bad key '" + key + "'");
    if (value.empty()) throw ConfigError(where + "empty value for '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (!out.values.emplace(full, value).second) {
      throw ConfigError(where + "duplicate key '" + full + "'");
    }
  }
  return out;
}

ConfigFile load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

TrainConfig apply_config(const ConfigFile& file, TrainConfig base) {
  const auto& table = setters();
  for (const auto& [key, value] : file.values) {
    if (key.rfind("experiment.", 0) == 0) continue;
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown key '" + key + "'");
    it->second(base, key, value);
  }
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return base;
}

std::string render_config(const TrainConfig& c) {
  std::ostringstream o;
  auto b = [](bool v) { return v ? "true" : "false"; };
  o << "[loss]\n"
    << "kind = " << to_string(c.loss.kind) << '\n'
    << "tau = " << format_double(c.loss.tau) << '\n'
    << "lambda = " << format_double(c.loss.lambda) << '\n'
    << "neg_batch = " << c.loss.neg_batch << '\n'
    << "stop_gradient = " << to_string(c.loss.stop_gradient) << '\n'
    << "output_normalize = " << b(c.loss.output_normalize) << '\n'
    << "normalize_floor = " << format_double(c.loss.normalize_floor) << '\n'
    << "ntxent = " << b(c.loss.ntxent) << "\n\n";
  o << "[data]\n"
    << "p = " << c.p << '\n'
    << "d = " << c.d << '\n'
    << "latent = " << to_string(c.latent.kind) << '\n'
    << "sparsity = " << format_double(c.latent.sparsity) << '\n'
    << "noise_sigma = " << (c.noise_sigma ? format_double(*c.noise_sigma) : "default") << '\n'
    << "dictionary = " << to_string(c.dictionary) << '\n'
    << "mask_scheme = " << to_string(c.mask_scheme) << '\n'
    << "mask_alpha = " << format_double(c.mask_alpha) << '\n'
    << "dataset_size = " << c.dataset_size << "\n\n";
  o << "[model]\n"
    << "m = " << c.m << '\n'
    << "activation = " << to_string(c.activation) << '\n'
    << "srelu_bias = " << format_double(c.srelu_bias) << '\n'
    << "batch_norm = " << b(c.batch_norm) << '\n'
    << "train_bias = " << b(c.train_bias) << '\n'
    << "predictor = " << b(c.predictor) << '\n'
    << "predictor_init = " << to_string(c.predictor_init) << '\n'
    << "hidden_width = " << c.hidden_width << "\n\n";
  o << "[optim]\n"
    << "epochs = " << c.epochs << '\n'
    << "batch_size = " << c.batch_size << '\n'
    << "learning_rate = " << format_double(c.learning_rate) << '\n'
    << "weight_decay = " << (c.weight_decay ? format_double(*c.weight_decay) : "none") << '\n'
    << "normalization_hook = " << to_string(c.normalization_hook) << '\n'
    << "alternate_every = " << c.alternate_every << '\n'
    << "gradient_mode = " << to_string(c.gradient_mode) << '\n'
    << "init = " << to_string(c.init) << '\n'
    << "warm_c = " << format_double(c.warm_c) << '\n'
    << "warm_sigma = " << (c.warm_sigma ? format_double(*c.warm_sigma) : "default") << "\n\n";
  o << "[run]\n"
    << "seed = " << c.seed << '\n'
    << "record_every = " << c.record_every << '\n'
    << "wall_clock = " << b(c.wall_clock) << '\n';
  return o.str();
}

DictionaryMode parse_dictionary_mode(std::string_view name) {
  if (name == "qr_gaussian") return DictionaryMode::kQrGaussian;
  if (name == "identity") return DictionaryMode::kIdentity;
  throw ParameterError("unknown dictionary mode '" + std::string(name) + "'");
}

std::string_view to_string(DictionaryMode mode) {
  return mode == DictionaryMode::kIdentity ? "identity" : "qr_gaussian";
}

}  // namespace ssl_lab
