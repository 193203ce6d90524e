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

#ifndef SSL_LAB_IO_HPP_
#define SSL_LAB_IO_HPP_

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ssl_lab/data.hpp"
#include "ssl_lab/metrics.hpp"
#include "ssl_lab/trainer.hpp"

namespace ssl_lab {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest text that round-trips a double (17 significant digits).
std::string format_double(double v);

void write_dictionary_csv(const std::filesystem::path& path, const DictionaryMatrix& M);
DictionaryMatrix read_dictionary_csv(const std::filesystem::path& path);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

struct WeightCheckpoint {
  std::string name;
  Eigen::MatrixXd W;
};
// First line "<rows>,<cols>,<name>", then one line per matrix row.
void write_weights_csv(const std::filesystem::path& path, const Eigen::MatrixXd& W,
                       const std::string& name);
WeightCheckpoint read_weights_csv(const std::filesystem::path& path);

inline constexpr const char* kTrainCsvHeader =
    "epoch,loss,min_max_cosine,median_max_cosine,max_max_cosine,seconds";
void write_train_csv(const std::filesystem::path& path, const std::vector<TrainRecord>& records);
std::vector<TrainRecord> read_train_csv(const std::filesystem::path& path);

struct CertificationRow {
  std::string check;
  std::string instance;
  double value = 0.0;
  double expected = 0.0;
  double margin = 0.0;
  bool pass = false;
};
inline constexpr const char* kCertificationCsvHeader = "check,instance,value,expected,margin,pass";
void write_certification_csv(const std::filesystem::path& path,
                             const std::vector<CertificationRow>& rows);

void write_metrics_csv(const std::filesystem::path& path, const MaxCosineStats& stats,
                       const SupportSeparation& separation);

// Splits one CSV line on commas (no quoting).
std::vector<std::string> split_csv_line(const std::string& line);
double parse_double(const std::string& text);

}  // namespace ssl_lab

#endif  // SSL_LAB_IO_HPP_
