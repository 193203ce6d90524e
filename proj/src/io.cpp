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


#include "ssl_lab/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace ssl_lab {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string short_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

void write_matrix_rows(std::ostream& out, const Eigen::MatrixXd& W) {
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      if (j) out << ',';
      out << format_double(W(i, j));
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_rows(std::istream& in, Eigen::Index rows, Eigen::Index cols,
                                 const fs::path& path) {
  Eigen::MatrixXd W(rows, cols);
  std::string line;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw IoError(path.string() + ": too few rows");
    const auto cells = split_csv_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != cols) {
      throw IoError(path.string() + ": row " + std::to_string(i) + " has the wrong width");
    }
    for (Eigen::Index j = 0; j < cols; ++j) W(i, j) = parse_double(cells[j]);
  }
  return W;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE) {
    throw IoError("not a number: '" + text + "'");
  }
  return v;
}

void write_dictionary_csv(const fs::path& path, const DictionaryMatrix& M) {
  std::ofstream out = open_out(path);
  write_matrix_rows(out, M.entries());
}

DictionaryMatrix read_dictionary_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    for (const auto& cell : split_csv_line(line)) r.push_back(parse_double(cell));
    if (!rows.empty() && r.size() != rows.front().size()) throw IoError("ragged dictionary CSV");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw IoError(path.string() + ": empty dictionary");
  Eigen::MatrixXd M(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
  }
  return DictionaryMatrix::from_entries(std::move(M));
}

void write_dataset_csv(const fs::path& path, const Dataset& data) {
  std::ofstream out = open_out(path);
  out << "sample_id";
  for (Eigen::Index j = 0; j < data.Z.rows(); ++j) out << ",z_" << j;
  for (Eigen::Index j = 0; j < data.X.rows(); ++j) out << ",x_" << j;
  out << '\n';
  for (Eigen::Index n = 0; n < data.size(); ++n) {
    out << n;
    for (Eigen::Index j = 0; j < data.Z.rows(); ++j) out << ',' << format_double(data.Z(j, n));
    for (Eigen::Index j = 0; j < data.X.rows(); ++j) out << ',' << format_double(data.X(j, n));
    out << '\n';
  }
}

void write_weights_csv(const fs::path& path, const Eigen::MatrixXd& W, const std::string& name) {
  if (name.find(',') != std::string::npos || name.find('\n') != std::string::npos) {
    throw IoError("checkpoint name must not contain commas or newlines");
  }
  std::ofstream out = open_out(path);
  out << W.rows() << ',' << W.cols() << ',' << name << '\n';
  write_matrix_rows(out, W);
}

WeightCheckpoint read_weights_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing header");
  const auto head = split_csv_line(line);
  if (head.size() != 3) throw IoError(path.string() + ": header must be rows,cols,name");
  const double r = parse_double(head[0]), c = parse_double(head[1]);
  if (r < 0 || c < 0 || r != std::floor(r) || c != std::floor(c)) {
    throw IoError(path.string() + ": bad matrix shape");
  }
  WeightCheckpoint ck;
  ck.name = head[2];
  ck.W = read_matrix_rows(in, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c), path);
  return ck;
}

void write_train_csv(const fs::path& path, const std::vector<TrainRecord>& records) {
  std::ofstream out = open_out(path);
  out << kTrainCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.epoch << ',' << short_double(r.loss) << ',' << short_double(r.min_max_cosine) << ','
        << short_double(r.median_max_cosine) << ',' << short_double(r.max_max_cosine) << ','
        << short_double(r.seconds) << '\n';
  }
}

std::vector<TrainRecord> read_train_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrainCsvHeader) throw IoError(path.string() + ": unexpected header");
  std::vector<TrainRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 6) throw IoError(path.string() + ": row must have 6 fields");
    TrainRecord r;
    r.epoch = static_cast<int>(parse_double(cells[0]));
    r.loss = parse_double(cells[1]);
    r.min_max_cosine = parse_double(cells[2]);
    r.median_max_cosine = parse_double(cells[3]);
    r.max_max_cosine = parse_double(cells[4]);
    r.seconds = parse_double(cells[5]);
    out.push_back(r);
  }
  return out;
}

void write_certification_csv(const fs::path& path, const std::vector<CertificationRow>& rows) {
  std::ofstream out = open_out(path);
  out << kCertificationCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.check << ',' << r.instance << ',' << format_double(r.value) << ','
        << format_double(r.expected) << ',' << format_double(r.margin) << ','
        << (r.pass ? "true" : "false") << '\n';
  }
}

void write_metrics_csv(const fs::path& path, const MaxCosineStats& stats,
                       const SupportSeparation& separation) {
  std::ofstream out = open_out(path);
  out << "# median_max_cosine is the lower middle element when d is even\n";
  out << "min_max_cosine,median_max_cosine,max_max_cosine,support_success_fraction\n";
  out << format_double(stats.min) << ',' << format_double(stats.median) << ','
      << format_double(stats.max) << ',' << format_double(separation.success_fraction) << '\n';
  out << "column,max_cosine\n";
  for (Eigen::Index j = 0; j < stats.per_column.size(); ++j) {
    out << j << ',' << format_double(stats.per_column(j)) << '\n';
  }
  out << "neuron,support_margin\n";
  for (Eigen::Index i = 0; i < separation.margin.size(); ++i) {
    out << i << ',' << format_double(separation.margin(i)) << '\n';
  }
}

}  // namespace ssl_lab
