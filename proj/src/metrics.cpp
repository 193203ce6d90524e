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


#include "ssl_lab/metrics.hpp"

#include <algorithm>
#include <string>

#include "ssl_lab/encoders.hpp"
#include "ssl_lab/errors.hpp"

namespace ssl_lab {

namespace {

// |cos| between every row of W and every column of M (rows x d).
Eigen::MatrixXd abs_cosines(const Eigen::MatrixXd& W, const DictionaryMatrix& M) {
  if (W.cols() != M.p()) throw DimensionError("encoder input width must equal p");
  const Eigen::MatrixXd Wn = normalize_rows(W);
  const Eigen::MatrixXd Mn = normalize_columns(M.entries());
  return (Wn * Mn).cwiseAbs();
}

}  // namespace

MaxCosineStats max_cosine_stats(const Eigen::MatrixXd& W, const DictionaryMatrix& M) {
  if (W.rows() == 0) throw DimensionError("max_cosine_stats: W has no rows");
  const Eigen::MatrixXd C = abs_cosines(W, M);
  MaxCosineStats s;
  s.per_column = C.colwise().maxCoeff().transpose().cwiseMin(1.0);
  std::vector<double> sorted(s.per_column.data(), s.per_column.data() + s.per_column.size());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t d = sorted.size();
  s.min = sorted.front();
  s.max = sorted.back();
  s.median = d % 2 == 1 ? sorted[d / 2] : sorted[d / 2 - 1];
  return s;
}

SupportSeparation support_separation(const Eigen::MatrixXd& W, const DictionaryMatrix& M,
                                     const std::vector<std::vector<int>>& support_sets) {
  const Eigen::MatrixXd C = abs_cosines(W, M);
  const Eigen::Index m = C.rows(), d = C.cols();
  if (!support_sets.empty() && static_cast<Eigen::Index>(support_sets.size()) != m) {
    throw DimensionError("support_separation: one support set per neuron required");
  }
  SupportSeparation out;
  out.margin.resize(m);
  Eigen::Index wins = 0;
  std::vector<char> in(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < m; ++i) {
    std::fill(in.begin(), in.end(), 0);
    if (support_sets.empty()) {
      Eigen::Index best = 0;
      C.row(i).maxCoeff(&best);
      in[best] = 1;
    } else {
      if (support_sets[i].empty()) throw ParameterError("support set of neuron is empty");
      for (int j : support_sets[i]) {
        if (j < 0 || j >= d) throw DimensionError("support index out of range");
        in[j] = 1;
      }
    }
    double lo = 1.0, hi = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (in[j]) {
        lo = std::min(lo, C(i, j));
      } else {
        hi = std::max(hi, C(i, j));
      }
    }
    out.margin(i) = lo - hi;
    if (out.margin(i) > 0.0) ++wins;
  }
  out.success_fraction = m > 0 ? static_cast<double>(wins) / m : 0.0;
  return out;
}

}  // namespace ssl_lab
