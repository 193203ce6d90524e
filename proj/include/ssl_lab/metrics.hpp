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

#ifndef SSL_LAB_METRICS_HPP_
#define SSL_LAB_METRICS_HPP_

#include <vector>

#include <Eigen/Core>

#include "ssl_lab/data.hpp"

namespace ssl_lab {

struct MaxCosineStats {
  Eigen::VectorXd per_column;  // best |cos| for each dictionary column
  double min = 0.0;
  double median = 0.0;  // lower middle element for even d
  double max = 0.0;
};

// For each dictionary column j: max_i |<W_i/|W_i|, M_j/|M_j|>|.
MaxCosineStats max_cosine_stats(const Eigen::MatrixXd& W, const DictionaryMatrix& M);

struct SupportSeparation {
  Eigen::VectorXd margin;  // per neuron: min in-support |cos| - max out-of-support |cos|
  double success_fraction = 0.0;  // share of neurons with a positive margin
};

// support_sets[i] lists the dictionary columns assigned to neuron i. When
// empty, every neuron is assigned its best-matching column.
SupportSeparation support_separation(const Eigen::MatrixXd& W, const DictionaryMatrix& M,
                                     const std::vector<std::vector<int>>& support_sets = {});

}  // namespace ssl_lab

#endif  // SSL_LAB_METRICS_HPP_
