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


#include <cmath>

#include <gtest/gtest.h>

#include "ssl_lab/errors.hpp"
#include "ssl_lab/metrics.hpp"

namespace ssl_lab {
namespace {

// Reference Eq. for one column: max over rows of |cos|.
double naive_best(const Eigen::MatrixXd& W, const Eigen::VectorXd& col) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    best = std::max(best, std::abs(W.row(i).dot(col)) / (W.row(i).norm() * col.norm()));
  }
  return best;
}

TEST(MaxCosine, PerfectRecovery) {
  const auto M = generate_dictionary(20, 5, DictionaryMode::kQrGaussian, 1);
  const auto s = max_cosine_stats(M.entries().transpose(), M);
  EXPECT_NEAR(s.min, 1.0, 1e-12);
  EXPECT_NEAR(s.median, 1.0, 1e-12);
  EXPECT_NEAR(s.max, 1.0, 1e-12);
}

TEST(MaxCosine, MatchesReference) {
  Rng rng(2);
  const auto M = generate_dictionary(12, 6, DictionaryMode::kQrGaussian, 2);
  const Eigen::MatrixXd W = standard_normal(9, 12, rng);
  const auto s = max_cosine_stats(W, M);
  std::vector<double> v;
  for (int j = 0; j < 6; ++j) {
    v.push_back(naive_best(W, M.entries().col(j)));
    EXPECT_NEAR(s.per_column(j), v.back(), 1e-12);
  }
  std::sort(v.begin(), v.end());
  EXPECT_NEAR(s.min, v.front(), 1e-12);
  EXPECT_NEAR(s.median, v[2], 1e-12);  // lower middle of six
  EXPECT_NEAR(s.max, v.back(), 1e-12);
}

TEST(MaxCosine, OddMedian) {
  Rng rng(3);
  const auto M = generate_dictionary(8, 5, DictionaryMode::kQrGaussian, 3);
  const auto s = max_cosine_stats(standard_normal(4, 8, rng), M);
  std::vector<double> v(s.per_column.data(), s.per_column.data() + 5);
  std::sort(v.begin(), v.end());
  EXPECT_EQ(s.median, v[2]);
}

TEST(MaxCosine, OrderedAndBounded) {
  Rng rng(4);
  const auto M = generate_dictionary(10, 4, DictionaryMode::kQrGaussian, 4);
  for (int t = 0; t < 50; ++t) {
    const auto s = max_cosine_stats(standard_normal(7, 10, rng), M);
    EXPECT_LE(0.0, s.min);
    EXPECT_LE(s.min, s.median);
    EXPECT_LE(s.median, s.max);
    EXPECT_LE(s.max, 1.0);
  }
}

TEST(MaxCosine, InvariantUnderPermutationSignAndScale) {
  Rng rng(5);
  const auto M = generate_dictionary(10, 4, DictionaryMode::kQrGaussian, 5);
  for (int t = 0; t < 20; ++t) {
    const Eigen::MatrixXd W = standard_normal(6, 10, rng);
    const auto base = max_cosine_stats(W, M);
    Eigen::PermutationMatrix<Eigen::Dynamic> P(6);
    P.setIdentity();
    std::shuffle(P.indices().data(), P.indices().data() + 6, rng);
    Eigen::MatrixXd V = P * W;
    V.row(t % 6) *= -1.0;
    V.row((t + 1) % 6) *= 3.7;
    const auto moved = max_cosine_stats(V, M);
    EXPECT_LE((moved.per_column - base.per_column).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MaxCosine, RandomBaselineIsLow) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto M = generate_dictionary(50, 10, DictionaryMode::kQrGaussian, seed + 1000);
    total += max_cosine_stats(standard_normal(50, 50, rng), M).min;
  }
  EXPECT_LT(total / 100.0, 0.5);
}

TEST(MaxCosine, Errors) {
  const auto M = generate_dictionary(4, 2, DictionaryMode::kQrGaussian, 0);
  Eigen::MatrixXd W = Eigen::MatrixXd::Ones(3, 4);
  W.row(1).setZero();
  EXPECT_THROW(max_cosine_stats(W, M), DegenerateInputError);
  EXPECT_THROW(max_cosine_stats(Eigen::MatrixXd::Ones(3, 5), M), DimensionError);
  EXPECT_THROW(max_cosine_stats(Eigen::MatrixXd(0, 4), M), DimensionError);
}

TEST(Support, PerfectRecoveryMargins) {
  const auto M = generate_dictionary(12, 5, DictionaryMode::kQrGaussian, 6);
  const auto s = support_separation(M.entries().transpose(), M);
  EXPECT_LE((s.margin.array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_EQ(s.success_fraction, 1.0);
  const auto explicit_sets = support_separation(M.entries().transpose(), M,
                                                {{0}, {1}, {2}, {3}, {4}});
  EXPECT_LE((explicit_sets.margin.array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Support, WrongAssignmentIsNegative) {
  const auto M = generate_dictionary(3, 3, DictionaryMode::kIdentity, 0);
  const auto s = support_separation(Eigen::MatrixXd::Identity(3, 3), M, {{1}, {0}, {2}});
  EXPECT_NEAR(s.margin(0), -1.0, 1e-15);
  EXPECT_NEAR(s.margin(2), 1.0, 1e-15);
  EXPECT_NEAR(s.success_fraction, 1.0 / 3.0, 1e-15);
}

TEST(Support, TwoColumnSupport) {
  const auto M = generate_dictionary(3, 3, DictionaryMode::kIdentity, 0);
  Eigen::MatrixXd W(1, 3);
  W << 1.0, 1.0, 0.1;
  const auto s = support_separation(W, M, {{0, 1}});
  EXPECT_GT(s.margin(0), 0.0);
}

TEST(Support, Errors) {
  const auto M = generate_dictionary(3, 3, DictionaryMode::kIdentity, 0);
  Eigen::MatrixXd W = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(support_separation(W, M, {{0}, {1}}), DimensionError);
  EXPECT_THROW(support_separation(W, M, {{0}, {}, {2}}), ParameterError);
  EXPECT_THROW(support_separation(W, M, {{0}, {5}, {2}}), DimensionError);
  W.row(0).setZero();
  EXPECT_THROW(support_separation(W, M), DegenerateInputError);
}

}  // namespace
}  // namespace ssl_lab
