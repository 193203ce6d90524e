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
#include "ssl_lab/encoders.hpp"
#include "ssl_lab/rng.hpp"

namespace ssl_lab {
namespace {

TEST(Forward, Linear) {
  const auto enc = make_encoder(Eigen::MatrixXd::Identity(2, 2), Activation::kLinear);
  EXPECT_EQ(encoder_forward(enc, Eigen::Vector2d(1, -2)), Eigen::Vector2d(1, -2));
}

TEST(Forward, Relu) {
  const auto enc = make_encoder(Eigen::MatrixXd::Identity(2, 2), Activation::kRelu);
  EXPECT_EQ(encoder_forward(enc, Eigen::Vector2d(1, -2)), Eigen::Vector2d(1, 0));
}

TEST(Forward, Srelu) {
  const auto enc = make_encoder(Eigen::MatrixXd::Identity(2, 2), Activation::kSrelu, 1.0);
  EXPECT_EQ(encoder_forward(enc, Eigen::Vector2d(2, -2)), Eigen::Vector2d(1, -1));
}

TEST(Forward, HiddenLayerComposes) {
  Rng rng(1);
  auto enc = make_encoder(standard_normal(3, 4, rng), Activation::kLinear);
  enc.W_in = standard_normal(4, 5, rng);
  const Eigen::VectorXd a = standard_normal(5, 1, rng).col(0);
  EXPECT_LE((encoder_forward(enc, a) - enc.effective_weights() * a).cwiseAbs().maxCoeff(),
            1e-12);
  EXPECT_EQ(enc.in_dim(), 5);
}

TEST(Forward, LinearIsLinear) {
  Rng rng(2);
  const auto enc = make_encoder(standard_normal(4, 6, rng), Activation::kLinear);
  const Eigen::VectorXd a1 = standard_normal(6, 1, rng).col(0);
  const Eigen::VectorXd a2 = standard_normal(6, 1, rng).col(0);
  const Eigen::VectorXd lhs = encoder_forward(enc, 0.7 * a1 - 1.3 * a2);
  const Eigen::VectorXd rhs = 0.7 * encoder_forward(enc, a1) - 1.3 * encoder_forward(enc, a2);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, DimensionMismatch) {
  const auto enc = make_encoder(Eigen::MatrixXd::Identity(2, 3), Activation::kRelu);
  EXPECT_THROW(encoder_forward(enc, Eigen::Vector2d(1, 1)), DimensionError);
}

TEST(Srelu, Cases) {
  const Eigen::VectorXd b = Eigen::VectorXd::Ones(1);
  EXPECT_EQ(srelu(Eigen::VectorXd::Constant(1, 0.5), b)(0), 0.0);
  EXPECT_EQ(srelu(Eigen::VectorXd::Constant(1, 2.0), b)(0), 1.0);
  EXPECT_EQ(srelu(Eigen::VectorXd::Constant(1, -2.0), b)(0), -1.0);
}

TEST(Srelu, ZeroBiasIsIdentity) {
  Rng rng(3);
  const Eigen::VectorXd x = standard_normal(10, 1, rng).col(0);
  EXPECT_EQ(srelu(x, Eigen::VectorXd::Zero(10)), x);
}

TEST(Srelu, Odd) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd x = 3.0 * standard_normal(5, 1, rng).col(0);
    const Eigen::VectorXd b = standard_normal(5, 1, rng).col(0).cwiseAbs();
    EXPECT_EQ(srelu(-x, b), -srelu(x, b));
  }
}

TEST(Srelu, RejectsNegativeBias) {
  EXPECT_THROW(srelu(Eigen::VectorXd::Zero(2), Eigen::Vector2d(0.1, -0.1)), ParameterError);
  EXPECT_THROW(srelu(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)), DimensionError);
  EXPECT_THROW(make_encoder(Eigen::MatrixXd::Identity(2, 2), Activation::kSrelu, -1.0),
               ParameterError);
}

TEST(Predictor, Probes) {
  Rng rng(5);
  const Eigen::VectorXd h = standard_normal(3, 1, rng).col(0);
  EXPECT_EQ(predictor_forward({Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)}, h), h);
  const Eigen::Vector3d c(1, 2, 3);
  EXPECT_EQ(predictor_forward({Eigen::MatrixXd::Zero(3, 3), c}, h), c);
  const PredictorState p{standard_normal(3, 3, rng), standard_normal(3, 1, rng).col(0)};
  EXPECT_LE((predictor_forward(p, Eigen::Vector3d(1, 0, 0)) - (p.Wp.col(0) + p.bp))
                .cwiseAbs()
                .maxCoeff(),
            1e-15);
}

TEST(Normalize, Examples) {
  const Eigen::MatrixXd D = Eigen::Vector2d(2, 3).asDiagonal();
  EXPECT_EQ(normalize_rows(D), Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(normalize_columns(D), Eigen::MatrixXd::Identity(2, 2));
  const Eigen::VectorXd v = l2_normalize(Eigen::Vector2d(3, 4));
  EXPECT_NEAR(v(0), 0.6, 1e-15);
  EXPECT_NEAR(v(1), 0.8, 1e-15);
}

TEST(Normalize, ZeroIsError) {
  EXPECT_THROW(l2_normalize(Eigen::VectorXd::Zero(3)), DegenerateInputError);
  Eigen::MatrixXd W = Eigen::MatrixXd::Identity(3, 3);
  W.row(1).setZero();
  EXPECT_THROW(normalize_rows(W), DegenerateInputError);
  EXPECT_THROW(normalize_columns(W), DegenerateInputError);
}

TEST(Normalize, UnitNormsAndIdempotent) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const Eigen::MatrixXd W = standard_normal(7, 4, rng);
    const Eigen::MatrixXd R = normalize_rows(W);
    const Eigen::MatrixXd C = normalize_columns(W);
    EXPECT_LE((R.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_LE((C.colwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_LE((normalize_rows(R) - R).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((normalize_columns(C) - C).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Normalize, EncoderStateRowsOnEffectiveMatrix) {
  Rng rng(7);
  auto enc = make_encoder(standard_normal(3, 4, rng), Activation::kRelu);
  enc = normalize_rows(enc);
  EXPECT_LE((enc.W.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(BatchNorm, TwoPointStandardization) {
  auto bn = BatchNormState::identity(1);
  Eigen::MatrixXd H(1, 2);
  H << -1.0, 1.0;
  const Eigen::MatrixXd out = batch_norm_forward(bn, H);
  const double v = 1.0 / std::sqrt(1.0 + bn.eps);
  EXPECT_NEAR(out(0, 0), -v, 1e-15);
  EXPECT_NEAR(out(0, 1), v, 1e-15);
}

TEST(BatchNorm, AffineShift) {
  Rng rng(8);
  auto bn = BatchNormState::identity(3);
  bn.gamma.setConstant(2.0);
  bn.beta.setConstant(5.0);
  const Eigen::MatrixXd out = batch_norm_forward(bn, standard_normal(3, 64, rng));
  EXPECT_LE((out.rowwise().mean().array() - 5.0).abs().maxCoeff(), 1e-10);
}

TEST(BatchNorm, TrainModeMoments) {
  Rng rng(9);
  auto bn = BatchNormState::identity(4);
  bn.gamma << 0.5, 1.0, 2.0, 3.0;
  bn.beta.setZero();
  const Eigen::MatrixXd H = 4.0 * standard_normal(4, 100, rng).array() + 2.0;
  const Eigen::MatrixXd out = batch_norm_forward(bn, H);
  for (int i = 0; i < 4; ++i) {
    const double mean = out.row(i).mean();
    const double var = (out.row(i).array() - mean).square().mean();
    EXPECT_LE(std::abs(mean), 1e-10);
    const double raw_var = (H.row(i).array() - H.row(i).mean()).square().mean();
    EXPECT_NEAR(var, bn.gamma(i) * bn.gamma(i) * raw_var / (raw_var + bn.eps), 1e-6);
  }
}

TEST(BatchNorm, RunningStatsUpdateInTrainMode) {
  Rng rng(10);
  auto bn = BatchNormState::identity(2);
  const Eigen::MatrixXd H = standard_normal(2, 10, rng).array() + 3.0;
  batch_norm_forward(bn, H);
  const Eigen::VectorXd expected = 0.9 * Eigen::VectorXd::Zero(2) + 0.1 * H.rowwise().mean();
  EXPECT_LE((bn.running_mean - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BatchNorm, EvalModeIsPure) {
  Rng rng(11);
  auto bn = BatchNormState::identity(3);
  bn.running_mean << 1.0, -1.0, 0.5;
  bn.running_var << 2.0, 0.5, 1.0;
  bn.mode = BatchNormMode::kEval;
  const auto before = bn;
  const Eigen::MatrixXd H = standard_normal(3, 5, rng);
  const Eigen::MatrixXd a = batch_norm_forward(bn, H);
  const Eigen::MatrixXd b = batch_norm_forward(bn, H);
  EXPECT_EQ(a, b);
  EXPECT_EQ(bn.running_mean, before.running_mean);
  EXPECT_EQ(bn.running_var, before.running_var);
  // Each column depends only on itself.
  EXPECT_EQ(batch_norm_forward(bn, H.col(2)), a.col(2));
}

TEST(Branch, ForwardMatchesSingleSample) {
  Rng rng(12);
  BranchParams params{make_encoder(standard_normal(4, 5, rng), Activation::kSrelu, 0.2), {}};
  const Eigen::MatrixXd A = standard_normal(5, 6, rng);
  const auto cache = branch_forward(params, nullptr, false, A);
  for (int n = 0; n < 6; ++n) {
    EXPECT_LE((cache.y.col(n) - encoder_forward(params.enc, A.col(n))).cwiseAbs().maxCoeff(),
              1e-12);
  }
  const auto norm = branch_forward(params, nullptr, true, A, 1e-12);
  for (int n = 0; n < 6; ++n) {
    const Eigen::VectorXd h = cache.y.col(n);
    if (h.norm() > 1e-9) {
      EXPECT_LE((norm.y.col(n) - h / h.norm()).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Branch, ZeroOutputNormalizationError) {
  BranchParams params{make_encoder(Eigen::MatrixXd::Zero(2, 3), Activation::kRelu), {}};
  const Eigen::MatrixXd A = Eigen::MatrixXd::Ones(3, 2);
  EXPECT_THROW(branch_forward(params, nullptr, true, A), DegenerateInputError);
  EXPECT_NO_THROW(branch_forward(params, nullptr, true, A, 1e-12));
}

TEST(Parsing, Activation) {
  for (auto a : {Activation::kLinear, Activation::kRelu, Activation::kSrelu}) {
    EXPECT_EQ(parse_activation(to_string(a)), a);
  }
  EXPECT_THROW(parse_activation("tanh"), ParameterError);
}

}  // namespace
}  // namespace ssl_lab
