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
#include "ssl_lab/oracles.hpp"
#include "ssl_lab/trainer.hpp"

namespace ssl_lab {
namespace {

TrainConfig small_config(LossKind kind) {
  TrainConfig c;
  c.loss.kind = kind;
  c.loss.normalize_floor = 1e-12;
  c.p = 10;
  c.d = 5;
  c.m = 8;
  c.latent = LatentSpec{LatentKind::kSymmetric, 5, 0.3};
  c.dataset_size = 100;
  c.batch_size = 32;
  c.epochs = 3;
  c.learning_rate = 0.05;
  c.srelu_bias = 0.1;
  c.seed = 3;
  if (uses_predictor(kind)) c.predictor = true;
  if (requires_linear_activation(kind)) {
    c.activation = Activation::kLinear;
    c.batch_norm = false;
  }
  return c;
}

TEST(Init, RandomVarianceAndBias) {
  const auto enc = init_random(50, 50, 10, 1);
  const double mean = enc.W.mean();
  const double var = (enc.W.array() - mean).square().mean();
  EXPECT_NEAR(var, 1.0 / 500.0, 0.2 / 500.0);
  EXPECT_EQ(enc.b, Eigen::VectorXd::Zero(50));
  EXPECT_EQ(init_random(50, 50, 10, 1).W, enc.W);
  EXPECT_NE(init_random(50, 50, 10, 2).W, enc.W);
}

TEST(Init, WarmSigma) {
  EXPECT_NEAR(warm_start_sigma(50, 1.0), 0.1414, 1e-4);
  EXPECT_NEAR(warm_start_sigma(50, 2.0), 0.02, 1e-15);
}

TEST(Init, WarmNoiselessRowsAreColumns) {
  const auto M = generate_dictionary(20, 4, DictionaryMode::kQrGaussian, 5);
  const auto enc = init_warm(M, 40, 1.0, 9, 0.0);
  for (int i = 0; i < 40; ++i) {
    double best = 0.0;
    for (int j = 0; j < 4; ++j) best = std::max(best, std::abs(enc.W.row(i).dot(M.entries().col(j))));
    EXPECT_NEAR(best, 1.0, 1e-12);
  }
  const auto stats = max_cosine_stats(enc.W, M);
  EXPECT_NEAR(stats.min, 1.0, 1e-12);
  EXPECT_NEAR(stats.max, 1.0, 1e-12);
}

TEST(Init, WarmNoiseScale) {
  const auto M = generate_dictionary(50, 10, DictionaryMode::kQrGaussian, 5);
  Rng rng(4);
  const auto enc = init_warm(M, 400, 1.0, rng);
  // Residual after removing the chosen column is pure noise of scale p^{-1/2}.
  double total = 0.0;
  for (int i = 0; i < 400; ++i) {
    Eigen::Index j = 0;
    (M.entries().transpose() * enc.W.row(i).transpose()).cwiseAbs().maxCoeff(&j);
    total += (enc.W.row(i).transpose() - M.entries().col(j)).squaredNorm();
  }
  EXPECT_NEAR(total / (400.0 * 50.0), 0.02, 0.002);
}

TEST(Config, Validation) {
  TrainConfig c = small_config(LossKind::kNclL2);
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = small_config(LossKind::kNclL2Pred);
  c.predictor = false;
  EXPECT_THROW(c.validate(), ParameterError);
  c = small_config(LossKind::kLinearNcl);
  c.activation = Activation::kRelu;
  EXPECT_THROW(c.validate(), ParameterError);
  c = small_config(LossKind::kNclL2);
  c.gradient_mode = GradientMode::kPopulation;
  EXPECT_THROW(c.validate(), ParameterError);
  c = small_config(LossKind::kClInfiniteBatch);
  EXPECT_THROW(c.validate(), ParameterError);
  c = small_config(LossKind::kNclL2);
  c.latent.d = 4;
  EXPECT_THROW(c.validate(), DimensionError);
}

TEST(Train, ZeroLearningRateIsNoOp) {
  for (LossKind kind : {LossKind::kNclL2, LossKind::kClInfoNce, LossKind::kNegCosineSimsiam,
                        LossKind::kNclL2Pred}) {
    TrainConfig c = small_config(kind);
    c.learning_rate = 0.0;
    RngStreams rng(c.seed);
    const auto M = generate_dictionary(c.p, c.d, c.dictionary, rng.dictionary);
    const ModelParams init = initialize_model(c, M, rng.init);
    const auto res = run_training(c);
    EXPECT_EQ(res.params.online.enc.W, init.online.enc.W);
    if (!uses_shared_encoder(kind)) EXPECT_EQ(res.params.target.enc.W, init.target.enc.W);
    if (init.predictor) EXPECT_EQ(res.params.predictor->Wp, init.predictor->Wp);
    ASSERT_EQ(res.records.size(), 4u);
    for (const auto& r : res.records) {
      EXPECT_EQ(r.min_max_cosine, res.records.front().min_max_cosine);
      EXPECT_EQ(r.max_max_cosine, res.records.front().max_max_cosine);
    }
  }
}

TEST(Train, RowHookKeepsUnitRows) {
  for (NormalizationHook hook : {NormalizationHook::kRows, NormalizationHook::kColumns}) {
    TrainConfig c = small_config(LossKind::kNclL2);
    c.normalization_hook = hook;
    const auto res = run_training(c);
    for (const auto* b : {&res.params.online, &res.params.target}) {
      const Eigen::VectorXd norms = hook == NormalizationHook::kRows
                                        ? Eigen::VectorXd(b->enc.W.rowwise().norm())
                                        : Eigen::VectorXd(b->enc.W.colwise().norm().transpose());
      EXPECT_LE((norms.array() - 1.0).abs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Train, RecordsAreWellFormed) {
  for (LossKind kind : {LossKind::kNclL2, LossKind::kNclL2Pred, LossKind::kNclInner,
                        LossKind::kLinearNcl, LossKind::kLinearNclWd, LossKind::kNclInnerPred,
                        LossKind::kClInfoNce, LossKind::kNegCosineSimsiam}) {
    TrainConfig c = small_config(kind);
    if (kind == LossKind::kLinearNcl || kind == LossKind::kLinearNclWd ||
        kind == LossKind::kNclInner || kind == LossKind::kNclInnerPred) {
      c.learning_rate = 0.005;
    }
    std::vector<TrainRecord> seen;
    const auto res = run_training(c, [&](const TrainRecord& r) { seen.push_back(r); });
    ASSERT_EQ(seen.size(), res.records.size()) << to_string(kind);
    for (std::size_t i = 0; i < seen.size(); ++i) {
      const auto& r = seen[i];
      EXPECT_EQ(r.epoch, static_cast<int>(i));
      EXPECT_TRUE(std::isfinite(r.loss));
      EXPECT_LE(0.0, r.min_max_cosine);
      EXPECT_LE(r.min_max_cosine, r.median_max_cosine);
      EXPECT_LE(r.median_max_cosine, r.max_max_cosine);
      EXPECT_LE(r.max_max_cosine, 1.0 + 1e-12);
      EXPECT_EQ(r.seconds, 0.0);
      EXPECT_EQ(r.seed, c.seed);
    }
  }
}

TEST(Train, RecordEvery) {
  TrainConfig c = small_config(LossKind::kClInfoNce);
  c.epochs = 7;
  c.record_every = 3;
  const auto res = run_training(c);
  std::vector<int> epochs;
  for (const auto& r : res.records) epochs.push_back(r.epoch);
  EXPECT_EQ(epochs, (std::vector<int>{0, 3, 6, 7}));
}

TEST(Train, Deterministic) {
  TrainConfig c = small_config(LossKind::kNclL2);
  c.batch_norm = true;
  const auto a = run_training(c);
  const auto b = run_training(c);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].loss, b.records[i].loss);
    EXPECT_EQ(a.records[i].min_max_cosine, b.records[i].min_max_cosine);
  }
  EXPECT_EQ(a.params.online.enc.W, b.params.online.enc.W);
  c.seed = 4;
  EXPECT_NE(run_training(c).params.online.enc.W, a.params.online.enc.W);
}

TEST(Train, DivergenceGuard) {
  TrainConfig c = small_config(LossKind::kNclInner);
  c.activation = Activation::kLinear;
  c.batch_norm = false;
  c.learning_rate = 1e6;
  c.epochs = 500;
  std::vector<TrainRecord> seen;
  EXPECT_THROW(run_training(c, [&](const TrainRecord& r) { seen.push_back(r); }),
               DivergenceError);
  for (const auto& r : seen) EXPECT_TRUE(std::isfinite(r.loss));
}

TEST(Train, RejectsMismatchedDictionary) {
  const TrainConfig c = small_config(LossKind::kNclL2);
  const auto M = generate_dictionary(12, 5, DictionaryMode::kQrGaussian, 0);
  EXPECT_THROW(train(c, Dataset{}, M), DimensionError);
}

TEST(Train, PopulationLinearMatchesClosedForm) {
  TrainConfig c;
  c.loss.kind = LossKind::kLinearNclWd;
  c.loss.lambda = 0.99;
  c.loss.stop_gradient = StopGradient::kNone;
  c.p = c.d = c.m = 8;
  c.latent = LatentSpec{LatentKind::kSymmetric, 8, 0.2};
  c.noise_sigma = 0.0;
  c.mask_alpha = 0.5;
  c.activation = Activation::kLinear;
  c.batch_norm = false;
  c.gradient_mode = GradientMode::kPopulation;
  c.learning_rate = 1e-3;
  c.epochs = 200;
  c.seed = 12;
  RngStreams rng(c.seed);
  const auto M = generate_dictionary(c.p, c.d, c.dictionary, rng.dictionary);
  const ModelParams init = initialize_model(c, M, rng.init);
  const auto res = run_training(c);
  const auto pred = closed_form_linear_dynamics(init.online.enc.W, init.target.enc.W, M, 0.99,
                                                {1e-3}, 0.5, 0.2, 0.0, 200);
  const Eigen::MatrixXd got = res.params.online.enc.W * M.entries();
  EXPECT_LE((got - pred.back().online_M).cwiseAbs().maxCoeff(), 1e-8);
  const Eigen::MatrixXd got_t = res.params.target.enc.W * M.entries();
  EXPECT_LE((got_t - pred.back().target_M).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Train, PopulationLinearBranchSwapSymmetry) {
  Rng rng(13);
  const auto M = generate_dictionary(6, 4, DictionaryMode::kQrGaussian, 2);
  Eigen::MatrixXd a = standard_normal(5, 6, rng), b = standard_normal(5, 6, rng);
  Eigen::MatrixXd x = b, y = a;
  for (int t = 0; t < 100; ++t) {
    const auto g1 = population_gradient_linear(a, b, M, 0.5, 0.3, 0.1, 0.98);
    const auto g2 = population_gradient_linear(x, y, M, 0.5, 0.3, 0.1, 0.98);
    EXPECT_NEAR(g1.loss, g2.loss, 1e-12);
    a -= 0.01 * g1.online.W;
    b -= 0.01 * g1.target->W;
    x -= 0.01 * g2.online.W;
    y -= 0.01 * g2.target->W;
  }
  EXPECT_LE((a - y).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((b - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Train, PopulationSreluChecksAssumptions) {
  // Warm rows are random dictionary columns, so W is far from I and the
  // population gradient refuses to run.
  TrainConfig c;
  c.loss.kind = LossKind::kNclInner;
  c.p = c.d = c.m = 5;
  c.dictionary = DictionaryMode::kIdentity;
  c.latent = LatentSpec{LatentKind::kSymmetric, 5, 0.5};
  c.noise_sigma = 0.0;
  c.activation = Activation::kSrelu;
  c.srelu_bias = 0.5;
  c.batch_norm = false;
  c.gradient_mode = GradientMode::kPopulation;
  c.init = InitKind::kWarmStart;
  c.warm_sigma = 0.0;
  c.learning_rate = 1.0;
  c.epochs = 2;
  c.seed = 1;
  EXPECT_THROW(run_training(c), PreconditionError);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> warm_pair(int d, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd Wo = Eigen::MatrixXd::Identity(d, d), Wt = Wo;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      Wo(i, j) += 0.9 * u(rng) / (10.0 * d);
      Wt(i, j) += 0.9 * u(rng) / (10.0 * d);
    }
  }
  return {Wo, Wt};
}

TEST(Alternating, ConvergesToIdentity) {
  const int d = 5;
  const auto [Wo, Wt] = warm_pair(d, 1);
  const Eigen::VectorXd b = Eigen::VectorXd::Constant(d, 0.5);
  const auto res = alternating_optimize(Wo, Wt, b, b, AlternatingConfig{});
  EXPECT_TRUE(res.converged);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  EXPECT_LE((res.online - I).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_LE((res.target - I).cwiseAbs().maxCoeff(), 1e-4);
  for (const auto& r : res.rounds) {
    EXPECT_LE((r.online.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
  }
}

TEST(Alternating, IdentityIsFixedPoint) {
  const int d = 4;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  const Eigen::VectorXd b = Eigen::VectorXd::Constant(d, 0.5);
  const auto res = alternating_optimize(I, I, b, b, AlternatingConfig{});
  ASSERT_TRUE(res.converged);
  ASSERT_EQ(res.rounds.size(), 1u);
  EXPECT_LE(res.rounds[0].online_change, 1e-15);
  EXPECT_LE(res.rounds[0].target_change, 1e-15);
  EXPECT_LE((res.online - I).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Alternating, ReportsNonConvergence) {
  const auto [Wo, Wt] = warm_pair(5, 2);
  const Eigen::VectorXd b = Eigen::VectorXd::Constant(5, 0.5);
  AlternatingConfig cfg;
  cfg.max_outer = 1;
  EXPECT_THROW(alternating_optimize(Wo, Wt, b, b, cfg), NonConvergenceError);
  cfg = AlternatingConfig{};
  cfg.max_inner = 1;
  EXPECT_THROW(alternating_optimize(Wo, Wt, b, b, cfg), NonConvergenceError);
}

TEST(Alternating, RejectsBadStart) {
  const int d = 4;
  Eigen::MatrixXd W = Eigen::MatrixXd::Identity(d, d);
  W(1, 2) = 1.0 / (5.0 * d);
  const Eigen::VectorXd b = Eigen::VectorXd::Constant(d, 0.5);
  EXPECT_THROW(alternating_optimize(W, Eigen::MatrixXd::Identity(d, d), b, b, AlternatingConfig{}),
               PreconditionError);
}

TEST(Parsing, TrainerEnums) {
  for (auto h : {NormalizationHook::kNone, NormalizationHook::kRows, NormalizationHook::kColumns}) {
    EXPECT_EQ(parse_normalization_hook(to_string(h)), h);
  }
  for (auto g : {GradientMode::kEmpirical, GradientMode::kPopulation}) {
    EXPECT_EQ(parse_gradient_mode(to_string(g)), g);
  }
  for (auto k : {InitKind::kGaussianRandom, InitKind::kWarmStart}) {
    EXPECT_EQ(parse_init_kind(to_string(k)), k);
  }
  for (auto k : {PredictorInit::kGaussianRandom, PredictorInit::kIdentity}) {
    EXPECT_EQ(parse_predictor_init(to_string(k)), k);
  }
  EXPECT_THROW(parse_init_kind("zeros"), ParameterError);
}

}  // namespace
}  // namespace ssl_lab
