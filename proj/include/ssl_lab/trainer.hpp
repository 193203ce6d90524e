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

#ifndef SSL_LAB_TRAINER_HPP_
#define SSL_LAB_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ssl_lab/data.hpp"
#include "ssl_lab/encoders.hpp"
#include "ssl_lab/losses.hpp"
#include "ssl_lab/metrics.hpp"

namespace ssl_lab {

enum class NormalizationHook { kNone, kRows, kColumns };
enum class GradientMode { kEmpirical, kPopulation };
enum class InitKind { kGaussianRandom, kWarmStart };
enum class PredictorInit { kGaussianRandom, kIdentity };

NormalizationHook parse_normalization_hook(std::string_view name);
GradientMode parse_gradient_mode(std::string_view name);
InitKind parse_init_kind(std::string_view name);
PredictorInit parse_predictor_init(std::string_view name);
std::string_view to_string(NormalizationHook h);
std::string_view to_string(GradientMode g);
std::string_view to_string(InitKind k);
std::string_view to_string(PredictorInit k);

struct TrainConfig {
  LossSpec loss;

  // Data.
  Eigen::Index p = 50;
  Eigen::Index d = 10;
  Eigen::Index m = 50;
  LatentSpec latent;
  std::optional<double> noise_sigma;  // default log d / d
  DictionaryMode dictionary = DictionaryMode::kQrGaussian;
  MaskScheme mask_scheme = MaskScheme::kIndependent;
  double mask_alpha = 0.5;
  Eigen::Index dataset_size = 1000;

  // Architecture.
  Activation activation = Activation::kSrelu;
  double srelu_bias = 1.0;
  bool batch_norm = true;
  bool train_bias = false;
  bool predictor = false;
  PredictorInit predictor_init = PredictorInit::kGaussianRandom;
  Eigen::Index hidden_width = 0;  // > 0 inserts a linear hidden layer of this width

  // Optimization.
  int epochs = 8000;
  Eigen::Index batch_size = 512;
  double learning_rate = 0.025;
  std::optional<double> weight_decay;  // multiplicative factor lambda per step
  NormalizationHook normalization_hook = NormalizationHook::kNone;
  int alternate_every = 1;
  GradientMode gradient_mode = GradientMode::kEmpirical;
  InitKind init = InitKind::kGaussianRandom;
  double warm_c = 1.0;
  std::optional<double> warm_sigma;  // overrides p^{-c/2}

  std::uint64_t seed = 0;
  int record_every = 1;
  bool wall_clock = false;  // otherwise the seconds column is written as 0

  double effective_noise_sigma() const {
    return noise_sigma ? *noise_sigma : default_noise_sigma(d);
  }
  void validate() const;
};

struct TrainRecord {
  int epoch = 0;
  double loss = 0.0;
  double min_max_cosine = 0.0;
  double median_max_cosine = 0.0;
  double max_max_cosine = 0.0;
  double seconds = 0.0;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<TrainRecord> records;
  ModelParams params;  // online slot holds branch A, target slot branch B
};

// Entries i.i.d. N(0, 1/(p d)), zero bias.
EncoderState init_random(Eigen::Index m, Eigen::Index p, Eigen::Index d, Rng& rng);
EncoderState init_random(Eigen::Index m, Eigen::Index p, Eigen::Index d, std::uint64_t seed);

// Row i is a uniformly chosen column of M plus N(0, sigma^2) noise, with
// sigma = p^{-c/2} unless overridden.
double warm_start_sigma(Eigen::Index p, double c);
EncoderState init_warm(const DictionaryMatrix& M, Eigen::Index m, double c, Rng& rng,
                       std::optional<double> sigma = std::nullopt);
EncoderState init_warm(const DictionaryMatrix& M, Eigen::Index m, double c, std::uint64_t seed,
                       std::optional<double> sigma = std::nullopt);

ModelParams initialize_model(const TrainConfig& config, const DictionaryMatrix& M, Rng& rng);

using RecordSink = std::function<void(const TrainRecord&)>;

// Runs the configured optimization on a fixed dataset. For non-contrastive
// losses the two branches exchange online/target roles every
// `alternate_every` steps; the predictor always sits on the current online
// branch. Throws DivergenceError on a non-finite loss.
TrainResult train(const TrainConfig& config, const Dataset& data, const DictionaryMatrix& M,
                  const RecordSink& sink = {});

// Generates the dictionary and dataset from the config seed, then trains.
TrainResult run_training(const TrainConfig& config, const RecordSink& sink = {});

// ---------------------------------------------------------------------------
// Alternating optimization with row normalization on the warm-start SReLU
// population objective (M = I).
// ---------------------------------------------------------------------------

struct AlternatingConfig {
  double alpha = 0.5;
  double kappa = 0.5;
  double sigma0 = 0.0;
  double eta = 5.0;
  double inner_tol = 1e-10;
  double outer_tol = 1e-8;
  int max_inner = 10'000;
  int max_outer = 1'000;
};

struct AlternatingRound {
  int inner_online = 0;
  int inner_target = 0;
  double online_change = 0.0;
  double target_change = 0.0;
  Eigen::MatrixXd online;  // states after the round
  Eigen::MatrixXd target;
  Eigen::VectorXd a_online;  // per-row ratio used while updating the online branch
  Eigen::VectorXd a_target;
};

struct AlternatingResult {
  Eigen::MatrixXd online;
  Eigen::MatrixXd target;
  std::vector<AlternatingRound> rounds;
  bool converged = false;
};

// Throws NonConvergenceError (with the final changes) when an iteration cap
// is hit, PreconditionError when the start violates the assumptions.
AlternatingResult alternating_optimize(const Eigen::MatrixXd& W_online,
                                       const Eigen::MatrixXd& W_target,
                                       const Eigen::VectorXd& bias_online,
                                       const Eigen::VectorXd& bias_target,
                                       const AlternatingConfig& config);

}  // namespace ssl_lab

#endif  // SSL_LAB_TRAINER_HPP_
