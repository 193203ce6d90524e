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

#ifndef SSL_LAB_LOSSES_HPP_
#define SSL_LAB_LOSSES_HPP_

#include <optional>
#include <string_view>

#include <Eigen/Core>

#include "ssl_lab/data.hpp"
#include "ssl_lab/encoders.hpp"

namespace ssl_lab {

enum class LossKind {
  kNclL2,             // ||h_o/|h_o| - SG(h_t/|h_t|)||^2
  kNclL2Pred,         // same with a linear predictor on the online branch
  kNclInner,          // 2 - 2 <h_o, SG(h_t)>, unnormalized
  kLinearNcl,         // 2 - 2 <W_o a1, W_t a2>
  kLinearNclWd,       // linear NCL plus (1-lambda)/2 (|W_o|^2 + |W_t|^2)
  kNclInnerPred,      // 2 - 2 <W_p h_o, SG(h_t)>
  kClInfoNce,         // InfoNCE with explicit or in-batch negatives
  kClInfiniteBatch,   // infinite-negative-batch surrogate, M = I, one-hot latents
  kNegCosineSimsiam,  // symmetric negative cosine with predictor, shared encoder
};

inline constexpr LossKind kAllLossKinds[] = {
    LossKind::kNclL2,        LossKind::kNclL2Pred,   LossKind::kNclInner,
    LossKind::kLinearNcl,    LossKind::kLinearNclWd, LossKind::kNclInnerPred,
    LossKind::kClInfoNce,    LossKind::kClInfiniteBatch, LossKind::kNegCosineSimsiam};

enum class StopGradient { kTarget, kNone };

LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind);
StopGradient parse_stop_gradient(std::string_view name);
std::string_view to_string(StopGradient sg);

struct LossSpec {
  LossKind kind = LossKind::kNclL2;
  double tau = 1.0;       // multiplies similarities inside exp (CL only)
  double lambda = 0.99;   // weight-decay factor (linear_ncl_wd only)
  int neg_batch = 1;      // negatives per anchor when supplied explicitly
  StopGradient stop_gradient = StopGradient::kTarget;  // contrastive kinds ignore it
  // Cosine instead of raw inner products for the inner-product and CL kinds.
  bool output_normalize = false;
  // > 0 clamps output norms from below; 0 makes a zero-norm output an error.
  double normalize_floor = 0.0;
  // In-batch CL: use both views of the other samples as negatives, symmetrized.
  bool ntxent = false;
  // Bernoulli keep probability, used only by the infinite-batch surrogate.
  double mask_alpha = 0.5;

  void validate() const;
};

bool is_contrastive(LossKind kind);
bool uses_shared_encoder(LossKind kind);
bool uses_predictor(LossKind kind);
bool requires_linear_activation(LossKind kind);
bool normalizes_output(const LossSpec& spec);

/// Parameters of the dual network. Shared-encoder kinds read only `online`;
/// the predictor (or CL projector) is optional depending on the kind.
struct ModelParams {
  BranchParams online;
  BranchParams target;
  std::optional<PredictorState> predictor;
};

/// Two views per sample (columns). `negatives` is either empty (in-batch
/// negatives) or holds neg_batch consecutive columns per anchor.
struct ViewBatch {
  Eigen::MatrixXd a1;
  Eigen::MatrixXd a2;
  Eigen::MatrixXd negatives;

  Eigen::Index size() const { return a1.cols(); }
};

struct LossEvaluation {
  double value = 0.0;
  Eigen::VectorXd per_sample;
};

/// Gradients of the batch-mean loss. Stop-gradient branches are absent.
struct GradientSet {
  BranchGrad online;
  std::optional<BranchGrad> target;
  std::optional<PredictorGrad> predictor;
  double loss = 0.0;
};

LossEvaluation evaluate_loss(const LossSpec& spec, const ModelParams& params,
                             const ViewBatch& views);
GradientSet empirical_gradient(const LossSpec& spec, const ModelParams& params,
                               const ViewBatch& views);

// Thin per-objective entry points over evaluate_loss.
double ncl_l2_loss(const EncoderState& online, const EncoderState& target, const ViewBatch& views);
double ncl_inner_loss(const EncoderState& online, const EncoderState& target,
                      const ViewBatch& views);
double linear_ncl_wd_loss(const EncoderState& online, const EncoderState& target,
                          const ViewBatch& views, double lambda);
double cl_infonce_loss(const EncoderState& enc, const ViewBatch& views, double tau);

// ---------------------------------------------------------------------------
// Infinite-batch CL surrogate (M = I, one-hot latents, zero bias):
//   sum_i E[-log exp(tau <h(D1 e_i), h(D2 e_i)>) / sum_j exp(tau <h(D1 e_i), h(D2' e_j)>)]
// evaluated exactly by enumerating the relevant mask bits.
// ---------------------------------------------------------------------------
double cl_infinite_batch_loss(const EncoderState& enc, double alpha, double tau);
// Returns dL/dW; writes the value to *value when non-null.
Eigen::MatrixXd cl_infinite_batch_gradient(const EncoderState& enc, double alpha, double tau,
                                           double* value = nullptr);

// ---------------------------------------------------------------------------
// Population objectives and gradients.
// ---------------------------------------------------------------------------

// Value of the weight-decayed linear objective under symmetric latents
// (E zz^T = kappa I), independent masks and isotropic noise.
double population_loss_linear(const Eigen::MatrixXd& W_online, const Eigen::MatrixXd& W_target,
                              const DictionaryMatrix& M, double alpha, double kappa,
                              double sigma0, double lambda);

// grad_{W_o} = -2 alpha^2 (kappa W_t M M^T + sigma0^2 W_t) + (1 - lambda) W_o,
// and symmetrically for W_t.
GradientSet population_gradient_linear(const Eigen::MatrixXd& W_online,
                                       const Eigen::MatrixXd& W_target, const DictionaryMatrix& M,
                                       double alpha, double kappa, double sigma0, double lambda);

// Warm-start SReLU regime (M = I, square weights). Throws PreconditionError
// naming the violated assumption when the supplied state is outside it.
GradientSet population_gradient_srelu_warm(const Eigen::MatrixXd& W_online,
                                           const Eigen::MatrixXd& W_target,
                                           const Eigen::VectorXd& bias_online,
                                           const Eigen::VectorXd& bias_target, double alpha,
                                           double kappa, double sigma0);

// Closed-form population loss in the same regime.
double population_loss_srelu_warm(const Eigen::MatrixXd& W_online, const Eigen::MatrixXd& W_target,
                                  const Eigen::VectorXd& bias_online,
                                  const Eigen::VectorXd& bias_target, double alpha, double kappa,
                                  double sigma0);

// Proportionality constant a_i = alpha^2 (kappa + sigma0^2) / ((1 + sigma0^2)(1 + D_ii) - b_i)
// for each row, where D = W - I is the warm-start error of the other branch.
Eigen::VectorXd srelu_warm_ratio(const Eigen::MatrixXd& W_other, const Eigen::VectorXd& bias_other,
                                 double alpha, double kappa, double sigma0);

// ---------------------------------------------------------------------------
// Finite differences.
// ---------------------------------------------------------------------------

inline constexpr double kFiniteDifferenceStep = 1e-6;

// Central differences of evaluate_loss w.r.t. every parameter that
// empirical_gradient reports (same layout, same stop-gradient set).
GradientSet finite_difference_gradient(const LossSpec& spec, const ModelParams& params,
                                       const ViewBatch& views,
                                       double step = kFiniteDifferenceStep);

// ||a - b|| / max(||b||, 1e-12) over the concatenation of all gradient entries.
double gradient_relative_error(const GradientSet& a, const GradientSet& b);

// Smallest distance of any activation input to a kink of its activation
// (infinity for linear encoders).
double kink_distance(const LossSpec& spec, const ModelParams& params, const ViewBatch& views);

}  // namespace ssl_lab

#endif  // SSL_LAB_LOSSES_HPP_
