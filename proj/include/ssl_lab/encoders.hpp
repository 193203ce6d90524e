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

#ifndef SSL_LAB_ENCODERS_HPP_
#define SSL_LAB_ENCODERS_HPP_

#include <optional>
#include <string_view>

#include <Eigen/Core>

#include "ssl_lab/errors.hpp"

namespace ssl_lab {

enum class Activation { kLinear, kRelu, kSrelu };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation act);

// Rows, columns or vectors whose norm is below this are treated as zero.
inline constexpr double kZeroNormThreshold = 1e-30;

/// One branch encoder a -> phi(W a + b), optionally preceded by a hidden
/// linear layer (a -> W_in a) for the stacked two-layer variant.
struct EncoderState {
  Eigen::MatrixXd W;  // m x k, k = p (or hidden width when W_in is set)
  Eigen::VectorXd b;  // m
  Activation activation = Activation::kLinear;
  Eigen::VectorXd srelu_bias;  // m, nonnegative; used only by kSrelu
  std::optional<Eigen::MatrixXd> W_in;  // k x p

  Eigen::Index out_dim() const { return W.rows(); }
  Eigen::Index in_dim() const { return W_in ? W_in->cols() : W.cols(); }

  // Rows of the end-to-end linear map (W W_in or W); these are compared
  // against dictionary columns by the metrics.
  Eigen::MatrixXd effective_weights() const { return W_in ? Eigen::MatrixXd(W * *W_in) : W; }

  void validate() const;
};

EncoderState make_encoder(Eigen::MatrixXd W, Activation act, double srelu_bias = 0.0);

struct PredictorState {
  Eigen::MatrixXd Wp;  // m x m
  Eigen::VectorXd bp;  // m

  void validate(Eigen::Index m) const;
};

enum class BatchNormMode { kTrain, kEval };

struct BatchNormState {
  static constexpr double kDefaultEps = 1e-5;
  static constexpr double kDefaultMomentum = 0.1;

  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  double eps = kDefaultEps;
  double momentum = kDefaultMomentum;
  BatchNormMode mode = BatchNormMode::kTrain;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;

  static BatchNormState identity(Eigen::Index m);
  void validate() const;
};

/// Symmetric ReLU: x - b above b, x + b below -b, zero in between.
template <typename DerivedX, typename DerivedB>
Eigen::VectorXd srelu(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedB>& b) {
  if (x.size() != b.size()) throw DimensionError("srelu: bias length mismatch");
  if ((b.array() < 0.0).any()) throw ParameterError("srelu: bias must be nonnegative");
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i), t = b(i);
    out(i) = v > t ? v - t : (v < -t ? v + t : 0.0);
  }
  return out;
}

Eigen::VectorXd encoder_forward(const EncoderState& enc, const Eigen::VectorXd& a);
Eigen::VectorXd predictor_forward(const PredictorState& pred, const Eigen::VectorXd& h);

EncoderState normalize_rows(EncoderState enc);
EncoderState normalize_columns(EncoderState enc);
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& W);
Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& W);
Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v);

// Train mode standardizes with batch statistics (biased variance) and
// updates the running statistics; eval mode uses the running statistics and
// leaves the state untouched. Columns of H are samples.
Eigen::MatrixXd batch_norm_forward(BatchNormState& bn, const Eigen::MatrixXd& H);

// ---------------------------------------------------------------------------
// Batched branch evaluation with hand-written reverse mode.
// ---------------------------------------------------------------------------

struct BranchParams {
  EncoderState enc;
  std::optional<BatchNormState> bn;
};

struct BranchGrad {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  Eigen::MatrixXd W_in;  // empty unless the encoder has a hidden layer
  Eigen::VectorXd gamma;  // empty unless batch norm is present
  Eigen::VectorXd beta;

  static BranchGrad zeros_like(const BranchParams& params);
  double squared_norm() const;
};

struct PredictorGrad {
  Eigen::MatrixXd Wp;
  Eigen::VectorXd bp;

  static PredictorGrad zeros_like(const PredictorState& pred);
};

// Intermediate values of one forward pass over a batch (columns are samples).
struct BranchCache {
  Eigen::MatrixXd input;   // p x N
  Eigen::MatrixXd hidden;  // k x N (W_in * input, or input)
  Eigen::MatrixXd pre;     // m x N, W hidden + b
  Eigen::MatrixXd xhat;    // m x N, standardized pre (batch norm only)
  Eigen::VectorXd inv_std;
  Eigen::MatrixXd act_in;  // m x N, argument of the activation
  Eigen::MatrixXd h;       // m x N, activation output
  Eigen::MatrixXd g;       // m x N, predictor output (or h)
  Eigen::MatrixXd y;       // m x N, final output (g, optionally L2-normalized)
  Eigen::VectorXd g_norm;  // per-sample norms when normalized
  bool used_predictor = false;
  bool normalized = false;
  bool batch_stats = false;
};

// `pred` may be null. Batch norm in train mode uses batch statistics without
// touching the running statistics.
// With norm_floor > 0 output norms are clamped from below instead of a zero
// norm raising DegenerateInputError.
BranchCache branch_forward(const BranchParams& params, const PredictorState* pred,
                           bool normalize_output, const Eigen::MatrixXd& A,
                           double norm_floor = 0.0);

// Accumulates parameter gradients given dL/dy (and optionally an extra
// dL/dh term for losses that also read the pre-predictor representation).
void branch_backward(const BranchParams& params, const PredictorState* pred,
                     const BranchCache& cache, const Eigen::MatrixXd& dy,
                     const Eigen::MatrixXd* dh_extra, BranchGrad& grad, PredictorGrad* pred_grad);

// Gradient of y = g / ||g|| per column.
Eigen::MatrixXd normalize_backward(const Eigen::MatrixXd& y, const Eigen::VectorXd& g_norm,
                                   const Eigen::MatrixXd& dy);

}  // namespace ssl_lab

#endif  // SSL_LAB_ENCODERS_HPP_
