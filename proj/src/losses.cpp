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


#include "ssl_lab/losses.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "ssl_lab/errors.hpp"
#include "ssl_lab/oracles.hpp"

namespace ssl_lab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

LossKind parse_loss_kind(std::string_view name) {
  for (LossKind k : kAllLossKinds) {
    if (to_string(k) == name) return k;
  }
  throw ParameterError("unknown loss kind '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kNclL2: return "ncl_l2";
    case LossKind::kNclL2Pred: return "ncl_l2_pred";
    case LossKind::kNclInner: return "ncl_inner";
    case LossKind::kLinearNcl: return "linear_ncl";
    case LossKind::kLinearNclWd: return "linear_ncl_wd";
    case LossKind::kNclInnerPred: return "ncl_inner_pred";
    case LossKind::kClInfoNce: return "cl_infonce";
    case LossKind::kClInfiniteBatch: return "cl_infinite_batch";
    case LossKind::kNegCosineSimsiam: return "neg_cosine_simsiam";
  }
  return "?";
}

StopGradient parse_stop_gradient(std::string_view name) {
  if (name == "target") return StopGradient::kTarget;
  if (name == "none") return StopGradient::kNone;
  throw ParameterError("unknown stop-gradient mode '" + std::string(name) + "'");
}

std::string_view to_string(StopGradient sg) {
  return sg == StopGradient::kTarget ? "target" : "none";
}

void LossSpec::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("tau must be positive");
  if (kind == LossKind::kLinearNclWd && !(lambda > 0.0 && lambda <= 1.0)) {
    throw ParameterError("lambda must lie in (0, 1]");
  }
  if (neg_batch < 1) throw ParameterError("neg_batch must be at least 1");
  if (!(normalize_floor >= 0.0) || !std::isfinite(normalize_floor)) {
    throw ParameterError("normalize_floor must be nonnegative");
  }
  if (kind == LossKind::kClInfiniteBatch && !(mask_alpha > 0.0 && mask_alpha <= 1.0)) {
    throw ParameterError("mask_alpha must lie in (0, 1]");
  }
}

bool is_contrastive(LossKind kind) {
  return kind == LossKind::kClInfoNce || kind == LossKind::kClInfiniteBatch;
}

bool uses_shared_encoder(LossKind kind) {
  return is_contrastive(kind) || kind == LossKind::kNegCosineSimsiam;
}

bool uses_predictor(LossKind kind) {
  return kind == LossKind::kNclL2Pred || kind == LossKind::kNclInnerPred ||
         kind == LossKind::kNegCosineSimsiam;
}

bool requires_linear_activation(LossKind kind) {
  return kind == LossKind::kLinearNcl || kind == LossKind::kLinearNclWd;
}

bool normalizes_output(const LossSpec& spec) {
  switch (spec.kind) {
    case LossKind::kNclL2:
    case LossKind::kNclL2Pred:
    case LossKind::kNegCosineSimsiam: return true;
    case LossKind::kLinearNcl:
    case LossKind::kLinearNclWd:
    case LossKind::kClInfiniteBatch: return false;
    default: return spec.output_normalize;
  }
}

namespace {

struct Outcome {
  LossEvaluation eval;
  GradientSet grad;
};

double log_sum_exp(const Eigen::Ref<const VectorXd>& v) {
  const double mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().sum());
}

// Overwrites v with softmax(v); returns the log-sum-exp of the input.
template <class Col>
double softmax_column(Col&& v) {
  const double mx = v.maxCoeff();
  v.array() = (v.array() - mx).exp();
  const double sum = v.sum();
  v /= sum;
  return mx + std::log(sum);
}

void check_params(const LossSpec& spec, const ModelParams& params, const ViewBatch& views) {
  spec.validate();
  params.online.enc.validate();
  if (params.online.bn) params.online.bn->validate();
  if (!uses_shared_encoder(spec.kind)) {
    params.target.enc.validate();
    if (params.target.bn) params.target.bn->validate();
    if (params.target.enc.out_dim() != params.online.enc.out_dim()) {
      throw DimensionError("online and target output widths differ");
    }
  }
  if (uses_predictor(spec.kind) && !params.predictor) {
    throw ParameterError(std::string(to_string(spec.kind)) + " needs a predictor");
  }
  if (params.predictor) params.predictor->validate(params.online.enc.out_dim());
  if (requires_linear_activation(spec.kind) &&
      (params.online.enc.activation != Activation::kLinear ||
       params.target.enc.activation != Activation::kLinear)) {
    throw ParameterError(std::string(to_string(spec.kind)) + " needs linear encoders");
  }
  if (spec.kind == LossKind::kClInfiniteBatch) return;
  if (views.a1.cols() == 0) throw DimensionError("empty view batch");
  if (views.a1.rows() != views.a2.rows() || views.a1.cols() != views.a2.cols()) {
    throw DimensionError("view batches differ in shape");
  }
  if (views.negatives.size() > 0) {
    if (spec.kind != LossKind::kClInfoNce) {
      throw ParameterError("explicit negatives are only used by cl_infonce");
    }
    if (views.negatives.rows() != views.a1.rows() ||
        views.negatives.cols() != views.a1.cols() * spec.neg_batch) {
      throw DimensionError("negatives must hold neg_batch columns per anchor");
    }
  }
}

Outcome dual_ncl(const LossSpec& spec, const ModelParams& params, const ViewBatch& views,
                 bool want_grad) {
  const bool norm = normalizes_output(spec);
  const bool pred_online = spec.kind == LossKind::kNclL2Pred || spec.kind == LossKind::kNclInnerPred;
  const PredictorState* pred = pred_online ? &*params.predictor : nullptr;
  const bool l2 = spec.kind == LossKind::kNclL2 || spec.kind == LossKind::kNclL2Pred;
  const bool through_target = spec.stop_gradient == StopGradient::kNone;

  const BranchCache co = branch_forward(params.online, pred, norm, views.a1, spec.normalize_floor);
  const BranchCache ct = branch_forward(params.target, nullptr, norm, views.a2, spec.normalize_floor);
  const double n = static_cast<double>(views.size());

  Outcome out;
  if (l2) {
    out.eval.per_sample = (co.y - ct.y).colwise().squaredNorm().transpose();
  } else {
    out.eval.per_sample = (2.0 - 2.0 * (co.y.array() * ct.y.array()).colwise().sum()).transpose();
  }
  double reg = 0.0;
  if (spec.kind == LossKind::kLinearNclWd) {
    reg = 0.5 * (1.0 - spec.lambda) *
          (params.online.enc.W.squaredNorm() + params.target.enc.W.squaredNorm());
    out.eval.per_sample.array() += reg;
  }
  out.eval.value = out.eval.per_sample.mean();
  if (!want_grad) return out;

  GradientSet& g = out.grad;
  g.loss = out.eval.value;
  g.online = BranchGrad::zeros_like(params.online);
  if (pred) g.predictor = PredictorGrad::zeros_like(*pred);
  const MatrixXd dyo = l2 ? MatrixXd(2.0 / n * (co.y - ct.y)) : MatrixXd(-2.0 / n * ct.y);
  branch_backward(params.online, pred, co, dyo, nullptr, g.online,
                  g.predictor ? &*g.predictor : nullptr);
  if (spec.kind == LossKind::kLinearNclWd) g.online.W += (1.0 - spec.lambda) * params.online.enc.W;
  if (through_target) {
    g.target = BranchGrad::zeros_like(params.target);
    const MatrixXd dyt = l2 ? MatrixXd(-2.0 / n * (co.y - ct.y)) : MatrixXd(-2.0 / n * co.y);
    branch_backward(params.target, nullptr, ct, dyt, nullptr, *g.target, nullptr);
    if (spec.kind == LossKind::kLinearNclWd) {
      g.target->W += (1.0 - spec.lambda) * params.target.enc.W;
    }
  }
  return out;
}

MatrixXd unit_columns(const MatrixXd& H, VectorXd& norms, double floor) {
  norms = H.colwise().norm().transpose();
  if (floor > 0.0) norms = norms.cwiseMax(floor);
  for (Eigen::Index k = 0; k < norms.size(); ++k) {
    if (!(norms(k) > kZeroNormThreshold)) {
      throw DegenerateInputError("representation of sample " + std::to_string(k) +
                                 " has zero norm; cannot normalize");
    }
  }
  return H.array().rowwise() / norms.transpose().array();
}

struct SimsiamTargets {
  MatrixXd z1, z2;
};

// Normalized encoder outputs of both views, the stop-gradient targets.
SimsiamTargets simsiam_targets(const LossSpec& spec, const ModelParams& params,
                               const ViewBatch& views) {
  VectorXd n1, n2;
  const BranchCache c1 = branch_forward(params.online, nullptr, false, views.a1);
  const BranchCache c2 = branch_forward(params.online, nullptr, false, views.a2);
  return {unit_columns(c1.h, n1, spec.normalize_floor), unit_columns(c2.h, n2, spec.normalize_floor)};
}

Outcome simsiam(const LossSpec& spec, const ModelParams& params, const ViewBatch& views,
                bool want_grad, const SimsiamTargets* frozen = nullptr) {
  const PredictorState* pred = &*params.predictor;
  const double fl = spec.normalize_floor;
  const BranchCache c1 = branch_forward(params.online, pred, true, views.a1, fl);
  const BranchCache c2 = branch_forward(params.online, pred, true, views.a2, fl);
  VectorXd n1, n2;
  const MatrixXd z1 = frozen ? frozen->z1 : unit_columns(c1.h, n1, fl);
  const MatrixXd z2 = frozen ? frozen->z2 : unit_columns(c2.h, n2, fl);
  const double n = static_cast<double>(views.size());

  Outcome out;
  out.eval.per_sample = (-0.5 * ((c1.y.array() * z2.array()).colwise().sum() +
                                 (c2.y.array() * z1.array()).colwise().sum()))
                            .transpose();
  out.eval.value = out.eval.per_sample.mean();
  if (!want_grad) return out;

  GradientSet& g = out.grad;
  g.loss = out.eval.value;
  g.online = BranchGrad::zeros_like(params.online);
  g.predictor = PredictorGrad::zeros_like(*pred);
  const MatrixXd dp1 = -0.5 / n * z2;
  const MatrixXd dp2 = -0.5 / n * z1;
  if (spec.stop_gradient == StopGradient::kNone) {
    const MatrixXd dh1 = normalize_backward(z1, n1, -0.5 / n * c2.y);
    const MatrixXd dh2 = normalize_backward(z2, n2, -0.5 / n * c1.y);
    branch_backward(params.online, pred, c1, dp1, &dh1, g.online, &*g.predictor);
    branch_backward(params.online, pred, c2, dp2, &dh2, g.online, &*g.predictor);
  } else {
    branch_backward(params.online, pred, c1, dp1, nullptr, g.online, &*g.predictor);
    branch_backward(params.online, pred, c2, dp2, nullptr, g.online, &*g.predictor);
  }
  return out;
}

Outcome infonce(const LossSpec& spec, const ModelParams& params, const ViewBatch& views,
                bool want_grad) {
  const bool norm = normalizes_output(spec);
  const PredictorState* pred = params.predictor ? &*params.predictor : nullptr;
  const double tau = spec.tau;
  const Eigen::Index N = views.size();
  const double n = static_cast<double>(N);

  const BranchCache c1 = branch_forward(params.online, pred, norm, views.a1, spec.normalize_floor);
  const BranchCache c2 = branch_forward(params.online, pred, norm, views.a2, spec.normalize_floor);
  const MatrixXd& Y1 = c1.y;
  const MatrixXd& Y2 = c2.y;

  Outcome out;
  out.eval.per_sample.resize(N);
  MatrixXd dY1, dY2, dYn;
  std::optional<BranchCache> cn;

  if (views.negatives.size() > 0) {
    const int B = spec.neg_batch;
    cn = branch_forward(params.online, pred, norm, views.negatives, spec.normalize_floor);
    const MatrixXd& Yn = cn->y;
    if (want_grad) {
      dY1 = MatrixXd::Zero(Y1.rows(), N);
      dY2 = MatrixXd::Zero(Y2.rows(), N);
      dYn = MatrixXd::Zero(Yn.rows(), Yn.cols());
    }
    VectorXd logits(B + 1);
    for (Eigen::Index k = 0; k < N; ++k) {
      logits(0) = tau * Y1.col(k).dot(Y2.col(k));
      for (int b = 0; b < B; ++b) logits(b + 1) = tau * Y1.col(k).dot(Yn.col(k * B + b));
      const double lse = log_sum_exp(logits);
      out.eval.per_sample(k) = lse - logits(0);
      if (!want_grad) continue;
      VectorXd dl = (logits.array() - lse).exp();
      dl(0) -= 1.0;
      dl /= n;
      dY1.col(k) += tau * dl(0) * Y2.col(k);
      dY2.col(k) += tau * dl(0) * Y1.col(k);
      for (int b = 0; b < B; ++b) {
        dY1.col(k) += tau * dl(b + 1) * Yn.col(k * B + b);
        dYn.col(k * B + b) += tau * dl(b + 1) * Y1.col(k);
      }
    }
  } else if (!spec.ntxent) {
    if (N < 2) throw ParameterError("in-batch negatives need a batch of at least 2");
    // Column k holds the logits of anchor k, then their softmax.
    MatrixXd P = tau * (Y2.transpose() * Y1);
    for (Eigen::Index k = 0; k < N; ++k) {
      const double pos = P(k, k);
      out.eval.per_sample(k) = softmax_column(P.col(k)) - pos;
    }
    if (want_grad) {
      P.diagonal().array() -= 1.0;
      P /= n;
      dY1.noalias() = tau * Y2 * P;
      dY2.noalias() = tau * Y1 * P.transpose();
    }
  } else {
    if (N < 2) throw ParameterError("in-batch negatives need a batch of at least 2");
    MatrixXd Z(Y1.rows(), 2 * N);
    Z << Y1, Y2;
    MatrixXd P = tau * (Z.transpose() * Z);
    VectorXd anchor_loss(2 * N);
    for (Eigen::Index k = 0; k < 2 * N; ++k) {
      const Eigen::Index pos = (k + N) % (2 * N);
      const double s_pos = P(pos, k);
      P(k, k) = -std::numeric_limits<double>::infinity();
      anchor_loss(k) = softmax_column(P.col(k)) - s_pos;
      P(pos, k) -= 1.0;
    }
    out.eval.per_sample = 0.5 * (anchor_loss.head(N) + anchor_loss.tail(N));
    if (want_grad) {
      P /= 2.0 * n;
      const MatrixXd sym = P + P.transpose();
      const MatrixXd dZ = tau * Z * sym;
      dY1 = dZ.leftCols(N);
      dY2 = dZ.rightCols(N);
    }
  }
  out.eval.value = out.eval.per_sample.mean();
  if (!want_grad) return out;

  GradientSet& g = out.grad;
  g.loss = out.eval.value;
  g.online = BranchGrad::zeros_like(params.online);
  if (pred) g.predictor = PredictorGrad::zeros_like(*pred);
  PredictorGrad* pg = g.predictor ? &*g.predictor : nullptr;
  branch_backward(params.online, pred, c1, dY1, nullptr, g.online, pg);
  branch_backward(params.online, pred, c2, dY2, nullptr, g.online, pg);
  if (cn) branch_backward(params.online, pred, *cn, dYn, nullptr, g.online, pg);
  return out;
}

Outcome infinite_batch(const LossSpec& spec, const ModelParams& params, bool want_grad) {
  Outcome out;
  double value = 0.0;
  if (want_grad) {
    out.grad.online = BranchGrad::zeros_like(params.online);
    out.grad.online.W =
        cl_infinite_batch_gradient(params.online.enc, spec.mask_alpha, spec.tau, &value);
    out.grad.loss = value;
  } else {
    value = cl_infinite_batch_loss(params.online.enc, spec.mask_alpha, spec.tau);
  }
  out.eval.value = value;
  out.eval.per_sample = VectorXd::Constant(1, value);
  return out;
}

Outcome run(const LossSpec& spec, const ModelParams& params, const ViewBatch& views,
            bool want_grad) {
  check_params(spec, params, views);
  switch (spec.kind) {
    case LossKind::kNegCosineSimsiam: return simsiam(spec, params, views, want_grad);
    case LossKind::kClInfoNce: return infonce(spec, params, views, want_grad);
    case LossKind::kClInfiniteBatch: return infinite_batch(spec, params, want_grad);
    default: return dual_ncl(spec, params, views, want_grad);
  }
}

}  // namespace

LossEvaluation evaluate_loss(const LossSpec& spec, const ModelParams& params,
                             const ViewBatch& views) {
  return run(spec, params, views, false).eval;
}

GradientSet empirical_gradient(const LossSpec& spec, const ModelParams& params,
                               const ViewBatch& views) {
  return run(spec, params, views, true).grad;
}

namespace {

ModelParams dual_params(const EncoderState& online, const EncoderState& target) {
  ModelParams p;
  p.online.enc = online;
  p.target.enc = target;
  return p;
}

}  // namespace

double ncl_l2_loss(const EncoderState& online, const EncoderState& target, const ViewBatch& views) {
  return evaluate_loss(LossSpec{.kind = LossKind::kNclL2}, dual_params(online, target), views).value;
}

double ncl_inner_loss(const EncoderState& online, const EncoderState& target,
                      const ViewBatch& views) {
  return evaluate_loss(LossSpec{.kind = LossKind::kNclInner}, dual_params(online, target), views)
      .value;
}

double linear_ncl_wd_loss(const EncoderState& online, const EncoderState& target,
                          const ViewBatch& views, double lambda) {
  LossSpec spec{.kind = LossKind::kLinearNclWd, .lambda = lambda};
  return evaluate_loss(spec, dual_params(online, target), views).value;
}

double cl_infonce_loss(const EncoderState& enc, const ViewBatch& views, double tau) {
  LossSpec spec{.kind = LossKind::kClInfoNce, .tau = tau};
  if (views.negatives.size() > 0 && views.size() > 0) {
    spec.neg_batch = static_cast<int>(views.negatives.cols() / views.size());
  }
  return evaluate_loss(spec, dual_params(enc, enc), views).value;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxInfiniteBatchDim = 20;

// R = phi(W) column by column, plus the slope mask.
void infinite_batch_features(const EncoderState& enc, MatrixXd& R, MatrixXd& slope) {
  enc.validate();
  if (enc.W_in) throw ParameterError("cl_infinite_batch does not support a hidden layer");
  if (enc.b.cwiseAbs().maxCoeff() > 0.0) {
    throw ParameterError("cl_infinite_batch assumes a zero encoder bias");
  }
  const Eigen::Index m = enc.W.rows(), d = enc.W.cols();
  if (d > kMaxInfiniteBatchDim) {
    throw EnumerationTooLargeError("cl_infinite_batch: d too large to enumerate masks");
  }
  R.resize(m, d);
  slope.resize(m, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double v = enc.W(i, j);
      switch (enc.activation) {
        case Activation::kLinear: R(i, j) = v; slope(i, j) = 1.0; break;
        case Activation::kRelu:
          R(i, j) = v > 0.0 ? v : 0.0;
          slope(i, j) = v > 0.0 ? 1.0 : 0.0;
          break;
        case Activation::kSrelu: {
          const double t = enc.srelu_bias(i);
          R(i, j) = v > t ? v - t : (v < -t ? v + t : 0.0);
          slope(i, j) = (v > t || v < -t) ? 1.0 : 0.0;
          break;
        }
      }
    }
  }
}

double infinite_batch_impl(const EncoderState& enc, double alpha, double tau, MatrixXd* dW) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  MatrixXd R, slope;
  infinite_batch_features(enc, R, slope);
  const int d = static_cast<int>(R.cols());
  const MatrixXd G = R.transpose() * R;
  MatrixXd dG = MatrixXd::Zero(d, d);
  double total = 0.0;
  const double log_d = std::log(static_cast<double>(d));
  VectorXd logits(d), s(d);
  const std::uint64_t count = std::uint64_t{1} << d;
  for (int i = 0; i < d; ++i) {
    // D1_ii = 0: the anchor is the zero vector and every logit vanishes.
    double row = (1.0 - alpha) * log_d;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
      int ones = 0;
      for (int j = 0; j < d; ++j) ones += static_cast<int>((mask >> j) & 1u);
      const double w = alpha * std::pow(alpha, ones) * std::pow(1.0 - alpha, d - ones);
      if (w == 0.0) continue;
      for (int j = 0; j < d; ++j) logits(j) = ((mask >> j) & 1u) ? tau * G(i, j) : 0.0;
      const double lse = log_sum_exp(logits);
      const bool pos = (mask >> i) & 1u;
      row += w * (lse - logits(i));
      if (dW) {
        s = (logits.array() - lse).exp();
        for (int j = 0; j < d; ++j) {
          if (!((mask >> j) & 1u)) continue;
          dG(i, j) += w * tau * s(j);
        }
        if (pos) dG(i, i) -= w * tau;
      }
    }
    total += row;
  }
  if (dW) {
    // dL/dR = R (dG + dG^T), then through the activation.
    const MatrixXd dR = R * (dG + dG.transpose());
    *dW = dR.cwiseProduct(slope);
  }
  return total;
}

}  // namespace

double cl_infinite_batch_loss(const EncoderState& enc, double alpha, double tau) {
  return infinite_batch_impl(enc, alpha, tau, nullptr);
}

MatrixXd cl_infinite_batch_gradient(const EncoderState& enc, double alpha, double tau,
                                    double* value) {
  MatrixXd dW;
  const double v = infinite_batch_impl(enc, alpha, tau, &dW);
  if (value) *value = v;
  return dW;
}

// ---------------------------------------------------------------------------

namespace {

void check_population_args(const MatrixXd& Wo, const MatrixXd& Wt, Eigen::Index p, double alpha,
                           double kappa, double sigma0) {
  if (Wo.rows() != Wt.rows() || Wo.cols() != Wt.cols()) {
    throw DimensionError("online and target weights differ in shape");
  }
  if (Wo.cols() != p) throw DimensionError("weight columns must equal the input dimension");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  if (!(kappa > 0.0 && kappa <= 1.0)) throw ParameterError("kappa must lie in (0, 1]");
  if (!(sigma0 >= 0.0)) throw ParameterError("sigma0 must be nonnegative");
}

}  // namespace

double population_loss_linear(const MatrixXd& W_online, const MatrixXd& W_target,
                              const DictionaryMatrix& M, double alpha, double kappa,
                              double sigma0, double lambda) {
  check_population_args(W_online, W_target, M.p(), alpha, kappa, sigma0);
  const MatrixXd& Md = M.entries();
  const double a2 = alpha * alpha;
  const double cross = kappa * ((W_online * Md).cwiseProduct(W_target * Md)).sum() +
                       sigma0 * sigma0 * W_online.cwiseProduct(W_target).sum();
  return 2.0 - 2.0 * a2 * cross +
         0.5 * (1.0 - lambda) * (W_online.squaredNorm() + W_target.squaredNorm());
}

GradientSet population_gradient_linear(const MatrixXd& W_online, const MatrixXd& W_target,
                                       const DictionaryMatrix& M, double alpha, double kappa,
                                       double sigma0, double lambda) {
  check_population_args(W_online, W_target, M.p(), alpha, kappa, sigma0);
  const MatrixXd& Md = M.entries();
  const MatrixXd C = kappa * Md * Md.transpose() +
                     sigma0 * sigma0 * MatrixXd::Identity(M.p(), M.p());
  const double a2 = alpha * alpha;
  GradientSet g;
  g.online.W = -2.0 * a2 * W_target * C + (1.0 - lambda) * W_online;
  g.online.b = VectorXd::Zero(W_online.rows());
  BranchGrad t;
  t.W = -2.0 * a2 * W_online * C + (1.0 - lambda) * W_target;
  t.b = VectorXd::Zero(W_target.rows());
  g.target = std::move(t);
  g.loss = population_loss_linear(W_online, W_target, M, alpha, kappa, sigma0, lambda);
  return g;
}

namespace {

void check_warm_args(const MatrixXd& Wo, const MatrixXd& Wt, const VectorXd& bo,
                     const VectorXd& bt, double alpha, double kappa, double sigma0) {
  if (Wo.rows() != Wo.cols()) throw DimensionError("warm-start weights must be square");
  check_population_args(Wo, Wt, Wo.cols(), alpha, kappa, sigma0);
  if (bo.size() != Wo.rows() || bt.size() != Wt.rows()) {
    throw DimensionError("bias length must equal the number of rows");
  }
  const AssumptionReport report =
      check_assumptions(Wo, Wt, bo, bt, sigma0, static_cast<int>(Wo.rows()));
  if (!report.all_pass()) throw PreconditionError(report.first_violation());
}

// Gradient w.r.t. the first argument's weights given the other branch.
MatrixXd warm_gradient(const MatrixXd& W_other, const VectorXd& b_other, double alpha,
                       double kappa, double sigma0) {
  const Eigen::Index d = W_other.rows();
  const double a2 = alpha * alpha, s2 = sigma0 * sigma0;
  MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i == j) {
        g(i, i) = -2.0 * a2 * kappa * ((1.0 + s2) * W_other(i, i) - b_other(i));
      } else {
        g(i, j) = -2.0 * a2 * kappa * a2 * (kappa + s2) * W_other(i, j);
      }
    }
  }
  return g;
}

}  // namespace

GradientSet population_gradient_srelu_warm(const MatrixXd& W_online, const MatrixXd& W_target,
                                           const VectorXd& bias_online,
                                           const VectorXd& bias_target, double alpha,
                                           double kappa, double sigma0) {
  check_warm_args(W_online, W_target, bias_online, bias_target, alpha, kappa, sigma0);
  GradientSet g;
  g.online.W = warm_gradient(W_target, bias_target, alpha, kappa, sigma0);
  g.online.b = VectorXd::Zero(W_online.rows());
  BranchGrad t;
  t.W = warm_gradient(W_online, bias_online, alpha, kappa, sigma0);
  t.b = VectorXd::Zero(W_target.rows());
  g.target = std::move(t);
  g.loss = population_loss_srelu_warm(W_online, W_target, bias_online, bias_target, alpha, kappa,
                                      sigma0);
  return g;
}

double population_loss_srelu_warm(const MatrixXd& W_online, const MatrixXd& W_target,
                                  const VectorXd& bias_online, const VectorXd& bias_target,
                                  double alpha, double kappa, double sigma0) {
  check_warm_args(W_online, W_target, bias_online, bias_target, alpha, kappa, sigma0);
  const Eigen::Index d = W_online.rows();
  const double a2 = alpha * alpha, s2 = sigma0 * sigma0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (j != i) off += W_online(i, j) * W_target(i, j);
    }
    const double wo = W_online(i, i), wt = W_target(i, i);
    sum += (wo - bias_online(i)) * (wt - bias_target(i)) + a2 * kappa * off +
           s2 * (wo * wt + a2 * off);
  }
  return 2.0 - 2.0 * a2 * kappa * sum;
}

VectorXd srelu_warm_ratio(const MatrixXd& W_other, const VectorXd& bias_other, double alpha,
                          double kappa, double sigma0) {
  if (W_other.rows() != W_other.cols()) throw DimensionError("warm-start weights must be square");
  if (bias_other.size() != W_other.rows()) throw DimensionError("bias length mismatch");
  const double s2 = sigma0 * sigma0;
  VectorXd a(W_other.rows());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a(i) = alpha * alpha * (kappa + s2) / ((1.0 + s2) * W_other(i, i) - bias_other(i));
  }
  return a;
}

// ---------------------------------------------------------------------------

namespace {

// Visits every scalar parameter covered by a gradient set, in a fixed order.
template <typename F>
void for_each_param(const LossSpec& spec, ModelParams& params, bool with_target, F&& f) {
  auto branch = [&](BranchParams& bp, int which) {
    EncoderState& e = bp.enc;
    for (Eigen::Index k = 0; k < e.W.size(); ++k) f(which, 0, k, e.W.data()[k]);
    if (spec.kind == LossKind::kClInfiniteBatch) return;
    for (Eigen::Index k = 0; k < e.b.size(); ++k) f(which, 1, k, e.b.data()[k]);
    if (e.W_in) {
      for (Eigen::Index k = 0; k < e.W_in->size(); ++k) f(which, 2, k, e.W_in->data()[k]);
    }
    if (bp.bn) {
      for (Eigen::Index k = 0; k < bp.bn->gamma.size(); ++k) f(which, 3, k, bp.bn->gamma(k));
      for (Eigen::Index k = 0; k < bp.bn->beta.size(); ++k) f(which, 4, k, bp.bn->beta(k));
    }
  };
  branch(params.online, 0);
  if (with_target) branch(params.target, 1);
  if (params.predictor && spec.kind != LossKind::kClInfiniteBatch) {
    for (Eigen::Index k = 0; k < params.predictor->Wp.size(); ++k) {
      f(2, 0, k, params.predictor->Wp.data()[k]);
    }
    for (Eigen::Index k = 0; k < params.predictor->bp.size(); ++k) {
      f(2, 1, k, params.predictor->bp(k));
    }
  }
}

double& grad_slot(GradientSet& g, int which, int field, Eigen::Index k) {
  if (which == 2) {
    return field == 0 ? g.predictor->Wp.data()[k] : g.predictor->bp(k);
  }
  BranchGrad& b = which == 0 ? g.online : *g.target;
  switch (field) {
    case 0: return b.W.data()[k];
    case 1: return b.b(k);
    case 2: return b.W_in.data()[k];
    case 3: return b.gamma(k);
    default: return b.beta(k);
  }
}

}  // namespace

GradientSet finite_difference_gradient(const LossSpec& spec, const ModelParams& params,
                                       const ViewBatch& views, double step) {
  if (!(step > 0.0)) throw ParameterError("finite-difference step must be positive");
  const bool with_target =
      !uses_shared_encoder(spec.kind) && spec.stop_gradient == StopGradient::kNone;
  const bool with_pred = params.predictor && spec.kind != LossKind::kClInfiniteBatch &&
                         (spec.kind != LossKind::kNclL2 && spec.kind != LossKind::kNclInner &&
                          !requires_linear_activation(spec.kind));
  ModelParams work = params;
  if (!with_pred) work.predictor.reset();
  GradientSet g;
  g.online = BranchGrad::zeros_like(work.online);
  if (with_target) g.target = BranchGrad::zeros_like(work.target);
  if (with_pred) g.predictor = PredictorGrad::zeros_like(*work.predictor);
  // A shared encoder under stop-gradient: hold the target outputs fixed.
  std::optional<SimsiamTargets> frozen;
  if (spec.kind == LossKind::kNegCosineSimsiam && spec.stop_gradient == StopGradient::kTarget) {
    check_params(spec, work, views);
    frozen = simsiam_targets(spec, work, views);
  }
  auto value = [&]() {
    if (frozen) return simsiam(spec, work, views, false, &*frozen).eval.value;
    return evaluate_loss(spec, work, views).value;
  };
  g.loss = value();
  for_each_param(spec, work, with_target, [&](int which, int field, Eigen::Index k, double& x) {
    const double orig = x;
    x = orig + step;
    const double up = value();
    x = orig - step;
    const double down = value();
    x = orig;
    grad_slot(g, which, field, k) = (up - down) / (2.0 * step);
  });
  return g;
}

namespace {

void accumulate(const BranchGrad& a, const BranchGrad& b, double& diff, double& ref) {
  auto add = [&](const auto& x, const auto& y) {
    if (x.size() != y.size()) throw DimensionError("gradient layouts differ");
    if (x.size() == 0) return;
    diff += (x - y).squaredNorm();
    ref += y.squaredNorm();
  };
  add(a.W, b.W);
  add(a.b, b.b);
  add(a.W_in, b.W_in);
  add(a.gamma, b.gamma);
  add(a.beta, b.beta);
}

}  // namespace

double gradient_relative_error(const GradientSet& a, const GradientSet& b) {
  double diff = 0.0, ref = 0.0;
  accumulate(a.online, b.online, diff, ref);
  if (a.target.has_value() != b.target.has_value()) {
    throw DimensionError("gradient sets disagree on the target branch");
  }
  if (a.target) accumulate(*a.target, *b.target, diff, ref);
  if (a.predictor.has_value() != b.predictor.has_value()) {
    throw DimensionError("gradient sets disagree on the predictor");
  }
  if (a.predictor) {
    diff += (a.predictor->Wp - b.predictor->Wp).squaredNorm() +
            (a.predictor->bp - b.predictor->bp).squaredNorm();
    ref += b.predictor->Wp.squaredNorm() + b.predictor->bp.squaredNorm();
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-12);
}

double kink_distance(const LossSpec& spec, const ModelParams& params, const ViewBatch& views) {
  double best = std::numeric_limits<double>::infinity();
  auto scan = [&](const BranchParams& bp, const MatrixXd& A) {
    const EncoderState& e = bp.enc;
    if (e.activation == Activation::kLinear || A.size() == 0) return;
    const BranchCache c = branch_forward(bp, nullptr, false, A);
    for (Eigen::Index n = 0; n < c.act_in.cols(); ++n) {
      for (Eigen::Index i = 0; i < c.act_in.rows(); ++i) {
        const double v = c.act_in(i, n);
        if (e.activation == Activation::kRelu) {
          best = std::min(best, std::abs(v));
        } else {
          const double t = e.srelu_bias(i);
          best = std::min({best, std::abs(v - t), std::abs(v + t)});
        }
      }
    }
  };
  if (spec.kind == LossKind::kClInfiniteBatch) {
    const EncoderState& e = params.online.enc;
    if (e.activation == Activation::kLinear) return best;
    for (Eigen::Index i = 0; i < e.W.rows(); ++i) {
      for (Eigen::Index j = 0; j < e.W.cols(); ++j) {
        const double v = e.W(i, j);
        if (e.activation == Activation::kRelu) {
          best = std::min(best, std::abs(v));
        } else {
          const double t = e.srelu_bias(i);
          best = std::min({best, std::abs(v - t), std::abs(v + t)});
        }
      }
    }
    return best;
  }
  scan(params.online, views.a1);
  const BranchParams& second = uses_shared_encoder(spec.kind) ? params.online : params.target;
  scan(second, views.a2);
  if (views.negatives.size() > 0) scan(params.online, views.negatives);
  return best;
}

}  // namespace ssl_lab
