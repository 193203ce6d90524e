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

#include "ssl_lab/encoders.hpp"

#include <cmath>
#include <string>

namespace ssl_lab {

Activation parse_activation(std::string_view name) {
  if (name == "linear") return Activation::kLinear;
  if (name == "relu") return Activation::kRelu;
  if (name == "srelu") return Activation::kSrelu;
  throw ParameterError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kSrelu: return "srelu";
  }
  return "?";
}

void EncoderState::validate() const {
  if (b.size() != W.rows()) throw DimensionError("encoder bias length must equal rows of W");
  if (W_in && W_in->rows() != W.cols()) {
    throw DimensionError("hidden layer output width must equal columns of W");
  }
  if (activation == Activation::kSrelu) {
    if (srelu_bias.size() != W.rows()) throw DimensionError("srelu bias length mismatch");
    if ((srelu_bias.array() < 0.0).any()) throw ParameterError("srelu bias must be nonnegative");
  }
}

EncoderState make_encoder(Eigen::MatrixXd W, Activation act, double srelu_bias) {
  EncoderState enc;
  const Eigen::Index m = W.rows();
  enc.W = std::move(W);
  enc.b = Eigen::VectorXd::Zero(m);
  enc.activation = act;
  enc.srelu_bias = Eigen::VectorXd::Constant(m, srelu_bias);
  enc.validate();
  return enc;
}

void PredictorState::validate(Eigen::Index m) const {
  if (Wp.rows() != m || Wp.cols() != m) throw DimensionError("predictor must be m x m");
  if (bp.size() != m) throw DimensionError("predictor bias length mismatch");
}

BatchNormState BatchNormState::identity(Eigen::Index m) {
  BatchNormState bn;
  bn.gamma = Eigen::VectorXd::Ones(m);
  bn.beta = Eigen::VectorXd::Zero(m);
  bn.running_mean = Eigen::VectorXd::Zero(m);
  bn.running_var = Eigen::VectorXd::Ones(m);
  return bn;
}

void BatchNormState::validate() const {
  if (!(eps > 0.0)) throw ParameterError("batch norm eps must be positive");
  if (beta.size() != gamma.size() || running_mean.size() != gamma.size() ||
      running_var.size() != gamma.size()) {
    throw DimensionError("batch norm vectors must share one length");
  }
  if ((running_var.array() < 0.0).any()) throw ParameterError("running variance is negative");
}

namespace {

double activate(Activation act, double v, double bias) {
  switch (act) {
    case Activation::kLinear: return v;
    case Activation::kRelu: return v > 0.0 ? v : 0.0;
    case Activation::kSrelu: return v > bias ? v - bias : (v < -bias ? v + bias : 0.0);
  }
  return v;
}

// Subgradient 0 at the kinks.
double activate_slope(Activation act, double v, double bias) {
  switch (act) {
    case Activation::kLinear: return 1.0;
    case Activation::kRelu: return v > 0.0 ? 1.0 : 0.0;
    case Activation::kSrelu: return (v > bias || v < -bias) ? 1.0 : 0.0;
  }
  return 1.0;
}

void apply_activation(const EncoderState& enc, const Eigen::MatrixXd& in, Eigen::MatrixXd& out) {
  out.resize(in.rows(), in.cols());
  if (enc.activation == Activation::kLinear) {
    out = in;
    return;
  }
  for (Eigen::Index n = 0; n < in.cols(); ++n) {
    for (Eigen::Index i = 0; i < in.rows(); ++i) {
      const double bias = enc.activation == Activation::kSrelu ? enc.srelu_bias(i) : 0.0;
      out(i, n) = activate(enc.activation, in(i, n), bias);
    }
  }
}

}  // namespace

Eigen::VectorXd encoder_forward(const EncoderState& enc, const Eigen::VectorXd& a) {
  enc.validate();
  if (a.size() != enc.in_dim()) throw DimensionError("encoder_forward: input length mismatch");
  Eigen::VectorXd u = enc.W_in ? Eigen::VectorXd(enc.W * (*enc.W_in * a)) : Eigen::VectorXd(enc.W * a);
  u += enc.b;
  Eigen::MatrixXd out;
  apply_activation(enc, u, out);
  return out.col(0);
}

Eigen::VectorXd predictor_forward(const PredictorState& pred, const Eigen::VectorXd& h) {
  pred.validate(pred.Wp.rows());
  if (h.size() != pred.Wp.cols()) throw DimensionError("predictor_forward: input length mismatch");
  return pred.Wp * h + pred.bp;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& W) {
  Eigen::MatrixXd out = W;
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    const double n = W.row(i).norm();
    if (!(n > kZeroNormThreshold)) {
      throw DegenerateInputError("normalize_rows: row " + std::to_string(i) + " has zero norm");
    }
    out.row(i) /= n;
  }
  return out;
}

Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& W) {
  Eigen::MatrixXd out = W;
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    const double n = W.col(j).norm();
    if (!(n > kZeroNormThreshold)) {
      throw DegenerateInputError("normalize_columns: column " + std::to_string(j) +
                                 " has zero norm");
    }
    out.col(j) /= n;
  }
  return out;
}

EncoderState normalize_rows(EncoderState enc) {
  enc.W = normalize_rows(enc.W);
  return enc;
}

EncoderState normalize_columns(EncoderState enc) {
  enc.W = normalize_columns(enc.W);
  return enc;
}

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v) {
  const double n = v.norm();
  if (!(n > kZeroNormThreshold)) throw DegenerateInputError("l2_normalize: zero vector");
  return v / n;
}

Eigen::MatrixXd batch_norm_forward(BatchNormState& bn, const Eigen::MatrixXd& H) {
  bn.validate();
  if (H.rows() != bn.gamma.size()) throw DimensionError("batch_norm_forward: feature mismatch");
  const Eigen::Index n = H.cols();
  Eigen::VectorXd mean, var;
  if (bn.mode == BatchNormMode::kTrain) {
    if (n < 2) throw ParameterError("batch norm in train mode needs a batch of at least 2");
    mean = H.rowwise().mean();
    var = (H.colwise() - mean).array().square().rowwise().mean();
    bn.running_mean = (1.0 - bn.momentum) * bn.running_mean + bn.momentum * mean;
    bn.running_var = (1.0 - bn.momentum) * bn.running_var + bn.momentum * var;
  } else {
    mean = bn.running_mean;
    var = bn.running_var;
  }
  const Eigen::ArrayXd inv_std = (var.array() + bn.eps).rsqrt();
  Eigen::MatrixXd out = (H.colwise() - mean).array().colwise() * (inv_std * bn.gamma.array());
  out.colwise() += bn.beta;
  return out;
}

BranchGrad BranchGrad::zeros_like(const BranchParams& params) {
  BranchGrad g;
  g.W = Eigen::MatrixXd::Zero(params.enc.W.rows(), params.enc.W.cols());
  g.b = Eigen::VectorXd::Zero(params.enc.b.size());
  if (params.enc.W_in) g.W_in = Eigen::MatrixXd::Zero(params.enc.W_in->rows(), params.enc.W_in->cols());
  if (params.bn) {
    g.gamma = Eigen::VectorXd::Zero(params.bn->gamma.size());
    g.beta = Eigen::VectorXd::Zero(params.bn->beta.size());
  }
  return g;
}

double BranchGrad::squared_norm() const {
  return W.squaredNorm() + b.squaredNorm() + W_in.squaredNorm() + gamma.squaredNorm() +
         beta.squaredNorm();
}

PredictorGrad PredictorGrad::zeros_like(const PredictorState& pred) {
  return {Eigen::MatrixXd::Zero(pred.Wp.rows(), pred.Wp.cols()),
          Eigen::VectorXd::Zero(pred.bp.size())};
}

BranchCache branch_forward(const BranchParams& params, const PredictorState* pred,
                           bool normalize_output, const Eigen::MatrixXd& A,
                           double norm_floor) {
  const EncoderState& enc = params.enc;
  if (A.rows() != enc.in_dim()) throw DimensionError("branch_forward: input dimension mismatch");
  BranchCache c;
  c.input = A;
  c.hidden = enc.W_in ? Eigen::MatrixXd(*enc.W_in * A) : A;
  c.pre.noalias() = enc.W * c.hidden;
  c.pre.colwise() += enc.b;
  if (params.bn) {
    const BatchNormState& bn = *params.bn;
    Eigen::VectorXd mean, var;
    if (bn.mode == BatchNormMode::kTrain) {
      if (A.cols() < 2) throw ParameterError("batch norm in train mode needs a batch of at least 2");
      mean = c.pre.rowwise().mean();
      var = (c.pre.colwise() - mean).array().square().rowwise().mean();
      c.batch_stats = true;
    } else {
      mean = bn.running_mean;
      var = bn.running_var;
    }
    c.inv_std = (var.array() + bn.eps).rsqrt().matrix();
    c.xhat = (c.pre.colwise() - mean).array().colwise() * c.inv_std.array();
    c.act_in = c.xhat.array().colwise() * bn.gamma.array();
    c.act_in.colwise() += bn.beta;
  } else {
    c.act_in = c.pre;
  }
  apply_activation(enc, c.act_in, c.h);
  if (pred) {
    c.g.noalias() = pred->Wp * c.h;
    c.g.colwise() += pred->bp;
    c.used_predictor = true;
  } else {
    c.g = c.h;
  }
  if (normalize_output) {
    c.g_norm = c.g.colwise().norm().transpose();
    if (norm_floor > 0.0) c.g_norm = c.g_norm.cwiseMax(norm_floor);
    for (Eigen::Index n = 0; n < c.g_norm.size(); ++n) {
      if (!(c.g_norm(n) > kZeroNormThreshold)) {
        throw DegenerateInputError("representation of sample " + std::to_string(n) +
                                   " has zero norm; cannot normalize");
      }
    }
    c.y = c.g.array().rowwise() / c.g_norm.transpose().array();
    c.normalized = true;
  } else {
    c.y = c.g;
  }
  return c;
}

Eigen::MatrixXd normalize_backward(const Eigen::MatrixXd& y, const Eigen::VectorXd& g_norm,
                                   const Eigen::MatrixXd& dy) {
  const Eigen::RowVectorXd proj = (y.array() * dy.array()).colwise().sum();
  Eigen::MatrixXd dg = dy - (y.array().rowwise() * proj.array()).matrix();
  return dg.array().rowwise() / g_norm.transpose().array();
}

void branch_backward(const BranchParams& params, const PredictorState* pred,
                     const BranchCache& c, const Eigen::MatrixXd& dy,
                     const Eigen::MatrixXd* dh_extra, BranchGrad& grad, PredictorGrad* pred_grad) {
  const EncoderState& enc = params.enc;
  Eigen::MatrixXd dg = c.normalized ? normalize_backward(c.y, c.g_norm, dy) : dy;
  Eigen::MatrixXd dh;
  if (c.used_predictor) {
    if (pred_grad) {
      pred_grad->Wp.noalias() += dg * c.h.transpose();
      pred_grad->bp += dg.rowwise().sum();
    }
    dh.noalias() = pred->Wp.transpose() * dg;
  } else {
    dh = std::move(dg);
  }
  if (dh_extra) dh += *dh_extra;

  Eigen::MatrixXd dact(dh.rows(), dh.cols());
  for (Eigen::Index n = 0; n < dh.cols(); ++n) {
    for (Eigen::Index i = 0; i < dh.rows(); ++i) {
      const double bias = enc.activation == Activation::kSrelu ? enc.srelu_bias(i) : 0.0;
      dact(i, n) = dh(i, n) * activate_slope(enc.activation, c.act_in(i, n), bias);
    }
  }

  Eigen::MatrixXd dpre;
  if (params.bn) {
    const BatchNormState& bn = *params.bn;
    grad.gamma += (dact.array() * c.xhat.array()).rowwise().sum().matrix();
    grad.beta += dact.rowwise().sum();
    const Eigen::ArrayXXd dxhat = dact.array().colwise() * bn.gamma.array();
    if (c.batch_stats) {
      const double n = static_cast<double>(dact.cols());
      const Eigen::ArrayXd sum_dxhat = dxhat.rowwise().sum();
      const Eigen::ArrayXd sum_dxhat_xhat = (dxhat * c.xhat.array()).rowwise().sum();
      Eigen::ArrayXXd t = n * dxhat;
      t.colwise() -= sum_dxhat;
      t -= c.xhat.array().colwise() * sum_dxhat_xhat;
      dpre = (t.colwise() * (c.inv_std.array() / n)).matrix();
    } else {
      dpre = (dxhat.colwise() * c.inv_std.array()).matrix();
    }
  } else {
    dpre = std::move(dact);
  }

  grad.W.noalias() += dpre * c.hidden.transpose();
  grad.b += dpre.rowwise().sum();
  if (enc.W_in) {
    grad.W_in.noalias() += (enc.W.transpose() * dpre) * c.input.transpose();
  }
}

}  // namespace ssl_lab
