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


// Shared fixtures for the unit and acceptance tests.

#ifndef SSL_LAB_TESTS_TEST_UTIL_HPP_
#define SSL_LAB_TESTS_TEST_UTIL_HPP_

#include <cmath>
#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ssl_lab/encoders.hpp"
#include "ssl_lab/losses.hpp"
#include "ssl_lab/rng.hpp"

namespace ssl_lab::testing {

// One architecture/objective combination used by gradient and oracle tests.
struct CaseShape {
  std::string name;
  LossKind kind = LossKind::kNclL2;
  Activation act = Activation::kSrelu;
  bool batch_norm = false;
  bool predictor = false;
  StopGradient sg = StopGradient::kTarget;
  bool normalize = false;  // output_normalize for the inner-product and CL kinds
  bool ntxent = false;
  int neg_batch = 0;  // > 0 supplies explicit negatives
  bool hidden = false;
};

struct Case {
  LossSpec spec;
  ModelParams params;
  ViewBatch views;
};

// At least one shape per loss kind, plus the stop-gradient, batch-norm,
// hidden-layer and negative-sampling variants.
inline std::vector<CaseShape> all_shapes() {
  using A = Activation;
  using K = LossKind;
  using S = StopGradient;
  return {
      {"ncl_l2_srelu", K::kNclL2, A::kSrelu},
      {"ncl_l2_srelu_bn", K::kNclL2, A::kSrelu, true},
      {"ncl_l2_relu_no_sg", K::kNclL2, A::kRelu, false, false, S::kNone},
      {"ncl_l2_hidden_bn", K::kNclL2, A::kSrelu, true, false, S::kTarget, false, false, 0, true},
      {"ncl_l2_pred", K::kNclL2Pred, A::kSrelu, false, true},
      {"ncl_l2_pred_bn_no_sg", K::kNclL2Pred, A::kRelu, true, true, S::kNone},
      {"ncl_inner", K::kNclInner, A::kRelu},
      {"ncl_inner_normalized", K::kNclInner, A::kSrelu, false, false, S::kNone, true},
      {"linear_ncl", K::kLinearNcl, A::kLinear},
      {"linear_ncl_no_sg", K::kLinearNcl, A::kLinear, false, false, S::kNone},
      {"linear_ncl_wd", K::kLinearNclWd, A::kLinear, false, false, S::kNone},
      {"ncl_inner_pred", K::kNclInnerPred, A::kRelu, false, true},
      {"cl_infonce_negatives", K::kClInfoNce, A::kRelu, false, false, S::kTarget, false, false, 2},
      {"cl_infonce_in_batch", K::kClInfoNce, A::kSrelu, true, false, S::kTarget, true},
      {"cl_infonce_ntxent_pred", K::kClInfoNce, A::kRelu, true, true, S::kTarget, true, true},
      {"cl_infinite_batch", K::kClInfiniteBatch, A::kRelu},
      {"simsiam_sg", K::kNegCosineSimsiam, A::kRelu, true, true},
      {"simsiam_no_sg", K::kNegCosineSimsiam, A::kSrelu, false, true, S::kNone},
  };
}

inline BranchParams random_branch(const CaseShape& s, Eigen::Index m, Eigen::Index p, Rng& rng) {
  BranchParams b;
  const Eigen::Index k = s.hidden ? p + 1 : p;
  b.enc = make_encoder(standard_normal(m, k, rng), s.act, s.act == Activation::kSrelu ? 0.3 : 0.0);
  if (s.act != Activation::kSrelu && s.kind != LossKind::kClInfiniteBatch) {
    b.enc.b = 0.3 * standard_normal(m, 1, rng).col(0);
  }
  if (s.hidden) b.enc.W_in = standard_normal(k, p, rng);
  if (s.batch_norm) {
    BatchNormState bn = BatchNormState::identity(m);
    bn.gamma.array() += 0.3 * standard_normal(m, 1, rng).col(0).array();
    bn.beta = 0.5 * standard_normal(m, 1, rng).col(0);
    b.bn = bn;
  }
  return b;
}

inline Case random_case(const CaseShape& s, Rng& rng, Eigen::Index m = 4, Eigen::Index p = 5,
                        Eigen::Index n = 6) {
  Case c;
  c.spec.kind = s.kind;
  c.spec.stop_gradient = s.sg;
  c.spec.output_normalize = s.normalize;
  c.spec.ntxent = s.ntxent;
  c.spec.tau = 0.7;
  c.spec.lambda = 0.9;
  if (s.neg_batch > 0) c.spec.neg_batch = s.neg_batch;
  if (s.kind == LossKind::kClInfiniteBatch) {
    // Square weights over one-hot inputs; entries kept away from the ReLU kink.
    const Eigen::Index d = 3;
    Eigen::MatrixXd W = standard_normal(d, d, rng);
    for (Eigen::Index i = 0; i < W.size(); ++i) {
      double& w = W.data()[i];
      if (std::abs(w) < 0.05) w = w < 0.0 ? -0.05 : 0.05;
    }
    c.params.online.enc = make_encoder(W, s.act);
    c.params.target = c.params.online;
    return c;
  }
  c.params.online = random_branch(s, m, p, rng);
  c.params.target = random_branch(s, m, p, rng);
  if (s.predictor) {
    c.params.predictor =
        PredictorState{standard_normal(m, m, rng), 0.2 * standard_normal(m, 1, rng).col(0)};
  }
  c.views.a1 = standard_normal(p, n, rng);
  c.views.a2 = standard_normal(p, n, rng);
  if (s.neg_batch > 0) c.views.negatives = standard_normal(p, n * s.neg_batch, rng);
  return c;
}

// Smallest output norm that a normalizing loss divides by; large values keep
// finite differences well conditioned.
inline double min_output_norm(const LossSpec& spec, const ModelParams& params,
                              const ViewBatch& views) {
  if (spec.kind == LossKind::kClInfiniteBatch) return 1.0;
  const bool pred = params.predictor.has_value() &&
                    (uses_predictor(spec.kind) || spec.kind == LossKind::kClInfoNce);
  const PredictorState* p = pred ? &*params.predictor : nullptr;
  double best = branch_forward(params.online, p, false, views.a1).y.colwise().norm().minCoeff();
  const BranchParams& second = uses_shared_encoder(spec.kind) ? params.online : params.target;
  const PredictorState* p2 = uses_shared_encoder(spec.kind) ? p : nullptr;
  best = std::min(best, branch_forward(second, p2, false, views.a2).y.colwise().norm().minCoeff());
  if (spec.kind == LossKind::kNegCosineSimsiam) {
    for (const auto* A : {&views.a1, &views.a2}) {
      best = std::min(best, branch_forward(params.online, nullptr, false, *A).h.colwise().norm().minCoeff());
    }
  }
  if (views.negatives.size() > 0) {
    best = std::min(best,
                    branch_forward(params.online, p, false, views.negatives).y.colwise().norm().minCoeff());
  }
  return best;
}

// Redraws until every activation input is at least `margin` from a kink and
// every normalized output has norm at least 0.1.
inline Case kink_free_case(const CaseShape& s, Rng& rng, double margin = 1e-3) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Case c = random_case(s, rng);
    if (kink_distance(c.spec, c.params, c.views) < margin) continue;
    if (min_output_norm(c.spec, c.params, c.views) < 0.1) continue;
    return c;
  }
  throw std::runtime_error("no kink-free case found for " + s.name);
}

}  // namespace ssl_lab::testing

#endif  // SSL_LAB_TESTS_TEST_UTIL_HPP_
