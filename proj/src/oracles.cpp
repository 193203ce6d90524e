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


#include "ssl_lab/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/QR>

#include "ssl_lab/errors.hpp"
#include "ssl_lab/rng.hpp"

namespace ssl_lab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double eta_at(const std::vector<double>& eta, int t) {
  return eta.size() == 1 ? eta[0] : eta[static_cast<std::size_t>(t)];
}

void check_linear_setup(const MatrixXd& Wo, const MatrixXd& Wt, const DictionaryMatrix& M,
                        double lambda, const std::vector<double>& eta, double alpha, double kappa,
                        double sigma0, int T) {
  if (Wo.rows() != Wt.rows() || Wo.cols() != Wt.cols()) {
    throw DimensionError("online and target weights differ in shape");
  }
  if (Wo.cols() != M.p()) throw DimensionError("weight columns must equal p");
  if (T < 0) throw ParameterError("T must be nonnegative");
  if (eta.empty() || (eta.size() != 1 && eta.size() < static_cast<std::size_t>(T))) {
    throw ParameterError("eta schedule must hold one value or at least T values");
  }
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in (0, 1]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  if (!(kappa > 0.0 && kappa <= 1.0)) throw ParameterError("kappa must lie in (0, 1]");
  if (!(sigma0 >= 0.0)) throw ParameterError("sigma0 must be nonnegative");
}

}  // namespace

std::vector<DynamicsPrediction> closed_form_linear_dynamics(
    const MatrixXd& W0_online, const MatrixXd& W0_target, const DictionaryMatrix& M,
    double lambda, const std::vector<double>& eta_schedule, double alpha, double kappa,
    double sigma0, int T) {
  check_linear_setup(W0_online, W0_target, M, lambda, eta_schedule, alpha, kappa, sigma0, T);
  std::vector<double> c(static_cast<std::size_t>(T));
  for (int i = 0; i < T; ++i) {
    c[i] = 2.0 * eta_at(eta_schedule, i) * alpha * alpha * (kappa + sigma0 * sigma0);
    if (!(c[i] > 0.0 && c[i] < lambda)) {
      std::ostringstream os;
      os << "learning-rate condition violated at step " << i << ": c = " << c[i]
         << " must lie in (0, lambda = " << lambda << ")";
      throw PreconditionError(os.str());
    }
  }
  const MatrixXd A = W0_online * M.entries();
  const MatrixXd B = W0_target * M.entries();
  const MatrixXd S = A + B;
  std::vector<DynamicsPrediction> out;
  out.reserve(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) {
    DynamicsPrediction pred;
    pred.step = t;
    pred.c.assign(c.begin(), c.begin() + t);
    double C1 = 1.0;
    for (int i = 0; i < t; ++i) C1 *= lambda - c[i];
    double C2 = 0.0;
    for (int j = 0; j < t; ++j) {
      double term = c[j];
      for (int i = j + 1; i < t; ++i) term *= lambda - c[i];
      for (int i = 0; i < j; ++i) term *= lambda + c[i];
      C2 += term;
    }
    pred.C1 = C1;
    pred.C2 = C2;
    pred.online_M = C1 * A + C2 * S;
    pred.target_M = C1 * B + C2 * S;
    out.push_back(std::move(pred));
  }
  return out;
}

LinearTrajectory simulate_linear_population_gd(const MatrixXd& W0_online,
                                               const MatrixXd& W0_target,
                                               const DictionaryMatrix& M, double lambda,
                                               const std::vector<double>& eta_schedule,
                                               double alpha, double kappa, double sigma0, int T) {
  check_linear_setup(W0_online, W0_target, M, lambda, eta_schedule, alpha, kappa, sigma0, T);
  LinearTrajectory traj;
  traj.online.push_back(W0_online);
  traj.target.push_back(W0_target);
  for (int t = 0; t < T; ++t) {
    const double eta = eta_at(eta_schedule, t);
    // lambda = 1 drops the decay term from the population gradient.
    const GradientSet g = population_gradient_linear(traj.online.back(), traj.target.back(), M,
                                                     alpha, kappa, sigma0, 1.0);
    traj.online.push_back(lambda * traj.online.back() - eta * g.online.W);
    traj.target.push_back(lambda * traj.target.back() - eta * g.target->W);
  }
  return traj;
}

double subspace_residual(const MatrixXd& W, const MatrixXd& W0_online, const MatrixXd& W0_target,
                         const DictionaryMatrix& M) {
  if (W.rows() != W0_online.rows() || W.cols() != M.p() || W0_online.cols() != M.p() ||
      W0_target.rows() != W.rows() || W0_target.cols() != M.p()) {
    throw DimensionError("subspace_residual: shape mismatch");
  }
  const MatrixXd X = W * M.entries();
  const double norm = X.norm();
  if (norm == 0.0) return 0.0;
  MatrixXd basis(X.size(), 2);
  basis.col(0) = MatrixXd(W0_online * M.entries()).reshaped();
  basis.col(1) = MatrixXd(W0_target * M.entries()).reshaped();
  const VectorXd x = X.reshaped();
  const Eigen::ColPivHouseholderQR<MatrixXd> qr(basis);
  const VectorXd coef = qr.solve(x);
  return (x - basis * coef).norm() / norm;
}

// ---------------------------------------------------------------------------

std::vector<VectorXd> lemma_a1_iterate(const VectorXd& v0, double a,
                                       const std::vector<double>& c_sequence, int T) {
  const Eigen::Index d = v0.size();
  if (d < 1) throw DimensionError("lemma_a1_iterate: empty vector");
  if (T < 0) throw ParameterError("T must be nonnegative");
  if (std::abs(v0.norm() - 1.0) > 1e-12) throw ParameterError("v0 must have unit norm");
  if (c_sequence.empty() ||
      (c_sequence.size() != 1 && c_sequence.size() < static_cast<std::size_t>(T))) {
    throw ParameterError("c sequence must hold one value or at least T values");
  }
  const double start = v0(0) + a * (v0.sum() - v0(0));
  if (!(start > 0.0)) {
    throw PreconditionError("positivity condition v1 + a (v2 + ... + vd) > 0 fails for v0");
  }
  VectorXd dir = VectorXd::Constant(d, a);
  dir(0) = 1.0;
  std::vector<VectorXd> traj;
  traj.reserve(static_cast<std::size_t>(T) + 1);
  traj.push_back(v0);
  for (int t = 0; t < T; ++t) {
    const double c = eta_at(c_sequence, t);
    if (!(c > 0.0)) throw ParameterError("c sequence must be positive");
    VectorXd v = traj.back() + c * dir;
    traj.push_back(v / v.norm());
  }
  return traj;
}

VectorXd lemma_a1_fixed_point(double a, int d) {
  if (d < 1) throw DimensionError("lemma_a1_fixed_point: d must be positive");
  const double s = std::sqrt(1.0 + (d - 1) * a * a);
  VectorXd v = VectorXd::Constant(d, a / s);
  v(0) = 1.0 / s;
  return v;
}

double lemma_a1_gamma(double a, int d, double c) {
  return 1.0 / std::sqrt(1.0 + (1.0 + (d - 1) * a * a) * c * c);
}

// ---------------------------------------------------------------------------

std::string_view to_string(LandscapeViolation v) {
  switch (v) {
    case LandscapeViolation::kNone: return "none";
    case LandscapeViolation::kNonnegativity: return "nonnegativity";
    case LandscapeViolation::kOrthogonality: return "orthogonality";
    case LandscapeViolation::kNorm: return "norm";
  }
  return "?";
}

namespace {

constexpr double kStructureTolerance = 1e-9;

void check_square(const MatrixXd& W, int d) {
  if (W.rows() != d || W.cols() != d) throw DimensionError("landscape: W must be d x d");
}

std::vector<std::pair<int, int>> negatives_of(const MatrixXd& W) {
  std::vector<std::pair<int, int>> out;
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      if (W(i, j) < 0.0) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return out;
}

bool unit_columns(const MatrixXd& W) {
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    if (std::abs(W.col(j).norm() - 1.0) > kStructureTolerance) return false;
  }
  return true;
}

}  // namespace

double ncl_one_hot_exact_loss(const MatrixXd& W, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  const Eigen::Index d = W.cols();
  EncoderState enc = make_encoder(W, Activation::kRelu);
  double inner = 0.0;
  // Only the j-th mask bit of each view reaches the encoder when x = e_j.
  for (Eigen::Index j = 0; j < d; ++j) {
    for (int b1 = 0; b1 < 2; ++b1) {
      for (int b2 = 0; b2 < 2; ++b2) {
        const double w = (b1 ? alpha : 1.0 - alpha) * (b2 ? alpha : 1.0 - alpha);
        if (w == 0.0) continue;
        const VectorXd h1 = encoder_forward(enc, VectorXd::Unit(d, j) * b1);
        const VectorXd h2 = encoder_forward(enc, VectorXd::Unit(d, j) * b2);
        inner += w * h1.dot(h2);
      }
    }
  }
  return 2.0 - 2.0 * inner / static_cast<double>(d);
}

LandscapeVerdict ncl_landscape_certify(const MatrixXd& W, double alpha, int d, double tolerance) {
  check_square(W, d);
  LandscapeVerdict v;
  v.loss = ncl_one_hot_exact_loss(W, alpha);
  v.analytic_min = 2.0 - 2.0 * alpha * alpha;
  v.margin = v.loss - v.analytic_min;
  v.is_global_min = std::abs(v.margin) <= tolerance;
  v.negative_entries = negatives_of(W);
  if (!unit_columns(W)) {
    v.violation = LandscapeViolation::kNorm;
  } else if (!v.negative_entries.empty()) {
    v.violation = LandscapeViolation::kNonnegativity;
  }
  v.structure_ok = v.violation == LandscapeViolation::kNone;
  return v;
}

bool is_permutation_matrix(const MatrixXd& W, double tol) {
  if (W.rows() != W.cols()) return false;
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    int ones = 0;
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      if (std::abs(W(i, j) - 1.0) <= tol) {
        ++ones;
      } else if (std::abs(W(i, j)) > tol) {
        return false;
      }
    }
    if (ones != 1) return false;
  }
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    if (std::abs(W.row(i).sum() - 1.0) > W.cols() * tol) return false;
  }
  return true;
}

LandscapeVerdict cl_landscape_certify(const MatrixXd& W, double alpha, double tau, int d,
                                      double tolerance) {
  check_square(W, d);
  LandscapeVerdict v;
  v.loss = cl_infinite_batch_loss(make_encoder(W, Activation::kRelu), alpha, tau);
  v.analytic_min = cl_infinite_batch_loss(
      make_encoder(MatrixXd::Identity(d, d), Activation::kRelu), alpha, tau);
  v.margin = v.loss - v.analytic_min;
  v.is_global_min = std::abs(v.margin) <= tolerance;
  v.negative_entries = negatives_of(W);
  if (!v.negative_entries.empty()) {
    v.violation = LandscapeViolation::kNonnegativity;
  } else if (!unit_columns(W)) {
    v.violation = LandscapeViolation::kNorm;
  } else {
    const MatrixXd G = W.transpose() * W - MatrixXd::Identity(d, d);
    if (G.cwiseAbs().maxCoeff() > kStructureTolerance) v.violation = LandscapeViolation::kOrthogonality;
  }
  if (v.violation == LandscapeViolation::kNone) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if ((W.col(j).array().abs() > kStructureTolerance).count() != 1) {
        v.violation = LandscapeViolation::kOrthogonality;
      }
    }
  }
  v.structure_ok = v.violation == LandscapeViolation::kNone;
  return v;
}

// ---------------------------------------------------------------------------

std::string AssumptionReport::first_violation() const {
  const std::pair<const char*, const AssumptionCheck*> checks[] = {
      {"symmetric latent", &latent},
      {"warm start", &warm_start},
      {"small noise", &small_noise},
      {"bias window", &bias}};
  for (const auto& [name, c] : checks) {
    if (!c->pass) return std::string(name) + " assumption violated: " + c->detail;
  }
  return {};
}

double noise_norm_bound(double sigma0, int d) {
  if (!(sigma0 >= 0.0)) throw ParameterError("sigma0 must be nonnegative");
  return sigma0 * (std::sqrt(static_cast<double>(d)) + 4.0);
}

AssumptionReport check_assumptions(const MatrixXd& W_online, const MatrixXd& W_target,
                                   const VectorXd& bias_online, const VectorXd& bias_target,
                                   double sigma0, int d) {
  if (W_online.rows() != d || W_online.cols() != d || W_target.rows() != d ||
      W_target.cols() != d) {
    throw DimensionError("check_assumptions: weights must be d x d");
  }
  if (bias_online.size() != d || bias_target.size() != d) {
    throw DimensionError("check_assumptions: bias length must be d");
  }
  AssumptionReport r;
  r.latent.detail = "symmetric Bernoulli latents are a configuration property";
  r.noise_bound = noise_norm_bound(sigma0, d);
  const MatrixXd I = MatrixXd::Identity(d, d);
  const double warm_bound = 1.0 / (10.0 * d);
  r.warm_start.bound = warm_bound;
  r.small_noise.bound = r.noise_bound;
  r.small_noise.value = std::numeric_limits<double>::infinity();

  auto scan = [&](const MatrixXd& W, const VectorXd& b, const char* name) {
    const MatrixXd delta = W - I;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double v = std::abs(delta(i, j));
        if (r.warm_start.pass && !(v < warm_bound)) {
          r.warm_start = {false, name, i, j, v, warm_bound, ""};
          std::ostringstream os;
          os << name << " |Delta(" << i << "," << j << ")| = " << v << " is not below 1/(10d) = "
             << warm_bound;
          r.warm_start.detail = os.str();
        }
        if (sigma0 > 0.0 && v < r.small_noise.value) {
          r.small_noise.value = v;
          r.small_noise.branch = name;
          r.small_noise.row = i;
          r.small_noise.col = j;
        }
      }
    }
    for (int i = 0; i < d; ++i) {
      double cb = r.noise_bound * W.row(i).norm();
      for (int l = 0; l < d; ++l) {
        if (l != i) cb += std::abs(delta(i, l));
      }
      const double lower = cb;
      const double upper = 1.0 + std::min(delta(i, i), 0.0) - cb;
      const double bi = b(i);
      const bool lower_ok = bi > lower || (lower == 0.0 && bi >= 0.0);
      if (r.bias.pass && !(lower_ok && bi < upper)) {
        r.bias = {false, name, i, -1, bi, lower_ok ? upper : lower, ""};
        std::ostringstream os;
        os << name << " bias[" << i << "] = " << bi << " violates "
           << (lower_ok ? "b < 1 - |c_b| = " : "max(-c_b, c_b, 0) < b with |c_b| <= ")
           << (lower_ok ? upper : lower);
        r.bias.detail = os.str();
      }
    }
  };
  scan(W_online, bias_online, "online");
  scan(W_target, bias_target, "target");
  if (sigma0 > 0.0) {
    r.small_noise.pass = r.noise_bound <= r.small_noise.value;
    if (!r.small_noise.pass) {
      std::ostringstream os;
      os << "noise norm bound " << r.noise_bound << " exceeds " << r.small_noise.branch
         << " |Delta(" << r.small_noise.row << "," << r.small_noise.col
         << ")| = " << r.small_noise.value;
      r.small_noise.detail = os.str();
    }
  } else {
    r.small_noise.value = 0.0;
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

struct Weighted {
  VectorXd v;
  double w;
};

std::vector<Weighted> enumerate_latents(const LatentSpec& spec) {
  spec.validate();
  const int d = static_cast<int>(spec.d);
  std::vector<Weighted> out;
  if (spec.kind == LatentKind::kOneHot) {
    for (int j = 0; j < d; ++j) out.push_back({VectorXd::Unit(d, j), 1.0 / d});
    return out;
  }
  const int base = spec.kind == LatentKind::kZeroOne ? 2 : 3;
  const double k = spec.sparsity;
  std::uint64_t total = 1;
  for (int i = 0; i < d; ++i) {
    total *= base;
    if (total > (std::uint64_t{1} << 32)) throw EnumerationTooLargeError("latent alphabet too large");
  }
  double mass = 0.0;
  for (std::uint64_t code = 0; code < total; ++code) {
    VectorXd z(d);
    double w = 1.0;
    std::uint64_t c = code;
    for (int i = 0; i < d; ++i) {
      const int digit = static_cast<int>(c % base);
      c /= base;
      if (digit == 0) {
        z(i) = 0.0;
        w *= 1.0 - k;
      } else if (base == 2) {
        z(i) = 1.0;
        w *= k;
      } else {
        z(i) = digit == 1 ? 1.0 : -1.0;
        w *= 0.5 * k;
      }
    }
    if (spec.reject_all_zero && code == 0) continue;
    if (w == 0.0) continue;
    mass += w;
    out.push_back({std::move(z), w});
  }
  for (auto& e : out) e.w /= mass;
  return out;
}

std::vector<Weighted> enumerate_single_masks(int p, double alpha, double scale) {
  std::vector<Weighted> out;
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << p); ++code) {
    VectorXd m(p);
    double w = 1.0;
    for (int k = 0; k < p; ++k) {
      const bool on = (code >> k) & 1u;
      m(k) = on ? scale : 0.0;
      w *= on ? alpha : 1.0 - alpha;
    }
    if (w > 0.0) out.push_back({std::move(m), w});
  }
  return out;
}

void check_enumerable(const LossSpec& spec, const ModelParams& params, const DictionaryMatrix& M,
                      const EnumerationSetup& setup) {
  if (params.online.bn || (!uses_shared_encoder(spec.kind) && params.target.bn)) {
    throw ParameterError("population enumeration does not support batch norm");
  }
  if (spec.kind == LossKind::kClInfoNce && spec.ntxent) {
    throw ParameterError("population enumeration needs explicit negatives, not NT-Xent");
  }
  if (setup.latent.d != M.d()) throw DimensionError("latent spec d does not match dictionary");
  if (!(setup.alpha > 0.0 && setup.alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
}

// Accumulates sum_k w_k * per_sample_k over batches of columns.
class BatchAccumulator {
 public:
  BatchAccumulator(const LossSpec& spec, const ModelParams& params, Eigen::Index p, int B)
      : spec_(spec), params_(params), p_(p), B_(B) {
    a1_.resize(p, kChunk);
    a2_.resize(p, kChunk);
    if (B_ > 0) neg_.resize(p, kChunk * B_);
    w_.resize(kChunk);
  }

  double* push(const VectorXd& a1, const VectorXd& a2, double w) {
    a1_.col(n_) = a1;
    a2_.col(n_) = a2;
    w_(n_) = w;
    double* neg = B_ > 0 ? neg_.col(n_ * B_).data() : nullptr;
    ++n_;
    return neg;
  }
  bool full() const { return n_ == kChunk; }
  void flush() {
    if (n_ == 0) return;
    ViewBatch views{a1_.leftCols(n_), a2_.leftCols(n_), MatrixXd()};
    if (B_ > 0) views.negatives = neg_.leftCols(n_ * B_);
    const LossEvaluation e = evaluate_loss(spec_, params_, views);
    total_ += e.per_sample.dot(w_.head(n_));
    n_ = 0;
  }
  double total() const { return total_; }

 private:
  static constexpr Eigen::Index kChunk = 4096;
  const LossSpec& spec_;
  const ModelParams& params_;
  Eigen::Index p_;
  int B_;
  MatrixXd a1_, a2_, neg_;
  VectorXd w_;
  Eigen::Index n_ = 0;
  double total_ = 0.0;
};

}  // namespace

double exact_loss_enumeration(const LossSpec& spec, const ModelParams& params,
                              const DictionaryMatrix& M, const EnumerationSetup& setup) {
  check_enumerable(spec, params, M, setup);
  if (spec.kind == LossKind::kClInfiniteBatch) {
    if (setup.latent.kind != LatentKind::kOneHot || M.p() != M.d() ||
        (M.entries() - MatrixXd::Identity(M.p(), M.d())).cwiseAbs().maxCoeff() > 0.0) {
      throw ParameterError("cl_infinite_batch needs M = I and one-hot latents");
    }
    return cl_infinite_batch_loss(params.online.enc, setup.alpha, spec.tau);
  }
  const int p = static_cast<int>(M.p());
  if (p > 12) throw EnumerationTooLargeError("mask enumeration needs p <= 12");
  const bool dependent = setup.mask_scheme == MaskScheme::kDependent;
  const double scale = dependent ? 2.0 : 1.0;
  const std::vector<Weighted> latents = enumerate_latents(setup.latent);
  const std::vector<Weighted> masks = enumerate_single_masks(p, setup.alpha, scale);
  const int B = spec.kind == LossKind::kClInfoNce ? spec.neg_batch : 0;

  const double pairs = dependent ? static_cast<double>(masks.size())
                                 : static_cast<double>(masks.size()) * masks.size();
  double neg_count = 1.0;
  for (int b = 0; b < B; ++b) neg_count *= static_cast<double>(latents.size() * masks.size());
  const double terms = static_cast<double>(latents.size()) * pairs * neg_count;
  if (terms > static_cast<double>(setup.max_terms)) {
    std::ostringstream os;
    os << "enumeration needs " << terms << " terms, cap is " << setup.max_terms;
    throw EnumerationTooLargeError(os.str());
  }

  std::vector<VectorXd> xs;
  for (const auto& z : latents) xs.push_back(M.entries() * z.v);
  // Flattened negative alphabet: every (latent, single mask) pair.
  std::vector<Weighted> neg_alphabet;
  if (B > 0) {
    for (std::size_t zi = 0; zi < latents.size(); ++zi) {
      for (const auto& m : masks) {
        neg_alphabet.push_back({m.v.cwiseProduct(xs[zi]), latents[zi].w * m.w});
      }
    }
  }

  BatchAccumulator acc(spec, params, p, B);
  std::vector<std::size_t> idx(static_cast<std::size_t>(B), 0);
  auto visit = [&](const VectorXd& a1, const VectorXd& a2, double w) {
    if (B == 0) {
      acc.push(a1, a2, w);
      if (acc.full()) acc.flush();
      return;
    }
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      double wn = w;
      for (int b = 0; b < B; ++b) wn *= neg_alphabet[idx[b]].w;
      double* neg = acc.push(a1, a2, wn);
      for (int b = 0; b < B; ++b) {
        Eigen::Map<VectorXd>(neg + b * p, p) = neg_alphabet[idx[b]].v;
      }
      if (acc.full()) acc.flush();
      int b = 0;
      while (b < B && ++idx[b] == neg_alphabet.size()) idx[b++] = 0;
      if (b == B) break;
    }
  };

  for (std::size_t zi = 0; zi < latents.size(); ++zi) {
    const VectorXd& x = xs[zi];
    for (const auto& m1 : masks) {
      const VectorXd a1 = m1.v.cwiseProduct(x);
      if (dependent) {
        const VectorXd a2 = (VectorXd::Constant(p, scale) - m1.v).cwiseProduct(x);
        visit(a1, a2, latents[zi].w * m1.w);
        continue;
      }
      for (const auto& m2 : masks) {
        visit(a1, m2.v.cwiseProduct(x), latents[zi].w * m1.w * m2.w);
      }
    }
  }
  acc.flush();
  return acc.total();
}

MonteCarloEstimate monte_carlo_loss(const LossSpec& spec, const ModelParams& params,
                                    const DictionaryMatrix& M, const EnumerationSetup& setup,
                                    std::int64_t samples, std::uint64_t seed) {
  check_enumerable(spec, params, M, setup);
  if (spec.kind == LossKind::kClInfiniteBatch) {
    throw ParameterError("Monte Carlo is not defined for the infinite-batch surrogate");
  }
  if (samples < 2) throw ParameterError("Monte Carlo needs at least 2 samples");
  Rng latent_rng = make_stream(seed, Stream::kLatents);
  Rng mask_rng = make_stream(seed, Stream::kMasks);
  const int B = spec.kind == LossKind::kClInfoNce ? spec.neg_batch : 0;
  const Eigen::Index p = M.p();
  constexpr std::int64_t kChunk = 8192;
  double sum = 0.0, sum_sq = 0.0;
  std::int64_t done = 0;
  while (done < samples) {
    const Eigen::Index n = static_cast<Eigen::Index>(std::min(kChunk, samples - done));
    MatrixXd X(p, n);
    for (Eigen::Index k = 0; k < n; ++k) X.col(k) = M.entries() * sample_latent(setup.latent, latent_rng);
    const ViewBatchPair v = sample_views(X, setup.mask_scheme, setup.alpha, mask_rng);
    ViewBatch views{v.a1, v.a2, MatrixXd()};
    if (B > 0) {
      MatrixXd XN(p, n * B);
      for (Eigen::Index k = 0; k < n * B; ++k) {
        XN.col(k) = M.entries() * sample_latent(setup.latent, latent_rng);
      }
      views.negatives = sample_single_views(XN, setup.mask_scheme, setup.alpha, mask_rng);
    }
    const LossEvaluation e = evaluate_loss(spec, params, views);
    sum += e.per_sample.sum();
    sum_sq += e.per_sample.squaredNorm();
    done += n;
  }
  MonteCarloEstimate est;
  est.samples = samples;
  est.mean = sum / static_cast<double>(samples);
  const double var =
      std::max(0.0, (sum_sq - samples * est.mean * est.mean) / static_cast<double>(samples - 1));
  est.std_error = std::sqrt(var / static_cast<double>(samples));
  return est;
}

}  // namespace ssl_lab
