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

#ifndef SSL_LAB_ORACLES_HPP_
#define SSL_LAB_ORACLES_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ssl_lab/data.hpp"
#include "ssl_lab/encoders.hpp"
#include "ssl_lab/losses.hpp"

namespace ssl_lab {

// ---------------------------------------------------------------------------
// Linear dynamics under weight-decayed population gradient descent.
// ---------------------------------------------------------------------------

struct DynamicsPrediction {
  int step = 0;
  Eigen::MatrixXd online_M;  // W^o_t M
  Eigen::MatrixXd target_M;  // W^t_t M
  double C1 = 1.0;           // prod_{i<t} (lambda - c_i)
  double C2 = 0.0;           // sum_j c_j prod_{i>j} (lambda - c_i) prod_{i<j} (lambda + c_i)
  std::vector<double> c;     // c_i = 2 eta_i alpha^2 (kappa + sigma0^2), i < t
};

// Predictions for t = 0..T. eta_schedule may hold one value (constant) or at
// least T values.
std::vector<DynamicsPrediction> closed_form_linear_dynamics(
    const Eigen::MatrixXd& W0_online, const Eigen::MatrixXd& W0_target, const DictionaryMatrix& M,
    double lambda, const std::vector<double>& eta_schedule, double alpha, double kappa,
    double sigma0, int T);

// Reference simulation of the same recursion: both branches updated
// simultaneously by W <- lambda W - eta * (data part of the population gradient).
// Returns W^o_t, W^t_t for t = 0..T.
struct LinearTrajectory {
  std::vector<Eigen::MatrixXd> online;
  std::vector<Eigen::MatrixXd> target;
};
LinearTrajectory simulate_linear_population_gd(const Eigen::MatrixXd& W0_online,
                                               const Eigen::MatrixXd& W0_target,
                                               const DictionaryMatrix& M, double lambda,
                                               const std::vector<double>& eta_schedule,
                                               double alpha, double kappa, double sigma0, int T);

// Relative Frobenius residual of projecting W M onto span{W0_o M, W0_t M}.
double subspace_residual(const Eigen::MatrixXd& W, const Eigen::MatrixXd& W0_online,
                         const Eigen::MatrixXd& W0_target, const DictionaryMatrix& M);

// ---------------------------------------------------------------------------
// Proportional update with normalization.
// ---------------------------------------------------------------------------

// v <- normalize(v + c_t (e_1 + a (e_2 + ... + e_d))); returns v_0..v_T.
std::vector<Eigen::VectorXd> lemma_a1_iterate(const Eigen::VectorXd& v0, double a,
                                              const std::vector<double>& c_sequence, int T);
Eigen::VectorXd lemma_a1_fixed_point(double a, int d);
double lemma_a1_gamma(double a, int d, double c);

// ---------------------------------------------------------------------------
// Landscape certification (M = I, one-hot latents, independent masks).
// ---------------------------------------------------------------------------

enum class LandscapeViolation { kNone, kNonnegativity, kOrthogonality, kNorm };
std::string_view to_string(LandscapeViolation v);

struct LandscapeVerdict {
  double loss = 0.0;
  double analytic_min = 0.0;
  bool is_global_min = false;
  LandscapeViolation violation = LandscapeViolation::kNone;
  double margin = 0.0;  // loss - analytic_min
  bool structure_ok = false;
  std::vector<std::pair<int, int>> negative_entries;
};

// Exact expectation of 2 - 2 <ReLU(W D1 e_j), ReLU(W D2 e_j)> over j and masks.
double ncl_one_hot_exact_loss(const Eigen::MatrixXd& W, double alpha);

LandscapeVerdict ncl_landscape_certify(const Eigen::MatrixXd& W, double alpha, int d,
                                       double tolerance = 1e-12);
LandscapeVerdict cl_landscape_certify(const Eigen::MatrixXd& W, double alpha, double tau, int d,
                                      double tolerance = 1e-12);

bool is_permutation_matrix(const Eigen::MatrixXd& W, double tol = 1e-12);

// ---------------------------------------------------------------------------
// Warm-start assumptions.
// ---------------------------------------------------------------------------

struct AssumptionCheck {
  bool pass = true;
  std::string branch;  // "online" or "target"
  int row = -1;
  int col = -1;
  double value = 0.0;
  double bound = 0.0;
  std::string detail;
};

struct AssumptionReport {
  AssumptionCheck latent;      // symmetric Bernoulli latent; configured, not inferred
  AssumptionCheck warm_start;  // |Delta_ij| < 1/(10d)
  AssumptionCheck small_noise;  // noise bound <= min |Delta_ij|
  AssumptionCheck bias;        // bias window
  double noise_bound = 0.0;

  bool all_pass() const { return latent.pass && warm_start.pass && small_noise.pass && bias.pass; }
  // Name and detail of the first failing assumption, or empty.
  std::string first_violation() const;
};

// High-probability bound on ||eps||_2 used for the noise checks.
double noise_norm_bound(double sigma0, int d);

AssumptionReport check_assumptions(const Eigen::MatrixXd& W_online,
                                   const Eigen::MatrixXd& W_target,
                                   const Eigen::VectorXd& bias_online,
                                   const Eigen::VectorXd& bias_target, double sigma0, int d);

// ---------------------------------------------------------------------------
// Exhaustive population losses for small problems.
// ---------------------------------------------------------------------------

struct EnumerationSetup {
  LatentSpec latent;
  MaskScheme mask_scheme = MaskScheme::kIndependent;
  double alpha = 0.5;
  std::uint64_t max_terms = 50'000'000;  // (latent, D1, D2, negatives) combinations
};

// Exact noiseless population loss. BN-free; for InfoNCE the negatives are
// neg_batch independent draws of (latent, mask) per anchor and are enumerated
// jointly. Throws EnumerationTooLargeError past max_terms.
double exact_loss_enumeration(const LossSpec& spec, const ModelParams& params,
                              const DictionaryMatrix& M, const EnumerationSetup& setup);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t samples = 0;
};

MonteCarloEstimate monte_carlo_loss(const LossSpec& spec, const ModelParams& params,
                                    const DictionaryMatrix& M, const EnumerationSetup& setup,
                                    std::int64_t samples, std::uint64_t seed);

}  // namespace ssl_lab

#endif  // SSL_LAB_ORACLES_HPP_
