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

#ifndef SSL_LAB_DATA_HPP_
#define SSL_LAB_DATA_HPP_

#include <cstdint>
#include <string_view>

#include <Eigen/Core>

#include "ssl_lab/rng.hpp"

namespace ssl_lab {

/// Column-orthonormal ground-truth dictionary (p x d, p >= d).
///
/// The only way to obtain one is through `generate_dictionary` or
/// `DictionaryMatrix::from_entries`, both of which verify orthonormality.
class DictionaryMatrix {
 public:
  static constexpr double kOrthonormalityTolerance = 1e-10;

  static DictionaryMatrix from_entries(Eigen::MatrixXd entries);

  const Eigen::MatrixXd& entries() const { return entries_; }
  Eigen::Index p() const { return entries_.rows(); }
  Eigen::Index d() const { return entries_.cols(); }

  // max |M^T M - I| over all entries.
  double orthonormality_error() const;

 private:
  explicit DictionaryMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {}
  Eigen::MatrixXd entries_;
};

enum class DictionaryMode { kQrGaussian, kIdentity };

DictionaryMatrix generate_dictionary(Eigen::Index p, Eigen::Index d, DictionaryMode mode,
                                     std::uint64_t seed);
DictionaryMatrix generate_dictionary(Eigen::Index p, Eigen::Index d, DictionaryMode mode,
                                     Rng& rng);

enum class LatentKind { kOneHot, kZeroOne, kSymmetric };

struct LatentSpec {
  LatentKind kind = LatentKind::kSymmetric;
  Eigen::Index d = 10;
  // Pr(z_i != 0). Ignored for one-hot latents.
  double sparsity = 0.1;
  bool reject_all_zero = true;

  void validate() const;
};

inline constexpr long kMaxLatentRejections = 1'000'000;

// Entries in {0,1}, {-1,0,1} or one-hot depending on the spec.
using LatentVector = Eigen::VectorXd;

LatentVector sample_latent(const LatentSpec& spec, Rng& rng);

struct Observation {
  Eigen::VectorXd x;
  LatentVector z;
  double noise_sigma = 0.0;
};

Observation sample_observation(const DictionaryMatrix& M, const LatentVector& z, double sigma0,
                               Rng& rng);

// sigma0 = log(d) / d, the default observation noise standard deviation.
double default_noise_sigma(Eigen::Index d);

enum class MaskScheme { kIndependent, kDependent };

struct MaskPair {
  Eigen::VectorXd d1;
  Eigen::VectorXd d2;
  MaskScheme scheme = MaskScheme::kIndependent;
  double alpha = 0.5;
};

MaskPair sample_mask_pair(MaskScheme scheme, double alpha, Eigen::Index p, Rng& rng);

struct ViewPair {
  Eigen::VectorXd a1;
  Eigen::VectorXd a2;
};

// Independent masks give (D1 x, D2 x); dependent masks give (2 D1 x, 2 D2 x)
// with D2 = I - D1.
ViewPair apply_mask(const MaskPair& pair, const Eigen::VectorXd& x);

// Batched variant: views of every column of X under a fresh mask pair per column.
struct ViewBatchPair {
  Eigen::MatrixXd a1;
  Eigen::MatrixXd a2;
};
ViewBatchPair sample_views(const Eigen::MatrixXd& X, MaskScheme scheme, double alpha, Rng& rng);
Eigen::MatrixXd sample_single_views(const Eigen::MatrixXd& X, MaskScheme scheme, double alpha,
                                    Rng& rng);

/// A fixed synthetic dataset; column n of X is generated from column n of Z.
struct Dataset {
  Eigen::MatrixXd X;  // p x n
  Eigen::MatrixXd Z;  // d x n
  double noise_sigma = 0.0;

  Eigen::Index size() const { return X.cols(); }
};

Dataset generate_dataset(const DictionaryMatrix& M, const LatentSpec& spec, double sigma0,
                         Eigen::Index n, Rng& latent_rng, Rng& noise_rng);

LatentKind parse_latent_kind(std::string_view name);
MaskScheme parse_mask_scheme(std::string_view name);
std::string_view to_string(LatentKind kind);
std::string_view to_string(MaskScheme scheme);

}  // namespace ssl_lab

#endif  // SSL_LAB_DATA_HPP_
