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

#include "ssl_lab/data.hpp"

#include <cmath>
#include <string>

#include <Eigen/QR>

#include "ssl_lab/errors.hpp"

namespace ssl_lab {

DictionaryMatrix DictionaryMatrix::from_entries(Eigen::MatrixXd entries) {
  if (entries.rows() < entries.cols()) {
    throw DimensionError("dictionary needs p >= d, got p=" + std::to_string(entries.rows()) +
                         " d=" + std::to_string(entries.cols()));
  }
  DictionaryMatrix M(std::move(entries));
  const double err = M.orthonormality_error();
  if (!(err <= kOrthonormalityTolerance)) {
    throw ParameterError("dictionary columns are not orthonormal (max |M^T M - I| = " +
                         std::to_string(err) + ")");
  }
  return M;
}

double DictionaryMatrix::orthonormality_error() const {
  const Eigen::MatrixXd gram = entries_.transpose() * entries_;
  return (gram - Eigen::MatrixXd::Identity(d(), d())).cwiseAbs().maxCoeff();
}

DictionaryMatrix generate_dictionary(Eigen::Index p, Eigen::Index d, DictionaryMode mode,
                                     Rng& rng) {
  if (d <= 0 || p < d) {
    throw DimensionError("generate_dictionary requires p >= d > 0, got p=" + std::to_string(p) +
                         " d=" + std::to_string(d));
  }
  if (mode == DictionaryMode::kIdentity) {
    if (p != d) throw DimensionError("identity dictionary requires p == d");
    return DictionaryMatrix::from_entries(Eigen::MatrixXd::Identity(p, d));
  }
  const Eigen::MatrixXd G = standard_normal(p, d, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(p, d);
  // Fix the QR sign ambiguity: make diag(R) positive.
  const Eigen::MatrixXd& packed = qr.matrixQR();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (packed(j, j) < 0.0) Q.col(j) *= -1.0;
  }
  return DictionaryMatrix::from_entries(std::move(Q));
}

DictionaryMatrix generate_dictionary(Eigen::Index p, Eigen::Index d, DictionaryMode mode,
                                     std::uint64_t seed) {
  Rng rng = make_stream(seed, Stream::kDictionary);
  return generate_dictionary(p, d, mode, rng);
}

void LatentSpec::validate() const {
  if (d <= 0) throw DimensionError("latent dimension must be positive");
  if (kind == LatentKind::kOneHot) return;
  if (!(sparsity > 0.0 && sparsity <= 1.0)) {
    throw ParameterError("latent sparsity must lie in (0, 1], got " + std::to_string(sparsity));
  }
}

LatentVector sample_latent(const LatentSpec& spec, Rng& rng) {
  spec.validate();
  LatentVector z = LatentVector::Zero(spec.d);
  if (spec.kind == LatentKind::kOneHot) {
    std::uniform_int_distribution<Eigen::Index> pick(0, spec.d - 1);
    z(pick(rng)) = 1.0;
    return z;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (long attempt = 0; attempt < kMaxLatentRejections; ++attempt) {
    bool any = false;
    for (Eigen::Index i = 0; i < spec.d; ++i) {
      const double u = unif(rng);
      if (u < spec.sparsity) {
        any = true;
        if (spec.kind == LatentKind::kZeroOne) {
          z(i) = 1.0;
        } else {
          // The two signs split the nonzero mass evenly.
          z(i) = (u < 0.5 * spec.sparsity) ? -1.0 : 1.0;
        }
      } else {
        z(i) = 0.0;
      }
    }
    if (any || !spec.reject_all_zero) return z;
  }
  throw ParameterError("sample_latent: exceeded rejection budget drawing a nonzero latent");
}

Observation sample_observation(const DictionaryMatrix& M, const LatentVector& z, double sigma0,
                               Rng& rng) {
  if (z.size() != M.d()) throw DimensionError("latent length does not match dictionary d");
  if (!(sigma0 >= 0.0)) throw ParameterError("noise sigma must be nonnegative");
  Observation obs;
  obs.z = z;
  obs.noise_sigma = sigma0;
  obs.x = M.entries() * z;
  if (sigma0 > 0.0) obs.x += sigma0 * standard_normal(M.p(), 1, rng).col(0);
  return obs;
}

double default_noise_sigma(Eigen::Index d) {
  return std::log(static_cast<double>(d)) / static_cast<double>(d);
}

MaskPair sample_mask_pair(MaskScheme scheme, double alpha, Eigen::Index p, Rng& rng) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("mask alpha must lie in [0, 1]");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MaskPair pair;
  pair.scheme = scheme;
  pair.alpha = alpha;
  pair.d1.resize(p);
  pair.d2.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) pair.d1(k) = unif(rng) < alpha ? 1.0 : 0.0;
  if (scheme == MaskScheme::kDependent) {
    pair.d2 = Eigen::VectorXd::Ones(p) - pair.d1;
  } else {
    for (Eigen::Index k = 0; k < p; ++k) pair.d2(k) = unif(rng) < alpha ? 1.0 : 0.0;
  }
  return pair;
}

ViewPair apply_mask(const MaskPair& pair, const Eigen::VectorXd& x) {
  if (pair.d1.size() != x.size() || pair.d2.size() != x.size()) {
    throw DimensionError("apply_mask: mask length does not match observation length");
  }
  const double scale = pair.scheme == MaskScheme::kDependent ? 2.0 : 1.0;
  return {scale * pair.d1.cwiseProduct(x), scale * pair.d2.cwiseProduct(x)};
}

ViewBatchPair sample_views(const Eigen::MatrixXd& X, MaskScheme scheme, double alpha, Rng& rng) {
  ViewBatchPair out{Eigen::MatrixXd(X.rows(), X.cols()), Eigen::MatrixXd(X.rows(), X.cols())};
  for (Eigen::Index n = 0; n < X.cols(); ++n) {
    const MaskPair pair = sample_mask_pair(scheme, alpha, X.rows(), rng);
    ViewPair v = apply_mask(pair, X.col(n));
    out.a1.col(n) = v.a1;
    out.a2.col(n) = v.a2;
  }
  return out;
}

Eigen::MatrixXd sample_single_views(const Eigen::MatrixXd& X, MaskScheme scheme, double alpha,
                                    Rng& rng) {
  Eigen::MatrixXd out(X.rows(), X.cols());
  for (Eigen::Index n = 0; n < X.cols(); ++n) {
    const MaskPair pair = sample_mask_pair(scheme, alpha, X.rows(), rng);
    out.col(n) = apply_mask(pair, X.col(n)).a1;
  }
  return out;
}

Dataset generate_dataset(const DictionaryMatrix& M, const LatentSpec& spec, double sigma0,
                         Eigen::Index n, Rng& latent_rng, Rng& noise_rng) {
  if (spec.d != M.d()) throw DimensionError("latent spec d does not match dictionary");
  Dataset data;
  data.noise_sigma = sigma0;
  data.X.resize(M.p(), n);
  data.Z.resize(M.d(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const LatentVector z = sample_latent(spec, latent_rng);
    const Observation obs = sample_observation(M, z, sigma0, noise_rng);
    data.Z.col(i) = z;
    data.X.col(i) = obs.x;
  }
  return data;
}

LatentKind parse_latent_kind(std::string_view name) {
  if (name == "one_hot") return LatentKind::kOneHot;
  if (name == "zero_one") return LatentKind::kZeroOne;
  if (name == "symmetric") return LatentKind::kSymmetric;
  throw ParameterError("unknown latent kind '" + std::string(name) + "'");
}

MaskScheme parse_mask_scheme(std::string_view name) {
  if (name == "independent") return MaskScheme::kIndependent;
  if (name == "dependent") return MaskScheme::kDependent;
  throw ParameterError("unknown mask scheme '" + std::string(name) + "'");
}

std::string_view to_string(LatentKind kind) {
  switch (kind) {
    case LatentKind::kOneHot: return "one_hot";
    case LatentKind::kZeroOne: return "zero_one";
    case LatentKind::kSymmetric: return "symmetric";
  }
  return "?";
}

std::string_view to_string(MaskScheme scheme) {
  return scheme == MaskScheme::kDependent ? "dependent" : "independent";
}

}  // namespace ssl_lab
