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

#ifndef SSL_LAB_RNG_HPP_
#define SSL_LAB_RNG_HPP_

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace ssl_lab {

using Rng = std::mt19937_64;

// Logical randomness sources. Each gets its own stream derived from the
// master seed so that, e.g., changing the batch size never perturbs the
// dictionary or the dataset.
enum class Stream : std::uint64_t {
  kDictionary = 1,
  kLatents = 2,
  kNoise = 3,
  kMasks = 4,
  kInit = 5,
  kBatches = 6,
  kAux = 7,
};

Rng make_stream(std::uint64_t master_seed, Stream stream);

struct RngStreams {
  explicit RngStreams(std::uint64_t master_seed);

  std::uint64_t master_seed;
  Rng dictionary;
  Rng latents;
  Rng noise;
  Rng masks;
  Rng init;
  Rng batches;
  Rng aux;
};

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

}  // namespace ssl_lab

#endif  // SSL_LAB_RNG_HPP_
