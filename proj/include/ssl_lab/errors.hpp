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

#ifndef SSL_LAB_ERRORS_HPP_
#define SSL_LAB_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ssl_lab {

// Shapes of two operands disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A scalar parameter is outside its admissible range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Normalization of a zero (or numerically zero) vector was requested.
class DegenerateInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A theorem hypothesis (assumption, learning-rate bound, ...) does not hold.
class PreconditionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative procedure hit its iteration cap.
class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exhaustive enumeration would exceed the configured cost cap.
class EnumerationTooLargeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace ssl_lab

#endif  // SSL_LAB_ERRORS_HPP_
