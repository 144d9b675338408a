// Copyright 2026 The avse Authors
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

#ifndef AVSE_ERROR_HPP_
#define AVSE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace avse {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared, or a numerically degenerate input was given.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Misuse of an API contract (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid model/training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed file or unsupported on-disk format.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace avse

#endif  // AVSE_ERROR_HPP_
