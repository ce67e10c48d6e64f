// Copyright 2026 The qanms Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace qanms {

/// Base of every error the library throws. The CLI maps subclasses onto
/// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or flag values (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be parsed or violates a record invariant (exit 3).
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// Feature/parameter dimensions disagree.
class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite values during scoring or training (exit 4).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace qanms
