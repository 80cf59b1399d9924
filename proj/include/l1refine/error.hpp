//  Copyright 2026 The l1refine Authors. All Rights Reserved.
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace l1refine {

/// Broad failure class; the CLI maps each one to a stable exit code.
enum class ErrorKind {
  kArgument,   // bad parameters handed to an operation
  kData,       // malformed / empty / mismatched input data
  kNumerical,  // non-finite values or solver breakdown
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorKind::kData, w) {}
};

struct EmptyInputError : Error {
  explicit EmptyInputError(const std::string& w) : Error(ErrorKind::kData, w) {}
};

struct DegenerateVectorError : Error {
  explicit DegenerateVectorError(const std::string& w)
      : Error(ErrorKind::kData, w) {}
};

struct DimensionMismatchError : Error {
  explicit DimensionMismatchError(const std::string& w)
      : Error(ErrorKind::kData, w) {}
};

// Empty mutual dictionary, so there is nothing to fit.
struct RefinementImpossibleError : Error {
  explicit RefinementImpossibleError(const std::string& w)
      : Error(ErrorKind::kData, w) {}
};

struct TooFewValuesError : Error {
  explicit TooFewValuesError(const std::string& w)
      : Error(ErrorKind::kData, w) {}
};

struct InvalidArgumentError : Error {
  explicit InvalidArgumentError(const std::string& w)
      : Error(ErrorKind::kArgument, w) {}
};

struct PreconditionError : Error {
  explicit PreconditionError(const std::string& w)
      : Error(ErrorKind::kArgument, w) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& w)
      : Error(ErrorKind::kNumerical, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::kData, w) {}
};

}  // namespace l1refine
