// Copyright 2026 The zoqat Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ZOQAT_ERROR_H_
#define ZOQAT_ERROR_H_

#include <stdexcept>
#include <string>

namespace zoqat {

// Root of every error thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Bad configuration or arguments supplied by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Parameters that violate a type invariant (e.g. a non-positive step size).
class InvalidState : public Error {
 public:
  using Error::Error;
};

// Input data problems: unreadable corpus, malformed checkpoint, vocab mismatch.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses and other numeric breakdowns.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A verification check that ran to completion and failed.
class VerificationFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace zoqat

#endif  // ZOQAT_ERROR_H_
