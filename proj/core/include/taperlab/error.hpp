// Copyright 2026 The taperlab Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace taperlab {

// Broad failure classes. The command-line tool maps these onto its exit
// codes: config -> 2, input -> 3, divergence -> 4.
enum class ErrorKind {
  kConfig,      // invalid parameters, malformed config documents
  kInput,       // unreadable or malformed input data (WAV, manifests)
  kShape,       // mismatched lengths between cooperating objects
  kConstraint,  // a domain invariant would be violated (e.g. lambda <= 0)
  kNumeric,     // non-finite or non-positive values where forbidden
  kDivergence,  // training produced a non-finite loss
  kState,       // API misuse such as a stale backward cache
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define TAPERLAB_DEFINE_ERROR(Name, Kind)                         \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(Kind, what) {} \
  }

TAPERLAB_DEFINE_ERROR(ConfigError, ErrorKind::kConfig);
TAPERLAB_DEFINE_ERROR(InputError, ErrorKind::kInput);
TAPERLAB_DEFINE_ERROR(ShapeError, ErrorKind::kShape);
TAPERLAB_DEFINE_ERROR(ConstraintError, ErrorKind::kConstraint);
TAPERLAB_DEFINE_ERROR(NumericError, ErrorKind::kNumeric);
TAPERLAB_DEFINE_ERROR(DivergenceError, ErrorKind::kDivergence);
TAPERLAB_DEFINE_ERROR(StateError, ErrorKind::kState);

#undef TAPERLAB_DEFINE_ERROR

}  // namespace taperlab
