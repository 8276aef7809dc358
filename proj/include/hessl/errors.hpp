// Copyright 2026 The hessl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HESSL_ERRORS_HPP
#define HESSL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hessl {

enum class ErrorKind {
  kInvalidInput,
  kIo,
  kInsufficientTissue,
  kDegenerateStain,
  kConditioning,
  kInvalidBasis,
  kBasisMismatch,
  kAnnotation,
  kConfiguration,
  kEvaluation,
  kNumericFault,
};

/// Every failure raised by the library carries a kind; the CLI maps kinds
/// onto stable exit codes (see exit_code()).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* kind_name(ErrorKind kind) noexcept;

/// 0 is success. 1 covers I/O, missing files and anything unclassified.
int exit_code(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace hessl

#endif  // HESSL_ERRORS_HPP
