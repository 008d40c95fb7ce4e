// Copyright 2026 The TDI-SPN Authors.
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tdi {

enum class ErrorKind {
  kParameter,    // non-finite or out-of-domain model parameter
  kShape,        // evidence / matrix dimension mismatch
  kStructure,    // circuit structure unsuitable for the requested operation
  kFormat,       // malformed file or text
  kValidation,   // circuit failed structural validation
  kConfig,       // invalid configuration values
  kNumeric,      // non-finite loss or gradient
  kUnderflow,    // all class likelihoods vanished
  kDegenerate,   // every Monte Carlo pass was degenerate
  kInternal,     // internal consistency violation
  kIo,           // missing or unreadable file
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tdi
