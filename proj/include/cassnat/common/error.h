// Copyright 2026 The cassnat Authors. All Rights Reserved.
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

#ifndef CASSNAT_COMMON_ERROR_H_
#define CASSNAT_COMMON_ERROR_H_

#include <stdexcept>
#include <string>

namespace cassnat {

// Error classes map onto the CLI exit codes (see ExitCode()).
enum class ErrorKind {
  kUsage,       // bad arguments, bad configuration
  kIo,          // missing / unreadable / corrupt files
  kInfeasible,  // data that cannot be aligned or decoded
  kShape,       // tensor shape contract violated
  kNumeric,     // NaN / Inf encountered
  kState,       // API misuse, e.g. backward twice
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// 1 usage, 2 io, 3 infeasible data, 4 internal (numeric / state / shape).
int ExitCode(ErrorKind kind);

[[noreturn]] void Fail(ErrorKind kind, const std::string& what);

#define CASSNAT_CHECK(cond, kind, msg)          \
  do {                                          \
    if (!(cond)) ::cassnat::Fail((kind), (msg)); \
  } while (0)

}  // namespace cassnat

#endif  // CASSNAT_COMMON_ERROR_H_
