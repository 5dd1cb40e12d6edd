// Copyright 2026 The noisybag Authors.
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

namespace noisybag {

/// Error categories. Each maps onto one of the CLI exit codes via exit_code().
enum class ErrorKind {
  // configuration (exit 2)
  validation,
  config,
  infeasible_split,
  label_space_mismatch,
  dimension_mismatch,
  // data (exit 3)
  io,
  parse,
  malformed_header,
  arity,
  dangling_reference,
  non_finite_value,
  label,
  empty_bag,
  empty_evaluation,
  empty_validation,
  // numeric (exit 4)
  numeric_input,
  consistency,
  gradient_check,
};

std::string_view to_string(ErrorKind kind);

/// CLI exit code for an error kind: 2 config, 3 data, 4 numeric.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace noisybag
