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

#include "noisybag/error.hpp"

namespace noisybag {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation error";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::infeasible_split: return "infeasible split";
    case ErrorKind::label_space_mismatch: return "label-space mismatch";
    case ErrorKind::dimension_mismatch: return "dimension mismatch";
    case ErrorKind::io: return "I/O error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::malformed_header: return "malformed header";
    case ErrorKind::arity: return "row arity mismatch";
    case ErrorKind::dangling_reference: return "dangling reference";
    case ErrorKind::non_finite_value: return "non-finite value";
    case ErrorKind::label: return "label error";
    case ErrorKind::empty_bag: return "empty bag";
    case ErrorKind::empty_evaluation: return "empty evaluation";
    case ErrorKind::empty_validation: return "empty validation set";
    case ErrorKind::numeric_input: return "numeric input error";
    case ErrorKind::consistency: return "consistency error";
    case ErrorKind::gradient_check: return "gradient check failed";
  }
  return "error";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation:
    case ErrorKind::config:
    case ErrorKind::infeasible_split:
    case ErrorKind::label_space_mismatch:
    case ErrorKind::dimension_mismatch:
      return 2;
    case ErrorKind::io:
    case ErrorKind::parse:
    case ErrorKind::malformed_header:
    case ErrorKind::arity:
    case ErrorKind::dangling_reference:
    case ErrorKind::non_finite_value:
    case ErrorKind::label:
    case ErrorKind::empty_bag:
    case ErrorKind::empty_evaluation:
    case ErrorKind::empty_validation:
      return 3;
    case ErrorKind::numeric_input:
    case ErrorKind::consistency:
    case ErrorKind::gradient_check:
      return 4;
  }
  return 1;
}

}  // namespace noisybag
