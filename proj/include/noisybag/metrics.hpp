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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisybag/data_model.hpp"

namespace noisybag {

/// K x K counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(std::size_t k = 0) : num_classes(k), counts(k * k, 0) {}
  static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows);

  std::uint64_t& at(std::size_t truth, std::size_t predicted) { return counts[truth * num_classes + predicted]; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts[truth * num_classes + predicted];
  }
  std::uint64_t total() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion_matrix(const std::vector<ClassIndex>& truth, const std::vector<ClassIndex>& predicted,
                                 std::size_t num_classes);

struct EvalReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  double macro_f1 = 0.0;
  /// True where the rate was 0/0 and is reported as 0.
  std::vector<bool> precision_undefined;
  std::vector<bool> recall_undefined;

  /// Human-readable list such as "precision_undefined:1".
  std::vector<std::string> flags() const;
};

/// accuracy = trace / total; precision_k = c_kk / column_k; recall_k = c_kk /
/// row_k; F1 the harmonic mean (0 when both are 0); macro_f1 the unweighted
/// mean over all classes.
EvalReport compute_metrics(const ConfusionMatrix& confusion);

/// Confusion as nested arrays, rates rounded to 6 decimal places, undefined
/// rates listed under "flags".
nlohmann::json to_json(const EvalReport& report, const std::vector<std::string>& class_names = {});

/// Rounds to 6 decimal places for reporting.
double round6(double value);

}  // namespace noisybag
