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

#include "noisybag/metrics.hpp"

#include <cmath>

#include "noisybag/error.hpp"

namespace noisybag {

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
  ConfusionMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw Error(ErrorKind::validation, "confusion matrix must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) m.at(i, j) = rows[i][j];
  }
  return m;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

ConfusionMatrix confusion_matrix(const std::vector<ClassIndex>& truth, const std::vector<ClassIndex>& predicted,
                                 std::size_t num_classes) {
  if (truth.size() != predicted.size())
    throw Error(ErrorKind::consistency, "true and predicted label lists differ in length");
  ConfusionMatrix m(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes)
      throw Error(ErrorKind::label, "label out of range at position " + std::to_string(i));
    ++m.at(truth[i], predicted[i]);
  }
  return m;
}

EvalReport compute_metrics(const ConfusionMatrix& confusion) {
  const auto k = confusion.num_classes;
  if (confusion.counts.size() != k * k) throw Error(ErrorKind::validation, "confusion matrix must be square");
  const auto total = confusion.total();
  if (total == 0) throw Error(ErrorKind::empty_evaluation, "confusion matrix has no samples");

  EvalReport r;
  r.confusion = confusion;
  r.precision.assign(k, 0.0);
  r.recall.assign(k, 0.0);
  r.f1.assign(k, 0.0);
  r.precision_undefined.assign(k, false);
  r.recall_undefined.assign(k, false);

  std::uint64_t diagonal = 0;
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += confusion.at(c, j);
      col += confusion.at(j, c);
    }
    const auto hit = confusion.at(c, c);
    diagonal += hit;
    if (col == 0)
      r.precision_undefined[c] = true;
    else
      r.precision[c] = static_cast<double>(hit) / static_cast<double>(col);
    if (row == 0)
      r.recall_undefined[c] = true;
    else
      r.recall[c] = static_cast<double>(hit) / static_cast<double>(row);
    const double denom = r.precision[c] + r.recall[c];
    r.f1[c] = denom > 0.0 ? 2.0 * r.precision[c] * r.recall[c] / denom : 0.0;
    f1_sum += r.f1[c];
  }
  r.accuracy = static_cast<double>(diagonal) / static_cast<double>(total);
  r.macro_f1 = f1_sum / static_cast<double>(k);
  return r;
}

std::vector<std::string> EvalReport::flags() const {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < precision_undefined.size(); ++c)
    if (precision_undefined[c]) out.push_back("precision_undefined:" + std::to_string(c));
  for (std::size_t c = 0; c < recall_undefined.size(); ++c)
    if (recall_undefined[c]) out.push_back("recall_undefined:" + std::to_string(c));
  return out;
}

double round6(double value) { return std::round(value * 1e6) / 1e6; }

nlohmann::json to_json(const EvalReport& report, const std::vector<std::string>& class_names) {
  const auto k = report.confusion.num_classes;
  nlohmann::json confusion = nlohmann::json::array();
  for (std::size_t i = 0; i < k; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < k; ++j) row.push_back(report.confusion.at(i, j));
    confusion.push_back(std::move(row));
  }
  auto rounded = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(round6(x));
    return a;
  };
  nlohmann::json j{
      {"confusion", std::move(confusion)},
      {"accuracy", round6(report.accuracy)},
      {"precision", rounded(report.precision)},
      {"recall", rounded(report.recall)},
      {"f1", rounded(report.f1)},
      {"macro_f1", round6(report.macro_f1)},
      {"flags", report.flags()},
  };
  if (!class_names.empty()) j["classes"] = class_names;
  return j;
}

}  // namespace noisybag
