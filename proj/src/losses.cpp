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

#include "noisybag/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "noisybag/error.hpp"

namespace noisybag {

std::string_view to_string(LossKind kind) {
  return kind == LossKind::cross_entropy ? "cross_entropy" : "smooth_cross_entropy";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "cross_entropy") return LossKind::cross_entropy;
  if (text == "smooth_cross_entropy") return LossKind::smooth_cross_entropy;
  throw Error(ErrorKind::validation, "loss kind must be cross_entropy or smooth_cross_entropy");
}

void validate(const LossSpec& spec) {
  if (!(spec.epsilon >= 0.0 && spec.epsilon < 1.0))
    throw Error(ErrorKind::validation, "loss epsilon must lie in [0, 1)");
}

LossResult smooth_cross_entropy(const Matrix& logits, const std::vector<ClassIndex>& targets,
                                double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0))
    throw Error(ErrorKind::validation, "loss epsilon must lie in [0, 1)");
  const auto n = logits.rows();
  const auto k = logits.cols();
  if (targets.size() != n) throw Error(ErrorKind::consistency, "targets and logits differ in batch size");
  if (n == 0) throw Error(ErrorKind::empty_evaluation, "loss over an empty batch");

  LossResult result{0.0, Matrix(n, k)};
  const double off = epsilon / static_cast<double>(k);
  const double on = 1.0 - epsilon + off;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = logits.row(i);
    const auto y = targets[i];
    if (y >= k)
      throw Error(ErrorKind::label, "target " + std::to_string(y) + " out of range for K=" + std::to_string(k));
    if (!std::all_of(row.begin(), row.end(), [](double z) { return std::isfinite(z); }))
      throw Error(ErrorKind::numeric_input, "non-finite logits");
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double z : row) sum += std::exp(z - m);
    const double log_sum = std::log(sum);
    double sample = 0.0;
    auto g = result.grad.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      const double log_p = row[c] - m - log_sum;
      const double q = c == y ? on : off;
      if (q != 0.0) sample -= q * log_p;
      g[c] = (std::exp(log_p) - q) * inv_n;
    }
    total += sample;
  }
  result.loss = total * inv_n;
  return result;
}

LossResult cross_entropy(const Matrix& logits, const std::vector<ClassIndex>& targets) {
  return smooth_cross_entropy(logits, targets, 0.0);
}

LossResult compute_loss(const LossSpec& spec, const Matrix& logits,
                        const std::vector<ClassIndex>& targets) {
  return smooth_cross_entropy(logits, targets, spec.smoothing());
}

}  // namespace noisybag
