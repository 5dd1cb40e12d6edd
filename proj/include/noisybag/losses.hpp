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

#include <string_view>
#include <vector>

#include "noisybag/data_model.hpp"
#include "noisybag/matrix.hpp"

namespace noisybag {

enum class LossKind { cross_entropy, smooth_cross_entropy };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

struct LossSpec {
  LossKind kind = LossKind::smooth_cross_entropy;
  /// Smoothing mass; ignored for plain cross-entropy.
  double epsilon = 0.2;

  /// Effective smoothing: 0 for cross_entropy.
  double smoothing() const { return kind == LossKind::cross_entropy ? 0.0 : epsilon; }
};

void validate(const LossSpec& spec);

struct LossResult {
  double loss = 0.0;
  /// dLoss/dLogits, same shape as the logits.
  Matrix grad;
};

/// Label-smoothed cross-entropy, averaged over the batch:
///   q_k = (1 - eps) [k == y] + eps / K
///   loss = -sum_k q_k log softmax(z)_k
///   dloss/dz = (softmax(z) - q) / batch
LossResult smooth_cross_entropy(const Matrix& logits, const std::vector<ClassIndex>& targets,
                                double epsilon);

/// The eps = 0 case.
LossResult cross_entropy(const Matrix& logits, const std::vector<ClassIndex>& targets);

LossResult compute_loss(const LossSpec& spec, const Matrix& logits,
                        const std::vector<ClassIndex>& targets);

}  // namespace noisybag
