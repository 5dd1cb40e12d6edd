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

#include <cstdint>
#include <string_view>
#include <vector>

#include "noisybag/nn.hpp"

namespace noisybag {

enum class OptimKind { sgd_momentum, adam };

std::string_view to_string(OptimKind kind);
OptimKind parse_optim_kind(std::string_view text);

/// Weight decay is coupled (added to the gradient) for both optimizers.
struct OptimSpec {
  OptimKind kind = OptimKind::sgd_momentum;
  double lr = 1e-3;
  double weight_decay = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

void validate(const OptimSpec& spec);

struct OptimState {
  /// SGD velocity, or Adam first moment.
  ParamBuffers first;
  /// Adam second moment (unused by SGD).
  ParamBuffers second;
  std::uint64_t step = 0;

  static OptimState for_params(const NetworkParams& params);
};

/// g' = g + wd * p;  v <- momentum * v + g';  p <- p - lr * v
void sgd_momentum_step(NetworkParams& params, const Gradients& grads, OptimState& state,
                       const OptimSpec& spec, const std::vector<bool>& frozen = {});

/// Adam with bias correction on g' = g + wd * p.
void adam_step(NetworkParams& params, const Gradients& grads, OptimState& state, const OptimSpec& spec,
               const std::vector<bool>& frozen = {});

/// Dispatches on spec.kind. Layers flagged in `frozen` (by index) keep their
/// parameters and optimizer buffers unchanged.
void optimizer_step(NetworkParams& params, const Gradients& grads, OptimState& state, const OptimSpec& spec,
                    const std::vector<bool>& frozen = {});

}  // namespace noisybag
