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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "noisybag/data_model.hpp"
#include "noisybag/losses.hpp"
#include "noisybag/matrix.hpp"
#include "noisybag/rng.hpp"

namespace noisybag {

enum class Activation { relu, none };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view text);

struct LayerSpec {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  Activation activation = Activation::relu;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Hidden relu layers followed by a linear head: dims {D, h1, ..., K}.
std::vector<LayerSpec> mlp_specs(const std::vector<std::size_t>& dims);

struct Layer {
  LayerSpec spec;
  Matrix weights;  // out_dim x in_dim
  std::vector<double> bias;

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct NetworkParams {
  std::vector<Layer> layers;
  /// Applied to the input of the last layer (the classification head) in
  /// train mode. Networks with a single layer have no feature extractor and
  /// therefore no dropout.
  double dropout_rate = 0.3;

  std::size_t input_dim() const { return layers.front().spec.in_dim; }
  std::size_t output_dim() const { return layers.back().spec.out_dim; }
  std::vector<LayerSpec> specs() const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Parameter-shaped buffers: gradients, optimizer moments.
struct ParamBuffers {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  static ParamBuffers zeros_like(const NetworkParams& params);
  bool matches(const NetworkParams& params) const;

  friend bool operator==(const ParamBuffers&, const ParamBuffers&) = default;
};

using Gradients = ParamBuffers;

/// Checks dims >= 1, consecutive compatibility and dropout range.
void validate(const std::vector<LayerSpec>& specs);
void validate(const NetworkParams& params);

/// Weights ~ N(0, 2 / in_dim), biases zero.
NetworkParams init_params(const std::vector<LayerSpec>& specs, std::uint64_t seed,
                          double dropout_rate = 0.3);

enum class Mode { train, eval };

struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> activations;
  /// Per-unit dropout scale (0 or 1/(1-rate)) on the head input; empty when no
  /// dropout was applied.
  Matrix dropout_scale;
};

struct ForwardResult {
  Matrix logits;
  ForwardTrace trace;
};

/// Batched forward pass. `seed` drives the dropout masks in train mode and is
/// ignored in eval mode.
ForwardResult forward(const NetworkParams& params, const Matrix& batch, Mode mode,
                      std::uint64_t seed = 0);

/// Eval-mode logits without keeping a trace.
Matrix predict_logits(const NetworkParams& params, const Matrix& batch);

/// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

/// Backpropagates dLoss/dLogits through the recorded trace.
Gradients backward(const NetworkParams& params, const ForwardTrace& trace, const Matrix& grad_logits);

/// Mean loss and its parameter gradient for one batch (eval mode).
struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
};
LossAndGradients loss_and_gradients(const NetworkParams& params, const Matrix& batch,
                                    const std::vector<ClassIndex>& targets, const LossSpec& loss);

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t parameters_checked = 0;
  std::size_t rejected_draws = 0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  std::size_t batch_size = 5;
  LossSpec loss{};
  double step = 1e-5;
  /// Inputs are redrawn while any relu pre-activation is closer than this to 0.
  double kink_margin = 1e-4;
  /// Lower bound on the denominator of the relative error.
  double relative_floor = 1e-3;
};

/// Relative error between two gradient entries.
double gradient_relative_error(double analytic, double numeric, double floor);

/// Compares `analytic` against central differences of the eval-mode loss on
/// (batch, targets), parameter by parameter.
GradCheckReport compare_with_finite_differences(const NetworkParams& params, const Matrix& batch,
                                                const std::vector<ClassIndex>& targets,
                                                const Gradients& analytic, double tolerance,
                                                const GradCheckOptions& options = {});

/// Random network, random batch and targets; analytic vs numeric gradients.
GradCheckReport grad_check(const std::vector<LayerSpec>& specs, std::uint64_t seed, double tolerance,
                           const GradCheckOptions& options = {});

/// Draws a batch with every relu pre-activation at least `margin` away from 0.
/// Returns the number of rejected draws through `rejected`.
Matrix draw_kink_free_batch(const NetworkParams& params, std::size_t rows, double margin, Rng& rng,
                            std::size_t& rejected);

/// Checkpoint text: `LAYERS=<n> DROPOUT=<rate>`, then per layer a line
/// `L<i> <in> <out> <activation>`, a line of row-major weights and a line of
/// biases (space separated, shortest round-trip decimals).
std::string to_text(const NetworkParams& params);
NetworkParams params_from_text(std::string_view text);
void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace noisybag
