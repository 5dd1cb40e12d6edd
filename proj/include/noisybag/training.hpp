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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisybag/data_model.hpp"
#include "noisybag/losses.hpp"
#include "noisybag/metrics.hpp"
#include "noisybag/nn.hpp"
#include "noisybag/optim.hpp"

namespace noisybag {

enum class Monitor { val_loss, val_accuracy };

std::string_view to_string(Monitor monitor);
Monitor parse_monitor(std::string_view text);

struct EarlyStopPolicy {
  std::size_t patience = 50;
  double min_delta = 0.02;
  Monitor monitor = Monitor::val_loss;
};

struct TrainConfig {
  LossSpec loss{};
  OptimSpec optim{};
  std::size_t batch_size = 64;
  std::size_t max_epochs = 500;
  EarlyStopPolicy early_stop{};
  /// Layers with index below this value are not updated.
  std::optional<std::size_t> freeze_below_layer;
  double dropout_rate = 0.3;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

/// Binary cell detection: Adam lr 1e-3, wd 1e-3, batch 16, plain cross-entropy.
TrainConfig detection_profile();
/// Four-class mutation model: SGD lr 1e-3, wd 1e-3, momentum 0.9, batch 64,
/// smooth cross-entropy with eps 0.2.
TrainConfig mutation_profile();

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

enum class StopReason { early_stop, max_epochs };

std::string_view to_string(StopReason reason);

struct TrainHistory {
  /// Entry 0 is the evaluation before any update.
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  StopReason stop_reason = StopReason::max_epochs;

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

enum class StopDecision { continue_training, stop };

/// Early stopping on a monitored series (entry 0 = baseline epoch).
///
/// The running best is the best value seen so far. An epoch counts as an
/// improvement only when it beats the running best by strictly more than
/// min_delta; training stops once `patience` epochs have passed since the
/// last improvement. Smaller improvements still move the running best, so a
/// slow steady drift below min_delta per epoch does not reset the counter.
StopDecision early_stop_check(const std::vector<double>& monitored, std::size_t patience, double min_delta,
                              Monitor monitor);

/// Index of the best value (first on ties).
std::size_t best_index(const std::vector<double>& monitored, Monitor monitor);

struct TrainResult {
  NetworkParams params;
  TrainHistory history;
};

/// Seed used by train() for parameter initialisation.
std::uint64_t init_seed(const TrainConfig& config);

/// Minibatch training with class-proportional batches, per-epoch eval-mode
/// passes over both sets, early stopping and best-epoch restore.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const std::vector<LayerSpec>& specs,
                  const TrainConfig& config);

/// Same, starting from the given parameters (dropout rate taken from config).
TrainResult train_from(const Dataset& train_set, const Dataset& val_set, NetworkParams initial,
                       const TrainConfig& config);

struct DatasetScore {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Eval-mode loss and accuracy against the dataset's cell labels.
DatasetScore score_dataset(const NetworkParams& params, const Dataset& dataset, const LossSpec& loss);

struct InstanceEvaluation {
  std::vector<ClassIndex> predicted;
  Matrix probabilities;
  EvalReport report;
};

/// Eval-mode predictions (argmax, ties to the lowest class) and metrics.
InstanceEvaluation evaluate_instances(const NetworkParams& params, const Dataset& dataset);

std::string history_to_csv(const TrainHistory& history);
nlohmann::json history_summary(const TrainHistory& history);

}  // namespace noisybag
