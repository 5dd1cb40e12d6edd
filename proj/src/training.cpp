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

#include "noisybag/training.hpp"

#include <algorithm>
#include <cmath>

#include "noisybag/aggregation.hpp"
#include "noisybag/error.hpp"
#include "noisybag/rng.hpp"
#include "noisybag/sampling.hpp"
#include "text_util.hpp"

namespace noisybag {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kDropoutStream = 3;

bool improves(double candidate, double reference, double min_delta, Monitor monitor) {
  return monitor == Monitor::val_loss ? reference - candidate > min_delta : candidate - reference > min_delta;
}

bool strictly_better(double candidate, double reference, Monitor monitor) {
  return monitor == Monitor::val_loss ? candidate < reference : candidate > reference;
}

double monitored_value(const EpochRecord& r, Monitor monitor) {
  return monitor == Monitor::val_loss ? r.val_loss : r.val_accuracy;
}

}  // namespace

std::string_view to_string(Monitor monitor) { return monitor == Monitor::val_loss ? "val_loss" : "val_accuracy"; }

Monitor parse_monitor(std::string_view text) {
  if (text == "val_loss") return Monitor::val_loss;
  if (text == "val_accuracy") return Monitor::val_accuracy;
  throw Error(ErrorKind::validation, "monitor must be val_loss or val_accuracy");
}

std::string_view to_string(StopReason reason) {
  return reason == StopReason::early_stop ? "early_stop" : "max_epochs";
}

void validate(const TrainConfig& config) {
  validate(config.loss);
  validate(config.optim);
  if (config.batch_size < 1) throw Error(ErrorKind::validation, "batch_size must be >= 1");
  if (config.early_stop.patience < 1) throw Error(ErrorKind::validation, "patience must be >= 1");
  if (!(config.early_stop.min_delta >= 0.0)) throw Error(ErrorKind::validation, "min_delta must be >= 0");
  if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0))
    throw Error(ErrorKind::validation, "dropout_rate must lie in [0, 1)");
}

TrainConfig detection_profile() {
  TrainConfig c;
  c.loss = {LossKind::cross_entropy, 0.0};
  c.optim.kind = OptimKind::adam;
  c.optim.lr = 1e-3;
  c.optim.weight_decay = 1e-3;
  c.batch_size = 16;
  return c;
}

TrainConfig mutation_profile() {
  TrainConfig c;
  c.loss = {LossKind::smooth_cross_entropy, 0.2};
  c.optim.kind = OptimKind::sgd_momentum;
  c.optim.lr = 1e-3;
  c.optim.weight_decay = 1e-3;
  c.optim.momentum = 0.9;
  c.batch_size = 64;
  return c;
}

std::size_t best_index(const std::vector<double>& monitored, Monitor monitor) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < monitored.size(); ++i)
    if (strictly_better(monitored[i], monitored[best], monitor)) best = i;
  return best;
}

StopDecision early_stop_check(const std::vector<double>& monitored, std::size_t patience, double min_delta,
                              Monitor monitor) {
  if (monitored.empty()) return StopDecision::continue_training;
  double running_best = monitored[0];
  std::size_t last_improvement = 0;
  for (std::size_t i = 1; i < monitored.size(); ++i) {
    if (improves(monitored[i], running_best, min_delta, monitor)) last_improvement = i;
    if (strictly_better(monitored[i], running_best, monitor)) running_best = monitored[i];
  }
  return monitored.size() - 1 - last_improvement >= patience ? StopDecision::stop : StopDecision::continue_training;
}

std::uint64_t init_seed(const TrainConfig& config) { return derive_seed({config.seed, kInitStream}); }

DatasetScore score_dataset(const NetworkParams& params, const Dataset& dataset, const LossSpec& loss) {
  const auto logits = predict_logits(params, feature_matrix(dataset));
  const auto labels = cell_labels(dataset);
  const auto predicted = argmax_rows(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return {compute_loss(loss, logits, labels).loss,
          static_cast<double>(hits) / static_cast<double>(labels.size())};
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const std::vector<LayerSpec>& specs,
                  const TrainConfig& config) {
  validate(config);
  return train_from(train_set, val_set, init_params(specs, init_seed(config), config.dropout_rate), config);
}

TrainResult train_from(const Dataset& train_set, const Dataset& val_set, NetworkParams initial,
                       const TrainConfig& config) {
  validate(config);
  initial.dropout_rate = config.dropout_rate;
  validate(initial);
  if (train_set.label_space != val_set.label_space)
    throw Error(ErrorKind::label_space_mismatch, "training and validation sets use different label spaces");
  if (train_set.dim != val_set.dim)
    throw Error(ErrorKind::dimension_mismatch, "training and validation sets differ in feature dimension");
  if (val_set.cells.empty()) throw Error(ErrorKind::empty_validation, "validation set has no cells");
  if (train_set.cells.empty()) throw Error(ErrorKind::empty_evaluation, "training set has no cells");
  if (initial.input_dim() != train_set.dim)
    throw Error(ErrorKind::config, "network input dim " + std::to_string(initial.input_dim()) +
                                       " != dataset D " + std::to_string(train_set.dim));
  if (initial.output_dim() != train_set.num_classes())
    throw Error(ErrorKind::config, "network output dim " + std::to_string(initial.output_dim()) +
                                       " != dataset K " + std::to_string(train_set.num_classes()));

  std::vector<bool> frozen(initial.layers.size(), false);
  if (config.freeze_below_layer) {
    for (std::size_t l = 0; l < frozen.size() && l < *config.freeze_below_layer; ++l) frozen[l] = true;
  }

  const Matrix features = feature_matrix(train_set);
  const auto labels = cell_labels(train_set);
  const ProportionalBatchIterator batches(labels, train_set.num_classes(), config.batch_size,
                                          derive_seed({config.seed, kBatchStream}));

  TrainResult result{std::move(initial), {}};
  auto& params = result.params;
  auto& history = result.history;
  const auto monitor = config.early_stop.monitor;

  auto record = [&](std::size_t epoch) {
    const auto tr = score_dataset(params, train_set, config.loss);
    const auto va = score_dataset(params, val_set, config.loss);
    history.epochs.push_back({epoch, tr.loss, tr.accuracy, va.loss, va.accuracy});
  };

  record(0);
  NetworkParams best_params = params;
  std::vector<double> monitored{monitored_value(history.epochs[0], monitor)};
  OptimState state = OptimState::for_params(params);
  history.stop_reason = StopReason::max_epochs;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto plan = batches.epoch(epoch - 1);
    for (std::size_t b = 0; b < plan.size(); ++b) {
      const auto& rows = plan[b];
      Matrix x(rows.size(), features.cols());
      std::vector<ClassIndex> y(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(features.row(rows[i]).begin(), features.row(rows[i]).end(), x.row(i).begin());
        y[i] = labels[rows[i]];
      }
      const auto fwd = forward(params, x, Mode::train, derive_seed({config.seed, kDropoutStream, epoch, b}));
      const auto loss = compute_loss(config.loss, fwd.logits, y);
      if (!std::isfinite(loss.loss))
        throw Error(ErrorKind::numeric_input, "training loss diverged at epoch " + std::to_string(epoch));
      const auto grads = backward(params, fwd.trace, loss.grad);
      optimizer_step(params, grads, state, config.optim, frozen);
    }

    record(epoch);
    monitored.push_back(monitored_value(history.epochs.back(), monitor));
    if (best_index(monitored, monitor) == epoch) best_params = params;
    if (early_stop_check(monitored, config.early_stop.patience, config.early_stop.min_delta, monitor) ==
        StopDecision::stop) {
      history.stop_reason = StopReason::early_stop;
      break;
    }
  }

  history.best_epoch = best_index(monitored, monitor);
  params = std::move(best_params);
  return result;
}

InstanceEvaluation evaluate_instances(const NetworkParams& params, const Dataset& dataset) {
  if (dataset.dim != params.input_dim())
    throw Error(ErrorKind::dimension_mismatch, "dataset D " + std::to_string(dataset.dim) +
                                                   " != network input dim " + std::to_string(params.input_dim()));
  if (dataset.num_classes() != params.output_dim())
    throw Error(ErrorKind::dimension_mismatch, "dataset K " + std::to_string(dataset.num_classes()) +
                                                   " != network output dim " + std::to_string(params.output_dim()));
  InstanceEvaluation out;
  out.probabilities = softmax(predict_logits(params, feature_matrix(dataset)));
  out.predicted = argmax_rows(out.probabilities);
  out.report = compute_metrics(confusion_matrix(cell_labels(dataset), out.predicted, dataset.num_classes()));
  return out;
}

std::string history_to_csv(const TrainHistory& history) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& r : history.epochs) {
    out += std::to_string(r.epoch);
    for (double v : {r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy}) {
      out += ',';
      detail::append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

nlohmann::json history_summary(const TrainHistory& history) {
  const auto& best = history.epochs.at(history.best_epoch);
  const auto& last = history.epochs.back();
  auto metrics = [](const EpochRecord& r) {
    return nlohmann::json{{"epoch", r.epoch},
                          {"train_loss", round6(r.train_loss)},
                          {"train_acc", round6(r.train_accuracy)},
                          {"val_loss", round6(r.val_loss)},
                          {"val_acc", round6(r.val_accuracy)}};
  };
  return {{"best_epoch", history.best_epoch},
          {"stop_reason", std::string(to_string(history.stop_reason))},
          {"epochs_recorded", history.epochs.size()},
          {"best", metrics(best)},
          {"final", metrics(last)}};
}

}  // namespace noisybag
