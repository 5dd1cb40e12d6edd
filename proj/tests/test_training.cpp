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

#include <cmath>
#include <numeric>

#include <doctest.h>

#include "helpers.hpp"
#include "noisybag/losses.hpp"
#include "noisybag/optim.hpp"
#include "noisybag/rng.hpp"
#include "noisybag/sampling.hpp"
#include "noisybag/training.hpp"

using namespace noisybag;

namespace {

std::pair<Dataset, Dataset> separable_split(double separation, double stddev, std::uint64_t seed, std::size_t k = 2) {
  SyntheticSpec s;
  s.num_classes = k;
  s.dim = 4;
  s.patients_per_class = 6;
  s.cells_per_patient_min = 20;
  s.cells_per_patient_max = 30;
  s.class_center_separation = separation;
  s.within_class_stddev = stddev;
  s.seed = seed;
  const auto parts = stratified_split(generate_synthetic(s), {{0.8, 0.2}, StratifyKey::cell_label, seed + 1});
  return {parts[0], parts[1]};
}

TrainConfig quick_config(std::size_t epochs) {
  auto c = mutation_profile();
  c.loss = {LossKind::cross_entropy, 0.0};
  c.optim.lr = 0.01;
  c.batch_size = 16;
  c.max_epochs = epochs;
  c.seed = 3;
  return c;
}

std::vector<double> arithmetic(double start, double step, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = start + step * static_cast<double>(i);
  return v;
}

}  // namespace

TEST_CASE("early stop: steady large improvement never stops") {
  const auto series = arithmetic(30.0, -0.1, 200);
  for (std::size_t n = 1; n <= series.size(); ++n) {
    const std::vector<double> prefix(series.begin(), series.begin() + static_cast<long>(n));
    REQUIRE(early_stop_check(prefix, 50, 0.02, Monitor::val_loss) == StopDecision::continue_training);
  }
}

TEST_CASE("early stop: sub-delta improvement stops at the 50th epoch") {
  const auto series = arithmetic(5.0, -0.01, 51);
  for (std::size_t n = 1; n <= 50; ++n) {
    const std::vector<double> prefix(series.begin(), series.begin() + static_cast<long>(n));
    REQUIRE(early_stop_check(prefix, 50, 0.02, Monitor::val_loss) == StopDecision::continue_training);
  }
  CHECK(early_stop_check(series, 50, 0.02, Monitor::val_loss) == StopDecision::stop);
  CHECK(best_index(series, Monitor::val_loss) == 50);
}

TEST_CASE("early stop: patience 1 stops right after a non-improving epoch") {
  CHECK(early_stop_check({1.0, 0.5}, 1, 0.02, Monitor::val_loss) == StopDecision::continue_training);
  CHECK(early_stop_check({1.0, 0.5, 0.6}, 1, 0.02, Monitor::val_loss) == StopDecision::stop);
  CHECK(early_stop_check({1.0, 1.0}, 1, 0.0, Monitor::val_loss) == StopDecision::stop);
  CHECK(early_stop_check({0.5, 0.9}, 1, 0.02, Monitor::val_accuracy) == StopDecision::continue_training);
  CHECK(early_stop_check({0.5, 0.9, 0.91}, 1, 0.02, Monitor::val_accuracy) == StopDecision::stop);
  CHECK(early_stop_check({0.5}, 1, 0.02, Monitor::val_loss) == StopDecision::continue_training);
}

TEST_CASE("early stop: a large improvement resets the counter") {
  auto series = arithmetic(5.0, 0.0, 40);
  series.push_back(4.0);
  for (int i = 0; i < 49; ++i) series.push_back(4.1);
  CHECK(early_stop_check(series, 50, 0.02, Monitor::val_loss) == StopDecision::continue_training);
  series.push_back(4.1);
  CHECK(early_stop_check(series, 50, 0.02, Monitor::val_loss) == StopDecision::stop);
  CHECK(best_index(series, Monitor::val_loss) == 40);
}

TEST_CASE("max_epochs = 0 returns the initial parameters") {
  const auto [tr, va] = separable_split(6, 1, 1);
  auto c = quick_config(0);
  const auto specs = mlp_specs({4, 8, 2});
  const auto result = train(tr, va, specs, c);
  CHECK(result.history.epochs.size() == 1);
  CHECK(result.history.best_epoch == 0);
  auto expected = init_params(specs, init_seed(c), c.dropout_rate);
  CHECK(result.params == expected);
}

TEST_CASE("separable data reaches 99% validation accuracy in 50 epochs") {
  const auto [tr, va] = separable_split(10, 1, 2);
  auto c = quick_config(50);
  c.loss = {LossKind::smooth_cross_entropy, 0.2};
  c.optim.lr = 1e-3;  // mutation profile defaults
  c.batch_size = 64;
  const auto result = train(tr, va, mlp_specs({4, 64, 32, 2}), c);
  CHECK(result.history.epochs[result.history.best_epoch].val_accuracy >= 0.99);
  CHECK(evaluate_instances(result.params, va).report.accuracy >= 0.99);
}

TEST_CASE("training is deterministic per seed") {
  const auto [tr, va] = separable_split(4, 1, 3, 4);
  const auto c = quick_config(15);
  const auto a = train(tr, va, mlp_specs({4, 16, 4}), c);
  const auto b = train(tr, va, mlp_specs({4, 16, 4}), c);
  CHECK(a.history == b.history);
  CHECK(a.params == b.params);
  auto d = c;
  d.seed = 4;
  CHECK_FALSE(train(tr, va, mlp_specs({4, 16, 4}), d).history == a.history);
}

TEST_CASE("frozen layers stay bit-identical") {
  const auto [tr, va] = separable_split(4, 1, 4, 4);
  auto c = quick_config(10);
  c.freeze_below_layer = 2;
  const auto specs = mlp_specs({4, 8, 8, 4});
  const auto init = init_params(specs, init_seed(c), c.dropout_rate);
  const auto result = train(tr, va, specs, c);
  CHECK(result.params.layers[0] == init.layers[0]);
  CHECK(result.params.layers[1] == init.layers[1]);
  CHECK_FALSE(result.params.layers[2] == init.layers[2]);
}

TEST_CASE("returned parameters reproduce the best epoch exactly") {
  for (auto monitor : {Monitor::val_loss, Monitor::val_accuracy}) {
    const auto [tr, va] = separable_split(3, 1, 5, 4);
    auto c = quick_config(40);
    c.early_stop = {5, 0.02, monitor};
    const auto result = train(tr, va, mlp_specs({4, 16, 4}), c);
    const auto& best = result.history.epochs.at(result.history.best_epoch);
    const auto score = score_dataset(result.params, va, c.loss);
    CHECK(score.loss == best.val_loss);
    CHECK(score.accuracy == best.val_accuracy);
    const auto train_score = score_dataset(result.params, tr, c.loss);
    CHECK(train_score.loss == best.train_loss);
  }
}

TEST_CASE("history length bounds") {
  Rng rng(6);
  for (int trial = 0; trial < 6; ++trial) {
    const auto [tr, va] = separable_split(1 + 4 * rng.uniform(), 1, rng.next_u64(), 2);
    auto c = quick_config(5 + rng.below(40));
    c.early_stop.patience = 1 + rng.below(6);
    c.early_stop.min_delta = 0.02 * rng.uniform();
    c.seed = rng.next_u64();
    const auto h = train(tr, va, mlp_specs({4, 8, 2}), c).history;
    CHECK(h.epochs.size() <= c.max_epochs + 1);
    CHECK(h.best_epoch < h.epochs.size());
    if (h.stop_reason == StopReason::early_stop)
      CHECK(h.epochs.size() <= h.best_epoch + c.early_stop.patience + 1);
    else
      CHECK(h.epochs.size() == c.max_epochs + 1);
    for (std::size_t e = 0; e < h.epochs.size(); ++e) CHECK(h.epochs[e].epoch == e);
  }
}

TEST_CASE("one small step decreases the batch loss") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = init_params(mlp_specs({5, 12, 8, 3}), rng.next_u64(), 0.0);
    Matrix x(16, 5);
    for (auto& v : x.values()) v = rng.normal();
    std::vector<ClassIndex> y(16);
    for (auto& v : y) v = rng.below(3);
    const LossSpec loss{LossKind::smooth_cross_entropy, 0.2};
    const auto before = loss_and_gradients(p, x, y, loss);
    OptimSpec spec;
    spec.lr = 1e-4;
    spec.weight_decay = 0;
    spec.momentum = 0;
    auto state = OptimState::for_params(p);
    optimizer_step(p, before.gradients, state, spec);
    CHECK(loss_and_gradients(p, x, y, loss).loss < before.loss);
  }
}

TEST_CASE("evaluate_instances: constant classifier and ties") {
  const auto ds = testing::cells_dataset({0, 1, 1, 0, 1, 1, 1, 0}, 2);
  const auto favor0 = testing::linear_net({{0.0}, {0.0}}, {5.0, -5.0});
  auto eval = evaluate_instances(favor0, ds);
  CHECK(eval.predicted == std::vector<ClassIndex>(8, 0));
  CHECK(eval.report.accuracy == 3.0 / 8.0);
  const auto tie = testing::linear_net({{0.0}, {0.0}}, {0.0, 0.0});
  eval = evaluate_instances(tie, ds);
  CHECK(eval.predicted == std::vector<ClassIndex>(8, 0));
  CHECK(eval.probabilities(0, 0) == 0.5);
  CHECK_ERROR_KIND(evaluate_instances(testing::linear_net({{0.0, 1.0}, {0.0, 1.0}}, {0, 0}), ds),
                   ErrorKind::dimension_mismatch);
}

TEST_CASE("evaluate_instances: degenerate data is classified perfectly after training") {
  const auto [tr, va] = separable_split(6, 1e-9, 8, 4);
  auto c = quick_config(30);
  const auto result = train(tr, va, mlp_specs({4, 16, 4}), c);
  CHECK(evaluate_instances(result.params, va).report.accuracy == 1.0);
  CHECK(evaluate_instances(result.params, tr).report.accuracy == 1.0);
}

TEST_CASE("training preconditions") {
  const auto [tr, va] = separable_split(6, 1, 9);
  const auto c = quick_config(1);
  auto other = va;
  other.label_space = LabelSpace::generic(2);
  CHECK_ERROR_KIND(train(tr, other, mlp_specs({4, 8, 2}), c), ErrorKind::label_space_mismatch);
  Dataset empty = va;
  empty.cells.clear();
  empty.bags.clear();
  CHECK_ERROR_KIND(train(tr, empty, mlp_specs({4, 8, 2}), c), ErrorKind::empty_validation);
  CHECK_ERROR_KIND(train(tr, va, mlp_specs({4, 8, 3}), c), ErrorKind::config);
  CHECK_ERROR_KIND(train(tr, va, mlp_specs({5, 8, 2}), c), ErrorKind::config);
  auto bad = c;
  bad.early_stop.patience = 0;
  CHECK_ERROR_KIND(train(tr, va, mlp_specs({4, 8, 2}), bad), ErrorKind::validation);
  bad = c;
  bad.batch_size = 0;
  CHECK_ERROR_KIND(train(tr, va, mlp_specs({4, 8, 2}), bad), ErrorKind::validation);
}

TEST_CASE("task profiles") {
  const auto d = detection_profile();
  CHECK(d.optim.kind == OptimKind::adam);
  CHECK(d.batch_size == 16);
  CHECK(d.loss.smoothing() == 0.0);
  const auto m = mutation_profile();
  CHECK(m.optim.kind == OptimKind::sgd_momentum);
  CHECK(m.optim.momentum == 0.9);
  CHECK(m.batch_size == 64);
  CHECK(m.loss.smoothing() == 0.2);
  for (const auto& c : {d, m}) {
    CHECK(c.optim.lr == 1e-3);
    CHECK(c.optim.weight_decay == 1e-3);
    CHECK(c.early_stop.patience == 50);
    CHECK(c.early_stop.min_delta == 0.02);
    CHECK(c.dropout_rate == 0.3);
  }
}

TEST_CASE("history serialization") {
  TrainHistory h;
  h.epochs = {{0, 1.5, 0.25, 1.25, 0.5}, {1, 0.1, 1, 0.2, 0.75}};
  h.best_epoch = 1;
  CHECK(history_to_csv(h) == "epoch,train_loss,train_acc,val_loss,val_acc\n0,1.5,0.25,1.25,0.5\n1,0.1,1,0.2,0.75\n");
  const auto j = history_summary(h);
  CHECK(j["best_epoch"] == 1);
  CHECK(j["stop_reason"] == "max_epochs");
  CHECK(j["final"]["val_acc"] == 0.75);
}
