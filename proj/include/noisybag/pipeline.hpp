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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisybag/aggregation.hpp"
#include "noisybag/data_model.hpp"
#include "noisybag/metrics.hpp"
#include "noisybag/nn.hpp"
#include "noisybag/sampling.hpp"
#include "noisybag/training.hpp"

namespace noisybag {

struct AggregationOptions {
  double threshold = kPatientThreshold;
  VoteRule vote_rule = VoteRule::count;
};

struct PatientOutcome {
  PatientDecision decision;
  /// Cells predicted cancerous by stage 1 and handed to stage 2.
  std::size_t stage2_cells = 0;
  /// Set only for patients decided cancerous with at least one stage-2 cell.
  std::optional<BagVote> vote;

  std::optional<ClassIndex> mutation_class() const {
    return vote ? std::optional<ClassIndex>(vote->predicted_class) : std::nullopt;
  }
};

/// Two-stage decision per bag of `dataset`. Stage 1 classifies every cell
/// with the detection model (class 1 = cancerous) and applies the patient
/// threshold. Stage 2 runs the mutation model and majority vote on the cells
/// predicted cancerous, for patients decided cancerous only. Cell and bag
/// labels of `dataset` are not read.
std::vector<PatientOutcome> end_to_end_pipeline(const NetworkParams& detection, const NetworkParams& mutation,
                                                const Dataset& dataset, const AggregationOptions& options = {});

struct BagEvaluation {
  std::vector<BagVote> votes;
  EvalReport report;
};

/// Majority vote over all cells of each bag, scored against bag labels.
BagEvaluation evaluate_bags(const NetworkParams& params, const Dataset& dataset, VoteRule rule = VoteRule::count);

/// Patient-level detection: threshold rule per bag against binary bag labels.
EvalReport evaluate_patient_detection(const NetworkParams& detection, const Dataset& dataset, double threshold);

/// Consolidated evaluation of both stages. `detection_eval` is a binary
/// dataset (cell and patient labels); `mutation_eval` a mutation dataset
/// scored at instance, bag and end-to-end level.
nlohmann::json pipeline_report(const NetworkParams& detection, const NetworkParams& mutation,
                               const Dataset& detection_eval, const Dataset& mutation_eval,
                               const AggregationOptions& options = {});

/// Per-stage settings of an experiment.
struct StageConfig {
  std::vector<double> split;
  StratifyKey stratify = StratifyKey::cell_label;
  std::vector<std::size_t> hidden{64, 32};
  TrainConfig train;
};

/// Experiment description. Exactly one data source for the pipeline: a cohort
/// spec to generate, or two dataset files to load. `synthetic` feeds the
/// single-dataset generator of the command-line tool.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::optional<CohortSpec> generate;
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::filesystem::path> detection_data;
  std::optional<std::filesystem::path> mutation_data;
  StageConfig detection;
  StageConfig mutation;
  double noise_rate = 0.2;
  std::vector<double> noise_sweep;
  AggregationOptions aggregation;
};

/// Defaults: generated cohort, 80/20 cell-stratified detection split,
/// 72/18/10 bag-stratified mutation split, 20% noise, both task profiles.
ExperimentConfig default_experiment();

/// Overlays `json` onto `base`. Unknown keys are rejected with the key name.
ExperimentConfig experiment_from_json(const nlohmann::json& json, ExperimentConfig base = default_experiment());
nlohmann::json to_json(const ExperimentConfig& config);

/// Applies the keys of `json` to a training config (profile defaults first).
TrainConfig train_config_from_json(const nlohmann::json& json, TrainConfig base);
nlohmann::json to_json(const TrainConfig& config);

SyntheticSpec synthetic_from_json(const nlohmann::json& json, SyntheticSpec base = {});
nlohmann::json to_json(const SyntheticSpec& spec);

CohortSpec cohort_from_json(const nlohmann::json& json, CohortSpec base = {});
nlohmann::json to_json(const CohortSpec& spec);

/// Seeds used by each step of run_pipeline, as offsets from the experiment
/// seed so the chain can be replayed with individual commands.
struct PipelineSeeds {
  std::uint64_t generate, detection_split, mutation_split, noise, detection_train, mutation_train;
  static PipelineSeeds from(std::uint64_t seed) {
    return {seed, seed + 1, seed + 2, seed + 3, seed + 4, seed + 5};
  }
};

/// Full workflow; writes every artifact into `out_dir` and returns the report
/// (also written as report.json).
nlohmann::json run_pipeline(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Deterministic JSON text (2-space indent, trailing newline).
std::string dump_json(const nlohmann::json& json);

}  // namespace noisybag
