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

#include "noisybag/pipeline.hpp"

#include <set>

#include "noisybag/error.hpp"
#include "text_util.hpp"

namespace noisybag {

namespace {

constexpr ClassIndex kCancerous = 1;

void check_models(const NetworkParams& detection, const NetworkParams& mutation, const Dataset& dataset) {
  if (detection.input_dim() != dataset.dim)
    throw Error(ErrorKind::dimension_mismatch, "detection model expects " + std::to_string(detection.input_dim()) +
                                                   " features, dataset has " + std::to_string(dataset.dim));
  if (detection.output_dim() != 2)
    throw Error(ErrorKind::dimension_mismatch, "detection model must have 2 outputs");
  if (mutation.input_dim() != dataset.dim)
    throw Error(ErrorKind::dimension_mismatch, "mutation model expects " + std::to_string(mutation.input_dim()) +
                                                   " features, dataset has " + std::to_string(dataset.dim));
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& v, const std::vector<std::size_t>& rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

std::vector<CellDecision> cell_decisions(const std::vector<ClassIndex>& predicted) {
  std::vector<CellDecision> out;
  out.reserve(predicted.size());
  for (auto p : predicted) out.push_back(p == kCancerous ? CellDecision::cancerous : CellDecision::non_cancerous);
  return out;
}

}  // namespace

std::vector<PatientOutcome> end_to_end_pipeline(const NetworkParams& detection, const NetworkParams& mutation,
                                                const Dataset& dataset, const AggregationOptions& options) {
  check_models(detection, mutation, dataset);
  const Matrix features = feature_matrix(dataset);
  const auto stage1 = argmax_rows(predict_logits(detection, features));
  const auto bags = bag_cell_positions(dataset);

  std::vector<PatientOutcome> out;
  out.reserve(bags.size());
  for (std::size_t b = 0; b < bags.size(); ++b) {
    const auto patient = dataset.bags[b].patient_id;
    PatientOutcome outcome;
    outcome.decision = patient_threshold(cell_decisions(gather(stage1, bags[b])), options.threshold, patient);
    if (outcome.decision.decision == CellDecision::cancerous) {
      std::vector<std::size_t> blasts;
      for (auto r : bags[b])
        if (stage1[r] == kCancerous) blasts.push_back(r);
      outcome.stage2_cells = blasts.size();
      if (!blasts.empty()) {
        const auto probs = softmax(predict_logits(mutation, gather_rows(features, blasts)));
        outcome.vote = majority_vote(argmax_rows(probs), probs, options.vote_rule, patient);
      }
    }
    out.push_back(std::move(outcome));
  }
  return out;
}

BagEvaluation evaluate_bags(const NetworkParams& params, const Dataset& dataset, VoteRule rule) {
  const auto inst = evaluate_instances(params, dataset);
  const auto bags = bag_cell_positions(dataset);
  BagEvaluation out;
  std::vector<ClassIndex> truth;
  std::vector<ClassIndex> predicted;
  for (std::size_t b = 0; b < bags.size(); ++b) {
    out.votes.push_back(majority_vote(gather(inst.predicted, bags[b]), gather_rows(inst.probabilities, bags[b]),
                                      rule, dataset.bags[b].patient_id));
    truth.push_back(dataset.bags[b].bag_label);
    predicted.push_back(out.votes.back().predicted_class);
  }
  out.report = compute_metrics(confusion_matrix(truth, predicted, dataset.num_classes()));
  return out;
}

EvalReport evaluate_patient_detection(const NetworkParams& detection, const Dataset& dataset, double threshold) {
  if (dataset.num_classes() != 2)
    throw Error(ErrorKind::label_space_mismatch, "patient detection needs a binary dataset");
  const auto inst = evaluate_instances(detection, dataset);
  const auto bags = bag_cell_positions(dataset);
  std::vector<ClassIndex> truth;
  std::vector<ClassIndex> predicted;
  for (std::size_t b = 0; b < bags.size(); ++b) {
    const auto d = patient_threshold(cell_decisions(gather(inst.predicted, bags[b])), threshold,
                                     dataset.bags[b].patient_id);
    truth.push_back(dataset.bags[b].bag_label);
    predicted.push_back(d.decision == CellDecision::cancerous ? 1 : 0);
  }
  return compute_metrics(confusion_matrix(truth, predicted, 2));
}

nlohmann::json pipeline_report(const NetworkParams& detection, const NetworkParams& mutation,
                               const Dataset& detection_eval, const Dataset& mutation_eval,
                               const AggregationOptions& options) {
  const auto& det_names = detection_eval.label_space.names;
  const auto& mut_names = mutation_eval.label_space.names;

  nlohmann::json report;
  report["aggregation"] = {{"threshold", options.threshold},
                           {"vote_rule", std::string(to_string(options.vote_rule))}};
  report["detection"] = {
      {"instance", to_json(evaluate_instances(detection, detection_eval).report, det_names)},
      {"patient", to_json(evaluate_patient_detection(detection, detection_eval, options.threshold), det_names)},
  };
  report["mutation"] = {
      {"instance", to_json(evaluate_instances(mutation, mutation_eval).report, mut_names)},
      {"bag", to_json(evaluate_bags(mutation, mutation_eval, options.vote_rule).report, mut_names)},
  };

  const auto outcomes = end_to_end_pipeline(detection, mutation, mutation_eval, options);
  nlohmann::json patients = nlohmann::json::array();
  std::size_t decided_cancerous = 0;
  std::size_t correct_calls = 0;
  std::vector<ClassIndex> called_truth;
  std::vector<ClassIndex> called_pred;
  for (std::size_t b = 0; b < outcomes.size(); ++b) {
    const auto& o = outcomes[b];
    const auto truth = mutation_eval.bags[b].bag_label;
    const bool cancerous = o.decision.decision == CellDecision::cancerous;
    decided_cancerous += cancerous ? 1 : 0;
    nlohmann::json p{{"patient_id", o.decision.patient_id},
                     {"cancer_fraction", round6(o.decision.cancer_fraction)},
                     {"decision", cancerous ? "cancerous" : "non_cancerous"},
                     {"stage2_cells", o.stage2_cells},
                     {"true_mutation", mut_names.at(truth)}};
    if (auto m = o.mutation_class()) {
      p["mutation"] = mut_names.at(*m);
      called_truth.push_back(truth);
      called_pred.push_back(*m);
      correct_calls += *m == truth ? 1 : 0;
    } else {
      p["mutation"] = nullptr;
    }
    patients.push_back(std::move(p));
  }
  const auto n = static_cast<double>(outcomes.size());
  nlohmann::json e2e{{"patients", std::move(patients)},
                     {"decided_cancerous_fraction", n > 0 ? round6(decided_cancerous / n) : 0.0},
                     {"mutation_accuracy", n > 0 ? round6(correct_calls / n) : 0.0}};
  e2e["called_report"] = called_truth.empty()
                             ? nlohmann::json(nullptr)
                             : to_json(compute_metrics(confusion_matrix(called_truth, called_pred, mut_names.size())),
                                       mut_names);
  report["end_to_end"] = std::move(e2e);
  return report;
}

ExperimentConfig default_experiment() {
  ExperimentConfig c;
  c.generate = CohortSpec{};
  c.detection.split = {0.8, 0.2};
  c.detection.stratify = StratifyKey::cell_label;
  c.detection.train = detection_profile();
  c.mutation.split = {0.72, 0.18, 0.10};
  c.mutation.stratify = StratifyKey::bag_label;
  c.mutation.train = mutation_profile();
  return c;
}

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::config, where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw Error(ErrorKind::config, "unknown key '" + where + "." + it.key() + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::config, "bad value for '" + where + "." + key + "'");
  }
}

template <typename Parse, typename T>
void read_enum(const json& j, const char* key, T& out, const std::string& where, Parse parse) {
  if (!j.contains(key)) return;
  std::string text;
  read(j, key, text, where);
  try {
    out = parse(text);
  } catch (const Error& e) {
    throw Error(ErrorKind::config, where + "." + key + ": " + e.what());
  }
}

StageConfig stage_from_json(const json& j, StageConfig base, const std::string& where) {
  reject_unknown(j, {"split", "stratify", "hidden", "train"}, where);
  read(j, "split", base.split, where);
  read_enum(j, "stratify", base.stratify, where, parse_stratify_key);
  read(j, "hidden", base.hidden, where);
  if (j.contains("train")) base.train = train_config_from_json(j.at("train"), base.train);
  return base;
}

json stage_to_json(const StageConfig& s) {
  return {{"split", s.split},
          {"stratify", std::string(to_string(s.stratify))},
          {"hidden", s.hidden},
          {"train", to_json(s.train)}};
}

}  // namespace

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  const std::string where = "train";
  reject_unknown(j,
                 {"loss", "epsilon", "optimizer", "lr", "weight_decay", "momentum", "beta1", "beta2", "eps_hat",
                  "batch_size", "max_epochs", "patience", "min_delta", "monitor", "freeze_below_layer", "dropout"},
                 where);
  read_enum(j, "loss", c.loss.kind, where, parse_loss_kind);
  read(j, "epsilon", c.loss.epsilon, where);
  read_enum(j, "optimizer", c.optim.kind, where, parse_optim_kind);
  read(j, "lr", c.optim.lr, where);
  read(j, "weight_decay", c.optim.weight_decay, where);
  read(j, "momentum", c.optim.momentum, where);
  read(j, "beta1", c.optim.beta1, where);
  read(j, "beta2", c.optim.beta2, where);
  read(j, "eps_hat", c.optim.eps_hat, where);
  read(j, "batch_size", c.batch_size, where);
  read(j, "max_epochs", c.max_epochs, where);
  read(j, "patience", c.early_stop.patience, where);
  read(j, "min_delta", c.early_stop.min_delta, where);
  read_enum(j, "monitor", c.early_stop.monitor, where, parse_monitor);
  if (j.contains("freeze_below_layer")) {
    if (j.at("freeze_below_layer").is_null())
      c.freeze_below_layer.reset();
    else {
      std::size_t v = 0;
      read(j, "freeze_below_layer", v, where);
      c.freeze_below_layer = v;
    }
  }
  read(j, "dropout", c.dropout_rate, where);
  try {
    validate(c);
  } catch (const Error& e) {
    throw Error(ErrorKind::config, e.what());
  }
  return c;
}

json to_json(const TrainConfig& c) {
  json j{{"loss", std::string(to_string(c.loss.kind))},
         {"epsilon", c.loss.epsilon},
         {"optimizer", std::string(to_string(c.optim.kind))},
         {"lr", c.optim.lr},
         {"weight_decay", c.optim.weight_decay},
         {"momentum", c.optim.momentum},
         {"beta1", c.optim.beta1},
         {"beta2", c.optim.beta2},
         {"eps_hat", c.optim.eps_hat},
         {"batch_size", c.batch_size},
         {"max_epochs", c.max_epochs},
         {"patience", c.early_stop.patience},
         {"min_delta", c.early_stop.min_delta},
         {"monitor", std::string(to_string(c.early_stop.monitor))},
         {"dropout", c.dropout_rate}};
  j["freeze_below_layer"] = c.freeze_below_layer ? json(*c.freeze_below_layer) : json(nullptr);
  return j;
}

CohortSpec cohort_from_json(const json& j, CohortSpec s) {
  const std::string where = "data.generate";
  reject_unknown(j,
                 {"dim", "healthy_patients", "leukemic_patients", "patients_per_mutation", "cells_per_patient_min",
                  "cells_per_patient_max", "blast_fraction_min", "blast_fraction_max", "class_center_separation",
                  "within_class_stddev", "seed"},
                 where);
  read(j, "dim", s.dim, where);
  read(j, "healthy_patients", s.healthy_patients, where);
  read(j, "leukemic_patients", s.leukemic_patients, where);
  read(j, "patients_per_mutation", s.patients_per_mutation, where);
  read(j, "cells_per_patient_min", s.cells_per_patient_min, where);
  read(j, "cells_per_patient_max", s.cells_per_patient_max, where);
  read(j, "blast_fraction_min", s.blast_fraction_min, where);
  read(j, "blast_fraction_max", s.blast_fraction_max, where);
  read(j, "class_center_separation", s.class_center_separation, where);
  read(j, "within_class_stddev", s.within_class_stddev, where);
  read(j, "seed", s.seed, where);
  return s;
}

json to_json(const CohortSpec& s) {
  return {{"dim", s.dim},
          {"healthy_patients", s.healthy_patients},
          {"leukemic_patients", s.leukemic_patients},
          {"patients_per_mutation", s.patients_per_mutation},
          {"cells_per_patient_min", s.cells_per_patient_min},
          {"cells_per_patient_max", s.cells_per_patient_max},
          {"blast_fraction_min", s.blast_fraction_min},
          {"blast_fraction_max", s.blast_fraction_max},
          {"class_center_separation", s.class_center_separation},
          {"within_class_stddev", s.within_class_stddev},
          {"seed", s.seed}};
}

SyntheticSpec synthetic_from_json(const json& j, SyntheticSpec s) {
  const std::string where = "data.synthetic";
  reject_unknown(j,
                 {"num_classes", "dim", "patients_per_class", "cells_per_patient_min", "cells_per_patient_max",
                  "class_center_separation", "within_class_stddev", "seed"},
                 where);
  read(j, "num_classes", s.num_classes, where);
  read(j, "dim", s.dim, where);
  read(j, "patients_per_class", s.patients_per_class, where);
  read(j, "cells_per_patient_min", s.cells_per_patient_min, where);
  read(j, "cells_per_patient_max", s.cells_per_patient_max, where);
  read(j, "class_center_separation", s.class_center_separation, where);
  read(j, "within_class_stddev", s.within_class_stddev, where);
  read(j, "seed", s.seed, where);
  return s;
}

json to_json(const SyntheticSpec& s) {
  return {{"num_classes", s.num_classes},
          {"dim", s.dim},
          {"patients_per_class", s.patients_per_class},
          {"cells_per_patient_min", s.cells_per_patient_min},
          {"cells_per_patient_max", s.cells_per_patient_max},
          {"class_center_separation", s.class_center_separation},
          {"within_class_stddev", s.within_class_stddev},
          {"seed", s.seed}};
}

ExperimentConfig experiment_from_json(const json& j, ExperimentConfig c) {
  reject_unknown(j, {"seed", "data", "detection", "mutation", "noise_rate", "noise_sweep", "aggregation"}, "config");
  read(j, "seed", c.seed, "config");
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, {"generate", "synthetic", "detection", "mutation"}, "data");
    if (d.contains("synthetic")) c.synthetic = synthetic_from_json(d.at("synthetic"), c.synthetic.value_or(SyntheticSpec{}));
    const bool gen = d.contains("generate");
    const bool load = d.contains("detection") || d.contains("mutation");
    if (gen && load)
      throw Error(ErrorKind::config, "data: give exactly one of 'generate' or 'detection'+'mutation' paths");
    if (gen) {
      c.generate = cohort_from_json(d.at("generate"), c.generate.value_or(CohortSpec{}));
      c.detection_data.reset();
      c.mutation_data.reset();
    } else if (load) {
      if (!d.contains("detection") || !d.contains("mutation"))
        throw Error(ErrorKind::config, "data: both 'detection' and 'mutation' paths are required");
      std::string det, mut;
      read(d, "detection", det, "data");
      read(d, "mutation", mut, "data");
      c.detection_data = det;
      c.mutation_data = mut;
      c.generate.reset();
    }
  }
  if (j.contains("detection")) c.detection = stage_from_json(j.at("detection"), c.detection, "detection");
  if (j.contains("mutation")) c.mutation = stage_from_json(j.at("mutation"), c.mutation, "mutation");
  read(j, "noise_rate", c.noise_rate, "config");
  read(j, "noise_sweep", c.noise_sweep, "config");
  if (j.contains("aggregation")) {
    const auto& a = j.at("aggregation");
    reject_unknown(a, {"threshold", "vote_rule"}, "aggregation");
    read(a, "threshold", c.aggregation.threshold, "aggregation");
    read_enum(a, "vote_rule", c.aggregation.vote_rule, "aggregation", parse_vote_rule);
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json data;
  if (c.generate) data["generate"] = to_json(*c.generate);
  if (c.synthetic) data["synthetic"] = to_json(*c.synthetic);
  if (c.detection_data) data["detection"] = c.detection_data->string();
  if (c.mutation_data) data["mutation"] = c.mutation_data->string();
  return {{"seed", c.seed},
          {"data", data},
          {"detection", stage_to_json(c.detection)},
          {"mutation", stage_to_json(c.mutation)},
          {"noise_rate", c.noise_rate},
          {"noise_sweep", c.noise_sweep},
          {"aggregation",
           {{"threshold", c.aggregation.threshold}, {"vote_rule", std::string(to_string(c.aggregation.vote_rule))}}}};
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

nlohmann::json run_pipeline(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const auto seeds = PipelineSeeds::from(config.seed);

  Dataset detection_data;
  Dataset mutation_data;
  if (config.generate) {
    auto spec = *config.generate;
    spec.seed = seeds.generate;
    auto cohort = generate_cohort(spec);
    detection_data = std::move(cohort.detection);
    mutation_data = std::move(cohort.mutation);
  } else {
    if (!config.detection_data || !config.mutation_data)
      throw Error(ErrorKind::config, "no data source configured");
    detection_data = load_dataset(*config.detection_data);
    mutation_data = load_dataset(*config.mutation_data);
  }
  if (detection_data.num_classes() != 2)
    throw Error(ErrorKind::label_space_mismatch, "detection data must be binary");
  if (detection_data.dim != mutation_data.dim)
    throw Error(ErrorKind::dimension_mismatch, "detection and mutation data differ in feature dimension");
  save_dataset(detection_data, out_dir / "detection.txt");
  save_dataset(mutation_data, out_dir / "mutation.txt");

  const auto det_parts =
      stratified_split(detection_data, {config.detection.split, config.detection.stratify, seeds.detection_split});
  const auto mut_parts =
      stratified_split(mutation_data, {config.mutation.split, config.mutation.stratify, seeds.mutation_split});
  if (det_parts.size() < 2) throw Error(ErrorKind::config, "detection.split needs train and validation parts");
  if (mut_parts.size() < 3) throw Error(ErrorKind::config, "mutation.split needs train, validation and test parts");
  for (std::size_t i = 0; i < det_parts.size(); ++i)
    save_dataset(det_parts[i], out_dir / ("detection_part" + std::to_string(i) + ".txt"));
  for (std::size_t i = 0; i < mut_parts.size(); ++i)
    save_dataset(mut_parts[i], out_dir / ("mutation_part" + std::to_string(i) + ".txt"));

  const auto noisy = inject_noise(mut_parts[0], {config.noise_rate, seeds.noise});
  save_dataset(noisy.dataset, out_dir / "mutation_train_noisy.txt");
  save_flip_mask(noisy.dataset, noisy.flip_mask, out_dir / "flip_mask.txt");

  auto det_train = config.detection.train;
  det_train.seed = seeds.detection_train;
  auto det_dims = config.detection.hidden;
  det_dims.insert(det_dims.begin(), detection_data.dim);
  det_dims.push_back(detection_data.num_classes());
  const auto det = train(det_parts[0], det_parts[1], mlp_specs(det_dims), det_train);

  auto mut_train = config.mutation.train;
  mut_train.seed = seeds.mutation_train;
  auto mut_dims = config.mutation.hidden;
  mut_dims.insert(mut_dims.begin(), mutation_data.dim);
  mut_dims.push_back(mutation_data.num_classes());
  const auto mut = train(noisy.dataset, mut_parts[1], mlp_specs(mut_dims), mut_train);

  save_checkpoint(det.params, out_dir / "detection.ckpt");
  save_checkpoint(mut.params, out_dir / "mutation.ckpt");
  detail::write_file(out_dir / "detection_history.csv", history_to_csv(det.history));
  detail::write_file(out_dir / "mutation_history.csv", history_to_csv(mut.history));
  detail::write_file(out_dir / "training_summary.json",
                     dump_json({{"detection", history_summary(det.history)},
                                {"mutation", history_summary(mut.history)}}));

  const auto report = pipeline_report(det.params, mut.params, det_parts[1], mut_parts[2], config.aggregation);
  detail::write_file(out_dir / "report.json", dump_json(report));

  if (!config.noise_sweep.empty()) {
    std::string csv = "noise_rate,epsilon,instance_accuracy,bag_accuracy\n";
    for (double rate : config.noise_sweep) {
      const auto swept = inject_noise(mut_parts[0], {rate, seeds.noise});
      const auto model = train(swept.dataset, mut_parts[1], mlp_specs(mut_dims), mut_train);
      const auto inst = evaluate_instances(model.params, mut_parts[2]);
      const auto bag = evaluate_bags(model.params, mut_parts[2], config.aggregation.vote_rule);
      for (double v : {rate, mut_train.loss.smoothing(), inst.report.accuracy, bag.report.accuracy}) {
        detail::append_double(csv, v);
        csv += ',';
      }
      csv.back() = '\n';
    }
    detail::write_file(out_dir / "noise_sweep.csv", csv);
  }
  return report;
}

}  // namespace noisybag
