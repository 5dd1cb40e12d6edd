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

// Command-line front end: gen, split, corrupt, train, eval, pipeline, gradcheck.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "noisybag/data_model.hpp"
#include "noisybag/error.hpp"
#include "noisybag/nn.hpp"
#include "noisybag/pipeline.hpp"
#include "noisybag/rng.hpp"
#include "noisybag/sampling.hpp"
#include "noisybag/training.hpp"

namespace fs = std::filesystem;
using namespace noisybag;

namespace {

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  CLI::Option* seed_flag = nullptr;
  std::string out = ".";
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(ErrorKind::io, "cannot write " + path.string());
}

ExperimentConfig load_config(const Globals& g) {
  auto config = default_experiment();
  if (!g.config_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(g.config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::config, g.config_path + ": " + e.what());
    }
    config = experiment_from_json(j, config);
  }
  if (g.seed_flag->count() > 0) config.seed = g.seed;
  return config;
}

void print_summary(const std::string& title, const Dataset& ds) {
  std::cout << title << ": K=" << ds.num_classes() << " (" << to_string(ds.label_space.kind) << ") D=" << ds.dim
            << " cells=" << ds.cells.size() << " bags=" << ds.bags.size() << "\n";
  const auto counts = class_counts(ds);
  std::vector<std::size_t> bag_counts(ds.num_classes(), 0);
  for (const auto& b : ds.bags) ++bag_counts[b.bag_label];
  for (std::size_t k = 0; k < counts.size(); ++k)
    std::cout << "  " << ds.label_space.names[k] << ": cells=" << counts[k] << " bags=" << bag_counts[k] << "\n";
  if (!ds.bags.empty()) {
    std::size_t lo = ds.bags.front().cell_ids.size(), hi = lo;
    for (const auto& b : ds.bags) {
      lo = std::min(lo, b.cell_ids.size());
      hi = std::max(hi, b.cell_ids.size());
    }
    std::cout << "  cells per bag: min=" << lo << " mean="
              << static_cast<double>(ds.cells.size()) / static_cast<double>(ds.bags.size()) << " max=" << hi << "\n";
  }
}

StageConfig& stage_of(ExperimentConfig& config, const std::string& name) {
  if (name == "detection") return config.detection;
  if (name == "mutation") return config.mutation;
  throw Error(ErrorKind::config, "stage must be detection or mutation, got '" + name + "'");
}

template <typename T>
void override_if(CLI::Option* opt, T& target, const T& value) {
  if (opt->count() > 0) target = value;
}

// ---- gen ------------------------------------------------------------------

struct GenArgs {
  std::size_t k = 0, d = 0, patients = 0, cells_min = 0, cells_max = 0;
  double separation = 0, stddev = 0;
  bool cohort = false;
  std::string file;
  CLI::Option *k_opt, *d_opt, *patients_opt, *min_opt, *max_opt, *sep_opt, *sd_opt;
};

void run_gen(const Globals& g, const GenArgs& a) {
  const auto config = load_config(g);
  if (a.cohort) {
    auto spec = config.generate.value_or(CohortSpec{});
    override_if(a.d_opt, spec.dim, a.d);
    override_if(a.min_opt, spec.cells_per_patient_min, a.cells_min);
    override_if(a.max_opt, spec.cells_per_patient_max, a.cells_max);
    override_if(a.sep_opt, spec.class_center_separation, a.separation);
    override_if(a.sd_opt, spec.within_class_stddev, a.stddev);
    override_if(a.patients_opt, spec.patients_per_mutation, a.patients);
    spec.seed = config.seed;
    const auto cohort = generate_cohort(spec);
    save_dataset(cohort.detection, fs::path(g.out) / "detection.txt");
    save_dataset(cohort.mutation, fs::path(g.out) / "mutation.txt");
    print_summary("detection", cohort.detection);
    print_summary("mutation", cohort.mutation);
    return;
  }
  auto spec = config.synthetic.value_or(SyntheticSpec{});
  override_if(a.k_opt, spec.num_classes, a.k);
  override_if(a.d_opt, spec.dim, a.d);
  override_if(a.patients_opt, spec.patients_per_class, a.patients);
  override_if(a.min_opt, spec.cells_per_patient_min, a.cells_min);
  override_if(a.max_opt, spec.cells_per_patient_max, a.cells_max);
  override_if(a.sep_opt, spec.class_center_separation, a.separation);
  override_if(a.sd_opt, spec.within_class_stddev, a.stddev);
  spec.seed = config.seed;
  const auto ds = generate_synthetic(spec);
  const fs::path path = a.file.empty() ? fs::path(g.out) / "dataset.txt" : fs::path(a.file);
  save_dataset(ds, path);
  print_summary(path.string(), ds);
}

// ---- split ----------------------------------------------------------------

struct SplitArgs {
  std::string data, stage, stratify;
  std::vector<double> fractions;
  CLI::Option *fractions_opt, *stratify_opt;
};

void run_split(const Globals& g, const SplitArgs& a) {
  auto config = load_config(g);
  SplitSpec spec;
  if (!a.stage.empty()) {
    const auto& stage = stage_of(config, a.stage);
    spec.fractions = stage.split;
    spec.stratify_key = stage.stratify;
  }
  override_if(a.fractions_opt, spec.fractions, a.fractions);
  if (a.stratify_opt->count() > 0) spec.stratify_key = parse_stratify_key(a.stratify);
  spec.seed = config.seed;
  const auto ds = load_dataset(a.data);
  const auto parts = stratified_split(ds, spec);
  const auto stem = fs::path(a.data).stem().string();
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto path = fs::path(g.out) / (stem + "_part" + std::to_string(i) + ".txt");
    save_dataset(parts[i], path);
    print_summary(path.string(), parts[i]);
  }
}

// ---- corrupt --------------------------------------------------------------

struct CorruptArgs {
  std::string data;
  double rate = 0;
  CLI::Option* rate_opt;
};

void run_corrupt(const Globals& g, const CorruptArgs& a) {
  auto config = load_config(g);
  NoiseSpec spec{config.noise_rate, config.seed};
  override_if(a.rate_opt, spec.rate, a.rate);
  const auto ds = load_dataset(a.data);
  const auto noisy = inject_noise(ds, spec);
  const auto stem = fs::path(a.data).stem().string();
  save_dataset(noisy.dataset, fs::path(g.out) / (stem + "_noisy.txt"));
  save_flip_mask(noisy.dataset, noisy.flip_mask, fs::path(g.out) / (stem + "_flip_mask.txt"));
  const auto flips = std::count(noisy.flip_mask.begin(), noisy.flip_mask.end(), true);
  std::cout << "flipped " << flips << " of " << ds.cells.size() << " labels (rate " << spec.rate << ")\n";
  print_summary(stem + "_noisy", noisy.dataset);
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string train, val, profile, name, init, loss, optimizer, monitor;
  std::vector<std::size_t> hidden, layers;
  std::size_t epochs = 0, batch = 0, patience = 0, freeze = 0;
  double lr = 0, wd = 0, momentum = 0, epsilon = 0, min_delta = 0, dropout = 0;
  CLI::Option *hidden_opt, *layers_opt, *epochs_opt, *batch_opt, *patience_opt, *freeze_opt, *lr_opt, *wd_opt,
      *momentum_opt, *epsilon_opt, *min_delta_opt, *dropout_opt, *loss_opt, *optimizer_opt, *monitor_opt;
};

void run_train(const Globals& g, const TrainArgs& a) {
  auto config = load_config(g);
  const auto train_set = load_dataset(a.train);
  const auto val_set = load_dataset(a.val);
  const std::string profile = a.profile.empty() ? (train_set.num_classes() == 2 ? "detection" : "mutation") : a.profile;
  const auto& stage = stage_of(config, profile);

  TrainConfig tc = stage.train;
  tc.seed = config.seed;
  override_if(a.epochs_opt, tc.max_epochs, a.epochs);
  override_if(a.batch_opt, tc.batch_size, a.batch);
  override_if(a.patience_opt, tc.early_stop.patience, a.patience);
  override_if(a.lr_opt, tc.optim.lr, a.lr);
  override_if(a.wd_opt, tc.optim.weight_decay, a.wd);
  override_if(a.momentum_opt, tc.optim.momentum, a.momentum);
  override_if(a.epsilon_opt, tc.loss.epsilon, a.epsilon);
  override_if(a.min_delta_opt, tc.early_stop.min_delta, a.min_delta);
  override_if(a.dropout_opt, tc.dropout_rate, a.dropout);
  if (a.freeze_opt->count() > 0) tc.freeze_below_layer = a.freeze;
  if (a.loss_opt->count() > 0) tc.loss.kind = parse_loss_kind(a.loss);
  if (a.optimizer_opt->count() > 0) tc.optim.kind = parse_optim_kind(a.optimizer);
  if (a.monitor_opt->count() > 0) tc.early_stop.monitor = parse_monitor(a.monitor);

  TrainResult result;
  if (!a.init.empty()) {
    result = train_from(train_set, val_set, load_checkpoint(a.init), tc);
  } else {
    std::vector<std::size_t> dims;
    if (a.layers_opt->count() > 0) {
      dims = a.layers;
    } else {
      dims = a.hidden_opt->count() > 0 ? a.hidden : stage.hidden;
      dims.insert(dims.begin(), train_set.dim);
      dims.push_back(train_set.num_classes());
    }
    result = train(train_set, val_set, mlp_specs(dims), tc);
  }

  const std::string name = a.name.empty() ? profile : a.name;
  const fs::path out(g.out);
  save_checkpoint(result.params, out / (name + ".ckpt"));
  write_text(out / (name + "_history.csv"), history_to_csv(result.history));
  const auto summary = history_summary(result.history);
  write_text(out / (name + "_summary.json"), dump_json(summary));
  std::cout << summary.dump() << "\n";
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string data, model, detection_model, mutation_model, detection_data, vote_rule;
  double threshold = 0;
  CLI::Option *threshold_opt, *vote_opt;
};

void run_eval(const Globals& g, const EvalArgs& a) {
  auto config = load_config(g);
  AggregationOptions agg = config.aggregation;
  override_if(a.threshold_opt, agg.threshold, a.threshold);
  if (a.vote_opt->count() > 0) agg.vote_rule = parse_vote_rule(a.vote_rule);
  const auto data = load_dataset(a.data);
  const fs::path out(g.out);

  if (!a.model.empty()) {
    const auto model = load_checkpoint(a.model);
    const auto inst = evaluate_instances(model, data);
    nlohmann::json report{{"instance", to_json(inst.report, data.label_space.names)},
                          {"bag", to_json(evaluate_bags(model, data, agg.vote_rule).report, data.label_space.names)}};
    if (data.num_classes() == 2)
      report["patient"] = to_json(evaluate_patient_detection(model, data, agg.threshold), data.label_space.names);
    write_text(out / "eval.json", dump_json(report));
    std::cout << "instance_accuracy " << round6(inst.report.accuracy) << "\n"
              << "bag_accuracy " << report["bag"]["accuracy"].get<double>() << "\n";
    return;
  }
  if (a.detection_model.empty() || a.mutation_model.empty() || a.detection_data.empty())
    throw Error(ErrorKind::config,
                "eval needs --model, or --detection-model, --mutation-model and --detection-data");
  const auto report = pipeline_report(load_checkpoint(a.detection_model), load_checkpoint(a.mutation_model),
                                      load_dataset(a.detection_data), data, agg);
  write_text(out / "report.json", dump_json(report));
  std::cout << "detection instance_accuracy " << report["detection"]["instance"]["accuracy"].get<double>() << "\n"
            << "mutation instance_accuracy " << report["mutation"]["instance"]["accuracy"].get<double>() << "\n"
            << "mutation bag_accuracy " << report["mutation"]["bag"]["accuracy"].get<double>() << "\n";
}

// ---- pipeline -------------------------------------------------------------

struct PipelineArgs {
  std::string detection_data, mutation_data;
  double noise_rate = 0;
  std::vector<double> sweep;
  std::size_t epochs = 0;
  CLI::Option *noise_opt, *sweep_opt, *epochs_opt;
};

void run_pipeline_cmd(const Globals& g, const PipelineArgs& a) {
  auto config = load_config(g);
  if (!a.detection_data.empty() || !a.mutation_data.empty()) {
    if (a.detection_data.empty() || a.mutation_data.empty())
      throw Error(ErrorKind::config, "--detection-data and --mutation-data go together");
    config.generate.reset();
    config.detection_data = a.detection_data;
    config.mutation_data = a.mutation_data;
  }
  override_if(a.noise_opt, config.noise_rate, a.noise_rate);
  override_if(a.sweep_opt, config.noise_sweep, a.sweep);
  if (a.epochs_opt->count() > 0) config.detection.train.max_epochs = config.mutation.train.max_epochs = a.epochs;
  const fs::path out(g.out);
  fs::create_directories(out);
  write_text(out / "config.json", dump_json(to_json(config)));
  const auto report = run_pipeline(config, out);
  std::cout << "detection instance_accuracy " << report["detection"]["instance"]["accuracy"].get<double>() << "\n"
            << "detection patient_accuracy " << report["detection"]["patient"]["accuracy"].get<double>() << "\n"
            << "mutation instance_accuracy " << report["mutation"]["instance"]["accuracy"].get<double>() << "\n"
            << "mutation bag_accuracy " << report["mutation"]["bag"]["accuracy"].get<double>() << "\n"
            << "end_to_end mutation_accuracy " << report["end_to_end"]["mutation_accuracy"].get<double>() << "\n"
            << "report " << (out / "report.json").string() << "\n";
}

// ---- gradcheck ------------------------------------------------------------

struct GradcheckArgs {
  std::vector<std::size_t> layers{8, 16, 8, 3};
  std::size_t trials = 20;
  double tolerance = 1e-6;
  std::string loss = "smooth_cross_entropy";
  double epsilon = 0.2;
};

void run_gradcheck(const Globals& g, const GradcheckArgs& a) {
  const auto config = load_config(g);
  GradCheckOptions opts;
  opts.loss = {parse_loss_kind(a.loss), a.epsilon};
  const auto specs = mlp_specs(a.layers);
  nlohmann::json trials = nlohmann::json::array();
  double worst = 0;
  bool passed = true;
  for (std::size_t t = 0; t < a.trials; ++t) {
    const auto r = grad_check(specs, derive_seed({config.seed, t}), a.tolerance, opts);
    worst = std::max(worst, r.max_relative_error);
    passed = passed && r.passed;
    trials.push_back({{"trial", t},
                      {"max_relative_error", r.max_relative_error},
                      {"parameters_checked", r.parameters_checked},
                      {"rejected_draws", r.rejected_draws},
                      {"passed", r.passed}});
  }
  const nlohmann::json report{{"layers", a.layers},       {"loss", a.loss},       {"tolerance", a.tolerance},
                              {"max_relative_error", worst}, {"passed", passed}, {"trials", trials}};
  write_text(fs::path(g.out) / "gradcheck.json", dump_json(report));
  std::cout << "max_relative_error " << worst << " tolerance " << a.tolerance << (passed ? " PASS" : " FAIL") << "\n";
  if (!passed) throw Error(ErrorKind::gradient_check, "analytic and numeric gradients disagree");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noisy-label instance classification with bag-level aggregation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON experiment config (flags override it)");
  g.seed_flag = app.add_option("--seed", g.seed, "Seed for every random step of the command");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset (or the two-view cohort)");
  gen.k_opt = gen_cmd->add_option("--k", gen.k, "Classes");
  gen.d_opt = gen_cmd->add_option("--d", gen.d, "Feature dimension");
  gen.patients_opt = gen_cmd->add_option("--patients-per-class", gen.patients, "Patients per class");
  gen.min_opt = gen_cmd->add_option("--cells-min", gen.cells_min, "Minimum cells per patient");
  gen.max_opt = gen_cmd->add_option("--cells-max", gen.cells_max, "Maximum cells per patient");
  gen.sep_opt = gen_cmd->add_option("--separation", gen.separation, "Distance between class centers");
  gen.sd_opt = gen_cmd->add_option("--stddev", gen.stddev, "Within-class standard deviation");
  gen_cmd->add_flag("--cohort", gen.cohort, "Write detection.txt and mutation.txt instead");
  gen_cmd->add_option("--file", gen.file, "Output file (default <out>/dataset.txt)");

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "Stratified split into <stem>_part<i>.txt");
  split_cmd->add_option("--data", split.data, "Dataset file")->required();
  split_cmd->add_option("--stage", split.stage, "Take defaults from the detection or mutation stage config");
  split.fractions_opt = split_cmd->add_option("--fractions", split.fractions, "Part fractions")->delimiter(',');
  split.stratify_opt = split_cmd->add_option("--stratify", split.stratify, "cell_label or bag_label");

  CorruptArgs corrupt;
  auto* corrupt_cmd = app.add_subcommand("corrupt", "Symmetric label noise on cell labels");
  corrupt_cmd->add_option("--data", corrupt.data, "Dataset file")->required();
  corrupt.rate_opt = corrupt_cmd->add_option("--rate", corrupt.rate, "Flip probability");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one stage and write <name>.ckpt");
  train_cmd->add_option("--train", tr.train, "Training dataset")->required();
  train_cmd->add_option("--val", tr.val, "Validation dataset")->required();
  train_cmd->add_option("--profile", tr.profile, "detection or mutation (default from K)");
  train_cmd->add_option("--name", tr.name, "Artifact name (default: profile)");
  train_cmd->add_option("--init", tr.init, "Start from this checkpoint");
  tr.hidden_opt = train_cmd->add_option("--hidden", tr.hidden, "Hidden widths")->delimiter(',');
  tr.layers_opt = train_cmd->add_option("--layers", tr.layers, "Full layer dims D,...,K")->delimiter(',');
  tr.epochs_opt = train_cmd->add_option("--epochs", tr.epochs, "Maximum epochs");
  tr.batch_opt = train_cmd->add_option("--batch-size", tr.batch, "Batch size");
  tr.patience_opt = train_cmd->add_option("--patience", tr.patience, "Early-stopping patience");
  tr.min_delta_opt = train_cmd->add_option("--min-delta", tr.min_delta, "Early-stopping min delta");
  tr.monitor_opt = train_cmd->add_option("--monitor", tr.monitor, "val_loss or val_accuracy");
  tr.freeze_opt = train_cmd->add_option("--freeze-below", tr.freeze, "Freeze layers with a lower index");
  tr.lr_opt = train_cmd->add_option("--lr", tr.lr, "Learning rate");
  tr.wd_opt = train_cmd->add_option("--weight-decay", tr.wd, "Weight decay");
  tr.momentum_opt = train_cmd->add_option("--momentum", tr.momentum, "SGD momentum");
  tr.loss_opt = train_cmd->add_option("--loss", tr.loss, "cross_entropy or smooth_cross_entropy");
  tr.epsilon_opt = train_cmd->add_option("--epsilon", tr.epsilon, "Label smoothing mass");
  tr.optimizer_opt = train_cmd->add_option("--optimizer", tr.optimizer, "sgd_momentum or adam");
  tr.dropout_opt = train_cmd->add_option("--dropout", tr.dropout, "Dropout rate before the head");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate one model, or both stages end to end");
  eval_cmd->add_option("--data", ev.data, "Dataset to score (mutation data for the two-stage report)")->required();
  eval_cmd->add_option("--model", ev.model, "Single checkpoint");
  eval_cmd->add_option("--detection-model", ev.detection_model, "Detection checkpoint");
  eval_cmd->add_option("--mutation-model", ev.mutation_model, "Mutation checkpoint");
  eval_cmd->add_option("--detection-data", ev.detection_data, "Binary dataset for the detection metrics");
  ev.threshold_opt = eval_cmd->add_option("--threshold", ev.threshold, "Patient threshold");
  ev.vote_opt = eval_cmd->add_option("--vote-rule", ev.vote_rule, "count or mean_probability");

  PipelineArgs pl;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Full two-stage workflow and consolidated report");
  pipeline_cmd->add_option("--detection-data", pl.detection_data, "Binary dataset instead of the generated cohort");
  pipeline_cmd->add_option("--mutation-data", pl.mutation_data, "Mutation dataset instead of the generated cohort");
  pl.noise_opt = pipeline_cmd->add_option("--noise-rate", pl.noise_rate, "Training-label noise rate");
  pl.sweep_opt = pipeline_cmd->add_option("--noise-sweep", pl.sweep, "Noise rates for noise_sweep.csv")->delimiter(',');
  pl.epochs_opt = pipeline_cmd->add_option("--epochs", pl.epochs, "Maximum epochs for both stages");

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gc_cmd->add_option("--layers", gc.layers, "Layer dims")->delimiter(',')->capture_default_str();
  gc_cmd->add_option("--trials", gc.trials, "Random networks")->capture_default_str();
  gc_cmd->add_option("--tolerance", gc.tolerance, "Relative error tolerance")->capture_default_str();
  gc_cmd->add_option("--loss", gc.loss, "cross_entropy or smooth_cross_entropy")->capture_default_str();
  gc_cmd->add_option("--epsilon", gc.epsilon, "Label smoothing mass")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code(ErrorKind::config);
  }

  try {
    if (gen_cmd->parsed()) run_gen(g, gen);
    if (split_cmd->parsed()) run_split(g, split);
    if (corrupt_cmd->parsed()) run_corrupt(g, corrupt);
    if (train_cmd->parsed()) run_train(g, tr);
    if (eval_cmd->parsed()) run_eval(g, ev);
    if (pipeline_cmd->parsed()) run_pipeline_cmd(g, pl);
    if (gc_cmd->parsed()) run_gradcheck(g, gc);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::io);
  }
  return 0;
}
