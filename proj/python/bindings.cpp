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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "noisybag/aggregation.hpp"
#include "noisybag/data_model.hpp"
#include "noisybag/error.hpp"
#include "noisybag/losses.hpp"
#include "noisybag/metrics.hpp"
#include "noisybag/nn.hpp"
#include "noisybag/pipeline.hpp"
#include "noisybag/sampling.hpp"
#include "noisybag/training.hpp"

namespace py = pybind11;
using namespace noisybag;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& array) {
  if (array.ndim() != 2) throw Error(ErrorKind::dimension_mismatch, "expected a 2-d array");
  Matrix m(static_cast<std::size_t>(array.shape(0)), static_cast<std::size_t>(array.shape(1)));
  std::copy(array.data(), array.data() + array.size(), m.values().begin());
  return m;
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

std::string dump(const nlohmann::json& j) { return j.dump(); }

LossSpec loss_spec(const std::string& kind, double epsilon) { return {parse_loss_kind(kind), epsilon}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of noisybag";

  static py::exception<Error> error_type(m, "NoisyBagError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::handle(error_type.ptr())(e.what());
      instance.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type.ptr(), instance.ptr());
    }
  });

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("num_classes", &Dataset::num_classes)
      .def_property_readonly("dim", [](const Dataset& d) { return d.dim; })
      .def_property_readonly("label_kind", [](const Dataset& d) { return std::string(to_string(d.label_space.kind)); })
      .def_property_readonly("class_names", [](const Dataset& d) { return d.label_space.names; })
      .def_property_readonly("num_cells", [](const Dataset& d) { return d.cells.size(); })
      .def_property_readonly("num_bags", [](const Dataset& d) { return d.bags.size(); })
      .def("features", [](const Dataset& d) { return to_array(feature_matrix(d)); })
      .def("cell_labels", [](const Dataset& d) { return cell_labels(d); })
      .def("cell_ids", [](const Dataset& d) {
        std::vector<CellId> ids;
        for (const auto& c : d.cells) ids.push_back(c.cell_id);
        return ids;
      })
      .def("patient_ids", [](const Dataset& d) {
        std::vector<PatientId> ids;
        for (const auto& c : d.cells) ids.push_back(c.patient_id);
        return ids;
      })
      .def("bag_labels", [](const Dataset& d) {
        std::vector<ClassIndex> labels;
        for (const auto& b : d.bags) labels.push_back(b.bag_label);
        return labels;
      })
      .def("class_counts", [](const Dataset& d) { return class_counts(d); })
      .def("to_text", [](const Dataset& d) { return to_text(d); })
      .def("save", [](const Dataset& d, const std::filesystem::path& p) { save_dataset(d, p); }, py::arg("path"))
      .def("__eq__", [](const Dataset& a, const Dataset& b) { return a == b; })
      .def("__repr__", [](const Dataset& d) {
        return "<Dataset K=" + std::to_string(d.num_classes()) + " dim=" + std::to_string(d.dim) +
               " cells=" + std::to_string(d.cells.size()) + " bags=" + std::to_string(d.bags.size()) + ">";
      });

  m.def("load_dataset", [](const std::filesystem::path& p) { return load_dataset(p); }, py::arg("path"));
  m.def("dataset_from_text", [](const std::string& text) { return from_text(text); }, py::arg("text"));

  m.def(
      "generate_synthetic",
      [](std::size_t k, std::size_t dim, std::size_t patients, std::size_t cells_min, std::size_t cells_max,
         double separation, double stddev, std::uint64_t seed) {
        return generate_synthetic({k, dim, patients, cells_min, cells_max, separation, stddev, seed});
      },
      py::arg("num_classes") = 4, py::arg("dim") = 16, py::arg("patients_per_class") = 10,
      py::arg("cells_per_patient_min") = 50, py::arg("cells_per_patient_max") = 100,
      py::arg("separation") = 6.0, py::arg("stddev") = 1.0, py::arg("seed") = 0);

  m.def(
      "generate_cohort",
      [](const std::string& spec_json, std::uint64_t seed) {
        auto spec = cohort_from_json(nlohmann::json::parse(spec_json));
        spec.seed = seed;
        auto cohort = generate_cohort(spec);
        return py::make_tuple(std::move(cohort.detection), std::move(cohort.mutation));
      },
      py::arg("spec_json") = "{}", py::arg("seed") = 0);

  m.def(
      "stratified_split",
      [](const Dataset& d, const std::vector<double>& fractions, const std::string& key, std::uint64_t seed) {
        return stratified_split(d, {fractions, parse_stratify_key(key), seed});
      },
      py::arg("dataset"), py::arg("fractions"), py::arg("stratify") = "cell_label", py::arg("seed") = 0);

  m.def("largest_remainder", &largest_remainder, py::arg("n"), py::arg("fractions"));

  m.def(
      "inject_noise",
      [](const Dataset& d, double rate, std::uint64_t seed) {
        auto noisy = inject_noise(d, {rate, seed});
        return py::make_tuple(std::move(noisy.dataset), noisy.flip_mask);
      },
      py::arg("dataset"), py::arg("rate"), py::arg("seed") = 0);

  m.def(
      "smooth_cross_entropy",
      [](const Array& logits, const std::vector<ClassIndex>& targets, double epsilon) {
        const auto r = smooth_cross_entropy(to_matrix(logits), targets, epsilon);
        return py::make_tuple(r.loss, to_array(r.grad));
      },
      py::arg("logits"), py::arg("targets"), py::arg("epsilon"));

  m.def(
      "softmax", [](const Array& logits) { return to_array(softmax(to_matrix(logits))); }, py::arg("logits"));

  m.def(
      "patient_threshold",
      [](const std::vector<bool>& cancerous, double threshold) {
        std::vector<CellDecision> cells;
        for (bool c : cancerous) cells.push_back(c ? CellDecision::cancerous : CellDecision::non_cancerous);
        const auto d = patient_threshold(cells, threshold);
        return py::make_tuple(d.decision == CellDecision::cancerous, d.cancer_fraction);
      },
      py::arg("cancerous"), py::arg("threshold") = kPatientThreshold);

  m.def(
      "majority_vote",
      [](const std::vector<ClassIndex>& predicted, const Array& probabilities, const std::string& rule) {
        return majority_vote(predicted, to_matrix(probabilities), parse_vote_rule(rule)).predicted_class;
      },
      py::arg("predicted"), py::arg("probabilities"), py::arg("rule") = "count");

  m.def(
      "metrics_json",
      [](const std::vector<std::vector<std::uint64_t>>& rows) {
        return dump(to_json(compute_metrics(ConfusionMatrix::from_rows(rows))));
      },
      py::arg("confusion"));

  py::class_<NetworkParams>(m, "Model")
      .def_property_readonly("layer_dims",
                             [](const NetworkParams& p) {
                               std::vector<std::size_t> dims{p.layers.front().spec.in_dim};
                               for (const auto& l : p.layers) dims.push_back(l.spec.out_dim);
                               return dims;
                             })
      .def("predict_proba", [](const NetworkParams& p, const Array& x) {
        return to_array(softmax(predict_logits(p, to_matrix(x))));
      })
      .def("predict", [](const NetworkParams& p, const Array& x) { return argmax_rows(predict_logits(p, to_matrix(x))); })
      .def("evaluate_json",
           [](const NetworkParams& p, const Dataset& d, const std::string& rule) {
             nlohmann::json j{{"instance", to_json(evaluate_instances(p, d).report, d.label_space.names)},
                              {"bag", to_json(evaluate_bags(p, d, parse_vote_rule(rule)).report,
                                              d.label_space.names)}};
             return dump(j);
           },
           py::arg("dataset"), py::arg("vote_rule") = "count")
      .def("save", [](const NetworkParams& p, const std::filesystem::path& path) { save_checkpoint(p, path); },
           py::arg("path"))
      .def("__eq__", [](const NetworkParams& a, const NetworkParams& b) { return a == b; });

  m.def("load_checkpoint", [](const std::filesystem::path& p) { return load_checkpoint(p); }, py::arg("path"));

  m.def(
      "train",
      [](const Dataset& train_set, const Dataset& val_set, const std::vector<std::size_t>& hidden,
         const std::string& profile, const std::string& overrides_json, std::uint64_t seed) {
        TrainConfig base;
        if (profile == "detection")
          base = detection_profile();
        else if (profile == "mutation")
          base = mutation_profile();
        else
          throw Error(ErrorKind::config, "unknown profile '" + profile + "'");
        auto config = train_config_from_json(nlohmann::json::parse(overrides_json), base);
        config.seed = seed;
        std::vector<std::size_t> dims{train_set.dim};
        dims.insert(dims.end(), hidden.begin(), hidden.end());
        dims.push_back(train_set.num_classes());
        py::gil_scoped_release release;
        auto result = train(train_set, val_set, mlp_specs(dims), config);
        py::gil_scoped_acquire acquire;
        return py::make_tuple(std::move(result.params), dump(history_summary(result.history)),
                              history_to_csv(result.history));
      },
      py::arg("train_set"), py::arg("val_set"), py::arg("hidden") = std::vector<std::size_t>{64, 32},
      py::arg("profile") = "mutation", py::arg("overrides_json") = "{}", py::arg("seed") = 0);

  m.def(
      "grad_check",
      [](const std::vector<std::size_t>& dims, std::uint64_t seed, double tolerance, const std::string& loss,
         double epsilon) {
        GradCheckOptions options;
        options.loss = loss_spec(loss, epsilon);
        const auto r = grad_check(mlp_specs(dims), seed, tolerance, options);
        return py::make_tuple(r.passed, r.max_relative_error, r.parameters_checked);
      },
      py::arg("dims"), py::arg("seed") = 0, py::arg("tolerance") = 1e-6, py::arg("loss") = "smooth_cross_entropy",
      py::arg("epsilon") = 0.2);

  m.def("default_config_json", [] { return dump(to_json(default_experiment())); });

  m.def(
      "run_pipeline",
      [](const std::string& config_json, const std::filesystem::path& out_dir) {
        const auto config = experiment_from_json(nlohmann::json::parse(config_json));
        py::gil_scoped_release release;
        return dump(run_pipeline(config, out_dir));
      },
      py::arg("config_json"), py::arg("out_dir"));
}
