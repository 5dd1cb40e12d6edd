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

#include "noisybag/matrix.hpp"

namespace noisybag {

using CellId = std::uint64_t;
using PatientId = std::uint64_t;
using ClassIndex = std::size_t;

enum class LabelKind { binary, mutation, generic };

/// Ordered class names. binary and mutation have fixed names; generic covers
/// any other class count (synthetic experiments only).
struct LabelSpace {
  LabelKind kind = LabelKind::binary;
  std::vector<std::string> names;

  std::size_t size() const noexcept { return names.size(); }

  static LabelSpace binary();
  static LabelSpace mutation();
  static LabelSpace generic(std::size_t k);
  /// binary for K=2, mutation for K=4, generic otherwise.
  static LabelSpace for_class_count(std::size_t k);

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;
};

std::string_view to_string(LabelKind kind);
LabelKind parse_label_kind(std::string_view text);

struct CellRecord {
  CellId cell_id = 0;
  PatientId patient_id = 0;
  std::vector<double> features;
  ClassIndex label = 0;

  friend bool operator==(const CellRecord&, const CellRecord&) = default;
};

/// All cells of one patient/slide with a single bag-level label.
struct Bag {
  PatientId patient_id = 0;
  std::vector<CellId> cell_ids;
  ClassIndex bag_label = 0;

  friend bool operator==(const Bag&, const Bag&) = default;
};

/// Cells grouped into patient bags. Canonical form: cells sorted by cell_id,
/// bags sorted by patient_id, each bag's cell_ids ascending. Every operation in
/// this library that produces a Dataset produces it in canonical form.
struct Dataset {
  LabelSpace label_space;
  std::size_t dim = 0;
  std::vector<CellRecord> cells;
  std::vector<Bag> bags;

  std::size_t num_classes() const noexcept { return label_space.size(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Throws Error if any Dataset invariant is violated.
void validate(const Dataset& dataset);

/// Sorts cells, bags and bag membership lists into canonical order.
void canonicalize(Dataset& dataset);

/// Features stacked into a (cells x dim) matrix, in cell order.
Matrix feature_matrix(const Dataset& dataset);
std::vector<ClassIndex> cell_labels(const Dataset& dataset);

/// Position of each bag's cells within dataset.cells, bag by bag.
std::vector<std::vector<std::size_t>> bag_cell_positions(const Dataset& dataset);

/// Restricts a dataset to the cells at the given positions. Bags keep their
/// label and lose the cells not selected; bags left empty are dropped.
Dataset subset_cells(const Dataset& dataset, const std::vector<std::size_t>& positions);

/// Per-class cell counts.
std::vector<std::size_t> class_counts(const Dataset& dataset);

struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t dim = 16;
  std::size_t patients_per_class = 10;
  std::size_t cells_per_patient_min = 50;
  std::size_t cells_per_patient_max = 100;
  double class_center_separation = 6.0;
  double within_class_stddev = 1.0;
  std::uint64_t seed = 0;
};

void validate(const SyntheticSpec& spec);

/// Class centers at mutual distance >= `separation` (exactly `separation`
/// unless two centers sit on opposite ends of one axis): center k is
/// (separation / sqrt 2) * e_k for k < dim and -(separation / sqrt 2) * e_{k-dim}
/// beyond that. Requires num_classes <= 2 * dim.
std::vector<std::vector<double>> class_centers(std::size_t num_classes, std::size_t dim,
                                               double separation);

/// Pure bags drawn from isotropic Gaussians around the class centers. Patients
/// are numbered class-major (patient k*ppc + p), cells consecutively.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Two-view synthetic cohort for the detection -> mutation pipeline.
///
/// Geometry: center 0 is the normal-cell center, centers 1..4 are the blast
/// centers of the four mutation classes (class_centers(5, dim, separation)).
///
/// The detection view is binary: healthy patients carry only normal cells,
/// leukemic patients a blast fraction drawn in [blast_fraction_min,
/// blast_fraction_max] with blasts from a random mutation center. Cell label is
/// leukemic/non-leukemic, bag label is 1 iff the patient is leukemic.
///
/// The mutation view holds a disjoint set of leukemic patients labeled by
/// mutation; every cell (blast or normal) carries the bag label, as only
/// bag-level labels are known for these slides.
struct CohortSpec {
  std::size_t dim = 8;
  std::size_t healthy_patients = 20;
  std::size_t leukemic_patients = 20;
  std::size_t patients_per_mutation = 20;
  std::size_t cells_per_patient_min = 40;
  std::size_t cells_per_patient_max = 80;
  double blast_fraction_min = 0.6;
  double blast_fraction_max = 0.9;
  double class_center_separation = 6.0;
  double within_class_stddev = 1.0;
  std::uint64_t seed = 0;
};

struct Cohort {
  Dataset detection;
  Dataset mutation;
};

void validate(const CohortSpec& spec);
Cohort generate_cohort(const CohortSpec& spec);

/// Text serialization. Three sections separated by `---` lines: header
/// `K=<int> D=<int> KIND=<kind>`, bag table `<patient_id>,<bag_label>`, cell
/// table `<cell_id>,<patient_id>,<label>,<f_1>,...,<f_D>`. Reals use the
/// shortest decimal that round-trips the double. Rows are written in id order
/// with LF endings.
std::string to_text(const Dataset& dataset);
Dataset from_text(std::string_view text);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace noisybag
