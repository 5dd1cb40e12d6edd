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

#include "noisybag/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>
#include <unordered_set>

#include "noisybag/error.hpp"
#include "noisybag/rng.hpp"
#include "text_util.hpp"

namespace noisybag {

LabelSpace LabelSpace::binary() { return {LabelKind::binary, {"non-leukemic", "leukemic"}}; }

LabelSpace LabelSpace::mutation() {
  return {LabelKind::mutation, {"PML-RARA", "NPM1", "CBFB-MYH11", "RUNX1-RUNX1T1"}};
}

LabelSpace LabelSpace::generic(std::size_t k) {
  LabelSpace space{LabelKind::generic, {}};
  for (std::size_t i = 0; i < k; ++i) space.names.push_back("class" + std::to_string(i));
  return space;
}

LabelSpace LabelSpace::for_class_count(std::size_t k) {
  if (k == 2) return binary();
  if (k == 4) return mutation();
  return generic(k);
}

std::string_view to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::binary: return "binary";
    case LabelKind::mutation: return "mutation";
    case LabelKind::generic: return "generic";
  }
  return "generic";
}

LabelKind parse_label_kind(std::string_view text) {
  if (text == "binary") return LabelKind::binary;
  if (text == "mutation") return LabelKind::mutation;
  if (text == "generic") return LabelKind::generic;
  throw Error(ErrorKind::validation, "unknown label kind '" + std::string(text) + "'");
}

namespace {

void validate_label_space(const LabelSpace& space) {
  const auto k = space.size();
  if (k == 0) throw Error(ErrorKind::validation, "label space has no classes");
  if (space.kind == LabelKind::binary && space != LabelSpace::binary())
    throw Error(ErrorKind::validation, "binary label space must be [non-leukemic, leukemic]");
  if (space.kind == LabelKind::mutation && space != LabelSpace::mutation())
    throw Error(ErrorKind::validation,
                "mutation label space must be [PML-RARA, NPM1, CBFB-MYH11, RUNX1-RUNX1T1]");
}

}  // namespace

void validate(const Dataset& dataset) {
  validate_label_space(dataset.label_space);
  const auto k = dataset.num_classes();
  if (dataset.dim == 0) throw Error(ErrorKind::validation, "feature dimension D must be >= 1");

  std::unordered_map<CellId, const CellRecord*> by_id;
  by_id.reserve(dataset.cells.size());
  for (const auto& cell : dataset.cells) {
    if (cell.features.size() != dataset.dim)
      throw Error(ErrorKind::arity, "cell " + std::to_string(cell.cell_id) + " has " +
                                        std::to_string(cell.features.size()) +
                                        " features, expected " + std::to_string(dataset.dim));
    if (cell.label >= k)
      throw Error(ErrorKind::label, "cell " + std::to_string(cell.cell_id) + " label " +
                                        std::to_string(cell.label) + " >= K");
    for (double f : cell.features) {
      if (!std::isfinite(f))
        throw Error(ErrorKind::non_finite_value,
                    "cell " + std::to_string(cell.cell_id) + " has a non-finite feature");
    }
    if (!by_id.emplace(cell.cell_id, &cell).second)
      throw Error(ErrorKind::validation, "duplicate cell id " + std::to_string(cell.cell_id));
  }

  std::unordered_set<PatientId> patients;
  std::unordered_set<CellId> assigned;
  for (const auto& bag : dataset.bags) {
    if (!patients.insert(bag.patient_id).second)
      throw Error(ErrorKind::validation, "duplicate patient id " + std::to_string(bag.patient_id));
    if (bag.bag_label >= k)
      throw Error(ErrorKind::label, "bag " + std::to_string(bag.patient_id) + " label >= K");
    if (bag.cell_ids.empty())
      throw Error(ErrorKind::empty_bag, "bag " + std::to_string(bag.patient_id) + " has no cells");
    for (auto id : bag.cell_ids) {
      auto it = by_id.find(id);
      if (it == by_id.end())
        throw Error(ErrorKind::dangling_reference, "bag " + std::to_string(bag.patient_id) +
                                                       " references missing cell " +
                                                       std::to_string(id));
      if (it->second->patient_id != bag.patient_id)
        throw Error(ErrorKind::dangling_reference,
                    "cell " + std::to_string(id) + " listed in bag " +
                        std::to_string(bag.patient_id) + " belongs to patient " +
                        std::to_string(it->second->patient_id));
      if (!assigned.insert(id).second)
        throw Error(ErrorKind::validation, "cell " + std::to_string(id) + " listed twice");
    }
  }
  for (const auto& cell : dataset.cells) {
    if (!patients.contains(cell.patient_id))
      throw Error(ErrorKind::dangling_reference, "cell " + std::to_string(cell.cell_id) +
                                                     " references patient " +
                                                     std::to_string(cell.patient_id) +
                                                     " absent from the bag table");
    if (!assigned.contains(cell.cell_id))
      throw Error(ErrorKind::dangling_reference,
                  "cell " + std::to_string(cell.cell_id) + " is not listed in its bag");
  }
}

void canonicalize(Dataset& dataset) {
  std::sort(dataset.cells.begin(), dataset.cells.end(),
            [](const CellRecord& a, const CellRecord& b) { return a.cell_id < b.cell_id; });
  std::sort(dataset.bags.begin(), dataset.bags.end(),
            [](const Bag& a, const Bag& b) { return a.patient_id < b.patient_id; });
  for (auto& bag : dataset.bags) std::sort(bag.cell_ids.begin(), bag.cell_ids.end());
}

Matrix feature_matrix(const Dataset& dataset) {
  Matrix m(dataset.cells.size(), dataset.dim);
  for (std::size_t i = 0; i < dataset.cells.size(); ++i) {
    std::copy(dataset.cells[i].features.begin(), dataset.cells[i].features.end(),
              m.row(i).begin());
  }
  return m;
}

std::vector<ClassIndex> cell_labels(const Dataset& dataset) {
  std::vector<ClassIndex> labels;
  labels.reserve(dataset.cells.size());
  for (const auto& cell : dataset.cells) labels.push_back(cell.label);
  return labels;
}

std::vector<std::vector<std::size_t>> bag_cell_positions(const Dataset& dataset) {
  std::unordered_map<CellId, std::size_t> position;
  position.reserve(dataset.cells.size());
  for (std::size_t i = 0; i < dataset.cells.size(); ++i) position[dataset.cells[i].cell_id] = i;
  std::vector<std::vector<std::size_t>> out;
  out.reserve(dataset.bags.size());
  for (const auto& bag : dataset.bags) {
    std::vector<std::size_t> rows;
    rows.reserve(bag.cell_ids.size());
    for (auto id : bag.cell_ids) {
      auto it = position.find(id);
      if (it == position.end())
        throw Error(ErrorKind::dangling_reference, "bag references missing cell " + std::to_string(id));
      rows.push_back(it->second);
    }
    out.push_back(std::move(rows));
  }
  return out;
}

Dataset subset_cells(const Dataset& dataset, const std::vector<std::size_t>& positions) {
  Dataset out;
  out.label_space = dataset.label_space;
  out.dim = dataset.dim;
  std::unordered_set<CellId> keep;
  for (auto p : positions) {
    out.cells.push_back(dataset.cells.at(p));
    keep.insert(dataset.cells[p].cell_id);
  }
  for (const auto& bag : dataset.bags) {
    Bag b{bag.patient_id, {}, bag.bag_label};
    for (auto id : bag.cell_ids) {
      if (keep.contains(id)) b.cell_ids.push_back(id);
    }
    if (!b.cell_ids.empty()) out.bags.push_back(std::move(b));
  }
  canonicalize(out);
  return out;
}

std::vector<std::size_t> class_counts(const Dataset& dataset) {
  std::vector<std::size_t> counts(dataset.num_classes(), 0);
  for (const auto& cell : dataset.cells) counts.at(cell.label)++;
  return counts;
}

void validate(const SyntheticSpec& spec) {
  if (spec.num_classes < 1) throw Error(ErrorKind::validation, "num_classes must be >= 1");
  if (spec.dim < 1) throw Error(ErrorKind::validation, "dim must be >= 1");
  if (spec.num_classes > 2 * spec.dim)
    throw Error(ErrorKind::validation, "num_classes must be <= 2 * dim for axis-placed centers");
  if (spec.patients_per_class < 1)
    throw Error(ErrorKind::validation, "patients_per_class must be >= 1");
  if (spec.cells_per_patient_min < 1)
    throw Error(ErrorKind::validation, "cells_per_patient_min must be >= 1");
  if (spec.cells_per_patient_max < spec.cells_per_patient_min)
    throw Error(ErrorKind::validation, "cells_per_patient_max must be >= cells_per_patient_min");
  if (!(spec.within_class_stddev > 0.0) || !std::isfinite(spec.within_class_stddev))
    throw Error(ErrorKind::validation, "within_class_stddev must be > 0");
  if (!(spec.class_center_separation >= 0.0) || !std::isfinite(spec.class_center_separation))
    throw Error(ErrorKind::validation, "class_center_separation must be >= 0");
}

std::vector<std::vector<double>> class_centers(std::size_t num_classes, std::size_t dim,
                                               double separation) {
  if (num_classes > 2 * dim)
    throw Error(ErrorKind::validation, "num_classes must be <= 2 * dim for axis-placed centers");
  const double scale = separation / std::numbers::sqrt2;
  std::vector<std::vector<double>> centers(num_classes, std::vector<double>(dim, 0.0));
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (k < dim)
      centers[k][k] = scale;
    else
      centers[k][k - dim] = -scale;
  }
  return centers;
}

namespace {

CellRecord draw_cell(Rng& rng, CellId id, PatientId patient, const std::vector<double>& center,
                     double stddev, ClassIndex label) {
  CellRecord cell{id, patient, std::vector<double>(center.size()), label};
  for (std::size_t d = 0; d < center.size(); ++d) cell.features[d] = center[d] + stddev * rng.normal();
  return cell;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  Dataset ds;
  ds.label_space = LabelSpace::for_class_count(spec.num_classes);
  ds.dim = spec.dim;
  const auto centers = class_centers(spec.num_classes, spec.dim, spec.class_center_separation);

  Rng rng(spec.seed);
  CellId next_cell = 0;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    for (std::size_t p = 0; p < spec.patients_per_class; ++p) {
      const PatientId patient = k * spec.patients_per_class + p;
      const auto n = rng.between(spec.cells_per_patient_min, spec.cells_per_patient_max);
      Bag bag{patient, {}, k};
      for (std::uint64_t c = 0; c < n; ++c) {
        ds.cells.push_back(draw_cell(rng, next_cell, patient, centers[k], spec.within_class_stddev, k));
        bag.cell_ids.push_back(next_cell++);
      }
      ds.bags.push_back(std::move(bag));
    }
  }
  return ds;
}

void validate(const CohortSpec& spec) {
  if (spec.dim < 3) throw Error(ErrorKind::validation, "cohort dim must be >= 3 (five centers)");
  if (spec.patients_per_mutation < 1)
    throw Error(ErrorKind::validation, "patients_per_mutation must be >= 1");
  if (spec.cells_per_patient_min < 1)
    throw Error(ErrorKind::validation, "cells_per_patient_min must be >= 1");
  if (spec.cells_per_patient_max < spec.cells_per_patient_min)
    throw Error(ErrorKind::validation, "cells_per_patient_max must be >= cells_per_patient_min");
  if (!(spec.blast_fraction_min >= 0.0) || spec.blast_fraction_max > 1.0 ||
      spec.blast_fraction_max < spec.blast_fraction_min)
    throw Error(ErrorKind::validation, "blast fractions must satisfy 0 <= min <= max <= 1");
  if (!(spec.within_class_stddev > 0.0) || !std::isfinite(spec.within_class_stddev))
    throw Error(ErrorKind::validation, "within_class_stddev must be > 0");
  if (!(spec.class_center_separation >= 0.0) || !std::isfinite(spec.class_center_separation))
    throw Error(ErrorKind::validation, "class_center_separation must be >= 0");
  if (spec.healthy_patients + spec.leukemic_patients == 0)
    throw Error(ErrorKind::validation, "detection view needs at least one patient");
}

Cohort generate_cohort(const CohortSpec& spec) {
  validate(spec);
  constexpr std::size_t kMutations = 4;
  const auto centers = class_centers(kMutations + 1, spec.dim, spec.class_center_separation);
  const auto& normal = centers[0];
  const double sd = spec.within_class_stddev;
  Rng rng(spec.seed);

  Cohort cohort;
  auto& det = cohort.detection;
  det.label_space = LabelSpace::binary();
  det.dim = spec.dim;
  CellId next_cell = 0;
  PatientId next_patient = 0;

  auto cells_for_patient = [&] {
    return rng.between(spec.cells_per_patient_min, spec.cells_per_patient_max);
  };
  auto blast_fraction = [&] {
    return spec.blast_fraction_min +
           (spec.blast_fraction_max - spec.blast_fraction_min) * rng.uniform();
  };

  for (std::size_t p = 0; p < spec.healthy_patients; ++p) {
    Bag bag{next_patient++, {}, 0};
    const auto n = cells_for_patient();
    for (std::uint64_t c = 0; c < n; ++c) {
      det.cells.push_back(draw_cell(rng, next_cell, bag.patient_id, normal, sd, 0));
      bag.cell_ids.push_back(next_cell++);
    }
    det.bags.push_back(std::move(bag));
  }
  for (std::size_t p = 0; p < spec.leukemic_patients; ++p) {
    Bag bag{next_patient++, {}, 1};
    const auto n = cells_for_patient();
    const auto mutation = 1 + rng.below(kMutations);
    const auto blasts = static_cast<std::uint64_t>(std::llround(blast_fraction() * static_cast<double>(n)));
    for (std::uint64_t c = 0; c < n; ++c) {
      const bool blast = c < blasts;
      det.cells.push_back(
          draw_cell(rng, next_cell, bag.patient_id, blast ? centers[mutation] : normal, sd, blast ? 1 : 0));
      bag.cell_ids.push_back(next_cell++);
    }
    det.bags.push_back(std::move(bag));
  }

  auto& mut = cohort.mutation;
  mut.label_space = LabelSpace::mutation();
  mut.dim = spec.dim;
  for (std::size_t k = 0; k < kMutations; ++k) {
    for (std::size_t p = 0; p < spec.patients_per_mutation; ++p) {
      Bag bag{next_patient++, {}, k};
      const auto n = cells_for_patient();
      const auto blasts = static_cast<std::uint64_t>(std::llround(blast_fraction() * static_cast<double>(n)));
      for (std::uint64_t c = 0; c < n; ++c) {
        const auto& center = c < blasts ? centers[k + 1] : normal;
        mut.cells.push_back(draw_cell(rng, next_cell, bag.patient_id, center, sd, k));
        bag.cell_ids.push_back(next_cell++);
      }
      mut.bags.push_back(std::move(bag));
    }
  }
  return cohort;
}

std::string to_text(const Dataset& dataset) {
  validate(dataset);
  Dataset sorted = dataset;
  canonicalize(sorted);

  std::string out;
  out += "K=" + std::to_string(sorted.num_classes()) + " D=" + std::to_string(sorted.dim) +
         " KIND=" + std::string(to_string(sorted.label_space.kind)) + "\n---\n";
  for (const auto& bag : sorted.bags)
    out += std::to_string(bag.patient_id) + "," + std::to_string(bag.bag_label) + "\n";
  out += "---\n";
  for (const auto& cell : sorted.cells) {
    out += std::to_string(cell.cell_id) + "," + std::to_string(cell.patient_id) + "," +
           std::to_string(cell.label);
    for (double f : cell.features) {
      out += ',';
      detail::append_double(out, f);
    }
    out += '\n';
  }
  return out;
}

namespace {

Error header_error(const std::string& what) { return Error(ErrorKind::malformed_header, what); }

std::size_t header_field(std::string_view token, std::string_view key) {
  if (token.substr(0, key.size()) != key) throw header_error("expected " + std::string(key) + "<int>");
  std::size_t value = 0;
  if (!detail::parse_int(token.substr(key.size()), value))
    throw header_error("bad integer in '" + std::string(token) + "'");
  return value;
}

}  // namespace

Dataset from_text(std::string_view text) {
  const auto all = detail::lines(text);
  if (all.empty()) throw header_error("empty file");

  const auto header = detail::split(all[0], ' ');
  if (header.size() != 3) throw header_error("expected 'K=<int> D=<int> KIND=<kind>'");
  Dataset ds;
  const auto k = header_field(header[0], "K=");
  ds.dim = header_field(header[1], "D=");
  if (header[2].substr(0, 5) != "KIND=") throw header_error("expected KIND=<binary|mutation|generic>");
  LabelKind kind;
  try {
    kind = parse_label_kind(header[2].substr(5));
  } catch (const Error&) {
    throw header_error("unknown KIND '" + std::string(header[2].substr(5)) + "'");
  }
  if (kind == LabelKind::binary && k != 2) throw header_error("KIND=binary requires K=2");
  if (kind == LabelKind::mutation && k != 4) throw header_error("KIND=mutation requires K=4");
  if (k == 0 || ds.dim == 0) throw header_error("K and D must be >= 1");
  ds.label_space = kind == LabelKind::generic ? LabelSpace::generic(k)
                   : kind == LabelKind::binary ? LabelSpace::binary()
                                               : LabelSpace::mutation();

  if (all.size() < 2 || all[1] != "---") throw header_error("missing '---' after header");
  std::size_t i = 2;
  std::unordered_map<PatientId, std::size_t> bag_index;
  for (; i < all.size() && all[i] != "---"; ++i) {
    const auto fields = detail::split(all[i], ',');
    if (fields.size() != 2)
      throw Error(ErrorKind::arity, "bag line " + std::to_string(i + 1) + " has " +
                                        std::to_string(fields.size()) + " fields, expected 2");
    Bag bag;
    if (!detail::parse_int(fields[0], bag.patient_id) || !detail::parse_int(fields[1], bag.bag_label))
      throw Error(ErrorKind::parse, "bad integer on line " + std::to_string(i + 1));
    if (!bag_index.emplace(bag.patient_id, ds.bags.size()).second)
      throw Error(ErrorKind::validation, "duplicate patient id " + std::to_string(bag.patient_id));
    ds.bags.push_back(std::move(bag));
  }
  if (i >= all.size()) throw header_error("missing '---' before the cell table");
  ++i;

  for (; i < all.size(); ++i) {
    const auto fields = detail::split(all[i], ',');
    if (fields.size() != 3 + ds.dim)
      throw Error(ErrorKind::arity, "cell line " + std::to_string(i + 1) + " has " +
                                        std::to_string(fields.size() - 3) + " features, expected " +
                                        std::to_string(ds.dim));
    CellRecord cell;
    if (!detail::parse_int(fields[0], cell.cell_id) || !detail::parse_int(fields[1], cell.patient_id) ||
        !detail::parse_int(fields[2], cell.label))
      throw Error(ErrorKind::parse, "bad integer on line " + std::to_string(i + 1));
    cell.features.resize(ds.dim);
    for (std::size_t d = 0; d < ds.dim; ++d) {
      if (!detail::parse_double(fields[3 + d], cell.features[d]))
        throw Error(ErrorKind::parse, "bad real on line " + std::to_string(i + 1));
      if (!std::isfinite(cell.features[d]))
        throw Error(ErrorKind::non_finite_value, "non-finite feature on line " + std::to_string(i + 1));
    }
    auto it = bag_index.find(cell.patient_id);
    if (it == bag_index.end())
      throw Error(ErrorKind::dangling_reference, "cell " + std::to_string(cell.cell_id) +
                                                     " references patient " +
                                                     std::to_string(cell.patient_id) +
                                                     " absent from the bag table");
    ds.bags[it->second].cell_ids.push_back(cell.cell_id);
    ds.cells.push_back(std::move(cell));
  }
  canonicalize(ds);
  validate(ds);
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  detail::write_file(path, to_text(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) { return from_text(detail::read_file(path)); }

}  // namespace noisybag
