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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <filesystem>
#include <string>

#include <doctest.h>

#include "helpers.hpp"
#include "noisybag/data_model.hpp"
#include "noisybag/rng.hpp"

using namespace noisybag;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_classes = 2;
  s.dim = 2;
  s.patients_per_class = 1;
  s.cells_per_patient_min = 3;
  s.cells_per_patient_max = 3;
  s.seed = 5;
  return s;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "noisybag_test_data_model";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("generator counts match the requested sizes") {
  const auto ds = generate_synthetic(small_spec());
  CHECK(ds.bags.size() == 2);
  CHECK(ds.cells.size() == 6);
  for (const auto& c : ds.cells) CHECK(c.features.size() == 2);
  CHECK(ds.label_space == LabelSpace::binary());
  validate(ds);
}

TEST_CASE("cells are pure: cell label equals bag label") {
  SyntheticSpec s;
  s.patients_per_class = 3;
  s.cells_per_patient_min = 2;
  s.cells_per_patient_max = 9;
  const auto ds = generate_synthetic(s);
  CHECK(ds.bags.size() == 12);
  std::map<PatientId, ClassIndex> bag_label;
  for (const auto& b : ds.bags) {
    bag_label[b.patient_id] = b.bag_label;
    CHECK(b.cell_ids.size() >= 2);
    CHECK(b.cell_ids.size() <= 9);
  }
  for (const auto& c : ds.cells) CHECK(c.label == bag_label[c.patient_id]);
}

TEST_CASE("class centers are exactly separation apart") {
  for (std::size_t k : {2u, 4u, 6u}) {
    const auto centers = class_centers(k, 3, 6.0);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) {
        double d2 = 0;
        for (std::size_t j = 0; j < 3; ++j) d2 += std::pow(centers[a][j] - centers[b][j], 2);
        const double d = std::sqrt(d2);
        if (b < 3 || b - a != 3)
          CHECK(d == doctest::Approx(6.0).epsilon(1e-12));
        else
          CHECK(d >= 6.0);
      }
  }
  CHECK_ERROR_KIND(class_centers(7, 3, 1.0), ErrorKind::validation);
}

TEST_CASE("vanishing stddev puts every cell on its class center") {
  SyntheticSpec s;
  s.num_classes = 4;
  s.dim = 5;
  s.patients_per_class = 2;
  s.cells_per_patient_min = 4;
  s.cells_per_patient_max = 4;
  s.within_class_stddev = 1e-300;
  const auto ds = generate_synthetic(s);
  const auto centers = class_centers(4, 5, s.class_center_separation);
  for (const auto& c : ds.cells)
    for (std::size_t j = 0; j < 5; ++j) {
      if (centers[c.label][j] != 0.0)
        CHECK(c.features[j] == centers[c.label][j]);
      else
        CHECK(std::abs(c.features[j]) < 1e-290);
    }
}

TEST_CASE("nearest centroid separates K=4 at separation 10") {
  SyntheticSpec s;
  s.num_classes = 4;
  s.dim = 16;
  s.patients_per_class = 10;
  s.cells_per_patient_min = 50;
  s.cells_per_patient_max = 50;
  s.class_center_separation = 10.0;
  s.seed = 17;
  const auto ds = generate_synthetic(s);
  // Centroids estimated from even cell ids, evaluated on odd ones.
  std::vector<std::vector<double>> centroid(4, std::vector<double>(16, 0.0));
  std::vector<double> n(4, 0.0);
  for (const auto& c : ds.cells) {
    if (c.cell_id % 2) continue;
    for (std::size_t j = 0; j < 16; ++j) centroid[c.label][j] += c.features[j];
    n[c.label] += 1;
  }
  for (std::size_t k = 0; k < 4; ++k)
    for (auto& v : centroid[k]) v /= n[k];
  std::size_t hits = 0, total = 0;
  for (const auto& c : ds.cells) {
    if (c.cell_id % 2 == 0) continue;
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t k = 0; k < 4; ++k) {
      double d = 0;
      for (std::size_t j = 0; j < 16; ++j) d += std::pow(c.features[j] - centroid[k][j], 2);
      if (d < best_d) best_d = d, best = k;
    }
    hits += best == c.label;
    ++total;
  }
  CHECK(static_cast<double>(hits) / total >= 0.99);
}

TEST_CASE("generator is deterministic per seed") {
  auto s = small_spec();
  s.cells_per_patient_max = 20;
  CHECK(generate_synthetic(s) == generate_synthetic(s));
  auto t = s;
  t.seed = 6;
  CHECK_FALSE(generate_synthetic(s) == generate_synthetic(t));
}

TEST_CASE("invalid specs name the field") {
  auto s = small_spec();
  s.within_class_stddev = 0;
  try {
    generate_synthetic(s);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
    CHECK(std::string(e.what()).find("within_class_stddev") != std::string::npos);
  }
  s = small_spec();
  s.cells_per_patient_min = 0;
  CHECK_ERROR_KIND(generate_synthetic(s), ErrorKind::validation);
  s = small_spec();
  s.class_center_separation = -1;
  CHECK_ERROR_KIND(generate_synthetic(s), ErrorKind::validation);
}

TEST_CASE("save then load is the identity") {
  const auto ds = generate_synthetic(small_spec());
  const auto path = temp_file("six.txt");
  save_dataset(ds, path);
  CHECK(load_dataset(path) == ds);
  CHECK(from_text(to_text(ds)) == ds);
}

TEST_CASE("round trip holds for random specs and odd doubles") {
  Rng rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    SyntheticSpec s;
    s.num_classes = 1 + rng.below(6);
    s.dim = (s.num_classes + 1) / 2 + rng.below(4);
    s.patients_per_class = 1 + rng.below(4);
    s.cells_per_patient_min = 1 + rng.below(3);
    s.cells_per_patient_max = s.cells_per_patient_min + rng.below(5);
    s.class_center_separation = rng.uniform() * 20;
    s.within_class_stddev = 1e-3 + rng.uniform() * 5;
    s.seed = rng.next_u64();
    auto ds = generate_synthetic(s);
    validate(ds);
    ds.cells.front().features.front() = 1e-310;  // subnormal
    ds.cells.back().features.back() = -0.0;
    const auto back = from_text(to_text(ds));
    CHECK(back == ds);
    CHECK(std::signbit(back.cells.back().features.back()));
  }
}

TEST_CASE("text layout") {
  const auto text = to_text(generate_synthetic(small_spec()));
  CHECK(text.rfind("K=2 D=2 KIND=binary\n---\n0,0\n1,1\n---\n0,0,0,", 0) == 0);
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.back() == '\n');
}

TEST_CASE("malformed files raise distinct errors") {
  const std::string bags = "K=2 D=3 KIND=binary\n---\n0,0\n---\n";
  CHECK(from_text(bags + "0,0,0,1,2,3\n").cells.size() == 1);
  CHECK_ERROR_KIND(from_text(bags + "0,0,0,1,2\n"), ErrorKind::arity);
  CHECK_ERROR_KIND(from_text(bags + "0,7,0,1,2,3\n"), ErrorKind::dangling_reference);
  CHECK_ERROR_KIND(from_text(bags + "0,0,0,1,nan,3\n"), ErrorKind::non_finite_value);
  CHECK_ERROR_KIND(from_text(bags + "0,0,0,1,inf,3\n"), ErrorKind::non_finite_value);
  CHECK_ERROR_KIND(from_text(bags + "0,0,0,1,x,3\n"), ErrorKind::parse);
  CHECK_ERROR_KIND(from_text(bags + "0,0,5,1,2,3\n"), ErrorKind::label);
  CHECK_ERROR_KIND(from_text("K=2 D=3\n---\n0,0\n---\n0,0,0,1,2,3\n"), ErrorKind::malformed_header);
  CHECK_ERROR_KIND(from_text("K=2 D=3 KIND=binary\n0,0\n"), ErrorKind::malformed_header);
  CHECK_ERROR_KIND(from_text("K=3 D=3 KIND=binary\n---\n0,0\n---\n0,0,0,1,2,3\n"), ErrorKind::malformed_header);
  // A bag without cells.
  CHECK_ERROR_KIND(from_text("K=2 D=3 KIND=binary\n---\n0,0\n1,1\n---\n0,0,0,1,2,3\n"), ErrorKind::empty_bag);
  CHECK_ERROR_KIND(load_dataset(temp_file("does_not_exist.txt")), ErrorKind::io);
}

TEST_CASE("validate catches broken invariants") {
  auto ds = generate_synthetic(small_spec());
  auto bad = ds;
  bad.cells[0].features.push_back(1.0);
  CHECK_ERROR_KIND(validate(bad), ErrorKind::arity);
  bad = ds;
  bad.cells[1].cell_id = bad.cells[0].cell_id;
  CHECK_ERROR_KIND(validate(bad), ErrorKind::validation);
  bad = ds;
  bad.bags[0].cell_ids.push_back(999);
  CHECK_ERROR_KIND(validate(bad), ErrorKind::dangling_reference);
  bad = ds;
  bad.cells[0].patient_id = 1;
  CHECK_ERROR_KIND(validate(bad), ErrorKind::dangling_reference);
}

TEST_CASE("label spaces") {
  CHECK(LabelSpace::binary().names == std::vector<std::string>{"non-leukemic", "leukemic"});
  CHECK(LabelSpace::mutation().names ==
        std::vector<std::string>{"PML-RARA", "NPM1", "CBFB-MYH11", "RUNX1-RUNX1T1"});
  CHECK(LabelSpace::for_class_count(3).kind == LabelKind::generic);
  CHECK(LabelSpace::for_class_count(3).size() == 3);
}

TEST_CASE("subset keeps bag labels and drops empty bags") {
  const auto ds = testing::bags_dataset({2, 3, 1}, {0, 1, 1}, 2);
  const auto sub = subset_cells(ds, {0, 1, 5});
  CHECK(sub.cells.size() == 3);
  REQUIRE(sub.bags.size() == 2);
  CHECK(sub.bags[0].patient_id == 0);
  CHECK(sub.bags[1].patient_id == 2);
  CHECK(sub.bags[1].bag_label == 1);
  CHECK(class_counts(ds) == std::vector<std::size_t>{2, 4});
}

TEST_CASE("cohort views") {
  CohortSpec spec;
  spec.seed = 3;
  const auto cohort = generate_cohort(spec);
  validate(cohort.detection);
  validate(cohort.mutation);
  CHECK(cohort.detection.label_space == LabelSpace::binary());
  CHECK(cohort.mutation.label_space == LabelSpace::mutation());
  CHECK(cohort.detection.bags.size() == spec.healthy_patients + spec.leukemic_patients);
  CHECK(cohort.mutation.bags.size() == 4 * spec.patients_per_mutation);
  std::set<PatientId> det_ids;
  for (const auto& b : cohort.detection.bags) det_ids.insert(b.patient_id);
  for (const auto& b : cohort.mutation.bags) CHECK(det_ids.count(b.patient_id) == 0);
  // Healthy bags hold only normal cells; leukemic bags mostly blasts.
  const auto positions = bag_cell_positions(cohort.detection);
  for (std::size_t b = 0; b < cohort.detection.bags.size(); ++b) {
    std::size_t blasts = 0;
    for (auto p : positions[b]) blasts += cohort.detection.cells[p].label;
    const double frac = static_cast<double>(blasts) / positions[b].size();
    if (cohort.detection.bags[b].bag_label == 0)
      CHECK(blasts == 0);
    else {
      CHECK(frac >= spec.blast_fraction_min - 1.0 / positions[b].size());
      CHECK(frac <= spec.blast_fraction_max + 1.0 / positions[b].size());
    }
  }
  for (const auto& c : cohort.mutation.cells) {
    const auto it = std::find_if(cohort.mutation.bags.begin(), cohort.mutation.bags.end(),
                                 [&](const Bag& b) { return b.patient_id == c.patient_id; });
    CHECK(c.label == it->bag_label);
  }
  CHECK(generate_cohort(spec).detection == cohort.detection);
}
