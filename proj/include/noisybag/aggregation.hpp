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
#include <string_view>
#include <vector>

#include "noisybag/data_model.hpp"
#include "noisybag/matrix.hpp"

namespace noisybag {

enum class CellDecision { non_cancerous, cancerous };

inline constexpr double kPatientThreshold = 0.05;

struct PatientDecision {
  PatientId patient_id = 0;
  double cancer_fraction = 0.0;
  CellDecision decision = CellDecision::non_cancerous;
};

/// A patient is non-cancerous iff fewer than `threshold` of its cells are
/// cancerous; a fraction exactly at the threshold counts as cancerous.
PatientDecision patient_threshold(const std::vector<CellDecision>& cells, double threshold = kPatientThreshold,
                                  PatientId patient_id = 0);

enum class VoteRule {
  /// Most votes; ties by highest mean probability, then lowest class index.
  count,
  /// Highest mean probability; ties by lowest class index.
  mean_probability,
};

std::string_view to_string(VoteRule rule);
VoteRule parse_vote_rule(std::string_view text);

struct BagVote {
  PatientId patient_id = 0;
  std::vector<std::size_t> vote_counts;
  std::vector<double> mean_probs;
  ClassIndex predicted_class = 0;
};

/// Bag-level class from per-cell predictions. `probabilities` has one row per
/// cell. The result does not depend on cell order: probability rows are summed
/// in a canonical (sorted) order.
BagVote majority_vote(const std::vector<ClassIndex>& predicted, const Matrix& probabilities,
                      VoteRule rule = VoteRule::count, PatientId patient_id = 0);

/// Argmax per row, ties to the lowest index.
std::vector<ClassIndex> argmax_rows(const Matrix& m);

}  // namespace noisybag
