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

#include "noisybag/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "noisybag/error.hpp"

namespace noisybag {

PatientDecision patient_threshold(const std::vector<CellDecision>& cells, double threshold, PatientId patient_id) {
  if (cells.empty()) throw Error(ErrorKind::empty_bag, "patient " + std::to_string(patient_id) + " has no cells");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorKind::validation, "threshold must lie in [0, 1]");
  const auto cancerous = std::count(cells.begin(), cells.end(), CellDecision::cancerous);
  PatientDecision d;
  d.patient_id = patient_id;
  d.cancer_fraction = static_cast<double>(cancerous) / static_cast<double>(cells.size());
  d.decision = d.cancer_fraction < threshold ? CellDecision::non_cancerous : CellDecision::cancerous;
  return d;
}

std::string_view to_string(VoteRule rule) { return rule == VoteRule::count ? "count" : "mean_probability"; }

VoteRule parse_vote_rule(std::string_view text) {
  if (text == "count") return VoteRule::count;
  if (text == "mean_probability") return VoteRule::mean_probability;
  throw Error(ErrorKind::validation, "vote rule must be count or mean_probability");
}

BagVote majority_vote(const std::vector<ClassIndex>& predicted, const Matrix& probabilities, VoteRule rule,
                      PatientId patient_id) {
  if (predicted.empty()) throw Error(ErrorKind::empty_bag, "patient " + std::to_string(patient_id) + " has no cells");
  if (probabilities.rows() != predicted.size())
    throw Error(ErrorKind::consistency, "predicted classes and probability rows differ in length");
  const auto k = probabilities.cols();
  if (k == 0) throw Error(ErrorKind::validation, "probability rows are empty");

  BagVote vote;
  vote.patient_id = patient_id;
  vote.vote_counts.assign(k, 0);
  vote.mean_probs.assign(k, 0.0);
  for (auto c : predicted) {
    if (c >= k) throw Error(ErrorKind::label, "predicted class " + std::to_string(c) + " out of range");
    ++vote.vote_counts[c];
  }

  std::vector<std::size_t> order(predicted.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = probabilities.row(a);
    const auto rb = probabilities.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  for (auto i : order) {
    const auto row = probabilities.row(i);
    for (std::size_t c = 0; c < k; ++c) vote.mean_probs[c] += row[c];
  }
  for (double& p : vote.mean_probs) p /= static_cast<double>(predicted.size());

  auto better = [&](std::size_t a, std::size_t b) {
    if (rule == VoteRule::count && vote.vote_counts[a] != vote.vote_counts[b])
      return vote.vote_counts[a] > vote.vote_counts[b];
    if (vote.mean_probs[a] != vote.mean_probs[b]) return vote.mean_probs[a] > vote.mean_probs[b];
    return a < b;
  };
  std::size_t best = 0;
  for (std::size_t c = 1; c < k; ++c)
    if (better(c, best)) best = c;
  vote.predicted_class = best;
  return vote;
}

std::vector<ClassIndex> argmax_rows(const Matrix& m) {
  std::vector<ClassIndex> out(m.rows(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[i] = best;
  }
  return out;
}

}  // namespace noisybag
