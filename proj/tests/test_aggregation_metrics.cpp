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
#include <numeric>

#include <doctest.h>

#include "helpers.hpp"
#include "metrics_cases.hpp"
#include "noisybag/aggregation.hpp"
#include "noisybag/metrics.hpp"
#include "noisybag/rng.hpp"
#include "oracles.hpp"

using namespace noisybag;

namespace {

std::vector<CellDecision> decisions(std::size_t cancerous, std::size_t total) {
  std::vector<CellDecision> d(total, CellDecision::non_cancerous);
  for (std::size_t i = 0; i < cancerous; ++i) d[i] = CellDecision::cancerous;
  return d;
}

}  // namespace

TEST_CASE("threshold examples") {
  CHECK(patient_threshold(decisions(4, 100)).decision == CellDecision::non_cancerous);
  CHECK(patient_threshold(decisions(4, 100)).cancer_fraction == 0.04);
  CHECK(patient_threshold(decisions(5, 100)).decision == CellDecision::cancerous);
  CHECK(patient_threshold(decisions(5, 100)).cancer_fraction == 0.05);
  for (std::size_t n = 1; n < 50; ++n) CHECK(patient_threshold(decisions(0, n)).decision == CellDecision::non_cancerous);
  CHECK(patient_threshold(decisions(1, 2), 0.5, 17).patient_id == 17);
  CHECK_ERROR_KIND(patient_threshold({}), ErrorKind::empty_bag);
  CHECK_ERROR_KIND(patient_threshold(decisions(1, 2), 1.5), ErrorKind::validation);
}

TEST_CASE("threshold matches brute force on all bags up to 6 cells") {
  const std::pair<std::size_t, std::size_t> thresholds[] = {{0, 1}, {1, 20}, {1, 6}, {1, 5}, {1, 4}, {1, 3},
                                            {1, 2}, {2, 3}, {5, 6}, {1, 1}};
  for (std::size_t n = 1; n <= 6; ++n)
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<CellDecision> cells(n);
      std::size_t positives = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool on = (mask >> i) & 1u;
        cells[i] = on ? CellDecision::cancerous : CellDecision::non_cancerous;
        positives += on;
      }
      for (auto [num, den] : thresholds) {
        const bool expected = oracle::cancerous(positives, n, num, den);
        const auto got = patient_threshold(cells, static_cast<double>(num) / den);
        REQUIRE((got.decision == CellDecision::cancerous) == expected);
      }
    }
}

TEST_CASE("threshold is monotone in added cancerous cells") {
  for (std::size_t n = 1; n < 60; ++n)
    for (std::size_t c = 0; c <= n; ++c) {
      const auto before = patient_threshold(decisions(c, n));
      auto more = decisions(c, n);
      more.push_back(CellDecision::cancerous);
      if (before.decision == CellDecision::cancerous)
        CHECK(patient_threshold(more).decision == CellDecision::cancerous);
    }
}

TEST_CASE("vote examples") {
  auto rows_for = [](const std::vector<ClassIndex>& votes) {
    Matrix m(votes.size(), 4, 0.0);
    for (std::size_t i = 0; i < votes.size(); ++i) m(i, votes[i]) = 1.0;
    return m;
  };
  const std::vector<ClassIndex> strict{0, 0, 0, 0, 0, 0, 0, 1, 2, 3};
  CHECK(majority_vote(strict, rows_for(strict)).predicted_class == 0);
  CHECK(majority_vote(strict, rows_for(strict)).vote_counts == std::vector<std::size_t>{7, 1, 1, 1});

  // votes [2,2,0,0] with mean probabilities [0.30, 0.35, 0.20, 0.15].
  Matrix p(4, 4);
  const double rows[4][4] = {{0.40, 0.30, 0.20, 0.10}, {0.35, 0.25, 0.20, 0.20},
                             {0.20, 0.45, 0.20, 0.15}, {0.25, 0.40, 0.20, 0.15}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) p(i, j) = rows[i][j];
  const auto tie = majority_vote({0, 0, 1, 1}, p);
  CHECK(tie.vote_counts == std::vector<std::size_t>{2, 2, 0, 0});
  CHECK(tie.mean_probs[0] == doctest::Approx(0.30));
  CHECK(tie.mean_probs[1] == doctest::Approx(0.35));
  CHECK(tie.predicted_class == 1);
  CHECK(std::abs(std::accumulate(tie.mean_probs.begin(), tie.mean_probs.end(), 0.0) - 1.0) < 1e-9);

  Matrix one(1, 4, 0.25);
  CHECK(majority_vote({2}, one).predicted_class == 2);
  CHECK(majority_vote({2}, one, VoteRule::mean_probability).predicted_class == 0);

  CHECK_ERROR_KIND(majority_vote({}, Matrix(0, 4)), ErrorKind::empty_bag);
  CHECK_ERROR_KIND(majority_vote({0, 1}, one), ErrorKind::consistency);
}

TEST_CASE("vote matches brute force on all bags up to 6 cells, K up to 4") {
  for (std::size_t k = 1; k <= 4; ++k)
    for (std::size_t n = 1; n <= 6; ++n) {
      std::size_t combos = 1;
      for (std::size_t i = 0; i < n; ++i) combos *= k;
      for (std::size_t code = 0; code < combos; ++code) {
        std::vector<ClassIndex> votes(n);
        std::size_t rest = code;
        for (auto& v : votes) v = rest % k, rest /= k;
        std::vector<std::vector<double>> rows;
        Matrix probs(n, k);
        for (std::size_t i = 0; i < n; ++i) {
          rows.push_back(oracle::dyadic_row(votes[i], i, k));
          std::copy(rows.back().begin(), rows.back().end(), probs.row(i).begin());
        }
        for (auto rule : {VoteRule::count, VoteRule::mean_probability}) {
          const auto got = majority_vote(votes, probs, rule);
          REQUIRE(got.predicted_class == oracle::vote(votes, rows, k, rule));
          std::size_t total = 0;
          for (auto c : got.vote_counts) total += c;
          REQUIRE(total == n);
        }
      }
    }
}

TEST_CASE("vote is invariant under cell permutations") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(40), k = 4;
    std::vector<ClassIndex> votes(n);
    Matrix probs(n, k);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (auto& v : probs.row(i)) s += (v = rng.uniform());
      for (auto& v : probs.row(i)) v /= s;
      votes[i] = rng.below(k);
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    noisybag::shuffle(perm, rng);
    std::vector<ClassIndex> votes2(n);
    Matrix probs2(n, k);
    for (std::size_t i = 0; i < n; ++i) {
      votes2[i] = votes[perm[i]];
      std::copy(probs.row(perm[i]).begin(), probs.row(perm[i]).end(), probs2.row(i).begin());
    }
    for (auto rule : {VoteRule::count, VoteRule::mean_probability}) {
      const auto a = majority_vote(votes, probs, rule), b = majority_vote(votes2, probs2, rule);
      CHECK(a.predicted_class == b.predicted_class);
      CHECK(a.mean_probs == b.mean_probs);
    }
  }
}

TEST_CASE("argmax ties go to the lowest index") {
  Matrix m(2, 3, 0.0);
  m(1, 1) = 2;
  m(1, 2) = 2;
  CHECK(argmax_rows(m) == std::vector<ClassIndex>{0, 1});
}

TEST_CASE("confusion matrix examples") {
  CHECK(confusion_matrix({0, 0, 1, 1}, {0, 1, 1, 1}, 2) == ConfusionMatrix::from_rows({{1, 1}, {0, 2}}));
  CHECK(confusion_matrix({0, 2, 2, 1}, {0, 2, 2, 1}, 3) == ConfusionMatrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 2}}));
  CHECK(confusion_matrix({}, {}, 3) == ConfusionMatrix(3));
  CHECK(ConfusionMatrix(3).total() == 0);
  CHECK_ERROR_KIND(confusion_matrix({0, 3}, {0, 1}, 3), ErrorKind::label);
  CHECK_ERROR_KIND(confusion_matrix({0}, {0, 1}, 3), ErrorKind::consistency);
}

TEST_CASE("metrics on hand-worked matrices") {
  for (const auto& c : testing::metrics_cases()) {
    const auto r = compute_metrics(ConfusionMatrix::from_rows(c.confusion));
    CHECK(std::abs(r.accuracy - c.accuracy) < 1e-12);
    double macro = 0;
    for (std::size_t k = 0; k < c.precision.size(); ++k) {
      CHECK(std::abs(r.precision[k] - c.precision[k]) < 1e-12);
      CHECK(std::abs(r.recall[k] - c.recall[k]) < 1e-12);
      CHECK(std::abs(r.f1[k] - c.f1[k]) < 1e-12);
      CHECK(r.precision_undefined[k] == c.precision_undefined[k]);
      CHECK(r.recall_undefined[k] == c.recall_undefined[k]);
      macro += c.f1[k];
    }
    CHECK(std::abs(r.macro_f1 - macro / c.f1.size()) < 1e-12);
  }
  CHECK_ERROR_KIND(compute_metrics(ConfusionMatrix(2)), ErrorKind::empty_evaluation);
}

TEST_CASE("accuracy equals the mean hit rate") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(500), k = 2 + rng.below(3);
    std::vector<ClassIndex> t(n), p(n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = rng.below(k);
      p[i] = rng.below(3) ? t[i] : rng.below(k);
      hits += t[i] == p[i];
    }
    const auto r = compute_metrics(confusion_matrix(t, p, k));
    CHECK(std::abs(r.accuracy - static_cast<double>(hits) / n) < 1e-15);
    CHECK(r.confusion.total() == n);
    for (std::size_t c = 0; c < k; ++c) {
      CHECK(r.f1[c] >= 0.0);
      CHECK(r.f1[c] <= 1.0);
    }
  }
}

TEST_CASE("report JSON") {
  const auto r = compute_metrics(ConfusionMatrix::from_rows({{5, 0}, {3, 0}}));
  CHECK(r.flags() == std::vector<std::string>{"precision_undefined:1"});
  const auto j = to_json(r, {"a", "b"});
  CHECK(j["confusion"] == nlohmann::json::parse("[[5,0],[3,0]]"));
  CHECK(j["accuracy"] == 0.625);
  CHECK(j["flags"] == nlohmann::json::parse(R"(["precision_undefined:1"])"));
  const auto thirds = to_json(compute_metrics(ConfusionMatrix::from_rows({{1, 2}, {0, 0}})));
  CHECK(thirds["accuracy"].get<double>() == 0.333333);
  CHECK(round6(2.0 / 3) == 0.666667);
}
