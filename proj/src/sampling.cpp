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

#include "noisybag/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "noisybag/error.hpp"
#include "noisybag/rng.hpp"
#include "text_util.hpp"

namespace noisybag {

std::string_view to_string(StratifyKey key) {
  return key == StratifyKey::cell_label ? "cell_label" : "bag_label";
}

StratifyKey parse_stratify_key(std::string_view text) {
  if (text == "cell_label") return StratifyKey::cell_label;
  if (text == "bag_label") return StratifyKey::bag_label;
  throw Error(ErrorKind::validation, "stratify_key must be cell_label or bag_label");
}

void validate(const SplitSpec& spec) {
  if (spec.fractions.empty()) throw Error(ErrorKind::validation, "fractions must be non-empty");
  double sum = 0.0;
  for (double f : spec.fractions) {
    if (!(f > 0.0)) throw Error(ErrorKind::validation, "fractions must be > 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::validation, "fractions must sum to 1");
}

std::vector<std::size_t> largest_remainder(std::size_t n, const std::vector<double>& fractions) {
  std::vector<std::size_t> counts(fractions.size());
  std::vector<double> remainder(fractions.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double quota = fractions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(fractions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t j = 0; assigned < n; j = (j + 1) % order.size()) {
    ++counts[order[j]];
    ++assigned;
  }
  // Only reachable when the fractions sum a hair above 1.
  for (auto it = order.rbegin(); assigned > n && it != order.rend(); ++it) {
    if (counts[*it] > 0) {
      --counts[*it];
      --assigned;
    }
  }
  return counts;
}

std::vector<Dataset> stratified_split(const Dataset& dataset, const SplitSpec& spec) {
  validate(spec);
  const auto parts = spec.fractions.size();
  const auto k = dataset.num_classes();

  // Strata hold positions into dataset.cells (cell_label) or dataset.bags (bag_label).
  std::vector<std::vector<std::size_t>> strata(k);
  if (spec.stratify_key == StratifyKey::cell_label) {
    for (std::size_t i = 0; i < dataset.cells.size(); ++i) strata.at(dataset.cells[i].label).push_back(i);
  } else {
    for (std::size_t i = 0; i < dataset.bags.size(); ++i) strata.at(dataset.bags[i].bag_label).push_back(i);
  }

  for (std::size_t c = 0; c < k; ++c) {
    if (!strata[c].empty() && strata[c].size() < parts)
      throw Error(ErrorKind::infeasible_split,
                  "class " + std::to_string(c) + " (" + dataset.label_space.names[c] + ") has " +
                      std::to_string(strata[c].size()) + " members for " + std::to_string(parts) +
                      " parts");
  }

  Rng rng(spec.seed);
  std::vector<std::vector<std::size_t>> chosen(parts);
  for (auto& members : strata) {
    shuffle(members, rng);
    const auto sizes = largest_remainder(members.size(), spec.fractions);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts; ++p) {
      chosen[p].insert(chosen[p].end(), members.begin() + static_cast<std::ptrdiff_t>(offset),
                       members.begin() + static_cast<std::ptrdiff_t>(offset + sizes[p]));
      offset += sizes[p];
    }
  }

  std::vector<Dataset> out;
  out.reserve(parts);
  if (spec.stratify_key == StratifyKey::cell_label) {
    for (auto& positions : chosen) {
      std::sort(positions.begin(), positions.end());
      out.push_back(subset_cells(dataset, positions));
    }
    return out;
  }

  const auto bag_rows = bag_cell_positions(dataset);
  for (auto& bags : chosen) {
    std::sort(bags.begin(), bags.end());
    std::vector<std::size_t> positions;
    for (auto b : bags) positions.insert(positions.end(), bag_rows[b].begin(), bag_rows[b].end());
    std::sort(positions.begin(), positions.end());
    out.push_back(subset_cells(dataset, positions));
  }
  return out;
}

ProportionalBatchIterator::ProportionalBatchIterator(const std::vector<ClassIndex>& labels,
                                                     std::size_t num_classes, std::size_t batch_size,
                                                     std::uint64_t seed)
    : members_(num_classes), quota_(num_classes, 0), batch_size_(batch_size), seed_(seed) {
  if (batch_size < num_classes)
    throw Error(ErrorKind::config, "batch_size " + std::to_string(batch_size) +
                                       " is smaller than the class count " + std::to_string(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw Error(ErrorKind::label, "label out of range in batch sampler");
    members_[labels[i]].push_back(i);
  }
  std::vector<std::size_t> present;
  std::size_t max_count = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (!members_[c].empty()) present.push_back(c);
    max_count = std::max(max_count, members_[c].size());
  }
  if (present.empty()) throw Error(ErrorKind::empty_evaluation, "batch sampler over an empty dataset");
  const auto classes = present.size();
  for (std::size_t j = 0; j < classes; ++j) {
    quota_[present[j]] = batch_size / classes + (j < batch_size % classes ? 1 : 0);
  }
  batches_per_epoch_ = (max_count * classes + batch_size - 1) / batch_size;
}

std::vector<std::vector<std::size_t>> ProportionalBatchIterator::epoch(std::uint64_t epoch_index) const {
  std::vector<std::vector<std::size_t>> batches(batches_per_epoch_);
  for (auto& b : batches) b.reserve(batch_size_);
  for (std::size_t c = 0; c < members_.size(); ++c) {
    if (quota_[c] == 0) continue;
    Rng rng(derive_seed({seed_, epoch_index, c}));
    std::vector<std::size_t> order = members_[c];
    shuffle(order, rng);
    std::size_t cursor = 0;
    for (auto& batch : batches) {
      for (std::size_t q = 0; q < quota_[c]; ++q) {
        if (cursor == order.size()) {
          shuffle(order, rng);
          cursor = 0;
        }
        batch.push_back(order[cursor++]);
      }
    }
  }
  return batches;
}

NoisyDataset inject_noise(const Dataset& dataset, const NoiseSpec& spec) {
  if (!(spec.rate >= 0.0 && spec.rate <= 1.0))
    throw Error(ErrorKind::validation, "noise rate must lie in [0, 1]");
  const auto k = dataset.num_classes();
  if (spec.rate > 0.0 && k < 2)
    throw Error(ErrorKind::validation, "noise rate > 0 needs at least 2 classes (K=" + std::to_string(k) + ")");

  NoisyDataset out{dataset, std::vector<bool>(dataset.cells.size(), false)};
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < out.dataset.cells.size(); ++i) {
    if (rng.uniform() < spec.rate) {
      auto& label = out.dataset.cells[i].label;
      auto replacement = static_cast<ClassIndex>(rng.below(k - 1));
      if (replacement >= label) ++replacement;
      label = replacement;
      out.flip_mask[i] = true;
    }
  }
  return out;
}

std::string flip_mask_to_text(const Dataset& dataset, const std::vector<bool>& mask) {
  if (mask.size() != dataset.cells.size())
    throw Error(ErrorKind::consistency, "flip mask length differs from the cell count");
  std::string out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    out += std::to_string(dataset.cells[i].cell_id) + (mask[i] ? ",1\n" : ",0\n");
  return out;
}

void save_flip_mask(const Dataset& dataset, const std::vector<bool>& mask,
                    const std::filesystem::path& path) {
  detail::write_file(path, flip_mask_to_text(dataset, mask));
}

}  // namespace noisybag
