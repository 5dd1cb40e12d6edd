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

#include "noisybag/data_model.hpp"

namespace noisybag {

enum class StratifyKey { cell_label, bag_label };

std::string_view to_string(StratifyKey key);
StratifyKey parse_stratify_key(std::string_view text);

struct SplitSpec {
  std::vector<double> fractions{0.8, 0.2};
  StratifyKey stratify_key = StratifyKey::cell_label;
  std::uint64_t seed = 0;
};

void validate(const SplitSpec& spec);

/// Largest-remainder apportionment of n items to parts with the given
/// fractions. Leftover items go to the largest fractional parts; ties go to
/// the lower part index.
std::vector<std::size_t> largest_remainder(std::size_t n, const std::vector<double>& fractions);

/// Stratified proportional split.
///
/// Strata are the classes under `stratify_key`. Members of each stratum (cells,
/// or whole bags for bag_label) are taken in id order, shuffled with one seeded
/// stream visited in ascending class order, then cut into consecutive runs of
/// the largest_remainder sizes. Bag-level splits move whole patients.
std::vector<Dataset> stratified_split(const Dataset& dataset, const SplitSpec& spec);

/// Class-balanced batches over dataset.cells positions.
///
/// Each batch holds floor(B/C) members of every class present plus one extra
/// for the first B mod C classes (ascending class index), where C counts the
/// classes with at least one cell. Each class is traversed through successive
/// seeded permutations of its members, so a minority class repeats within an
/// epoch only after all of its members were used. An epoch has
/// ceil(max_class_count * C / B) batches.
class ProportionalBatchIterator {
 public:
  ProportionalBatchIterator(const std::vector<ClassIndex>& labels, std::size_t num_classes,
                            std::size_t batch_size, std::uint64_t seed);

  std::size_t batches_per_epoch() const noexcept { return batches_per_epoch_; }
  std::size_t batch_size() const noexcept { return batch_size_; }

  /// Per-class quota in every batch, indexed by class (0 for absent classes).
  const std::vector<std::size_t>& quota() const noexcept { return quota_; }

  /// All batches of one epoch. Pure function of (seed, epoch).
  std::vector<std::vector<std::size_t>> epoch(std::uint64_t epoch_index) const;

 private:
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::size_t> quota_;
  std::size_t batch_size_ = 0;
  std::size_t batches_per_epoch_ = 0;
  std::uint64_t seed_ = 0;
};

struct NoiseSpec {
  double rate = 0.2;
  std::uint64_t seed = 0;
};

struct NoisyDataset {
  Dataset dataset;
  /// Aligned with dataset.cells.
  std::vector<bool> flip_mask;
};

/// Symmetric label noise: each cell label is replaced, with probability
/// `rate`, by a uniformly chosen different class. Bag labels are untouched.
NoisyDataset inject_noise(const Dataset& dataset, const NoiseSpec& spec);

/// `cell_id,flipped` lines, one per cell in dataset order.
std::string flip_mask_to_text(const Dataset& dataset, const std::vector<bool>& mask);
void save_flip_mask(const Dataset& dataset, const std::vector<bool>& mask,
                    const std::filesystem::path& path);

}  // namespace noisybag
