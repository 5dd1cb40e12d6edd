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
#include <functional>
#include <vector>

#include <doctest.h>

#include "noisybag/data_model.hpp"
#include "noisybag/error.hpp"
#include "noisybag/nn.hpp"

namespace testing {

inline noisybag::ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const noisybag::Error& e) {
    return e.kind();
  }
  FAIL("expected noisybag::Error");
  return noisybag::ErrorKind::validation;
}

#define CHECK_ERROR_KIND(expr, expected) CHECK(::testing::kind_of([&] { (void)(expr); }) == (expected))

/// Dataset with one bag per entry of `bag_sizes`; every cell of bag b gets
/// label `cell_labels[b]` and a 1-d feature equal to its cell id.
inline noisybag::Dataset bags_dataset(const std::vector<std::size_t>& bag_sizes,
                                      const std::vector<std::size_t>& labels, std::size_t k) {
  noisybag::Dataset ds;
  ds.label_space = noisybag::LabelSpace::for_class_count(k);
  ds.dim = 1;
  noisybag::CellId next = 0;
  for (std::size_t b = 0; b < bag_sizes.size(); ++b) {
    noisybag::Bag bag{b, {}, labels[b]};
    for (std::size_t i = 0; i < bag_sizes[b]; ++i) {
      ds.cells.push_back({next, b, {static_cast<double>(next)}, labels[b]});
      bag.cell_ids.push_back(next++);
    }
    ds.bags.push_back(bag);
  }
  return ds;
}

/// One bag per cell, labels as given.
inline noisybag::Dataset cells_dataset(const std::vector<std::size_t>& labels, std::size_t k) {
  return bags_dataset(std::vector<std::size_t>(labels.size(), 1), labels, k);
}

/// Single linear layer with the given weights (out x in) and bias.
inline noisybag::NetworkParams linear_net(const std::vector<std::vector<double>>& w, const std::vector<double>& b) {
  noisybag::NetworkParams p;
  p.dropout_rate = 0.0;
  noisybag::Layer layer;
  layer.spec = {w.front().size(), w.size(), noisybag::Activation::none};
  layer.weights = noisybag::Matrix(w.size(), w.front().size());
  for (std::size_t o = 0; o < w.size(); ++o)
    for (std::size_t i = 0; i < w[o].size(); ++i) layer.weights(o, i) = w[o][i];
  layer.bias = b;
  p.layers.push_back(layer);
  return p;
}

}  // namespace testing
