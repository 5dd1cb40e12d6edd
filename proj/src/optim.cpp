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

#include "noisybag/optim.hpp"

#include <cmath>
#include <span>

#include "noisybag/error.hpp"

namespace noisybag {

std::string_view to_string(OptimKind kind) { return kind == OptimKind::adam ? "adam" : "sgd_momentum"; }

OptimKind parse_optim_kind(std::string_view text) {
  if (text == "sgd_momentum" || text == "sgd") return OptimKind::sgd_momentum;
  if (text == "adam") return OptimKind::adam;
  throw Error(ErrorKind::validation, "optimizer must be sgd_momentum or adam");
}

void validate(const OptimSpec& spec) {
  if (!(spec.lr > 0.0)) throw Error(ErrorKind::validation, "lr must be > 0");
  if (!(spec.weight_decay >= 0.0)) throw Error(ErrorKind::validation, "weight_decay must be >= 0");
  if (!(spec.momentum >= 0.0 && spec.momentum < 1.0))
    throw Error(ErrorKind::validation, "momentum must lie in [0, 1)");
  if (!(spec.beta1 >= 0.0 && spec.beta1 < 1.0) || !(spec.beta2 >= 0.0 && spec.beta2 < 1.0))
    throw Error(ErrorKind::validation, "adam betas must lie in [0, 1)");
  if (!(spec.eps_hat > 0.0)) throw Error(ErrorKind::validation, "eps_hat must be > 0");
}

OptimState OptimState::for_params(const NetworkParams& params) {
  return {ParamBuffers::zeros_like(params), ParamBuffers::zeros_like(params), 0};
}

namespace {

void check_shapes(const NetworkParams& params, const Gradients& grads, const OptimState& state,
                  const std::vector<bool>& frozen) {
  if (!grads.matches(params)) throw Error(ErrorKind::consistency, "gradient shapes do not match the network");
  if (!state.first.matches(params) || !state.second.matches(params))
    throw Error(ErrorKind::consistency, "optimizer state shapes do not match the network");
  if (!frozen.empty() && frozen.size() != params.layers.size())
    throw Error(ErrorKind::consistency, "frozen mask length differs from the layer count");
}

bool is_frozen(const std::vector<bool>& frozen, std::size_t layer) { return !frozen.empty() && frozen[layer]; }

// Applies `update(param, grad, first, second)` to every entry of every unfrozen layer.
template <typename Update>
void for_each_entry(NetworkParams& params, const Gradients& grads, OptimState& state,
                    const std::vector<bool>& frozen, Update update) {
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (is_frozen(frozen, l)) continue;
    auto apply = [&](std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v) {
      for (std::size_t i = 0; i < p.size(); ++i) update(p[i], g[i], m[i], v[i]);
    };
    apply(params.layers[l].weights.values(), grads.weights[l].values(), state.first.weights[l].values(),
          state.second.weights[l].values());
    apply(params.layers[l].bias, grads.biases[l], state.first.biases[l], state.second.biases[l]);
  }
}

}  // namespace

void sgd_momentum_step(NetworkParams& params, const Gradients& grads, OptimState& state, const OptimSpec& spec,
                       const std::vector<bool>& frozen) {
  check_shapes(params, grads, state, frozen);
  ++state.step;
  for_each_entry(params, grads, state, frozen, [&](double& p, double g, double& v, double&) {
    const double decayed = g + spec.weight_decay * p;
    v = spec.momentum * v + decayed;
    p -= spec.lr * v;
  });
}

void adam_step(NetworkParams& params, const Gradients& grads, OptimState& state, const OptimSpec& spec,
               const std::vector<bool>& frozen) {
  check_shapes(params, grads, state, frozen);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(spec.beta1, t);
  const double correction2 = 1.0 - std::pow(spec.beta2, t);
  for_each_entry(params, grads, state, frozen, [&](double& p, double g, double& m, double& v) {
    const double decayed = g + spec.weight_decay * p;
    m = spec.beta1 * m + (1.0 - spec.beta1) * decayed;
    v = spec.beta2 * v + (1.0 - spec.beta2) * decayed * decayed;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    p -= spec.lr * m_hat / (std::sqrt(v_hat) + spec.eps_hat);
  });
}

void optimizer_step(NetworkParams& params, const Gradients& grads, OptimState& state, const OptimSpec& spec,
                    const std::vector<bool>& frozen) {
  if (spec.kind == OptimKind::adam)
    adam_step(params, grads, state, spec, frozen);
  else
    sgd_momentum_step(params, grads, state, spec, frozen);
}

}  // namespace noisybag
