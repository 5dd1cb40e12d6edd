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

#include "noisybag/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "noisybag/error.hpp"
#include "text_util.hpp"

namespace noisybag {

std::string_view to_string(Activation activation) {
  return activation == Activation::relu ? "relu" : "none";
}

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::relu;
  if (text == "none") return Activation::none;
  throw Error(ErrorKind::validation, "activation must be relu or none");
}

std::vector<LayerSpec> mlp_specs(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw Error(ErrorKind::config, "a network needs at least input and output dims");
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool head = i + 2 == dims.size();
    specs.push_back({dims[i], dims[i + 1], head ? Activation::none : Activation::relu});
  }
  return specs;
}

std::vector<LayerSpec> NetworkParams::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& layer : layers) out.push_back(layer.spec);
  return out;
}

ParamBuffers ParamBuffers::zeros_like(const NetworkParams& params) {
  ParamBuffers b;
  for (const auto& layer : params.layers) {
    b.weights.emplace_back(layer.weights.rows(), layer.weights.cols());
    b.biases.emplace_back(layer.bias.size(), 0.0);
  }
  return b;
}

bool ParamBuffers::matches(const NetworkParams& params) const {
  if (weights.size() != params.layers.size() || biases.size() != params.layers.size()) return false;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (!weights[l].same_shape(params.layers[l].weights)) return false;
    if (biases[l].size() != params.layers[l].bias.size()) return false;
  }
  return true;
}

void validate(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw Error(ErrorKind::config, "network has no layers");
  for (std::size_t l = 0; l < specs.size(); ++l) {
    if (specs[l].in_dim < 1 || specs[l].out_dim < 1)
      throw Error(ErrorKind::config, "layer " + std::to_string(l) + " has a zero dimension");
    if (l > 0 && specs[l].in_dim != specs[l - 1].out_dim)
      throw Error(ErrorKind::config, "layer " + std::to_string(l) + " in_dim " +
                                         std::to_string(specs[l].in_dim) + " != previous out_dim " +
                                         std::to_string(specs[l - 1].out_dim));
  }
}

void validate(const NetworkParams& params) {
  validate(params.specs());
  if (!(params.dropout_rate >= 0.0 && params.dropout_rate < 1.0))
    throw Error(ErrorKind::config, "dropout rate must lie in [0, 1)");
  for (const auto& layer : params.layers) {
    if (layer.weights.rows() != layer.spec.out_dim || layer.weights.cols() != layer.spec.in_dim ||
        layer.bias.size() != layer.spec.out_dim)
      throw Error(ErrorKind::consistency, "layer buffers do not match the layer spec");
    for (double w : layer.weights.values())
      if (!std::isfinite(w)) throw Error(ErrorKind::numeric_input, "non-finite weight");
    for (double b : layer.bias)
      if (!std::isfinite(b)) throw Error(ErrorKind::numeric_input, "non-finite bias");
  }
}

NetworkParams init_params(const std::vector<LayerSpec>& specs, std::uint64_t seed, double dropout_rate) {
  validate(specs);
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw Error(ErrorKind::config, "dropout rate must lie in [0, 1)");
  NetworkParams params;
  params.dropout_rate = dropout_rate;
  Rng rng(seed);
  for (const auto& spec : specs) {
    Layer layer{spec, Matrix(spec.out_dim, spec.in_dim), std::vector<double>(spec.out_dim, 0.0)};
    const double stddev = std::sqrt(2.0 / static_cast<double>(spec.in_dim));
    for (double& w : layer.weights.values()) w = stddev * rng.normal();
    params.layers.push_back(std::move(layer));
  }
  return params;
}

namespace {

// out = in * W^T + b, fixed loop order.
Matrix affine(const Matrix& in, const Layer& layer) {
  const auto n = in.rows();
  const auto out_dim = layer.spec.out_dim;
  const auto in_dim = layer.spec.in_dim;
  Matrix out(n, out_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = in.row(i);
    auto y = out.row(i);
    for (std::size_t o = 0; o < out_dim; ++o) {
      const auto w = layer.weights.row(o);
      double acc = layer.bias[o];
      for (std::size_t j = 0; j < in_dim; ++j) acc += w[j] * x[j];
      y[o] = acc;
    }
  }
  return out;
}

Matrix activate(const Matrix& pre, Activation activation) {
  Matrix out = pre;
  if (activation == Activation::relu) {
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  }
  return out;
}

void check_input(const NetworkParams& params, const Matrix& batch) {
  if (params.layers.empty()) throw Error(ErrorKind::config, "network has no layers");
  if (batch.cols() != params.input_dim())
    throw Error(ErrorKind::dimension_mismatch, "input has " + std::to_string(batch.cols()) +
                                                   " features, network expects " +
                                                   std::to_string(params.input_dim()));
  for (double v : batch.values())
    if (!std::isfinite(v)) throw Error(ErrorKind::numeric_input, "non-finite network input");
}

}  // namespace

ForwardResult forward(const NetworkParams& params, const Matrix& batch, Mode mode, std::uint64_t seed) {
  check_input(params, batch);
  const auto depth = params.layers.size();
  ForwardResult result;
  auto& trace = result.trace;
  trace.input = batch;

  const bool drop = mode == Mode::train && depth >= 2 && params.dropout_rate > 0.0;
  for (std::size_t l = 0; l < depth; ++l) {
    const Matrix* in = l == 0 ? &trace.input : &trace.activations[l - 1];
    Matrix dropped;
    if (drop && l + 1 == depth) {
      Rng rng(seed);
      const double keep_scale = 1.0 / (1.0 - params.dropout_rate);
      trace.dropout_scale = Matrix(in->rows(), in->cols());
      dropped = *in;
      auto scale = trace.dropout_scale.values();
      auto values = dropped.values();
      for (std::size_t i = 0; i < scale.size(); ++i) {
        scale[i] = rng.uniform() < params.dropout_rate ? 0.0 : keep_scale;
        values[i] *= scale[i];
      }
      in = &dropped;
    }
    trace.pre_activations.push_back(affine(*in, params.layers[l]));
    trace.activations.push_back(activate(trace.pre_activations.back(), params.layers[l].spec.activation));
  }
  result.logits = trace.activations.back();
  return result;
}

Matrix predict_logits(const NetworkParams& params, const Matrix& batch) {
  check_input(params, batch);
  Matrix current = batch;
  for (const auto& layer : params.layers) current = activate(affine(current, layer), layer.spec.activation);
  return current;
}

Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    auto p = out.row(i);
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      p[c] = std::exp(z[c] - m);
      sum += p[c];
    }
    for (double& v : p) v /= sum;
  }
  return out;
}

Gradients backward(const NetworkParams& params, const ForwardTrace& trace, const Matrix& grad_logits) {
  const auto depth = params.layers.size();
  if (trace.pre_activations.size() != depth || trace.activations.size() != depth)
    throw Error(ErrorKind::consistency, "trace depth does not match the network");
  const auto n = trace.input.rows();
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& spec = params.layers[l].spec;
    if (trace.pre_activations[l].rows() != n || trace.pre_activations[l].cols() != spec.out_dim)
      throw Error(ErrorKind::consistency, "trace layer " + std::to_string(l) + " has the wrong shape");
  }
  if (trace.input.cols() != params.input_dim())
    throw Error(ErrorKind::consistency, "trace input width does not match the network");
  if (grad_logits.rows() != n || grad_logits.cols() != params.output_dim())
    throw Error(ErrorKind::consistency, "upstream gradient shape does not match the logits");
  const bool dropped = trace.dropout_scale.size() != 0;
  if (dropped && (depth < 2 || !trace.dropout_scale.same_shape(trace.activations[depth - 2])))
    throw Error(ErrorKind::consistency, "dropout mask does not match the head input");

  Gradients grads = Gradients::zeros_like(params);
  Matrix delta = grad_logits;
  for (std::size_t l = depth; l-- > 0;) {
    const auto& layer = params.layers[l];
    if (layer.spec.activation == Activation::relu) {
      const auto pre = trace.pre_activations[l].values();
      auto d = delta.values();
      for (std::size_t i = 0; i < d.size(); ++i)
        if (!(pre[i] > 0.0)) d[i] = 0.0;
    }

    Matrix head_input;
    const Matrix* in = l == 0 ? &trace.input : &trace.activations[l - 1];
    if (dropped && l + 1 == depth) {
      head_input = *in;
      auto v = head_input.values();
      const auto s = trace.dropout_scale.values();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] *= s[i];
      in = &head_input;
    }

    auto& dw = grads.weights[l];
    auto& db = grads.biases[l];
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = delta.row(i);
      const auto x = in->row(i);
      for (std::size_t o = 0; o < layer.spec.out_dim; ++o) {
        db[o] += d[o];
        auto w = dw.row(o);
        for (std::size_t j = 0; j < layer.spec.in_dim; ++j) w[j] += d[o] * x[j];
      }
    }

    if (l == 0) break;
    Matrix below(n, layer.spec.in_dim);
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = delta.row(i);
      auto b = below.row(i);
      for (std::size_t o = 0; o < layer.spec.out_dim; ++o) {
        const auto w = layer.weights.row(o);
        for (std::size_t j = 0; j < layer.spec.in_dim; ++j) b[j] += d[o] * w[j];
      }
    }
    if (dropped && l + 1 == depth) {
      auto b = below.values();
      const auto s = trace.dropout_scale.values();
      for (std::size_t i = 0; i < b.size(); ++i) b[i] *= s[i];
    }
    delta = std::move(below);
  }
  return grads;
}

LossAndGradients loss_and_gradients(const NetworkParams& params, const Matrix& batch,
                                    const std::vector<ClassIndex>& targets, const LossSpec& loss) {
  auto fwd = forward(params, batch, Mode::eval);
  auto l = compute_loss(loss, fwd.logits, targets);
  return {l.loss, backward(params, fwd.trace, l.grad)};
}

namespace {

// Loss of the eval-mode network recomputed in extended precision. Serves as
// the numeric side of the gradient check; it shares no code with forward().
long double extended_loss(const NetworkParams& params, const Matrix& batch, const std::vector<ClassIndex>& targets,
                          double epsilon) {
  const auto n = batch.rows();
  long double total = 0.0L;
  std::vector<long double> current;
  std::vector<long double> next;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = batch.row(i);
    current.assign(x.begin(), x.end());
    for (const auto& layer : params.layers) {
      next.assign(layer.spec.out_dim, 0.0L);
      for (std::size_t o = 0; o < layer.spec.out_dim; ++o) {
        long double acc = layer.bias[o];
        const auto w = layer.weights.row(o);
        for (std::size_t j = 0; j < layer.spec.in_dim; ++j) acc += static_cast<long double>(w[j]) * current[j];
        next[o] = layer.spec.activation == Activation::relu && acc < 0.0L ? 0.0L : acc;
      }
      current.swap(next);
    }
    const auto k = current.size();
    long double m = current[0];
    for (auto z : current) m = std::max(m, z);
    long double sum = 0.0L;
    for (auto z : current) sum += std::exp(z - m);
    const long double log_sum = std::log(sum);
    const long double off = static_cast<long double>(epsilon) / static_cast<long double>(k);
    for (std::size_t c = 0; c < k; ++c) {
      const long double q = (c == targets[i] ? 1.0L - epsilon : 0.0L) + off;
      total -= q * (current[c] - m - log_sum);
    }
  }
  return total / static_cast<long double>(n);
}

}  // namespace

double gradient_relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport compare_with_finite_differences(const NetworkParams& params, const Matrix& batch,
                                                const std::vector<ClassIndex>& targets,
                                                const Gradients& analytic, double tolerance,
                                                const GradCheckOptions& options) {
  if (!analytic.matches(params)) throw Error(ErrorKind::consistency, "gradient buffers do not match the network");
  GradCheckReport report;
  report.tolerance = tolerance;
  NetworkParams probe = params;
  const double h = options.step;
  const double eps = options.loss.smoothing();
  auto eval_loss = [&] { return extended_loss(probe, batch, targets, eps); };
  auto check = [&](double& slot, double analytic_value) {
    const double saved = slot;
    // Perturbations are applied to the double parameter, so the effective
    // step is the representable difference, not h itself.
    auto at = [&](double offset, long double& step) {
      slot = saved + offset;
      step = static_cast<long double>(slot) - saved;
      return eval_loss();
    };
    // Five-point central stencil; h is small enough that the effective steps
    // only differ from (h, 2h) by rounding, which the step values absorb.
    long double h1 = 0, h2 = 0, hm1 = 0, hm2 = 0;
    const long double f1 = at(h, h1);
    const long double fm1 = at(-h, hm1);
    const long double f2 = at(2.0 * h, h2);
    const long double fm2 = at(-2.0 * h, hm2);
    slot = saved;
    const long double d1 = (f1 - fm1) / (h1 - hm1);
    const long double d2 = (f2 - fm2) / (h2 - hm2);
    const double numeric = static_cast<double>((4.0L * d1 - d2) / 3.0L);
    report.max_absolute_error = std::max(report.max_absolute_error, std::abs(analytic_value - numeric));
    report.max_relative_error = std::max(
        report.max_relative_error, gradient_relative_error(analytic_value, numeric, options.relative_floor));
    ++report.parameters_checked;
  };
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    auto w = probe.layers[l].weights.values();
    const auto gw = analytic.weights[l].values();
    for (std::size_t i = 0; i < w.size(); ++i) check(w[i], gw[i]);
    auto& b = probe.layers[l].bias;
    for (std::size_t i = 0; i < b.size(); ++i) check(b[i], analytic.biases[l][i]);
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

Matrix draw_kink_free_batch(const NetworkParams& params, std::size_t rows, double margin, Rng& rng,
                            std::size_t& rejected) {
  constexpr std::size_t kMaxDraws = 10000;
  for (std::size_t attempt = 0; attempt < kMaxDraws; ++attempt) {
    Matrix batch(rows, params.input_dim());
    for (double& v : batch.values()) v = rng.normal();
    const auto trace = forward(params, batch, Mode::eval).trace;
    bool near_kink = false;
    for (std::size_t l = 0; l < params.layers.size() && !near_kink; ++l) {
      if (params.layers[l].spec.activation != Activation::relu) continue;
      for (double v : trace.pre_activations[l].values()) {
        if (std::abs(v) < margin) {
          near_kink = true;
          break;
        }
      }
    }
    if (!near_kink) return batch;
    ++rejected;
  }
  throw Error(ErrorKind::numeric_input, "could not draw a batch away from relu kinks");
}

GradCheckReport grad_check(const std::vector<LayerSpec>& specs, std::uint64_t seed, double tolerance,
                           const GradCheckOptions& options) {
  auto params = init_params(specs, derive_seed({seed, 1}), 0.0);
  Rng rng(derive_seed({seed, 2}));
  for (auto& layer : params.layers)
    for (double& b : layer.bias) b = 0.1 * rng.normal();

  std::size_t rejected = 0;
  const Matrix batch = draw_kink_free_batch(params, options.batch_size, options.kink_margin, rng, rejected);
  std::vector<ClassIndex> targets(options.batch_size);
  for (auto& t : targets) t = static_cast<ClassIndex>(rng.below(params.output_dim()));

  const auto analytic = loss_and_gradients(params, batch, targets, options.loss);
  auto report = compare_with_finite_differences(params, batch, targets, analytic.gradients, tolerance, options);
  report.rejected_draws = rejected;
  return report;
}

std::string to_text(const NetworkParams& params) {
  validate(params);
  std::string out = "LAYERS=" + std::to_string(params.layers.size()) + " DROPOUT=";
  detail::append_double(out, params.dropout_rate);
  out += '\n';
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    out += "L" + std::to_string(l) + " " + std::to_string(layer.spec.in_dim) + " " +
           std::to_string(layer.spec.out_dim) + " " + std::string(to_string(layer.spec.activation)) + "\n";
    bool first = true;
    for (double w : layer.weights.values()) {
      if (!first) out += ' ';
      detail::append_double(out, w);
      first = false;
    }
    out += '\n';
    first = true;
    for (double b : layer.bias) {
      if (!first) out += ' ';
      detail::append_double(out, b);
      first = false;
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<double> parse_reals(std::string_view line, std::size_t expected, std::size_t line_no) {
  const auto fields = detail::split(line, ' ');
  if (fields.size() != expected)
    throw Error(ErrorKind::arity, "checkpoint line " + std::to_string(line_no) + " has " +
                                      std::to_string(fields.size()) + " values, expected " +
                                      std::to_string(expected));
  std::vector<double> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    if (!detail::parse_double(fields[i], values[i]))
      throw Error(ErrorKind::parse, "bad real on checkpoint line " + std::to_string(line_no));
    if (!std::isfinite(values[i]))
      throw Error(ErrorKind::non_finite_value, "non-finite value on checkpoint line " + std::to_string(line_no));
  }
  return values;
}

}  // namespace

NetworkParams params_from_text(std::string_view text) {
  const auto all = detail::lines(text);
  if (all.empty()) throw Error(ErrorKind::malformed_header, "empty checkpoint");
  const auto header = detail::split(all[0], ' ');
  std::size_t depth = 0;
  NetworkParams params;
  if (header.size() != 2 || header[0].substr(0, 7) != "LAYERS=" || header[1].substr(0, 8) != "DROPOUT=" ||
      !detail::parse_int(header[0].substr(7), depth) ||
      !detail::parse_double(header[1].substr(8), params.dropout_rate))
    throw Error(ErrorKind::malformed_header, "expected 'LAYERS=<n> DROPOUT=<rate>'");
  if (all.size() != 1 + 3 * depth)
    throw Error(ErrorKind::arity, "checkpoint has " + std::to_string(all.size()) + " lines, expected " +
                                      std::to_string(1 + 3 * depth));
  for (std::size_t l = 0; l < depth; ++l) {
    const auto line_no = 2 + 3 * l;
    const auto fields = detail::split(all[1 + 3 * l], ' ');
    LayerSpec spec;
    if (fields.size() != 4 || fields[0] != "L" + std::to_string(l) || !detail::parse_int(fields[1], spec.in_dim) ||
        !detail::parse_int(fields[2], spec.out_dim))
      throw Error(ErrorKind::malformed_header, "bad layer header on checkpoint line " + std::to_string(line_no));
    spec.activation = parse_activation(fields[3]);
    Layer layer{spec, Matrix(spec.out_dim, spec.in_dim), {}};
    const auto weights = parse_reals(all[2 + 3 * l], spec.out_dim * spec.in_dim, line_no + 1);
    std::copy(weights.begin(), weights.end(), layer.weights.values().begin());
    layer.bias = parse_reals(all[3 + 3 * l], spec.out_dim, line_no + 2);
    params.layers.push_back(std::move(layer));
  }
  validate(params);
  return params;
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
  detail::write_file(path, to_text(params));
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  return params_from_text(detail::read_file(path));
}

}  // namespace noisybag
