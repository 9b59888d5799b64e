// Copyright 2026 The CDSA Authors
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

#include "cdsa/mlp.h"

#include <cmath>
#include <string>

#include "cdsa/errors.h"

namespace cdsa {
namespace {

void check_dims(std::span<const int> dims) {
  if (dims.size() < 2) {
    throw DimensionError("mlp: need at least input and output dims");
  }
  for (int d : dims) {
    if (d < 1) throw DimensionError("mlp: layer dims must be >= 1");
  }
}

void leaky_relu_inplace(Eigen::MatrixXd& m, double slope) {
  m = m.unaryExpr([slope](double x) { return x >= 0.0 ? x : slope * x; });
}

// Derivative at exactly 0 is taken as 1.
Eigen::MatrixXd leaky_relu_grad(const Eigen::MatrixXd& pre, double slope) {
  return pre.unaryExpr([slope](double x) { return x >= 0.0 ? 1.0 : slope; });
}

bool same_shape(const MlpParams& a, const MlpParams& b) {
  if (a.layer_dims != b.layer_dims) return false;
  if (a.weights.size() != b.weights.size()) return false;
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    if (a.weights[i].rows() != b.weights[i].rows() ||
        a.weights[i].cols() != b.weights[i].cols() ||
        a.biases[i].size() != b.biases[i].size()) {
      return false;
    }
  }
  return true;
}

}  // namespace

bool operator==(const MlpParams& a, const MlpParams& b) {
  if (!same_shape(a, b) || a.leaky_slope != b.leaky_slope) return false;
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    if (a.weights[i] != b.weights[i] || a.biases[i] != b.biases[i]) {
      return false;
    }
  }
  return true;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    n += static_cast<std::size_t>(weights[i].size() + biases[i].size());
  }
  return n;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z;
  z.layer_dims = layer_dims;
  z.leaky_slope = leaky_slope;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    z.weights.push_back(Eigen::MatrixXd::Zero(weights[i].rows(),
                                              weights[i].cols()));
    z.biases.push_back(Eigen::VectorXd::Zero(biases[i].size()));
  }
  return z;
}

bool MlpParams::all_finite() const {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!weights[i].allFinite() || !biases[i].allFinite()) return false;
  }
  return true;
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < weights[l].cols(); ++c) {
        out.push_back(weights[l](r, c));
      }
    }
    for (Eigen::Index r = 0; r < biases[l].size(); ++r) {
      out.push_back(biases[l][r]);
    }
  }
  return out;
}

void MlpParams::assign_flat(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw DimensionError("assign_flat: expected " +
                         std::to_string(parameter_count()) + " values");
  }
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < weights[l].cols(); ++c) {
        weights[l](r, c) = values[k++];
      }
    }
    for (Eigen::Index r = 0; r < biases[l].size(); ++r) {
      biases[l][r] = values[k++];
    }
  }
}

MlpParams mlp_init(std::span<const int> layer_dims, double leaky_slope,
                   Rng& rng) {
  check_dims(layer_dims);
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
    throw std::invalid_argument("mlp_init: leaky_slope must lie in (0, 1)");
  }
  MlpParams p;
  p.layer_dims.assign(layer_dims.begin(), layer_dims.end());
  p.leaky_slope = leaky_slope;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double bound =
        std::sqrt(6.0 / ((1.0 + leaky_slope * leaky_slope) * fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    // Row-major fill so the draw order matches the checkpoint layout.
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-bound, bound);
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return p;
}

MlpCache mlp_forward_batch(const MlpParams& params,
                           const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != params.input_dim()) {
    throw DimensionError("mlp_forward: input has " +
                         std::to_string(inputs.rows()) + " rows, expected " +
                         std::to_string(params.input_dim()));
  }
  if (!inputs.allFinite()) {
    throw NonFiniteError("mlp_forward: non-finite input");
  }
  MlpCache cache;
  const std::size_t n = params.num_layers();
  cache.activations.reserve(n + 1);
  cache.pre_activations.reserve(n);
  cache.activations.push_back(inputs);
  for (std::size_t l = 0; l < n; ++l) {
    Eigen::MatrixXd pre = params.weights[l] * cache.activations.back();
    pre.colwise() += params.biases[l];
    Eigen::MatrixXd act = pre;
    if (l + 1 < n) leaky_relu_inplace(act, params.leaky_slope);
    cache.pre_activations.push_back(std::move(pre));
    cache.activations.push_back(std::move(act));
  }
  return cache;
}

MlpBatchBackward mlp_backward_batch(const MlpParams& params,
                                    const MlpCache& cache,
                                    const Eigen::MatrixXd& output_grads,
                                    bool want_input_grads) {
  const std::size_t n = params.num_layers();
  if (output_grads.rows() != params.output_dim() ||
      output_grads.cols() != cache.output().cols()) {
    throw DimensionError("mlp_backward: output_grad shape mismatch");
  }
  MlpBatchBackward out;
  out.param_grads.layer_dims = params.layer_dims;
  out.param_grads.leaky_slope = params.leaky_slope;
  out.param_grads.weights.resize(n);
  out.param_grads.biases.resize(n);

  Eigen::MatrixXd delta = output_grads;
  for (std::size_t l = n; l-- > 0;) {
    if (l + 1 < n) {
      delta.array() *=
          leaky_relu_grad(cache.pre_activations[l], params.leaky_slope).array();
    }
    out.param_grads.weights[l].noalias() =
        delta * cache.activations[l].transpose();
    out.param_grads.biases[l] = delta.rowwise().sum();
    if (l > 0 || want_input_grads) {
      Eigen::MatrixXd next = params.weights[l].transpose() * delta;
      delta = std::move(next);
    }
  }
  if (want_input_grads) out.input_grads = std::move(delta);
  return out;
}

Eigen::VectorXd mlp_forward(const MlpParams& params,
                            const Eigen::VectorXd& input) {
  return mlp_forward_batch(params, input).output().col(0);
}

MlpBackward mlp_backward(const MlpParams& params, const Eigen::VectorXd& input,
                         const Eigen::VectorXd& output_grad) {
  if (output_grad.size() != params.output_dim()) {
    throw DimensionError("mlp_backward: output_grad has wrong length");
  }
  const MlpCache cache = mlp_forward_batch(params, input);
  MlpBatchBackward b = mlp_backward_batch(params, cache, output_grad, true);
  return {std::move(b.param_grads), b.input_grads.col(0)};
}

AdamState AdamState::for_params(const MlpParams& params) {
  AdamState s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  return s;
}

void adam_step(AdamState& state, MlpParams& params, const MlpGradients& grads,
               double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be > 0");
  if (!same_shape(params, grads) || !same_shape(params, state.first_moment) ||
      !same_shape(params, state.second_moment)) {
    throw DimensionError("adam_step: shape mismatch");
  }
  if (!grads.all_finite()) {
    throw NonFiniteError("adam_step: non-finite gradient");
  }
  state.step_count += 1;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
  const double eps = state.epsilon;

  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    update(params.weights[l], state.first_moment.weights[l],
           state.second_moment.weights[l], grads.weights[l]);
    update(params.biases[l], state.first_moment.biases[l],
           state.second_moment.biases[l], grads.biases[l]);
  }
}

Json mlp_to_json(const MlpParams& params) {
  Json layers = Json::array();
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    Json rows = Json::array();
    const auto& w = params.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      rows.push_back(to_json(Eigen::VectorXd(w.row(r).transpose())));
    }
    layers.push_back({{"w", rows}, {"b", to_json(params.biases[l])}});
  }
  return {{"arch", {{"dims", params.layer_dims}, {"slope", params.leaky_slope}}},
          {"layers", layers}};
}

MlpParams mlp_from_json(const Json& j) {
  const Json& arch = require(j, "arch");
  MlpParams p;
  const Json& dims = require(arch, "dims");
  if (!dims.is_array()) throw SchemaError("arch.dims must be an array");
  for (const auto& d : dims) p.layer_dims.push_back(d.get<int>());
  try {
    check_dims(p.layer_dims);
  } catch (const DimensionError& e) {
    throw SchemaError(e.what());
  }
  p.leaky_slope = require(arch, "slope").get<double>();
  const Json& layers = require(j, "layers");
  if (!layers.is_array() || layers.size() + 1 != p.layer_dims.size()) {
    throw SchemaError("layers: count does not match arch.dims");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const int rows = p.layer_dims[l + 1];
    const int cols = p.layer_dims[l];
    const Json& w = require(layers[l], "w");
    if (!w.is_array() || static_cast<int>(w.size()) != rows) {
      throw SchemaError("layer " + std::to_string(l) + ": wrong row count");
    }
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      m.row(r) = vector_from_json(w[r], "layer weight row", cols).transpose();
    }
    p.weights.push_back(std::move(m));
    p.biases.push_back(vector_from_json(require(layers[l], "b"), "layer bias",
                                        rows));
  }
  return p;
}

}  // namespace cdsa
