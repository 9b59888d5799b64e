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

#ifndef CDSA_MLP_H_
#define CDSA_MLP_H_

#include <span>
#include <vector>

#include <Eigen/Core>

#include "cdsa/json_io.h"
#include "cdsa/rng.h"

namespace cdsa {

// Feed-forward network: LeakyReLU on every hidden layer, linear output.
// Weight i is layer_dims[i+1] x layer_dims[i].
struct MlpParams {
  std::vector<int> layer_dims;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double leaky_slope = 0.1;

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  // Same shapes, every entry zero.
  MlpParams zeros_like() const;
  bool all_finite() const;

  // Flat views in layer order (w0 row-major... b0, w1, b1, ...). Used by
  // finite-difference checks and tests; training never goes through these.
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);

  // Exact (bitwise for finite values) equality of shapes and entries.
  friend bool operator==(const MlpParams& a, const MlpParams& b);
};

// Gradients share the parameter layout.
using MlpGradients = MlpParams;

// Uniform in +-sqrt(6 / ((1 + slope^2) * fan_in)), zero biases.
MlpParams mlp_init(std::span<const int> layer_dims, double leaky_slope,
                   Rng& rng);

Eigen::VectorXd mlp_forward(const MlpParams& params,
                            const Eigen::VectorXd& input);

struct MlpBackward {
  MlpGradients param_grads;
  Eigen::VectorXd input_grad;
};

// Gradient of dot(output_grad, forward(input)) w.r.t. every parameter and
// the input.
MlpBackward mlp_backward(const MlpParams& params, const Eigen::VectorXd& input,
                         const Eigen::VectorXd& output_grad);

// Batched versions; one sample per column.
struct MlpCache {
  // activations[0] is the input; activations[i+1] the output of layer i
  // (post-activation for hidden layers).
  std::vector<Eigen::MatrixXd> activations;
  std::vector<Eigen::MatrixXd> pre_activations;

  const Eigen::MatrixXd& output() const { return activations.back(); }
};

MlpCache mlp_forward_batch(const MlpParams& params,
                           const Eigen::MatrixXd& inputs);

struct MlpBatchBackward {
  MlpGradients param_grads;     // summed over columns
  Eigen::MatrixXd input_grads;  // empty unless requested
};

MlpBatchBackward mlp_backward_batch(const MlpParams& params,
                                    const MlpCache& cache,
                                    const Eigen::MatrixXd& output_grads,
                                    bool want_input_grads = false);

struct AdamState {
  long step_count = 0;
  MlpParams first_moment;
  MlpParams second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const MlpParams& params);
};

// Bias-corrected Adam. Throws NonFiniteError on a non-finite gradient and
// DimensionError on a shape mismatch; neither leaves state half-updated.
void adam_step(AdamState& state, MlpParams& params, const MlpGradients& grads,
               double lr);

// Checkpoint document: {"arch": {"dims", "slope"}, "layers": [{"w", "b"}]}.
Json mlp_to_json(const MlpParams& params);
MlpParams mlp_from_json(const Json& j);

}  // namespace cdsa

#endif  // CDSA_MLP_H_
