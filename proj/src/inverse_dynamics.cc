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

#include "cdsa/inverse_dynamics.h"

#include <stdexcept>
#include <string>

#include "cdsa/errors.h"

namespace cdsa {

void InvDynTrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
}

LossAndGrads invdyn_loss(const MlpParams& net, const Eigen::MatrixXd& s,
                         const Eigen::MatrixXd& a,
                         const Eigen::MatrixXd& s_next) {
  if (s.rows() != s_next.rows() || s.cols() != s_next.cols() ||
      a.cols() != s.cols()) {
    throw DimensionError("invdyn_loss: batch shapes disagree");
  }
  if (net.input_dim() != 2 * s.rows() || net.output_dim() != a.rows()) {
    throw DimensionError("invdyn_loss: network dims do not match batch");
  }
  if (s.cols() == 0) throw std::invalid_argument("invdyn_loss: empty batch");
  Eigen::MatrixXd inputs(2 * s.rows(), s.cols());
  inputs.topRows(s.rows()) = s;
  inputs.bottomRows(s.rows()) = s_next;
  const MlpCache cache = mlp_forward_batch(net, inputs);
  const Eigen::MatrixXd residual = cache.output() - a;
  const double n = static_cast<double>(s.cols());
  LossAndGrads out;
  out.loss = residual.squaredNorm() / n;
  out.grads = mlp_backward_batch(net, cache, (2.0 / n) * residual).param_grads;
  return out;
}

InvDynTrainer::InvDynTrainer(const NormStats& norm,
                             const InvDynTrainConfig& config)
    : norm_(norm), config_(config) {
  config_.validate();
  std::vector<int> dims{2 * norm.state_dim()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(norm.action_dim());
  Rng init_rng = Rng(config.seed).substream("init/invdyn");
  params_ = mlp_init(dims, config.leaky_slope, init_rng);
  adam_ = AdamState::for_params(params_);
}

double InvDynTrainer::step(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a,
                           const Eigen::MatrixXd& s_next) {
  LossAndGrads lg = invdyn_loss(params_, s, a, s_next);
  adam_step(adam_, params_, lg.grads, config_.lr);
  return lg.loss;
}

InvDynModel train_invdyn(const Dataset& dataset,
                         const InvDynTrainConfig& config,
                         std::vector<double>* loss_log) {
  if (dataset.empty()) throw std::invalid_argument("train_invdyn: empty dataset");
  validate_dataset(dataset);
  InvDynTrainer trainer(dataset.norm, config);
  const NormalizedColumns cols = normalized_columns(dataset, dataset.norm);
  Rng batch_rng = Rng(config.seed).substream("batch");
  for (int it = 0; it < config.iterations; ++it) {
    const auto idx = sample_indices(
        dataset, static_cast<std::size_t>(config.batch_size), batch_rng);
    const double loss = trainer.step(cols.gather(cols.s, idx),
                                     cols.gather(cols.a, idx),
                                     cols.gather(cols.s_next, idx));
    if (loss_log) loss_log->push_back(loss);
  }
  return trainer.model();
}

Eigen::VectorXd infer_action(const InvDynModel& model, const Eigen::VectorXd& s,
                             const Eigen::VectorXd& s_tilde) {
  const int sd = model.norm.state_dim();
  if (s.size() != sd || s_tilde.size() != sd) {
    throw DimensionError("infer_action: states must have length " +
                         std::to_string(sd));
  }
  Eigen::VectorXd x(2 * sd);
  x << model.norm.normalize_state(s), model.norm.normalize_state(s_tilde);
  return model.norm.denormalize_action(mlp_forward(model.params, x));
}

Json invdyn_to_json(const InvDynModel& model) {
  Json j = mlp_to_json(model.params);
  j["kind"] = "invdyn";
  j["norm"] = norm_to_json(model.norm);
  return j;
}

InvDynModel invdyn_from_json(const Json& j) {
  if (require(j, "kind").get<std::string>() != "invdyn") {
    throw SchemaError("checkpoint is not an inverse-dynamics model");
  }
  InvDynModel m{mlp_from_json(j), norm_from_json(require(j, "norm"))};
  if (m.params.input_dim() != 2 * m.norm.state_dim() ||
      m.params.output_dim() != m.norm.action_dim()) {
    throw SchemaError("invdyn: network dims disagree with norm dims");
  }
  return m;
}

}  // namespace cdsa
