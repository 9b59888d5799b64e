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

#include "cdsa/score_field.h"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cdsa/errors.h"

namespace cdsa {
namespace {

// Row range of the perturbed block inside x = (s; a).
struct Block {
  Eigen::Index start;
  Eigen::Index size;
};

Block perturbed_block(ScoreKind kind, int state_dim, Eigen::Index rows) {
  if (state_dim < 1 || rows <= state_dim) {
    throw DimensionError("dsm loss: input rows must exceed state_dim");
  }
  if (kind == ScoreKind::kActionScore) return {state_dim, rows - state_dim};
  return {0, state_dim};
}

void check_net(const MlpParams& net, Eigen::Index rows, Block blk) {
  if (net.input_dim() != rows) {
    throw DimensionError("dsm loss: network input dim " +
                         std::to_string(net.input_dim()) + " != " +
                         std::to_string(rows));
  }
  if (net.output_dim() != blk.size) {
    throw DimensionError("dsm loss: network output dim does not match field");
  }
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("sigma must be a positive finite real");
  }
}

Eigen::VectorXd draw_normal(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
  return z;
}

std::vector<int> field_dims(ScoreKind kind, const NormStats& norm,
                            const std::vector<int>& hidden) {
  std::vector<int> dims;
  dims.push_back(norm.state_dim() + norm.action_dim());
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(kind == ScoreKind::kActionScore ? norm.action_dim()
                                                 : norm.state_dim());
  return dims;
}

}  // namespace

std::string_view to_string(ScoreKind kind) {
  return kind == ScoreKind::kActionScore ? "action_score" : "state_score";
}

ScoreKind score_kind_from_string(std::string_view name) {
  if (name == "action_score") return ScoreKind::kActionScore;
  if (name == "state_score") return ScoreKind::kStateScore;
  throw SchemaError("unknown score field kind '" + std::string(name) + "'");
}

void ScoreTrainConfig::validate() const {
  check_sigma(sigma);
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
}

PerturbedPair perturb_action(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                             double sigma, const Eigen::VectorXd& z) {
  check_sigma(sigma);
  if (z.size() != a.size()) throw DimensionError("perturb_action: z length");
  return {s, a + sigma * z, z};
}

PerturbedPair perturb_action(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                             double sigma, Rng& rng) {
  return perturb_action(s, a, sigma, draw_normal(a.size(), rng));
}

PerturbedPair perturb_state(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                            double sigma, const Eigen::VectorXd& z) {
  check_sigma(sigma);
  if (z.size() != s.size()) throw DimensionError("perturb_state: z length");
  return {s + sigma * z, a, z};
}

PerturbedPair perturb_state(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                            double sigma, Rng& rng) {
  return perturb_state(s, a, sigma, draw_normal(s.size(), rng));
}

LossAndGrads dsm_loss_reparam(const MlpParams& net, ScoreKind kind,
                              int state_dim, const Eigen::MatrixXd& clean,
                              const Eigen::MatrixXd& noise, double sigma) {
  check_sigma(sigma);
  const Block blk = perturbed_block(kind, state_dim, clean.rows());
  check_net(net, clean.rows(), blk);
  if (noise.rows() != blk.size || noise.cols() != clean.cols()) {
    throw DimensionError("dsm_loss_reparam: noise shape mismatch");
  }
  if (clean.cols() == 0) throw std::invalid_argument("dsm loss: empty batch");

  Eigen::MatrixXd inputs = clean;
  inputs.middleRows(blk.start, blk.size) += sigma * noise;
  const MlpCache cache = mlp_forward_batch(net, inputs);
  const Eigen::MatrixXd residual = cache.output() + noise / sigma;

  const double n = static_cast<double>(clean.cols());
  LossAndGrads out;
  out.loss = 0.5 * residual.squaredNorm() / n;
  out.grads =
      mlp_backward_batch(net, cache, residual / n).param_grads;
  return out;
}

LossAndGrads dsm_loss_reparam(const MlpParams& net, ScoreKind kind,
                              int state_dim, const Eigen::MatrixXd& clean,
                              double sigma, Rng& rng,
                              Eigen::MatrixXd* noise_out) {
  const Block blk = perturbed_block(kind, state_dim, clean.rows());
  Eigen::MatrixXd noise(blk.size, clean.cols());
  for (Eigen::Index c = 0; c < noise.cols(); ++c) {
    for (Eigen::Index r = 0; r < noise.rows(); ++r) noise(r, c) = rng.normal();
  }
  LossAndGrads out = dsm_loss_reparam(net, kind, state_dim, clean, noise, sigma);
  if (noise_out) *noise_out = std::move(noise);
  return out;
}

double dsm_loss_reference(const MlpParams& net, ScoreKind kind, int state_dim,
                          const Eigen::MatrixXd& clean,
                          const Eigen::MatrixXd& perturbed, double sigma) {
  check_sigma(sigma);
  const Block blk = perturbed_block(kind, state_dim, clean.rows());
  check_net(net, clean.rows(), blk);
  if (perturbed.rows() != clean.rows() || perturbed.cols() != clean.cols()) {
    throw DimensionError("dsm_loss_reference: batch shapes differ");
  }
  if (clean.cols() == 0) throw std::invalid_argument("dsm loss: empty batch");
  // grad log q(x~ | x) on the perturbed block.
  const Eigen::MatrixXd kernel_score =
      -(perturbed.middleRows(blk.start, blk.size) -
        clean.middleRows(blk.start, blk.size)) /
      (sigma * sigma);
  const Eigen::MatrixXd pred = mlp_forward_batch(net, perturbed).output();
  return 0.5 * (pred - kernel_score).squaredNorm() /
         static_cast<double>(clean.cols());
}

ScoreTrainer::ScoreTrainer(ScoreKind kind, const NormStats& norm,
                           const ScoreTrainConfig& config)
    : kind_(kind),
      norm_(norm),
      config_(config),
      noise_rng_(Rng(config.seed).substream("noise/" +
                                            std::string(to_string(kind)))) {
  config_.validate();
  Rng init_rng = Rng(config.seed).substream("init/" + std::string(to_string(kind)));
  params_ = mlp_init(field_dims(kind, norm, config.hidden), config.leaky_slope,
                     init_rng);
  adam_ = AdamState::for_params(params_);
}

double ScoreTrainer::step(const Eigen::MatrixXd& clean_batch) {
  LossAndGrads lg = dsm_loss_reparam(params_, kind_, norm_.state_dim(),
                                     clean_batch, config_.sigma, noise_rng_);
  if (!(lg.loss >= 0.0)) {
    throw DivergenceError("score training: loss is negative or NaN",
                          adam_.step_count);
  }
  adam_step(adam_, params_, lg.grads, config_.lr);
  return lg.loss;
}

ScoreField ScoreTrainer::field() const {
  return {params_, kind_, config_.sigma, norm_};
}

ScoreField train_score_field(const Dataset& dataset, ScoreKind kind,
                             const ScoreTrainConfig& config,
                             std::vector<double>* loss_log) {
  if (dataset.empty()) throw std::invalid_argument("train_score_field: empty dataset");
  validate_dataset(dataset);
  ScoreTrainer trainer(kind, dataset.norm, config);
  const NormalizedColumns cols = normalized_columns(dataset, dataset.norm);
  Rng batch_rng = Rng(config.seed).substream("batch");
  if (loss_log) loss_log->reserve(loss_log->size() + config.iterations);
  for (int it = 0; it < config.iterations; ++it) {
    const auto idx = sample_indices(
        dataset, static_cast<std::size_t>(config.batch_size), batch_rng);
    const double loss = trainer.step(cols.state_action(idx));
    if (loss_log) loss_log->push_back(loss);
  }
  return trainer.field();
}

Eigen::VectorXd eval_score(const ScoreField& field, const Eigen::VectorXd& s,
                           const Eigen::VectorXd& a) {
  if (s.size() != field.state_dim() || a.size() != field.action_dim()) {
    throw DimensionError("eval_score: (s, a) dims do not match the field");
  }
  Eigen::VectorXd x(s.size() + a.size());
  x << field.norm.normalize_state(s), field.norm.normalize_action(a);
  return mlp_forward(field.params, x);
}

Json score_field_to_json(const ScoreField& field) {
  Json j = mlp_to_json(field.params);
  j["kind"] = std::string(to_string(field.kind));
  j["sigma"] = field.sigma;
  j["norm"] = norm_to_json(field.norm);
  return j;
}

ScoreField score_field_from_json(const Json& j) {
  ScoreField f;
  f.params = mlp_from_json(j);
  f.kind = score_kind_from_string(require(j, "kind").get<std::string>());
  f.sigma = require(j, "sigma").get<double>();
  f.norm = norm_from_json(require(j, "norm"));
  if (f.params.input_dim() != f.state_dim() + f.action_dim() ||
      f.params.output_dim() != f.output_dim()) {
    throw SchemaError("score field: network dims disagree with norm dims");
  }
  return f;
}

}  // namespace cdsa
