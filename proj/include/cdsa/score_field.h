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

#ifndef CDSA_SCORE_FIELD_H_
#define CDSA_SCORE_FIELD_H_

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cdsa/dataset.h"
#include "cdsa/mlp.h"
#include "cdsa/rng.h"

namespace cdsa {

// Which block of x = (s, a) the field differentiates and perturbs.
enum class ScoreKind { kActionScore, kStateScore };

std::string_view to_string(ScoreKind kind);
ScoreKind score_kind_from_string(std::string_view name);

struct ScoreTrainConfig {
  double sigma = 0.1;  // normalized units
  int iterations = 10000;
  int batch_size = 256;
  double lr = 3e-4;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {32, 128, 32};
  double leaky_slope = 0.1;

  void validate() const;
};

// g(s, a) ~ grad_a log p(s, a) or h(s, a) ~ grad_s log p(s, a), both in
// normalized coordinates.
struct ScoreField {
  MlpParams params;
  ScoreKind kind = ScoreKind::kActionScore;
  double sigma = 0.1;
  NormStats norm;

  int state_dim() const { return norm.state_dim(); }
  int action_dim() const { return norm.action_dim(); }
  int output_dim() const {
    return kind == ScoreKind::kActionScore ? action_dim() : state_dim();
  }
};

struct PerturbedPair {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  Eigen::VectorXd z;  // standard-normal draw on the perturbed block
};

// s unchanged, a + sigma * z.
PerturbedPair perturb_action(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                             double sigma, Rng& rng);
PerturbedPair perturb_action(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                             double sigma, const Eigen::VectorXd& z);
// s + sigma * z', a unchanged.
PerturbedPair perturb_state(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                            double sigma, Rng& rng);
PerturbedPair perturb_state(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                            double sigma, const Eigen::VectorXd& z);

struct LossAndGrads {
  double loss = 0.0;
  MlpGradients grads;
};

// Reparameterized DSM loss: mean over columns of
//   0.5 * || net(x + sigma * (0, z)) + z / sigma ||^2
// where `clean` holds x = (s; a) per column and `noise` holds z for the
// perturbed block (action rows for kActionScore, state rows otherwise).
LossAndGrads dsm_loss_reparam(const MlpParams& net, ScoreKind kind,
                              int state_dim, const Eigen::MatrixXd& clean,
                              const Eigen::MatrixXd& noise, double sigma);
// Draws the noise block from `rng`; `noise_out` receives it when non-null.
LossAndGrads dsm_loss_reparam(const MlpParams& net, ScoreKind kind,
                              int state_dim, const Eigen::MatrixXd& clean,
                              double sigma, Rng& rng,
                              Eigen::MatrixXd* noise_out = nullptr);

// Denoising objective written against the Gaussian kernel score:
//   0.5 * mean || net(x_tilde) + (x_tilde_blk - x_blk) / sigma^2 ||^2.
// Test oracle only; training never calls it.
double dsm_loss_reference(const MlpParams& net, ScoreKind kind, int state_dim,
                          const Eigen::MatrixXd& clean,
                          const Eigen::MatrixXd& perturbed, double sigma);

// Holds one field's parameters, optimizer and noise stream so that
// standalone and joint training run the identical update.
class ScoreTrainer {
 public:
  ScoreTrainer(ScoreKind kind, const NormStats& norm,
               const ScoreTrainConfig& config);

  // One Adam step on a batch of normalized (s; a) columns; returns the loss.
  double step(const Eigen::MatrixXd& clean_batch);

  ScoreField field() const;

 private:
  ScoreKind kind_;
  NormStats norm_;
  ScoreTrainConfig config_;
  MlpParams params_;
  AdamState adam_;
  Rng noise_rng_;
};

ScoreField train_score_field(const Dataset& dataset, ScoreKind kind,
                             const ScoreTrainConfig& config,
                             std::vector<double>* loss_log = nullptr);

// Normalizes (s, a) with the field's stats; the result stays normalized.
Eigen::VectorXd eval_score(const ScoreField& field, const Eigen::VectorXd& s,
                           const Eigen::VectorXd& a);

Json score_field_to_json(const ScoreField& field);
ScoreField score_field_from_json(const Json& j);

}  // namespace cdsa

#endif  // CDSA_SCORE_FIELD_H_
