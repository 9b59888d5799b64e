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

#ifndef CDSA_INVERSE_DYNAMICS_H_
#define CDSA_INVERSE_DYNAMICS_H_

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cdsa/dataset.h"
#include "cdsa/mlp.h"
#include "cdsa/score_field.h"

namespace cdsa {

struct InvDynTrainConfig {
  int iterations = 10000;
  int batch_size = 256;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {128, 128, 128};
  double leaky_slope = 0.2;

  void validate() const;
};

// I(s, s~) -> action. Input is (normalized s; normalized s~), output a
// normalized action.
struct InvDynModel {
  MlpParams params;
  NormStats norm;
};

// Mean over columns of ||net(s; s_next) - a||^2, all normalized.
LossAndGrads invdyn_loss(const MlpParams& net, const Eigen::MatrixXd& s,
                         const Eigen::MatrixXd& a,
                         const Eigen::MatrixXd& s_next);

class InvDynTrainer {
 public:
  InvDynTrainer(const NormStats& norm, const InvDynTrainConfig& config);

  double step(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a,
              const Eigen::MatrixXd& s_next);

  InvDynModel model() const { return {params_, norm_}; }

 private:
  NormStats norm_;
  InvDynTrainConfig config_;
  MlpParams params_;
  AdamState adam_;
};

// The target state s~ is always the recorded next state.
InvDynModel train_invdyn(const Dataset& dataset,
                         const InvDynTrainConfig& config,
                         std::vector<double>* loss_log = nullptr);

// Environment units in and out.
Eigen::VectorXd infer_action(const InvDynModel& model, const Eigen::VectorXd& s,
                             const Eigen::VectorXd& s_tilde);

Json invdyn_to_json(const InvDynModel& model);
InvDynModel invdyn_from_json(const Json& j);

}  // namespace cdsa

#endif  // CDSA_INVERSE_DYNAMICS_H_
