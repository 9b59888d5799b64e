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

#ifndef CDSA_CONTROLLER_H_
#define CDSA_CONTROLLER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cdsa/dataset.h"
#include "cdsa/env.h"
#include "cdsa/inverse_dynamics.h"
#include "cdsa/policy.h"
#include "cdsa/rng.h"
#include "cdsa/score_field.h"

namespace cdsa {

// The trained triple plus the shared normalization of its training data.
struct CdsaModels {
  ScoreField action_score;
  ScoreField state_score;
  InvDynModel invdyn;
  NormStats norm;

  int state_dim() const { return norm.state_dim(); }
  int action_dim() const { return norm.action_dim(); }
  // Throws SchemaError when kinds, dims or normalization disagree.
  void validate() const;
};

struct TrainLogs {
  std::vector<double> action_score;
  std::vector<double> state_score;
  std::vector<double> invdyn;
};

// Joint loop: each iteration samples one batch of (s, a, s') and updates
// g, h and I in turn. Both score fields use `score_config` (with their own
// init and noise streams); with equal seeds and batch sizes each model is
// bitwise identical to its standalone training.
CdsaModels train_cdsa(const Dataset& dataset, const ScoreTrainConfig& score_config,
                      const InvDynTrainConfig& invdyn_config,
                      TrainLogs* logs = nullptr);

enum class Ablation { kFull, kNoA1, kNoA2, kBaseline };

std::string_view to_string(Ablation ablation);
Ablation ablation_from_string(std::string_view name);

struct ControlConfig {
  double k1 = 0.1;
  double k2 = 0.1;
  int n_refine = 1;
  Eigen::VectorXd action_low;
  Eigen::VectorXd action_high;
  Ablation ablation = Ablation::kFull;

  static ControlConfig for_env(const EnvSpec& spec);
  void validate() const;
  bool uses_a1() const;
  bool uses_a2() const;
};

struct CorrectionTrace {
  // Norm of the applied action change on each pass (1 + n_refine entries).
  std::vector<double> pass_delta_norms;
};

// a <- clip(a + K1 * action_std .* g(s, a) + K2 * I(s, s + h(s, a))),
// applied once and then n_refine more times from the updated action. Terms
// whose gain is zero (or that the ablation drops) are never evaluated.
Eigen::VectorXd correct_action(const CdsaModels& models, const Eigen::VectorXd& s,
                               const Eigen::VectorXd& a_o,
                               const ControlConfig& cfg,
                               CorrectionTrace* trace = nullptr);

struct TrajectoryStep {
  Eigen::VectorXd s;
  Eigen::VectorXd a_o;
  Eigen::VectorXd a;
  double r = 0.0;
  bool risk = false;
  bool done = false;
  std::vector<double> pass_delta_norms;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  Eigen::VectorXd final_state;
  bool reached_goal = false;
};

// Runs the corrected controller from a fresh reset until done or the step
// budget (`max_steps < 0` means the spec's). `models` may be null, which
// behaves as the baseline. All randomness flows from `episode_rng`.
Trajectory control_episode(const EnvSpec& spec, const Policy& base_policy,
                           const CdsaModels* models, const ControlConfig& cfg,
                           const Rng& episode_rng, int max_steps = -1);

struct LangevinConfig {
  double alpha = 0.01;
  int steps = 1000;
  bool inject_noise = true;

  void validate() const;
};

using ScoreFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// x <- x + alpha * score(x) + sqrt(2 alpha) * z. Diagnostic only.
// Throws DivergenceError naming the first step with a non-finite iterate.
Eigen::VectorXd langevin_sample(const ScoreFn& score, const Eigen::VectorXd& x0,
                                const LangevinConfig& cfg, Rng& rng);

// Langevin over actions at a fixed state, driven by a trained action score.
// Runs in normalized action space and returns env units.
Eigen::VectorXd langevin_sample_action(const ScoreField& action_score,
                                       const Eigen::VectorXd& s,
                                       const Eigen::VectorXd& a0,
                                       const LangevinConfig& cfg, Rng& rng);

// Bundle directory: action_score.json, state_score.json, invdyn.json and
// manifest.json (dims, sigma, normalization hash).
void save_bundle(const CdsaModels& models, const std::filesystem::path& dir);
CdsaModels load_bundle(const std::filesystem::path& dir);
std::string norm_hash(const NormStats& norm);

}  // namespace cdsa

#endif  // CDSA_CONTROLLER_H_
