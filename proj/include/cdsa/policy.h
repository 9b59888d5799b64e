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

#ifndef CDSA_POLICY_H_
#define CDSA_POLICY_H_

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cdsa/dataset.h"
#include "cdsa/env.h"
#include "cdsa/mlp.h"
#include "cdsa/planner.h"
#include "cdsa/rng.h"

namespace cdsa {

// pi(a | s). Scripted policies may read the full episode state (task
// progress); learned policies only see `state.s`. Outputs lie within the
// spec's action bounds.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Eigen::VectorXd act(const EnvState& state, Rng& rng) const = 0;
  virtual std::string name() const = 0;
};

using PolicyPtr = std::shared_ptr<const Policy>;

// Unit-capped step straight at the current target (goods first in the goods
// task, the airport when the hop is shorter in the airport task).
class ScriptedDirectPolicy final : public Policy {
 public:
  explicit ScriptedDirectPolicy(EnvSpec spec);
  Eigen::VectorXd act(const EnvState& state, Rng& rng) const override;
  std::string name() const override { return "direct"; }

 private:
  EnvSpec spec_;
};

// Follows grid-planned shortest paths that keep a margin from every risky
// region. An optional route variant adds planning-only blocks.
class RiskAvoidingPolicy final : public Policy {
 public:
  explicit RiskAvoidingPolicy(EnvSpec spec, const RouteVariant* route = nullptr);
  Eigen::VectorXd act(const EnvState& state, Rng& rng) const override;
  std::string name() const override { return name_; }

 private:
  EnvSpec spec_;
  std::string name_;
  GridPlanner to_goal_;
  std::unique_ptr<GridPlanner> to_goods_;
};

class UniformRandomPolicy final : public Policy {
 public:
  explicit UniformRandomPolicy(EnvSpec spec) : spec_(std::move(spec)) {}
  Eigen::VectorXd act(const EnvState& state, Rng& rng) const override;
  std::string name() const override { return "random"; }

 private:
  EnvSpec spec_;
};

struct BcTrainConfig {
  int iterations = 5000;
  int batch_size = 256;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {64, 64};
  double leaky_slope = 0.1;

  void validate() const;
};

// Regression s -> a trained on a dataset. `noise_std` (normalized action
// units) turns it into a Gaussian policy; 0 gives the mean action.
class BcPolicy final : public Policy {
 public:
  BcPolicy(MlpParams params, NormStats norm, Eigen::VectorXd action_low,
           Eigen::VectorXd action_high, double noise_std = 0.0);
  Eigen::VectorXd act(const EnvState& state, Rng& rng) const override;
  std::string name() const override { return "bc"; }

  // Unclipped network mean in env units.
  Eigen::VectorXd mean_action(const Eigen::VectorXd& s) const;
  const MlpParams& params() const { return params_; }
  const NormStats& norm() const { return norm_; }
  double noise_std() const { return noise_std_; }
  BcPolicy with_noise(double noise_std) const;

  Json to_json() const;
  static BcPolicy from_json(const Json& j);

 private:
  MlpParams params_;
  NormStats norm_;
  Eigen::VectorXd action_low_;
  Eigen::VectorXd action_high_;
  double noise_std_;
};

// Mean ||pi(s) - a||^2 regression in normalized units.
BcPolicy train_bc_policy(const Dataset& dataset, const EnvSpec& spec,
                         const BcTrainConfig& config,
                         std::vector<double>* loss_log = nullptr);

// One-off evaluation of a scripted policy ("direct" or "risk_avoiding").
Eigen::VectorXd scripted_policy(const EnvSpec& spec, std::string_view kind,
                                const EnvState& state);

// Every route variant of the spec as its own policy, or the plain planner
// when the spec defines none.
std::vector<PolicyPtr> risk_avoiding_mixture(const EnvSpec& spec);

// Per-episode random streams, derived from (base, episode index) only.
struct EpisodeStreams {
  Rng reset;
  Rng env;
  Rng policy;
  Rng mixture;

  // Streams of the episode whose own generator is `episode_rng`.
  static EpisodeStreams from(const Rng& episode_rng);
  // Streams of episode `episode` under a batch-level base generator.
  static EpisodeStreams for_episode(const Rng& base, std::uint64_t episode);
};

// Rolls out `episodes` episodes, picking one policy of the mixture per
// episode. The last transition of a truncated episode is marked done.
Dataset generate_dataset(const EnvSpec& spec,
                         const std::vector<PolicyPtr>& mixture, int episodes,
                         int max_steps, const Rng& rng);

}  // namespace cdsa

#endif  // CDSA_POLICY_H_
