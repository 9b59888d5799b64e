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

#include "cdsa/policy.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cdsa/errors.h"

namespace cdsa {
namespace {

Eigen::VectorXd region_center(const Region& r) {
  return r.shape == Region::Shape::kCircle ? r.center : 0.5 * (r.min + r.max);
}

// Unit-capped heading toward `target`; the speed tapers off inside the last
// step before `final_goal` so the agent stops on it.
Eigen::VectorXd steer(const EnvSpec& spec, const Eigen::VectorXd& s,
                      const Eigen::VectorXd& target,
                      const Eigen::VectorXd& final_goal) {
  const Eigen::VectorXd d = target - s;
  const double len = d.norm();
  if (len < 1e-12) return Eigen::VectorXd::Zero(spec.action_dim);
  const double speed = std::min(1.0, (final_goal - s).norm() / spec.dt);
  return spec.clip_action(d / len * speed);
}

bool heading_for_goods(const EnvSpec& spec, const EnvState& st) {
  return spec.task == TaskKind::kGoods && !st.goods_visited;
}

}  // namespace

ScriptedDirectPolicy::ScriptedDirectPolicy(EnvSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
}

Eigen::VectorXd ScriptedDirectPolicy::act(const EnvState& st, Rng&) const {
  if (heading_for_goods(spec_, st)) {
    const Eigen::VectorXd g = region_center(*spec_.goods_region);
    return steer(spec_, st.s, g, g);
  }
  if (spec_.task == TaskKind::kAirport && !st.teleport_used) {
    const Eigen::VectorXd ap = region_center(*spec_.airport_region);
    const double hop = (ap - st.s).norm() + (spec_.goal - spec_.landing_point).norm();
    if (hop < (spec_.goal - st.s).norm()) return steer(spec_, st.s, ap, ap);
  }
  return steer(spec_, st.s, spec_.goal, spec_.goal);
}

RiskAvoidingPolicy::RiskAvoidingPolicy(EnvSpec spec, const RouteVariant* route)
    : spec_(std::move(spec)),
      name_(route ? "risk_avoiding/" + route->name : "risk_avoiding"),
      to_goal_(spec_, spec_.goal,
               route ? route->blocks : std::vector<Region>{}) {
  if (spec_.goods_region) {
    to_goods_ = std::make_unique<GridPlanner>(
        spec_, region_center(*spec_.goods_region),
        route ? route->blocks : std::vector<Region>{});
  }
}

Eigen::VectorXd RiskAvoidingPolicy::act(const EnvState& st, Rng&) const {
  const GridPlanner& planner =
      heading_for_goods(spec_, st) ? *to_goods_ : to_goal_;
  return steer(spec_, st.s, planner.waypoint(st.s), planner.target());
}

Eigen::VectorXd UniformRandomPolicy::act(const EnvState&, Rng& rng) const {
  Eigen::VectorXd a(spec_.action_dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a[i] = rng.uniform(spec_.action_low[i], spec_.action_high[i]);
  }
  return a;
}

void BcTrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
}

BcPolicy::BcPolicy(MlpParams params, NormStats norm, Eigen::VectorXd action_low,
                   Eigen::VectorXd action_high, double noise_std)
    : params_(std::move(params)),
      norm_(std::move(norm)),
      action_low_(std::move(action_low)),
      action_high_(std::move(action_high)),
      noise_std_(noise_std) {
  if (params_.input_dim() != norm_.state_dim() ||
      params_.output_dim() != norm_.action_dim() ||
      action_low_.size() != norm_.action_dim() ||
      action_high_.size() != norm_.action_dim()) {
    throw DimensionError("BcPolicy: network, norm and bounds disagree");
  }
  if (noise_std_ < 0.0) throw std::invalid_argument("BcPolicy: noise_std < 0");
}

Eigen::VectorXd BcPolicy::mean_action(const Eigen::VectorXd& s) const {
  return norm_.denormalize_action(
      mlp_forward(params_, norm_.normalize_state(s)));
}

Eigen::VectorXd BcPolicy::act(const EnvState& st, Rng& rng) const {
  Eigen::VectorXd a_n = mlp_forward(params_, norm_.normalize_state(st.s));
  if (noise_std_ > 0.0) {
    for (Eigen::Index i = 0; i < a_n.size(); ++i) a_n[i] += noise_std_ * rng.normal();
  }
  return norm_.denormalize_action(a_n).cwiseMax(action_low_).cwiseMin(action_high_);
}

BcPolicy BcPolicy::with_noise(double noise_std) const {
  return BcPolicy(params_, norm_, action_low_, action_high_, noise_std);
}

Json BcPolicy::to_json() const {
  Json j = mlp_to_json(params_);
  j["kind"] = "bc_policy";
  j["norm"] = norm_to_json(norm_);
  j["action_low"] = cdsa::to_json(action_low_);
  j["action_high"] = cdsa::to_json(action_high_);
  j["noise_std"] = noise_std_;
  return j;
}

BcPolicy BcPolicy::from_json(const Json& j) {
  if (require(j, "kind").get<std::string>() != "bc_policy") {
    throw SchemaError("checkpoint is not a behavior-cloned policy");
  }
  try {
    return BcPolicy(mlp_from_json(j), norm_from_json(require(j, "norm")),
                    vector_from_json(require(j, "action_low"), "action_low"),
                    vector_from_json(require(j, "action_high"), "action_high"),
                    j.value("noise_std", 0.0));
  } catch (const DimensionError& e) {
    throw SchemaError(e.what());
  }
}

BcPolicy train_bc_policy(const Dataset& dataset, const EnvSpec& spec,
                         const BcTrainConfig& config,
                         std::vector<double>* loss_log) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train_bc_policy: empty dataset");
  validate_dataset(dataset);
  if (dataset.state_dim != spec.state_dim || dataset.action_dim != spec.action_dim) {
    throw DimensionError("train_bc_policy: dataset and env dims differ");
  }
  std::vector<int> dims{dataset.state_dim};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(dataset.action_dim);
  Rng root(config.seed);
  Rng init_rng = root.substream("init/bc");
  Rng batch_rng = root.substream("batch/bc");
  MlpParams params = mlp_init(dims, config.leaky_slope, init_rng);
  AdamState adam = AdamState::for_params(params);
  const NormalizedColumns cols = normalized_columns(dataset, dataset.norm);
  for (int it = 0; it < config.iterations; ++it) {
    const auto idx = sample_indices(
        dataset, static_cast<std::size_t>(config.batch_size), batch_rng);
    const Eigen::MatrixXd s = cols.gather(cols.s, idx);
    const Eigen::MatrixXd a = cols.gather(cols.a, idx);
    const MlpCache cache = mlp_forward_batch(params, s);
    const Eigen::MatrixXd residual = cache.output() - a;
    const double n = static_cast<double>(idx.size());
    if (loss_log) loss_log->push_back(residual.squaredNorm() / n);
    adam_step(adam, params,
              mlp_backward_batch(params, cache, (2.0 / n) * residual).param_grads,
              config.lr);
  }
  return BcPolicy(std::move(params), dataset.norm, spec.action_low,
                  spec.action_high);
}

Eigen::VectorXd scripted_policy(const EnvSpec& spec, std::string_view kind,
                                const EnvState& state) {
  Rng unused(0);
  if (kind == "direct") return ScriptedDirectPolicy(spec).act(state, unused);
  if (kind == "risk_avoiding") return RiskAvoidingPolicy(spec).act(state, unused);
  throw std::invalid_argument("scripted_policy: unknown kind '" +
                              std::string(kind) + "'");
}

std::vector<PolicyPtr> risk_avoiding_mixture(const EnvSpec& spec) {
  std::vector<PolicyPtr> out;
  if (spec.routes.empty()) {
    out.push_back(std::make_shared<RiskAvoidingPolicy>(spec));
  }
  for (const RouteVariant& rv : spec.routes) {
    out.push_back(std::make_shared<RiskAvoidingPolicy>(spec, &rv));
  }
  return out;
}

EpisodeStreams EpisodeStreams::from(const Rng& ep) {
  return {ep.substream("reset"), ep.substream("env"), ep.substream("policy"),
          ep.substream("mixture")};
}

EpisodeStreams EpisodeStreams::for_episode(const Rng& base,
                                           std::uint64_t episode) {
  return from(base.substream(episode));
}

Dataset generate_dataset(const EnvSpec& spec,
                         const std::vector<PolicyPtr>& mixture, int episodes,
                         int max_steps, const Rng& rng) {
  if (episodes < 1) throw std::invalid_argument("generate_dataset: episodes < 1");
  if (max_steps < 1) throw std::invalid_argument("generate_dataset: max_steps < 1");
  if (mixture.empty()) throw std::invalid_argument("generate_dataset: no policy");
  Dataset d;
  d.state_dim = spec.state_dim;
  d.action_dim = spec.action_dim;
  for (int e = 0; e < episodes; ++e) {
    EpisodeStreams st = EpisodeStreams::for_episode(rng, static_cast<std::uint64_t>(e));
    const Policy& pi = *mixture[st.mixture.index(mixture.size())];
    EnvState state = env_reset(spec, st.reset);
    for (int t = 0; t < max_steps; ++t) {
      const Eigen::VectorXd a = pi.act(state, st.policy);
      if (a.size() != spec.action_dim) {
        throw DimensionError("generate_dataset: policy '" + pi.name() +
                             "' emits the wrong action dimension");
      }
      StepResult res = env_step(spec, state, a, st.env);
      const bool last = res.done || t + 1 == max_steps;
      d.transitions.push_back({state.s, spec.clip_action(a), res.reward,
                               res.next.s, last});
      state = std::move(res.next);
      if (last) break;
    }
  }
  d.norm = compute_norm_stats(d);
  return d;
}

}  // namespace cdsa
