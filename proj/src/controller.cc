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

#include "cdsa/controller.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "cdsa/errors.h"

namespace cdsa {
namespace {

constexpr std::pair<std::string_view, Ablation> kAblations[] = {
    {"full", Ablation::kFull},
    {"no_a1", Ablation::kNoA1},
    {"no_a2", Ablation::kNoA2},
    {"baseline", Ablation::kBaseline}};

void check_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) {
    throw NonFiniteError(std::string("correct_action: non-finite ") + what +
                         " (diverged model?)");
  }
}

}  // namespace

void CdsaModels::validate() const {
  if (action_score.kind != ScoreKind::kActionScore ||
      state_score.kind != ScoreKind::kStateScore) {
    throw SchemaError("bundle: score field kinds are swapped or wrong");
  }
  if (!(action_score.norm == norm) || !(state_score.norm == norm) ||
      !(invdyn.norm == norm)) {
    throw SchemaError("bundle: models were trained with different normalization");
  }
  if (action_score.params.input_dim() != state_dim() + action_dim() ||
      action_score.params.output_dim() != action_dim() ||
      state_score.params.input_dim() != state_dim() + action_dim() ||
      state_score.params.output_dim() != state_dim() ||
      invdyn.params.input_dim() != 2 * state_dim() ||
      invdyn.params.output_dim() != action_dim()) {
    throw SchemaError("bundle: model dims are inconsistent");
  }
}

CdsaModels train_cdsa(const Dataset& dataset, const ScoreTrainConfig& score_config,
                      const InvDynTrainConfig& invdyn_config, TrainLogs* logs) {
  if (dataset.empty()) throw std::invalid_argument("train_cdsa: empty dataset");
  validate_dataset(dataset);
  score_config.validate();
  invdyn_config.validate();

  ScoreTrainer g(ScoreKind::kActionScore, dataset.norm, score_config);
  ScoreTrainer h(ScoreKind::kStateScore, dataset.norm, score_config);
  InvDynTrainer inv(dataset.norm, invdyn_config);
  const NormalizedColumns cols = normalized_columns(dataset, dataset.norm);

  Rng score_batches = Rng(score_config.seed).substream("batch");
  Rng invdyn_batches = Rng(invdyn_config.seed).substream("batch");
  const bool shared = score_config.seed == invdyn_config.seed &&
                      score_config.batch_size == invdyn_config.batch_size;
  const int iterations =
      std::max(score_config.iterations, invdyn_config.iterations);

  for (int t = 0; t < iterations; ++t) {
    std::vector<std::size_t> idx;
    if (t < score_config.iterations) {
      idx = sample_indices(dataset,
                           static_cast<std::size_t>(score_config.batch_size),
                           score_batches);
      const Eigen::MatrixXd x = cols.state_action(idx);
      const double lg = g.step(x);
      const double lh = h.step(x);
      if (logs) {
        logs->action_score.push_back(lg);
        logs->state_score.push_back(lh);
      }
    }
    if (t < invdyn_config.iterations) {
      if (!shared || idx.empty()) {
        idx = sample_indices(dataset,
                             static_cast<std::size_t>(invdyn_config.batch_size),
                             shared ? score_batches : invdyn_batches);
      }
      const double li = inv.step(cols.gather(cols.s, idx),
                                 cols.gather(cols.a, idx),
                                 cols.gather(cols.s_next, idx));
      if (logs) logs->invdyn.push_back(li);
    }
  }
  CdsaModels models{g.field(), h.field(), inv.model(), dataset.norm};
  models.validate();
  return models;
}

std::string_view to_string(Ablation ablation) {
  for (const auto& [name, value] : kAblations) {
    if (value == ablation) return name;
  }
  return "?";
}

Ablation ablation_from_string(std::string_view name) {
  for (const auto& [key, value] : kAblations) {
    if (key == name) return value;
  }
  throw std::invalid_argument("unknown ablation '" + std::string(name) +
                              "' (full, no_a1, no_a2, baseline)");
}

ControlConfig ControlConfig::for_env(const EnvSpec& spec) {
  ControlConfig cfg;
  cfg.action_low = spec.action_low;
  cfg.action_high = spec.action_high;
  return cfg;
}

void ControlConfig::validate() const {
  if (!(k1 >= 0.0) || !(k2 >= 0.0)) {
    throw std::invalid_argument("control: k1 and k2 must be >= 0");
  }
  if (n_refine < 0) throw std::invalid_argument("control: n_refine must be >= 0");
  if (action_low.size() == 0 || action_low.size() != action_high.size() ||
      (action_low.array() >= action_high.array()).any()) {
    throw std::invalid_argument("control: action_low < action_high required");
  }
}

bool ControlConfig::uses_a1() const {
  return (ablation == Ablation::kFull || ablation == Ablation::kNoA2) && k1 != 0.0;
}

bool ControlConfig::uses_a2() const {
  return (ablation == Ablation::kFull || ablation == Ablation::kNoA1) && k2 != 0.0;
}

Eigen::VectorXd correct_action(const CdsaModels& models, const Eigen::VectorXd& s,
                               const Eigen::VectorXd& a_o,
                               const ControlConfig& cfg, CorrectionTrace* trace) {
  if (s.size() != models.state_dim() || a_o.size() != models.action_dim() ||
      cfg.action_low.size() != models.action_dim()) {
    throw DimensionError("correct_action: dims disagree with the models");
  }
  if (!cfg.uses_a1() && !cfg.uses_a2()) return a_o;

  const NormStats& norm = models.norm;
  const Eigen::VectorXd s_n = norm.normalize_state(s);
  Eigen::VectorXd a = a_o;
  for (int pass = 0; pass <= cfg.n_refine; ++pass) {
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(a.size());
    if (cfg.uses_a1()) {
      const Eigen::VectorXd a1 = eval_score(models.action_score, s, a);
      check_finite(a1, "action score");
      delta += cfg.k1 * a1.cwiseProduct(norm.action_std);
    }
    if (cfg.uses_a2()) {
      const Eigen::VectorXd ds = eval_score(models.state_score, s, a);
      check_finite(ds, "state score");
      const Eigen::VectorXd s_tilde = norm.denormalize_state(s_n + ds);
      const Eigen::VectorXd a2 = infer_action(models.invdyn, s, s_tilde);
      check_finite(a2, "inverse-dynamics action");
      delta += cfg.k2 * a2;
    }
    const Eigen::VectorXd next =
        (a + delta).cwiseMax(cfg.action_low).cwiseMin(cfg.action_high);
    check_finite(next, "corrected action");
    if (trace) trace->pass_delta_norms.push_back((next - a).norm());
    a = next;
  }
  return a;
}

Trajectory control_episode(const EnvSpec& spec, const Policy& base_policy,
                           const CdsaModels* models, const ControlConfig& cfg,
                           const Rng& episode_rng, int max_steps) {
  if (models && (models->state_dim() != spec.state_dim ||
                 models->action_dim() != spec.action_dim)) {
    throw DimensionError("control_episode: model dims differ from the env");
  }
  EpisodeStreams streams = EpisodeStreams::from(episode_rng);
  EnvState state = env_reset(spec, streams.reset);
  const int budget = max_steps < 0 ? spec.max_steps : max_steps;
  Trajectory traj;
  for (int t = 0; t < budget; ++t) {
    TrajectoryStep step;
    step.s = state.s;
    step.a_o = base_policy.act(state, streams.policy);
    if (step.a_o.size() != spec.action_dim) {
      throw DimensionError("control_episode: policy emits the wrong action dim");
    }
    if (models) {
      CorrectionTrace trace;
      step.a = correct_action(*models, state.s, step.a_o, cfg, &trace);
      step.pass_delta_norms = std::move(trace.pass_delta_norms);
    } else {
      step.a = step.a_o;
    }
    StepResult res = env_step(spec, state, step.a, streams.env);
    step.r = res.reward;
    step.risk = res.risk_entered;
    step.done = res.done;
    traj.reached_goal = res.reached_goal;
    traj.steps.push_back(std::move(step));
    state = std::move(res.next);
    if (res.done) break;
  }
  traj.final_state = state.s;
  return traj;
}

void LangevinConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("langevin: alpha must be positive and finite");
  }
  if (steps < 0) throw std::invalid_argument("langevin: steps must be >= 0");
}

Eigen::VectorXd langevin_sample(const ScoreFn& score, const Eigen::VectorXd& x0,
                                const LangevinConfig& cfg, Rng& rng) {
  cfg.validate();
  const double noise_scale = std::sqrt(2.0 * cfg.alpha);
  Eigen::VectorXd x = x0;
  for (int t = 1; t <= cfg.steps; ++t) {
    const Eigen::VectorXd grad = score(x);
    if (grad.size() != x.size()) {
      throw DimensionError("langevin: score has the wrong dimension");
    }
    x += cfg.alpha * grad;
    if (cfg.inject_noise) {
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += noise_scale * rng.normal();
    }
    if (!x.allFinite()) {
      throw DivergenceError("langevin: iterate became non-finite at step " +
                                std::to_string(t),
                            t);
    }
  }
  return x;
}

Eigen::VectorXd langevin_sample_action(const ScoreField& action_score,
                                       const Eigen::VectorXd& s,
                                       const Eigen::VectorXd& a0,
                                       const LangevinConfig& cfg, Rng& rng) {
  if (action_score.kind != ScoreKind::kActionScore) {
    throw std::invalid_argument("langevin_sample_action needs an action score");
  }
  const NormStats& norm = action_score.norm;
  const Eigen::VectorXd s_n = norm.normalize_state(s);
  const ScoreFn fn = [&](const Eigen::VectorXd& a_n) {
    Eigen::VectorXd x(s_n.size() + a_n.size());
    x << s_n, a_n;
    return mlp_forward(action_score.params, x);
  };
  return norm.denormalize_action(
      langevin_sample(fn, norm.normalize_action(a0), cfg, rng));
}

std::string norm_hash(const NormStats& norm) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump_json(norm_to_json(norm))) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_bundle(const CdsaModels& models, const std::filesystem::path& dir) {
  models.validate();
  std::filesystem::create_directories(dir);
  write_text_file(dir / "action_score.json",
                  dump_json(score_field_to_json(models.action_score)) + "\n");
  write_text_file(dir / "state_score.json",
                  dump_json(score_field_to_json(models.state_score)) + "\n");
  write_text_file(dir / "invdyn.json",
                  dump_json(invdyn_to_json(models.invdyn)) + "\n");
  const Json manifest = {
      {"format", "cdsa-bundle"},
      {"version", 1},
      {"state_dim", models.state_dim()},
      {"action_dim", models.action_dim()},
      {"sigma", models.action_score.sigma},
      {"norm_hash", norm_hash(models.norm)},
      {"norm", norm_to_json(models.norm)},
      {"files",
       {{"action_score", "action_score.json"},
        {"state_score", "state_score.json"},
        {"invdyn", "invdyn.json"}}}};
  write_text_file(dir / "manifest.json", dump_json(manifest) + "\n");
}

CdsaModels load_bundle(const std::filesystem::path& dir) {
  auto parse = [&](const std::string& file) {
    try {
      return Json::parse(read_text_file(dir / file));
    } catch (const Json::parse_error& e) {
      throw ParseError((dir / file).string() + ": " + e.what(), 0);
    }
  };
  const Json manifest = parse("manifest.json");
  if (require(manifest, "format").get<std::string>() != "cdsa-bundle") {
    throw SchemaError("not a cdsa bundle manifest");
  }
  const Json& files = require(manifest, "files");
  CdsaModels m;
  m.action_score = score_field_from_json(
      parse(require(files, "action_score").get<std::string>()));
  m.state_score = score_field_from_json(
      parse(require(files, "state_score").get<std::string>()));
  m.invdyn = invdyn_from_json(parse(require(files, "invdyn").get<std::string>()));
  m.norm = norm_from_json(require(manifest, "norm"));
  if (norm_hash(m.norm) != require(manifest, "norm_hash").get<std::string>()) {
    throw SchemaError("bundle: normalization hash mismatch");
  }
  m.validate();
  return m;
}

}  // namespace cdsa
