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


#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdsa/controller.h"
#include "cdsa/errors.h"
#include "cdsa/evaluation.h"
#include "cdsa/policy.h"
#include "verify.h"

namespace fs = std::filesystem;
using namespace cdsa;

namespace {

// Bad flags or config values; exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Refusal to overwrite or other runtime failure; exit code 1.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string config_scalar(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw UsageError("config values must be strings, numbers, booleans or arrays of those");
}

// Config keys are flag names without the leading dashes. Flags given on the
// command line win.
void merge_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config " + path + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = key == "config" || key == "help" ? nullptr : sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError("config " + path + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    std::vector<std::string> values;
    if (value.is_array()) {
      for (const Json& v : value) values.push_back(config_scalar(v));
    } else {
      values.push_back(config_scalar(value));
    }
    try {
      for (const std::string& v : values) opt->add_result(v);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config " + path + ": key '" + key + "': " + e.what());
    }
  }
}

void require_set(CLI::App* sub, const std::string& flag) {
  if (sub->get_option(flag)->count() == 0) {
    throw UsageError(flag + " is required (on the command line or in --config)");
  }
}

std::uint64_t resolve_seed(CLI::App* sub, std::uint64_t value) {
  if (sub->get_option("--seed")->count() > 0) return value;
  const char* env = std::getenv("CDSA_SEED");
  if (env == nullptr || *env == '\0') return value;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("CDSA_SEED is not an unsigned integer: '") + env + "'");
  }
}

void guard_file(const fs::path& p, bool force) {
  if (fs::exists(p) && !force) {
    throw RuntimeFailure(p.string() + " exists; pass --force to overwrite");
  }
}

void guard_dir(const fs::path& p, bool force) {
  if (!fs::exists(p)) return;
  if (!fs::is_directory(p)) throw RuntimeFailure(p.string() + " exists and is not a directory");
  if (!fs::is_empty(p) && !force) {
    throw RuntimeFailure(p.string() + " is not empty; pass --force to overwrite");
  }
}

fs::path echo_path_for_file(const fs::path& out) {
  return fs::path(out.string() + ".resolved.json");
}

void write_echo(const fs::path& path, const Json& config) {
  write_text_file(path, dump_json(config) + "\n");
}

std::string normalize_name(std::string s) {
  for (char& c : s) c = c == '-' ? '_' : c;
  return s;
}

TaskKind parse_task(const std::string& name) {
  try {
    return task_kind_from_string(normalize_name(name));
  } catch (const std::exception&) {
    throw UsageError("unknown task '" + name + "' (path_finding, goods, airport)");
  }
}

EnvSpec load_env(const std::string& path, const std::string& task) {
  EnvSpec spec = load_env_spec(path);
  if (!task.empty()) spec = with_task(spec, parse_task(task));
  return spec;
}

std::vector<PolicyPtr> scripted_mixture(const EnvSpec& spec, const std::string& name) {
  const std::string n = normalize_name(name);
  if (n == "risk_avoiding") return risk_avoiding_mixture(spec);
  if (n == "direct") return {std::make_shared<ScriptedDirectPolicy>(spec)};
  if (n == "random") return {std::make_shared<UniformRandomPolicy>(spec)};
  throw UsageError("unknown policy '" + name + "' (risk-avoiding, direct, random)");
}

void add_config_flag(CLI::App* sub, std::string& path) {
  sub->add_option("--config", path, "JSON file of flag values (keys are flag names; flags win)");
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string config;
  std::string env;
  std::string policy = "risk-avoiding";
  std::string task;
  int episodes = 50;
  int max_steps = -1;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

void setup_gen_data(CLI::App& app, GenDataArgs& a) {
  CLI::App* sub = app.add_subcommand("gen-data", "Roll out scripted policies into a dataset");
  add_config_flag(sub, a.config);
  sub->add_option("--env", a.env, "Environment spec (required)");
  sub->add_option("--policy", a.policy, "risk-avoiding, direct or random");
  sub->add_option("--task", a.task, "Task override: path_finding, goods or airport");
  sub->add_option("--episodes", a.episodes, "Episodes to roll out")->check(CLI::PositiveNumber);
  sub->add_option("--max-steps", a.max_steps, "Per-episode step budget (-1: the spec's)");
  sub->add_option("--seed", a.seed, "Seed (falls back to CDSA_SEED)");
  sub->add_option("--out", a.out, "Dataset file to write (required)");
  sub->add_flag("--force", a.force, "Overwrite existing outputs");
}

int run_gen_data(CLI::App* sub, GenDataArgs& a) {
  merge_config(sub, a.config);
  require_set(sub, "--env");
  require_set(sub, "--out");
  a.seed = resolve_seed(sub, a.seed);
  const EnvSpec spec = load_env(a.env, a.task);
  const auto mixture = scripted_mixture(spec, a.policy);
  const int max_steps = a.max_steps < 0 ? spec.max_steps : a.max_steps;
  const fs::path out(a.out);
  guard_file(out, a.force);
  guard_file(echo_path_for_file(out), a.force);

  const Dataset d = generate_dataset(spec, mixture, a.episodes, max_steps, Rng(a.seed));
  std::size_t risky = 0;
  for (const Transition& t : d.transitions) risky += spec.in_risk(t.s_next) ? 1 : 0;
  save_dataset(d, out);
  write_echo(echo_path_for_file(out), {{"command", "gen-data"},
                                       {"env", a.env},
                                       {"policy", normalize_name(a.policy)},
                                       {"task", std::string(to_string(spec.task))},
                                       {"episodes", a.episodes},
                                       {"max_steps", max_steps},
                                       {"seed", a.seed},
                                       {"out", a.out}});
  std::printf("wrote %s: %zu transitions from %d episodes\n", a.out.c_str(), d.size(), a.episodes);
  std::printf("risk occupancy: %zu of %zu transitions (%s)\n", risky, d.size(),
              format_real(d.size() ? static_cast<double>(risky) / d.size() : 0.0).c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  double sigma = ScoreTrainConfig{}.sigma;
  int iters = -1;
  int score_iters = ScoreTrainConfig{}.iterations;
  int invdyn_iters = InvDynTrainConfig{}.iterations;
  double score_lr = ScoreTrainConfig{}.lr;
  double invdyn_lr = InvDynTrainConfig{}.lr;
  int batch = ScoreTrainConfig{}.batch_size;
  std::uint64_t seed = 0;
  bool bc = false;
  std::string env;
  int bc_iters = BcTrainConfig{}.iterations;
  bool force = false;
};

void setup_train(CLI::App& app, TrainArgs& a) {
  CLI::App* sub = app.add_subcommand("train", "Train the action score, state score and inverse dynamics");
  add_config_flag(sub, a.config);
  sub->add_option("--data", a.data, "Dataset file (required)");
  sub->add_option("--out", a.out, "Bundle directory to write (required)");
  sub->add_option("--sigma", a.sigma, "Perturbation scale in normalized units");
  sub->add_option("--iters", a.iters, "Iterations for every model (-1: per-model values)");
  sub->add_option("--score-iters", a.score_iters, "Score-field iterations");
  sub->add_option("--invdyn-iters", a.invdyn_iters, "Inverse-dynamics iterations");
  sub->add_option("--score-lr", a.score_lr, "Score-field learning rate");
  sub->add_option("--invdyn-lr", a.invdyn_lr, "Inverse-dynamics learning rate");
  sub->add_option("--batch", a.batch, "Batch size");
  sub->add_option("--seed", a.seed, "Seed (falls back to CDSA_SEED)");
  sub->add_flag("--bc", a.bc, "Also train a behavior-cloning policy (needs --env)");
  sub->add_option("--env", a.env, "Environment spec, for the policy's action bounds");
  sub->add_option("--bc-iters", a.bc_iters, "Behavior-cloning iterations");
  sub->add_flag("--force", a.force, "Overwrite existing outputs");
}

std::string loss_csv(const std::vector<std::vector<double>*>& cols,
                     const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "iteration";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  std::size_t rows = 0;
  for (const auto* c : cols) rows = std::max(rows, c->size());
  for (std::size_t i = 0; i < rows; ++i) {
    out << i;
    for (const auto* c : cols) {
      out << ',';
      if (i < c->size()) out << format_real((*c)[i]);
    }
    out << '\n';
  }
  return out.str();
}

int run_train(CLI::App* sub, TrainArgs& a) {
  merge_config(sub, a.config);
  require_set(sub, "--data");
  require_set(sub, "--out");
  a.seed = resolve_seed(sub, a.seed);
  if (a.iters >= 0) {
    a.score_iters = a.iters;
    a.invdyn_iters = a.iters;
    a.bc_iters = a.iters;
  }
  ScoreTrainConfig sc;
  sc.sigma = a.sigma;
  sc.iterations = a.score_iters;
  sc.lr = a.score_lr;
  sc.batch_size = a.batch;
  sc.seed = a.seed;
  InvDynTrainConfig ic;
  ic.iterations = a.invdyn_iters;
  ic.lr = a.invdyn_lr;
  ic.batch_size = a.batch;
  ic.seed = a.seed;
  BcTrainConfig bc;
  bc.iterations = a.bc_iters;
  bc.batch_size = a.batch;
  bc.seed = a.seed;
  try {
    sc.validate();
    ic.validate();
    if (a.bc) bc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.bc && a.env.empty()) throw UsageError("--bc needs --env");
  const Dataset data = load_dataset(a.data);
  EnvSpec spec;
  if (a.bc) spec = load_env_spec(a.env);
  const fs::path out(a.out);
  guard_dir(out, a.force);
  if (sc.iterations == 0 || ic.iterations == 0 || (a.bc && bc.iterations == 0)) {
    std::fprintf(stderr, "warning: 0 training iterations; writing initialized models\n");
  }

  TrainLogs logs;
  const CdsaModels models = train_cdsa(data, sc, ic, &logs);
  save_bundle(models, out);
  write_text_file(out / "losses.csv",
                  loss_csv({&logs.action_score, &logs.state_score, &logs.invdyn},
                           {"action_score", "state_score", "invdyn"}));
  Json echo = {{"command", "train"},
               {"data", a.data},
               {"out", a.out},
               {"seed", a.seed},
               {"score",
                {{"sigma", sc.sigma},
                 {"iterations", sc.iterations},
                 {"batch_size", sc.batch_size},
                 {"lr", sc.lr},
                 {"hidden", sc.hidden},
                 {"leaky_slope", sc.leaky_slope}}},
               {"invdyn",
                {{"iterations", ic.iterations},
                 {"batch_size", ic.batch_size},
                 {"lr", ic.lr},
                 {"hidden", ic.hidden},
                 {"leaky_slope", ic.leaky_slope}}}};
  if (a.bc) {
    std::vector<double> bc_log;
    const BcPolicy pi = train_bc_policy(data, spec, bc, &bc_log);
    write_text_file(out / "bc_policy.json", dump_json(pi.to_json()) + "\n");
    write_text_file(out / "bc_losses.csv", loss_csv({&bc_log}, {"bc"}));
    echo["bc"] = {{"env", a.env},
                  {"iterations", bc.iterations},
                  {"batch_size", bc.batch_size},
                  {"lr", bc.lr},
                  {"hidden", bc.hidden},
                  {"leaky_slope", bc.leaky_slope}};
  }
  write_echo(out / "config.resolved.json", echo);
  auto last = [](const std::vector<double>& v) { return v.empty() ? std::string("-") : format_real(v.back()); };
  std::printf("wrote bundle %s (sigma %s); final losses: action_score %s, state_score %s, invdyn %s\n",
              a.out.c_str(), format_real(sc.sigma).c_str(), last(logs.action_score).c_str(),
              last(logs.state_score).c_str(), last(logs.invdyn).c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string config;
  std::string env;
  std::string task;
  std::string bundle;
  std::string policy = "bc";
  double policy_noise = 0.0;
  std::vector<double> k1 = {ControlConfig{}.k1};
  std::vector<double> k2 = {ControlConfig{}.k2};
  std::vector<std::string> ablation = {"full"};
  int n_refine = ControlConfig{}.n_refine;
  int episodes = 200;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::vector<double> var_grid = kDefaultVarGrid;
  int keep = 20;
  std::string out;
  bool force = false;
};

void setup_eval(CLI::App& app, EvalArgs& a) {
  CLI::App* sub = app.add_subcommand("eval", "Paired baseline and corrected rollouts with reports");
  add_config_flag(sub, a.config);
  sub->add_option("--env", a.env, "Environment spec (required)");
  sub->add_option("--task", a.task, "Task override: path_finding, goods or airport");
  sub->add_option("--bundle", a.bundle, "Model bundle directory (required)");
  sub->add_option("--policy", a.policy,
                  "Base policy: bc (the bundle's bc_policy.json), a policy JSON file, "
                  "direct, risk-avoiding or random");
  sub->add_option("--policy-noise", a.policy_noise, "Gaussian noise std for a cloned policy");
  sub->add_option("--k1", a.k1, "Action-score gain(s)");
  sub->add_option("--k2", a.k2, "State-score gain(s)");
  sub->add_option("--ablation", a.ablation, "full, no_a1, no_a2 or baseline (one or more)");
  sub->add_option("--n-refine", a.n_refine, "Extra correction passes");
  sub->add_option("--episodes", a.episodes, "Paired episodes per arm")->check(CLI::PositiveNumber);
  sub->add_option("--seed", a.seed, "Base seed of the paired episodes (falls back to CDSA_SEED)");
  sub->add_option("--jobs", a.jobs, "Rollout threads")->check(CLI::PositiveNumber);
  sub->add_option("--var-grid", a.var_grid, "VaR percentiles");
  sub->add_option("--keep", a.keep, "Trajectories per arm drawn and logged")->check(CLI::NonNegativeNumber);
  sub->add_option("--out", a.out, "Report directory (required)");
  sub->add_flag("--force", a.force, "Overwrite existing outputs");
}

std::unique_ptr<Policy> load_policy(const std::string& name, const std::string& bundle,
                                    const EnvSpec& spec, double noise) {
  const std::string n = normalize_name(name);
  if (n == "direct") return std::make_unique<ScriptedDirectPolicy>(spec);
  if (n == "random") return std::make_unique<UniformRandomPolicy>(spec);
  if (n == "risk_avoiding") return std::make_unique<RiskAvoidingPolicy>(spec);
  const fs::path file = n == "bc" ? fs::path(bundle) / "bc_policy.json" : fs::path(name);
  if (!fs::exists(file)) throw UsageError("policy file " + file.string() + " not found");
  const BcPolicy pi = BcPolicy::from_json(Json::parse(read_text_file(file)));
  return std::make_unique<BcPolicy>(pi.with_noise(noise));
}

std::string tag_for(const std::string& ablation, double k1, double k2) {
  return ablation + "_k1-" + format_real(k1) + "_k2-" + format_real(k2);
}

void write_trajectories(const fs::path& dir, const std::vector<Trajectory>& trajs) {
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    write_text_file(dir / ("episode_" + std::to_string(i) + ".csv"), trajectory_csv(trajs[i]));
  }
}

int run_eval(CLI::App* sub, EvalArgs& a) {
  merge_config(sub, a.config);
  require_set(sub, "--env");
  require_set(sub, "--bundle");
  require_set(sub, "--out");
  a.seed = resolve_seed(sub, a.seed);
  const EnvSpec spec = load_env(a.env, a.task);
  std::vector<Ablation> ablations;
  for (const std::string& s : a.ablation) {
    try {
      ablations.push_back(ablation_from_string(normalize_name(s)));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  std::vector<ControlConfig> configs;
  std::vector<std::string> tags;
  for (Ablation ab : ablations) {
    for (double k1 : a.k1) {
      for (double k2 : a.k2) {
        ControlConfig c = ControlConfig::for_env(spec);
        c.k1 = k1;
        c.k2 = k2;
        c.n_refine = a.n_refine;
        c.ablation = ab;
        try {
          c.validate();
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
        configs.push_back(c);
        tags.push_back(tag_for(std::string(to_string(ab)), k1, k2));
      }
    }
  }
  for (double p : a.var_grid) {
    if (!(p >= 0.0 && p <= 100.0)) throw UsageError("--var-grid values must lie in [0, 100]");
  }
  if (a.policy_noise < 0.0) throw UsageError("--policy-noise must be >= 0");
  const CdsaModels models = load_bundle(a.bundle);
  if (models.state_dim() != spec.state_dim || models.action_dim() != spec.action_dim) {
    throw UsageError("bundle dimensions do not match the environment");
  }
  const auto policy = load_policy(a.policy, a.bundle, spec, a.policy_noise);
  const fs::path out(a.out);
  guard_dir(out, a.force);

  RolloutOptions ro;
  ro.episodes = a.episodes;
  ro.base_seed = a.seed;
  ro.jobs = a.jobs;
  ro.keep_trajectories = a.keep;
  ControlConfig base_cfg = ControlConfig::for_env(spec);
  base_cfg.ablation = Ablation::kBaseline;
  std::vector<Trajectory> base_trajs;
  const auto base_stats = rollout_batch(spec, *policy, nullptr, base_cfg, ro, &base_trajs);
  write_trajectories(out / "trajectories" / "baseline", base_trajs);

  std::ostringstream summary;
  summary << "ablation,k1,k2,baseline_mean_return,corrected_mean_return,baseline_risk_rate,"
             "corrected_risk_rate,baseline_goal_rate,corrected_goal_rate";
  std::vector<double> grid = a.var_grid;
  std::sort(grid.begin(), grid.end());
  for (double p : grid) summary << ",delta_var_" << format_real(p);
  summary << '\n';
  Json runs = Json::array();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const ControlConfig& c = configs[i];
    std::vector<Trajectory> trajs;
    const auto stats = rollout_batch(spec, *policy, &models, c, ro, &trajs);
    const Json cfg_json = {{"ablation", std::string(to_string(c.ablation))},
                           {"k1", c.k1},
                           {"k2", c.k2},
                           {"n_refine", c.n_refine}};
    const Report r = summarize(base_stats, stats, grid, cfg_json);
    emit_report(r, out / ("report_" + tags[i] + ".csv"), out / ("report_" + tags[i] + ".svg"), spec,
                base_trajs, trajs);
    write_trajectories(out / "trajectories" / tags[i], trajs);
    summary << to_string(c.ablation) << ',' << format_real(c.k1) << ',' << format_real(c.k2) << ','
            << format_real(r.baseline.mean_return) << ',' << format_real(r.corrected.mean_return)
            << ',' << format_real(r.baseline.risk_rate) << ',' << format_real(r.corrected.risk_rate)
            << ',' << format_real(r.baseline.goal_rate) << ',' << format_real(r.corrected.goal_rate);
    for (double d : r.delta_var) summary << ',' << format_real(d);
    summary << '\n';
    runs.push_back(cfg_json);
    std::printf("%s: mean return %.3f -> %.3f, risk rate %.4f -> %.4f, goal rate %.2f -> %.2f\n",
                tags[i].c_str(), r.baseline.mean_return, r.corrected.mean_return,
                r.baseline.risk_rate, r.corrected.risk_rate, r.baseline.goal_rate,
                r.corrected.goal_rate);
  }
  write_text_file(out / "summary.csv", summary.str());
  write_echo(out / "config.resolved.json", {{"command", "eval"},
                                            {"env", a.env},
                                            {"task", std::string(to_string(spec.task))},
                                            {"bundle", a.bundle},
                                            {"policy", a.policy},
                                            {"policy_noise", a.policy_noise},
                                            {"episodes", a.episodes},
                                            {"seed", a.seed},
                                            {"jobs", a.jobs},
                                            {"var_grid", grid},
                                            {"keep", a.keep},
                                            {"sigma", models.action_score.sigma},
                                            {"runs", runs}});
  return 0;
}

// ---------------------------------------------------------------------------

struct PlotArgs {
  std::string config;
  std::string env;
  std::string task;
  std::vector<std::string> traj;
  std::vector<std::string> label;
  std::string bundle;
  int grid = 20;
  std::vector<double> action;
  std::string out;
  bool force = false;
};

void setup_plot(CLI::App& app, PlotArgs& a) {
  CLI::App* sub = app.add_subcommand("plot", "Draw the arena, trajectories and a state-score quiver");
  add_config_flag(sub, a.config);
  sub->add_option("--env", a.env, "Environment spec (required)");
  sub->add_option("--task", a.task, "Task override: path_finding, goods or airport");
  sub->add_option("--traj", a.traj, "Trajectory CSV files");
  sub->add_option("--label", a.label, "Legend label per trajectory file");
  sub->add_option("--bundle", a.bundle, "Bundle whose state score is drawn as arrows");
  sub->add_option("--grid", a.grid, "Quiver cells per side")->check(CLI::PositiveNumber);
  sub->add_option("--action", a.action, "Action at which arrows are evaluated (default: data mean)");
  sub->add_option("--out", a.out, "SVG file to write (required)");
  sub->add_flag("--force", a.force, "Overwrite existing outputs");
}

int run_plot(CLI::App* sub, PlotArgs& a) {
  merge_config(sub, a.config);
  require_set(sub, "--env");
  require_set(sub, "--out");
  const EnvSpec spec = load_env(a.env, a.task);
  if (!a.label.empty() && a.label.size() != a.traj.size()) {
    throw UsageError("--label needs one entry per --traj file");
  }
  static const char* kPalette[] = {"#800000", "#000000", "#1f4e9c", "#2e7d32", "#8e44ad", "#b8860b"};
  std::vector<TrajectorySet> sets;
  for (std::size_t i = 0; i < a.traj.size(); ++i) {
    TrajectorySet s;
    s.label = a.label.empty() ? fs::path(a.traj[i]).stem().string() : a.label[i];
    s.color = kPalette[i % std::size(kPalette)];
    s.trajectories.push_back(parse_trajectory_csv(read_text_file(a.traj[i])));
    sets.push_back(std::move(s));
  }
  std::vector<Arrow> arrows;
  Eigen::VectorXd act;
  if (!a.bundle.empty()) {
    const CdsaModels models = load_bundle(a.bundle);
    if (models.state_dim() != spec.state_dim) throw UsageError("bundle state dimension does not match");
    act = models.norm.action_mean;
    if (!a.action.empty()) {
      if (static_cast<int>(a.action.size()) != models.action_dim()) {
        throw UsageError("--action needs " + std::to_string(models.action_dim()) + " values");
      }
      act = Eigen::Map<const Eigen::VectorXd>(a.action.data(), static_cast<Eigen::Index>(a.action.size()));
    }
    arrows = state_score_quiver(models.state_score, spec, a.grid, act);
  } else if (!a.action.empty()) {
    throw UsageError("--action needs --bundle");
  }
  const fs::path out(a.out);
  guard_file(out, a.force);
  guard_file(echo_path_for_file(out), a.force);
  write_text_file(out, render_svg(spec, sets, arrows));
  Json echo = {{"command", "plot"}, {"env", a.env},   {"task", std::string(to_string(spec.task))},
               {"traj", a.traj},    {"bundle", a.bundle}, {"grid", a.grid},
               {"out", a.out}};
  if (act.size() > 0) echo["action"] = to_json(act);
  write_echo(echo_path_for_file(out), echo);
  std::printf("wrote %s: %zu trajectories, %zu arrows\n", a.out.c_str(), sets.size(), arrows.size());
  return 0;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string envs = CDSA_DEFAULT_ENVS_DIR;
  int invdyn_iters = 10000;
  std::uint64_t seed = 0;
};

void setup_verify(CLI::App& app, VerifyArgs& a) {
  CLI::App* sub = app.add_subcommand("verify", "Run the built-in oracle checks");
  sub->add_option("--envs", a.envs, "Directory holding linear_point.json");
  sub->add_option("--invdyn-iters", a.invdyn_iters, "Inverse-dynamics oracle iterations")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", a.seed, "Seed (falls back to CDSA_SEED)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conservative action correction with score fields"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  GenDataArgs gen;
  TrainArgs train;
  EvalArgs eval;
  PlotArgs plot;
  VerifyArgs verify;
  setup_gen_data(app, gen);
  setup_train(app, train);
  setup_eval(app, eval);
  setup_plot(app, plot);
  setup_verify(app, verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "gen-data") return run_gen_data(sub, gen);
    if (name == "train") return run_train(sub, train);
    if (name == "eval") return run_eval(sub, eval);
    if (name == "plot") return run_plot(sub, plot);
    cli::VerifyOptions o;
    o.envs_dir = verify.envs;
    o.invdyn_iterations = verify.invdyn_iters;
    o.seed = resolve_seed(sub, verify.seed);
    const int failed = cli::run_verify(o);
    std::printf("%d failed\n", failed);
    return failed == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
