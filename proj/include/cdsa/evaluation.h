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

#ifndef CDSA_EVALUATION_H_
#define CDSA_EVALUATION_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cdsa/controller.h"
#include "cdsa/env.h"
#include "cdsa/json_io.h"
#include "cdsa/policy.h"

namespace cdsa {

struct EpisodeStats {
  double undiscounted_return = 0.0;
  double discounted_return = 0.0;
  int steps = 0;
  int risk_entries = 0;  // steps that ended inside a risky region
  bool reached_goal = false;
  std::uint64_t seed = 0;

  friend bool operator==(const EpisodeStats&, const EpisodeStats&) = default;
};

EpisodeStats episode_stats(const Trajectory& traj, double gamma,
                           std::uint64_t seed);

struct RolloutOptions {
  int episodes = 200;
  std::uint64_t base_seed = 0;
  double gamma = 1.0;
  int jobs = 1;
  // Keep the first N trajectories for plotting/logging.
  int keep_trajectories = 0;
};

// Episode i runs on Rng(base_seed).substream(i), so two calls with the same
// base seed share start states and risk draws. `models == nullptr` or a
// baseline ablation gives the uncorrected arm.
std::vector<EpisodeStats> rollout_batch(const EnvSpec& spec,
                                        const Policy& base_policy,
                                        const CdsaModels* models,
                                        const ControlConfig& cfg,
                                        const RolloutOptions& options,
                                        std::vector<Trajectory>* kept = nullptr);

// Linear-interpolation percentile of the ascending-sorted values at
// fractional index (n - 1) * p / 100.
double var_at(std::span<const double> returns, double percentile);

struct ArmSummary {
  std::size_t episodes = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double risk_rate = 0.0;  // mean over episodes of risky steps / steps
  double goal_rate = 0.0;
  double mean_steps = 0.0;
  std::vector<double> var_curve;  // aligned with Report::grid
};

struct Report {
  std::vector<double> grid;
  ArmSummary baseline;
  ArmSummary corrected;
  double delta_mean_return = 0.0;
  double delta_risk_rate = 0.0;
  double delta_goal_rate = 0.0;
  std::vector<double> delta_var;
  Json config = Json::object();
  std::vector<std::string> warnings;
  std::vector<EpisodeStats> baseline_stats;
  std::vector<EpisodeStats> corrected_stats;
};

ArmSummary summarize_arm(const std::vector<EpisodeStats>& stats,
                         std::span<const double> grid);

// Deltas are corrected minus baseline.
Report summarize(const std::vector<EpisodeStats>& baseline,
                 const std::vector<EpisodeStats>& corrected,
                 std::span<const double> grid, Json config = Json::object());

inline const std::vector<double> kDefaultVarGrid = {5, 10, 25, 50, 75, 100};

// CSV columns: metric,arm,percentile,value (percentile empty except for var).
std::string report_csv(const Report& report);

struct ReportCsvRow {
  std::string metric;
  std::string arm;
  double percentile = -1.0;
  double value = 0.0;
};
std::vector<ReportCsvRow> parse_report_csv(std::string_view text);

struct Arrow {
  Eigen::VectorXd from;
  Eigen::VectorXd vec;  // env units, unscaled
};

// State-score arrows on an n x n grid of cell centers over the arena,
// evaluated at action `a`; vectors are mapped to env units by state_std.
std::vector<Arrow> state_score_quiver(const ScoreField& state_score,
                                      const EnvSpec& spec, int n,
                                      const Eigen::VectorXd& a);

struct TrajectorySet {
  std::string label;
  std::string color;
  std::vector<Trajectory> trajectories;
};

// Arena, regions, goal, optional task regions, trajectories and arrows.
std::string render_svg(const EnvSpec& spec, const std::vector<TrajectorySet>& sets,
                       const std::vector<Arrow>& arrows = {});

// Writes the CSV and the SVG, creating parent directories.
void emit_report(const Report& report, const std::filesystem::path& csv_path,
                 const std::filesystem::path& svg_path, const EnvSpec& spec,
                 const std::vector<Trajectory>& baseline_trajs,
                 const std::vector<Trajectory>& corrected_trajs,
                 std::size_t max_per_arm = 20);

// Columns: step, s0.., a_o0.., a0.., r, risk_flag, done.
std::string trajectory_csv(const Trajectory& traj);
Trajectory parse_trajectory_csv(std::string_view text);

}  // namespace cdsa

#endif  // CDSA_EVALUATION_H_
