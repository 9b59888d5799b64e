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

#ifndef CDSA_ENV_H_
#define CDSA_ENV_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cdsa/json_io.h"
#include "cdsa/rng.h"

namespace cdsa {

enum class EnvKind { kRiskyPointMass, kRiskyTransport, kLinearPoint };
enum class RegionLabel { kRiver, kMountain, kIce, kRiskCircle, kGoods, kAirport };
enum class TaskKind { kPathFinding, kGoods, kAirport };

std::string_view to_string(EnvKind kind);
std::string_view to_string(RegionLabel label);
std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view name);

bool is_risky(RegionLabel label);

struct Region {
  enum class Shape { kCircle, kRect };
  Shape shape = Shape::kCircle;
  RegionLabel label = RegionLabel::kRiskCircle;
  Eigen::VectorXd center;  // circle
  double radius = 0.0;     // circle
  Eigen::VectorXd min;     // rect
  Eigen::VectorXd max;     // rect

  static Region circle(RegionLabel label, Eigen::VectorXd center, double radius);
  static Region rect(RegionLabel label, Eigen::VectorXd min, Eigen::VectorXd max);

  bool contains(const Eigen::VectorXd& p) const;
  // Euclidean distance from p to the region (0 inside).
  double distance(const Eigen::VectorXd& p) const;
  // Conservative segment test against the region grown by `margin`
  // (rectangles grow as boxes, circles as circles).
  bool segment_hits(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                    double margin) const;
};

// Planning-only obstacles that force one family of detours; used to build
// multi-route behavior datasets.
struct RouteVariant {
  std::string name;
  std::vector<Region> blocks;
};

struct EnvSpec {
  std::string name;
  EnvKind kind = EnvKind::kRiskyPointMass;
  int state_dim = 2;
  int action_dim = 2;
  Eigen::VectorXd arena_min;
  Eigen::VectorXd arena_max;
  bool clamp_to_arena = true;
  double dt = 0.05;
  Eigen::VectorXd action_low;
  Eigen::VectorXd action_high;

  // Start distribution: a point when start_min == start_max, else uniform box.
  Eigen::VectorXd start_min;
  Eigen::VectorXd start_max;

  Eigen::VectorXd goal;
  double capture_radius = 0.05;

  std::vector<Region> risk_regions;
  double risk_penalty = -100.0;
  double risk_prob = 0.1;
  double step_cost = 1.0;
  int max_steps = 200;

  TaskKind task = TaskKind::kPathFinding;
  std::optional<Region> goods_region;
  std::optional<Region> airport_region;
  Eigen::VectorXd landing_point;

  double planner_resolution = 0.01;
  double planner_margin = 0.04;
  std::vector<RouteVariant> routes;

  // Throws SchemaError describing the first violated invariant.
  void validate() const;
  bool in_risk(const Eigen::VectorXd& p) const;
  Eigen::VectorXd clip_action(const Eigen::VectorXd& a) const;
};

EnvSpec env_spec_from_json(const Json& j);
Json env_spec_to_json(const EnvSpec& spec);
EnvSpec load_env_spec(const std::filesystem::path& path);
// Same geometry with a different task (cross-task evaluation).
EnvSpec with_task(const EnvSpec& spec, TaskKind task);

struct EnvState {
  Eigen::VectorXd s;
  int steps = 0;
  bool goods_visited = false;
  bool teleport_used = false;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
  bool reached_goal = false;
  // Occupancy of a risky region after the step, independent of whether the
  // stochastic penalty fired.
  bool risk_entered = false;
};

EnvState env_reset(const EnvSpec& spec, Rng& rng);

// Draws exactly one uniform per call for the risk event, whether or not the
// agent is inside a risky region, so paired runs keep aligned streams.
StepResult env_step(const EnvSpec& spec, const EnvState& state,
                    const Eigen::VectorXd& action, Rng& rng);

}  // namespace cdsa

#endif  // CDSA_ENV_H_
