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

#ifndef CDSA_PLANNER_H_
#define CDSA_PLANNER_H_

#include <vector>

#include <Eigen/Core>

#include "cdsa/env.h"

namespace cdsa {

// Shortest paths to a fixed target on an 8-connected grid over the arena,
// with cells near any obstacle removed. Paths are shortened by steering at
// the farthest path cell in line of sight.
class GridPlanner {
 public:
  // Obstacles are the spec's risk regions plus `extra_blocks`. Throws
  // PlanningError when the target cell itself is blocked.
  GridPlanner(const EnvSpec& spec, Eigen::VectorXd target,
              std::vector<Region> extra_blocks = {});

  // Point to head for from `p`. Throws PlanningError when no free cell
  // connects to the target.
  Eigen::VectorXd waypoint(const Eigen::VectorXd& p) const;

  // Grid path length from p's cell to the target; +inf when unreachable.
  double path_length(const Eigen::VectorXd& p) const;

  const Eigen::VectorXd& target() const { return target_; }

 private:
  int cell_of(const Eigen::VectorXd& p) const;
  Eigen::VectorXd center_of(int cell) const;
  bool visible(const Eigen::VectorXd& p, const Eigen::VectorXd& q) const;
  int nearest_reachable(const Eigen::VectorXd& p) const;

  Eigen::VectorXd target_;
  Eigen::VectorXd origin_;
  double cell_ = 0.01;
  double los_margin_ = 0.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<Region> obstacles_;
  std::vector<int> next_;       // -1 at the target or when unreachable
  std::vector<double> dist_;
};

}  // namespace cdsa

#endif  // CDSA_PLANNER_H_
