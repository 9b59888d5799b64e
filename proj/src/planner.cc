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

#include "cdsa/planner.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "cdsa/errors.h"

namespace cdsa {

GridPlanner::GridPlanner(const EnvSpec& spec, Eigen::VectorXd target,
                         std::vector<Region> extra_blocks)
    : target_(std::move(target)),
      origin_(spec.arena_min),
      cell_(spec.planner_resolution),
      los_margin_(0.5 * spec.planner_margin) {
  if (spec.state_dim != 2) {
    throw DimensionError("GridPlanner: only planar arenas are supported");
  }
  const Eigen::VectorXd extent = spec.arena_max - spec.arena_min;
  nx_ = std::max(1, static_cast<int>(std::ceil(extent[0] / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil(extent[1] / cell_)));
  obstacles_ = spec.risk_regions;
  obstacles_.insert(obstacles_.end(), extra_blocks.begin(), extra_blocks.end());

  const int n = nx_ * ny_;
  std::vector<char> blocked(static_cast<std::size_t>(n), 0);
  for (int c = 0; c < n; ++c) {
    const Eigen::VectorXd p = center_of(c);
    for (const Region& r : obstacles_) {
      if (r.distance(p) <= spec.planner_margin) {
        blocked[static_cast<std::size_t>(c)] = 1;
        break;
      }
    }
  }
  const int goal_cell = cell_of(target_);
  if (blocked[static_cast<std::size_t>(goal_cell)]) {
    throw PlanningError("planner: target lies inside an obstacle margin");
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  dist_.assign(static_cast<std::size_t>(n), kInf);
  next_.assign(static_cast<std::size_t>(n), -1);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  dist_[static_cast<std::size_t>(goal_cell)] = 0.0;
  open.push({0.0, goal_cell});
  while (!open.empty()) {
    const auto [d, c] = open.top();
    open.pop();
    if (d > dist_[static_cast<std::size_t>(c)]) continue;
    const int cx = c % nx_;
    const int cy = c / nx_;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int x = cx + dx;
        const int y = cy + dy;
        if (x < 0 || y < 0 || x >= nx_ || y >= ny_) continue;
        const int nb = y * nx_ + x;
        if (blocked[static_cast<std::size_t>(nb)]) continue;
        const double nd = d + cell_ * std::sqrt(static_cast<double>(dx * dx + dy * dy));
        if (nd < dist_[static_cast<std::size_t>(nb)]) {
          dist_[static_cast<std::size_t>(nb)] = nd;
          next_[static_cast<std::size_t>(nb)] = c;
          open.push({nd, nb});
        }
      }
    }
  }
}

int GridPlanner::cell_of(const Eigen::VectorXd& p) const {
  const int x = std::clamp(static_cast<int>((p[0] - origin_[0]) / cell_), 0, nx_ - 1);
  const int y = std::clamp(static_cast<int>((p[1] - origin_[1]) / cell_), 0, ny_ - 1);
  return y * nx_ + x;
}

Eigen::VectorXd GridPlanner::center_of(int cell) const {
  Eigen::VectorXd p(2);
  p << origin_[0] + (cell % nx_ + 0.5) * cell_,
      origin_[1] + (cell / nx_ + 0.5) * cell_;
  return p;
}

bool GridPlanner::visible(const Eigen::VectorXd& p, const Eigen::VectorXd& q) const {
  for (const Region& r : obstacles_) {
    if (r.segment_hits(p, q, los_margin_)) return false;
  }
  return true;
}

int GridPlanner::nearest_reachable(const Eigen::VectorXd& p) const {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < nx_ * ny_; ++c) {
    if (!std::isfinite(dist_[static_cast<std::size_t>(c)])) continue;
    const double d = (center_of(c) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best < 0) throw PlanningError("planner: no cell connects to the target");
  return best;
}

double GridPlanner::path_length(const Eigen::VectorXd& p) const {
  return dist_[static_cast<std::size_t>(cell_of(p))];
}

Eigen::VectorXd GridPlanner::waypoint(const Eigen::VectorXd& p) const {
  if (visible(p, target_)) return target_;
  int c = cell_of(p);
  if (!std::isfinite(dist_[static_cast<std::size_t>(c)])) {
    return center_of(nearest_reachable(p));
  }
  int best = c;
  for (int k = next_[static_cast<std::size_t>(c)]; k >= 0;
       k = next_[static_cast<std::size_t>(k)]) {
    if (!visible(p, center_of(k))) break;
    best = k;
  }
  return center_of(best);
}

}  // namespace cdsa
