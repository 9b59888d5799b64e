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

#ifndef CDSA_DATASET_H_
#define CDSA_DATASET_H_

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "cdsa/json_io.h"
#include "cdsa/rng.h"

namespace cdsa {

inline constexpr double kStdFloor = 1e-6;

struct Transition {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  double r = 0.0;
  Eigen::VectorXd s_next;
  bool done = false;

  friend bool operator==(const Transition& x, const Transition& y) {
    return x.s == y.s && x.a == y.a && x.r == y.r && x.s_next == y.s_next &&
           x.done == y.done;
  }
};

// Per-feature affine normalization. Every std entry is >= kStdFloor.
struct NormStats {
  Eigen::VectorXd state_mean;
  Eigen::VectorXd state_std;
  Eigen::VectorXd action_mean;
  Eigen::VectorXd action_std;

  // Identity transform for the given dims.
  static NormStats unit(int state_dim, int action_dim);

  int state_dim() const { return static_cast<int>(state_mean.size()); }
  int action_dim() const { return static_cast<int>(action_mean.size()); }

  Eigen::VectorXd normalize_state(const Eigen::VectorXd& s) const;
  Eigen::VectorXd denormalize_state(const Eigen::VectorXd& s) const;
  Eigen::VectorXd normalize_action(const Eigen::VectorXd& a) const;
  Eigen::VectorXd denormalize_action(const Eigen::VectorXd& a) const;

  friend bool operator==(const NormStats& x, const NormStats& y) {
    return x.state_mean == y.state_mean && x.state_std == y.state_std &&
           x.action_mean == y.action_mean && x.action_std == y.action_std;
  }
};

Json norm_to_json(const NormStats& norm);
NormStats norm_from_json(const Json& j);

struct Dataset {
  int state_dim = 0;
  int action_dim = 0;
  std::vector<Transition> transitions;
  NormStats norm;

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }
};

// Throws DimensionError if any transition disagrees with the declared dims
// and NonFiniteError on NaN/inf entries.
void validate_dataset(const Dataset& dataset);

// Population mean/std per feature; std floored at kStdFloor.
NormStats compute_norm_stats(const Dataset& dataset);

// Uniform with replacement.
std::vector<Transition> sample_batch(const Dataset& dataset,
                                     std::size_t batch_size, Rng& rng);
// Index-only variant used by the training loops.
std::vector<std::size_t> sample_indices(const Dataset& dataset,
                                        std::size_t batch_size, Rng& rng);

// Whole dataset in normalized coordinates, one transition per column.
struct NormalizedColumns {
  Eigen::MatrixXd s;
  Eigen::MatrixXd a;
  Eigen::MatrixXd s_next;

  // Gathers the given columns of (s; a) stacked, as score-network input.
  Eigen::MatrixXd state_action(const std::vector<std::size_t>& idx) const;
  Eigen::MatrixXd gather(const Eigen::MatrixXd& m,
                         const std::vector<std::size_t>& idx) const;
};
NormalizedColumns normalized_columns(const Dataset& dataset,
                                     const NormStats& norm);

// JSON-lines file: a metadata record first, then one transition per line.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
// Same as load_dataset but from in-memory text (tests, tooling).
Dataset parse_dataset(std::string_view text);
std::string serialize_dataset(const Dataset& dataset);

}  // namespace cdsa

#endif  // CDSA_DATASET_H_
