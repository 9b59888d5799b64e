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


#include <cmath>
#include <vector>

#include "cdsa/errors.h"
#include "cdsa/gradcheck.h"
#include "cdsa/inverse_dynamics.h"
#include "doctest.h"
#include "test_util.h"

using namespace cdsa;
using cdsa::testing::random_matrix;
using cdsa::testing::vec;

namespace {

Dataset displacement_dataset(int n, std::uint64_t seed) {
  Dataset d;
  d.state_dim = 2;
  d.action_dim = 2;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd s = vec({rng.uniform(-2, 2), rng.uniform(-2, 2)});
    const Eigen::VectorXd a = vec({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    d.transitions.push_back({s, a, 0.0, s + a, false});
  }
  d.norm = compute_norm_stats(d);
  return d;
}

}  // namespace

TEST_CASE("loss examples") {
  Rng rng(0);
  MlpParams net = mlp_init(std::vector<int>{4, 8, 2}, 0.2, rng);
  for (auto& w : net.weights) w.setZero();
  const Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 1);
  Eigen::MatrixXd a(2, 1);
  a << 0.3, -0.4;
  CHECK(invdyn_loss(net, s, a, s).loss == doctest::Approx(0.25).epsilon(1e-14));

  net.biases.back() = a.col(0);
  CHECK(invdyn_loss(net, s, a, s).loss == 0.0);
  CHECK_THROWS_AS(invdyn_loss(net, s, Eigen::MatrixXd::Zero(3, 1), s), DimensionError);
}

TEST_CASE("loss gradient matches central differences") {
  Rng rng(6);
  const MlpParams net = mlp_init(std::vector<int>{4, 16, 16, 2}, 0.2, rng);
  const Eigen::MatrixXd s = random_matrix(2, 9, rng);
  const Eigen::MatrixXd a = random_matrix(2, 9, rng);
  const Eigen::MatrixXd s2 = random_matrix(2, 9, rng);
  const auto lg = invdyn_loss(net, s, a, s2);
  const auto r = check_gradient(
      [&](std::span<const double> th) {
        MlpParams q = net;
        q.assign_flat(th);
        return invdyn_loss(q, s, a, s2).loss;
      },
      net.flatten(), lg.grads.flatten());
  CHECK(r.max_rel_error <= 1e-5);
}

TEST_CASE("default architecture and zero-iteration training") {
  const Dataset d = displacement_dataset(100, 1);
  InvDynTrainConfig cfg;
  CHECK(cfg.hidden == std::vector<int>{128, 128, 128});
  CHECK(cfg.leaky_slope == 0.2);
  CHECK(cfg.lr == 1e-3);
  cfg.iterations = 0;
  cfg.seed = 8;
  const InvDynModel m = train_invdyn(d, cfg);
  Rng init = Rng(8).substream("init/invdyn");
  CHECK(m.params == mlp_init(std::vector<int>{4, 128, 128, 128, 2}, 0.2, init));
  CHECK(infer_action(m, vec({0, 0}), vec({1, 1})).size() == 2);
  CHECK_THROWS_AS(infer_action(m, vec({0}), vec({1, 1})), DimensionError);
}

TEST_CASE("training is deterministic and checkpoints round trip") {
  const Dataset d = displacement_dataset(300, 2);
  InvDynTrainConfig cfg;
  cfg.iterations = 30;
  cfg.batch_size = 32;
  cfg.hidden = {16, 16};
  std::vector<double> log;
  const InvDynModel a = train_invdyn(d, cfg, &log);
  const InvDynModel b = train_invdyn(d, cfg);
  CHECK(a.params == b.params);
  CHECK(log.size() == 30);
  CHECK(log.back() < log.front());
  const InvDynModel c = invdyn_from_json(Json::parse(dump_json(invdyn_to_json(a))));
  CHECK(c.params == a.params);
  CHECK(c.norm == a.norm);
  Json bad = invdyn_to_json(a);
  bad["kind"] = "action_score";
  CHECK_THROWS_AS(invdyn_from_json(bad), SchemaError);
}

TEST_CASE("short training already recovers displacements roughly") {
  const Dataset d = displacement_dataset(5000, 3);
  InvDynTrainConfig cfg;
  cfg.iterations = 1500;
  cfg.hidden = {64, 64};
  const InvDynModel m = train_invdyn(d, cfg);
  const Eigen::VectorXd a = infer_action(m, vec({0, 0}), vec({0.3, -0.2}));
  CHECK(std::abs(a[0] - 0.3) <= 0.05);
  CHECK(std::abs(a[1] + 0.2) <= 0.05);
  CHECK(infer_action(m, vec({0.5, 0.5}), vec({0.5, 0.5})).norm() <= 0.05);
}
