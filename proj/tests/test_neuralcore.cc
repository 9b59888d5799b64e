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
#include "cdsa/mlp.h"
#include "doctest.h"
#include "test_util.h"

using namespace cdsa;
using cdsa::testing::vec;

namespace {

MlpParams manual(std::vector<int> dims, double slope) {
  Rng rng(0);
  MlpParams p = mlp_init(dims, slope, rng);
  for (auto& w : p.weights) w.setZero();
  return p;
}

}  // namespace

TEST_CASE("rng streams are reproducible and substreams ignore parent state") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  Rng c(42);
  const Rng fresh = Rng(42).substream(3);
  for (int i = 0; i < 50; ++i) c.uniform();
  Rng from_used = c.substream(3);
  Rng from_fresh = fresh;
  for (int i = 0; i < 20; ++i) CHECK(from_used.uniform() == from_fresh.uniform());
  CHECK(Rng(1).substream("x").seed() != Rng(1).substream("y").seed());
  CHECK(Rng(1).substream(0).seed() != Rng(2).substream(0).seed());
}

TEST_CASE("init shapes follow the hidden widths") {
  Rng rng(1);
  const MlpParams p = mlp_init(std::vector<int>{2, 32, 128, 32, 2}, 0.1, rng);
  REQUIRE(p.num_layers() == 4);
  CHECK(p.weights[0].rows() == 32);
  CHECK(p.weights[0].cols() == 2);
  CHECK(p.weights[1].rows() == 128);
  CHECK(p.weights[1].cols() == 32);
  CHECK(p.weights[2].rows() == 32);
  CHECK(p.weights[2].cols() == 128);
  CHECK(p.weights[3].rows() == 2);
  CHECK(p.weights[3].cols() == 32);
  for (const auto& b : p.biases) CHECK(b.isZero(0.0));
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    const double bound = std::sqrt(6.0 / ((1.0 + 0.01) * p.layer_dims[l]));
    CHECK(p.weights[l].cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("init minimal network and determinism") {
  Rng rng(5);
  const MlpParams p = mlp_init(std::vector<int>{1, 1}, 0.3, rng);
  CHECK(p.num_layers() == 1);
  CHECK(p.weights[0].size() == 1);
  CHECK(p.biases[0][0] == 0.0);

  Rng r1(9);
  Rng r2(9);
  CHECK(mlp_init(std::vector<int>{3, 8, 2}, 0.1, r1) ==
        mlp_init(std::vector<int>{3, 8, 2}, 0.1, r2));
}

TEST_CASE("init rejects bad dims and slopes") {
  Rng rng(0);
  CHECK_THROWS(mlp_init(std::vector<int>{}, 0.1, rng));
  CHECK_THROWS(mlp_init(std::vector<int>{3}, 0.1, rng));
  CHECK_THROWS(mlp_init(std::vector<int>{3, 0, 1}, 0.1, rng));
  CHECK_THROWS(mlp_init(std::vector<int>{3, 1}, 0.0, rng));
  CHECK_THROWS(mlp_init(std::vector<int>{3, 1}, 1.0, rng));
}

TEST_CASE("forward examples") {
  MlpParams zero = manual({3, 5, 2}, 0.1);
  CHECK(mlp_forward(zero, vec({1, -2, 3})).isZero(0.0));

  MlpParams id = manual({2, 2}, 0.1);
  id.weights[0].setIdentity();
  const Eigen::VectorXd out = mlp_forward(id, vec({3, -4}));
  CHECK(out[0] == 3.0);
  CHECK(out[1] == -4.0);

  MlpParams leaky = manual({1, 1, 1}, 0.1);
  leaky.weights[0](0, 0) = 1.0;
  leaky.weights[1](0, 0) = 1.0;
  CHECK(mlp_forward(leaky, vec({-2}))[0] == doctest::Approx(-0.2).epsilon(1e-15));
}

TEST_CASE("forward validates its input") {
  Rng rng(0);
  const MlpParams p = mlp_init(std::vector<int>{2, 4, 1}, 0.1, rng);
  CHECK_THROWS_AS(mlp_forward(p, vec({1, 2, 3})), DimensionError);
  CHECK_THROWS_AS(mlp_forward(p, vec({1, std::nan("")})), NonFiniteError);
  const Eigen::VectorXd x = vec({0.3, -0.7});
  CHECK(mlp_forward(p, x) == mlp_forward(p, x));
}

TEST_CASE("backward of a single linear layer") {
  MlpParams p = manual({2, 1}, 0.1);
  p.weights[0] << 0.7, -1.3;
  const MlpBackward b = mlp_backward(p, vec({2, 5}), vec({1}));
  CHECK(b.param_grads.weights[0](0, 0) == 2.0);
  CHECK(b.param_grads.weights[0](0, 1) == 5.0);
  CHECK(b.param_grads.biases[0][0] == 1.0);
  CHECK(b.input_grad[0] == 0.7);
  CHECK(b.input_grad[1] == -1.3);
}

TEST_CASE("backward with zero output grad is zero") {
  Rng rng(3);
  const MlpParams p = mlp_init(std::vector<int>{3, 8, 8, 2}, 0.1, rng);
  const MlpBackward b = mlp_backward(p, vec({0.1, 0.2, 0.3}), vec({0, 0}));
  for (double g : b.param_grads.flatten()) CHECK(g == 0.0);
  CHECK(b.input_grad.isZero(0.0));
}

TEST_CASE("leaky relu derivative at exactly zero is one") {
  MlpParams p = manual({1, 1, 1}, 0.1);
  p.weights[0](0, 0) = 1.0;
  p.weights[1](0, 0) = 1.0;
  const MlpBackward b = mlp_backward(p, vec({0.0}), vec({1}));
  CHECK(b.input_grad[0] == 1.0);
}

TEST_CASE("backward matches central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const std::vector<int> dims = seed % 2 ? std::vector<int>{8, 32, 32, 4}
                                           : std::vector<int>{3, 8, 8, 2};
    const MlpParams p = mlp_init(dims, 0.1, rng);
    const Eigen::VectorXd x = cdsa::testing::random_matrix(dims.front(), 1, rng);
    const Eigen::VectorXd og = cdsa::testing::random_matrix(dims.back(), 1, rng);
    const MlpBackward b = mlp_backward(p, x, og);

    const std::vector<double> flat = p.flatten();
    const std::vector<double> ana = b.param_grads.flatten();
    const GradCheckResult r = check_gradient(
        [&](std::span<const double> theta) {
          MlpParams q = p;
          q.assign_flat(theta);
          return og.dot(mlp_forward(q, x));
        },
        flat, ana);
    CHECK(r.checked == flat.size());
    CHECK(r.max_rel_error <= 1e-5);

    const std::vector<double> xv(x.data(), x.data() + x.size());
    const std::vector<double> xg(b.input_grad.data(),
                                 b.input_grad.data() + b.input_grad.size());
    const GradCheckResult ri = check_gradient(
        [&](std::span<const double> in) {
          const Eigen::VectorXd v =
              Eigen::Map<const Eigen::VectorXd>(in.data(), x.size());
          return og.dot(mlp_forward(p, v));
        },
        xv, xg);
    CHECK(ri.max_rel_error <= 1e-5);
  }
}

TEST_CASE("batched backward sums the per-sample gradients") {
  Rng rng(11);
  const MlpParams p = mlp_init(std::vector<int>{3, 6, 2}, 0.2, rng);
  const Eigen::MatrixXd x = cdsa::testing::random_matrix(3, 4, rng);
  const Eigen::MatrixXd og = cdsa::testing::random_matrix(2, 4, rng);
  const MlpCache cache = mlp_forward_batch(p, x);
  const MlpBatchBackward bb = mlp_backward_batch(p, cache, og, true);
  MlpParams sum = p.zeros_like();
  for (int c = 0; c < 4; ++c) {
    const MlpBackward b = mlp_backward(p, x.col(c), og.col(c));
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
      sum.weights[l] += b.param_grads.weights[l];
      sum.biases[l] += b.param_grads.biases[l];
    }
    CHECK((bb.input_grads.col(c) - b.input_grad).norm() <= 1e-12);
  }
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    CHECK((sum.weights[l] - bb.param_grads.weights[l]).norm() <= 1e-12);
  }
}

TEST_CASE("adam first step is -lr * sign(g) up to epsilon") {
  MlpParams p = manual({1, 1}, 0.1);
  AdamState st = AdamState::for_params(p);
  MlpGradients g = p.zeros_like();
  g.weights[0](0, 0) = 0.5;
  adam_step(st, p, g, 0.1);
  // m_hat = 0.5, v_hat = 0.25, so the step is 0.1 * 0.5 / (0.5 + 1e-8).
  CHECK(p.weights[0](0, 0) == doctest::Approx(-0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(p.weights[0](0, 0) == doctest::Approx(-0.09999998).epsilon(1e-7));
  CHECK(st.step_count == 1);
  CHECK(p.biases[0][0] == 0.0);
}

TEST_CASE("adam first-step bound holds elementwise") {
  Rng rng(4);
  MlpParams p = mlp_init(std::vector<int>{4, 8, 3}, 0.1, rng);
  const MlpParams before = p;
  AdamState st = AdamState::for_params(p);
  MlpGradients g = p.zeros_like();
  std::vector<double> gflat = g.flatten();
  for (double& v : gflat) v = rng.normal();
  g.assign_flat(gflat);
  adam_step(st, p, g, 1e-3);
  const auto a = before.flatten();
  const auto b = p.flatten();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(b[i] - a[i]) <= 1e-3 * (1 + 1e-6));
}

TEST_CASE("adam rejects bad input without touching state") {
  Rng rng(2);
  MlpParams p = mlp_init(std::vector<int>{2, 3, 1}, 0.1, rng);
  const MlpParams before = p;
  AdamState st = AdamState::for_params(p);
  MlpGradients g = p.zeros_like();
  g.weights[1](0, 0) = std::nan("");
  CHECK_THROWS_AS(adam_step(st, p, g, 0.1), NonFiniteError);
  CHECK(p == before);
  CHECK(st.step_count == 0);

  Rng other(2);
  MlpGradients wrong = mlp_init(std::vector<int>{2, 4, 1}, 0.1, other).zeros_like();
  CHECK_THROWS_AS(adam_step(st, p, wrong, 0.1), DimensionError);
  CHECK_THROWS(adam_step(st, p, p.zeros_like(), 0.0));

  adam_step(st, p, p.zeros_like(), 0.1);
  CHECK(p == before);
  CHECK(st.step_count == 1);
}

TEST_CASE("identical training runs are bitwise identical") {
  auto run = [] {
    Rng rng(77);
    MlpParams p = mlp_init(std::vector<int>{2, 8, 1}, 0.1, rng);
    AdamState st = AdamState::for_params(p);
    Rng data(5);
    for (int it = 0; it < 100; ++it) {
      const Eigen::MatrixXd x = cdsa::testing::random_matrix(2, 16, data);
      const MlpCache cache = mlp_forward_batch(p, x);
      const Eigen::MatrixXd resid = cache.output() - x.row(0);
      adam_step(st, p, mlp_backward_batch(p, cache, resid / 16.0).param_grads, 1e-2);
    }
    return p;
  };
  CHECK(run() == run());
}

TEST_CASE("checkpoint json round trip is lossless") {
  Rng rng(8);
  const MlpParams p = mlp_init(std::vector<int>{3, 5, 2}, 0.2, rng);
  const Json j = Json::parse(dump_json(mlp_to_json(p)));
  CHECK(j["arch"]["dims"].size() == 3);
  CHECK(mlp_from_json(j) == p);
  Json bad = j;
  bad["layers"][0]["b"] = Json::array({1.0});
  CHECK_THROWS_AS(mlp_from_json(bad), SchemaError);
}

TEST_CASE("format_real is the shortest exact form") {
  const double x = 0.1 + 0.2;
  CHECK(std::stod(format_real(x)) == x);
  CHECK(format_real(0.1) == "0.1");
  CHECK(format_real(-3.0) == "-3");
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
    CHECK(std::stod(format_real(v)) == v);
  }
  CHECK_THROWS(format_real(std::nan("")));
}
