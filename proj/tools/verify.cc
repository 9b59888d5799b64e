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


#include "verify.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "cdsa/gradcheck.h"
#include "cdsa/inverse_dynamics.h"
#include "cdsa/policy.h"
#include "cdsa/score_field.h"

namespace cdsa::cli {
namespace {

Eigen::MatrixXd normal_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

int report(bool pass, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  return pass ? 0 : 1;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

int loss_identity(Rng rng) {
  double worst = 0.0;
  for (ScoreKind kind : {ScoreKind::kActionScore, ScoreKind::kStateScore}) {
    for (int b = 0; b < 20; ++b) {
      const int out = kind == ScoreKind::kActionScore ? 2 : 3;
      const MlpParams net = mlp_init(std::vector<int>{5, 32, 128, 32, out}, 0.1, rng);
      const Eigen::MatrixXd x = normal_matrix(5, 256, rng);
      const Eigen::MatrixXd z = normal_matrix(out, 256, rng);
      const double sigma = 0.1 + rng.uniform();
      Eigen::MatrixXd xt = x;
      xt.middleRows(kind == ScoreKind::kActionScore ? 3 : 0, out) += sigma * z;
      const double a = dsm_loss_reparam(net, kind, 3, x, z, sigma).loss;
      const double r = dsm_loss_reference(net, kind, 3, x, xt, sigma);
      worst = std::max(worst, std::abs(a - r) / (1.0 + std::abs(a)));
    }
  }
  return report(worst <= 1e-10, "dsm loss identity", "max |dL|/(1+|L|) = " + sci(worst));
}

template <typename LossFn>
double check(const MlpParams& net, const LossFn& loss) {
  const auto analytic = loss(net).grads.flatten();
  MlpParams probe = net;
  return check_gradient(
             [&](std::span<const double> p) {
               probe.assign_flat(p);
               return loss(probe).loss;
             },
             net.flatten(), analytic)
      .max_rel_error;
}

int gradients(Rng rng) {
  int failed = 0;
  for (ScoreKind kind : {ScoreKind::kActionScore, ScoreKind::kStateScore}) {
    const int out = kind == ScoreKind::kActionScore ? 2 : 3;
    const MlpParams net = mlp_init(std::vector<int>{5, 16, 16, out}, 0.1, rng);
    const Eigen::MatrixXd x = normal_matrix(5, 8, rng);
    const Eigen::MatrixXd z = normal_matrix(out, 8, rng);
    const double err = check(net, [&](const MlpParams& p) {
      return dsm_loss_reparam(p, kind, 3, x, z, 0.1);
    });
    failed += report(err <= 1e-5, std::string(to_string(kind)) + " loss gradient",
                     "max rel error = " + sci(err));
  }
  const MlpParams inv = mlp_init(std::vector<int>{6, 16, 16, 2}, 0.2, rng);
  const Eigen::MatrixXd s = normal_matrix(3, 8, rng);
  const Eigen::MatrixXd a = normal_matrix(2, 8, rng);
  const Eigen::MatrixXd sn = normal_matrix(3, 8, rng);
  const double err = check(inv, [&](const MlpParams& p) { return invdyn_loss(p, s, a, sn); });
  failed += report(err <= 1e-5, "inverse dynamics loss gradient", "max rel error = " + sci(err));
  return failed;
}

int invdyn_oracle(const VerifyOptions& o) {
  const EnvSpec spec = load_env_spec(o.envs_dir / "linear_point.json");
  const std::vector<PolicyPtr> mix{std::make_shared<UniformRandomPolicy>(spec)};
  const Rng root(o.seed);
  const Dataset train = generate_dataset(spec, mix, 1000, spec.max_steps, root.substream("train"));
  const Dataset held = generate_dataset(spec, mix, 100, spec.max_steps, root.substream("held"));
  InvDynTrainConfig cfg;
  cfg.iterations = o.invdyn_iterations;
  cfg.seed = o.seed;
  const InvDynModel m = train_invdyn(train, cfg);
  Eigen::VectorXd err = Eigen::VectorXd::Zero(spec.action_dim);
  for (const Transition& t : held.transitions) {
    err += (infer_action(m, t.s, t.s_next) - t.a).cwiseAbs();
  }
  err /= static_cast<double>(held.size());
  char buf[128];
  std::snprintf(buf, sizeof buf, "mean |I(s,s')-a| = %.4f, %.4f after %d iterations", err[0],
                err[1], cfg.iterations);
  return report(err.maxCoeff() <= 0.02, "inverse dynamics oracle", buf);
}

}  // namespace

int run_verify(const VerifyOptions& options) {
  const Rng root(options.seed);
  int failed = loss_identity(root.substream("identity"));
  failed += gradients(root.substream("gradients"));
  failed += invdyn_oracle(options);
  return failed;
}

}  // namespace cdsa::cli
