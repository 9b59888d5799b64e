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
#include <cmath>
#include <string>
#include <vector>

#include "cdsa/controller.h"
#include "cdsa/errors.h"
#include "cdsa/evaluation.h"
#include "cdsa/policy.h"
#include "doctest.h"
#include "test_util.h"

using namespace cdsa;
using cdsa::testing::vec;

namespace {

EnvSpec pointmass() {
  return load_env_spec(std::string(CDSA_ENVS_DIR) + "/pointmass.json");
}

EpisodeStats stat(double ret, int steps, int risk, bool goal, std::uint64_t seed) {
  EpisodeStats s;
  s.undiscounted_return = ret;
  s.discounted_return = ret;
  s.steps = steps;
  s.risk_entries = risk;
  s.reached_goal = goal;
  s.seed = seed;
  return s;
}

// Minimal well-formedness scan: balanced tags and quoted attributes.
bool well_formed_xml(const std::string& doc) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = doc.find('<', pos)) != std::string::npos) {
    const std::size_t end = doc.find('>', pos);
    if (end == std::string::npos) return false;
    const std::string tag = doc.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    if (tag.back() == '/') continue;
    stack.push_back(tag.substr(0, tag.find(' ')));
  }
  return stack.empty();
}

}  // namespace

TEST_CASE("var_at examples") {
  const std::vector<double> r{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  CHECK(var_at(r, 10) == doctest::Approx(1.9).epsilon(1e-15));
  CHECK(var_at(r, 0) == 1.0);
  CHECK(var_at(r, 100) == 10.0);
  CHECK(var_at(std::vector<double>{4.0}, 37) == 4.0);
  CHECK_THROWS(var_at(std::vector<double>{}, 10));
  CHECK_THROWS(var_at(r, -1));
  CHECK_THROWS(var_at(r, 100.5));
}

TEST_CASE("var_at is monotone in the percentile") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r(1 + rng.index(40));
    for (double& x : r) x = rng.normal() * 10;
    double prev = -INFINITY;
    for (double p = 0; p <= 100; p += 0.5) {
      const double v = var_at(r, p);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("summaries: identical inputs give zero deltas") {
  std::vector<EpisodeStats> s;
  for (int i = 0; i < 20; ++i) s.push_back(stat(-i * 1.5, 10 + i, i % 3, i % 2, i));
  const Report r = summarize(s, s, kDefaultVarGrid);
  CHECK(r.grid.size() == 6);
  CHECK(r.baseline.var_curve.size() == 6);
  CHECK(r.corrected.var_curve.size() == 6);
  CHECK(r.delta_mean_return == 0.0);
  CHECK(r.delta_risk_rate == 0.0);
  CHECK(r.delta_goal_rate == 0.0);
  for (double d : r.delta_var) CHECK(d == 0.0);
  CHECK(r.warnings.empty());
  for (std::size_t i = 1; i < 6; ++i) CHECK(r.baseline.var_curve[i] >= r.baseline.var_curve[i - 1]);
}

TEST_CASE("summaries: rates and mismatched counts") {
  const std::vector<EpisodeStats> a{stat(-10, 10, 5, true, 0), stat(-20, 20, 0, false, 1)};
  const std::vector<EpisodeStats> b{stat(-4, 4, 1, true, 0)};
  const Report r = summarize(a, b, kDefaultVarGrid);
  CHECK(r.baseline.risk_rate == doctest::Approx(0.25));
  CHECK(r.baseline.goal_rate == doctest::Approx(0.5));
  CHECK(r.baseline.mean_return == doctest::Approx(-15));
  CHECK(r.delta_mean_return == doctest::Approx(11));
  CHECK(r.delta_risk_rate == doctest::Approx(0.0));
  CHECK_FALSE(r.warnings.empty());
  CHECK_THROWS(summarize({}, b, kDefaultVarGrid));
}

TEST_CASE("report csv round trip keeps every digit") {
  std::vector<EpisodeStats> a;
  std::vector<EpisodeStats> b;
  Rng rng(1);
  for (int i = 0; i < 30; ++i) {
    a.push_back(stat(rng.normal() * 7, 20, 1, true, i));
    b.push_back(stat(rng.normal() * 3, 20, 0, true, i));
  }
  const Report r = summarize(a, b, kDefaultVarGrid);
  const auto rows = parse_report_csv(report_csv(r));
  int var_rows = 0;
  for (const auto& row : rows) {
    if (row.metric == "var") {
      ++var_rows;
      const auto it = std::find(r.grid.begin(), r.grid.end(), row.percentile);
      REQUIRE(it != r.grid.end());
      const auto k = static_cast<std::size_t>(it - r.grid.begin());
      if (row.arm == "baseline") CHECK(row.value == r.baseline.var_curve[k]);
      if (row.arm == "corrected") CHECK(row.value == r.corrected.var_curve[k]);
    }
    if (row.metric == "mean_return" && row.arm == "baseline") {
      CHECK(row.value == r.baseline.mean_return);
    }
    if (row.metric == "mean_return" && row.arm == "corrected") {
      CHECK(row.value == r.corrected.mean_return);
    }
  }
  CHECK(var_rows >= 12);
}

TEST_CASE("rollouts: counts, seeds, pairing, determinism, threads") {
  const EnvSpec spec = pointmass();
  const Dataset d = generate_dataset(spec, risk_avoiding_mixture(spec), 20, 100, Rng(0));
  BcTrainConfig bc;
  bc.iterations = 100;
  const BcPolicy pi = train_bc_policy(d, spec, bc).with_noise(0.5);
  ControlConfig base = ControlConfig::for_env(spec);
  base.ablation = Ablation::kBaseline;
  RolloutOptions o;
  o.episodes = 200;
  o.base_seed = 3;
  o.keep_trajectories = 5;
  std::vector<Trajectory> kept;
  const auto s1 = rollout_batch(spec, pi, nullptr, base, o, &kept);
  REQUIRE(s1.size() == 200);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].seed == i);
    CHECK(s1[i].risk_entries <= s1[i].steps);
    CHECK(s1[i].steps <= spec.max_steps);
  }
  CHECK(kept.size() == 5);
  CHECK(rollout_batch(spec, pi, nullptr, base, o) == s1);
  o.jobs = 4;
  CHECK(rollout_batch(spec, pi, nullptr, base, o) == s1);

  ScoreTrainConfig sc;
  sc.iterations = 3;
  sc.hidden = {8};
  InvDynTrainConfig ic;
  ic.iterations = 3;
  ic.hidden = {8};
  const CdsaModels m = train_cdsa(d, sc, ic);
  ControlConfig zero = ControlConfig::for_env(spec);
  zero.k1 = 0;
  zero.k2 = 0;
  o.jobs = 1;
  CHECK(rollout_batch(spec, pi, &m, zero, o) == s1);
  CHECK(rollout_batch(spec, pi, &m, base, o) == s1);

  ControlConfig on = ControlConfig::for_env(spec);
  on.k1 = 0.5;
  std::vector<Trajectory> kc;
  rollout_batch(spec, pi, &m, on, o, &kc);
  for (std::size_t i = 0; i < kc.size(); ++i) CHECK(kc[i].steps[0].s == kept[i].steps[0].s);
}

TEST_CASE("trajectory csv round trip") {
  Trajectory t;
  for (int i = 0; i < 4; ++i) {
    TrajectoryStep s;
    s.s = vec({0.1 * i, 1.0 / 3.0});
    s.a_o = vec({0.5, -0.25});
    s.a = vec({0.4, std::sqrt(2.0)});
    s.r = -0.1 * i;
    s.risk = i == 2;
    s.done = i == 3;
    t.steps.push_back(s);
  }
  const std::string csv = trajectory_csv(t);
  CHECK(csv.rfind("step,s0,s1,a_o0,a_o1,a0,a1,r,risk_flag,done\n", 0) == 0);
  const Trajectory back = parse_trajectory_csv(csv);
  REQUIRE(back.steps.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.steps[i].s == t.steps[i].s);
    CHECK(back.steps[i].a_o == t.steps[i].a_o);
    CHECK(back.steps[i].a == t.steps[i].a);
    CHECK(back.steps[i].r == t.steps[i].r);
    CHECK(back.steps[i].risk == t.steps[i].risk);
    CHECK(back.steps[i].done == t.steps[i].done);
  }
  CHECK_THROWS_AS(parse_trajectory_csv("step,s0,a_o0,a0,r,risk_flag,done\n0,1,2\n"), ParseError);
}

TEST_CASE("svg output: geometry only, trajectories, quiver") {
  const EnvSpec spec = load_env_spec(std::string(CDSA_ENVS_DIR) + "/transport.json");
  const std::string bare = render_svg(spec, {});
  CHECK(well_formed_xml(bare));
  CHECK(bare.find("<polyline") == std::string::npos);
  CHECK(bare.find("class=\"risk\"") != std::string::npos);

  const Dataset d = generate_dataset(spec, risk_avoiding_mixture(spec), 10, 200, Rng(0));
  ScoreTrainConfig sc;
  sc.iterations = 0;
  const ScoreField h = train_score_field(d, ScoreKind::kStateScore, sc);
  const auto arrows = state_score_quiver(h, spec, 20, vec({0, 0}));
  CHECK(arrows.size() == 400);
  const std::string quiver = render_svg(spec, {}, arrows);
  CHECK(well_formed_xml(quiver));
  std::size_t lines = 0;
  for (std::size_t p = 0; (p = quiver.find("class=\"quiver\"", p)) != std::string::npos; ++p) ++lines;
  CHECK(lines == 400);

  const EnvSpec pm = pointmass();
  BcTrainConfig bc;
  bc.iterations = 10;
  const BcPolicy pi = train_bc_policy(generate_dataset(pm, risk_avoiding_mixture(pm), 5, 50, Rng(0)), pm, bc);
  ControlConfig base = ControlConfig::for_env(pm);
  std::vector<Trajectory> trajs;
  RolloutOptions o;
  o.episodes = 3;
  o.keep_trajectories = 3;
  const auto st = rollout_batch(pm, pi, nullptr, base, o, &trajs);
  const auto dir = cdsa::testing::scratch_dir("report");
  emit_report(summarize(st, st, kDefaultVarGrid), dir / "out/r.csv", dir / "out/r.svg", pm, trajs, trajs);
  const std::string svg = read_text_file(dir / "out/r.svg");
  CHECK(well_formed_xml(svg));
  std::size_t polys = 0;
  for (std::size_t p = 0; (p = svg.find("<polyline", p)) != std::string::npos; ++p) ++polys;
  CHECK(polys == 6);
  CHECK_FALSE(parse_report_csv(read_text_file(dir / "out/r.csv")).empty());
}

TEST_CASE("report write errors name the path") {
  const EnvSpec spec = pointmass();
  const auto dir = cdsa::testing::scratch_dir("report_err");
  write_text_file(dir / "blocker", "x");
  std::vector<EpisodeStats> s{stat(-1, 1, 0, true, 0)};
  try {
    emit_report(summarize(s, s, kDefaultVarGrid), dir / "blocker/r.csv", dir / "r.svg", spec, {}, {});
    FAIL("expected an I/O error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("blocker") != std::string::npos);
  }
}

TEST_CASE("quiver arrows vanish at the data mode") {
  const EnvSpec spec = pointmass();
  Dataset d;
  d.state_dim = 2;
  d.action_dim = 2;
  Rng rng(17);
  for (int i = 0; i < 5000; ++i) {
    const Eigen::VectorXd s = vec({0.5 + 0.1 * rng.normal(), 0.5 + 0.1 * rng.normal()});
    d.transitions.push_back({s, vec({0.3 * rng.normal(), 0.3 * rng.normal()}), 0.0, s, false});
  }
  d.norm = compute_norm_stats(d);
  ScoreTrainConfig cfg;
  cfg.sigma = 0.5;
  cfg.iterations = 2000;
  const ScoreField h = train_score_field(d, ScoreKind::kStateScore, cfg);

  // 11 cells per side puts a cell center on (0.5, 0.5).
  const auto arrows = state_score_quiver(h, spec, 11, d.norm.action_mean);
  REQUIRE(arrows.size() == 121);
  double at_mode = -1.0;
  std::vector<double> lengths;
  for (const Arrow& a : arrows) {
    if ((a.from - vec({0.5, 0.5})).norm() < 1e-9) at_mode = a.vec.norm();
    lengths.push_back(a.vec.norm());
  }
  std::sort(lengths.begin(), lengths.end());
  const double median = lengths[lengths.size() / 2];
  REQUIRE(at_mode >= 0.0);
  CHECK(at_mode <= 0.1 * median);
}
