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
#include <string>
#include <vector>

#include "cdsa/dataset.h"
#include "cdsa/env.h"
#include "cdsa/errors.h"
#include "cdsa/policy.h"
#include "doctest.h"
#include "test_util.h"

using namespace cdsa;
using cdsa::testing::vec;

namespace {

Dataset small_dataset() {
  Dataset d;
  d.state_dim = 2;
  d.action_dim = 1;
  d.transitions.push_back({vec({0, 0}), vec({0.5}), -1.0, vec({0.1, 0}), false});
  d.transitions.push_back({vec({2, 2}), vec({-0.25}), -0.5, vec({2, 2.1}), true});
  d.norm = compute_norm_stats(d);
  return d;
}

std::string pointmass_path() { return std::string(CDSA_ENVS_DIR) + "/pointmass.json"; }

}  // namespace

TEST_CASE("norm stats examples") {
  const Dataset d = small_dataset();
  CHECK(d.norm.state_mean[0] == 1.0);
  CHECK(d.norm.state_mean[1] == 1.0);
  CHECK(d.norm.state_std[0] == 1.0);
  CHECK(d.norm.state_std[1] == 1.0);

  Dataset c = d;
  for (auto& t : c.transitions) t.a = vec({3.0});
  CHECK(compute_norm_stats(c).action_std[0] == kStdFloor);
  CHECK_THROWS(compute_norm_stats(Dataset{}));
}

TEST_CASE("norm stats agree with a two-pass computation") {
  const EnvSpec spec = load_env_spec(pointmass_path());
  const Dataset d = generate_dataset(spec, risk_avoiding_mixture(spec), 50, 100, Rng(3));
  const double n = static_cast<double>(d.size());
  for (int k = 0; k < 2; ++k) {
    double mean = 0.0;
    for (const auto& t : d.transitions) mean += t.s[k];
    mean /= n;
    double var = 0.0;
    for (const auto& t : d.transitions) var += (t.s[k] - mean) * (t.s[k] - mean);
    const double sd = std::sqrt(var / n);
    CHECK(d.norm.state_mean[k] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(d.norm.state_std[k] == doctest::Approx(sd).epsilon(1e-10));
  }
}

TEST_CASE("normalize then denormalize is the identity") {
  const Dataset d = small_dataset();
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd s = vec({rng.uniform(-5, 5), rng.uniform(-5, 5)});
    const Eigen::VectorXd a = vec({rng.uniform(-5, 5)});
    const Eigen::VectorXd s2 = d.norm.denormalize_state(d.norm.normalize_state(s));
    const Eigen::VectorXd a2 = d.norm.denormalize_action(d.norm.normalize_action(a));
    CHECK((s2 - s).norm() <= 1e-12 * (1 + s.norm()));
    CHECK((a2 - a).norm() <= 1e-12 * (1 + a.norm()));
  }
}

TEST_CASE("sampling sizes and the single-record case") {
  const Dataset d = small_dataset();
  Rng rng(4);
  CHECK(sample_batch(d, 256, rng).size() == 256);
  Dataset one = d;
  one.transitions.resize(1);
  const auto b = sample_batch(one, 4, rng);
  REQUIRE(b.size() == 4);
  for (const auto& t : b) CHECK(t == one.transitions[0]);
  CHECK_THROWS(sample_batch(Dataset{}, 4, rng));
  CHECK_THROWS(sample_batch(d, 0, rng));
}

TEST_CASE("sampling frequencies stay within three sigma of uniform") {
  Dataset d;
  d.state_dim = 1;
  d.action_dim = 1;
  for (int i = 0; i < 10; ++i) {
    d.transitions.push_back({vec({double(i)}), vec({0}), 0, vec({0}), false});
  }
  Rng rng(12);
  const int draws = 100000;
  std::vector<int> counts(10, 0);
  for (std::size_t i : sample_indices(d, draws, rng)) ++counts[i];
  const double expected = draws / 10.0;
  const double sd = std::sqrt(draws * 0.1 * 0.9);
  for (int c : counts) CHECK(std::abs(c - expected) <= 3 * sd);
}

TEST_CASE("sampling is deterministic given the seed") {
  const Dataset d = small_dataset();
  Rng a(9);
  Rng b(9);
  CHECK(sample_indices(d, 50, a) == sample_indices(d, 50, b));
}

TEST_CASE("save and load round trip") {
  const EnvSpec spec = load_env_spec(pointmass_path());
  const Dataset d = generate_dataset(spec, risk_avoiding_mixture(spec), 5, 60, Rng(2));
  const auto dir = cdsa::testing::scratch_dir("dataset_rt");
  save_dataset(d, dir / "d.jsonl");
  const Dataset back = load_dataset(dir / "d.jsonl");
  CHECK(back.state_dim == d.state_dim);
  CHECK(back.action_dim == d.action_dim);
  CHECK(back.norm == d.norm);
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(back.transitions[i] == d.transitions[i]);
  CHECK(serialize_dataset(back) == serialize_dataset(d));
}

TEST_CASE("malformed files name the offending line") {
  const std::string meta =
      R"({"meta":{"format":"cdsa-dataset","version":1,"state_dim":2,"action_dim":1}})";
  const std::string good = R"({"s":[0,0],"a":[1],"r":0,"s2":[0,1],"done":false})";

  try {
    parse_dataset(meta + "\n" + good + "\n{not json\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  const std::string bad = R"({"s":[0,0],"a":[1,2],"r":0,"s2":[0,1],"done":false})";
  try {
    parse_dataset(meta + "\n" + good + "\n" + bad + "\n");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    const std::string what = e.what();
    CHECK(what.find("line 3") != std::string::npos);
    CHECK(what.find("record 1") != std::string::npos);
  }
}

TEST_CASE("empty files are an error, not an empty dataset") {
  try {
    parse_dataset("");
    FAIL("expected an error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("no records") != std::string::npos);
  }
  const auto dir = cdsa::testing::scratch_dir("dataset_empty");
  write_text_file(dir / "e.jsonl", "");
  CHECK_THROWS_AS(load_dataset(dir / "e.jsonl"), SchemaError);
  CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), IoError);
}

TEST_CASE("norm is computed when the metadata omits it") {
  const std::string text =
      R"({"meta":{"format":"cdsa-dataset","version":1,"state_dim":2,"action_dim":1}})"
      "\n"
      R"({"s":[0,0],"a":[1],"r":0,"s2":[0,1],"done":false})"
      "\n"
      R"({"s":[2,2],"a":[3],"r":0,"s2":[0,1],"done":true})";
  const Dataset d = parse_dataset(text);
  CHECK(d.norm.state_mean[0] == 1.0);
  CHECK(d.norm.action_std[0] == 1.0);
}

TEST_CASE("validate_dataset rejects inconsistent records") {
  Dataset d = small_dataset();
  d.transitions[1].s_next = vec({1});
  CHECK_THROWS_AS(validate_dataset(d), DimensionError);
  d = small_dataset();
  d.transitions[0].r = std::nan("");
  CHECK_THROWS_AS(validate_dataset(d), NonFiniteError);
}

TEST_CASE("generated datasets: counts, determinism and safety") {
  const EnvSpec spec = load_env_spec(pointmass_path());
  const auto mix = risk_avoiding_mixture(spec);
  const Dataset d = generate_dataset(spec, mix, 50, 100, Rng(0));
  CHECK(d.size() >= 50);
  CHECK(d.size() <= 5000);
  for (const auto& t : d.transitions) {
    CHECK_FALSE(spec.in_risk(t.s));
    CHECK_FALSE(spec.in_risk(t.s_next));
  }
  CHECK(serialize_dataset(generate_dataset(spec, mix, 50, 100, Rng(0))) ==
        serialize_dataset(d));

  const Dataset one = generate_dataset(spec, mix, 1, 1, Rng(0));
  REQUIRE(one.size() == 1);
  CHECK(one.transitions[0].done);
}
