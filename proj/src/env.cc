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

#include "cdsa/env.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdsa/errors.h"

namespace cdsa {
namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& name,
                const std::pair<std::string_view, Enum> (&table)[N],
                const char* what) {
  for (const auto& [key, value] : table) {
    if (name == key) return value;
  }
  throw SchemaError(std::string("unknown ") + what + " '" + name + "'");
}

constexpr std::pair<std::string_view, EnvKind> kEnvKinds[] = {
    {"risky_pointmass", EnvKind::kRiskyPointMass},
    {"risky_transport", EnvKind::kRiskyTransport},
    {"linear_point", EnvKind::kLinearPoint}};
constexpr std::pair<std::string_view, RegionLabel> kLabels[] = {
    {"river", RegionLabel::kRiver},       {"mountain", RegionLabel::kMountain},
    {"ice", RegionLabel::kIce},           {"risk_circle", RegionLabel::kRiskCircle},
    {"goods", RegionLabel::kGoods},       {"airport", RegionLabel::kAirport}};
constexpr std::pair<std::string_view, TaskKind> kTasks[] = {
    {"path_finding", TaskKind::kPathFinding},
    {"goods", TaskKind::kGoods},
    {"airport", TaskKind::kAirport}};

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum value,
                           const std::pair<std::string_view, Enum> (&table)[N]) {
  for (const auto& [key, v] : table) {
    if (v == value) return key;
  }
  return "?";
}

Region region_from_json(const Json& j, int dim) {
  const auto label = parse_enum(require(j, "label").get<std::string>(), kLabels,
                                "region label");
  const auto shape = require(j, "shape").get<std::string>();
  if (shape == "circle") {
    return Region::circle(label,
                          vector_from_json(require(j, "center"), "center", dim),
                          require(j, "radius").get<double>());
  }
  if (shape == "rect") {
    return Region::rect(label, vector_from_json(require(j, "min"), "min", dim),
                        vector_from_json(require(j, "max"), "max", dim));
  }
  throw SchemaError("unknown region shape '" + shape + "'");
}

Json region_to_json(const Region& r) {
  Json j{{"label", std::string(to_string(r.label))}};
  if (r.shape == Region::Shape::kCircle) {
    j["shape"] = "circle";
    j["center"] = to_json(r.center);
    j["radius"] = r.radius;
  } else {
    j["shape"] = "rect";
    j["min"] = to_json(r.min);
    j["max"] = to_json(r.max);
  }
  return j;
}

void check_region(const Region& r, const EnvSpec& spec) {
  const std::string what = "region '" + std::string(to_string(r.label)) + "'";
  if (r.shape == Region::Shape::kCircle) {
    if (!(r.radius > 0.0)) throw SchemaError(what + ": radius must be > 0");
    if ((r.center.array() < spec.arena_min.array()).any() ||
        (r.center.array() > spec.arena_max.array()).any()) {
      throw SchemaError(what + ": center outside the arena");
    }
  } else {
    if ((r.min.array() >= r.max.array()).any()) {
      throw SchemaError(what + ": min must be < max");
    }
    if ((r.min.array() < spec.arena_min.array()).any() ||
        (r.max.array() > spec.arena_max.array()).any()) {
      throw SchemaError(what + ": rectangle leaves the arena");
    }
  }
}

// Slab test of segment p->q against the box [lo, hi].
bool segment_hits_box(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  double t0 = 0.0;
  double t1 = 1.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double d = q[i] - p[i];
    if (std::abs(d) < 1e-15) {
      if (p[i] < lo[i] || p[i] > hi[i]) return false;
      continue;
    }
    double a = (lo[i] - p[i]) / d;
    double b = (hi[i] - p[i]) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

std::string_view to_string(EnvKind kind) { return enum_name(kind, kEnvKinds); }
std::string_view to_string(RegionLabel label) { return enum_name(label, kLabels); }
std::string_view to_string(TaskKind kind) { return enum_name(kind, kTasks); }

TaskKind task_kind_from_string(std::string_view name) {
  return parse_enum(std::string(name), kTasks, "task");
}

bool is_risky(RegionLabel label) {
  return label != RegionLabel::kGoods && label != RegionLabel::kAirport;
}

Region Region::circle(RegionLabel label, Eigen::VectorXd center, double radius) {
  Region r;
  r.shape = Shape::kCircle;
  r.label = label;
  r.center = std::move(center);
  r.radius = radius;
  return r;
}

Region Region::rect(RegionLabel label, Eigen::VectorXd min, Eigen::VectorXd max) {
  Region r;
  r.shape = Shape::kRect;
  r.label = label;
  r.min = std::move(min);
  r.max = std::move(max);
  return r;
}

bool Region::contains(const Eigen::VectorXd& p) const {
  if (shape == Shape::kCircle) return (p - center).norm() <= radius;
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

double Region::distance(const Eigen::VectorXd& p) const {
  if (shape == Shape::kCircle) return std::max(0.0, (p - center).norm() - radius);
  const Eigen::VectorXd clamped = p.cwiseMax(min).cwiseMin(max);
  return (p - clamped).norm();
}

bool Region::segment_hits(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                          double margin) const {
  if (shape == Shape::kRect) {
    const Eigen::VectorXd grow = Eigen::VectorXd::Constant(p.size(), margin);
    return segment_hits_box(p, q, min - grow, max + grow);
  }
  const Eigen::VectorXd d = q - p;
  const double len2 = d.squaredNorm();
  double t = len2 > 0.0 ? (center - p).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p + t * d - center).norm() <= radius + margin;
}

void EnvSpec::validate() const {
  const auto n = static_cast<Eigen::Index>(state_dim);
  if (state_dim < 1 || action_dim < 1) throw SchemaError("dims must be >= 1");
  if (action_dim != state_dim) {
    throw SchemaError("point environments need action_dim == state_dim");
  }
  if (arena_min.size() != n || arena_max.size() != n ||
      (arena_min.array() >= arena_max.array()).any()) {
    throw SchemaError("arena: min must be < max with state_dim entries");
  }
  if (action_low.size() != action_dim || action_high.size() != action_dim ||
      (action_low.array() >= action_high.array()).any()) {
    throw SchemaError("action bounds: low must be < high elementwise");
  }
  if (start_min.size() != n || start_max.size() != n ||
      (start_min.array() > start_max.array()).any()) {
    throw SchemaError("start box: min must be <= max");
  }
  if ((start_min.array() < arena_min.array()).any() ||
      (start_max.array() > arena_max.array()).any()) {
    throw SchemaError("start box leaves the arena");
  }
  if (goal.size() != n) throw SchemaError("goal: wrong dimension");
  if (!(dt > 0.0)) throw SchemaError("dt must be > 0");
  if (!(capture_radius > 0.0)) throw SchemaError("capture_radius must be > 0");
  if (!(risk_prob >= 0.0 && risk_prob <= 1.0)) {
    throw SchemaError("risk_prob must lie in [0, 1]");
  }
  if (risk_penalty > 0.0) throw SchemaError("risk_penalty must be <= 0");
  if (step_cost < 0.0) throw SchemaError("step_cost must be >= 0");
  if (max_steps < 1) throw SchemaError("max_steps must be >= 1");
  for (const Region& r : risk_regions) {
    if (!is_risky(r.label)) {
      throw SchemaError("risk_regions may only hold risky labels");
    }
    check_region(r, *this);
  }
  if (task == TaskKind::kGoods && !goods_region) {
    throw SchemaError("goods task needs a goods region");
  }
  if (task == TaskKind::kAirport) {
    if (!airport_region) throw SchemaError("airport task needs an airport region");
    if (landing_point.size() != n) throw SchemaError("airport task needs a landing point");
  }
  if (goods_region) check_region(*goods_region, *this);
  if (airport_region) check_region(*airport_region, *this);
  for (const RouteVariant& rv : routes) {
    for (const Region& b : rv.blocks) check_region(b, *this);
  }
  if (!(planner_resolution > 0.0) || planner_margin < 0.0) {
    throw SchemaError("planner: resolution must be > 0, margin >= 0");
  }
}

bool EnvSpec::in_risk(const Eigen::VectorXd& p) const {
  return std::any_of(risk_regions.begin(), risk_regions.end(),
                     [&](const Region& r) { return r.contains(p); });
}

Eigen::VectorXd EnvSpec::clip_action(const Eigen::VectorXd& a) const {
  return a.cwiseMax(action_low).cwiseMin(action_high);
}

EnvSpec env_spec_from_json(const Json& j) {
  EnvSpec spec;
  try {
    spec.name = j.value("name", std::string("unnamed"));
    spec.kind = parse_enum(require(j, "kind").get<std::string>(), kEnvKinds,
                           "environment kind");
    spec.state_dim = require(j, "state_dim").get<int>();
    spec.action_dim = require(j, "action_dim").get<int>();
    const int n = spec.state_dim;
    const Json& arena = require(j, "arena");
    spec.arena_min = vector_from_json(require(arena, "min"), "arena.min", n);
    spec.arena_max = vector_from_json(require(arena, "max"), "arena.max", n);
    spec.clamp_to_arena = arena.value("clamp", true);
    spec.dt = require(j, "dt").get<double>();
    spec.action_low =
        vector_from_json(require(j, "action_low"), "action_low", spec.action_dim);
    spec.action_high = vector_from_json(require(j, "action_high"), "action_high",
                                        spec.action_dim);
    const Json& start = require(j, "start");
    const std::string start_type = require(start, "type").get<std::string>();
    if (start_type == "point") {
      spec.start_min = vector_from_json(require(start, "at"), "start.at", n);
      spec.start_max = spec.start_min;
    } else if (start_type == "box") {
      spec.start_min = vector_from_json(require(start, "min"), "start.min", n);
      spec.start_max = vector_from_json(require(start, "max"), "start.max", n);
    } else {
      throw SchemaError("start.type must be 'point' or 'box'");
    }
    const Json& goal = require(j, "goal");
    spec.goal = vector_from_json(require(goal, "center"), "goal.center", n);
    spec.capture_radius = require(goal, "radius").get<double>();
    if (j.contains("risk_regions")) {
      for (const Json& r : j["risk_regions"]) {
        spec.risk_regions.push_back(region_from_json(r, n));
      }
    }
    spec.risk_penalty = j.value("risk_penalty", -100.0);
    spec.risk_prob = j.value("risk_prob", 0.1);
    spec.step_cost = j.value("step_cost", 1.0);
    spec.max_steps = j.value("max_steps", 200);
    if (j.contains("goods_region")) {
      spec.goods_region = region_from_json(j["goods_region"], n);
    }
    if (j.contains("airport_region")) {
      spec.airport_region = region_from_json(j["airport_region"], n);
    }
    if (j.contains("landing_point")) {
      spec.landing_point = vector_from_json(j["landing_point"], "landing_point", n);
    }
    spec.task = parse_enum(j.value("task", std::string("path_finding")), kTasks,
                           "task");
    if (j.contains("planner")) {
      const Json& pl = j["planner"];
      spec.planner_resolution = pl.value("resolution", 0.01);
      spec.planner_margin = pl.value("margin", 0.04);
      if (pl.contains("routes")) {
        for (const Json& rj : pl["routes"]) {
          RouteVariant rv;
          rv.name = require(rj, "name").get<std::string>();
          for (const Json& b : require(rj, "blocks")) {
            rv.blocks.push_back(region_from_json(b, n));
          }
          spec.routes.push_back(std::move(rv));
        }
      }
    }
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("env spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

Json env_spec_to_json(const EnvSpec& spec) {
  Json j;
  j["format"] = "cdsa-env";
  j["version"] = 1;
  j["name"] = spec.name;
  j["kind"] = std::string(to_string(spec.kind));
  j["state_dim"] = spec.state_dim;
  j["action_dim"] = spec.action_dim;
  j["arena"] = {{"min", to_json(spec.arena_min)},
                {"max", to_json(spec.arena_max)},
                {"clamp", spec.clamp_to_arena}};
  j["dt"] = spec.dt;
  j["action_low"] = to_json(spec.action_low);
  j["action_high"] = to_json(spec.action_high);
  if (spec.start_min == spec.start_max) {
    j["start"] = {{"type", "point"}, {"at", to_json(spec.start_min)}};
  } else {
    j["start"] = {{"type", "box"},
                  {"min", to_json(spec.start_min)},
                  {"max", to_json(spec.start_max)}};
  }
  j["goal"] = {{"center", to_json(spec.goal)}, {"radius", spec.capture_radius}};
  j["risk_regions"] = Json::array();
  for (const Region& r : spec.risk_regions) {
    j["risk_regions"].push_back(region_to_json(r));
  }
  j["risk_penalty"] = spec.risk_penalty;
  j["risk_prob"] = spec.risk_prob;
  j["step_cost"] = spec.step_cost;
  j["max_steps"] = spec.max_steps;
  j["task"] = std::string(to_string(spec.task));
  if (spec.goods_region) j["goods_region"] = region_to_json(*spec.goods_region);
  if (spec.airport_region) {
    j["airport_region"] = region_to_json(*spec.airport_region);
  }
  if (spec.landing_point.size() > 0) {
    j["landing_point"] = to_json(spec.landing_point);
  }
  Json routes = Json::array();
  for (const RouteVariant& rv : spec.routes) {
    Json blocks = Json::array();
    for (const Region& b : rv.blocks) blocks.push_back(region_to_json(b));
    routes.push_back({{"name", rv.name}, {"blocks", blocks}});
  }
  j["planner"] = {{"resolution", spec.planner_resolution},
                  {"margin", spec.planner_margin},
                  {"routes", routes}};
  return j;
}

EnvSpec load_env_spec(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ParseError("env spec '" + path.string() + "': " + e.what(), 0);
  }
  return env_spec_from_json(j);
}

EnvSpec with_task(const EnvSpec& spec, TaskKind task) {
  EnvSpec out = spec;
  out.task = task;
  out.validate();
  return out;
}

EnvState env_reset(const EnvSpec& spec, Rng& rng) {
  EnvState st;
  st.s = spec.start_min;
  for (Eigen::Index i = 0; i < st.s.size(); ++i) {
    if (spec.start_max[i] > spec.start_min[i]) {
      st.s[i] = rng.uniform(spec.start_min[i], spec.start_max[i]);
    }
  }
  return st;
}

StepResult env_step(const EnvSpec& spec, const EnvState& state,
                    const Eigen::VectorXd& action, Rng& rng) {
  if (action.size() != spec.action_dim) {
    throw DimensionError("env_step: action has wrong dimension");
  }
  if (!action.allFinite()) throw NonFiniteError("env_step: non-finite action");

  StepResult out;
  out.next = state;
  out.next.steps = state.steps + 1;
  Eigen::VectorXd s = state.s + spec.clip_action(action) * spec.dt;
  if (spec.clamp_to_arena) s = s.cwiseMax(spec.arena_min).cwiseMin(spec.arena_max);

  if (spec.task == TaskKind::kAirport && !state.teleport_used &&
      spec.airport_region->contains(s)) {
    s = spec.landing_point;
    out.next.teleport_used = true;
  }
  if (spec.goods_region && spec.goods_region->contains(s)) {
    out.next.goods_visited = true;
  }
  out.next.s = s;

  out.risk_entered = spec.in_risk(s);
  const bool penalty_fires = rng.bernoulli(spec.risk_prob);
  out.reward = -spec.step_cost * (s - spec.goal).norm();
  if (out.risk_entered && penalty_fires) out.reward += spec.risk_penalty;

  const bool at_goal = (s - spec.goal).norm() <= spec.capture_radius;
  out.reached_goal =
      at_goal && (spec.task != TaskKind::kGoods || out.next.goods_visited);
  out.done = out.reached_goal || out.next.steps >= spec.max_steps;
  return out;
}

}  // namespace cdsa
