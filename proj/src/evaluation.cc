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

#include "cdsa/evaluation.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cdsa/errors.h"

namespace cdsa {
namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

EpisodeStats episode_stats(const Trajectory& traj, double gamma,
                           std::uint64_t seed) {
  EpisodeStats st;
  st.seed = seed;
  st.steps = static_cast<int>(traj.steps.size());
  st.reached_goal = traj.reached_goal;
  double discount = 1.0;
  for (const TrajectoryStep& step : traj.steps) {
    st.undiscounted_return += step.r;
    st.discounted_return += discount * step.r;
    discount *= gamma;
    if (step.risk) ++st.risk_entries;
  }
  return st;
}

std::vector<EpisodeStats> rollout_batch(const EnvSpec& spec,
                                        const Policy& base_policy,
                                        const CdsaModels* models,
                                        const ControlConfig& cfg,
                                        const RolloutOptions& options,
                                        std::vector<Trajectory>* kept) {
  if (options.episodes < 1) throw std::invalid_argument("rollout_batch: episodes < 1");
  if (!(options.gamma >= 0.0 && options.gamma <= 1.0)) {
    throw std::invalid_argument("rollout_batch: gamma must lie in [0, 1]");
  }
  if (models) cfg.validate();
  const auto n = static_cast<std::size_t>(options.episodes);
  const auto keep =
      std::min(n, static_cast<std::size_t>(std::max(0, options.keep_trajectories)));
  std::vector<EpisodeStats> stats(n);
  std::vector<Trajectory> trajs(keep);
  const Rng base(options.base_seed);

  auto run_range = [&](std::size_t worker, std::size_t stride) {
    for (std::size_t i = worker; i < n; i += stride) {
      Trajectory traj = control_episode(spec, base_policy, models, cfg,
                                        base.substream(i));
      stats[i] = episode_stats(traj, options.gamma, i);
      if (i < keep) trajs[i] = std::move(traj);
    }
  };
  const std::size_t jobs =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, options.jobs)), 1, n);
  if (jobs == 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          run_range(w, jobs);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  if (kept) *kept = std::move(trajs);
  return stats;
}

double var_at(std::span<const double> returns, double percentile) {
  if (returns.empty()) throw std::invalid_argument("var_at: empty list");
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw std::invalid_argument("var_at: percentile outside [0, 100]");
  }
  std::vector<double> sorted(returns.begin(), returns.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = static_cast<double>(sorted.size() - 1) * percentile / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ArmSummary summarize_arm(const std::vector<EpisodeStats>& stats,
                         std::span<const double> grid) {
  ArmSummary arm;
  arm.episodes = stats.size();
  if (stats.empty()) throw std::invalid_argument("summarize: empty arm");
  std::vector<double> returns;
  std::vector<double> risk;
  std::vector<double> goal;
  std::vector<double> steps;
  for (const EpisodeStats& s : stats) {
    returns.push_back(s.undiscounted_return);
    risk.push_back(s.steps > 0 ? static_cast<double>(s.risk_entries) / s.steps : 0.0);
    goal.push_back(s.reached_goal ? 1.0 : 0.0);
    steps.push_back(static_cast<double>(s.steps));
  }
  arm.mean_return = mean_of(returns);
  double ss = 0.0;
  for (double r : returns) ss += (r - arm.mean_return) * (r - arm.mean_return);
  arm.std_return = std::sqrt(ss / static_cast<double>(returns.size()));
  arm.risk_rate = mean_of(risk);
  arm.goal_rate = mean_of(goal);
  arm.mean_steps = mean_of(steps);
  for (double p : grid) arm.var_curve.push_back(var_at(returns, p));
  return arm;
}

Report summarize(const std::vector<EpisodeStats>& baseline,
                 const std::vector<EpisodeStats>& corrected,
                 std::span<const double> grid, Json config) {
  Report r;
  r.grid.assign(grid.begin(), grid.end());
  std::sort(r.grid.begin(), r.grid.end());
  r.baseline = summarize_arm(baseline, r.grid);
  r.corrected = summarize_arm(corrected, r.grid);
  r.delta_mean_return = r.corrected.mean_return - r.baseline.mean_return;
  r.delta_risk_rate = r.corrected.risk_rate - r.baseline.risk_rate;
  r.delta_goal_rate = r.corrected.goal_rate - r.baseline.goal_rate;
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    r.delta_var.push_back(r.corrected.var_curve[i] - r.baseline.var_curve[i]);
  }
  if (baseline.size() != corrected.size()) {
    r.warnings.push_back("episode counts differ: baseline " +
                         std::to_string(baseline.size()) + ", corrected " +
                         std::to_string(corrected.size()));
  }
  r.config = std::move(config);
  r.baseline_stats = baseline;
  r.corrected_stats = corrected;
  return r;
}

std::string report_csv(const Report& report) {
  std::ostringstream out;
  out << "metric,arm,percentile,value\n";
  auto row = [&](const char* metric, const char* arm, double value,
                 const double* pct = nullptr) {
    out << metric << ',' << arm << ',';
    if (pct) out << format_real(*pct);
    out << ',' << format_real(value) << '\n';
  };
  auto arm_rows = [&](const ArmSummary& a, const char* name) {
    row("episodes", name, static_cast<double>(a.episodes));
    row("mean_return", name, a.mean_return);
    row("std_return", name, a.std_return);
    row("risk_rate", name, a.risk_rate);
    row("goal_rate", name, a.goal_rate);
    row("mean_steps", name, a.mean_steps);
    for (std::size_t i = 0; i < report.grid.size(); ++i) {
      row("var", name, a.var_curve[i], &report.grid[i]);
    }
  };
  arm_rows(report.baseline, "baseline");
  arm_rows(report.corrected, "corrected");
  row("mean_return", "delta", report.delta_mean_return);
  row("risk_rate", "delta", report.delta_risk_rate);
  row("goal_rate", "delta", report.delta_goal_rate);
  for (std::size_t i = 0; i < report.grid.size(); ++i) {
    row("var", "delta", report.delta_var[i], &report.grid[i]);
  }
  return out.str();
}

std::vector<ReportCsvRow> parse_report_csv(std::string_view text) {
  std::vector<ReportCsvRow> rows;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 4) {
      throw ParseError("report csv line " + std::to_string(line_no) +
                           ": expected 4 columns",
                       line_no);
    }
    ReportCsvRow r;
    r.metric = cols[0];
    r.arm = cols[1];
    try {
      r.percentile = cols[2].empty() ? -1.0 : std::stod(cols[2]);
      r.value = std::stod(cols[3]);
    } catch (const std::exception&) {
      throw ParseError("report csv line " + std::to_string(line_no) +
                           ": bad number",
                       line_no);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace cdsa
