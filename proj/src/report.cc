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
#include <cstdio>
#include <sstream>

#include "cdsa/errors.h"

namespace cdsa {
namespace {

constexpr double kCanvas = 600.0;
constexpr double kPad = 20.0;

std::string region_fill(RegionLabel label) {
  switch (label) {
    case RegionLabel::kRiver: return "#4a90d9";
    case RegionLabel::kMountain: return "#8b5a2b";
    case RegionLabel::kIce: return "#bfe6f2";
    case RegionLabel::kRiskCircle: return "#e03c31";
    case RegionLabel::kGoods: return "#f2c14e";
    case RegionLabel::kAirport: return "#9b59b6";
  }
  return "#888888";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

class SvgCanvas {
 public:
  explicit SvgCanvas(const EnvSpec& spec)
      : lo_(spec.arena_min), hi_(spec.arena_max) {
    const Eigen::VectorXd extent = hi_ - lo_;
    scale_ = (kCanvas - 2.0 * kPad) / std::max(extent[0], extent[1]);
    width_ = extent[0] * scale_ + 2.0 * kPad;
    height_ = extent[1] * scale_ + 2.0 * kPad;
    out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_)
         << "\" height=\"" << num(height_) << "\" viewBox=\"0 0 " << num(width_)
         << ' ' << num(height_) << "\">\n"
         << "<rect x=\"0\" y=\"0\" width=\"" << num(width_) << "\" height=\""
         << num(height_) << "\" fill=\"#ffffff\"/>\n";
  }

  double px(double x) const { return kPad + (x - lo_[0]) * scale_; }
  double py(double y) const { return height_ - kPad - (y - lo_[1]) * scale_; }

  void arena() {
    out_ << "<rect class=\"arena\" x=\"" << num(px(lo_[0])) << "\" y=\""
         << num(py(hi_[1])) << "\" width=\"" << num((hi_[0] - lo_[0]) * scale_)
         << "\" height=\"" << num((hi_[1] - lo_[1]) * scale_)
         << "\" fill=\"#fafafa\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  }

  void region(const Region& r, const char* cls) {
    const std::string fill = region_fill(r.label);
    if (r.shape == Region::Shape::kCircle) {
      out_ << "<circle class=\"" << cls << "\" data-label=\"" << to_string(r.label)
           << "\" cx=\"" << num(px(r.center[0])) << "\" cy=\""
           << num(py(r.center[1])) << "\" r=\"" << num(r.radius * scale_)
           << "\" fill=\"" << fill << "\" fill-opacity=\"0.6\"/>\n";
    } else {
      out_ << "<rect class=\"" << cls << "\" data-label=\"" << to_string(r.label)
           << "\" x=\"" << num(px(r.min[0])) << "\" y=\"" << num(py(r.max[1]))
           << "\" width=\"" << num((r.max[0] - r.min[0]) * scale_)
           << "\" height=\"" << num((r.max[1] - r.min[1]) * scale_) << "\" fill=\""
           << fill << "\" fill-opacity=\"0.6\"/>\n";
    }
  }

  void marker(const Eigen::VectorXd& p, double radius_px, const char* fill,
              const char* cls) {
    out_ << "<circle class=\"" << cls << "\" cx=\"" << num(px(p[0])) << "\" cy=\""
         << num(py(p[1])) << "\" r=\"" << num(radius_px) << "\" fill=\"" << fill
         << "\"/>\n";
  }

  void goal(const Eigen::VectorXd& g, double radius) {
    out_ << "<circle class=\"goal\" cx=\"" << num(px(g[0])) << "\" cy=\""
         << num(py(g[1])) << "\" r=\"" << num(radius * scale_)
         << "\" fill=\"#8e44ad\" fill-opacity=\"0.5\" stroke=\"#8e44ad\"/>\n";
  }

  void polyline(const std::vector<Eigen::VectorXd>& pts, const std::string& color,
                const std::string& label) {
    if (pts.empty()) return;
    out_ << "<polyline class=\"trajectory\" data-arm=\"" << label
         << "\" fill=\"none\" stroke=\"" << color
         << "\" stroke-width=\"1.2\" stroke-opacity=\"0.7\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) out_ << ' ';
      out_ << num(px(pts[i][0])) << ',' << num(py(pts[i][1]));
    }
    out_ << "\"/>\n";
  }

  void arrow(const Eigen::VectorXd& from, const Eigen::VectorXd& vec) {
    const double x1 = px(from[0]);
    const double y1 = py(from[1]);
    const double x2 = px(from[0] + vec[0]);
    const double y2 = py(from[1] + vec[1]);
    out_ << "<line class=\"quiver\" x1=\"" << num(x1) << "\" y1=\"" << num(y1)
         << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
         << "\" stroke=\"#1f5fbf\" stroke-width=\"1\"/>\n";
  }

  void legend(const std::vector<TrajectorySet>& sets) {
    double y = 14.0;
    for (const TrajectorySet& s : sets) {
      out_ << "<text x=\"" << num(kPad + 4) << "\" y=\"" << num(y)
           << "\" font-size=\"11\" fill=\"" << s.color << "\">" << s.label
           << "</text>\n";
      y += 12.0;
    }
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  Eigen::VectorXd lo_;
  Eigen::VectorXd hi_;
  double scale_ = 1.0;
  double width_ = kCanvas;
  double height_ = kCanvas;
  std::ostringstream out_;
};

}  // namespace

std::vector<Arrow> state_score_quiver(const ScoreField& state_score,
                                      const EnvSpec& spec, int n,
                                      const Eigen::VectorXd& a) {
  if (state_score.kind != ScoreKind::kStateScore) {
    throw std::invalid_argument("quiver needs a state-score field");
  }
  if (n < 1) throw std::invalid_argument("quiver: grid size must be >= 1");
  if (spec.state_dim != 2) throw DimensionError("quiver: planar arenas only");
  std::vector<Arrow> arrows;
  arrows.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  const Eigen::VectorXd extent = spec.arena_max - spec.arena_min;
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      Eigen::VectorXd s(2);
      s << spec.arena_min[0] + (ix + 0.5) * extent[0] / n,
          spec.arena_min[1] + (iy + 0.5) * extent[1] / n;
      const Eigen::VectorXd score_n = eval_score(state_score, s, a);
      // Step direction in env units for a normalized step along the score.
      arrows.push_back({s, score_n.cwiseProduct(state_score.norm.state_std)});
    }
  }
  return arrows;
}

std::string render_svg(const EnvSpec& spec, const std::vector<TrajectorySet>& sets,
                       const std::vector<Arrow>& arrows) {
  if (spec.state_dim != 2) throw DimensionError("render_svg: planar arenas only");
  SvgCanvas c(spec);
  c.arena();
  for (const Region& r : spec.risk_regions) c.region(r, "risk");
  if (spec.goods_region) c.region(*spec.goods_region, "goods");
  if (spec.airport_region) c.region(*spec.airport_region, "airport");
  if (spec.landing_point.size() == 2) c.marker(spec.landing_point, 4, "#9b59b6", "landing");
  c.goal(spec.goal, spec.capture_radius);
  c.marker(0.5 * (spec.start_min + spec.start_max), 4, "#1f77b4", "start");

  if (!arrows.empty()) {
    double max_len = 0.0;
    for (const Arrow& a : arrows) max_len = std::max(max_len, a.vec.norm());
    const double n = std::sqrt(static_cast<double>(arrows.size()));
    const double cell = (spec.arena_max - spec.arena_min).maxCoeff() / std::max(1.0, n);
    const double k = max_len > 0.0 ? 0.9 * cell / max_len : 0.0;
    for (const Arrow& a : arrows) c.arrow(a.from, k * a.vec);
  }
  for (const TrajectorySet& set : sets) {
    for (const Trajectory& t : set.trajectories) {
      std::vector<Eigen::VectorXd> pts;
      for (const TrajectoryStep& s : t.steps) pts.push_back(s.s);
      if (t.final_state.size() == 2) pts.push_back(t.final_state);
      c.polyline(pts, set.color, set.label);
    }
  }
  c.legend(sets);
  return c.finish();
}

void emit_report(const Report& report, const std::filesystem::path& csv_path,
                 const std::filesystem::path& svg_path, const EnvSpec& spec,
                 const std::vector<Trajectory>& baseline_trajs,
                 const std::vector<Trajectory>& corrected_trajs,
                 std::size_t max_per_arm) {
  auto head = [&](const std::vector<Trajectory>& v) {
    return std::vector<Trajectory>(
        v.begin(), v.begin() + static_cast<long>(std::min(v.size(), max_per_arm)));
  };
  const std::vector<TrajectorySet> sets = {
      {"baseline", "#800000", head(baseline_trajs)},
      {"corrected", "#000000", head(corrected_trajs)}};
  const std::string csv = report_csv(report);
  const std::string svg = render_svg(spec, sets);
  write_text_file(csv_path, csv);
  write_text_file(svg_path, svg);
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream out;
  const Eigen::Index sd = traj.steps.empty() ? 0 : traj.steps[0].s.size();
  const Eigen::Index ad = traj.steps.empty() ? 0 : traj.steps[0].a.size();
  out << "step";
  for (Eigen::Index i = 0; i < sd; ++i) out << ",s" << i;
  for (Eigen::Index i = 0; i < ad; ++i) out << ",a_o" << i;
  for (Eigen::Index i = 0; i < ad; ++i) out << ",a" << i;
  out << ",r,risk_flag,done\n";
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const TrajectoryStep& s = traj.steps[t];
    out << t;
    for (Eigen::Index i = 0; i < sd; ++i) out << ',' << format_real(s.s[i]);
    for (Eigen::Index i = 0; i < ad; ++i) out << ',' << format_real(s.a_o[i]);
    for (Eigen::Index i = 0; i < ad; ++i) out << ',' << format_real(s.a[i]);
    out << ',' << format_real(s.r) << ',' << (s.risk ? 1 : 0) << ','
        << (s.done ? 1 : 0) << '\n';
  }
  return out.str();
}

Trajectory parse_trajectory_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trajectory csv: empty", 1);
  Eigen::Index sd = 0;
  Eigen::Index ad = 0;
  {
    std::istringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (col.rfind("a_o", 0) == 0) {
        ++ad;
      } else if (col.size() > 1 && col[0] == 's' && col != "step") {
        ++sd;
      }
    }
  }
  if (sd == 0 || ad == 0) throw ParseError("trajectory csv: bad header", 1);
  Trajectory traj;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> v;
    std::istringstream ls(line);
    std::string cell;
    try {
      while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ParseError("trajectory csv line " + std::to_string(line_no) +
                           ": bad number",
                       line_no);
    }
    if (v.size() != static_cast<std::size_t>(1 + sd + 2 * ad + 3)) {
      throw ParseError("trajectory csv line " + std::to_string(line_no) +
                           ": wrong column count",
                       line_no);
    }
    TrajectoryStep s;
    s.s = Eigen::Map<Eigen::VectorXd>(v.data() + 1, sd);
    s.a_o = Eigen::Map<Eigen::VectorXd>(v.data() + 1 + sd, ad);
    s.a = Eigen::Map<Eigen::VectorXd>(v.data() + 1 + sd + ad, ad);
    s.r = v[static_cast<std::size_t>(1 + sd + 2 * ad)];
    s.risk = v[static_cast<std::size_t>(2 + sd + 2 * ad)] != 0.0;
    s.done = v[static_cast<std::size_t>(3 + sd + 2 * ad)] != 0.0;
    traj.steps.push_back(std::move(s));
  }
  return traj;
}

}  // namespace cdsa
