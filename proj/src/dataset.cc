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

#include "cdsa/dataset.h"

#include <cmath>
#include <sstream>
#include <string>

#include "cdsa/errors.h"

namespace cdsa {
namespace {

constexpr const char* kFormatName = "cdsa-dataset";
constexpr int kFormatVersion = 1;

void check_len(const Eigen::VectorXd& v, int n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + ": expected length " +
                         std::to_string(n) + ", got " +
                         std::to_string(v.size()));
  }
}

Eigen::VectorXd floored_std(const Eigen::VectorXd& var) {
  return var.cwiseMax(0.0).cwiseSqrt().cwiseMax(kStdFloor);
}

}  // namespace

NormStats NormStats::unit(int state_dim, int action_dim) {
  return {Eigen::VectorXd::Zero(state_dim), Eigen::VectorXd::Ones(state_dim),
          Eigen::VectorXd::Zero(action_dim), Eigen::VectorXd::Ones(action_dim)};
}

Eigen::VectorXd NormStats::normalize_state(const Eigen::VectorXd& s) const {
  check_len(s, state_dim(), "normalize_state");
  return (s - state_mean).cwiseQuotient(state_std);
}

Eigen::VectorXd NormStats::denormalize_state(const Eigen::VectorXd& s) const {
  check_len(s, state_dim(), "denormalize_state");
  return s.cwiseProduct(state_std) + state_mean;
}

Eigen::VectorXd NormStats::normalize_action(const Eigen::VectorXd& a) const {
  check_len(a, action_dim(), "normalize_action");
  return (a - action_mean).cwiseQuotient(action_std);
}

Eigen::VectorXd NormStats::denormalize_action(const Eigen::VectorXd& a) const {
  check_len(a, action_dim(), "denormalize_action");
  return a.cwiseProduct(action_std) + action_mean;
}

Json norm_to_json(const NormStats& norm) {
  return {{"state_mean", to_json(norm.state_mean)},
          {"state_std", to_json(norm.state_std)},
          {"action_mean", to_json(norm.action_mean)},
          {"action_std", to_json(norm.action_std)}};
}

NormStats norm_from_json(const Json& j) {
  NormStats n;
  n.state_mean = vector_from_json(require(j, "state_mean"), "norm.state_mean");
  n.state_std = vector_from_json(require(j, "state_std"), "norm.state_std",
                                 n.state_mean.size());
  n.action_mean =
      vector_from_json(require(j, "action_mean"), "norm.action_mean");
  n.action_std = vector_from_json(require(j, "action_std"), "norm.action_std",
                                  n.action_mean.size());
  if ((n.state_std.array() <= 0.0).any() ||
      (n.action_std.array() <= 0.0).any()) {
    throw SchemaError("norm: std entries must be positive");
  }
  return n;
}

void validate_dataset(const Dataset& d) {
  if (d.state_dim < 1 || d.action_dim < 1) {
    throw DimensionError("dataset: dims must be >= 1");
  }
  for (std::size_t i = 0; i < d.transitions.size(); ++i) {
    const Transition& t = d.transitions[i];
    if (t.s.size() != d.state_dim || t.s_next.size() != d.state_dim ||
        t.a.size() != d.action_dim) {
      throw DimensionError("dataset: transition " + std::to_string(i) +
                           " has inconsistent dims");
    }
    if (!t.s.allFinite() || !t.s_next.allFinite() || !t.a.allFinite() ||
        !std::isfinite(t.r)) {
      throw NonFiniteError("dataset: transition " + std::to_string(i) +
                           " has non-finite entries");
    }
  }
}

NormStats compute_norm_stats(const Dataset& d) {
  if (d.empty()) throw std::invalid_argument("compute_norm_stats: empty dataset");
  // Welford accumulation.
  Eigen::VectorXd s_mean = Eigen::VectorXd::Zero(d.state_dim);
  Eigen::VectorXd s_m2 = Eigen::VectorXd::Zero(d.state_dim);
  Eigen::VectorXd a_mean = Eigen::VectorXd::Zero(d.action_dim);
  Eigen::VectorXd a_m2 = Eigen::VectorXd::Zero(d.action_dim);
  double n = 0.0;
  for (const Transition& t : d.transitions) {
    n += 1.0;
    const Eigen::VectorXd ds = t.s - s_mean;
    s_mean += ds / n;
    s_m2 += ds.cwiseProduct(t.s - s_mean);
    const Eigen::VectorXd da = t.a - a_mean;
    a_mean += da / n;
    a_m2 += da.cwiseProduct(t.a - a_mean);
  }
  return {s_mean, floored_std(s_m2 / n), a_mean, floored_std(a_m2 / n)};
}

std::vector<std::size_t> sample_indices(const Dataset& d,
                                        std::size_t batch_size, Rng& rng) {
  if (d.empty()) throw std::invalid_argument("sample_batch: empty dataset");
  if (batch_size < 1) throw std::invalid_argument("sample_batch: batch_size < 1");
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = rng.index(d.size());
  return idx;
}

std::vector<Transition> sample_batch(const Dataset& d, std::size_t batch_size,
                                     Rng& rng) {
  std::vector<Transition> out;
  out.reserve(batch_size);
  for (std::size_t i : sample_indices(d, batch_size, rng)) {
    out.push_back(d.transitions[i]);
  }
  return out;
}

NormalizedColumns normalized_columns(const Dataset& d, const NormStats& norm) {
  if (norm.state_dim() != d.state_dim || norm.action_dim() != d.action_dim) {
    throw DimensionError("normalized_columns: norm dims disagree with dataset");
  }
  const auto n = static_cast<Eigen::Index>(d.size());
  NormalizedColumns c{Eigen::MatrixXd(d.state_dim, n),
                      Eigen::MatrixXd(d.action_dim, n),
                      Eigen::MatrixXd(d.state_dim, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = d.transitions[static_cast<std::size_t>(i)];
    c.s.col(i) = norm.normalize_state(t.s);
    c.a.col(i) = norm.normalize_action(t.a);
    c.s_next.col(i) = norm.normalize_state(t.s_next);
  }
  return c;
}

Eigen::MatrixXd NormalizedColumns::gather(
    const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx) const {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) =
        m.col(static_cast<Eigen::Index>(idx[k]));
  }
  return out;
}

Eigen::MatrixXd NormalizedColumns::state_action(
    const std::vector<std::size_t>& idx) const {
  Eigen::MatrixXd out(s.rows() + a.rows(), static_cast<Eigen::Index>(idx.size()));
  out.topRows(s.rows()) = gather(s, idx);
  out.bottomRows(a.rows()) = gather(a, idx);
  return out;
}

std::string serialize_dataset(const Dataset& d) {
  validate_dataset(d);
  std::string out;
  Json meta = {{"format", kFormatName},
               {"version", kFormatVersion},
               {"state_dim", d.state_dim},
               {"action_dim", d.action_dim},
               {"count", d.transitions.size()},
               {"norm", norm_to_json(d.norm)}};
  out += dump_json({{"meta", meta}});
  out += '\n';
  for (const Transition& t : d.transitions) {
    out += dump_json({{"s", to_json(t.s)},
                      {"a", to_json(t.a)},
                      {"r", t.r},
                      {"s2", to_json(t.s_next)},
                      {"done", t.done}});
    out += '\n';
  }
  return out;
}

Dataset parse_dataset(std::string_view text) {
  Dataset d;
  bool have_meta = false;
  bool have_norm = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(),
                       line_no);
    }
    const std::string where = "line " + std::to_string(line_no);
    try {
      if (!have_meta) {
        const Json& meta = require(rec, "meta");
        if (require(meta, "format").get<std::string>() != kFormatName) {
          throw SchemaError("not a cdsa dataset file");
        }
        d.state_dim = require(meta, "state_dim").get<int>();
        d.action_dim = require(meta, "action_dim").get<int>();
        if (d.state_dim < 1 || d.action_dim < 1) {
          throw SchemaError("dims must be >= 1");
        }
        if (meta.contains("norm")) {
          d.norm = norm_from_json(meta["norm"]);
          if (d.norm.state_dim() != d.state_dim ||
              d.norm.action_dim() != d.action_dim) {
            throw SchemaError("norm dims disagree with metadata");
          }
          have_norm = true;
        }
        have_meta = true;
        continue;
      }
      Transition t;
      t.s = vector_from_json(require(rec, "s"), "s", d.state_dim);
      t.a = vector_from_json(require(rec, "a"), "a", d.action_dim);
      t.r = require(rec, "r").get<double>();
      t.s_next = vector_from_json(require(rec, "s2"), "s2", d.state_dim);
      t.done = require(rec, "done").get<bool>();
      d.transitions.push_back(std::move(t));
    } catch (const SchemaError& e) {
      throw SchemaError(where + " (record " +
                        std::to_string(d.transitions.size()) + "): " +
                        e.what());
    } catch (const Json::exception& e) {
      throw SchemaError(where + ": " + e.what());
    }
  }
  if (d.transitions.empty()) throw SchemaError("dataset: no records");
  validate_dataset(d);
  if (!have_norm) d.norm = compute_norm_stats(d);
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  write_text_file(path, serialize_dataset(d));
}

Dataset load_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_text_file(path));
}

}  // namespace cdsa
