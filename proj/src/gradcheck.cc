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

#include "cdsa/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "cdsa/errors.h"

namespace cdsa {

GradCheckResult check_gradient(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> x, std::span<const double> analytic,
    std::span<const std::size_t> indices, double h) {
  if (x.size() != analytic.size()) {
    throw DimensionError("check_gradient: gradient length mismatch");
  }
  std::vector<double> probe(x.begin(), x.end());
  GradCheckResult res;
  for (std::size_t i : indices) {
    if (i >= probe.size()) throw DimensionError("check_gradient: index out of range");
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = loss(probe);
    probe[i] = orig - h;
    const double down = loss(probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double scale =
        std::max({1.0, std::abs(numeric), std::abs(analytic[i])});
    const double err = std::abs(numeric - analytic[i]) / scale;
    if (err > res.max_rel_error || res.checked == 0) {
      res.max_rel_error = err;
      res.worst_index = i;
      res.worst_analytic = analytic[i];
      res.worst_numeric = numeric;
    }
    ++res.checked;
  }
  return res;
}

GradCheckResult check_gradient(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> x, std::span<const double> analytic, double h) {
  std::vector<std::size_t> all(x.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return check_gradient(loss, x, analytic, all, h);
}

}  // namespace cdsa
