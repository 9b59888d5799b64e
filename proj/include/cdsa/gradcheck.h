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

#ifndef CDSA_GRADCHECK_H_
#define CDSA_GRADCHECK_H_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace cdsa {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// Central differences of `loss` around `x`, compared against `analytic`.
// Error per coordinate is |num - ana| / max(1, |num|, |ana|).
GradCheckResult check_gradient(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> x, std::span<const double> analytic,
    double h = 1e-6);

// Same, restricted to the listed coordinates.
GradCheckResult check_gradient(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> x, std::span<const double> analytic,
    std::span<const std::size_t> indices, double h = 1e-6);

}  // namespace cdsa

#endif  // CDSA_GRADCHECK_H_
