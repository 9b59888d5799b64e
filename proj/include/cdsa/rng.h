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

#ifndef CDSA_RNG_H_
#define CDSA_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace cdsa {

// Seeded random stream. Substreams are derived from the seed alone, never
// from the consumed state, so `Rng(s).substream(i)` is the same stream no
// matter how much of the parent has been drawn.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  Rng substream(std::uint64_t index) const;
  Rng substream(std::string_view name) const;

  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  bool bernoulli(double p);
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace cdsa

#endif  // CDSA_RNG_H_
