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


#ifndef CDSA_TOOLS_VERIFY_H_
#define CDSA_TOOLS_VERIFY_H_

#include <cstdint>
#include <filesystem>

namespace cdsa::cli {

struct VerifyOptions {
  std::filesystem::path envs_dir;
  int invdyn_iterations = 10000;
  std::uint64_t seed = 0;
};

// Prints one PASS/FAIL line per check; returns the number of failures.
int run_verify(const VerifyOptions& options);

}  // namespace cdsa::cli

#endif  // CDSA_TOOLS_VERIFY_H_
