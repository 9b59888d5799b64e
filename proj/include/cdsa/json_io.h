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

#ifndef CDSA_JSON_IO_H_
#define CDSA_JSON_IO_H_

#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "json.hpp"

namespace cdsa {

using Json = nlohmann::json;

// Shortest decimal form that reads back to the same binary64 value.
std::string format_real(double value);

// Compact JSON with every floating-point number written through
// format_real. Key order follows the json object (sorted).
std::string dump_json(const Json& value);

Json to_json(const Eigen::VectorXd& v);
// Throws SchemaError when `j` is not a numeric array, or when
// `expected_size >= 0` and the length differs.
Eigen::VectorXd vector_from_json(const Json& j, std::string_view what,
                                 long expected_size = -1);

// Fetches a required key, throwing SchemaError naming it when absent.
const Json& require(const Json& obj, std::string_view key);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace cdsa

#endif  // CDSA_JSON_IO_H_
