/*
 * Copyright (c) 2026, The DeepView-NLP Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Internal helpers shared by the core translation units.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "deepview/dataset.hpp"

namespace deepview::detail {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

/// Little-endian f32 blob, converted to/from double.
std::vector<double> read_f32_blob(const std::filesystem::path& path,
                                  std::uintmax_t expected_bytes);
void write_f32_blob(const std::filesystem::path& path, const double* values,
                    std::size_t count);

nlohmann::json record_to_json(const Record& record);
Record record_from_json(const nlohmann::json& j, std::size_t row);

/// Parses JSON text; syntax errors become ValidationError naming `what`.
nlohmann::json parse_json(const std::string& text, const std::string& what);

}  // namespace deepview::detail
