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

#include "io_util.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "deepview/error.hpp"

namespace deepview::detail {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<double> read_f32_blob(const fs::path& path, std::uintmax_t expected_bytes) {
  std::error_code ec;
  const auto actual = fs::file_size(path, ec);
  if (ec) throw IoError("cannot stat '" + path.string() + "': " + ec.message());
  if (actual != expected_bytes) {
    throw ValidationError("byte-length mismatch for '" + path.string() + "': expected " +
                          std::to_string(expected_bytes) + " bytes, found " +
                          std::to_string(actual));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> raw(static_cast<std::size_t>(actual));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw IoError("short read on '" + path.string() + "'");

  std::vector<double> values(raw.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const unsigned char* b = raw.data() + 4 * i;
    const std::uint32_t bits = std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) |
                               (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
    values[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return values;
}

void write_f32_blob(const fs::path& path, const double* values, std::size_t count) {
  std::vector<unsigned char> raw(count * 4);
  for (std::size_t i = 0; i < count; ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int k = 0; k < 4; ++k) raw[4 * i + k] = static_cast<unsigned char>(bits >> (8 * k));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

json record_to_json(const Record& record) {
  json j;
  j["id"] = record.id;
  if (record.text) j["text"] = *record.text;
  if (record.label) j["label"] = *record.label;
  if (record.dataset_tag) j["dataset_tag"] = *record.dataset_tag;
  if (record.predicted) j["predicted"] = *record.predicted;
  return j;
}

Record record_from_json(const json& j, std::size_t row) {
  const auto where = " (row " + std::to_string(row) + ")";
  if (!j.is_object()) throw ValidationError("record is not a JSON object" + where);
  Record r;
  const auto id = j.find("id");
  if (id == j.end()) throw ValidationError("record missing 'id'" + where);
  if (id->is_string()) {
    r.id = id->get<std::string>();
  } else if (id->is_number_integer()) {
    r.id = std::to_string(id->get<long long>());
  } else {
    throw ValidationError("record 'id' must be a string" + where);
  }
  auto optional_int = [&](const char* key) -> std::optional<int> {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_number_integer()) {
      throw ValidationError(std::string("record '") + key + "' must be an integer" + where);
    }
    return it->get<int>();
  };
  auto optional_string = [&](const char* key) -> std::optional<std::string> {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
      throw ValidationError(std::string("record '") + key + "' must be a string" + where);
    }
    return it->get<std::string>();
  };
  r.text = optional_string("text");
  r.label = optional_int("label");
  r.dataset_tag = optional_string("dataset_tag");
  r.predicted = optional_int("predicted");
  return r;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed JSON in " + what + ": " + e.what());
  }
}

}  // namespace deepview::detail
