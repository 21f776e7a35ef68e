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

#include "deepview/dataset.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "deepview/error.hpp"
#include "deepview/hash.hpp"
#include "deepview/random.hpp"
#include "io_util.hpp"

namespace deepview {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetBundle::DatasetBundle(Matrix embeddings, std::vector<Record> records)
    : embeddings_(std::move(embeddings)), records_(std::move(records)) {
  if (static_cast<std::size_t>(embeddings_.rows()) != records_.size()) {
    throw ValidationError("embedding rows (" + std::to_string(embeddings_.rows()) +
                          ") do not match record count (" +
                          std::to_string(records_.size()) + ")");
  }
  for (Eigen::Index r = 0; r < embeddings_.rows(); ++r) {
    for (Eigen::Index c = 0; c < embeddings_.cols(); ++c) {
      if (!std::isfinite(embeddings_(r, c))) {
        throw ValidationError("non-finite embedding value at row " + std::to_string(r) +
                              ", column " + std::to_string(c));
      }
    }
  }
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const Record& rec = records_[i];
    if (!index_.emplace(rec.id, i).second) {
      throw ValidationError("duplicate record id '" + rec.id + "' at row " +
                            std::to_string(i));
    }
    if ((rec.label && *rec.label < 0) || (rec.predicted && *rec.predicted < 0)) {
      throw ValidationError("negative class index at row " + std::to_string(i));
    }
  }
}

std::optional<std::size_t> DatasetBundle::find(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t DatasetBundle::content_hash() const {
  Fnv1a h;
  h.update(static_cast<std::uint64_t>(embeddings_.rows()));
  h.update(static_cast<std::uint64_t>(embeddings_.cols()));
  for (Eigen::Index i = 0; i < embeddings_.size(); ++i) {
    h.update(std::uint64_t{std::bit_cast<std::uint32_t>(static_cast<float>(embeddings_.data()[i]))});
  }
  for (const auto& r : records_) h.update(r.id).update(std::uint64_t{0});
  return h.digest();
}

namespace {

std::size_t manifest_size(const json& manifest, const char* key) {
  const auto it = manifest.find(key);
  if (it == manifest.end() || !it->is_number_integer() || it->get<long long>() < 0) {
    throw ValidationError(std::string("manifest field '") + key +
                          "' must be a non-negative integer");
  }
  return it->get<std::size_t>();
}

std::string manifest_string(const json& manifest, const char* key) {
  const auto it = manifest.find(key);
  if (it == manifest.end() || !it->is_string()) {
    throw ValidationError(std::string("manifest field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

DatasetBundle load_bundle(const fs::path& manifest_path) {
  if (!fs::exists(manifest_path)) {
    throw IoError("manifest not found: '" + manifest_path.string() + "'");
  }
  const json manifest =
      detail::parse_json(detail::read_text_file(manifest_path), manifest_path.string());
  if (!manifest.is_object()) throw ValidationError("manifest must be a JSON object");

  const std::size_t rows = manifest_size(manifest, "n_rows");
  const std::size_t cols = manifest_size(manifest, "n_cols");
  if (manifest.value("dtype", std::string("f32")) != "f32") {
    throw ValidationError("unsupported dtype (only \"f32\")");
  }
  if (manifest.value("byte_order", std::string("little")) != "little") {
    throw ValidationError("unsupported byte_order (only \"little\")");
  }
  const fs::path base = manifest_path.parent_path();
  const fs::path data_path = base / manifest_string(manifest, "data");
  const fs::path records_path = base / manifest_string(manifest, "records");
  if (!fs::exists(data_path)) throw IoError("embedding blob not found: '" + data_path.string() + "'");
  if (!fs::exists(records_path)) throw IoError("records file not found: '" + records_path.string() + "'");

  const auto values = detail::read_f32_blob(data_path, std::uintmax_t{rows} * cols * 4);
  Matrix embeddings(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = values[r * cols + c];
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite embedding value at row " + std::to_string(r) +
                              ", column " + std::to_string(c));
      }
      embeddings(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }

  std::vector<Record> records;
  records.reserve(rows);
  std::istringstream lines(detail::read_text_file(records_path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto row = records.size();
    records.push_back(detail::record_from_json(
        detail::parse_json(line, records_path.string() + " line " + std::to_string(line_no)),
        row));
  }
  if (records.size() != rows) {
    throw ValidationError("records file has " + std::to_string(records.size()) +
                          " rows, manifest declares " + std::to_string(rows));
  }
  return DatasetBundle(std::move(embeddings), std::move(records));
}

void save_bundle(const DatasetBundle& bundle, const fs::path& manifest_path) {
  const fs::path dir = manifest_path.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  }
  const std::string stem = manifest_path.stem().string();
  const std::string blob_name = stem + ".f32";
  const std::string records_name = stem + ".jsonl";

  const Matrix& e = bundle.embeddings();
  detail::write_f32_blob(dir / blob_name, e.data(), static_cast<std::size_t>(e.size()));

  std::string jsonl;
  for (const auto& r : bundle.records()) jsonl += detail::record_to_json(r).dump() + "\n";
  detail::write_text_file(dir / records_name, jsonl);

  json manifest = {{"n_rows", bundle.size()}, {"n_cols", bundle.dim()},
                   {"dtype", "f32"},          {"byte_order", "little"},
                   {"data", blob_name},       {"records", records_name}};
  detail::write_text_file(manifest_path, manifest.dump(2) + "\n");
}

DatasetBundle subsample(const DatasetBundle& bundle, const SampleSpec& spec) {
  if (spec.count > bundle.size()) {
    throw ValidationError("sample count " + std::to_string(spec.count) +
                          " exceeds bundle size " + std::to_string(bundle.size()));
  }
  const auto picks = sample_indices(bundle.size(), spec.count, spec.seed);
  Matrix rows(static_cast<Eigen::Index>(picks.size()), bundle.embeddings().cols());
  std::vector<Record> records;
  records.reserve(picks.size());
  for (std::size_t i = 0; i < picks.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) =
        bundle.embeddings().row(static_cast<Eigen::Index>(picks[i]));
    records.push_back(bundle.records()[picks[i]]);
  }
  return DatasetBundle(std::move(rows), std::move(records));
}

}  // namespace deepview
