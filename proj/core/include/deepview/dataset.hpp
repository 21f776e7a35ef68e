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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "deepview/types.hpp"

namespace deepview {

struct Record {
  std::string id;
  std::optional<std::string> text;
  std::optional<int> label;
  std::optional<std::string> dataset_tag;
  std::optional<int> predicted;

  bool operator==(const Record&) const = default;
};

/**
 * N embedding rows plus one Record per row.
 *
 * Construction validates the invariants (row count matches records, every
 * component finite, ids unique, labels non-negative); the bundle is
 * immutable afterwards and safe to share across threads.
 */
class DatasetBundle {
 public:
  DatasetBundle() = default;
  DatasetBundle(Matrix embeddings, std::vector<Record> records);

  const Matrix& embeddings() const { return embeddings_; }
  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(embeddings_.cols()); }

  /// Row index of `id`, if present.
  std::optional<std::size_t> find(const std::string& id) const;

  /// FNV-1a over the f32 blob, the shape and the record ids.
  std::uint64_t content_hash() const;

 private:
  Matrix embeddings_;
  std::vector<Record> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct SampleSpec {
  std::size_t count = 250;
  std::uint64_t seed = 0;
};

/// Reads manifest.json, the f32 blob and the JSONL records it references.
/// Relative paths in the manifest resolve against the manifest's directory.
DatasetBundle load_bundle(const std::filesystem::path& manifest_path);

/// Writes `<stem>.f32`, `<stem>.jsonl` and the manifest next to each other.
void save_bundle(const DatasetBundle& bundle,
                 const std::filesystem::path& manifest_path);

/// Uniform sample without replacement; rows keep their original order.
DatasetBundle subsample(const DatasetBundle& bundle, const SampleSpec& spec);

}  // namespace deepview
