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
#include <memory>
#include <string>
#include <vector>

#include "deepview/dataset.hpp"
#include "deepview/types.hpp"

namespace deepview {

struct ClassifierInfo {
  std::size_t input_dim = 0;
  std::size_t n_classes = 0;
  std::vector<std::string> class_names;
};

/**
 * Probabilistic classifier f: R^D -> probability simplex over C classes.
 *
 * predict_batch() validates the input width and finiteness, delegates to the
 * implementation, then checks and renormalizes every row so callers always
 * receive valid distributions. Implementations must compute each row
 * independently of the rest of the batch: predict_batch(X).row(i) is
 * bit-identical to predict_batch(X.row(i)). Instances are immutable and may be
 * called concurrently.
 */
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual const ClassifierInfo& info() const = 0;

  /// Stable content identity, recorded in run provenance.
  virtual std::uint64_t identity_hash() const = 0;

  Matrix predict_batch(const Matrix& inputs) const;

  /// Hard labels. Default: argmax of predict_batch, ties to the lower class.
  virtual std::vector<int> predict_labels(const Matrix& inputs) const;

 protected:
  virtual Matrix predict_raw(const Matrix& inputs) const = 0;
};

/// argmax with ties resolved to the lower index.
int argmax_row(const Matrix& probs, Eigen::Index row);

// ---------------------------------------------------------------------------
// Built-in feed-forward network

enum class Activation { identity, relu, softmax };

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::identity;
};

class MlpClassifier final : public Classifier {
 public:
  /// Validates layer chaining; throws ValidationError naming the layer.
  MlpClassifier(std::vector<DenseLayer> layers, std::vector<std::string> class_names = {});

  const ClassifierInfo& info() const override { return info_; }
  std::uint64_t identity_hash() const override { return hash_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

 protected:
  Matrix predict_raw(const Matrix& inputs) const override;

 private:
  std::vector<DenseLayer> layers_;
  ClassifierInfo info_;
  std::uint64_t hash_ = 0;
};

std::unique_ptr<MlpClassifier> load_builtin(const std::filesystem::path& weights_path);
void save_builtin(const MlpClassifier& model, const std::filesystem::path& weights_path);

// ---------------------------------------------------------------------------
// k-nearest-neighbour vote classifier

enum class LabelSource { true_label, dataset_tag };

class KnnClassifier final : public Classifier {
 public:
  KnnClassifier(Matrix reference_points, std::vector<int> reference_labels, std::size_t k,
                std::vector<std::string> class_names);

  const ClassifierInfo& info() const override { return info_; }
  std::uint64_t identity_hash() const override { return hash_; }
  std::size_t k() const { return k_; }

  /// Majority vote; a tie goes to the tied label seen first in distance order.
  std::vector<int> predict_labels(const Matrix& inputs) const override;

 protected:
  Matrix predict_raw(const Matrix& inputs) const override;

 private:
  std::vector<std::size_t> neighbors(std::span<const double> query) const;

  Matrix reference_;
  std::vector<int> labels_;
  std::size_t k_;
  ClassifierInfo info_;
  std::uint64_t hash_ = 0;
};

/// Euclidean kNN over the bundle's own embeddings. Distance ties go to the
/// lower row index. For dataset_tag, classes are the sorted distinct tags.
std::unique_ptr<KnnClassifier> fit_knn(const DatasetBundle& bundle, LabelSource source,
                                       std::size_t k = 5);

/// Class indices for `source`; throws if any record lacks one.
std::vector<int> bundle_labels(const DatasetBundle& bundle, LabelSource source,
                               std::vector<std::string>* class_names = nullptr);

// ---------------------------------------------------------------------------
// Remote classifier speaking the /v1/info + /v1/predict protocol

struct RemoteOptions {
  int max_retries = 3;
  double timeout_seconds = 30.0;
};

class RemoteClassifier final : public Classifier {
 public:
  /// Fetches /v1/info; TransportError if unreachable.
  explicit RemoteClassifier(std::string base_url, RemoteOptions options = {});

  const ClassifierInfo& info() const override { return info_; }
  std::uint64_t identity_hash() const override { return hash_; }
  const std::string& base_url() const { return base_url_; }

 protected:
  Matrix predict_raw(const Matrix& inputs) const override;

 private:
  std::string base_url_;
  RemoteOptions options_;
  ClassifierInfo info_;
  std::uint64_t hash_ = 0;
};

/**
 * Classifier from a command-line style spec:
 *   "http://host:port"             remote
 *   "knn[:true_label|dataset_tag[:k]]"  kNN fitted on `bundle`
 *   anything else                  path to a built-in weights file
 */
std::unique_ptr<Classifier> make_classifier(const std::string& spec,
                                            const DatasetBundle& bundle,
                                            RemoteOptions remote = {});

}  // namespace deepview
