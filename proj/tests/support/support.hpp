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

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "deepview/classifier.hpp"
#include "deepview/dataset.hpp"
#include "deepview/types.hpp"

namespace deepview::testing {

/// Gaussian blobs: `per_class` points around each center, isotropic noise.
/// Records carry ids "b<i>", the blob index as label and dataset tag.
struct BlobSpec {
  std::size_t dim = 2;
  std::size_t per_class = 20;
  std::vector<Vector> centers;
  double noise = 1.0;
  std::uint64_t seed = 0;
};

DatasetBundle make_blobs(const BlobSpec& spec);

/// Centers on scaled coordinate axes: center c has `scale` at coordinate c
/// (plus `offset` on every coordinate, so cosine geometry stays well defined).
std::vector<Vector> axis_centers(std::size_t n_classes, std::size_t dim, double scale,
                                 double offset = 0.0);

/// Linear softmax that scores class c by beta * (mu_c . x - |mu_c|^2 / 2).
std::unique_ptr<MlpClassifier> nearest_center_softmax(const std::vector<Vector>& centers,
                                                      double beta);

/// Single linear softmax layer with explicit weights.
std::unique_ptr<MlpClassifier> linear_softmax(Matrix weights, Vector bias);

/// Same distribution for every input.
class ConstantClassifier final : public Classifier {
 public:
  ConstantClassifier(std::size_t input_dim, std::vector<double> probs);
  const ClassifierInfo& info() const override { return info_; }
  std::uint64_t identity_hash() const override { return 42; }

 protected:
  Matrix predict_raw(const Matrix& inputs) const override;

 private:
  ClassifierInfo info_;
  std::vector<double> probs_;
};

/// Counts rows passed through predict_batch.
class CountingClassifier final : public Classifier {
 public:
  explicit CountingClassifier(const Classifier& inner) : inner_(inner) {}
  const ClassifierInfo& info() const override { return inner_.info(); }
  std::uint64_t identity_hash() const override { return inner_.identity_hash(); }
  std::size_t rows_seen() const { return rows_; }
  std::size_t calls() const { return calls_; }
  std::size_t max_batch() const { return max_batch_; }

 protected:
  Matrix predict_raw(const Matrix& inputs) const override;

 private:
  const Classifier& inner_;
  mutable std::size_t rows_ = 0;
  mutable std::size_t calls_ = 0;
  mutable std::size_t max_batch_ = 0;
};

/// Serves a classifier over /v1/info and /v1/predict on 127.0.0.1.
class ClassifierServer {
 public:
  explicit ClassifierServer(const Classifier& model);
  ~ClassifierServer();
  ClassifierServer(const ClassifierServer&) = delete;
  ClassifierServer& operator=(const ClassifierServer&) = delete;

  int port() const { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  /// Number of /v1/predict requests answered with 5xx before serving normally.
  void fail_next(int count);
  std::size_t predict_requests() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string slurp(const std::filesystem::path& path);
void spit(const std::filesystem::path& path, const std::string& content);

/// An unused localhost port (bound and released).
int dead_port();

/// Two-blob fixture: D=8, 30 points per blob, separable, with text on every
/// record except the last. Written as a bundle plus builtin weights.
struct TwoBlobFixture {
  DatasetBundle bundle;
  std::unique_ptr<MlpClassifier> classifier;
  std::filesystem::path manifest;
  std::filesystem::path weights;
};
TwoBlobFixture write_two_blob_fixture(const std::filesystem::path& dir);

}  // namespace deepview::testing
