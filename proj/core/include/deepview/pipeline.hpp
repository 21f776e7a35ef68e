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
#include <optional>
#include <string>
#include <vector>

#include "deepview/classifier.hpp"
#include "deepview/dataset.hpp"
#include "deepview/inverse_map.hpp"
#include "deepview/metric.hpp"
#include "deepview/projector.hpp"

namespace deepview {

/// Everything that determines a run's output. One seed drives every
/// stochastic stage (layout, RBF center subset); UmapConfig::seed is
/// overwritten with it.
struct RunConfig {
  DiscriminativeMetricConfig metric;
  UmapConfig umap;
  std::size_t grid_width = 100;
  std::size_t grid_height = 100;
  double margin = 0.05;
  double inverse_ridge = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Execution knobs that never change results.
struct ExecOptions {
  std::size_t batch_size = 256;
  unsigned threads = 1;
  /// Optional directory for the f32 distance-matrix cache.
  std::optional<std::string> matrix_cache_dir;
};

struct PayloadPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  std::optional<int> true_label;
  int predicted = 0;
  double prob_max = 0.0;
  bool mismatch = false;
};

struct VisPayload {
  std::vector<PayloadPoint> points;
  DecisionGrid grid;
  std::vector<std::string> class_names;
  double q_knn_error = 0.0;
  double q_data_error = 0.0;
  RunConfig config;
  std::string classifier_hash;
  std::string bundle_hash;
};

/// Intermediate products of one run, for callers that need more than the payload.
struct DeepViewRun {
  DistanceMatrix distances;
  Projection projection;
  RbfInverseMap inverse;
  std::vector<int> predicted;
  VisPayload payload;
};

/**
 * Distance matrix -> UMAP projection -> RBF inverse -> decision grid ->
 * Q_kNN / Q_data. Point predictions come from f on the original embeddings.
 * Stage failures are rethrown with the stage name prefixed.
 */
DeepViewRun execute_run(const DatasetBundle& bundle, const Classifier& f, const RunConfig& cfg,
                        const ExecOptions& exec = {});

VisPayload run_deepview(const DatasetBundle& bundle, const Classifier& f, const RunConfig& cfg,
                        const ExecOptions& exec = {});

struct SweepRow {
  double lambda = 0.0;
  double q_knn_error = 0.0;
  double q_data_error = 0.0;
};

/// One full run per lambda (shared seed), rows in the given order. Component
/// sums are computed once and re-mixed per lambda.
std::vector<SweepRow> sweep_lambda(const DatasetBundle& bundle, const Classifier& f,
                                   const RunConfig& cfg, const std::vector<double>& lambdas,
                                   const ExecOptions& exec = {},
                                   std::vector<VisPayload>* payloads = nullptr);

/// Mismatch flags recomputed from points and grid.
std::vector<bool> recompute_mismatch(const VisPayload& payload);

// JSON forms. Serialization is deterministic: equal payloads give equal bytes.
std::string payload_to_json(const VisPayload& payload);
/// Parses and validates against the payload schema; ValidationError otherwise.
VisPayload payload_from_json(const std::string& text);

std::string run_config_to_json(const RunConfig& cfg);
/// Missing keys keep the values from `base`; unknown keys are rejected.
RunConfig run_config_from_json(const std::string& text, const RunConfig& base = {});

}  // namespace deepview
