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
#include <span>
#include <string>

#include "deepview/classifier.hpp"
#include "deepview/dataset.hpp"
#include "deepview/types.hpp"

namespace deepview {

enum class BaseMetric { cosine, euclidean };

const char* to_string(BaseMetric metric);
BaseMetric parse_base_metric(const std::string& name);

/**
 * Settings of the discriminative arc distance
 *
 *   d(x, y) = (1 - lambda) * sum_i JS(f(p_{i-1}), f(p_i))
 *           +      lambda  * sum_i d_S(p_{i-1}, p_i)
 *
 * over the n_segments + 1 equidistant points p_i on the segment [x, y].
 * JS uses base-2 logarithms, so each term lies in [0, 1].
 */
struct DiscriminativeMetricConfig {
  double lambda = 1.0;
  int n_segments = 5;
  BaseMetric base_metric = BaseMetric::cosine;
  /// Divide each summed component by its mean over all pairs before mixing.
  bool normalize_components = false;

  void validate() const;
};

/// Jensen-Shannon metric, sqrt of the base-2 JS divergence. In [0, 1].
double js_distance(std::span<const double> p, std::span<const double> q);

/// euclidean: ||x - y||; cosine: 1 - cos(x, y) clamped to [0, 2].
double base_distance(std::span<const double> x, std::span<const double> y, BaseMetric kind);

/// Single-pair evaluation; f is queried once with all n_segments + 1 points.
double discriminative_distance(std::span<const double> x, std::span<const double> y,
                               const Classifier& f, const DiscriminativeMetricConfig& cfg);

/// Per-pair component sums before lambda mixing. Upper triangle is
/// authoritative; both matrices are symmetric with zero diagonal.
struct DistanceComponents {
  Matrix js_sum;
  Matrix base_sum;
  bool has_js = false;
  bool has_base = false;
  int n_segments = 0;
  BaseMetric base_metric = BaseMetric::cosine;
  std::uint64_t bundle_hash = 0;
  std::uint64_t classifier_hash = 0;
};

struct DistanceMatrix {
  Matrix values;
  double lambda = 0.0;
  DiscriminativeMetricConfig config;
  std::uint64_t bundle_hash = 0;
  std::uint64_t classifier_hash = 0;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
};

struct BuildOptions {
  /// Maximum rows per classifier call.
  std::size_t batch_size = 256;
  /// Worker threads over pair chunks; results do not depend on it.
  unsigned threads = 1;
};

/**
 * Computes the component sums for all pairs. Endpoint predictions f(x_i) are
 * computed once; interior points are classified in batches of at most
 * options.batch_size. With `need_js`/`need_base` false the component is
 * skipped and left at zero.
 */
DistanceComponents build_distance_components(const DatasetBundle& bundle, const Classifier& f,
                                             int n_segments, BaseMetric base_metric,
                                             bool need_js, bool need_base,
                                             const BuildOptions& options = {});

/// Mixes precomputed components with cfg.lambda (and optional normalization).
DistanceMatrix mix_components(const DistanceComponents& components,
                              const DiscriminativeMetricConfig& cfg);

DistanceMatrix build_distance_matrix(const DatasetBundle& bundle, const Classifier& f,
                                     const DiscriminativeMetricConfig& cfg,
                                     const BuildOptions& options = {});

/// Optional on-disk cache: `<key>.json` manifest plus `<key>.f32` holding the
/// upper triangle (row-major, i < j) as little-endian f32. The key hashes the
/// bundle, classifier and config. Cached values are f32-rounded.
std::string distance_cache_key(std::uint64_t bundle_hash, std::uint64_t classifier_hash,
                               const DiscriminativeMetricConfig& cfg);
void save_distance_cache(const DistanceMatrix& dm, const std::filesystem::path& dir);
std::optional<DistanceMatrix> load_distance_cache(const std::filesystem::path& dir,
                                                  std::uint64_t bundle_hash,
                                                  std::uint64_t classifier_hash,
                                                  const DiscriminativeMetricConfig& cfg);

}  // namespace deepview
