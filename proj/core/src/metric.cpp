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

#include "deepview/metric.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include <json.hpp>

#include "deepview/error.hpp"
#include "deepview/hash.hpp"
#include "io_util.hpp"

namespace deepview {

using nlohmann::json;

const char* to_string(BaseMetric metric) {
  return metric == BaseMetric::cosine ? "cosine" : "euclidean";
}

BaseMetric parse_base_metric(const std::string& name) {
  if (name == "cosine") return BaseMetric::cosine;
  if (name == "euclidean") return BaseMetric::euclidean;
  throw ValidationError("unknown base metric '" + name + "' (expected cosine or euclidean)");
}

void DiscriminativeMetricConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValidationError("lambda out of range [0, 1]: " + std::to_string(lambda));
  }
  if (n_segments < 1) throw ValidationError("n_segments must be >= 1");
}

double js_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ValidationError("js_distance: length mismatch (" + std::to_string(p.size()) + " vs " +
                          std::to_string(q.size()) + ")");
  }
  double divergence = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double m = 0.5 * (p[c] + q[c]);
    const double tp = p[c] > 0.0 ? p[c] * std::log2(p[c] / m) : 0.0;
    const double tq = q[c] > 0.0 ? q[c] * std::log2(q[c] / m) : 0.0;
    divergence += tp + tq;  // one rounded sum per term keeps js(p, q) == js(q, p) exactly
  }
  // Rounding can push the divergence slightly outside [0, 1].
  return std::sqrt(std::clamp(0.5 * divergence, 0.0, 1.0));
}

double base_distance(std::span<const double> x, std::span<const double> y, BaseMetric kind) {
  if (x.size() != y.size()) throw ValidationError("base_distance: length mismatch");
  if (kind == BaseMetric::euclidean) {
    double acc = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      const double d = x[c] - y[c];
      acc += d * d;
    }
    return std::sqrt(acc);
  }
  double dot = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) {
    dot += x[c] * y[c];
    xx += x[c] * x[c];
    yy += y[c] * y[c];
  }
  if (xx == 0.0 || yy == 0.0) throw ValidationError("zero vector under cosine distance");
  return std::clamp(1.0 - dot / (std::sqrt(xx) * std::sqrt(yy)), 0.0, 2.0);
}

namespace {

// p_s = (1 - s/n) x + (s/n) y
void interpolate(std::span<const double> x, std::span<const double> y, int s, int n,
                 std::span<double> out) {
  const double t = static_cast<double>(s) / static_cast<double>(n);
  for (std::size_t c = 0; c < x.size(); ++c) out[c] = (1.0 - t) * x[c] + t * y[c];
}

struct PairSums {
  double js = 0.0;
  double base = 0.0;
};

double mix(double lambda, double js, double base) { return (1.0 - lambda) * js + lambda * base; }

}  // namespace

double discriminative_distance(std::span<const double> x, std::span<const double> y,
                               const Classifier& f, const DiscriminativeMetricConfig& cfg) {
  cfg.validate();
  if (x.size() != y.size()) throw ValidationError("discriminative_distance: length mismatch");
  // Rounding in the interpolation and the square root of JS would otherwise leave ~1e-8 here.
  if (std::equal(x.begin(), x.end(), y.begin())) return 0.0;
  const int n = cfg.n_segments;
  const bool need_js = cfg.lambda < 1.0 || cfg.normalize_components;
  const bool need_base = cfg.lambda > 0.0 || cfg.normalize_components;

  Matrix points(n + 1, static_cast<Eigen::Index>(x.size()));
  for (int s = 0; s <= n; ++s) interpolate(x, y, s, n, row_span(points, s));

  PairSums sums;
  if (need_js) {
    const Matrix probs = f.predict_batch(points);
    for (int s = 1; s <= n; ++s) sums.js += js_distance(row_span(probs, s - 1), row_span(probs, s));
  }
  if (need_base) {
    for (int s = 1; s <= n; ++s) {
      try {
        sums.base += base_distance(row_span(points, s - 1), row_span(points, s), cfg.base_metric);
      } catch (const Error& e) {
        throw_with_context(e, "segment " + std::to_string(s));
      }
    }
  }
  return mix(cfg.lambda, sums.js, sums.base);
}

// ---------------------------------------------------------------------------

namespace {

// Pairs (i, j), i < j, enumerated row-major.
struct PairCursor {
  std::size_t n;
  std::size_t i = 0;
  std::size_t j = 1;

  PairCursor(std::size_t n_points, std::size_t flat) : n(n_points) {
    // offset(i) = i * (2n - i - 1) / 2
    std::size_t row = 0;
    while (row + 1 < n && (row + 1) * (2 * n - row - 2) / 2 <= flat) ++row;
    i = row;
    j = i + 1 + (flat - i * (2 * n - i - 1) / 2);
  }

  void advance() {
    if (++j == n) {
      ++i;
      j = i + 1;
    }
  }
};

Matrix predict_in_batches(const Classifier& f, const Matrix& inputs, std::size_t batch_size) {
  Matrix out(inputs.rows(), static_cast<Eigen::Index>(f.info().n_classes));
  const auto total = static_cast<std::size_t>(inputs.rows());
  for (std::size_t start = 0; start < total; start += batch_size) {
    const auto len = std::min(batch_size, total - start);
    const auto s = static_cast<Eigen::Index>(start);
    const auto l = static_cast<Eigen::Index>(len);
    out.middleRows(s, l) = f.predict_batch(inputs.middleRows(s, l));
  }
  return out;
}

}  // namespace

DistanceComponents build_distance_components(const DatasetBundle& bundle, const Classifier& f,
                                             int n_segments, BaseMetric base_metric,
                                             bool need_js, bool need_base,
                                             const BuildOptions& options) {
  const std::size_t n_points = bundle.size();
  if (n_points < 2) throw ValidationError("distance matrix needs at least 2 points");
  if (n_segments < 1) throw ValidationError("n_segments must be >= 1");
  if (options.batch_size == 0) throw ValidationError("batch_size must be positive");
  if (need_js && f.info().input_dim != bundle.dim()) {
    throw ValidationError("classifier input_dim " + std::to_string(f.info().input_dim) +
                          " does not match embedding width " + std::to_string(bundle.dim()));
  }

  const Matrix& x = bundle.embeddings();
  const auto dim = static_cast<Eigen::Index>(bundle.dim());
  const auto np = static_cast<Eigen::Index>(n_points);

  DistanceComponents out;
  out.js_sum = Matrix::Zero(np, np);
  out.base_sum = Matrix::Zero(np, np);
  out.has_js = need_js;
  out.has_base = need_base;
  out.n_segments = n_segments;
  out.base_metric = base_metric;
  out.bundle_hash = bundle.content_hash();
  out.classifier_hash = f.identity_hash();

  Matrix endpoint_probs;
  if (need_js) {
    try {
      endpoint_probs = predict_in_batches(f, x, options.batch_size);
    } catch (const Error& e) {
      throw_with_context(e, "classifier failure on endpoint predictions");
    }
  }

  const std::size_t total_pairs = n_points * (n_points - 1) / 2;
  const std::size_t interior = static_cast<std::size_t>(n_segments - 1);
  const std::size_t chunk_pairs = std::max<std::size_t>(1, 8192 / std::max<std::size_t>(1, interior));
  const std::size_t n_chunks = (total_pairs + chunk_pairs - 1) / chunk_pairs;

  std::atomic<std::size_t> next_chunk{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_chunk = n_chunks;

  auto work = [&]() {
    std::vector<double> a(static_cast<std::size_t>(dim)), b(static_cast<std::size_t>(dim));
    for (;;) {
      const std::size_t chunk = next_chunk.fetch_add(1);
      if (chunk >= n_chunks || failed.load()) return;
      const std::size_t begin = chunk * chunk_pairs;
      const std::size_t count = std::min(chunk_pairs, total_pairs - begin);
      try {
        Matrix interior_probs;
        if (need_js && interior > 0) {
          Matrix points(static_cast<Eigen::Index>(count * interior), dim);
          PairCursor cur(n_points, begin);
          for (std::size_t p = 0; p < count; ++p, cur.advance()) {
            for (std::size_t s = 1; s <= interior; ++s) {
              interpolate(row_span(x, static_cast<Eigen::Index>(cur.i)),
                          row_span(x, static_cast<Eigen::Index>(cur.j)), static_cast<int>(s),
                          n_segments, row_span(points, static_cast<Eigen::Index>(p * interior + s - 1)));
            }
          }
          try {
            interior_probs = predict_in_batches(f, points, options.batch_size);
          } catch (const Error& e) {
            const PairCursor first(n_points, begin);
            const PairCursor last(n_points, begin + count - 1);
            throw_with_context(e, "classifier failure for pairs (" + std::to_string(first.i) + "," +
                                      std::to_string(first.j) + ")..(" + std::to_string(last.i) +
                                      "," + std::to_string(last.j) + ")");
          }
        }
        PairCursor cur(n_points, begin);
        for (std::size_t p = 0; p < count; ++p, cur.advance()) {
          const auto i = static_cast<Eigen::Index>(cur.i);
          const auto j = static_cast<Eigen::Index>(cur.j);
          if (need_js) {
            double acc = 0.0;
            for (std::size_t s = 1; s <= static_cast<std::size_t>(n_segments); ++s) {
              const auto prev = s == 1 ? row_span(endpoint_probs, i)
                                       : row_span(interior_probs, static_cast<Eigen::Index>(p * interior + s - 2));
              const auto curr = s == static_cast<std::size_t>(n_segments)
                                    ? row_span(endpoint_probs, j)
                                    : row_span(interior_probs, static_cast<Eigen::Index>(p * interior + s - 1));
              acc += js_distance(prev, curr);
            }
            out.js_sum(i, j) = acc;
            out.js_sum(j, i) = acc;
          }
          if (need_base) {
            double acc = 0.0;
            interpolate(row_span(x, i), row_span(x, j), 0, n_segments, a);
            for (int s = 1; s <= n_segments; ++s) {
              interpolate(row_span(x, i), row_span(x, j), s, n_segments, b);
              try {
                acc += base_distance(a, b, base_metric);
              } catch (const Error& e) {
                throw_with_context(e, "pair (" + std::to_string(i) + "," + std::to_string(j) +
                                          "), segment " + std::to_string(s));
              }
              a.swap(b);
            }
            out.base_sum(i, j) = acc;
            out.base_sum(j, i) = acc;
          }
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (chunk < first_error_chunk) {
          first_error_chunk = chunk;
          first_error = std::current_exception();
        }
        failed.store(true);
        return;
      }
    }
  };

  const unsigned n_threads =
      static_cast<unsigned>(std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(1, n_chunks)));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

DistanceMatrix mix_components(const DistanceComponents& components,
                              const DiscriminativeMetricConfig& cfg) {
  cfg.validate();
  const bool need_js = cfg.lambda < 1.0 || cfg.normalize_components;
  const bool need_base = cfg.lambda > 0.0 || cfg.normalize_components;
  if ((need_js && !components.has_js) || (need_base && !components.has_base)) {
    throw ValidationError("distance components were built without a term this lambda needs");
  }
  const Eigen::Index n = components.js_sum.rows();
  double js_scale = 1.0, base_scale = 1.0;
  if (cfg.normalize_components && n > 1) {
    double js_total = 0.0, base_total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        js_total += components.js_sum(i, j);
        base_total += components.base_sum(i, j);
      }
    }
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    if (js_total > 0.0) js_scale = js_total / pairs;
    if (base_total > 0.0) base_scale = base_total / pairs;
  }

  DistanceMatrix dm;
  dm.values = Matrix::Zero(n, n);
  dm.lambda = cfg.lambda;
  dm.config = cfg;
  dm.bundle_hash = components.bundle_hash;
  dm.classifier_hash = components.classifier_hash;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double js = cfg.normalize_components ? components.js_sum(i, j) / js_scale
                                                 : components.js_sum(i, j);
      const double base = cfg.normalize_components ? components.base_sum(i, j) / base_scale
                                                   : components.base_sum(i, j);
      const double v = mix(cfg.lambda, js, base);
      dm.values(i, j) = v;
      dm.values(j, i) = v;
    }
  }
  return dm;
}

DistanceMatrix build_distance_matrix(const DatasetBundle& bundle, const Classifier& f,
                                     const DiscriminativeMetricConfig& cfg,
                                     const BuildOptions& options) {
  cfg.validate();
  const bool need_js = cfg.lambda < 1.0 || cfg.normalize_components;
  const bool need_base = cfg.lambda > 0.0 || cfg.normalize_components;
  const auto components = build_distance_components(bundle, f, cfg.n_segments, cfg.base_metric,
                                                    need_js, need_base, options);
  return mix_components(components, cfg);
}

// ---------------------------------------------------------------------------
// Cache

std::string distance_cache_key(std::uint64_t bundle_hash, std::uint64_t classifier_hash,
                               const DiscriminativeMetricConfig& cfg) {
  Fnv1a h;
  h.update(bundle_hash)
      .update(classifier_hash)
      .update(std::bit_cast<std::uint64_t>(cfg.lambda))
      .update(static_cast<std::uint64_t>(cfg.n_segments))
      .update(static_cast<std::uint64_t>(cfg.base_metric))
      .update(std::uint64_t{cfg.normalize_components});
  return "dm-" + to_hex(h.digest());
}

void save_distance_cache(const DistanceMatrix& dm, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create cache directory '" + dir.string() + "': " + ec.message());
  const auto key = distance_cache_key(dm.bundle_hash, dm.classifier_hash, dm.config);
  const auto n = static_cast<Eigen::Index>(dm.size());
  std::vector<double> upper;
  upper.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) upper.push_back(dm.values(i, j));
  }
  detail::write_f32_blob(dir / (key + ".f32"), upper.data(), upper.size());
  const json manifest = {{"key", key},
                         {"n", dm.size()},
                         {"lambda", dm.config.lambda},
                         {"n_segments", dm.config.n_segments},
                         {"base_metric", to_string(dm.config.base_metric)},
                         {"normalize_components", dm.config.normalize_components},
                         {"bundle_hash", to_hex(dm.bundle_hash)},
                         {"classifier_hash", to_hex(dm.classifier_hash)},
                         {"dtype", "f32"},
                         {"byte_order", "little"},
                         {"layout", "upper_triangle_row_major"},
                         {"data", key + ".f32"}};
  detail::write_text_file(dir / (key + ".json"), manifest.dump(2) + "\n");
}

std::optional<DistanceMatrix> load_distance_cache(const std::filesystem::path& dir,
                                                  std::uint64_t bundle_hash,
                                                  std::uint64_t classifier_hash,
                                                  const DiscriminativeMetricConfig& cfg) {
  const auto key = distance_cache_key(bundle_hash, classifier_hash, cfg);
  const auto manifest_path = dir / (key + ".json");
  if (!std::filesystem::exists(manifest_path)) return std::nullopt;
  const json manifest = detail::parse_json(detail::read_text_file(manifest_path), manifest_path.string());
  if (manifest.value("key", std::string()) != key) return std::nullopt;
  const auto n = manifest.at("n").get<std::size_t>();
  const auto values = detail::read_f32_blob(dir / (key + ".f32"), std::uintmax_t{n * (n - 1) / 2} * 4);
  DistanceMatrix dm;
  dm.values = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < dm.values.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < dm.values.cols(); ++j) {
      dm.values(i, j) = values[k];
      dm.values(j, i) = values[k];
      ++k;
    }
  }
  dm.lambda = cfg.lambda;
  dm.config = cfg;
  dm.bundle_hash = bundle_hash;
  dm.classifier_hash = classifier_hash;
  return dm;
}

}  // namespace deepview
