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

#include "deepview/projector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <utility>

#include <Eigen/Dense>

#include "deepview/error.hpp"
#include "deepview/log.hpp"
#include "deepview/random.hpp"

namespace deepview {

const char* to_string(InitMethod init) {
  return init == InitMethod::spectral ? "spectral" : "random";
}

InitMethod parse_init_method(const std::string& name) {
  if (name == "spectral") return InitMethod::spectral;
  if (name == "random") return InitMethod::random;
  throw ValidationError("unknown init method '" + name + "' (expected spectral or random)");
}

void UmapConfig::validate(std::size_t n_points) const {
  if (n_neighbors < 2 || static_cast<std::size_t>(n_neighbors) >= n_points) {
    throw ValidationError("n_neighbors must satisfy 2 <= n_neighbors < N (got " +
                          std::to_string(n_neighbors) + " with N=" + std::to_string(n_points) + ")");
  }
  if (n_epochs < 1) throw ValidationError("n_epochs must be >= 1");
  if (negative_samples < 0) throw ValidationError("negative_samples must be >= 0");
  if (!(min_dist >= 0.0) || !(spread > 0.0) || min_dist > spread * 3.0) {
    throw ValidationError("min_dist/spread out of range");
  }
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
}

// ---------------------------------------------------------------------------

NeighborGraph knn_from_matrix(const Matrix& distances, std::size_t k) {
  const auto n = static_cast<std::size_t>(distances.rows());
  if (distances.cols() != distances.rows()) throw ValidationError("distance matrix must be square");
  if (k == 0 || k >= n) {
    throw ValidationError("knn_from_matrix: need 0 < k < N (k=" + std::to_string(k) +
                          ", N=" + std::to_string(n) + ")");
  }
  NeighborGraph g;
  g.n_points = n;
  g.k = k;
  g.indices.resize(n * k);
  g.distances.resize(n * k);
  std::vector<std::pair<double, std::size_t>> row;
  row.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.emplace_back(distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), j);
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
    for (std::size_t m = 0; m < k; ++m) {
      g.distances[i * k + m] = row[m].first;
      g.indices[i * k + m] = row[m].second;
    }
  }
  return g;
}

double smooth_knn_target(std::size_t k) { return std::log2(static_cast<double>(k)); }

namespace {

double membership(double d, double rho, double sigma) {
  const double excess = d - rho;
  if (excess <= 0.0) return 1.0;
  return std::exp(-excess / sigma);
}

}  // namespace

FuzzyGraph build_fuzzy_graph(const NeighborGraph& nb) {
  if (nb.k == 0 || nb.indices.size() != nb.n_points * nb.k || nb.distances.size() != nb.indices.size()) {
    throw ValidationError("malformed neighbour lists");
  }
  const std::size_t n = nb.n_points;
  const std::size_t k = nb.k;
  const double target = smooth_knn_target(k);

  FuzzyGraph g;
  g.n_points = n;
  g.rho.resize(n);
  g.sigma.resize(n);

  std::map<std::pair<std::size_t, std::size_t>, std::pair<double, double>> merged;
  for (std::size_t i = 0; i < n; ++i) {
    const double* d = nb.distances.data() + i * k;
    const double rho = d[0];
    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
    for (int iter = 0; iter < 64; ++iter) {
      double psum = 0.0;
      for (std::size_t m = 0; m < k; ++m) psum += membership(d[m], rho, mid);
      if (std::abs(psum - target) < 1e-5) break;
      if (psum > target) {
        hi = mid;
        mid = 0.5 * (lo + hi);
      } else {
        lo = mid;
        mid = std::isinf(hi) ? mid * 2.0 : 0.5 * (lo + hi);
      }
    }
    g.rho[i] = rho;
    g.sigma[i] = mid;
    for (std::size_t m = 0; m < k; ++m) {
      const std::size_t j = nb.indices[i * k + m];
      const double w = membership(d[m], rho, mid);
      if (i < j) {
        merged[{i, j}].first = w;
      } else {
        merged[{j, i}].second = w;
      }
    }
  }
  for (const auto& [key, w] : merged) {
    const double sym = w.first + w.second - w.first * w.second;
    if (sym <= 0.0) continue;
    g.edges.push_back({key.first, key.second, sym});
    g.edges.push_back({key.second, key.first, sym});
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const FuzzyEdge& a, const FuzzyEdge& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  return g;
}

// ---------------------------------------------------------------------------

CurveParams fit_curve_params(double min_dist, double spread) {
  constexpr int samples = 300;
  std::vector<double> xs(samples), ys(samples);
  for (int s = 0; s < samples; ++s) {
    xs[s] = 3.0 * spread * s / (samples - 1);
    ys[s] = xs[s] < min_dist ? 1.0 : std::exp(-(xs[s] - min_dist) / spread);
  }
  auto cost = [&](double a, double b) {
    double c = 0.0;
    for (int s = 0; s < samples; ++s) {
      const double r = 1.0 / (1.0 + a * std::pow(xs[s], 2.0 * b)) - ys[s];
      c += r * r;
    }
    return c;
  };

  // Levenberg-Marquardt on two parameters.
  double a = 1.0, b = 1.0, damping = 1e-3;
  double current = cost(a, b);
  for (int iter = 0; iter < 500; ++iter) {
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    for (int s = 0; s < samples; ++s) {
      const double x = xs[s];
      const double xp = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
      const double denom = 1.0 + a * xp;
      const double r = 1.0 / denom - ys[s];
      const double da = -xp / (denom * denom);
      const double db = x > 0.0 ? -a * xp * 2.0 * std::log(x) / (denom * denom) : 0.0;
      jtj(0, 0) += da * da;
      jtj(0, 1) += da * db;
      jtj(1, 1) += db * db;
      jtr(0) += da * r;
      jtr(1) += db * r;
    }
    jtj(1, 0) = jtj(0, 1);
    bool improved = false;
    for (int tries = 0; tries < 30 && !improved; ++tries) {
      Eigen::Matrix2d lhs = jtj;
      lhs(0, 0) *= 1.0 + damping;
      lhs(1, 1) *= 1.0 + damping;
      const Eigen::Vector2d step = lhs.ldlt().solve(-jtr);
      const double na = a + step(0), nb = b + step(1);
      const double candidate = (na > 0.0 && nb > 0.0) ? cost(na, nb) : current * 2.0 + 1.0;
      if (candidate < current) {
        const double change = step.norm();
        a = na;
        b = nb;
        const double gain = current - candidate;
        current = candidate;
        damping = std::max(damping * 0.3, 1e-12);
        improved = true;
        if (change < 1e-12 || gain < 1e-15 * current) return {a, b};
      } else {
        damping *= 10.0;
      }
    }
    if (!improved) break;
  }
  return {a, b};
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> connected_components(const FuzzyGraph& graph) {
  const std::size_t n = graph.n_points;
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](std::size_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (const auto& e : graph.edges) {
    const auto a = find(e.i), b = find(e.j);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::size_t> label(n);
  std::map<std::size_t, std::size_t> ids;
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = find(i);
    const auto it = ids.emplace(root, ids.size()).first;
    label[i] = it->second;
  }
  return label;
}

Matrix random_init(std::size_t n_points, std::uint64_t seed) {
  Rng rng(seed);
  Matrix coords(static_cast<Eigen::Index>(n_points), 2);
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    coords(i, 0) = rng.uniform(-10.0, 10.0);
    coords(i, 1) = rng.uniform(-10.0, 10.0);
  }
  return coords;
}

namespace {

void scale_axes(Matrix& coords) {
  for (Eigen::Index c = 0; c < coords.cols(); ++c) {
    const double extent = coords.col(c).cwiseAbs().maxCoeff();
    if (extent > 0.0) coords.col(c) *= 10.0 / extent;
  }
}

Matrix component_fallback(const std::vector<std::size_t>& component, std::uint64_t seed) {
  const std::size_t n = component.size();
  const std::size_t n_comp = n ? *std::max_element(component.begin(), component.end()) + 1 : 0;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Matrix coords(static_cast<Eigen::Index>(n), 2);
  if (n_comp <= 1) {
    coords = random_init(n, seed);
    return coords;
  }
  // Component centroids on a circle with a seeded rotation, points jittered
  // within a radius that keeps neighbouring components apart.
  const double offset = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double radius = 8.0;
  const double jitter = std::min(2.0, radius * std::sin(std::numbers::pi / static_cast<double>(n_comp)) * 0.5);
  std::vector<std::pair<double, double>> centroid(n_comp);
  for (std::size_t c = 0; c < n_comp; ++c) {
    const double angle = offset + 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(n_comp);
    centroid[c] = {radius * std::cos(angle), radius * std::sin(angle)};
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [cx, cy] = centroid[component[i]];
    coords(static_cast<Eigen::Index>(i), 0) = cx + rng.uniform(-jitter, jitter);
    coords(static_cast<Eigen::Index>(i), 1) = cy + rng.uniform(-jitter, jitter);
  }
  scale_axes(coords);
  return coords;
}

// Orthonormalize the columns of v against `fixed` and each other.
void orthonormalize(Matrix& v, const Vector& fixed) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    for (int pass = 0; pass < 2; ++pass) {
      v.col(c) -= fixed * fixed.dot(v.col(c));
      for (Eigen::Index p = 0; p < c; ++p) v.col(c) -= v.col(p) * v.col(p).dot(v.col(c));
    }
    const double norm = v.col(c).norm();
    if (norm > 0.0) v.col(c) /= norm;
  }
}

}  // namespace

InitResult spectral_init(const FuzzyGraph& graph, std::uint64_t seed) {
  const std::size_t n = graph.n_points;
  InitResult result;
  const auto component = connected_components(graph);
  const bool connected = std::all_of(component.begin(), component.end(), [](std::size_t c) { return c == 0; });
  if (n < 3 || !connected) {
    log_notice(n < 3 ? "spectral init needs at least 3 points; using random placement"
                     : "graph is disconnected; spectral init falls back to per-component placement");
    result.coords = component_fallback(component, seed);
    result.used_fallback = true;
    return result;
  }

  std::vector<double> degree(n, 0.0);
  for (const auto& e : graph.edges) degree[e.i] += e.weight;
  std::vector<double> inv_sqrt(n);
  Vector trivial(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
    trivial[static_cast<Eigen::Index>(i)] = std::sqrt(degree[i]);
  }
  trivial.normalize();

  // y = (x + D^-1/2 W D^-1/2 x) / 2
  auto apply = [&](const Matrix& x) {
    Matrix y = x;
    for (const auto& e : graph.edges) {
      const double w = e.weight * inv_sqrt[e.i] * inv_sqrt[e.j];
      y.row(static_cast<Eigen::Index>(e.i)) += w * x.row(static_cast<Eigen::Index>(e.j));
    }
    return Matrix(0.5 * y);
  };

  Rng rng(seed);
  Matrix v(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform(-1.0, 1.0);
  orthonormalize(v, trivial);

  bool converged = false;
  for (int iter = 0; iter < 1000; ++iter) {
    Matrix next = apply(v);
    orthonormalize(next, trivial);
    // Distance between the spanned subspaces.
    const Matrix residual = next - v * (v.transpose() * next);
    v = std::move(next);
    if (residual.norm() < 1e-6) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    log_notice("spectral init did not converge in 1000 iterations; using random placement");
    result.coords = component_fallback(component, seed);
    result.used_fallback = true;
    return result;
  }

  // Rayleigh-Ritz inside the converged subspace to separate the two vectors.
  const Eigen::Matrix2d h = v.transpose() * apply(v);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(0.5 * (h + h.transpose()));
  Matrix coords(static_cast<Eigen::Index>(n), 2);
  coords.col(0) = v * eig.eigenvectors().col(1);
  coords.col(1) = v * eig.eigenvectors().col(0);
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::Index peak = 0;
    coords.col(c).cwiseAbs().maxCoeff(&peak);
    if (coords(peak, c) < 0.0) coords.col(c) *= -1.0;
  }
  scale_axes(coords);
  result.coords = std::move(coords);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

double clip(double v) { return std::clamp(v, -4.0, 4.0); }

}  // namespace

Projection optimize_layout(const FuzzyGraph& graph, const UmapConfig& cfg) {
  const std::size_t n = graph.n_points;
  if (n == 0) throw ValidationError("optimize_layout: empty graph");
  if (cfg.n_epochs < 1) throw ValidationError("n_epochs must be >= 1");

  Projection proj;
  proj.config = cfg;
  proj.coords = cfg.init == InitMethod::spectral ? spectral_init(graph, cfg.seed).coords
                                                 : random_init(n, cfg.seed);
  if (graph.edges.empty()) return proj;

  const auto [a, b] = fit_curve_params(cfg.min_dist, cfg.spread);
  const double max_w = std::max_element(graph.edges.begin(), graph.edges.end(),
                                        [](const FuzzyEdge& x, const FuzzyEdge& y) { return x.weight < y.weight; })
                           ->weight;
  const std::size_t m = graph.edges.size();
  std::vector<double> epochs_per_sample(m), next_sample(m), per_negative(m), next_negative(m);
  for (std::size_t e = 0; e < m; ++e) {
    epochs_per_sample[e] = max_w / graph.edges[e].weight;
    next_sample[e] = epochs_per_sample[e];
    per_negative[e] = cfg.negative_samples > 0 ? epochs_per_sample[e] / cfg.negative_samples
                                               : std::numeric_limits<double>::infinity();
    next_negative[e] = per_negative[e];
  }

  Rng rng(cfg.seed ^ 0xd1b54a32d192ed03ULL);
  double* y = proj.coords.data();
  const double gamma = cfg.repulsion_strength;

  for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    const double alpha = cfg.learning_rate * (1.0 - static_cast<double>(epoch) / cfg.n_epochs);
    for (std::size_t e = 0; e < m; ++e) {
      if (next_sample[e] > epoch) continue;
      const std::size_t j = graph.edges[e].i;
      const std::size_t k = graph.edges[e].j;
      double* cur = y + 2 * j;
      double* other = y + 2 * k;

      const double dx = cur[0] - other[0], dy = cur[1] - other[1];
      const double dist_sq = dx * dx + dy * dy;
      double coeff = 0.0;
      if (dist_sq > 0.0) {
        coeff = -2.0 * a * b * std::pow(dist_sq, b - 1.0) / (a * std::pow(dist_sq, b) + 1.0);
      }
      const double gx = clip(coeff * dx), gy = clip(coeff * dy);
      cur[0] += gx * alpha;
      cur[1] += gy * alpha;
      other[0] -= gx * alpha;
      other[1] -= gy * alpha;
      next_sample[e] += epochs_per_sample[e];

      const long n_neg = cfg.negative_samples > 0
                             ? static_cast<long>((epoch - next_negative[e]) / per_negative[e])
                             : 0;
      for (long s = 0; s < n_neg; ++s) {
        const auto r = static_cast<std::size_t>(rng.below(n));
        // The edge's own endpoints are not negatives.
        if (r == j || r == k) continue;
        const double* neg = y + 2 * r;
        const double nx = cur[0] - neg[0], ny = cur[1] - neg[1];
        const double nd = nx * nx + ny * ny;
        if (nd > 0.0) {
          const double rep = 2.0 * gamma * b / ((0.001 + nd) * (a * std::pow(nd, b) + 1.0));
          cur[0] += clip(rep * nx) * alpha;
          cur[1] += clip(rep * ny) * alpha;
        } else {
          cur[0] += 4.0 * alpha;
          cur[1] += 4.0 * alpha;
        }
      }
      if (n_neg > 0) next_negative[e] += static_cast<double>(n_neg) * per_negative[e];
    }
  }
  if (!proj.coords.allFinite()) throw ValidationError("layout optimization produced non-finite coordinates");
  return proj;
}

Projection project(const DistanceMatrix& dm, const UmapConfig& cfg) {
  cfg.validate(dm.size());
  const auto nb = knn_from_matrix(dm.values, static_cast<std::size_t>(cfg.n_neighbors));
  auto proj = optimize_layout(build_fuzzy_graph(nb), cfg);
  proj.source_lambda = dm.lambda;
  return proj;
}

}  // namespace deepview
