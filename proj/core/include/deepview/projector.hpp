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
#include <string>
#include <vector>

#include "deepview/metric.hpp"
#include "deepview/types.hpp"

namespace deepview {

enum class InitMethod { spectral, random };

const char* to_string(InitMethod init);
InitMethod parse_init_method(const std::string& name);

/// UMAP knobs; defaults follow common UMAP practice.
struct UmapConfig {
  int n_neighbors = 15;
  double min_dist = 0.1;
  double spread = 1.0;
  int n_epochs = 500;
  int negative_samples = 5;
  double learning_rate = 1.0;
  double repulsion_strength = 1.0;
  std::uint64_t seed = 0;
  InitMethod init = InitMethod::spectral;

  void validate(std::size_t n_points) const;
};

/// Exact neighbour lists, row i holds the k nearest j != i.
struct NeighborGraph {
  std::size_t n_points = 0;
  std::size_t k = 0;
  std::vector<std::size_t> indices;  // n_points * k
  std::vector<double> distances;     // n_points * k, ascending per row
};

struct FuzzyEdge {
  std::size_t i;
  std::size_t j;
  double weight;
};

/// Symmetric fuzzy simplicial set. Both directions of every edge are stored.
struct FuzzyGraph {
  std::size_t n_points = 0;
  std::vector<FuzzyEdge> edges;
  std::vector<double> rho;
  std::vector<double> sigma;
};

struct Projection {
  Matrix coords;  // N x 2
  UmapConfig config;
  double source_lambda = 0.0;
};

/// Smallest k off-diagonal entries per row; ties go to the lower index.
NeighborGraph knn_from_matrix(const Matrix& distances, std::size_t k);

/**
 * Smooth-kNN membership strengths. rho_i is the nearest-neighbour distance;
 * sigma_i is found by binary search (at most 64 steps) so that
 * sum_j exp(-max(0, d_ij - rho_i) / sigma_i) = log2(k) within 1e-5.
 * Directed weights are merged with the probabilistic t-conorm
 * w = w1 + w2 - w1 * w2.
 */
FuzzyGraph build_fuzzy_graph(const NeighborGraph& neighbors);

/// The target sum the sigma search aims for, log2(k).
double smooth_knn_target(std::size_t k);

/// Least-squares fit of 1 / (1 + a d^{2b}) to the piecewise target curve
/// (1 below min_dist, exp(-(d - min_dist) / spread) above) on 300 points in
/// [0, 3 * spread].
struct CurveParams {
  double a;
  double b;
};
CurveParams fit_curve_params(double min_dist, double spread = 1.0);

struct InitResult {
  Matrix coords;  // N x 2, each axis scaled to [-10, 10]
  bool used_fallback = false;
};

/**
 * First two non-trivial eigenvectors of the symmetric normalized Laplacian,
 * by seeded block power iteration on (I + D^-1/2 W D^-1/2) / 2 with the
 * trivial eigenvector deflated (tolerance 1e-6, 1000 iterations). A
 * disconnected graph or non-convergence falls back to seeded random
 * placement around per-component centroids.
 */
InitResult spectral_init(const FuzzyGraph& graph, std::uint64_t seed);

/// Uniform in [-10, 10]^2.
Matrix random_init(std::size_t n_points, std::uint64_t seed);

/// Connected component id per point (ids in order of first appearance).
std::vector<std::size_t> connected_components(const FuzzyGraph& graph);

/**
 * Serial SGD on the UMAP cross-entropy: attraction along sampled edges,
 * `negative_samples` repulsive samples per edge sample, gradient components
 * clipped to [-4, 4], learning rate decaying linearly to zero. Pure function
 * of (graph, cfg).
 */
Projection optimize_layout(const FuzzyGraph& graph, const UmapConfig& cfg);

/// knn_from_matrix -> build_fuzzy_graph -> optimize_layout.
Projection project(const DistanceMatrix& dm, const UmapConfig& cfg);

}  // namespace deepview
