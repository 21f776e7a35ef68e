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
#include <vector>

#include "deepview/classifier.hpp"
#include "deepview/types.hpp"

namespace deepview {

/**
 * Gaussian RBF network from the 2D projection back to the data space:
 *
 *   y(p) = intercept + sum_k weights_k * exp(-gamma_k * ||p - c_k||^2)
 */
struct RbfInverseMap {
  Matrix centers;    // K x 2
  Vector gamma;      // K
  Matrix weights;    // K x D
  Vector intercept;  // D
  double ridge = 1e-3;

  std::size_t n_centers() const { return static_cast<std::size_t>(centers.rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(intercept.size()); }
};

/// At most this many centers; larger inputs use a seeded subset.
inline constexpr std::size_t kMaxRbfCenters = 1000;

/**
 * Median-heuristic fit: centers are all points (or a seeded subset of
 * kMaxRbfCenters), gamma = 1 / (2 m^2) with m the median pairwise distance
 * between centers, weights from ridge regression on column-centred targets.
 * Requires N >= 3; all-identical coordinates are rejected.
 */
RbfInverseMap fit_inverse(const Matrix& coords, const Matrix& embeddings, double ridge = 1e-3,
                          std::uint64_t seed = 0);

/**
 * Solves for weights with fixed centers and a shared gamma. ridge > 0 uses
 * the normal equations (Phi^T Phi + ridge I) W = Phi^T (Y - mean) with a
 * Cholesky-type solve; ridge == 0 uses column-pivoted QR on Phi directly,
 * which is the same least-squares solution with better conditioning.
 */
RbfInverseMap fit_rbf_weights(Matrix centers, double gamma, const Matrix& coords,
                              const Matrix& targets, double ridge);

Matrix apply_inverse(const RbfInverseMap& map, const Matrix& points_2d);

/// Analytic D x 2 Jacobian of apply_inverse at `point`.
Matrix inverse_jacobian(const RbfInverseMap& map, double x, double y);

/// Regular grid over the projection plane; cells are row-major, row 0 at y0.
struct DecisionGrid {
  double x0 = 0.0;
  double y0 = 0.0;
  double dx = 1.0;
  double dy = 1.0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<int> labels;
  std::vector<double> certainty;

  std::size_t cell_count() const { return width * height; }
  double cell_center_x(std::size_t col) const { return x0 + (static_cast<double>(col) + 0.5) * dx; }
  double cell_center_y(std::size_t row) const { return y0 + (static_cast<double>(row) + 0.5) * dy; }

  /// Containing cell by floor indexing, clamped to the grid at the edges.
  std::size_t containing_cell(double x, double y) const;
};

/// Normalized max-probability: (p_max - 1/C) / (1 - 1/C), clamped to [0, 1].
double certainty_from_probs(std::span<const double> probs);

struct GridSpec {
  std::size_t width = 100;
  std::size_t height = 100;
  double margin = 0.05;
  std::size_t batch_size = 1024;
};

/**
 * Covers the bounding box of `coords` expanded by margin * extent per side,
 * lifts every cell center through the inverse map and classifies it. Labels
 * are argmax with ties to the lower class.
 */
DecisionGrid sample_decision_grid(const RbfInverseMap& map, const Matrix& coords,
                                  const Classifier& f, const GridSpec& spec = {});

}  // namespace deepview
