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
#include <string>
#include <utility>
#include <vector>

#include "deepview/inverse_map.hpp"
#include "deepview/types.hpp"

namespace deepview {

/**
 * Leave-one-out kNN labels under Euclidean distance in `points`. Distance
 * ties go to the lower index; a vote tie goes to the tied label whose first
 * neighbour is nearest.
 */
std::vector<int> leave_one_out_knn(const Matrix& points, const std::vector<int>& labels,
                                   std::size_t k = 5);

/// Fraction of points whose leave-one-out kNN vote disagrees with their own
/// label. Requires N > k.
double q_knn_error(const Matrix& coords, const std::vector<int>& predicted_labels,
                   std::size_t k = 5);

/// Fraction of points whose predicted label differs from the grid label of
/// their containing cell.
double q_data_error(const DecisionGrid& grid, const Matrix& coords,
                    const std::vector<int>& predicted_labels);

/**
 * Co-ranking neighbourhood agreement between two representations of the same
 * N items, for every k in [1, N-1] (index k-1 in the vectors).
 *   q_nn[k]  = 1/(N k) * sum_i |kNN_a(i) ∩ kNN_b(i)|
 *   lcmc[k]  = q_nn[k] - k/(N-1)
 *   k_max    = argmax_k lcmc (smallest k on ties)
 *   q_local  = mean of q_nn over k <= k_max
 *   auc      = mean of q_nn over all k
 */
struct NeighborhoodCurves {
  std::vector<std::size_t> ks;
  std::vector<double> q_nn;
  std::vector<double> lcmc;
  std::size_t k_max = 1;
  double q_local = 0.0;
  double auc = 0.0;
};

NeighborhoodCurves neighborhood_curves(const Matrix& repr_a, const Matrix& repr_b);

/// CSV with header "k,q_nn,lcmc".
std::string curves_to_csv(const NeighborhoodCurves& curves);

struct NamedRepresentation {
  std::string name;
  Matrix points;
};

struct ComparisonRow {
  std::string first;
  std::string second;
  double q_local = 0.0;
  std::size_t k_max = 0;
  double auc = 0.0;
};

struct Comparison {
  std::vector<NeighborhoodCurves> curves;  // one per row, same order
  std::vector<ComparisonRow> rows;         // unordered pairs, (0,1), (0,2), ..., (1,2), ...
};

Comparison compare_models(const std::vector<NamedRepresentation>& inputs);

/// {"pairs": [{"pair": "a vs b", "q_local", "k_max", "auc"}, ...]}
std::string comparison_summary_json(const Comparison& comparison);

struct ConfusionMatrix {
  std::vector<std::vector<long>> counts;  // rows = true, columns = predicted
  std::vector<std::string> class_names;

  std::size_t n_classes() const { return counts.size(); }
};

ConfusionMatrix confusion_matrix(const std::vector<int>& true_labels,
                                 const std::vector<int>& predicted_labels, std::size_t n_classes,
                                 std::vector<std::string> class_names = {});

std::string confusion_to_json(const ConfusionMatrix& cm);

/// The off-diagonal cell (true, predicted) with the largest count; ties go
/// to the first in row-major order.
std::pair<std::size_t, std::size_t> largest_confusion(const ConfusionMatrix& cm);

}  // namespace deepview
