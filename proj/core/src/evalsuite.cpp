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

#include "deepview/evalsuite.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "deepview/error.hpp"

namespace deepview {

namespace {

double sq_dist(const Matrix& m, Eigen::Index a, Eigen::Index b) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double d = m(a, c) - m(b, c);
    acc += d * d;
  }
  return acc;
}

// Indices of all j != i ordered by (distance, index).
void order_others(const Matrix& m, std::size_t i, std::vector<std::pair<double, std::size_t>>& buf) {
  buf.clear();
  const auto n = static_cast<std::size_t>(m.rows());
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) buf.emplace_back(sq_dist(m, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), j);
  }
  std::sort(buf.begin(), buf.end());
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<int> leave_one_out_knn(const Matrix& points, const std::vector<int>& labels,
                                   std::size_t k) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (labels.size() != n) throw ValidationError("label count does not match point count");
  if (k == 0 || n <= k) {
    throw ValidationError("leave-one-out kNN needs N > k (N=" + std::to_string(n) +
                          ", k=" + std::to_string(k) + ")");
  }
  int max_label = 0;
  for (int l : labels) {
    if (l < 0) throw ValidationError("negative label");
    max_label = std::max(max_label, l);
  }
  std::vector<int> out(n);
  std::vector<std::pair<double, std::size_t>> buf;
  buf.reserve(n);
  std::vector<int> votes(static_cast<std::size_t>(max_label) + 1);
  for (std::size_t i = 0; i < n; ++i) {
    buf.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) buf.emplace_back(sq_dist(points, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), j);
    }
    std::partial_sort(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k), buf.end());
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t m = 0; m < k; ++m) ++votes[static_cast<std::size_t>(labels[buf[m].second])];
    const int top = *std::max_element(votes.begin(), votes.end());
    for (std::size_t m = 0; m < k; ++m) {
      const int l = labels[buf[m].second];
      if (votes[static_cast<std::size_t>(l)] == top) {
        out[i] = l;
        break;
      }
    }
  }
  return out;
}

double q_knn_error(const Matrix& coords, const std::vector<int>& predicted_labels, std::size_t k) {
  const auto votes = leave_one_out_knn(coords, predicted_labels, k);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < votes.size(); ++i) wrong += votes[i] != predicted_labels[i];
  return static_cast<double>(wrong) / static_cast<double>(votes.size());
}

double q_data_error(const DecisionGrid& grid, const Matrix& coords,
                    const std::vector<int>& predicted_labels) {
  const auto n = static_cast<std::size_t>(coords.rows());
  if (predicted_labels.size() != n) throw ValidationError("label count does not match point count");
  if (grid.labels.size() != grid.cell_count() || grid.cell_count() == 0) {
    throw ValidationError("malformed decision grid");
  }
  if (n == 0) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto cell = grid.containing_cell(coords(static_cast<Eigen::Index>(i), 0),
                                           coords(static_cast<Eigen::Index>(i), 1));
    wrong += grid.labels[cell] != predicted_labels[i];
  }
  return static_cast<double>(wrong) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

NeighborhoodCurves neighborhood_curves(const Matrix& repr_a, const Matrix& repr_b) {
  const auto n = static_cast<std::size_t>(repr_a.rows());
  if (repr_b.rows() != repr_a.rows()) {
    throw ValidationError("representations differ in row count (" + std::to_string(repr_a.rows()) +
                          " vs " + std::to_string(repr_b.rows()) + ")");
  }
  if (n < 3) throw ValidationError("neighbourhood curves need at least 3 points");

  // overlap[k] accumulates |kNN_a(i) ∩ kNN_b(i)| over i. A neighbour j lies in
  // both k-neighbourhoods exactly when max(rank_a(j), rank_b(j)) < k.
  std::vector<long long> first_shared(n, 0);
  std::vector<std::size_t> rank_a(n);
  std::vector<std::pair<double, std::size_t>> buf;
  buf.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    order_others(repr_a, i, buf);
    for (std::size_t r = 0; r < buf.size(); ++r) rank_a[buf[r].second] = r;
    order_others(repr_b, i, buf);
    for (std::size_t r = 0; r < buf.size(); ++r) {
      const std::size_t j = buf[r].second;
      ++first_shared[std::max(rank_a[j], r) + 1];
    }
  }

  NeighborhoodCurves c;
  const std::size_t kmax_possible = n - 1;
  c.ks.resize(kmax_possible);
  c.q_nn.resize(kmax_possible);
  c.lcmc.resize(kmax_possible);
  long long shared = 0;
  for (std::size_t k = 1; k <= kmax_possible; ++k) {
    shared += first_shared[k];
    c.ks[k - 1] = k;
    c.q_nn[k - 1] = static_cast<double>(shared) / (static_cast<double>(n) * static_cast<double>(k));
    c.lcmc[k - 1] = c.q_nn[k - 1] - static_cast<double>(k) / static_cast<double>(n - 1);
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < kmax_possible; ++k) {
    if (c.lcmc[k] > c.lcmc[best]) best = k;
  }
  c.k_max = best + 1;
  c.q_local = std::accumulate(c.q_nn.begin(), c.q_nn.begin() + static_cast<std::ptrdiff_t>(c.k_max), 0.0) /
              static_cast<double>(c.k_max);
  c.auc = std::accumulate(c.q_nn.begin(), c.q_nn.end(), 0.0) / static_cast<double>(kmax_possible);
  return c;
}

std::string curves_to_csv(const NeighborhoodCurves& curves) {
  std::string out = "k,q_nn,lcmc\n";
  for (std::size_t i = 0; i < curves.ks.size(); ++i) {
    out += std::to_string(curves.ks[i]) + "," + format_double(curves.q_nn[i]) + "," +
           format_double(curves.lcmc[i]) + "\n";
  }
  return out;
}

Comparison compare_models(const std::vector<NamedRepresentation>& inputs) {
  if (inputs.size() < 2) throw ValidationError("comparison needs at least two representations");
  for (const auto& in : inputs) {
    if (in.points.rows() != inputs.front().points.rows()) {
      throw ValidationError("representation '" + in.name + "' has " +
                            std::to_string(in.points.rows()) + " rows, expected " +
                            std::to_string(inputs.front().points.rows()));
    }
  }
  Comparison out;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    for (std::size_t b = a + 1; b < inputs.size(); ++b) {
      auto curves = neighborhood_curves(inputs[a].points, inputs[b].points);
      out.rows.push_back({inputs[a].name, inputs[b].name, curves.q_local, curves.k_max, curves.auc});
      out.curves.push_back(std::move(curves));
    }
  }
  return out;
}

std::string comparison_summary_json(const Comparison& comparison) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& row : comparison.rows) {
    pairs.push_back({{"pair", row.first + " vs " + row.second},
                     {"first", row.first},
                     {"second", row.second},
                     {"q_local", row.q_local},
                     {"k_max", row.k_max},
                     {"auc", row.auc}});
  }
  return nlohmann::json{{"pairs", std::move(pairs)}}.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

ConfusionMatrix confusion_matrix(const std::vector<int>& true_labels,
                                 const std::vector<int>& predicted_labels, std::size_t n_classes,
                                 std::vector<std::string> class_names) {
  if (true_labels.size() != predicted_labels.size()) {
    throw ValidationError("true and predicted label counts differ");
  }
  if (n_classes == 0) throw ValidationError("confusion matrix needs at least one class");
  ConfusionMatrix cm;
  cm.counts.assign(n_classes, std::vector<long>(n_classes, 0));
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const int t = true_labels[i], p = predicted_labels[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes ||
        static_cast<std::size_t>(p) >= n_classes) {
      throw ValidationError("label out of range [0, " + std::to_string(n_classes) + ") at sample " +
                            std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  if (class_names.empty()) {
    for (std::size_t c = 0; c < n_classes; ++c) class_names.push_back(std::to_string(c));
  }
  if (class_names.size() != n_classes) throw ValidationError("class_names length does not match C");
  cm.class_names = std::move(class_names);
  return cm;
}

std::string confusion_to_json(const ConfusionMatrix& cm) {
  return nlohmann::json{{"class_names", cm.class_names}, {"counts", cm.counts}}.dump(2) + "\n";
}

std::pair<std::size_t, std::size_t> largest_confusion(const ConfusionMatrix& cm) {
  std::pair<std::size_t, std::size_t> best{0, cm.n_classes() > 1 ? 1 : 0};
  long best_count = -1;
  for (std::size_t t = 0; t < cm.n_classes(); ++t) {
    for (std::size_t p = 0; p < cm.n_classes(); ++p) {
      if (t != p && cm.counts[t][p] > best_count) {
        best_count = cm.counts[t][p];
        best = {t, p};
      }
    }
  }
  return best;
}

}  // namespace deepview
