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

#include "deepview/inverse_map.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "deepview/error.hpp"
#include "deepview/random.hpp"

namespace deepview {

namespace {

double sq_dist_2d(double ax, double ay, double bx, double by) {
  const double dx = ax - bx, dy = ay - by;
  return dx * dx + dy * dy;
}

Matrix kernel_matrix(const Matrix& points, const Matrix& centers, const Vector& gamma) {
  Matrix phi(points.rows(), centers.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index k = 0; k < centers.rows(); ++k) {
      phi(i, k) = std::exp(-gamma[k] * sq_dist_2d(points(i, 0), points(i, 1), centers(k, 0), centers(k, 1)));
    }
  }
  return phi;
}

}  // namespace

RbfInverseMap fit_rbf_weights(Matrix centers, double gamma, const Matrix& coords,
                              const Matrix& targets, double ridge) {
  if (coords.cols() != 2 || centers.cols() != 2) throw ValidationError("inverse map expects 2D coordinates");
  if (coords.rows() != targets.rows()) throw ValidationError("coords and targets differ in row count");
  if (coords.rows() == 0 || centers.rows() == 0) throw ValidationError("inverse map needs data");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("RBF gamma must be positive");
  if (!(ridge >= 0.0)) throw ValidationError("ridge must be non-negative");
  if (!coords.allFinite() || !targets.allFinite()) throw ValidationError("inverse map inputs must be finite");

  RbfInverseMap map;
  map.centers = std::move(centers);
  map.gamma = Vector::Constant(map.centers.rows(), gamma);
  map.ridge = ridge;
  map.intercept = targets.colwise().mean().transpose();

  const Matrix centered = targets.rowwise() - map.intercept.transpose();
  const Eigen::MatrixXd phi = kernel_matrix(coords, map.centers, map.gamma);
  if (ridge > 0.0) {
    Eigen::MatrixXd lhs = phi.transpose() * phi;
    lhs.diagonal().array() += ridge;
    const Eigen::MatrixXd rhs = phi.transpose() * Eigen::MatrixXd(centered);
    map.weights = lhs.ldlt().solve(rhs);
  } else {
    map.weights = phi.colPivHouseholderQr().solve(Eigen::MatrixXd(centered));
  }
  if (!map.weights.allFinite()) throw ValidationError("inverse map solve produced non-finite weights");
  return map;
}

RbfInverseMap fit_inverse(const Matrix& coords, const Matrix& embeddings, double ridge,
                          std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(coords.rows());
  if (n < 3) throw ValidationError("inverse map needs at least 3 points");
  if (coords.cols() != 2) throw ValidationError("inverse map expects N x 2 coordinates");
  if (!coords.allFinite()) throw ValidationError("projection coordinates must be finite");

  Matrix centers;
  if (n <= kMaxRbfCenters) {
    centers = coords;
  } else {
    const auto picks = sample_indices(n, kMaxRbfCenters, seed);
    centers.resize(static_cast<Eigen::Index>(picks.size()), 2);
    for (std::size_t i = 0; i < picks.size(); ++i) {
      centers.row(static_cast<Eigen::Index>(i)) = coords.row(static_cast<Eigen::Index>(picks[i]));
    }
  }

  std::vector<double> dists;
  const Eigen::Index k = centers.rows();
  dists.reserve(static_cast<std::size_t>(k * (k - 1) / 2));
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      dists.push_back(std::sqrt(sq_dist_2d(centers(i, 0), centers(i, 1), centers(j, 0), centers(j, 1))));
    }
  }
  const auto mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
  double median = dists[mid];
  if (dists.size() % 2 == 0) {
    const double lower = *std::max_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  if (!(median > 0.0)) {
    throw ValidationError("degenerate projection geometry: median pairwise distance is zero");
  }
  return fit_rbf_weights(std::move(centers), 1.0 / (2.0 * median * median), coords, embeddings, ridge);
}

Matrix apply_inverse(const RbfInverseMap& map, const Matrix& points_2d) {
  if (points_2d.cols() != 2) throw ValidationError("apply_inverse expects G x 2 points");
  const Eigen::Index d = map.intercept.size();
  const Eigen::Index k = map.centers.rows();
  Matrix out(points_2d.rows(), d);
  std::vector<double> phi(static_cast<std::size_t>(k));
  for (Eigen::Index g = 0; g < points_2d.rows(); ++g) {
    const double px = points_2d(g, 0), py = points_2d(g, 1);
    double* dst = out.data() + g * d;
    for (Eigen::Index c = 0; c < d; ++c) dst[c] = map.intercept[c];
    for (Eigen::Index i = 0; i < k; ++i) {
      const double w = std::exp(-map.gamma[i] * sq_dist_2d(px, py, map.centers(i, 0), map.centers(i, 1)));
      const double* wrow = map.weights.data() + i * d;
      for (Eigen::Index c = 0; c < d; ++c) dst[c] += w * wrow[c];
    }
  }
  return out;
}

Matrix inverse_jacobian(const RbfInverseMap& map, double x, double y) {
  const Eigen::Index d = map.intercept.size();
  Matrix jac = Matrix::Zero(d, 2);
  for (Eigen::Index i = 0; i < map.centers.rows(); ++i) {
    const double ex = x - map.centers(i, 0), ey = y - map.centers(i, 1);
    const double phi = std::exp(-map.gamma[i] * (ex * ex + ey * ey));
    const double sx = -2.0 * map.gamma[i] * ex * phi;
    const double sy = -2.0 * map.gamma[i] * ey * phi;
    for (Eigen::Index c = 0; c < d; ++c) {
      jac(c, 0) += map.weights(i, c) * sx;
      jac(c, 1) += map.weights(i, c) * sy;
    }
  }
  return jac;
}

// ---------------------------------------------------------------------------

std::size_t DecisionGrid::containing_cell(double x, double y) const {
  auto index = [](double v, double origin, double step, std::size_t count) {
    const double f = std::floor((v - origin) / step);
    if (!(f > 0.0)) return std::size_t{0};
    return std::min(static_cast<std::size_t>(f), count - 1);
  };
  return index(y, y0, dy, height) * width + index(x, x0, dx, width);
}

double certainty_from_probs(std::span<const double> probs) {
  if (probs.size() < 2) return 1.0;
  const double c = static_cast<double>(probs.size());
  const double peak = *std::max_element(probs.begin(), probs.end());
  return std::clamp((peak - 1.0 / c) / (1.0 - 1.0 / c), 0.0, 1.0);
}

DecisionGrid sample_decision_grid(const RbfInverseMap& map, const Matrix& coords,
                                  const Classifier& f, const GridSpec& spec) {
  if (spec.width < 2 || spec.height < 2) throw ValidationError("grid resolution must be at least 2x2");
  if (!(spec.margin >= 0.0)) throw ValidationError("grid margin must be non-negative");
  if (coords.rows() == 0 || coords.cols() != 2) throw ValidationError("grid needs N x 2 coordinates");
  if (spec.batch_size == 0) throw ValidationError("batch_size must be positive");

  DecisionGrid grid;
  grid.width = spec.width;
  grid.height = spec.height;
  auto axis = [&](Eigen::Index c, std::size_t cells, double& origin, double& step) {
    const double lo = coords.col(c).minCoeff();
    const double hi = coords.col(c).maxCoeff();
    const double extent = hi > lo ? hi - lo : 1.0;
    origin = lo - spec.margin * extent;
    step = extent * (1.0 + 2.0 * spec.margin) / static_cast<double>(cells);
  };
  axis(0, grid.width, grid.x0, grid.dx);
  axis(1, grid.height, grid.y0, grid.dy);

  const std::size_t total = grid.cell_count();
  grid.labels.resize(total);
  grid.certainty.resize(total);
  for (std::size_t start = 0; start < total; start += spec.batch_size) {
    const std::size_t len = std::min(spec.batch_size, total - start);
    Matrix centers(static_cast<Eigen::Index>(len), 2);
    for (std::size_t q = 0; q < len; ++q) {
      const std::size_t cell = start + q;
      centers(static_cast<Eigen::Index>(q), 0) = grid.cell_center_x(cell % grid.width);
      centers(static_cast<Eigen::Index>(q), 1) = grid.cell_center_y(cell / grid.width);
    }
    Matrix probs;
    try {
      probs = f.predict_batch(apply_inverse(map, centers));
    } catch (const Error& e) {
      throw_with_context(e, "classifier failure on grid cells " + std::to_string(start) + ".." +
                                std::to_string(start + len - 1));
    }
    for (std::size_t q = 0; q < len; ++q) {
      const auto r = static_cast<Eigen::Index>(q);
      grid.labels[start + q] = argmax_row(probs, r);
      grid.certainty[start + q] = certainty_from_probs(row_span(probs, r));
    }
  }
  return grid;
}

}  // namespace deepview
