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

#include <memory>
#include <vector>

#include <benchmark/benchmark.h>

#include "deepview/classifier.hpp"
#include "deepview/dataset.hpp"
#include "deepview/evalsuite.hpp"
#include "deepview/log.hpp"
#include "deepview/metric.hpp"
#include "deepview/projector.hpp"
#include "deepview/random.hpp"

namespace {

using namespace deepview;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

DatasetBundle random_bundle(std::size_t n, Eigen::Index dim) {
  std::vector<Record> records(n);
  for (std::size_t i = 0; i < n; ++i) records[i].id = "r" + std::to_string(i);
  return DatasetBundle(random_matrix(static_cast<Eigen::Index>(n), dim, 1), std::move(records));
}

std::unique_ptr<Classifier> random_mlp(Eigen::Index dim, Eigen::Index classes) {
  std::vector<DenseLayer> layers(2);
  layers[0] = {random_matrix(32, dim, 2), Vector::Zero(32), Activation::relu};
  layers[1] = {random_matrix(classes, 32, 3), Vector::Zero(classes), Activation::softmax};
  return std::make_unique<MlpClassifier>(layers);
}

Matrix pairwise(const Matrix& x) {
  Matrix d(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.rows(); ++j) d(i, j) = (x.row(i) - x.row(j)).norm();
  }
  return d;
}

void BM_JsDistance(benchmark::State& state) {
  const auto c = state.range(0);
  Matrix p = random_matrix(2, c, 4).cwiseAbs();
  p.row(0) /= p.row(0).sum();
  p.row(1) /= p.row(1).sum();
  for (auto _ : state) benchmark::DoNotOptimize(js_distance(row_span(p, 0), row_span(p, 1)));
}
BENCHMARK(BM_JsDistance)->Arg(2)->Arg(10)->Arg(100);

void BM_DistanceMatrix(benchmark::State& state) {
  const auto bundle = random_bundle(static_cast<std::size_t>(state.range(0)), 64);
  const auto f = random_mlp(64, 4);
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(build_distance_matrix(bundle, *f, cfg));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DistanceMatrix)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_Layout(benchmark::State& state) {
  set_log_sink([](std::string_view) {});
  DistanceMatrix dm;
  dm.values = pairwise(random_matrix(state.range(0), 8, 5));
  UmapConfig cfg;
  cfg.n_epochs = 200;
  for (auto _ : state) benchmark::DoNotOptimize(project(dm, cfg));
  set_log_sink({});
}
BENCHMARK(BM_Layout)->Arg(100)->Arg(250)->Unit(benchmark::kMillisecond);

void BM_NeighborhoodCurves(benchmark::State& state) {
  const Matrix a = random_matrix(state.range(0), 64, 6);
  const Matrix b = random_matrix(state.range(0), 2, 7);
  for (auto _ : state) benchmark::DoNotOptimize(neighborhood_curves(a, b));
}
BENCHMARK(BM_NeighborhoodCurves)->Arg(100)->Arg(250)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
