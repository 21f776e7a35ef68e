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

#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "deepview/error.hpp"
#include "deepview/metric.hpp"
#include "deepview/random.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace deepview;
namespace dt = deepview::testing;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

DatasetBundle bundle_of(const Matrix& x) {
  std::vector<Record> recs(static_cast<std::size_t>(x.rows()));
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].id = "p" + std::to_string(i);
  return DatasetBundle(x, recs);
}

// Throws once it sees a row whose first coordinate lies in (lo, hi).
class TrippingClassifier final : public Classifier {
 public:
  TrippingClassifier(std::size_t dim, double lo, double hi) : lo_(lo), hi_(hi) {
    info_ = {dim, 2, {"a", "b"}};
  }
  const ClassifierInfo& info() const override { return info_; }
  std::uint64_t identity_hash() const override { return 1; }

 protected:
  Matrix predict_raw(const Matrix& x) const override {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (x(r, 0) > lo_ && x(r, 0) < hi_) throw TransportError("backend exploded");
    }
    return Matrix::Constant(x.rows(), 2, 0.5);
  }

 private:
  ClassifierInfo info_;
  double lo_;
  double hi_;
};

}  // namespace

TEST(Js, TaggedExamples) {
  const std::vector<double> half{0.5, 0.5}, skew{0.25, 0.75};
  EXPECT_EQ(js_distance(half, half), 0.0);
  EXPECT_NEAR(js_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 1.0, 1e-12);
  // Frozen from the entropy-form oracle.
  EXPECT_NEAR(js_distance(half, skew), 0.220895768849017, 1e-12);
  EXPECT_NEAR(js_distance(half, skew), oracle::js(half, skew), 1e-12);
}

TEST(Js, MatchesOracleOnRandomPairs) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t dim = 2 + rng.below(8);
    std::vector<double> p(dim), q(dim);
    double sp = 0, sq = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      sp += p[i] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
      sq += q[i] = rng.uniform();
    }
    if (sp == 0) sp = p[0] = 1;
    for (auto& v : p) v /= sp;
    for (auto& v : q) v /= sq;
    EXPECT_NEAR(js_distance(p, q), oracle::js(p, q), 1e-9);
  }
}

TEST(Js, LengthMismatch) {
  EXPECT_THROW(js_distance(std::vector<double>{1}, std::vector<double>{0.5, 0.5}), ValidationError);
}

TEST(BaseDistance, Examples) {
  const std::vector<double> x{1, 0}, y{1, 1}, o{0, 0}, p{3, 4};
  EXPECT_EQ(base_distance(x, x, BaseMetric::cosine), 0.0);
  EXPECT_EQ(base_distance(o, p, BaseMetric::euclidean), 5.0);
  EXPECT_NEAR(base_distance(x, y, BaseMetric::cosine), 1.0 - 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(base_distance(x, std::vector<double>{-1, 0}, BaseMetric::cosine), 2.0, 1e-12);
  EXPECT_THROW(base_distance(o, p, BaseMetric::cosine), ValidationError);
}

TEST(Config, Validation) {
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 1.5;
  try {
    cfg.validate();
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda out of range"), std::string::npos);
  }
  cfg.lambda = 0.5;
  cfg.n_segments = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  EXPECT_EQ(parse_base_metric("euclidean"), BaseMetric::euclidean);
  EXPECT_THROW(parse_base_metric("manhattan"), ValidationError);
}

TEST(Discriminative, TelescopesForEuclidean) {
  const auto f = dt::linear_softmax(Matrix::Identity(2, 2), Vector::Zero(2));
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 1.0;
  cfg.base_metric = BaseMetric::euclidean;
  for (int n : {1, 2, 5, 9}) {
    cfg.n_segments = n;
    EXPECT_NEAR(discriminative_distance(std::vector<double>{0, 0}, std::vector<double>{3, 4}, *f, cfg), 5.0, 1e-12);
  }
}

TEST(Discriminative, ConstantClassifierLambdaZeroIsZero) {
  dt::ConstantClassifier f(3, {0.1, 0.9});
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 0.0;
  EXPECT_EQ(discriminative_distance(std::vector<double>{1, 2, 3}, std::vector<double>{-4, 0, 9}, f, cfg), 0.0);
}

TEST(Discriminative, HalfLambdaMatchesDirectSummation) {
  Matrix w(2, 2);
  w << 1.5, -0.5, -1.0, 2.0;
  Vector b(2);
  b << 0.1, -0.2;
  const auto f = dt::linear_softmax(w, b);
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 0.5;
  cfg.n_segments = 4;
  const std::vector<double> x{1.0, -2.0}, y{-1.5, 2.5};
  const double got = discriminative_distance(x, y, *f, cfg);
  EXPECT_NEAR(got, oracle::discriminative(x, y, *f, 0.5, 4, true), 1e-12);
  cfg.base_metric = BaseMetric::euclidean;
  EXPECT_NEAR(discriminative_distance(x, y, *f, cfg), oracle::discriminative(x, y, *f, 0.5, 4, false), 1e-12);
}

TEST(Discriminative, SymmetricAndZeroOnDiagonal) {
  Rng rng(3);
  const auto f = dt::linear_softmax(random_matrix(rng, 3, 5, 2.0), Vector::Zero(3));
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 0.3;
  for (int t = 0; t < 50; ++t) {
    const Matrix xy = random_matrix(rng, 2, 5, 3.0);
    const auto x = oracle::row(xy, 0), y = oracle::row(xy, 1);
    const double a = discriminative_distance(x, y, *f, cfg), b = discriminative_distance(y, x, *f, cfg);
    EXPECT_NEAR(a, b, 1e-9);
    EXPECT_GE(a, 0.0);
    EXPECT_EQ(discriminative_distance(x, x, *f, cfg), 0.0);
  }
}

TEST(Discriminative, ExtremesSkipTheUnusedTerm) {
  Rng rng(4);
  const auto inner = dt::linear_softmax(random_matrix(rng, 2, 3), Vector::Zero(2));
  dt::CountingClassifier spy(*inner);
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 1.0;
  discriminative_distance(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}, spy, cfg);
  EXPECT_EQ(spy.calls(), 0u);
  // lambda = 0 never evaluates d_S: a zero interior point is harmless.
  cfg.lambda = 0.0;
  cfg.n_segments = 2;
  EXPECT_NO_THROW(discriminative_distance(std::vector<double>{1, 1, 1}, std::vector<double>{-1, -1, -1}, spy, cfg));
  EXPECT_EQ(spy.rows_seen(), 3u);
  cfg.lambda = 0.5;
  try {
    discriminative_distance(std::vector<double>{1, 1, 1}, std::vector<double>{-1, -1, -1}, spy, cfg);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("segment 1"), std::string::npos) << e.what();
  }
}

TEST(Matrix, TwoPoints) {
  Rng rng(5);
  const Matrix x = random_matrix(rng, 2, 4);
  const auto f = dt::linear_softmax(random_matrix(rng, 3, 4, 2.0), Vector::Zero(3));
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 0.4;
  const auto dm = build_distance_matrix(bundle_of(x), *f, cfg);
  EXPECT_EQ(dm.values(0, 0), 0.0);
  EXPECT_EQ(dm.values(1, 1), 0.0);
  EXPECT_EQ(dm.values(0, 1), dm.values(1, 0));
  EXPECT_NEAR(dm.values(0, 1), discriminative_distance(oracle::row(x, 0), oracle::row(x, 1), *f, cfg), 1e-12);
}

TEST(Matrix, LambdaOneEuclideanIsPlainDistance) {
  Rng rng(6);
  const Matrix x = random_matrix(rng, 12, 3, 4.0);
  const auto f = dt::linear_softmax(random_matrix(rng, 2, 3), Vector::Zero(2));
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 1.0;
  cfg.base_metric = BaseMetric::euclidean;
  const auto dm = build_distance_matrix(bundle_of(x), *f, cfg);
  for (Eigen::Index i = 0; i < 12; ++i) {
    for (Eigen::Index j = 0; j < 12; ++j) EXPECT_NEAR(dm.values(i, j), (x.row(i) - x.row(j)).norm(), 1e-9);
  }
}

TEST(Matrix, MatchesNaiveOracle) {
  Rng rng(7);
  const Matrix x = random_matrix(rng, 20, 5, 2.0);
  const auto f = dt::linear_softmax(random_matrix(rng, 3, 5, 2.0), random_matrix(rng, 3, 1).col(0));
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 0.6;
  cfg.n_segments = 5;
  const auto dm = build_distance_matrix(bundle_of(x), *f, cfg, BuildOptions{7, 2});
  for (Eigen::Index i = 0; i < 20; ++i) {
    for (Eigen::Index j = 0; j < 20; ++j) {
      const double want = i == j ? 0.0 : oracle::discriminative(oracle::row(x, i), oracle::row(x, j), *f, 0.6, 5, true);
      EXPECT_NEAR(dm.values(i, j), want, 1e-9);
    }
  }
}

TEST(Matrix, BatchAndThreadInvariantBitwise) {
  Rng rng(8);
  const Matrix x = random_matrix(rng, 33, 4, 2.0);
  const auto f = dt::linear_softmax(random_matrix(rng, 3, 4, 2.0), Vector::Zero(3));
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 0.25;
  cfg.n_segments = 3;
  const auto ref = build_distance_matrix(bundle_of(x), *f, cfg, BuildOptions{1, 1});
  for (std::size_t batch : {7, 64, 1000}) {
    for (unsigned threads : {1u, 3u, 8u}) {
      const auto dm = build_distance_matrix(bundle_of(x), *f, cfg, BuildOptions{batch, threads});
      EXPECT_EQ(std::memcmp(dm.values.data(), ref.values.data(), sizeof(double) * ref.values.size()), 0)
          << "batch " << batch << " threads " << threads;
    }
  }
}

TEST(Matrix, EndpointsClassifiedOnceAndBatchesBounded) {
  Rng rng(9);
  const Matrix x = random_matrix(rng, 10, 3);
  const auto inner = dt::linear_softmax(random_matrix(rng, 2, 3), Vector::Zero(2));
  dt::CountingClassifier spy(*inner);
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 0.5;
  cfg.n_segments = 4;
  build_distance_matrix(bundle_of(x), spy, cfg, BuildOptions{16, 1});
  // 10 endpoints plus 3 interior points for each of the 45 pairs.
  EXPECT_EQ(spy.rows_seen(), 10u + 45u * 3u);
  EXPECT_LE(spy.max_batch(), 16u);
}

TEST(Matrix, Invariants) {
  Rng rng(10);
  const Matrix x = random_matrix(rng, 15, 6);
  const auto f = dt::linear_softmax(random_matrix(rng, 4, 6, 3.0), Vector::Zero(4));
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 0.7;
  const auto dm = build_distance_matrix(bundle_of(x), *f, cfg);
  EXPECT_TRUE(dm.values.allFinite());
  EXPECT_GE(dm.values.minCoeff(), 0.0);
  EXPECT_LE((dm.values - dm.values.transpose()).cwiseAbs().maxCoeff(), 1e-9);
  for (Eigen::Index i = 0; i < 15; ++i) EXPECT_EQ(dm.values(i, i), 0.0);
  EXPECT_EQ(dm.classifier_hash, f->identity_hash());
}

TEST(Matrix, NormalizationScalesComponentsToUnitMean) {
  Rng rng(11);
  const Matrix x = random_matrix(rng, 12, 3, 5.0);
  const auto f = dt::linear_softmax(random_matrix(rng, 2, 3, 2.0), Vector::Zero(2));
  const auto comps = build_distance_components(bundle_of(x), *f, 5, BaseMetric::euclidean, true, true);
  DiscriminativeMetricConfig cfg;
  cfg.base_metric = BaseMetric::euclidean;
  cfg.normalize_components = true;
  double js_mean = 0, base_mean = 0;
  for (Eigen::Index i = 0; i < 12; ++i) {
    for (Eigen::Index j = i + 1; j < 12; ++j) {
      js_mean += comps.js_sum(i, j);
      base_mean += comps.base_sum(i, j);
    }
  }
  js_mean /= 66;
  base_mean /= 66;
  for (double lambda : {0.0, 0.3, 1.0}) {
    cfg.lambda = lambda;
    const auto dm = mix_components(comps, cfg);
    const auto direct = build_distance_matrix(bundle_of(x), *f, cfg);
    EXPECT_NEAR(dm.values(2, 7), (1 - lambda) * comps.js_sum(2, 7) / js_mean + lambda * comps.base_sum(2, 7) / base_mean,
                1e-12);
    EXPECT_EQ(dm.values, direct.values);
  }
}

TEST(Matrix, ClassifierFailureNamesPairs) {
  Matrix x(4, 2);
  x << 0, 0, 1, 0, 2, 0, 3, 0;
  TrippingClassifier f(2, 2.5, 1e9);
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 0.5;
  cfg.base_metric = BaseMetric::euclidean;
  try {
    build_distance_matrix(bundle_of(x), f, cfg);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("backend exploded"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("endpoint"), std::string::npos) << e.what();
  }
  TrippingClassifier interior(2, 0.4, 0.6);
  cfg.n_segments = 2;
  try {
    build_distance_matrix(bundle_of(x), interior, cfg, BuildOptions{1, 1});
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("pairs ("), std::string::npos) << e.what();
  }
}

TEST(Matrix, ZeroInteriorPointUnderCosineNamesPairAndSegment) {
  Matrix x(3, 2);
  x << 1, 1, 5, -2, -1, -1;
  dt::ConstantClassifier f(2, {0.5, 0.5});
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 0.5;
  cfg.n_segments = 2;
  try {
    build_distance_matrix(bundle_of(x), f, cfg);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("pair (0,2), segment 1"), std::string::npos) << e.what();
  }
}

TEST(Cache, RoundTripIsF32Rounded) {
  dt::TempDir dir;
  Rng rng(12);
  const Matrix x = random_matrix(rng, 9, 3);
  const auto f = dt::linear_softmax(random_matrix(rng, 2, 3), Vector::Zero(2));
  DiscriminativeMetricConfig cfg;
  cfg.lambda = 0.4;
  const auto b = bundle_of(x);
  const auto dm = build_distance_matrix(b, *f, cfg);
  EXPECT_FALSE(load_distance_cache(dir.path(), b.content_hash(), f->identity_hash(), cfg));
  save_distance_cache(dm, dir.path());
  const auto back = load_distance_cache(dir.path(), b.content_hash(), f->identity_hash(), cfg);
  ASSERT_TRUE(back);
  for (Eigen::Index i = 0; i < 9; ++i) {
    for (Eigen::Index j = 0; j < 9; ++j) {
      EXPECT_EQ(back->values(i, j), static_cast<double>(static_cast<float>(dm.values(i, j))));
    }
  }
  cfg.lambda = 0.5;
  EXPECT_FALSE(load_distance_cache(dir.path(), b.content_hash(), f->identity_hash(), cfg));
  EXPECT_NE(distance_cache_key(1, 2, cfg), distance_cache_key(1, 3, cfg));
}
