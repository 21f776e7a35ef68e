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

#include "support.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

#include <httplib.h>
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>
#include <json.hpp>

#include "deepview/error.hpp"
#include "deepview/random.hpp"

namespace deepview::testing {

using nlohmann::json;

namespace {

// Box-Muller on the portable uniform source.
double gaussian(Rng& rng) {
  double u1 = rng.uniform();
  while (u1 <= 0.0) u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

DatasetBundle make_blobs(const BlobSpec& spec) {
  const std::size_t c = spec.centers.size();
  const std::size_t n = c * spec.per_class;
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.dim));
  std::vector<Record> records;
  Rng rng(spec.seed);
  std::size_t row = 0;
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < spec.per_class; ++i, ++row) {
      for (std::size_t d = 0; d < spec.dim; ++d) {
        x(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d)) =
            spec.centers[k](static_cast<Eigen::Index>(d)) + spec.noise * gaussian(rng);
      }
      Record r;
      r.id = "b" + std::to_string(row);
      r.label = static_cast<int>(k);
      r.dataset_tag = std::string(1, static_cast<char>('A' + k));
      records.push_back(std::move(r));
    }
  }
  return DatasetBundle(std::move(x), std::move(records));
}

std::vector<Vector> axis_centers(std::size_t n_classes, std::size_t dim, double scale, double offset) {
  std::vector<Vector> out;
  for (std::size_t c = 0; c < n_classes; ++c) {
    Vector v = Vector::Constant(static_cast<Eigen::Index>(dim), offset);
    v(static_cast<Eigen::Index>(c % dim)) += scale;
    out.push_back(v);
  }
  return out;
}

std::unique_ptr<MlpClassifier> nearest_center_softmax(const std::vector<Vector>& centers, double beta) {
  const auto c = static_cast<Eigen::Index>(centers.size());
  const auto d = centers.front().size();
  Matrix w(c, d);
  Vector b(c);
  for (Eigen::Index k = 0; k < c; ++k) {
    w.row(k) = beta * centers[static_cast<std::size_t>(k)].transpose();
    b(k) = -0.5 * beta * centers[static_cast<std::size_t>(k)].squaredNorm();
  }
  return linear_softmax(std::move(w), std::move(b));
}

std::unique_ptr<MlpClassifier> linear_softmax(Matrix weights, Vector bias) {
  std::vector<DenseLayer> layers;
  layers.push_back(DenseLayer{std::move(weights), std::move(bias), Activation::softmax});
  return std::make_unique<MlpClassifier>(std::move(layers));
}

ConstantClassifier::ConstantClassifier(std::size_t input_dim, std::vector<double> probs)
    : probs_(std::move(probs)) {
  info_.input_dim = input_dim;
  info_.n_classes = probs_.size();
  for (std::size_t i = 0; i < probs_.size(); ++i) info_.class_names.push_back("c" + std::to_string(i));
}

Matrix ConstantClassifier::predict_raw(const Matrix& inputs) const {
  Matrix out(inputs.rows(), static_cast<Eigen::Index>(probs_.size()));
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = probs_[static_cast<std::size_t>(c)];
  }
  return out;
}

Matrix CountingClassifier::predict_raw(const Matrix& inputs) const {
  rows_ += static_cast<std::size_t>(inputs.rows());
  ++calls_;
  max_batch_ = std::max(max_batch_, static_cast<std::size_t>(inputs.rows()));
  return inner_.predict_batch(inputs);
}

struct ClassifierServer::Impl {
  const Classifier& model;
  httplib::Server server;
  std::thread thread;
  std::atomic<int> failures{0};
  std::atomic<std::size_t> requests{0};

  explicit Impl(const Classifier& m) : model(m) {}
};

ClassifierServer::ClassifierServer(const Classifier& model) : impl_(std::make_unique<Impl>(model)) {
  auto& s = impl_->server;
  s.Get("/v1/info", [this](const httplib::Request&, httplib::Response& res) {
    const auto& info = impl_->model.info();
    json doc = {{"input_dim", info.input_dim}, {"n_classes", info.n_classes}, {"class_names", info.class_names}};
    res.set_content(doc.dump(), "application/json");
  });
  s.Post("/v1/predict", [this](const httplib::Request& req, httplib::Response& res) {
    ++impl_->requests;
    if (impl_->failures > 0) {
      --impl_->failures;
      res.status = 503;
      res.set_content(R"({"error":"busy"})", "application/json");
      return;
    }
    const auto& info = impl_->model.info();
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("inputs") || !body["inputs"].is_array()) {
      res.status = 400;
      res.set_content(R"({"error":"body must be {\"inputs\": [[...], ...]}"})", "application/json");
      return;
    }
    const auto& rows = body["inputs"];
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(info.input_dim));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!rows[r].is_array() || rows[r].size() != info.input_dim) {
        res.status = 400;
        res.set_content(json{{"error", "row " + std::to_string(r) + " has wrong width"}}.dump(), "application/json");
        return;
      }
      for (std::size_t c = 0; c < info.input_dim; ++c) {
        x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
      }
    }
    const Matrix p = x.rows() > 0 ? impl_->model.predict_batch(x) : Matrix(0, static_cast<Eigen::Index>(info.n_classes));
    json out = json::array();
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const auto row = row_span(p, r);
      out.push_back(std::vector<double>(row.begin(), row.end()));
    }
    res.set_content(json{{"probabilities", out}}.dump(), "application/json");
  });
  port_ = s.bind_to_any_port("127.0.0.1");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

ClassifierServer::~ClassifierServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void ClassifierServer::fail_next(int count) { impl_->failures = count; }

std::size_t ClassifierServer::predict_requests() const { return impl_->requests; }

TempDir::TempDir() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  const auto base = std::filesystem::temp_directory_path();
  for (;;) {
    path_ = base / ("deepview-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    if (std::filesystem::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

int dead_port() {
  // Bound then closed without listening, so connections are refused.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof(addr);
  if (fd < 0 || ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw std::runtime_error("dead_port: cannot bind a probe socket");
  }
  ::close(fd);
  return ntohs(addr.sin_port);
}

TwoBlobFixture write_two_blob_fixture(const std::filesystem::path& dir) {
  BlobSpec spec;
  spec.dim = 8;
  spec.per_class = 30;
  spec.centers = axis_centers(2, 8, 6.0, 1.0);
  spec.noise = 0.6;
  spec.seed = 7;
  DatasetBundle raw = make_blobs(spec);
  std::vector<Record> records = raw.records();
  for (std::size_t i = 0; i + 1 < records.size(); ++i) records[i].text = "sentence number " + std::to_string(i);
  TwoBlobFixture fx{DatasetBundle(raw.embeddings(), std::move(records)),
                    nearest_center_softmax(spec.centers, 1.0), dir / "bundle.json", dir / "weights.json"};
  save_bundle(fx.bundle, fx.manifest);
  save_builtin(*fx.classifier, fx.weights);
  return fx;
}

}  // namespace deepview::testing
