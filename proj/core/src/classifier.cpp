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

#include "deepview/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <httplib.h>
#include <json.hpp>

#include "deepview/error.hpp"
#include "deepview/hash.hpp"
#include "io_util.hpp"

namespace deepview {

using nlohmann::json;

namespace {

void hash_double(Fnv1a& h, double v) { h.update(std::bit_cast<std::uint64_t>(v)); }

std::vector<std::string> default_class_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < n; ++c) names.push_back("class_" + std::to_string(c));
  return names;
}

}  // namespace

// ---------------------------------------------------------------------------

Matrix Classifier::predict_batch(const Matrix& inputs) const {
  const auto& meta = info();
  if (static_cast<std::size_t>(inputs.cols()) != meta.input_dim) {
    throw ValidationError("input width " + std::to_string(inputs.cols()) +
                          " does not match classifier input_dim " +
                          std::to_string(meta.input_dim));
  }
  if (!inputs.allFinite()) throw ValidationError("classifier inputs contain non-finite values");
  if (inputs.rows() == 0) return Matrix(0, static_cast<Eigen::Index>(meta.n_classes));

  Matrix probs = predict_raw(inputs);
  if (probs.rows() != inputs.rows() ||
      static_cast<std::size_t>(probs.cols()) != meta.n_classes) {
    throw ValidationError("classifier returned a " + std::to_string(probs.rows()) + "x" +
                          std::to_string(probs.cols()) + " result for " +
                          std::to_string(inputs.rows()) + " inputs");
  }
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      double& p = probs(r, c);
      if (!std::isfinite(p) || p < -1e-9) {
        throw ValidationError("classifier returned an invalid probability in row " +
                              std::to_string(r));
      }
      p = std::max(p, 0.0);
      sum += p;
    }
    if (!(sum > 0.0)) {
      throw ValidationError("classifier returned an all-zero row " + std::to_string(r));
    }
    if (std::abs(sum - 1.0) > 1e-12) probs.row(r) /= sum;
  }
  return probs;
}

std::vector<int> Classifier::predict_labels(const Matrix& inputs) const {
  const Matrix probs = predict_batch(inputs);
  std::vector<int> labels(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) labels[static_cast<std::size_t>(r)] = argmax_row(probs, r);
  return labels;
}

int argmax_row(const Matrix& probs, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < probs.cols(); ++c) {
    if (probs(row, c) > probs(row, best)) best = c;
  }
  return static_cast<int>(best);
}

// ---------------------------------------------------------------------------
// MlpClassifier

MlpClassifier::MlpClassifier(std::vector<DenseLayer> layers,
                             std::vector<std::string> class_names)
    : layers_(std::move(layers)) {
  if (layers_.empty()) throw ValidationError("network has no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    const auto where = "layer " + std::to_string(i + 1);
    if (layer.weights.rows() == 0 || layer.weights.cols() == 0) {
      throw ValidationError(where + ": empty weight matrix");
    }
    if (layer.bias.size() != layer.weights.rows()) {
      throw ValidationError(where + ": bias length " + std::to_string(layer.bias.size()) +
                            " does not match output width " +
                            std::to_string(layer.weights.rows()));
    }
    if (i > 0 && layer.weights.cols() != layers_[i - 1].weights.rows()) {
      throw ValidationError(where + ": input width " + std::to_string(layer.weights.cols()) +
                            " does not match previous output width " +
                            std::to_string(layers_[i - 1].weights.rows()));
    }
    if (layer.activation == Activation::softmax && i + 1 != layers_.size()) {
      throw ValidationError(where + ": softmax is only allowed on the final layer");
    }
    if (layer.activation != Activation::softmax && i + 1 == layers_.size()) {
      throw ValidationError(where + ": the final layer must use softmax");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw ValidationError(where + ": non-finite parameters");
    }
  }
  info_.input_dim = static_cast<std::size_t>(layers_.front().weights.cols());
  info_.n_classes = static_cast<std::size_t>(layers_.back().weights.rows());
  if (info_.n_classes < 2) throw ValidationError("network must output at least 2 classes");
  info_.class_names = class_names.empty() ? default_class_names(info_.n_classes)
                                          : std::move(class_names);
  if (info_.class_names.size() != info_.n_classes) {
    throw ValidationError("class_names has " + std::to_string(info_.class_names.size()) +
                          " entries, network outputs " + std::to_string(info_.n_classes));
  }

  Fnv1a h;
  h.update("mlp");
  for (const auto& layer : layers_) {
    h.update(static_cast<std::uint64_t>(layer.weights.rows()))
        .update(static_cast<std::uint64_t>(layer.weights.cols()))
        .update(static_cast<std::uint64_t>(layer.activation));
    for (Eigen::Index k = 0; k < layer.weights.size(); ++k) hash_double(h, layer.weights.data()[k]);
    for (Eigen::Index k = 0; k < layer.bias.size(); ++k) hash_double(h, layer.bias[k]);
  }
  for (const auto& name : info_.class_names) h.update(name).update(std::uint64_t{0});
  hash_ = h.digest();
}

Matrix MlpClassifier::predict_raw(const Matrix& inputs) const {
  // Plain loops with a fixed summation order keep rows batch-independent.
  Matrix out(inputs.rows(), static_cast<Eigen::Index>(info_.n_classes));
  std::vector<double> current, next;
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    const auto row = row_span(inputs, r);
    current.assign(row.begin(), row.end());
    for (const auto& layer : layers_) {
      const Eigen::Index n_out = layer.weights.rows();
      const Eigen::Index n_in = layer.weights.cols();
      next.assign(static_cast<std::size_t>(n_out), 0.0);
      for (Eigen::Index o = 0; o < n_out; ++o) {
        double acc = layer.bias[o];
        const double* w = layer.weights.data() + o * n_in;
        for (Eigen::Index i = 0; i < n_in; ++i) acc += w[i] * current[static_cast<std::size_t>(i)];
        next[static_cast<std::size_t>(o)] = acc;
      }
      switch (layer.activation) {
        case Activation::identity:
          break;
        case Activation::relu:
          for (double& v : next) v = std::max(v, 0.0);
          break;
        case Activation::softmax: {
          const double peak = *std::max_element(next.begin(), next.end());
          double total = 0.0;
          for (double& v : next) {
            v = std::exp(v - peak);
            total += v;
          }
          for (double& v : next) v /= total;
          break;
        }
      }
      current.swap(next);
    }
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = current[static_cast<std::size_t>(c)];
  }
  return out;
}

namespace {

Activation parse_activation(const json& j, std::size_t layer) {
  const std::string name = j.is_string() ? j.get<std::string>() : "";
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "softmax") return Activation::softmax;
  throw ValidationError("layer " + std::to_string(layer) + ": unknown activation '" + name + "'");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

}  // namespace

std::unique_ptr<MlpClassifier> load_builtin(const std::filesystem::path& weights_path) {
  if (!std::filesystem::exists(weights_path)) {
    throw IoError("weights file not found: '" + weights_path.string() + "'");
  }
  const json doc = detail::parse_json(detail::read_text_file(weights_path), weights_path.string());
  if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array()) {
    throw ValidationError("weights file must be an object with a 'layers' array");
  }
  std::vector<DenseLayer> layers;
  std::size_t index = 0;
  for (const auto& jl : doc["layers"]) {
    ++index;
    const auto where = "layer " + std::to_string(index);
    if (!jl.is_object() || !jl.contains("weights") || !jl["weights"].is_array() ||
        !jl.contains("bias") || !jl["bias"].is_array()) {
      throw ValidationError(where + ": needs 'weights' and 'bias' arrays");
    }
    const auto& jw = jl["weights"];
    const auto rows = jw.size();
    const auto cols = rows ? jw[0].size() : 0;
    DenseLayer layer;
    layer.weights.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t o = 0; o < rows; ++o) {
      if (!jw[o].is_array() || jw[o].size() != cols) {
        throw ValidationError(where + ": ragged weight matrix at row " + std::to_string(o));
      }
      for (std::size_t i = 0; i < cols; ++i) {
        if (!jw[o][i].is_number()) throw ValidationError(where + ": non-numeric weight");
        layer.weights(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) = jw[o][i].get<double>();
      }
    }
    const auto& jb = jl["bias"];
    layer.bias.resize(static_cast<Eigen::Index>(jb.size()));
    for (std::size_t o = 0; o < jb.size(); ++o) {
      if (!jb[o].is_number()) throw ValidationError(where + ": non-numeric bias");
      layer.bias[static_cast<Eigen::Index>(o)] = jb[o].get<double>();
    }
    layer.activation = parse_activation(jl.value("activation", json("identity")), index);
    layers.push_back(std::move(layer));
  }
  std::vector<std::string> names;
  if (doc.contains("class_names")) {
    if (!doc["class_names"].is_array()) throw ValidationError("'class_names' must be an array");
    for (const auto& n : doc["class_names"]) {
      if (!n.is_string()) throw ValidationError("'class_names' entries must be strings");
      names.push_back(n.get<std::string>());
    }
  }
  auto model = std::make_unique<MlpClassifier>(std::move(layers), std::move(names));
  if (doc.contains("input_dim")) {
    if (!doc["input_dim"].is_number_integer() ||
        doc["input_dim"].get<std::size_t>() != model->info().input_dim) {
      throw ValidationError("declared input_dim does not match layer 1 input width " +
                            std::to_string(model->info().input_dim));
    }
  }
  return model;
}

void save_builtin(const MlpClassifier& model, const std::filesystem::path& weights_path) {
  json doc;
  doc["input_dim"] = model.info().input_dim;
  doc["class_names"] = model.info().class_names;
  json layers = json::array();
  for (const auto& layer : model.layers()) {
    json jw = json::array();
    for (Eigen::Index o = 0; o < layer.weights.rows(); ++o) {
      json row = json::array();
      for (Eigen::Index i = 0; i < layer.weights.cols(); ++i) row.push_back(layer.weights(o, i));
      jw.push_back(std::move(row));
    }
    json jb = json::array();
    for (Eigen::Index o = 0; o < layer.bias.size(); ++o) jb.push_back(layer.bias[o]);
    layers.push_back({{"weights", std::move(jw)},
                      {"bias", std::move(jb)},
                      {"activation", activation_name(layer.activation)}});
  }
  doc["layers"] = std::move(layers);
  detail::write_text_file(weights_path, doc.dump() + "\n");
}

// ---------------------------------------------------------------------------
// KnnClassifier

KnnClassifier::KnnClassifier(Matrix reference_points, std::vector<int> reference_labels,
                             std::size_t k, std::vector<std::string> class_names)
    : reference_(std::move(reference_points)), labels_(std::move(reference_labels)), k_(k) {
  const auto m = static_cast<std::size_t>(reference_.rows());
  if (labels_.size() != m) throw ValidationError("kNN: label count does not match reference rows");
  if (k_ == 0) throw ValidationError("kNN: k must be positive");
  if (k_ > m) {
    throw ValidationError("kNN: k=" + std::to_string(k_) + " exceeds reference size " +
                          std::to_string(m));
  }
  if (class_names.size() < 2) throw ValidationError("kNN: need at least 2 classes");
  for (int l : labels_) {
    if (l < 0 || static_cast<std::size_t>(l) >= class_names.size()) {
      throw ValidationError("kNN: label " + std::to_string(l) + " out of range");
    }
  }
  info_.input_dim = static_cast<std::size_t>(reference_.cols());
  info_.n_classes = class_names.size();
  info_.class_names = std::move(class_names);

  Fnv1a h;
  h.update("knn").update(std::uint64_t{k_}).update(std::uint64_t{m});
  for (Eigen::Index i = 0; i < reference_.size(); ++i) hash_double(h, reference_.data()[i]);
  for (int l : labels_) h.update(static_cast<std::uint64_t>(l));
  for (const auto& name : info_.class_names) h.update(name).update(std::uint64_t{0});
  hash_ = h.digest();
}

std::vector<std::size_t> KnnClassifier::neighbors(std::span<const double> query) const {
  const auto m = static_cast<std::size_t>(reference_.rows());
  std::vector<std::pair<double, std::size_t>> dist(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto ref = row_span(reference_, static_cast<Eigen::Index>(j));
    double acc = 0.0;
    for (std::size_t c = 0; c < ref.size(); ++c) {
      const double d = ref[c] - query[c];
      acc += d * d;
    }
    dist[j] = {acc, j};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
  std::vector<std::size_t> out(k_);
  for (std::size_t i = 0; i < k_; ++i) out[i] = dist[i].second;
  return out;
}

Matrix KnnClassifier::predict_raw(const Matrix& inputs) const {
  Matrix out = Matrix::Zero(inputs.rows(), static_cast<Eigen::Index>(info_.n_classes));
  const double share = 1.0 / static_cast<double>(k_);
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    std::vector<int> votes(info_.n_classes, 0);
    for (auto j : neighbors(row_span(inputs, r))) ++votes[static_cast<std::size_t>(labels_[j])];
    for (std::size_t c = 0; c < votes.size(); ++c) {
      out(r, static_cast<Eigen::Index>(c)) = votes[c] * share;
    }
  }
  return out;
}

std::vector<int> KnnClassifier::predict_labels(const Matrix& inputs) const {
  if (static_cast<std::size_t>(inputs.cols()) != info_.input_dim) {
    throw ValidationError("input width does not match kNN reference width");
  }
  std::vector<int> out(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    const auto nn = neighbors(row_span(inputs, r));
    std::vector<int> votes(info_.n_classes, 0);
    for (auto j : nn) ++votes[static_cast<std::size_t>(labels_[j])];
    const int top = *std::max_element(votes.begin(), votes.end());
    for (auto j : nn) {
      if (votes[static_cast<std::size_t>(labels_[j])] == top) {
        out[static_cast<std::size_t>(r)] = labels_[j];
        break;
      }
    }
  }
  return out;
}

std::vector<int> bundle_labels(const DatasetBundle& bundle, LabelSource source,
                               std::vector<std::string>* class_names) {
  std::vector<int> labels;
  labels.reserve(bundle.size());
  const auto& records = bundle.records();
  if (source == LabelSource::true_label) {
    int max_label = 1;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!records[i].label) {
        throw ValidationError("record '" + records[i].id + "' (row " + std::to_string(i) +
                              ") has no label");
      }
      labels.push_back(*records[i].label);
      max_label = std::max(max_label, *records[i].label);
    }
    if (class_names) {
      class_names->clear();
      for (int c = 0; c <= max_label; ++c) class_names->push_back(std::to_string(c));
    }
    return labels;
  }
  std::set<std::string> tags;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].dataset_tag) {
      throw ValidationError("record '" + records[i].id + "' (row " + std::to_string(i) +
                            ") has no dataset_tag");
    }
    tags.insert(*records[i].dataset_tag);
  }
  std::map<std::string, int> index;
  for (const auto& t : tags) index.emplace(t, static_cast<int>(index.size()));
  for (const auto& r : records) labels.push_back(index.at(*r.dataset_tag));
  if (class_names) class_names->assign(tags.begin(), tags.end());
  return labels;
}

std::unique_ptr<KnnClassifier> fit_knn(const DatasetBundle& bundle, LabelSource source,
                                       std::size_t k) {
  std::vector<std::string> names;
  auto labels = bundle_labels(bundle, source, &names);
  if (names.size() < 2) names.push_back("class_" + std::to_string(names.size()));
  return std::make_unique<KnnClassifier>(bundle.embeddings(), std::move(labels), k,
                                         std::move(names));
}

// ---------------------------------------------------------------------------
// RemoteClassifier

namespace {

httplib::Client make_client(const std::string& base_url, double timeout) {
  httplib::Client client(base_url);
  const auto secs = static_cast<time_t>(timeout);
  const auto usecs = static_cast<time_t>((timeout - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  return client;
}

}  // namespace

RemoteClassifier::RemoteClassifier(std::string base_url, RemoteOptions options)
    : base_url_(std::move(base_url)), options_(options) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  auto client = make_client(base_url_, options_.timeout_seconds);
  httplib::Result res;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    res = client.Get("/v1/info");
    if (res) break;
  }
  if (!res) {
    throw TransportError("GET " + base_url_ + "/v1/info failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("GET " + base_url_ + "/v1/info returned HTTP " +
                         std::to_string(res->status));
  }
  json doc;
  try {
    doc = json::parse(res->body);
    info_.input_dim = doc.at("input_dim").get<std::size_t>();
    info_.n_classes = doc.at("n_classes").get<std::size_t>();
    if (doc.contains("class_names")) {
      info_.class_names = doc["class_names"].get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw TransportError("malformed /v1/info response from " + base_url_ + ": " + e.what());
  }
  if (info_.n_classes < 2) throw TransportError(base_url_ + " advertises fewer than 2 classes");
  if (info_.class_names.empty()) info_.class_names = default_class_names(info_.n_classes);
  if (info_.class_names.size() != info_.n_classes) {
    throw TransportError(base_url_ + " advertises mismatched class_names");
  }
  Fnv1a h;
  h.update("remote").update(base_url_).update(std::uint64_t{info_.input_dim});
  for (const auto& name : info_.class_names) h.update(name).update(std::uint64_t{0});
  hash_ = h.digest();
}

Matrix RemoteClassifier::predict_raw(const Matrix& inputs) const {
  json rows = json::array();
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    const auto row = row_span(inputs, r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  const std::string body = json{{"inputs", std::move(rows)}}.dump();

  auto client = make_client(base_url_, options_.timeout_seconds);
  httplib::Result res;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    res = client.Post("/v1/predict", body, "application/json");
    if (res && res->status < 500) break;
  }
  const std::string endpoint = "POST " + base_url_ + "/v1/predict";
  if (!res) throw TransportError(endpoint + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw TransportError(endpoint + " returned HTTP " + std::to_string(res->status));
  }
  Matrix out(inputs.rows(), static_cast<Eigen::Index>(info_.n_classes));
  try {
    const json doc = json::parse(res->body);
    const auto& probs = doc.at("probabilities");
    if (!probs.is_array() || probs.size() != static_cast<std::size_t>(inputs.rows())) {
      throw TransportError(endpoint + " returned " + std::to_string(probs.size()) +
                           " rows for " + std::to_string(inputs.rows()) + " inputs");
    }
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const auto& row = probs[static_cast<std::size_t>(r)];
      if (!row.is_array() || row.size() != info_.n_classes) {
        throw TransportError(endpoint + " returned a malformed row " + std::to_string(r));
      }
      for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  } catch (const json::exception& e) {
    throw TransportError(endpoint + " returned malformed JSON: " + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Classifier> make_classifier(const std::string& spec, const DatasetBundle& bundle,
                                            RemoteOptions remote) {
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
    return std::make_unique<RemoteClassifier>(spec, remote);
  }
  if (spec == "knn" || spec.rfind("knn:", 0) == 0) {
    LabelSource source = LabelSource::true_label;
    std::size_t k = 5;
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= spec.size()) {
      const auto colon = spec.find(':', start);
      parts.push_back(spec.substr(start, colon == std::string::npos ? std::string::npos : colon - start));
      if (colon == std::string::npos) break;
      start = colon + 1;
    }
    if (parts.size() > 3) throw ValidationError("bad kNN spec '" + spec + "'");
    if (parts.size() >= 2) {
      if (parts[1] == "true_label") {
        source = LabelSource::true_label;
      } else if (parts[1] == "dataset_tag") {
        source = LabelSource::dataset_tag;
      } else {
        throw ValidationError("bad kNN label source '" + parts[1] + "'");
      }
    }
    if (parts.size() == 3) {
      try {
        std::size_t used = 0;
        const long v = std::stol(parts[2], &used);
        if (used != parts[2].size() || v <= 0) throw std::invalid_argument(parts[2]);
        k = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        throw ValidationError("bad kNN k '" + parts[2] + "'");
      }
    }
    return fit_knn(bundle, source, k);
  }
  return load_builtin(spec);
}

}  // namespace deepview
