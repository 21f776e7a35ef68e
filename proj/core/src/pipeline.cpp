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

#include "deepview/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "deepview/error.hpp"
#include "deepview/evalsuite.hpp"
#include "deepview/hash.hpp"
#include "io_util.hpp"

namespace deepview {

using nlohmann::json;

void RunConfig::validate() const {
  metric.validate();
  if (grid_width < 2 || grid_height < 2) throw ValidationError("grid resolution must be at least 2x2");
  if (!(margin >= 0.0) || !std::isfinite(margin)) throw ValidationError("margin must be non-negative");
  if (!(inverse_ridge >= 0.0) || !std::isfinite(inverse_ridge)) {
    throw ValidationError("inverse_ridge must be non-negative");
  }
  if (umap.n_epochs < 1) throw ValidationError("n_epochs must be >= 1");
}

namespace {

constexpr std::size_t kQknnNeighbors = 5;

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw_with_context(e, std::string("stage ") + name);
  }
}

Matrix predict_all(const Classifier& f, const Matrix& x, std::size_t batch_size) {
  Matrix out(x.rows(), static_cast<Eigen::Index>(f.info().n_classes));
  for (Eigen::Index start = 0; start < x.rows(); start += static_cast<Eigen::Index>(batch_size)) {
    const Eigen::Index len = std::min<Eigen::Index>(static_cast<Eigen::Index>(batch_size), x.rows() - start);
    out.middleRows(start, len) = f.predict_batch(x.middleRows(start, len));
  }
  return out;
}

bool needs_js(const DiscriminativeMetricConfig& m) { return m.lambda < 1.0 || m.normalize_components; }
bool needs_base(const DiscriminativeMetricConfig& m) { return m.lambda > 0.0 || m.normalize_components; }

void check_inputs(const DatasetBundle& bundle, const Classifier& f, const RunConfig& cfg) {
  cfg.validate();
  if (f.info().input_dim != bundle.dim()) {
    throw ValidationError("classifier input_dim " + std::to_string(f.info().input_dim) +
                          " does not match embedding width " + std::to_string(bundle.dim()));
  }
  if (bundle.size() <= kQknnNeighbors) {
    throw ValidationError("a run needs more than " + std::to_string(kQknnNeighbors) + " points");
  }
  cfg.umap.validate(bundle.size());
}

DeepViewRun finish_run(const DatasetBundle& bundle, const Classifier& f, const RunConfig& cfg,
                       DistanceMatrix dm, const ExecOptions& exec) {
  DeepViewRun run;
  run.distances = std::move(dm);

  UmapConfig umap = cfg.umap;
  umap.seed = cfg.seed;
  run.projection = stage("projection", [&] { return project(run.distances, umap); });
  run.inverse = stage("inverse", [&] {
    return fit_inverse(run.projection.coords, bundle.embeddings(), cfg.inverse_ridge, cfg.seed);
  });
  GridSpec spec;
  spec.width = cfg.grid_width;
  spec.height = cfg.grid_height;
  spec.margin = cfg.margin;
  const DecisionGrid grid = stage("grid", [&] {
    return sample_decision_grid(run.inverse, run.projection.coords, f, spec);
  });

  const Matrix probs = stage("predict", [&] { return predict_all(f, bundle.embeddings(), exec.batch_size); });
  run.predicted = stage("predict", [&] { return f.predict_labels(bundle.embeddings()); });

  VisPayload& p = run.payload;
  p.grid = grid;
  p.class_names = f.info().class_names;
  p.config = cfg;
  p.config.umap.seed = cfg.seed;
  p.classifier_hash = to_hex(f.identity_hash());
  p.bundle_hash = to_hex(bundle.content_hash());
  stage("metrics", [&] {
    p.q_knn_error = q_knn_error(run.projection.coords, run.predicted, kQknnNeighbors);
    p.q_data_error = q_data_error(grid, run.projection.coords, run.predicted);
    return 0;
  });

  const Matrix& xy = run.projection.coords;
  p.points.reserve(bundle.size());
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    PayloadPoint pt;
    pt.id = bundle.records()[i].id;
    pt.x = xy(r, 0);
    pt.y = xy(r, 1);
    pt.true_label = bundle.records()[i].label;
    pt.predicted = run.predicted[i];
    pt.prob_max = probs.row(r).maxCoeff();
    pt.mismatch = grid.labels[grid.containing_cell(pt.x, pt.y)] != pt.predicted;
    p.points.push_back(std::move(pt));
  }
  return run;
}

}  // namespace

DeepViewRun execute_run(const DatasetBundle& bundle, const Classifier& f, const RunConfig& cfg,
                        const ExecOptions& exec) {
  check_inputs(bundle, f, cfg);
  BuildOptions build;
  build.batch_size = exec.batch_size;
  build.threads = exec.threads;
  DistanceMatrix dm = stage("distance", [&] {
    if (exec.matrix_cache_dir) {
      if (auto cached = load_distance_cache(*exec.matrix_cache_dir, bundle.content_hash(),
                                            f.identity_hash(), cfg.metric)) {
        return std::move(*cached);
      }
    }
    const auto components = build_distance_components(bundle, f, cfg.metric.n_segments,
                                                       cfg.metric.base_metric, needs_js(cfg.metric),
                                                       needs_base(cfg.metric), build);
    auto built = mix_components(components, cfg.metric);
    if (exec.matrix_cache_dir) save_distance_cache(built, *exec.matrix_cache_dir);
    return built;
  });
  return finish_run(bundle, f, cfg, std::move(dm), exec);
}

VisPayload run_deepview(const DatasetBundle& bundle, const Classifier& f, const RunConfig& cfg,
                        const ExecOptions& exec) {
  return execute_run(bundle, f, cfg, exec).payload;
}

std::vector<SweepRow> sweep_lambda(const DatasetBundle& bundle, const Classifier& f,
                                   const RunConfig& cfg, const std::vector<double>& lambdas,
                                   const ExecOptions& exec, std::vector<VisPayload>* payloads) {
  if (lambdas.empty()) throw ValidationError("lambda list is empty");
  bool js = false, base = false;
  for (double l : lambdas) {
    RunConfig c = cfg;
    c.metric.lambda = l;
    try {
      check_inputs(bundle, f, c);
    } catch (const Error& e) {
      throw_with_context(e, "lambda " + std::to_string(l));
    }
    js = js || needs_js(c.metric);
    base = base || needs_base(c.metric);
  }
  BuildOptions build;
  build.batch_size = exec.batch_size;
  build.threads = exec.threads;
  const auto components = stage("distance", [&] {
    return build_distance_components(bundle, f, cfg.metric.n_segments, cfg.metric.base_metric, js,
                                     base, build);
  });

  std::vector<SweepRow> rows;
  for (double l : lambdas) {
    RunConfig c = cfg;
    c.metric.lambda = l;
    try {
      auto run = finish_run(bundle, f, c, mix_components(components, c.metric), exec);
      rows.push_back({l, run.payload.q_knn_error, run.payload.q_data_error});
      if (payloads) payloads->push_back(std::move(run.payload));
    } catch (const Error& e) {
      throw_with_context(e, "lambda " + std::to_string(l));
    }
  }
  return rows;
}

std::vector<bool> recompute_mismatch(const VisPayload& payload) {
  std::vector<bool> out;
  out.reserve(payload.points.size());
  for (const auto& pt : payload.points) {
    out.push_back(payload.grid.labels[payload.grid.containing_cell(pt.x, pt.y)] != pt.predicted);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json config_to_json(const RunConfig& cfg) {
  return {{"lambda", cfg.metric.lambda},
          {"n_segments", cfg.metric.n_segments},
          {"base_metric", to_string(cfg.metric.base_metric)},
          {"normalize_components", cfg.metric.normalize_components},
          {"umap",
           {{"n_neighbors", cfg.umap.n_neighbors},
            {"min_dist", cfg.umap.min_dist},
            {"spread", cfg.umap.spread},
            {"n_epochs", cfg.umap.n_epochs},
            {"negative_samples", cfg.umap.negative_samples},
            {"learning_rate", cfg.umap.learning_rate},
            {"repulsion_strength", cfg.umap.repulsion_strength},
            {"init", to_string(cfg.umap.init)}}},
          {"grid", {{"width", cfg.grid_width}, {"height", cfg.grid_height}}},
          {"margin", cfg.margin},
          {"inverse_ridge", cfg.inverse_ridge},
          {"seed", cfg.seed}};
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.contains(key)) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_number(const json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if constexpr (std::is_floating_point_v<T>) {
    if (!it->is_number()) throw ValidationError(std::string("'") + key + "' must be a number");
  } else {
    const bool ok = std::is_unsigned_v<T> ? it->is_number_unsigned() : it->is_number_integer();
    if (!ok) throw ValidationError(std::string("'") + key + "' must be an integer");
  }
  out = it->get<T>();
}

RunConfig config_from_json(const json& j, RunConfig cfg) {
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  reject_unknown(j, {"lambda", "n_segments", "base_metric", "normalize_components", "umap", "grid",
                     "margin", "inverse_ridge", "seed"},
                 "run config");
  read_number(j, "lambda", cfg.metric.lambda);
  read_number(j, "n_segments", cfg.metric.n_segments);
  if (j.contains("base_metric")) {
    if (!j["base_metric"].is_string()) throw ValidationError("'base_metric' must be a string");
    cfg.metric.base_metric = parse_base_metric(j["base_metric"].get<std::string>());
  }
  if (j.contains("normalize_components")) {
    if (!j["normalize_components"].is_boolean()) throw ValidationError("'normalize_components' must be a boolean");
    cfg.metric.normalize_components = j["normalize_components"].get<bool>();
  }
  if (j.contains("umap")) {
    const auto& u = j["umap"];
    if (!u.is_object()) throw ValidationError("'umap' must be an object");
    reject_unknown(u, {"n_neighbors", "min_dist", "spread", "n_epochs", "negative_samples",
                       "learning_rate", "repulsion_strength", "init", "seed"},
                   "umap config");
    read_number(u, "n_neighbors", cfg.umap.n_neighbors);
    read_number(u, "min_dist", cfg.umap.min_dist);
    read_number(u, "spread", cfg.umap.spread);
    read_number(u, "n_epochs", cfg.umap.n_epochs);
    read_number(u, "negative_samples", cfg.umap.negative_samples);
    read_number(u, "learning_rate", cfg.umap.learning_rate);
    read_number(u, "repulsion_strength", cfg.umap.repulsion_strength);
    if (u.contains("init")) {
      if (!u["init"].is_string()) throw ValidationError("'init' must be a string");
      cfg.umap.init = parse_init_method(u["init"].get<std::string>());
    }
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (!g.is_object()) throw ValidationError("'grid' must be an object");
    reject_unknown(g, {"width", "height"}, "grid config");
    read_number(g, "width", cfg.grid_width);
    read_number(g, "height", cfg.grid_height);
  }
  read_number(j, "margin", cfg.margin);
  read_number(j, "inverse_ridge", cfg.inverse_ridge);
  read_number(j, "seed", cfg.seed);
  cfg.umap.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

const json& require(const json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) throw ValidationError("payload " + where + " missing '" + key + "'");
  return *it;
}

double require_number(const json& j, const char* key, const std::string& where) {
  const auto& v = require(j, key, where);
  if (!v.is_number()) throw ValidationError("payload " + where + "." + key + " must be a number");
  return v.get<double>();
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) { return config_to_json(cfg).dump(); }

RunConfig run_config_from_json(const std::string& text, const RunConfig& base) {
  return config_from_json(detail::parse_json(text, "run config"), base);
}

std::string payload_to_json(const VisPayload& p) {
  json points = json::array();
  for (const auto& pt : p.points) {
    json jp = {{"id", pt.id},           {"x", pt.x},
               {"y", pt.y},             {"predicted", pt.predicted},
               {"prob_max", pt.prob_max}, {"mismatch", pt.mismatch}};
    if (pt.true_label) jp["true_label"] = *pt.true_label;
    points.push_back(std::move(jp));
  }
  const json grid = {{"x0", p.grid.x0},         {"y0", p.grid.y0},
                     {"dx", p.grid.dx},         {"dy", p.grid.dy},
                     {"width", p.grid.width},   {"height", p.grid.height},
                     {"labels", p.grid.labels}, {"certainty", p.grid.certainty}};
  const json doc = {{"points", std::move(points)},
                    {"grid", grid},
                    {"class_names", p.class_names},
                    {"metrics", {{"q_knn_error", p.q_knn_error}, {"q_data_error", p.q_data_error}}},
                    {"provenance",
                     {{"run_config", config_to_json(p.config)},
                      {"classifier_hash", p.classifier_hash},
                      {"bundle_hash", p.bundle_hash}}}};
  return doc.dump() + "\n";
}

VisPayload payload_from_json(const std::string& text) {
  const json doc = detail::parse_json(text, "payload");
  if (!doc.is_object()) throw ValidationError("payload must be a JSON object");
  VisPayload p;

  const auto& names = require(doc, "class_names", "root");
  if (!names.is_array() || names.size() < 2) throw ValidationError("payload class_names must list >= 2 classes");
  for (const auto& n : names) {
    if (!n.is_string()) throw ValidationError("payload class_names must be strings");
    p.class_names.push_back(n.get<std::string>());
  }
  const int n_classes = static_cast<int>(p.class_names.size());

  const auto& g = require(doc, "grid", "root");
  if (!g.is_object()) throw ValidationError("payload grid must be an object");
  p.grid.x0 = require_number(g, "x0", "grid");
  p.grid.y0 = require_number(g, "y0", "grid");
  p.grid.dx = require_number(g, "dx", "grid");
  p.grid.dy = require_number(g, "dy", "grid");
  const auto& w = require(g, "width", "grid");
  const auto& h = require(g, "height", "grid");
  if (!w.is_number_unsigned() || !h.is_number_unsigned() || w.get<std::size_t>() == 0 || h.get<std::size_t>() == 0) {
    throw ValidationError("payload grid width/height must be positive integers");
  }
  if (!(p.grid.dx > 0.0) || !(p.grid.dy > 0.0)) throw ValidationError("payload grid cell size must be positive");
  p.grid.width = w.get<std::size_t>();
  p.grid.height = h.get<std::size_t>();
  const auto& labels = require(g, "labels", "grid");
  const auto& certainty = require(g, "certainty", "grid");
  if (!labels.is_array() || !certainty.is_array() || labels.size() != p.grid.cell_count() ||
      certainty.size() != p.grid.cell_count()) {
    throw ValidationError("payload grid labels/certainty must have width*height entries");
  }
  for (const auto& l : labels) {
    if (!l.is_number_integer() || l.get<int>() < 0 || l.get<int>() >= n_classes) {
      throw ValidationError("payload grid label out of range");
    }
    p.grid.labels.push_back(l.get<int>());
  }
  for (const auto& c : certainty) {
    if (!c.is_number() || c.get<double>() < 0.0 || c.get<double>() > 1.0) {
      throw ValidationError("payload grid certainty must lie in [0, 1]");
    }
    p.grid.certainty.push_back(c.get<double>());
  }

  const auto& pts = require(doc, "points", "root");
  if (!pts.is_array()) throw ValidationError("payload points must be an array");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& jp = pts[i];
    const auto where = "points[" + std::to_string(i) + "]";
    if (!jp.is_object()) throw ValidationError("payload " + where + " must be an object");
    PayloadPoint pt;
    const auto& id = require(jp, "id", where);
    if (!id.is_string()) throw ValidationError("payload " + where + ".id must be a string");
    pt.id = id.get<std::string>();
    pt.x = require_number(jp, "x", where);
    pt.y = require_number(jp, "y", where);
    pt.prob_max = require_number(jp, "prob_max", where);
    const auto& pred = require(jp, "predicted", where);
    if (!pred.is_number_integer() || pred.get<int>() < 0 || pred.get<int>() >= n_classes) {
      throw ValidationError("payload " + where + ".predicted out of range");
    }
    pt.predicted = pred.get<int>();
    if (jp.contains("true_label")) {
      const auto& t = jp["true_label"];
      if (!t.is_number_integer() || t.get<int>() < 0) {
        throw ValidationError("payload " + where + ".true_label must be a class index");
      }
      pt.true_label = t.get<int>();
    }
    const auto& mm = require(jp, "mismatch", where);
    if (!mm.is_boolean()) throw ValidationError("payload " + where + ".mismatch must be a boolean");
    pt.mismatch = mm.get<bool>();
    p.points.push_back(std::move(pt));
  }

  const auto& metrics = require(doc, "metrics", "root");
  if (!metrics.is_object()) throw ValidationError("payload metrics must be an object");
  p.q_knn_error = require_number(metrics, "q_knn_error", "metrics");
  p.q_data_error = require_number(metrics, "q_data_error", "metrics");
  for (double q : {p.q_knn_error, p.q_data_error}) {
    if (q < 0.0 || q > 1.0) throw ValidationError("payload metrics must lie in [0, 1]");
  }

  const auto& prov = require(doc, "provenance", "root");
  if (!prov.is_object()) throw ValidationError("payload provenance must be an object");
  p.config = config_from_json(require(prov, "run_config", "provenance"), RunConfig{});
  const auto& ch = require(prov, "classifier_hash", "provenance");
  const auto& bh = require(prov, "bundle_hash", "provenance");
  if (!ch.is_string() || !bh.is_string()) throw ValidationError("payload provenance hashes must be strings");
  p.classifier_hash = ch.get<std::string>();
  p.bundle_hash = bh.get<std::string>();
  return p;
}

}  // namespace deepview
