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

#include "deepview/cli.hpp"

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deepview/classifier.hpp"
#include "deepview/dataset.hpp"
#include "deepview/error.hpp"
#include "deepview/evalsuite.hpp"
#include "deepview/hash.hpp"
#include "deepview/pipeline.hpp"
#include "deepview/render.hpp"
#include "deepview/service.hpp"

namespace deepview {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << content;
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used_w = 0, used_h = 0;
    const auto w = std::stoul(s.substr(0, x), &used_w);
    const auto h = std::stoul(s.substr(x + 1), &used_h);
    if (used_w != x || used_h != s.size() - x - 1 || w == 0 || h == 0) throw std::invalid_argument(s);
    return {w, h};
  } catch (const std::exception&) {
    throw ValidationError("--grid expects WxH with positive integers, got '" + s + "'");
  }
}

std::vector<double> parse_lambdas(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ValidationError("bad lambda value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty lambda list");
  return out;
}

LabelSource parse_label_source(const std::string& s) {
  if (s == "true_label") return LabelSource::true_label;
  if (s == "dataset_tag") return LabelSource::dataset_tag;
  throw ValidationError("unknown label source '" + s + "' (expected true_label or dataset_tag)");
}

// Options shared by project and sweep.
struct RunFlags {
  std::string bundle;
  std::string classifier;
  std::string config_file;
  double lambda = 1.0;
  int segments = 5;
  std::string base_metric = "cosine";
  bool normalize = false;
  std::string grid = "100x100";
  std::uint64_t seed = 0;
  int neighbors = 15;
  int epochs = 500;
  double min_dist = 0.1;
  double ridge = 1e-3;
  std::size_t sample = 0;
  std::uint64_t sample_seed = 0;
  std::size_t batch_size = 256;
  unsigned threads = 1;
  std::string cache_dir;
  double timeout = 30.0;
  int retries = 3;

  CLI::Option* lambda_opt = nullptr;
  CLI::Option* segments_opt = nullptr;
  CLI::Option* metric_opt = nullptr;
  CLI::Option* normalize_opt = nullptr;
  CLI::Option* grid_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* neighbors_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* min_dist_opt = nullptr;
  CLI::Option* ridge_opt = nullptr;

  void attach(CLI::App* cmd, bool with_lambda) {
    cmd->add_option("--bundle", bundle, "Dataset bundle manifest")->required()->envname("DEEPVIEW_BUNDLE");
    cmd->add_option("--classifier", classifier, "Builtin weights path, http(s) URL or knn[:source[:k]]")
        ->required()
        ->envname("DEEPVIEW_CLASSIFIER");
    cmd->add_option("--config", config_file, "RunConfig JSON; flags override its fields")
        ->envname("DEEPVIEW_CONFIG");
    if (with_lambda) {
      lambda_opt = cmd->add_option("--lambda", lambda, "Weight of the unsupervised metric")
                       ->envname("DEEPVIEW_LAMBDA");
    }
    segments_opt = cmd->add_option("--segments", segments, "Segments per arc")->envname("DEEPVIEW_SEGMENTS");
    metric_opt = cmd->add_option("--base-metric", base_metric, "cosine or euclidean")
                     ->envname("DEEPVIEW_BASE_METRIC");
    normalize_opt = cmd->add_flag("--normalize-components", normalize, "Scale each component by its mean")
                        ->envname("DEEPVIEW_NORMALIZE_COMPONENTS");
    grid_opt = cmd->add_option("--grid", grid, "Decision grid size WxH")->envname("DEEPVIEW_GRID");
    seed_opt = cmd->add_option("--seed", seed, "Seed for layout and inverse map")->envname("DEEPVIEW_SEED");
    neighbors_opt = cmd->add_option("--neighbors", neighbors, "UMAP n_neighbors")->envname("DEEPVIEW_NEIGHBORS");
    epochs_opt = cmd->add_option("--epochs", epochs, "UMAP epochs")->envname("DEEPVIEW_EPOCHS");
    min_dist_opt = cmd->add_option("--min-dist", min_dist, "UMAP min_dist")->envname("DEEPVIEW_MIN_DIST");
    ridge_opt = cmd->add_option("--ridge", ridge, "Inverse map ridge")->envname("DEEPVIEW_RIDGE");
    cmd->add_option("--sample", sample, "Subsample this many points (0 = all)")->envname("DEEPVIEW_SAMPLE");
    cmd->add_option("--sample-seed", sample_seed, "Seed for --sample")->envname("DEEPVIEW_SAMPLE_SEED");
    cmd->add_option("--batch-size", batch_size, "Rows per classifier call")->envname("DEEPVIEW_BATCH_SIZE");
    cmd->add_option("--threads", threads, "Worker threads for the distance matrix")
        ->envname("DEEPVIEW_THREADS");
    cmd->add_option("--cache-dir", cache_dir, "Distance-matrix cache directory")->envname("DEEPVIEW_CACHE_DIR");
    cmd->add_option("--timeout", timeout, "Remote classifier timeout, seconds")->envname("DEEPVIEW_TIMEOUT");
    cmd->add_option("--retries", retries, "Remote classifier retries")->envname("DEEPVIEW_RETRIES");
  }

  RunConfig config() const {
    RunConfig cfg;
    if (!config_file.empty()) cfg = run_config_from_json(read_file(config_file));
    if (lambda_opt && lambda_opt->count()) cfg.metric.lambda = lambda;
    if (segments_opt->count()) cfg.metric.n_segments = segments;
    if (metric_opt->count()) cfg.metric.base_metric = parse_base_metric(base_metric);
    if (normalize_opt->count()) cfg.metric.normalize_components = normalize;
    if (grid_opt->count()) std::tie(cfg.grid_width, cfg.grid_height) = parse_grid(grid);
    if (seed_opt->count()) cfg.seed = seed;
    if (neighbors_opt->count()) cfg.umap.n_neighbors = neighbors;
    if (epochs_opt->count()) cfg.umap.n_epochs = epochs;
    if (min_dist_opt->count()) cfg.umap.min_dist = min_dist;
    if (ridge_opt->count()) cfg.inverse_ridge = ridge;
    cfg.umap.seed = cfg.seed;
    cfg.validate();
    return cfg;
  }

  ExecOptions exec() const {
    ExecOptions e;
    e.batch_size = batch_size;
    e.threads = threads;
    if (!cache_dir.empty()) e.matrix_cache_dir = cache_dir;
    return e;
  }

  DatasetBundle load() const {
    DatasetBundle b = load_bundle(bundle);
    if (sample > 0 && sample < b.size()) b = subsample(b, SampleSpec{sample, sample_seed});
    return b;
  }

  std::unique_ptr<Classifier> make(const DatasetBundle& b) const {
    RemoteOptions remote;
    remote.timeout_seconds = timeout;
    remote.max_retries = retries;
    return make_classifier(classifier, b, remote);
  }
};

std::string metrics_line(double q_knn, double q_data) {
  return "q_knn_error=" + fmt("%.4f", q_knn) + " q_data_error=" + fmt("%.4f", q_data) + "\n";
}

int cmd_project(const RunFlags& flags, const std::string& out_path, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = flags.config();
  const DatasetBundle bundle = flags.load();
  const auto f = flags.make(bundle);
  const VisPayload payload = run_deepview(bundle, *f, cfg, flags.exec());
  write_output(out_path, payload_to_json(payload), out);
  err << metrics_line(payload.q_knn_error, payload.q_data_error);
  return kExitOk;
}

int cmd_sweep(const RunFlags& flags, const std::string& lambdas_text, const std::string& out_path,
              std::ostream& out, std::ostream& err) {
  const std::vector<double> lambdas = parse_lambdas(lambdas_text);
  for (double l : lambdas) {
    DiscriminativeMetricConfig probe;
    probe.lambda = l;
    probe.validate();
  }
  const RunConfig cfg = flags.config();
  const DatasetBundle bundle = flags.load();
  const auto f = flags.make(bundle);
  const auto rows = sweep_lambda(bundle, *f, cfg, lambdas, flags.exec());

  json provenance = {{"run_config", json::parse(run_config_to_json(cfg))},
                     {"classifier_hash", to_hex(f->identity_hash())},
                     {"bundle_hash", to_hex(bundle.content_hash())},
                     {"n_points", bundle.size()}};
  std::string csv = "# provenance: " + provenance.dump() + "\n";
  csv += "lambda,q_knn_error,q_data_error\n";
  for (const auto& r : rows) {
    csv += json(r.lambda).dump() + "," + fmt("%.17g", r.q_knn_error) + "," + fmt("%.17g", r.q_data_error) + "\n";
    err << "lambda=" << json(r.lambda).dump() << " " << metrics_line(r.q_knn_error, r.q_data_error);
  }
  write_output(out_path, csv, out);
  return kExitOk;
}

VisPayload read_payload(const std::string& path) { return payload_from_json(read_file(path)); }

Matrix payload_coords(const VisPayload& p) {
  Matrix m(static_cast<Eigen::Index>(p.points.size()), 2);
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = p.points[i].x;
    m(static_cast<Eigen::Index>(i), 1) = p.points[i].y;
  }
  return m;
}

std::vector<std::string> payload_ids(const VisPayload& p) {
  std::vector<std::string> ids;
  for (const auto& pt : p.points) ids.push_back(pt.id);
  return ids;
}

std::vector<std::string> bundle_ids(const DatasetBundle& b) {
  std::vector<std::string> ids;
  for (const auto& r : b.records()) ids.push_back(r.id);
  return ids;
}

// Bundle rows reordered to follow `ids`.
Matrix aligned_embeddings(const DatasetBundle& b, const std::vector<std::string>& ids) {
  Matrix m(static_cast<Eigen::Index>(ids.size()), b.embeddings().cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto row = b.find(ids[i]);
    if (!row) throw ValidationError("point '" + ids[i] + "' is not in the bundle");
    m.row(static_cast<Eigen::Index>(i)) = b.embeddings().row(static_cast<Eigen::Index>(*row));
  }
  return m;
}

json provenance_of(const VisPayload& p) {
  return {{"run_config", json::parse(run_config_to_json(p.config))},
          {"classifier_hash", p.classifier_hash},
          {"bundle_hash", p.bundle_hash}};
}

int cmd_eval(const std::string& payload_path, const std::string& bundle_path, const std::string& curves_path,
             std::size_t k, const std::string& out_path, std::ostream& out) {
  const VisPayload p = read_payload(payload_path);
  const Matrix coords = payload_coords(p);
  std::vector<int> predicted;
  for (const auto& pt : p.points) predicted.push_back(pt.predicted);
  json result = {{"n_points", p.points.size()},
                 {"q_knn_error", q_knn_error(coords, predicted, k)},
                 {"q_data_error", q_data_error(p.grid, coords, predicted)},
                 {"provenance", provenance_of(p)}};
  if (!bundle_path.empty()) {
    const DatasetBundle b = load_bundle(bundle_path);
    const auto curves = neighborhood_curves(aligned_embeddings(b, payload_ids(p)), coords);
    result["neighborhood"] = {{"q_local", curves.q_local}, {"k_max", curves.k_max}, {"auc", curves.auc}};
    if (!curves_path.empty()) write_output(curves_path, curves_to_csv(curves), out);
  } else if (!curves_path.empty()) {
    throw ValidationError("--curves requires --bundle");
  }
  write_output(out_path, result.dump(2) + "\n", out);
  return kExitOk;
}

// A compare input is either a payload (2D coords) or a bundle manifest.
NamedRepresentation load_representation(const std::string& spec, std::vector<std::string>& ids) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("--input expects name=path, got '" + spec + "'");
  const std::string name = spec.substr(0, eq);
  const std::string path = spec.substr(eq + 1);
  const std::string text = read_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ValidationError("'" + path + "' is not JSON");
  if (j.is_object() && j.contains("points")) {
    const VisPayload p = payload_from_json(text);
    ids = payload_ids(p);
    return {name, payload_coords(p)};
  }
  const DatasetBundle b = load_bundle(path);
  ids = bundle_ids(b);
  return {name, b.embeddings()};
}

int cmd_compare(const std::vector<std::string>& inputs, const std::string& curves_dir,
                const std::string& out_path, std::ostream& out) {
  if (inputs.size() < 2) throw ValidationError("compare needs at least two --input");
  std::vector<NamedRepresentation> reps;
  std::vector<std::string> first_ids;
  for (const auto& spec : inputs) {
    std::vector<std::string> ids;
    reps.push_back(load_representation(spec, ids));
    if (reps.size() == 1) {
      first_ids = ids;
    } else if (ids != first_ids) {
      throw ValidationError("row misalignment: '" + reps.back().name + "' does not list the same ids in the same order as '" +
                            reps.front().name + "'");
    }
  }
  const Comparison cmp = compare_models(reps);
  if (!curves_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(curves_dir, ec);
    if (ec) throw IoError("cannot create '" + curves_dir + "': " + ec.message());
    for (std::size_t i = 0; i < cmp.rows.size(); ++i) {
      const auto file = std::filesystem::path(curves_dir) / (cmp.rows[i].first + "_vs_" + cmp.rows[i].second + ".csv");
      write_output(file.string(), curves_to_csv(cmp.curves[i]), out);
    }
  }
  json summary = json::parse(comparison_summary_json(cmp));
  json sources = json::array();
  for (const auto& spec : inputs) sources.push_back(spec);
  summary["provenance"] = {{"inputs", sources}, {"n_points", first_ids.size()}};
  write_output(out_path, summary.dump(2) + "\n", out);
  return kExitOk;
}

int cmd_confusion(const std::string& bundle_path, const std::string& source_name, std::size_t k,
                  const std::string& payload_path, const std::string& out_path, std::ostream& out,
                  std::ostream& err) {
  const DatasetBundle b = load_bundle(bundle_path);
  std::vector<std::string> names;
  const std::vector<int> labels = bundle_labels(b, parse_label_source(source_name), &names);
  Matrix points = b.embeddings();
  std::vector<int> truth = labels;
  json provenance = {{"bundle_hash", to_hex(b.content_hash())}, {"labels", source_name}, {"k", k}};
  if (!payload_path.empty()) {
    const VisPayload p = read_payload(payload_path);
    points = payload_coords(p);
    truth.clear();
    for (const auto& pt : p.points) {
      const auto row = b.find(pt.id);
      if (!row) throw ValidationError("point '" + pt.id + "' is not in the bundle");
      truth.push_back(labels[*row]);
    }
    provenance["space"] = "projection";
    provenance["payload"] = provenance_of(p);
  } else {
    provenance["space"] = "embedding";
  }
  if (points.rows() <= static_cast<Eigen::Index>(k)) throw ValidationError("confusion needs more than k points");
  const auto predicted = leave_one_out_knn(points, truth, k);
  const ConfusionMatrix cm = confusion_matrix(truth, predicted, names.size(), names);
  json result = json::parse(confusion_to_json(cm));
  const auto [t, pr] = largest_confusion(cm);
  result["largest_confusion"] = {{"true", names[t]}, {"predicted", names[pr]}, {"count", cm.counts[t][pr]}};
  result["provenance"] = provenance;
  write_output(out_path, result.dump(2) + "\n", out);
  err << "largest confusion: " << names[t] << " -> " << names[pr] << " (" << cm.counts[t][pr] << ")\n";
  return kExitOk;
}

int cmd_render(const std::string& payload_path, double size, const std::string& out_path, std::ostream& out) {
  const VisPayload p = read_payload(payload_path);
  RenderOptions opts;
  if (!(size > 0)) throw ValidationError("--size must be positive");
  opts.plot_size = size;
  write_output(out_path, render_svg(p, opts), out);
  return kExitOk;
}

Service* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(ServiceOptions opts, const std::string& host, int port, std::ostream& err) {
  Service service(std::move(opts));
  int bound = port;
  if (port == 0) {
    bound = service.bind_to_any_port(host);
    if (bound <= 0) throw IoError("cannot bind " + host);
  } else if (!service.bind(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  err << "listening on http://" << host << ":" << bound << "\n" << std::flush;
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  service.listen_after_bind();
  g_service = nullptr;
  return kExitOk;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return kExitValidation;
    case ErrorKind::transport: return kExitTransport;
    case ErrorKind::io: return kExitIo;
  }
  return kExitValidation;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discriminative projections of text-classifier embeddings", "deepview"};
  app.require_subcommand(1, 1);
  app.footer("Exit codes: 0 ok, 1 validation error, 2 classifier transport error, 3 I/O error.\n"
             "Every flag can also be set through DEEPVIEW_<FLAG> (upper case, dashes as underscores).");

  RunFlags project_flags;
  std::string project_out = "payload.json";
  auto* project = app.add_subcommand("project", "Project a bundle and write a VisPayload");
  project_flags.attach(project, true);
  project->add_option("--out", project_out, "Payload JSON path ('-' for stdout)")->envname("DEEPVIEW_OUT");

  RunFlags sweep_flags;
  std::string lambdas = "1.0,0.8,0.6,0.4,0.2,0.0";
  std::string sweep_out = "-";
  auto* sweep = app.add_subcommand("sweep", "Run one projection per lambda and tabulate the errors");
  sweep_flags.attach(sweep, false);
  sweep->add_option("--lambdas", lambdas, "Comma-separated lambda list")->envname("DEEPVIEW_LAMBDAS");
  sweep->add_option("--out", sweep_out, "CSV path ('-' for stdout)")->envname("DEEPVIEW_OUT");

  std::string eval_payload, eval_bundle, eval_curves, eval_out = "-";
  std::size_t eval_k = 5;
  auto* eval = app.add_subcommand("eval", "Recompute payload metrics and neighborhood curves");
  eval->add_option("--payload", eval_payload, "Payload JSON")->required()->envname("DEEPVIEW_PAYLOAD");
  eval->add_option("--bundle", eval_bundle, "Bundle to compare the projection against")
      ->envname("DEEPVIEW_BUNDLE");
  eval->add_option("--curves", eval_curves, "Write k,q_nn,lcmc CSV here")->envname("DEEPVIEW_CURVES");
  eval->add_option("--k", eval_k, "Neighbors for the kNN error")->envname("DEEPVIEW_K");
  eval->add_option("--out", eval_out, "Summary JSON path ('-' for stdout)")->envname("DEEPVIEW_OUT");

  std::vector<std::string> compare_inputs;
  std::string compare_curves, compare_out = "-";
  auto* compare = app.add_subcommand("compare", "Pairwise neighborhood agreement between representations");
  compare->add_option("--input", compare_inputs, "name=path to a payload or bundle manifest; repeat")
      ->required()
      ->envname("DEEPVIEW_INPUT");
  compare->add_option("--curves-dir", compare_curves, "Write one curve CSV per pair here")
      ->envname("DEEPVIEW_CURVES_DIR");
  compare->add_option("--out", compare_out, "Summary JSON path ('-' for stdout)")->envname("DEEPVIEW_OUT");

  std::string conf_bundle, conf_labels = "dataset_tag", conf_payload, conf_out = "-";
  std::size_t conf_k = 5;
  auto* confusion = app.add_subcommand("confusion", "Leave-one-out kNN confusion matrix");
  confusion->add_option("--bundle", conf_bundle, "Bundle manifest")->required()->envname("DEEPVIEW_BUNDLE");
  confusion->add_option("--labels", conf_labels, "true_label or dataset_tag")->envname("DEEPVIEW_LABELS");
  confusion->add_option("--k", conf_k, "Neighbors")->envname("DEEPVIEW_K");
  confusion->add_option("--payload", conf_payload, "Use this payload's 2D coordinates instead of embeddings")
      ->envname("DEEPVIEW_PAYLOAD");
  confusion->add_option("--out", conf_out, "JSON path ('-' for stdout)")->envname("DEEPVIEW_OUT");

  std::string render_payload, render_out = "scene.svg";
  double render_size = 800.0;
  auto* render = app.add_subcommand("render", "Static SVG of a payload");
  render->add_option("--payload", render_payload, "Payload JSON")->required()->envname("DEEPVIEW_PAYLOAD");
  render->add_option("--size", render_size, "Plot size in pixels")->envname("DEEPVIEW_SIZE");
  render->add_option("--out", render_out, "SVG path ('-' for stdout)")->envname("DEEPVIEW_OUT");

  ServiceOptions serve_opts;
  std::string serve_host = "127.0.0.1", serve_data = "deepview-data", serve_ui;
  int serve_port = 8080;
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--host", serve_host, "Bind address")->envname("DEEPVIEW_HOST");
  serve->add_option("--port", serve_port, "Port (0 = any free port)")->envname("DEEPVIEW_PORT");
  serve->add_option("--data-dir", serve_data, "Project storage directory")->envname("DEEPVIEW_DATA_DIR");
  serve->add_option("--ui-dir", serve_ui, "Built explorer UI to host at /")->envname("DEEPVIEW_UI_DIR");
  serve->add_option("--cors-origin", serve_opts.cors_origin, "Allowed CORS origin")
      ->envname("DEEPVIEW_CORS_ORIGIN");
  serve->add_option("--threads", serve_opts.exec.threads, "Distance-matrix worker threads")
      ->envname("DEEPVIEW_THREADS");
  serve->add_option("--batch-size", serve_opts.exec.batch_size, "Rows per classifier call")
      ->envname("DEEPVIEW_BATCH_SIZE");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*project) return cmd_project(project_flags, project_out, out, err);
    if (*sweep) return cmd_sweep(sweep_flags, lambdas, sweep_out, out, err);
    if (*eval) return cmd_eval(eval_payload, eval_bundle, eval_curves, eval_k, eval_out, out);
    if (*compare) return cmd_compare(compare_inputs, compare_curves, compare_out, out);
    if (*confusion) return cmd_confusion(conf_bundle, conf_labels, conf_k, conf_payload, conf_out, out, err);
    if (*render) return cmd_render(render_payload, render_size, render_out, out);
    if (*serve) {
      serve_opts.data_dir = serve_data;
      if (!serve_ui.empty()) serve_opts.ui_dir = serve_ui;
      return cmd_serve(std::move(serve_opts), serve_host, serve_port, err);
    }
  } catch (const Error& e) {
    err << "deepview: error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "deepview: error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace deepview
