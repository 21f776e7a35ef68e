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

#include "deepview/service.hpp"

#include <algorithm>
#include <condition_variable>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "deepview/error.hpp"
#include "deepview/hash.hpp"
#include "deepview/log.hpp"
#include "io_util.hpp"

namespace deepview {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class RunStatus { queued, running, done, failed };

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::queued: return "queued";
    case RunStatus::running: return "running";
    case RunStatus::done: return "done";
    case RunStatus::failed: return "failed";
  }
  return "failed";
}

struct RunState {
  RunStatus status = RunStatus::queued;
  std::string message;
  RunConfig config;
  std::string payload_json;
  std::shared_ptr<const VisPayload> payload;
};

struct Project {
  std::string id;
  fs::path manifest;
  std::string classifier_spec;
  std::shared_ptr<const DatasetBundle> bundle;
  std::shared_ptr<const Classifier> classifier;

  std::mutex mutex;
  std::map<std::string, RunState> runs;
  std::optional<std::string> active_run;
  std::thread worker;
};

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, json{{"error", message}});
}

int status_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::transport: return 502;
    case ErrorKind::validation: return 400;
    case ErrorKind::io: return 400;
  }
  return 500;
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;

  std::mutex projects_mutex;
  std::map<std::string, std::shared_ptr<Project>> projects;
  std::size_t next_project = 1;

  std::mutex idle_mutex;
  std::condition_variable idle_cv;
  std::size_t active_runs = 0;

  explicit Impl(ServiceOptions opts) : options(std::move(opts)) {
    restore();
    routes();
  }

  ~Impl() {
    server.stop();
    std::vector<std::shared_ptr<Project>> all;
    {
      std::lock_guard lock(projects_mutex);
      for (auto& [id, p] : projects) all.push_back(p);
    }
    for (auto& p : all) {
      std::thread t;
      {
        std::lock_guard lock(p->mutex);
        t = std::move(p->worker);
      }
      if (t.joinable()) t.join();
    }
  }

  fs::path project_dir(const std::string& id) const { return options.data_dir / "projects" / id; }

  std::shared_ptr<Project> find_project(const std::string& id) {
    std::lock_guard lock(projects_mutex);
    const auto it = projects.find(id);
    return it == projects.end() ? nullptr : it->second;
  }

  // ---------------------------------------------------------------------
  // Persistence

  void restore() {
    const fs::path root = options.data_dir / "projects";
    std::error_code ec;
    if (!fs::is_directory(root, ec)) return;
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root, ec)) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      try {
        const json meta = detail::parse_json(detail::read_text_file(dir / "project.json"), "project.json");
        auto p = std::make_shared<Project>();
        p->id = meta.at("id").get<std::string>();
        p->manifest = meta.at("bundle_manifest").get<std::string>();
        p->classifier_spec = meta.at("classifier_spec").get<std::string>();
        p->bundle = std::make_shared<const DatasetBundle>(load_bundle(p->manifest));
        p->classifier = make_classifier(p->classifier_spec, *p->bundle, options.remote);
        const fs::path runs_dir = dir / "runs";
        if (fs::is_directory(runs_dir, ec)) {
          for (const auto& entry : fs::directory_iterator(runs_dir, ec)) {
            const auto name = entry.path().filename().string();
            if (entry.path().extension() != ".json" || name.ends_with(".config.json")) continue;
            RunState run;
            run.payload_json = detail::read_text_file(entry.path());
            auto payload = std::make_shared<const VisPayload>(payload_from_json(run.payload_json));
            run.config = payload->config;
            run.payload = std::move(payload);
            run.status = RunStatus::done;
            p->runs.emplace(entry.path().stem().string(), std::move(run));
          }
        }
        if (p->id.size() > 1 && p->id[0] == 'p') {
          try {
            next_project = std::max(next_project, std::stoul(p->id.substr(1)) + 1);
          } catch (const std::exception&) {
          }
        }
        projects.emplace(p->id, std::move(p));
      } catch (const std::exception& e) {
        log_notice("skipping project at '" + dir.string() + "': " + e.what());
      }
    }
  }

  // ---------------------------------------------------------------------
  // Handlers

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        reply_error(res, status_for(e), e.what());
      } catch (const std::exception& e) {
        reply_error(res, 500, e.what());
      }
    });
    if (options.ui_dir) server.set_mount_point("/", options.ui_dir->string());

    server.Get("/api/projects", [this](const httplib::Request&, httplib::Response& res) {
      json list = json::array();
      std::lock_guard lock(projects_mutex);
      for (const auto& [id, p] : projects) list.push_back(describe(*p));
      reply(res, 200, json{{"projects", std::move(list)}});
    });
    server.Post("/api/projects", [this](const httplib::Request& req, httplib::Response& res) {
      create_project(req, res);
    });
    server.Get(R"(/api/projects/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto p = find_project(req.matches[1]);
      if (!p) return reply_error(res, 404, "unknown project");
      reply(res, 200, describe(*p));
    });
    server.Post(R"(/api/projects/([^/]+)/runs)", [this](const httplib::Request& req, httplib::Response& res) {
      start_run(req, res);
    });
    server.Get(R"(/api/projects/([^/]+)/runs/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) { get_run(req, res); });
    server.Get(R"(/api/projects/([^/]+)/points/(.+))",
               [this](const httplib::Request& req, httplib::Response& res) { get_point(req, res); });
    server.Post(R"(/api/projects/([^/]+)/runs/([^/]+)/region-query)",
                [this](const httplib::Request& req, httplib::Response& res) { region_query(req, res); });
  }

  json describe(Project& p) {
    std::lock_guard lock(p.mutex);
    json runs = json::array();
    for (const auto& [id, r] : p.runs) {
      runs.push_back({{"run_id", id}, {"status", to_string(r.status)}});
    }
    return {{"project_id", p.id},
            {"bundle_manifest", p.manifest.string()},
            {"classifier_spec", p.classifier_spec},
            {"n_points", p.bundle ? p.bundle->size() : 0},
            {"runs", std::move(runs)}};
  }

  void create_project(const httplib::Request& req, httplib::Response& res) {
    const json body = detail::parse_json(req.body, "request body");
    if (!body.is_object() || !body.contains("bundle_manifest") || !body["bundle_manifest"].is_string() ||
        !body.contains("classifier_spec") || !body["classifier_spec"].is_string()) {
      return reply_error(res, 400, "body needs string fields 'bundle_manifest' and 'classifier_spec'");
    }
    auto p = std::make_shared<Project>();
    p->manifest = fs::absolute(body["bundle_manifest"].get<std::string>());
    p->classifier_spec = body["classifier_spec"].get<std::string>();
    try {
      p->bundle = std::make_shared<const DatasetBundle>(load_bundle(p->manifest));
      p->classifier = make_classifier(p->classifier_spec, *p->bundle, options.remote);
    } catch (const Error& e) {
      return reply_error(res, status_for(e), e.what());
    }
    if (p->classifier->info().input_dim != p->bundle->dim()) {
      return reply_error(res, 400, "classifier input_dim does not match bundle width");
    }
    {
      std::lock_guard lock(projects_mutex);
      p->id = "p" + std::to_string(next_project++);
      const fs::path dir = project_dir(p->id);
      std::error_code ec;
      fs::create_directories(dir / "runs", ec);
      if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
      const json meta = {{"id", p->id},
                         {"bundle_manifest", p->manifest.string()},
                         {"classifier_spec", p->classifier_spec}};
      detail::write_text_file(dir / "project.json", meta.dump(2) + "\n");
      projects.emplace(p->id, p);
    }
    reply(res, 201, json{{"project_id", p->id}});
  }

  void start_run(const httplib::Request& req, httplib::Response& res) {
    auto p = find_project(req.matches[1]);
    if (!p) return reply_error(res, 404, "unknown project");
    RunConfig cfg;
    try {
      cfg = run_config_from_json(req.body.empty() ? std::string("{}") : req.body);
      cfg.umap.validate(p->bundle->size());
    } catch (const Error& e) {
      return reply_error(res, 400, e.what());
    }
    const std::string run_id = to_hex(Fnv1a().update(run_config_to_json(cfg)).digest());

    std::lock_guard lock(p->mutex);
    if (p->active_run) {
      return reply(res, 409, json{{"error", "a run is already active"}, {"run_id", *p->active_run}});
    }
    const auto existing = p->runs.find(run_id);
    if (existing != p->runs.end() && existing->second.status == RunStatus::done) {
      return reply(res, 200, json{{"run_id", run_id}, {"status", "done"}});
    }
    if (p->worker.joinable()) p->worker.join();  // previous run already finished

    RunState& run = p->runs[run_id];
    run = RunState{};
    run.config = cfg;
    p->active_run = run_id;
    {
      std::lock_guard idle(idle_mutex);
      ++active_runs;
    }
    p->worker = std::thread([this, p, run_id, cfg] { execute(p, run_id, cfg); });
    reply(res, 202, json{{"run_id", run_id}, {"status", "queued"}});
  }

  void execute(const std::shared_ptr<Project>& p, const std::string& run_id, const RunConfig& cfg) {
    {
      std::lock_guard lock(p->mutex);
      p->runs[run_id].status = RunStatus::running;
    }
    RunState result;
    result.config = cfg;
    try {
      auto payload = std::make_shared<VisPayload>(run_deepview(*p->bundle, *p->classifier, cfg, options.exec));
      result.payload_json = payload_to_json(*payload);
      detail::write_text_file(project_dir(p->id) / "runs" / (run_id + ".json"), result.payload_json);
      result.payload = std::move(payload);
      result.status = RunStatus::done;
    } catch (const std::exception& e) {
      result.status = RunStatus::failed;
      result.message = e.what();
      log_notice("run " + run_id + " of project " + p->id + " failed: " + e.what());
    }
    {
      std::lock_guard lock(p->mutex);
      p->runs[run_id] = std::move(result);
      p->active_run.reset();
    }
    {
      std::lock_guard idle(idle_mutex);
      --active_runs;
    }
    idle_cv.notify_all();
  }

  void get_run(const httplib::Request& req, httplib::Response& res) {
    auto p = find_project(req.matches[1]);
    if (!p) return reply_error(res, 404, "unknown project");
    std::lock_guard lock(p->mutex);
    const auto it = p->runs.find(req.matches[2]);
    if (it == p->runs.end()) return reply_error(res, 404, "unknown run");
    const RunState& run = it->second;
    switch (run.status) {
      case RunStatus::done:
        res.status = 200;
        res.set_content(run.payload_json, "application/json");
        return;
      case RunStatus::failed:
        return reply(res, 500, json{{"run_id", it->first}, {"status", "failed"}, {"error", run.message}});
      default:
        return reply(res, 202, json{{"run_id", it->first}, {"status", to_string(run.status)}});
    }
  }

  void get_point(const httplib::Request& req, httplib::Response& res) {
    auto p = find_project(req.matches[1]);
    if (!p) return reply_error(res, 404, "unknown project");
    const auto row = p->bundle->find(req.matches[2]);
    if (!row) return reply_error(res, 404, "unknown point");
    reply(res, 200, detail::record_to_json(p->bundle->records()[*row]));
  }

  void region_query(const httplib::Request& req, httplib::Response& res) {
    auto p = find_project(req.matches[1]);
    if (!p) return reply_error(res, 404, "unknown project");
    std::shared_ptr<const VisPayload> payload;
    {
      std::lock_guard lock(p->mutex);
      const auto it = p->runs.find(req.matches[2]);
      if (it == p->runs.end()) return reply_error(res, 404, "unknown run");
      if (it->second.status != RunStatus::done) return reply_error(res, 409, "run is not done");
      payload = it->second.payload;
    }
    const json body = detail::parse_json(req.body, "request body");
    double box[4];
    const char* keys[4] = {"x_min", "x_max", "y_min", "y_max"};
    for (int i = 0; i < 4; ++i) {
      if (!body.is_object() || !body.contains(keys[i]) || !body[keys[i]].is_number()) {
        return reply_error(res, 400, std::string("body needs numeric '") + keys[i] + "'");
      }
      box[i] = body[keys[i]].get<double>();
    }
    if (box[0] > box[1] || box[2] > box[3]) return reply_error(res, 400, "inverted box");

    struct Hit {
      double certainty;
      const PayloadPoint* point;
    };
    std::vector<Hit> hits;
    const auto& grid = payload->grid;
    for (const auto& pt : payload->points) {
      if (pt.x < box[0] || pt.x > box[1] || pt.y < box[2] || pt.y > box[3]) continue;
      hits.push_back({grid.certainty[grid.containing_cell(pt.x, pt.y)], &pt});
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
      return a.certainty != b.certainty ? a.certainty < b.certainty : a.point->id < b.point->id;
    });
    json points = json::array();
    for (const auto& h : hits) {
      json jp = {{"id", h.point->id},
                 {"x", h.point->x},
                 {"y", h.point->y},
                 {"predicted", h.point->predicted},
                 {"mismatch", h.point->mismatch},
                 {"cell_certainty", h.certainty}};
      if (h.point->true_label) jp["true_label"] = *h.point->true_label;
      points.push_back(std::move(jp));
    }
    reply(res, 200, json{{"points", std::move(points)}});
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() = default;

int Service::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool Service::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

void Service::wait_idle() {
  std::unique_lock lock(impl_->idle_mutex);
  impl_->idle_cv.wait(lock, [this] { return impl_->active_runs == 0; });
}

}  // namespace deepview
