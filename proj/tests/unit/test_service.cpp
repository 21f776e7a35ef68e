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

#include <chrono>
#include <thread>

#include <gtest/gtest.h>
#include <json.hpp>

#include "deepview/cli.hpp"
#include "deepview/log.hpp"
#include "deepview/pipeline.hpp"
#include "deepview/service.hpp"
#include "support.hpp"

// httplib after Eigen: resolv.h defines a macro that collides with Eigen names.
#include <httplib.h>

using namespace deepview;
namespace dt = deepview::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Small, quick run settings for the 60-point fixture.
const json kConfig = {{"lambda", 0.6}, {"seed", 4}, {"umap", {{"n_neighbors", 10}, {"n_epochs", 150}}},
                      {"grid", {{"width", 40}, {"height", 30}}}};

class Running {
 public:
  explicit Running(const fs::path& data_dir) {
    set_log_sink([](std::string_view) {});
    ServiceOptions opts;
    opts.data_dir = data_dir;
    opts.remote.max_retries = 0;
    opts.remote.timeout_seconds = 2.0;
    service_ = std::make_unique<Service>(opts);
    port_ = service_->bind_to_any_port();
    thread_ = std::thread([this] { service_->listen_after_bind(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 200; ++i) {
      if (client_->Get("/api/projects")) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ~Running() {
    service_->wait_idle();
    service_->stop();
    thread_.join();
    service_.reset();
    set_log_sink({});
  }

  Service& service() { return *service_; }
  httplib::Client& http() { return *client_; }

  std::pair<int, json> post(const std::string& path, const json& body) {
    auto res = client_->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res) << path;
    if (!res) return {0, {}};
    return {res->status, res->body.empty() ? json() : json::parse(res->body)};
  }
  std::pair<int, std::string> get(const std::string& path) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res) << path;
    if (!res) return {0, {}};
    return {res->status, res->body};
  }

  std::string create(const fs::path& manifest, const std::string& classifier) {
    const auto [status, body] = post("/api/projects", {{"bundle_manifest", manifest.string()}, {"classifier_spec", classifier}});
    EXPECT_EQ(status, 201) << body.dump();
    return body.value("project_id", "");
  }

  // Starts a run and polls until it leaves queued/running. Returns the final body.
  std::pair<int, std::string> run_to_end(const std::string& project, const json& cfg, std::string* run_id = nullptr) {
    const auto [status, body] = post("/api/projects/" + project + "/runs", cfg);
    EXPECT_TRUE(status == 202 || status == 200) << body.dump();
    const auto id = body.value("run_id", "");
    if (run_id) *run_id = id;
    for (int i = 0; i < 3000; ++i) {
      auto r = get("/api/projects/" + project + "/runs/" + id);
      if (r.first != 202) return r;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return {0, "timeout"};
  }

 private:
  std::unique_ptr<Service> service_;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

}  // namespace

TEST(Service, CreateProjectAndDescribe) {
  dt::TempDir dir;
  const auto fx = dt::write_two_blob_fixture(dir.path() / "fx");
  Running svc(dir.path() / "data");
  const auto id = svc.create(fx.manifest, fx.weights.string());
  EXPECT_EQ(id, "p1");
  const auto [status, body] = svc.get("/api/projects/" + id);
  ASSERT_EQ(status, 200);
  const auto doc = json::parse(body);
  EXPECT_EQ(doc["n_points"], 60);
  EXPECT_EQ(doc["runs"].size(), 0u);
  const auto list = json::parse(svc.get("/api/projects").second);
  EXPECT_EQ(list["projects"].size(), 1u);
  EXPECT_TRUE(fs::exists(dir.path() / "data/projects/p1/project.json"));
}

TEST(Service, CreateProjectErrors) {
  dt::TempDir dir;
  const auto fx = dt::write_two_blob_fixture(dir.path() / "fx");
  // Break the third record.
  auto lines = dt::slurp(dir.path() / "fx/bundle.jsonl");
  const auto second = lines.find('\n', lines.find('\n') + 1);
  lines.insert(second + 1, "{\"text\": \"no id\"}\n");
  lines.erase(lines.rfind('\n', lines.size() - 2) + 1);
  dt::spit(dir.path() / "fx/bundle.jsonl", lines);

  Running svc(dir.path() / "data");
  auto [status, body] = svc.post("/api/projects", {{"bundle_manifest", fx.manifest.string()}, {"classifier_spec", fx.weights.string()}});
  EXPECT_EQ(status, 400);
  EXPECT_NE(body["error"].get<std::string>().find("row 2"), std::string::npos) << body.dump();

  std::tie(status, body) = svc.post("/api/projects", {{"bundle_manifest", "/nonexistent/manifest.json"}, {"classifier_spec", "knn"}});
  EXPECT_EQ(status, 400);
  std::tie(status, body) = svc.post("/api/projects", {{"bundle_manifest", 3}});
  EXPECT_EQ(status, 400);
}

TEST(Service, DeadRemoteClassifierIs502) {
  dt::TempDir dir;
  const auto fx = dt::write_two_blob_fixture(dir.path() / "fx");
  Running svc(dir.path() / "data");
  const auto [status, body] = svc.post(
      "/api/projects", {{"bundle_manifest", fx.manifest.string()},
                        {"classifier_spec", "http://127.0.0.1:" + std::to_string(dt::dead_port())}});
  EXPECT_EQ(status, 502) << body.dump();
}

TEST(Service, RunPayloadMatchesCliBytes) {
  dt::TempDir dir;
  const auto fx = dt::write_two_blob_fixture(dir.path() / "fx");
  std::string service_payload;
  {
    Running svc(dir.path() / "data");
    const auto id = svc.create(fx.manifest, fx.weights.string());
    std::string run_id;
    auto [status, body] = svc.run_to_end(id, kConfig, &run_id);
    ASSERT_EQ(status, 200) << body;
    service_payload = body;
    EXPECT_NO_THROW(payload_from_json(body));
    const auto desc = json::parse(svc.get("/api/projects/" + id).second);
    EXPECT_EQ(desc["runs"][0]["status"], "done");
    // The same config again is served from the finished run.
    const auto again = svc.post("/api/projects/" + id + "/runs", kConfig);
    EXPECT_EQ(again.first, 200);
    EXPECT_EQ(again.second["run_id"], run_id);
  }
  dt::spit(dir.path() / "cfg.json", kConfig.dump());
  const auto out = dir.path() / "cli.json";
  const std::string args[] = {"deepview", "project", "--bundle", fx.manifest.string(), "--classifier",
                              fx.weights.string(), "--config", (dir.path() / "cfg.json").string(), "--out", out.string()};
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  ASSERT_EQ(run_cli(static_cast<int>(argv.size()), argv.data(), o, e), 0) << e.str();
  EXPECT_EQ(dt::slurp(out), service_payload);
}

TEST(Service, SecondRunWhileActiveIs409) {
  dt::TempDir dir;
  const auto fx = dt::write_two_blob_fixture(dir.path() / "fx");
  Running svc(dir.path() / "data");
  const auto id = svc.create(fx.manifest, fx.weights.string());
  json slow = kConfig;
  slow["umap"]["n_epochs"] = 12000;
  const auto first = svc.post("/api/projects/" + id + "/runs", slow);
  ASSERT_EQ(first.first, 202);
  const auto second = svc.post("/api/projects/" + id + "/runs", kConfig);
  EXPECT_EQ(second.first, 409);
  const auto status = json::parse(svc.get("/api/projects/" + id + "/runs/" + first.second["run_id"].get<std::string>()).second);
  EXPECT_TRUE(status["status"] == "queued" || status["status"] == "running") << status.dump();
  svc.service().wait_idle();
}

TEST(Service, BadRunConfigAndUnknownIds) {
  dt::TempDir dir;
  const auto fx = dt::write_two_blob_fixture(dir.path() / "fx");
  Running svc(dir.path() / "data");
  const auto id = svc.create(fx.manifest, fx.weights.string());
  EXPECT_EQ(svc.post("/api/projects/" + id + "/runs", {{"lambda", 2.0}}).first, 400);
  EXPECT_EQ(svc.post("/api/projects/" + id + "/runs", {{"umap", {{"n_neighbors", 60}}}}).first, 400);
  EXPECT_EQ(svc.post("/api/projects/p99/runs", kConfig).first, 404);
  EXPECT_EQ(svc.get("/api/projects/p99").first, 404);
  EXPECT_EQ(svc.get("/api/projects/" + id + "/runs/nope").first, 404);
  EXPECT_EQ(svc.get("/api/projects/p99/points/b0").first, 404);
  EXPECT_EQ(svc.post("/api/projects/" + id + "/runs/nope/region-query",
                     {{"x_min", 0}, {"x_max", 1}, {"y_min", 0}, {"y_max", 1}}).first,
            404);
}

TEST(Service, PointLookup) {
  dt::TempDir dir;
  const auto fx = dt::write_two_blob_fixture(dir.path() / "fx");
  Running svc(dir.path() / "data");
  const auto id = svc.create(fx.manifest, fx.weights.string());
  auto [status, body] = svc.get("/api/projects/" + id + "/points/b3");
  ASSERT_EQ(status, 200);
  auto doc = json::parse(body);
  EXPECT_EQ(doc["id"], "b3");
  EXPECT_TRUE(doc.contains("text"));
  std::tie(status, body) = svc.get("/api/projects/" + id + "/points/b59");
  ASSERT_EQ(status, 200);
  doc = json::parse(body);
  EXPECT_FALSE(doc.contains("text"));
  EXPECT_EQ(svc.get("/api/projects/" + id + "/points/zzz").first, 404);
}

TEST(Service, RegionQueryOrdering) {
  dt::TempDir dir;
  const auto fx = dt::write_two_blob_fixture(dir.path() / "fx");
  Running svc(dir.path() / "data");
  const auto id = svc.create(fx.manifest, fx.weights.string());
  std::string run_id;
  const auto [status, body] = svc.run_to_end(id, kConfig, &run_id);
  ASSERT_EQ(status, 200);
  const auto payload = payload_from_json(body);
  const std::string path = "/api/projects/" + id + "/runs/" + run_id + "/region-query";

  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const auto& p : payload.points) {
    x_lo = std::min(x_lo, p.x), x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y), y_hi = std::max(y_hi, p.y);
  }
  auto [s, all] = svc.post(path, {{"x_min", x_lo}, {"x_max", x_hi}, {"y_min", y_lo}, {"y_max", y_hi}});
  ASSERT_EQ(s, 200);
  const auto& pts = all["points"];
  ASSERT_EQ(pts.size(), 60u);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i]["cell_certainty"], b = pts[i + 1]["cell_certainty"];
    EXPECT_TRUE(a < b || (a == b && pts[i]["id"].get<std::string>() < pts[i + 1]["id"].get<std::string>()));
  }
  // Recompute the first entry's cell certainty from the payload.
  for (const auto& p : payload.points) {
    if (p.id == pts[0]["id"]) EXPECT_EQ(payload.grid.certainty[payload.grid.containing_cell(p.x, p.y)], pts[0]["cell_certainty"]);
  }
  EXPECT_TRUE(pts[0].contains("mismatch"));

  // Straddle the midline between the two blobs.
  const double mid = 0.5 * (x_lo + x_hi);
  std::tie(s, all) = svc.post(path, {{"x_min", mid - 0.25 * (x_hi - x_lo)}, {"x_max", mid + 0.25 * (x_hi - x_lo)},
                                      {"y_min", y_lo}, {"y_max", y_hi}});
  ASSERT_EQ(s, 200);
  for (const auto& p : all["points"]) EXPECT_LE(all["points"][0]["cell_certainty"].get<double>(), p["cell_certainty"].get<double>());

  std::tie(s, all) = svc.post(path, {{"x_min", x_hi + 100}, {"x_max", x_hi + 200}, {"y_min", y_lo}, {"y_max", y_hi}});
  EXPECT_EQ(s, 200);
  EXPECT_EQ(all["points"].size(), 0u);
  EXPECT_EQ(svc.post(path, {{"x_min", 1}, {"x_max", 0}, {"y_min", 0}, {"y_max", 1}}).first, 400);
  EXPECT_EQ(svc.post(path, {{"x_min", 0}}).first, 400);
}

TEST(Service, RegionQueryOnConstantClassifier) {
  dt::TempDir dir;
  const auto fx = dt::write_two_blob_fixture(dir.path() / "fx");
  dt::ConstantClassifier constant(fx.bundle.dim(), {0.5, 0.5});
  dt::ClassifierServer remote(constant);
  Running svc(dir.path() / "data");
  const auto id = svc.create(fx.manifest, remote.url());
  std::string run_id;
  ASSERT_EQ(svc.run_to_end(id, kConfig, &run_id).first, 200);
  const auto [s, all] = svc.post("/api/projects/" + id + "/runs/" + run_id + "/region-query",
                                 {{"x_min", -1e9}, {"x_max", 1e9}, {"y_min", -1e9}, {"y_max", 1e9}});
  ASSERT_EQ(s, 200);
  ASSERT_EQ(all["points"].size(), 60u);
  std::vector<std::string> ids;
  for (const auto& p : all["points"]) {
    EXPECT_EQ(p["cell_certainty"], 0.0);
    EXPECT_EQ(p["mismatch"], false);
    ids.push_back(p["id"]);
  }
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
}

TEST(Service, RestoresFromDisk) {
  dt::TempDir dir;
  const auto fx = dt::write_two_blob_fixture(dir.path() / "fx");
  std::string run_id, payload;
  {
    Running svc(dir.path() / "data");
    const auto id = svc.create(fx.manifest, fx.weights.string());
    auto r = svc.run_to_end(id, kConfig, &run_id);
    ASSERT_EQ(r.first, 200);
    payload = r.second;
  }
  Running svc(dir.path() / "data");
  const auto [status, body] = svc.get("/api/projects/p1/runs/" + run_id);
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body, payload);
  EXPECT_EQ(svc.create(fx.manifest, "knn"), "p2");
}

TEST(Service, CorsHeaders) {
  dt::TempDir dir;
  Running svc(dir.path() / "data");
  auto res = svc.http().Get("/api/projects");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}
