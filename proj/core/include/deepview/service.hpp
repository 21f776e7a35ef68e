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

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "deepview/classifier.hpp"
#include "deepview/pipeline.hpp"

namespace deepview {

struct ServiceOptions {
  /// Projects and payloads live under <data_dir>/projects/<id>/.
  std::filesystem::path data_dir = "deepview-data";
  /// Built explorer UI, served at "/" when set.
  std::optional<std::filesystem::path> ui_dir;
  std::string cors_origin = "*";
  ExecOptions exec;
  RemoteOptions remote;
};

/**
 * JSON-over-HTTP backend for the explorer UI.
 *
 *   GET  /api/projects
 *   POST /api/projects                               {bundle_manifest, classifier_spec}
 *   GET  /api/projects/{id}
 *   POST /api/projects/{id}/runs                     RunConfig (partial, defaults fill in)
 *   GET  /api/projects/{id}/runs/{run_id}            202 status | 200 payload | 500 failure
 *   GET  /api/projects/{id}/points/{point_id}        record
 *   POST /api/projects/{id}/runs/{run_id}/region-query  {x_min, x_max, y_min, y_max}
 *
 * Runs execute on a background worker, one active run per project. A run id
 * is the hash of its canonical RunConfig, so re-posting a finished config
 * returns the stored payload's id without recomputation.
 */
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds to an OS-assigned port and returns it.
  int bind_to_any_port(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  /// Serves until stop(); blocks the calling thread.
  bool listen_after_bind();
  void stop();

  /// Blocks until no run is queued or running.
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace deepview
