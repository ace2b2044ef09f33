// Copyright 2026 The ProFTAP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROFTAP_JUDGING_SERVER_H_
#define PROFTAP_JUDGING_SERVER_H_

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "proftap/judging.h"

namespace httplib {
class Server;
}

namespace proftap {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  // Bearer token for the admin endpoints; admin routes are disabled when
  // empty.
  std::string admin_token;
  // Static assets for the judge UI, mounted at "/" when set.
  std::filesystem::path static_dir;
};

// Serializes the judge-facing poem payload. Only poem_id, title, body and
// progress are ever emitted.
nlohmann::json NextPoemToJson(const NextPoem& next);

// JSON over HTTP, all routes under /api/v1:
//   POST /api/v1/session    {"token"}            -> {"session", "progress"}
//   GET  /api/v1/next       (Bearer session)     -> poem payload or progress
//   POST /api/v1/rating     {"poem_id", "probability"}
//   GET  /api/v1/progress
//   GET  /api/v1/export     (Bearer admin)       -> ratings CSV
//   POST /api/v1/plan       (Bearer admin)       -> replace the plan
//   GET  /api/v1/admin/status, POST /api/v1/admin/void (Bearer admin)
class JudgingServer {
 public:
  JudgingServer(JudgingService& service, ServerOptions options);
  ~JudgingServer();

  JudgingServer(const JudgingServer&) = delete;
  JudgingServer& operator=(const JudgingServer&) = delete;

  // Blocks until Stop().
  bool Listen();
  // Binds to an ephemeral port and returns it; follow with ListenAfterBind.
  int BindToAnyPort();
  bool ListenAfterBind();
  void Stop();
  void WaitUntilReady() const;

 private:
  void Routes();
  std::optional<std::string> SessionJudge(const std::string& auth_header);
  bool IsAdmin(const std::string& auth_header) const;

  JudgingService& service_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex sessions_mu_;
  std::unordered_map<std::string, std::string> sessions_;  // id -> judge
};

// 128-bit random hex token from the system entropy source.
std::string RandomToken();

}  // namespace proftap

#endif  // PROFTAP_JUDGING_SERVER_H_
