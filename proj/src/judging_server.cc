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

#include "proftap/judging_server.h"

#include <random>

#include <fmt/format.h>
#include "httplib.h"

#include "proftap/error.h"

namespace proftap {

using nlohmann::json;

namespace {

json ProgressToJson(const Progress& p) {
  return {{"rated", p.rated}, {"total", p.total}};
}

void SendJson(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void SendError(httplib::Response& res, int status, std::string_view message) {
  SendJson(res, status, {{"error", message}});
}

std::string BearerToken(const std::string& header) {
  constexpr std::string_view kPrefix = "Bearer ";
  if (header.rfind(kPrefix, 0) != 0) return {};
  return header.substr(kPrefix.size());
}

int HttpStatus(RateStatus status) {
  switch (status) {
    case RateStatus::kStored:
      return 201;
    case RateStatus::kUnknownJudge:
      return 401;
    case RateStatus::kOutOfRange:
      return 422;
    case RateStatus::kUnassigned:
      return 403;
    case RateStatus::kDuplicate:
      return 409;
  }
  return 500;
}

}  // namespace

std::string RandomToken() {
  std::random_device rd;
  std::uniform_int_distribution<unsigned> byte(0, 255);
  std::string out;
  for (int i = 0; i < 16; ++i) out += fmt::format("{:02x}", byte(rd));
  return out;
}

json NextPoemToJson(const NextPoem& next) {
  json out = {{"progress", ProgressToJson(next.progress)}};
  if (next.poem) {
    out["poem_id"] = next.poem->poem_id;
    out["title"] = next.poem->title;
    out["body"] = next.poem->body;
  }
  return out;
}

JudgingServer::JudgingServer(JudgingService& service, ServerOptions options)
    : service_(service),
      options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()) {
  Routes();
}

JudgingServer::~JudgingServer() { Stop(); }

std::optional<std::string> JudgingServer::SessionJudge(
    const std::string& auth_header) {
  const std::string token = BearerToken(auth_header);
  std::lock_guard lock(sessions_mu_);
  auto it = sessions_.find(token);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

bool JudgingServer::IsAdmin(const std::string& auth_header) const {
  return !options_.admin_token.empty() &&
         BearerToken(auth_header) == options_.admin_token;
}

void JudgingServer::Routes() {
  auto& s = *server_;

  s.Post("/api/v1/session", [this](const httplib::Request& req,
                                   httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (!body.is_object() || !body.contains("token") ||
        !body["token"].is_string()) {
      return SendError(res, 400, "expected {\"token\": string}");
    }
    auto judge = service_.Authenticate(body["token"].get<std::string>());
    if (!judge) return SendError(res, 401, "unknown token");
    const std::string session = RandomToken();
    {
      std::lock_guard lock(sessions_mu_);
      sessions_[session] = *judge;
    }
    SendJson(res, 200,
             {{"session", session},
              {"progress", ProgressToJson(service_.GetProgress(*judge))}});
  });

  s.Get("/api/v1/next", [this](const httplib::Request& req,
                               httplib::Response& res) {
    auto judge = SessionJudge(req.get_header_value("Authorization"));
    if (!judge) return SendError(res, 401, "unknown session");
    SendJson(res, 200, NextPoemToJson(service_.Next(*judge)));
  });

  s.Get("/api/v1/progress", [this](const httplib::Request& req,
                                   httplib::Response& res) {
    auto judge = SessionJudge(req.get_header_value("Authorization"));
    if (!judge) return SendError(res, 401, "unknown session");
    SendJson(res, 200, ProgressToJson(service_.GetProgress(*judge)));
  });

  s.Post("/api/v1/rating", [this](const httplib::Request& req,
                                  httplib::Response& res) {
    auto judge = SessionJudge(req.get_header_value("Authorization"));
    if (!judge) return SendError(res, 401, "unknown session");
    json body = json::parse(req.body, nullptr, false);
    if (!body.is_object() || !body.contains("poem_id") ||
        !body["poem_id"].is_string() || !body.contains("probability") ||
        !body["probability"].is_number()) {
      return SendError(res, 400,
                       "expected {\"poem_id\": string, \"probability\": number}");
    }
    const RateOutcome outcome =
        service_.Rate(*judge, body["poem_id"].get<std::string>(),
                      body["probability"].get<double>());
    if (outcome.status != RateStatus::kStored) {
      return SendError(res, HttpStatus(outcome.status),
                       ToString(outcome.status));
    }
    SendJson(res, 201,
             {{"poem_id", outcome.record->poem_id},
              {"probability", outcome.record->probability},
              {"progress", ProgressToJson(service_.GetProgress(*judge))}});
  });

  s.Get("/api/v1/export", [this](const httplib::Request& req,
                                 httplib::Response& res) {
    if (!IsAdmin(req.get_header_value("Authorization"))) {
      return SendError(res, 403, "admin token required");
    }
    res.set_content(service_.ExportCsv(), "text/csv; charset=utf-8");
  });

  s.Get("/api/v1/admin/status", [this](const httplib::Request& req,
                                       httplib::Response& res) {
    if (!IsAdmin(req.get_header_value("Authorization"))) {
      return SendError(res, 403, "admin token required");
    }
    SendJson(res, 200, service_.Status());
  });

  s.Post("/api/v1/plan", [this](const httplib::Request& req,
                                httplib::Response& res) {
    if (!IsAdmin(req.get_header_value("Authorization"))) {
      return SendError(res, 403, "admin token required");
    }
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) return SendError(res, 400, "malformed JSON");
    try {
      service_.ReplacePlan(PlanFromJson(body));
    } catch (const ValidationError& e) {
      return SendError(res, 422, e.what());
    }
    SendJson(res, 200, {{"status", "plan replaced"}});
  });

  s.Post("/api/v1/admin/void", [this](const httplib::Request& req,
                                      httplib::Response& res) {
    if (!IsAdmin(req.get_header_value("Authorization"))) {
      return SendError(res, 403, "admin token required");
    }
    json body = json::parse(req.body, nullptr, false);
    if (!body.is_object() || !body.contains("judge_id") ||
        !body.contains("poem_id")) {
      return SendError(res, 400, "expected {\"judge_id\", \"poem_id\"}");
    }
    if (!service_.VoidRating(body["judge_id"].get<std::string>(),
                             body["poem_id"].get<std::string>())) {
      return SendError(res, 404, "no such rating");
    }
    SendJson(res, 200, {{"status", "voided"}});
  });

  if (!options_.static_dir.empty()) {
    s.set_mount_point("/", options_.static_dir.string());
  }
}

bool JudgingServer::Listen() {
  return server_->listen(options_.host, options_.port);
}

int JudgingServer::BindToAnyPort() {
  return server_->bind_to_any_port(options_.host);
}

bool JudgingServer::ListenAfterBind() { return server_->listen_after_bind(); }

void JudgingServer::Stop() {
  if (server_) server_->stop();
}

void JudgingServer::WaitUntilReady() const { server_->wait_until_ready(); }

}  // namespace proftap
