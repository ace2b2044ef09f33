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

#include "proftap/judging.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>

#include "proftap/error.h"
#include "proftap/records.h"
#include "proftap/rng.h"

namespace proftap {

using nlohmann::json;

std::int64_t NowMillis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool AssignmentPlan::IsAssigned(const std::string& judge_id,
                                const std::string& poem_id) const {
  auto it = coverage.find(poem_id);
  return it != coverage.end() && it->second.count(judge_id) != 0;
}

namespace {

void RequireUnique(std::span<const std::string> ids, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (id.empty()) throw ValidationError(fmt::format("empty {} id", what));
    if (!seen.insert(id).second) {
      throw ValidationError(fmt::format("duplicate {} id '{}'", what, id));
    }
  }
}

}  // namespace

AssignmentPlan PlanAssignments(std::span<const std::string> poem_ids,
                               std::span<const std::string> judge_ids,
                               std::size_t k_min, std::uint64_t seed) {
  if (k_min == 0) throw ValidationError("k_min must be at least 1");
  if (judge_ids.size() < k_min) {
    throw ValidationError(fmt::format(
        "{} judges cannot give each poem {} distinct ratings",
        judge_ids.size(), k_min));
  }
  RequireUnique(poem_ids, "poem");
  RequireUnique(judge_ids, "judge");

  Rng rng(seed);
  std::vector<std::string> poems(poem_ids.begin(), poem_ids.end());
  std::vector<std::string> judges(judge_ids.begin(), judge_ids.end());
  rng.Shuffle(poems);
  rng.Shuffle(judges);

  AssignmentPlan plan;
  plan.k_min = k_min;
  plan.seed = seed;
  for (const auto& j : judges) plan.assignments[j];
  // k_min consecutive cursor positions modulo |judges| are distinct because
  // k_min <= |judges|.
  std::size_t cursor = 0;
  for (const auto& poem : poems) {
    for (std::size_t c = 0; c < k_min; ++c) {
      const std::string& judge = judges[cursor % judges.size()];
      plan.assignments[judge].push_back(poem);
      plan.coverage[poem].insert(judge);
      ++cursor;
    }
  }
  for (auto& [judge, list] : plan.assignments) rng.Shuffle(list);
  return plan;
}

void ValidatePlan(const AssignmentPlan& plan) {
  if (plan.k_min == 0) throw ValidationError("plan: k_min must be >= 1");
  std::map<std::string, std::set<std::string>> rebuilt;
  for (const auto& [judge, poems] : plan.assignments) {
    std::unordered_set<std::string> seen;
    for (const auto& poem : poems) {
      if (!seen.insert(poem).second) {
        throw ValidationError(fmt::format(
            "plan: judge {} is assigned poem {} twice", judge, poem));
      }
      rebuilt[poem].insert(judge);
    }
  }
  if (rebuilt != plan.coverage) {
    throw ValidationError("plan: coverage does not match assignments");
  }
  for (const auto& [poem, judges] : plan.coverage) {
    if (judges.size() < plan.k_min) {
      throw ValidationError(fmt::format(
          "plan: poem {} covered by {} judges, need {}", poem, judges.size(),
          plan.k_min));
    }
  }
}

json PlanToJson(const AssignmentPlan& plan) {
  json assignments = json::object();
  for (const auto& [judge, poems] : plan.assignments) {
    assignments[judge] = poems;
  }
  return {{"k_min", plan.k_min},
          {"seed", plan.seed},
          {"assignments", assignments}};
}

AssignmentPlan PlanFromJson(const json& j) {
  AssignmentPlan plan;
  try {
    plan.k_min = j.at("k_min").get<std::size_t>();
    plan.seed = j.value("seed", std::uint64_t{0});
    for (const auto& [judge, poems] : j.at("assignments").items()) {
      auto& list = plan.assignments[judge];
      for (const auto& poem : poems) {
        list.push_back(poem.get<std::string>());
        plan.coverage[list.back()].insert(judge);
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("plan: {}", e.what()));
  }
  ValidatePlan(plan);
  return plan;
}

bool IsValidProbability(double p) { return p >= 0.0 && p <= 1.0; }

Aggregation AggregateScores(std::span<const RatingRecord> ratings,
                            std::size_t k_min) {
  std::map<std::string, std::vector<double>> by_poem;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : ratings) {
    if (!IsValidProbability(r.probability)) {
      throw ValidationError(fmt::format(
          "rating by {} on {}: probability {} outside [0,1]", r.judge_id,
          r.poem_id, r.probability));
    }
    if (!seen.emplace(r.judge_id, r.poem_id).second) {
      throw ValidationError(fmt::format("judge {} rated poem {} twice",
                                        r.judge_id, r.poem_id));
    }
    by_poem[r.poem_id].push_back(r.probability);
  }
  Aggregation out;
  for (auto& [poem, values] : by_poem) {
    std::sort(values.begin(), values.end());
    const double sum = std::accumulate(values.begin(), values.end(), 0.0);
    out.scores[poem] = {poem, sum / static_cast<double>(values.size()),
                        values.size()};
    if (values.size() < k_min) out.below_k.push_back(poem);
  }
  return out;
}

ScoredPool ScorePool(std::span<const Poem> pool, const Aggregation& aggregation,
                     const SegmentOptions& options) {
  ScoredPool out;
  for (const Poem& poem : pool) {
    const auto it = aggregation.scores.find(poem.id);
    if (it == aggregation.scores.end()) {
      out.unrated.push_back(poem.id);
      continue;
    }
    ScoredPoem s;
    s.poem_id = poem.id;
    s.source = poem.source;
    s.title_ref = poem.title_ref.empty() ? poem.id : poem.title_ref;
    s.q = it->second.q;
    s.features = ComputeFeatures(SegmentLines(poem, options));
    out.scored.push_back(std::move(s));
  }
  return out;
}

RatingStore::RatingStore(std::filesystem::path log_path,
                         std::filesystem::path snapshot_path,
                         std::size_t snapshot_every)
    : log_path_(std::move(log_path)),
      snapshot_path_(std::move(snapshot_path)),
      snapshot_every_(std::max<std::size_t>(1, snapshot_every)) {
  std::uint64_t snapshot_seq = 0;
  if (!snapshot_path_.empty() && std::filesystem::exists(snapshot_path_)) {
    const json snap = ReadJsonFile(snapshot_path_);
    snapshot_seq = snap.at("seq").get<std::uint64_t>();
    for (const auto& r : snap.at("ratings")) {
      json entry = r;
      entry["op"] = "rate";
      Apply(entry);
    }
    seq_ = snapshot_seq;
  }
  if (!log_path_.empty() && std::filesystem::exists(log_path_)) {
    std::ifstream in(log_path_, std::ios::binary);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json entry;
      try {
        entry = json::parse(line);
      } catch (const json::parse_error&) {
        // A torn final write from a crash; anything earlier is corruption.
        if (in.peek() == std::char_traits<char>::eof()) break;
        throw ValidationError(fmt::format("{}:{}: corrupt rating log entry",
                                          log_path_.string(), lineno));
      }
      const auto seq = entry.at("seq").get<std::uint64_t>();
      if (seq <= snapshot_seq) continue;
      Apply(entry);
      seq_ = std::max(seq_, seq);
    }
  }
}

void RatingStore::Apply(const json& entry) {
  const std::string op = entry.at("op").get<std::string>();
  const std::string judge = entry.at("judge_id").get<std::string>();
  const std::string poem = entry.at("poem_id").get<std::string>();
  const auto key = std::make_pair(judge, poem);
  if (op == "rate") {
    if (by_key_.count(key) != 0) return;
    RatingRecord r{judge, poem, entry.at("probability").get<double>(),
                   entry.value("submitted_at_ms", std::int64_t{0})};
    by_key_[key] = records_.size();
    records_.push_back(std::move(r));
  } else if (op == "void") {
    auto it = by_key_.find(key);
    if (it == by_key_.end()) return;
    records_.erase(records_.begin() + static_cast<std::ptrdiff_t>(it->second));
    by_key_.clear();
    for (std::size_t i = 0; i < records_.size(); ++i) {
      by_key_[{records_[i].judge_id, records_[i].poem_id}] = i;
    }
  }
}

void RatingStore::AppendLog(const json& entry) {
  if (log_path_.empty()) return;
  std::ofstream out(log_path_, std::ios::binary | std::ios::app);
  out << entry.dump() << '\n';
  out.flush();
  if (!out) {
    throw StageError(
        fmt::format("cannot append to rating log {}", log_path_.string()));
  }
}

bool RatingStore::Insert(const RatingRecord& record) {
  std::lock_guard lock(mu_);
  if (by_key_.count({record.judge_id, record.poem_id}) != 0) return false;
  json entry = {{"seq", seq_ + 1},
                {"op", "rate"},
                {"judge_id", record.judge_id},
                {"poem_id", record.poem_id},
                {"probability", record.probability},
                {"submitted_at_ms", record.submitted_at_ms}};
  AppendLog(entry);
  ++seq_;
  Apply(entry);
  if (!snapshot_path_.empty() && ++since_snapshot_ >= snapshot_every_) {
    WriteSnapshotLocked();
  }
  return true;
}

bool RatingStore::Void(const std::string& judge_id,
                       const std::string& poem_id) {
  std::lock_guard lock(mu_);
  if (by_key_.count({judge_id, poem_id}) == 0) return false;
  json entry = {{"seq", seq_ + 1},
                {"op", "void"},
                {"judge_id", judge_id},
                {"poem_id", poem_id}};
  AppendLog(entry);
  ++seq_;
  Apply(entry);
  return true;
}

bool RatingStore::Contains(const std::string& judge_id,
                           const std::string& poem_id) const {
  std::lock_guard lock(mu_);
  return by_key_.count({judge_id, poem_id}) != 0;
}

std::size_t RatingStore::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::vector<RatingRecord> RatingStore::Ratings() const {
  std::lock_guard lock(mu_);
  return records_;
}

void RatingStore::WriteSnapshot() {
  std::lock_guard lock(mu_);
  WriteSnapshotLocked();
}

void RatingStore::WriteSnapshotLocked() {
  if (snapshot_path_.empty()) return;
  json ratings = json::array();
  for (const auto& r : records_) {
    ratings.push_back({{"judge_id", r.judge_id},
                       {"poem_id", r.poem_id},
                       {"probability", r.probability},
                       {"submitted_at_ms", r.submitted_at_ms}});
  }
  WriteFileAtomic(snapshot_path_,
                  json{{"seq", seq_}, {"ratings", ratings}}.dump());
  since_snapshot_ = 0;
}

std::string_view ToString(RateStatus status) {
  switch (status) {
    case RateStatus::kStored:
      return "stored";
    case RateStatus::kUnknownJudge:
      return "unknown judge";
    case RateStatus::kOutOfRange:
      return "probability must be within [0, 1]";
    case RateStatus::kUnassigned:
      return "poem is not assigned to this judge";
    case RateStatus::kDuplicate:
      return "poem already rated by this judge";
  }
  return "unknown";
}

JudgingService::JudgingService(std::vector<Poem> pool, AssignmentPlan plan,
                               std::vector<Judge> judges,
                               std::shared_ptr<RatingStore> store, Clock clock)
    : judges_(std::move(judges)),
      store_(std::move(store)),
      clock_(clock ? std::move(clock) : Clock(NowMillis)) {
  for (auto& p : pool) {
    const std::string id = p.id;
    if (!pool_.emplace(id, std::move(p)).second) {
      throw ValidationError(fmt::format("duplicate poem id '{}' in pool", id));
    }
  }
  for (const auto& j : judges_) {
    if (j.access_token.empty()) {
      throw ValidationError(fmt::format("judge {} has no token", j.judge_id));
    }
    if (!token_to_judge_.emplace(j.access_token, j.judge_id).second) {
      throw ValidationError("two judges share an access token");
    }
    judge_mu_.emplace(j.judge_id, std::make_unique<std::mutex>());
  }
  if (judge_mu_.size() != judges_.size()) {
    throw ValidationError("duplicate judge id in roster");
  }
  if (!store_) store_ = std::make_shared<RatingStore>();
  ReplacePlan(std::move(plan));
}

std::optional<std::string> JudgingService::Authenticate(
    const std::string& token) const {
  auto it = token_to_judge_.find(token);
  if (it == token_to_judge_.end()) return std::nullopt;
  return it->second;
}

bool JudgingService::HasJudge(const std::string& judge_id) const {
  return judge_mu_.count(judge_id) != 0;
}

std::mutex& JudgingService::JudgeMutex(const std::string& judge_id) const {
  return *judge_mu_.at(judge_id);
}

Progress JudgingService::ProgressLocked(const std::string& judge_id) const {
  Progress progress;
  auto it = plan_.assignments.find(judge_id);
  if (it == plan_.assignments.end()) return progress;
  progress.total = it->second.size();
  for (const auto& poem : it->second) {
    if (store_->Contains(judge_id, poem)) ++progress.rated;
  }
  return progress;
}

Progress JudgingService::GetProgress(const std::string& judge_id) const {
  std::shared_lock plan_lock(plan_mu_);
  return ProgressLocked(judge_id);
}

NextPoem JudgingService::Next(const std::string& judge_id) {
  if (!HasJudge(judge_id)) {
    throw ValidationError(fmt::format("unknown judge '{}'", judge_id));
  }
  std::lock_guard judge_lock(JudgeMutex(judge_id));
  std::shared_lock plan_lock(plan_mu_);
  NextPoem next;
  next.progress = ProgressLocked(judge_id);
  auto it = plan_.assignments.find(judge_id);
  if (it == plan_.assignments.end()) return next;
  for (const auto& poem_id : it->second) {
    if (store_->Contains(judge_id, poem_id)) continue;
    const Poem& poem = pool_.at(poem_id);
    next.poem = PoemView{poem.id, poem.title, poem.body};
    break;
  }
  return next;
}

RateOutcome JudgingService::Rate(const std::string& judge_id,
                                 const std::string& poem_id,
                                 double probability) {
  if (!HasJudge(judge_id)) return {RateStatus::kUnknownJudge, std::nullopt};
  if (!IsValidProbability(probability)) {
    return {RateStatus::kOutOfRange, std::nullopt};
  }
  std::lock_guard judge_lock(JudgeMutex(judge_id));
  std::shared_lock plan_lock(plan_mu_);
  if (!plan_.IsAssigned(judge_id, poem_id)) {
    return {RateStatus::kUnassigned, std::nullopt};
  }
  RatingRecord record{judge_id, poem_id, probability, clock_()};
  if (!store_->Insert(record)) return {RateStatus::kDuplicate, std::nullopt};
  return {RateStatus::kStored, record};
}

void JudgingService::ReplacePlan(AssignmentPlan plan) {
  ValidatePlan(plan);
  for (const auto& [judge, poems] : plan.assignments) {
    if (!HasJudge(judge)) {
      throw ValidationError(
          fmt::format("plan names unknown judge '{}'", judge));
    }
    for (const auto& poem : poems) {
      if (pool_.count(poem) == 0) {
        throw ValidationError(
            fmt::format("plan names poem '{}' missing from the pool", poem));
      }
    }
  }
  std::unique_lock lock(plan_mu_);
  plan_ = std::move(plan);
}

bool JudgingService::VoidRating(const std::string& judge_id,
                                const std::string& poem_id) {
  if (!HasJudge(judge_id)) return false;
  std::lock_guard judge_lock(JudgeMutex(judge_id));
  return store_->Void(judge_id, poem_id);
}

void JudgingService::Reassign(const std::string& poem_id,
                              const std::string& from_judge,
                              const std::string& to_judge) {
  if (!HasJudge(from_judge) || !HasJudge(to_judge)) {
    throw ValidationError("reassign: unknown judge");
  }
  std::unique_lock lock(plan_mu_);
  if (!plan_.IsAssigned(from_judge, poem_id)) {
    throw ValidationError(fmt::format("reassign: {} does not hold poem {}",
                                      from_judge, poem_id));
  }
  if (plan_.IsAssigned(to_judge, poem_id)) {
    throw ValidationError(fmt::format("reassign: {} already holds poem {}",
                                      to_judge, poem_id));
  }
  if (store_->Contains(from_judge, poem_id)) {
    throw ValidationError("reassign: poem already rated; void it first");
  }
  auto& from = plan_.assignments[from_judge];
  from.erase(std::find(from.begin(), from.end(), poem_id));
  plan_.assignments[to_judge].push_back(poem_id);
  plan_.coverage[poem_id].erase(from_judge);
  plan_.coverage[poem_id].insert(to_judge);
}

std::string JudgingService::ExportCsv() const {
  return RatingsToCsv(store_->Ratings());
}

json JudgingService::Status() const {
  std::shared_lock plan_lock(plan_mu_);
  json judges = json::array();
  for (const auto& j : judges_) {
    const Progress p = ProgressLocked(j.judge_id);
    judges.push_back({{"judge_id", j.judge_id},
                      {"display_name", j.display_name},
                      {"rated", p.rated},
                      {"total", p.total}});
  }
  json poems = json::array();
  for (const auto& [poem, assigned] : plan_.coverage) {
    std::size_t rated = 0;
    for (const auto& judge : assigned) rated += store_->Contains(judge, poem);
    poems.push_back({{"poem_id", poem},
                     {"rated", rated},
                     {"assigned", assigned.size()},
                     {"k_min", plan_.k_min}});
  }
  return {{"judges", judges},
          {"poems", poems},
          {"ratings", store_->size()},
          {"k_min", plan_.k_min}};
}

}  // namespace proftap
