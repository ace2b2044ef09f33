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

#ifndef PROFTAP_JUDGING_H_
#define PROFTAP_JUDGING_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "proftap/corpus.h"
#include "proftap/stats.h"

namespace proftap {

struct Judge {
  std::string judge_id;
  std::string access_token;
  std::string display_name;
};

struct AssignmentPlan {
  // Each judge's poems in blind presentation order.
  std::map<std::string, std::vector<std::string>> assignments;
  // Poem id -> judges rating it.
  std::map<std::string, std::set<std::string>> coverage;
  std::size_t k_min = 2;
  std::uint64_t seed = 0;

  bool IsAssigned(const std::string& judge_id,
                  const std::string& poem_id) const;
};

// Shuffles the pool, deals k_min copies of every poem round-robin over a
// shuffled judge order (so a judge never receives the same poem twice and
// loads differ by at most one), then shuffles each judge's list. Throws
// ValidationError when there are fewer judges than k_min, k_min is zero,
// or ids repeat.
AssignmentPlan PlanAssignments(std::span<const std::string> poem_ids,
                               std::span<const std::string> judge_ids,
                               std::size_t k_min, std::uint64_t seed);

// Checks coverage >= k_min, no repeats per judge and that coverage mirrors
// assignments. Throws ValidationError describing the first violation.
void ValidatePlan(const AssignmentPlan& plan);

nlohmann::json PlanToJson(const AssignmentPlan& plan);
// Rebuilds coverage from assignments and validates.
AssignmentPlan PlanFromJson(const nlohmann::json& json);

struct RatingRecord {
  std::string judge_id;
  std::string poem_id;
  // Judge's belief that the poem is human-authored.
  double probability = 0.0;
  // Milliseconds since the Unix epoch (UTC).
  std::int64_t submitted_at_ms = 0;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

bool IsValidProbability(double p);

struct AggregatedScore {
  std::string poem_id;
  double q = 0.0;
  std::size_t n_ratings = 0;
};

struct Aggregation {
  std::map<std::string, AggregatedScore> scores;
  // Poems rated by fewer than k_min judges (still scored).
  std::vector<std::string> below_k;
};

// Per-poem arithmetic mean. Independent of rating order: each poem's
// probabilities are summed in sorted order. Throws ValidationError on
// an out-of-range probability or a repeated (judge, poem).
Aggregation AggregateScores(std::span<const RatingRecord> ratings,
                            std::size_t k_min = 2);

struct ScoredPool {
  // Pool order; poems without any rating are left out.
  std::vector<ScoredPoem> scored;
  std::vector<std::string> unrated;
};

// Joins pool poems with their aggregated scores and structural features.
ScoredPool ScorePool(std::span<const Poem> pool, const Aggregation& aggregation,
                     const SegmentOptions& options = {});

// Append-only durable rating log with periodic snapshots. With empty paths
// the store is in-memory. All members are thread-safe.
class RatingStore {
 public:
  RatingStore() = default;
  // Replays `snapshot_path` then every log entry newer than it.
  RatingStore(std::filesystem::path log_path,
              std::filesystem::path snapshot_path,
              std::size_t snapshot_every = 64);

  RatingStore(const RatingStore&) = delete;
  RatingStore& operator=(const RatingStore&) = delete;

  // Stores the record unless (judge, poem) already has one. The log entry is
  // flushed before returning.
  bool Insert(const RatingRecord& record);
  // Removes a rating (administrative correction). Returns false if absent.
  bool Void(const std::string& judge_id, const std::string& poem_id);

  bool Contains(const std::string& judge_id, const std::string& poem_id) const;
  std::size_t size() const;
  // All ratings in submission order.
  std::vector<RatingRecord> Ratings() const;
  void WriteSnapshot();

 private:
  void AppendLog(const nlohmann::json& entry);
  void WriteSnapshotLocked();
  void Apply(const nlohmann::json& entry);

  mutable std::mutex mu_;
  std::filesystem::path log_path_;
  std::filesystem::path snapshot_path_;
  std::size_t snapshot_every_ = 64;
  std::uint64_t seq_ = 0;
  std::size_t since_snapshot_ = 0;
  std::vector<RatingRecord> records_;  // submission order, voids removed
  std::map<std::pair<std::string, std::string>, std::size_t> by_key_;
};

struct Progress {
  std::size_t rated = 0;
  std::size_t total = 0;
};

// What a judge may see of a poem: nothing about its source.
struct PoemView {
  std::string poem_id;
  std::string title;
  std::string body;
};

struct NextPoem {
  std::optional<PoemView> poem;  // empty when the judge is done
  Progress progress;
};

enum class RateStatus {
  kStored,
  kUnknownJudge,
  kOutOfRange,
  kUnassigned,
  kDuplicate,
};

std::string_view ToString(RateStatus status);

struct RateOutcome {
  RateStatus status = RateStatus::kStored;
  std::optional<RatingRecord> record;
};

// Blind judging state machine over a fixed pool, plan and judge roster.
// Per-judge transitions are serialized; different judges proceed in
// parallel.
class JudgingService {
 public:
  using Clock = std::function<std::int64_t()>;

  JudgingService(std::vector<Poem> pool, AssignmentPlan plan,
                 std::vector<Judge> judges, std::shared_ptr<RatingStore> store,
                 Clock clock = {});

  std::optional<std::string> Authenticate(const std::string& token) const;
  bool HasJudge(const std::string& judge_id) const;

  NextPoem Next(const std::string& judge_id);
  Progress GetProgress(const std::string& judge_id) const;
  RateOutcome Rate(const std::string& judge_id, const std::string& poem_id,
                   double probability);

  // Administrative operations.
  void ReplacePlan(AssignmentPlan plan);
  bool VoidRating(const std::string& judge_id, const std::string& poem_id);
  // Moves an unrated assignment to another judge.
  void Reassign(const std::string& poem_id, const std::string& from_judge,
                const std::string& to_judge);
  // CSV with header judge_id,poem_id,probability,submitted_at.
  std::string ExportCsv() const;
  // Per-judge progress and per-poem coverage against k_min.
  nlohmann::json Status() const;

  std::vector<RatingRecord> Ratings() const { return store_->Ratings(); }
  const std::vector<Judge>& judges() const { return judges_; }

 private:
  std::mutex& JudgeMutex(const std::string& judge_id) const;
  Progress ProgressLocked(const std::string& judge_id) const;

  std::unordered_map<std::string, Poem> pool_;
  std::vector<Judge> judges_;
  std::unordered_map<std::string, std::string> token_to_judge_;
  std::shared_ptr<RatingStore> store_;
  Clock clock_;

  mutable std::shared_mutex plan_mu_;
  AssignmentPlan plan_;
  mutable std::unordered_map<std::string, std::unique_ptr<std::mutex>>
      judge_mu_;
};

// Current wall-clock time in Unix milliseconds.
std::int64_t NowMillis();

}  // namespace proftap

#endif  // PROFTAP_JUDGING_H_
