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

#ifndef PROFTAP_PIPELINE_H_
#define PROFTAP_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proftap/antiplag.h"
#include "proftap/generation.h"
#include "proftap/judging.h"
#include "proftap/report.h"
#include "proftap/simjudge.h"
#include "proftap/stats.h"

namespace proftap {

// Files making up a run directory.
namespace run_files {
inline constexpr char kConfig[] = "config.json";
inline constexpr char kTitles[] = "titles.jsonl";
inline constexpr char kHuman[] = "human.jsonl";
inline constexpr char kCheckpoint[] = "generation.checkpoint.jsonl";
inline constexpr char kGenerated[] = "generated.jsonl";
inline constexpr char kFailures[] = "failures.json";
inline constexpr char kPool[] = "pool.jsonl";
inline constexpr char kPlan[] = "plan.json";
inline constexpr char kJudges[] = "judges.json";
inline constexpr char kManifest[] = "manifest.json";
inline constexpr char kRatingsLog[] = "ratings.log.jsonl";
inline constexpr char kRatingsSnapshot[] = "ratings.snapshot.json";
inline constexpr char kReportDir[] = "report";
}  // namespace run_files

struct RunConfig {
  std::filesystem::path corpus_path;
  // Anti-plagiarism database; the corpus itself when empty.
  std::filesystem::path database_path;
  // Optional TSV variant-character map applied on ingestion.
  std::filesystem::path char_map_path;
  std::size_t titles_count = 110;
  std::size_t k_min = 2;
  std::uint64_t seed = 0;
  std::vector<ModelSpec> models;
  // Default prompt when empty.
  std::filesystem::path template_path;
  MatchMode plag_mode = MatchMode::kSamePoemConsecutive;
  FilterScope filter_scope = FilterScope::kAiOnly;
  Alternative alternative = Alternative::kTwoSided;
  // Judge ids; "judge01".. "judgeNN" from `judges` when given as a count.
  std::vector<std::string> judges;
  std::filesystem::path output_dir;
};

// Relative paths resolve against `base_dir` (the config file's directory).
RunConfig RunConfigFromJson(const nlohmann::json& json,
                            const std::filesystem::path& base_dir);
nlohmann::json RunConfigToJson(const RunConfig& config);
RunConfig LoadRunConfig(const std::filesystem::path& path);
void ValidateRunConfig(const RunConfig& config);

std::vector<std::string> DefaultJudgeIds(std::size_t count);

enum class RunStage { kGeneration, kPlan };

struct RunHooks {
  std::function<std::shared_ptr<ModelAdapter>(const ModelSpec&)> make_adapter =
      MakeAdapter;
  // Called after each newly checkpointed pair; throwing aborts the run.
  std::function<void(const PairResult&)> after_pair;
  // Progress messages; nothing is printed when null.
  std::ostream* log = nullptr;
  RunStage stop_after = RunStage::kPlan;
};

struct RunSummary {
  std::size_t titles = 0;
  std::size_t generated = 0;
  std::size_t resumed = 0;
  std::vector<GenerationFailure> failures;
  std::size_t pool = 0;
  std::size_t judges = 0;
};

// Steps from title sampling through the assignment plan. Generation is
// checkpointed per pair, so rerunning after an interruption only generates
// the missing pairs. Other stages are recomputed deterministically.
RunSummary CmdRun(const RunConfig& config, const RunHooks& hooks = {});

struct RunArtifacts {
  RunConfig config;
  std::vector<Poem> pool;
  AssignmentPlan plan;
  std::vector<Judge> judges;
  std::string admin_token;
};

RunArtifacts LoadRun(const std::filesystem::path& run_dir);

// Ratings collected by the judging service of a run.
std::shared_ptr<RatingStore> OpenRunStore(const std::filesystem::path& run_dir);

struct AnalyzeOptions {
  // Ratings CSV; the run's own rating store when unset.
  std::optional<std::filesystem::path> ratings_csv;
  // <run>/report when empty.
  std::filesystem::path out_dir;
  std::optional<FilterScope> filter_scope;
  std::optional<Alternative> alternative;
};

struct AnalyzeResult {
  AnalysisReport report;
  std::vector<std::string> warnings;
  std::filesystem::path out_dir;
};

AnalyzeResult CmdAnalyze(const std::filesystem::path& run_dir,
                         const AnalyzeOptions& options = {});

// Rates a run's plan with one synthetic judge model for every judge.
std::vector<RatingRecord> SimulateRunRatings(const RunArtifacts& run,
                                             const JudgeModel& base,
                                             std::uint64_t seed);

}  // namespace proftap

#endif  // PROFTAP_PIPELINE_H_
