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

#ifndef PROFTAP_SIMJUDGE_H_
#define PROFTAP_SIMJUDGE_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "proftap/judging.h"
#include "proftap/rng.h"
#include "proftap/stats.h"

namespace proftap {

enum class JudgeKind {
  kOracle,    // 1 for human-authored, 0 for generated
  kRandom,    // Uniform(0, 1), blind to the class
  kGaussian,  // clamp(Normal(0.5 +/- d/2, sigma), 0, 1)
};

std::string_view ToString(JudgeKind kind);
JudgeKind ParseJudgeKind(std::string_view text);

struct JudgeModel {
  JudgeKind kind = JudgeKind::kGaussian;
  double d = 0.0;
  double sigma = 0.2;
  std::uint64_t seed = 0;
};

void ValidateJudgeModel(const JudgeModel& model);

// A synthetic judge. Ratings depend only on the seed and call order.
class SimulatedJudge {
 public:
  explicit SimulatedJudge(const JudgeModel& model);
  double Rate(bool human_authored);

 private:
  JudgeModel model_;
  Rng rng_;
};

enum class Authorship { kHuman, kModel };

// Timestamps of simulated ratings count milliseconds from this instant
// (2024-01-01T00:00:00Z) so outputs stay reproducible.
inline constexpr std::int64_t kSimulatedEpochMs = 1704067200000;

// One rating per plan assignment, judges in id order and each judge's poems
// in presentation order. Throws ValidationError when a planned poem is
// missing from `truth` or a planned judge from `judges`.
std::vector<RatingRecord> SimulateRatings(
    const AssignmentPlan& plan,
    const std::unordered_map<std::string, Authorship>& truth,
    const std::map<std::string, JudgeModel>& judges);

// Copies `base` to every judge id with seeds MixSeed(seed, index).
std::map<std::string, JudgeModel> UniformPanel(
    std::span<const std::string> judge_ids, const JudgeModel& base,
    std::uint64_t seed);

struct PowerConfig {
  std::size_t titles = 110;
  std::size_t k = 2;
  std::size_t judges = 13;
  std::size_t models = 1;
  // kind and sigma are used; d comes from the grid.
  JudgeModel judge_model;
  std::vector<double> d_grid = {0.0};
  double alpha = 0.05;
  std::size_t replications = 100;
  std::uint64_t seed = 0;
  WilcoxonOptions wilcoxon;
  // Worker threads; 0 picks the hardware concurrency.
  std::size_t threads = 0;
};

PowerConfig PowerConfigFromJson(const nlohmann::json& json);
void ValidatePowerConfig(const PowerConfig& config);

struct PowerRow {
  double d = 0.0;
  double mean_auc = 0.0;
  double rejection_rate = 0.0;
};

// Runs plan -> simulate -> aggregate -> report `replications` times per d.
// Replication r uses seed MixSeed(config.seed, r) for every d, so the grid
// points share their random streams. Every model's AUC and p contribute.
std::vector<PowerRow> PowerAnalysis(const PowerConfig& config);

std::string PowerTableToCsv(std::span<const PowerRow> rows);

}  // namespace proftap

#endif  // PROFTAP_SIMJUDGE_H_
