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

#include "proftap/simjudge.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "proftap/error.h"
#include "proftap/records.h"

namespace proftap {

std::string_view ToString(JudgeKind kind) {
  switch (kind) {
    case JudgeKind::kOracle:
      return "oracle";
    case JudgeKind::kRandom:
      return "random";
    case JudgeKind::kGaussian:
      return "gaussian";
  }
  return "?";
}

JudgeKind ParseJudgeKind(std::string_view text) {
  if (text == "oracle") return JudgeKind::kOracle;
  if (text == "random") return JudgeKind::kRandom;
  if (text == "gaussian") return JudgeKind::kGaussian;
  throw ValidationError(fmt::format("unknown judge model '{}'", text));
}

void ValidateJudgeModel(const JudgeModel& model) {
  if (model.kind != JudgeKind::kGaussian) return;
  if (!(model.d >= 0.0) || !std::isfinite(model.d)) {
    throw ValidationError("judge model d must be a finite value >= 0");
  }
  if (!(model.sigma > 0.0) || !std::isfinite(model.sigma)) {
    throw ValidationError("judge model sigma must be > 0");
  }
}

SimulatedJudge::SimulatedJudge(const JudgeModel& model)
    : model_(model), rng_(model.seed) {
  ValidateJudgeModel(model);
}

double SimulatedJudge::Rate(bool human_authored) {
  switch (model_.kind) {
    case JudgeKind::kOracle:
      return human_authored ? 1.0 : 0.0;
    case JudgeKind::kRandom:
      return rng_.Uniform01();
    case JudgeKind::kGaussian: {
      const double mean = 0.5 + (human_authored ? 0.5 : -0.5) * model_.d;
      return std::clamp(rng_.Normal(mean, model_.sigma), 0.0, 1.0);
    }
  }
  return 0.5;
}

std::vector<RatingRecord> SimulateRatings(
    const AssignmentPlan& plan,
    const std::unordered_map<std::string, Authorship>& truth,
    const std::map<std::string, JudgeModel>& judges) {
  std::vector<RatingRecord> out;
  std::int64_t clock = kSimulatedEpochMs;
  for (const auto& [judge_id, poems] : plan.assignments) {
    const auto model = judges.find(judge_id);
    if (model == judges.end()) {
      throw ValidationError(
          fmt::format("no judge model for planned judge '{}'", judge_id));
    }
    SimulatedJudge judge(model->second);
    for (const auto& poem_id : poems) {
      const auto cls = truth.find(poem_id);
      if (cls == truth.end()) {
        throw ValidationError(
            fmt::format("planned poem '{}' has no ground truth", poem_id));
      }
      out.push_back({judge_id, poem_id,
                     judge.Rate(cls->second == Authorship::kHuman), clock});
      clock += 1000;
    }
  }
  return out;
}

std::map<std::string, JudgeModel> UniformPanel(
    std::span<const std::string> judge_ids, const JudgeModel& base,
    std::uint64_t seed) {
  std::map<std::string, JudgeModel> out;
  for (std::size_t i = 0; i < judge_ids.size(); ++i) {
    JudgeModel m = base;
    m.seed = MixSeed(seed, i);
    out.emplace(judge_ids[i], m);
  }
  return out;
}

PowerConfig PowerConfigFromJson(const nlohmann::json& json) {
  if (!json.is_object()) throw ValidationError("power config must be an object");
  try {
    PowerConfig c;
    c.titles = json.value("T", c.titles);
    c.k = json.value("K", c.k);
    c.judges = json.value("judges", c.judges);
    c.models = json.value("models", c.models);
    if (json.contains("judge_model")) {
      const auto& jm = json.at("judge_model");
      if (jm.is_string()) {
        c.judge_model.kind = ParseJudgeKind(jm.get<std::string>());
      } else {
        c.judge_model.kind =
            ParseJudgeKind(jm.value("kind", std::string("gaussian")));
        c.judge_model.sigma = jm.value("sigma", c.judge_model.sigma);
      }
    }
    c.judge_model.sigma = json.value("sigma", c.judge_model.sigma);
    if (json.contains("d_grid")) {
      c.d_grid = json.at("d_grid").get<std::vector<double>>();
    }
    c.alpha = json.value("alpha", c.alpha);
    c.replications = json.value("replications", c.replications);
    c.seed = json.value("seed", c.seed);
    c.threads = json.value("threads", c.threads);
    if (json.contains("alternative")) {
      c.wilcoxon.alternative =
          ParseAlternative(json.at("alternative").get<std::string>());
    }
    ValidatePowerConfig(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad power config: ") + e.what());
  }
}

void ValidatePowerConfig(const PowerConfig& c) {
  if (c.d_grid.empty()) throw ValidationError("d_grid is empty");
  for (double d : c.d_grid) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw ValidationError(fmt::format("invalid d in grid: {}", d));
    }
  }
  if (c.replications < 1) throw ValidationError("replications must be >= 1");
  if (c.titles < 1 || c.models < 1) {
    throw ValidationError("T and models must be >= 1");
  }
  if (c.k < 1 || c.judges < c.k) {
    throw ValidationError("need K >= 1 and at least K judges");
  }
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  JudgeModel probe = c.judge_model;
  probe.d = 0.0;
  ValidateJudgeModel(probe);
}

namespace {

struct SyntheticPool {
  std::vector<Poem> poems;
  std::vector<std::string> ids;
  std::vector<std::string> judge_ids;
  std::vector<std::string> model_ids;
  std::unordered_map<std::string, Authorship> truth;
};

SyntheticPool MakePool(const PowerConfig& c) {
  SyntheticPool pool;
  const std::string body = "春眠不觉晓，处处闻啼鸟。\n夜来风雨声，花落知多少。";
  for (std::size_t m = 0; m < c.models; ++m) {
    pool.model_ids.push_back(fmt::format("sim{}", m));
  }
  for (std::size_t t = 0; t < c.titles; ++t) {
    const std::string ref = fmt::format("h{:04}", t);
    Poem human;
    human.id = ref;
    human.title = ref;
    human.body = body;
    human.title_ref = ref;
    pool.poems.push_back(human);
    pool.truth.emplace(ref, Authorship::kHuman);
    for (const auto& model : pool.model_ids) {
      Poem p = human;
      p.id = model + "/" + ref;
      p.source = Source::Model(model);
      pool.poems.push_back(p);
      pool.truth.emplace(p.id, Authorship::kModel);
    }
  }
  for (const auto& p : pool.poems) pool.ids.push_back(p.id);
  for (std::size_t j = 0; j < c.judges; ++j) {
    pool.judge_ids.push_back(fmt::format("judge{:02}", j));
  }
  return pool;
}

struct ReplicationResult {
  double auc_sum = 0.0;
  std::size_t rejections = 0;
};

ReplicationResult RunReplication(const PowerConfig& c, const SyntheticPool& pool,
                                 double d, std::uint64_t seed) {
  const AssignmentPlan plan = PlanAssignments(pool.ids, pool.judge_ids, c.k, seed);
  JudgeModel base = c.judge_model;
  base.d = d;
  const auto panel = UniformPanel(pool.judge_ids, base, MixSeed(seed, 0x5eed));
  const auto ratings = SimulateRatings(plan, pool.truth, panel);
  const Aggregation agg = AggregateScores(ratings, c.k);
  const ScoredPool scored = ScorePool(pool.poems, agg);
  ReportOptions options;
  options.wilcoxon = c.wilcoxon;
  ReplicationResult out;
  for (const auto& model : pool.model_ids) {
    const ModelReport r = BuildModelReport(scored.scored, model, options);
    out.auc_sum += r.auc;
    if (r.wilcoxon.p < c.alpha) ++out.rejections;
  }
  return out;
}

}  // namespace

std::vector<PowerRow> PowerAnalysis(const PowerConfig& config) {
  ValidatePowerConfig(config);
  const SyntheticPool pool = MakePool(config);
  const std::size_t jobs = config.d_grid.size() * config.replications;
  std::vector<ReplicationResult> results(jobs);

  std::size_t threads = config.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, jobs);

  std::atomic<std::size_t> next = 0;
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= jobs) return;
      const std::size_t g = job / config.replications;
      const std::size_t r = job % config.replications;
      try {
        results[job] = RunReplication(config, pool, config.d_grid[g],
                                      MixSeed(config.seed, r));
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = jobs;
      }
    }
  };
  std::vector<std::thread> workers;
  for (std::size_t i = 1; i < threads; ++i) workers.emplace_back(work);
  work();
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);

  std::vector<PowerRow> rows;
  const double n = static_cast<double>(config.replications * config.models);
  for (std::size_t g = 0; g < config.d_grid.size(); ++g) {
    double auc = 0.0;
    std::size_t rejections = 0;
    for (std::size_t r = 0; r < config.replications; ++r) {
      auc += results[g * config.replications + r].auc_sum;
      rejections += results[g * config.replications + r].rejections;
    }
    rows.push_back({config.d_grid[g], auc / n, rejections / n});
  }
  return rows;
}

std::string PowerTableToCsv(std::span<const PowerRow> rows) {
  std::string out = "d,mean_auc,rejection_rate\n";
  for (const auto& row : rows) {
    out += fmt::format("{},{},{}\n", FormatDouble(row.d),
                       FormatDouble(row.mean_auc),
                       FormatDouble(row.rejection_rate));
  }
  return out;
}

}  // namespace proftap
