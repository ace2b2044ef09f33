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

#include <cmath>

#include "doctest.h"
#include "proftap/error.h"

namespace proftap {
namespace {

struct Setup {
  std::vector<Poem> pool;
  std::vector<std::string> poem_ids;
  std::vector<std::string> judge_ids;
  std::unordered_map<std::string, Authorship> truth;
};

Setup MakeSetup(std::size_t titles, std::size_t models, std::size_t judges) {
  Setup s;
  for (std::size_t t = 0; t < titles; ++t) {
    Poem h;
    h.id = "h" + std::to_string(t);
    h.title = h.id;
    h.title_ref = h.id;
    h.body = "白日依山尽，黄河入海流。欲穷千里目，更上一层楼。";
    s.pool.push_back(h);
    s.truth[h.id] = Authorship::kHuman;
    for (std::size_t m = 0; m < models; ++m) {
      Poem p = h;
      p.id = "m" + std::to_string(m) + "/" + h.id;
      p.source = Source::Model("m" + std::to_string(m));
      s.pool.push_back(p);
      s.truth[p.id] = Authorship::kModel;
    }
  }
  for (const auto& p : s.pool) s.poem_ids.push_back(p.id);
  for (std::size_t j = 0; j < judges; ++j) {
    s.judge_ids.push_back("j" + std::to_string(j));
  }
  return s;
}

TEST_CASE("oracle judges rate by class") {
  const Setup s = MakeSetup(12, 2, 5);
  const auto plan = PlanAssignments(s.poem_ids, s.judge_ids, 2, 1);
  const auto panel =
      UniformPanel(s.judge_ids, {.kind = JudgeKind::kOracle}, 3);
  const auto ratings = SimulateRatings(plan, s.truth, panel);
  CHECK(ratings.size() == s.poem_ids.size() * 2);
  for (const auto& r : ratings) {
    CHECK(r.probability ==
          (s.truth.at(r.poem_id) == Authorship::kHuman ? 1.0 : 0.0));
    CHECK(plan.IsAssigned(r.judge_id, r.poem_id));
  }
}

TEST_CASE("random judges are reproducible from their seeds") {
  const Setup s = MakeSetup(30, 1, 7);
  const auto plan = PlanAssignments(s.poem_ids, s.judge_ids, 2, 8);
  const auto panel = UniformPanel(s.judge_ids, {.kind = JudgeKind::kRandom}, 4);
  const auto a = SimulateRatings(plan, s.truth, panel);
  const auto b = SimulateRatings(plan, s.truth, panel);
  CHECK(a == b);
  const auto other =
      SimulateRatings(plan, s.truth,
                      UniformPanel(s.judge_ids, {.kind = JudgeKind::kRandom}, 5));
  CHECK_FALSE(a == other);
  for (const auto& r : a) CHECK(IsValidProbability(r.probability));
}

TEST_CASE("gaussian judge moments") {
  SimulatedJudge judge({.kind = JudgeKind::kGaussian, .d = 0.4, .sigma = 0.2,
                        .seed = 17});
  double human = 0.0, model = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double h = judge.Rate(true);
    const double m = judge.Rate(false);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
    human += h;
    model += m;
  }
  CHECK(std::fabs(human / n - 0.7) <= 0.02);
  CHECK(std::fabs(model / n - 0.3) <= 0.02);
}

TEST_CASE("simulate_ratings validates its inputs") {
  Setup s = MakeSetup(4, 1, 3);
  const auto plan = PlanAssignments(s.poem_ids, s.judge_ids, 2, 1);
  auto panel = UniformPanel(s.judge_ids, {.kind = JudgeKind::kRandom}, 1);
  auto truth = s.truth;
  truth.erase("h0");
  CHECK_THROWS_AS(SimulateRatings(plan, truth, panel), ValidationError);
  panel.erase("j1");
  CHECK_THROWS_AS(SimulateRatings(plan, s.truth, panel), ValidationError);
  CHECK_THROWS_AS(SimulatedJudge({.kind = JudgeKind::kGaussian, .sigma = 0.0}),
                  ValidationError);
  CHECK_THROWS_AS(ParseJudgeKind("psychic"), ValidationError);
}

TEST_CASE("oracle judges reach AUC 1 and the minimal exact p") {
  const Setup s = MakeSetup(110, 1, 13);
  const auto plan = PlanAssignments(s.poem_ids, s.judge_ids, 2, 21);
  const auto ratings = SimulateRatings(
      plan, s.truth, UniformPanel(s.judge_ids, {.kind = JudgeKind::kOracle}, 0));
  const auto scored = ScorePool(s.pool, AggregateScores(ratings, 2));
  CHECK(scored.unrated.empty());
  ReportOptions options;
  options.wilcoxon.method = PMethod::kExact;
  const ModelReport r = BuildModelReport(scored.scored, "m0", options);
  CHECK(r.auc == 1.0);
  CHECK(r.n_pairs == 110);
  // Every difference is +1: only one of the 2^110 sign patterns is as
  // extreme on each side.
  CHECK(r.wilcoxon.p == std::ldexp(1.0, -109));
}

TEST_CASE("power analysis basics") {
  PowerConfig c;
  c.titles = 40;
  c.judges = 6;
  c.d_grid = {0.0, 0.2, 2.0};
  c.replications = 30;
  c.seed = 9;
  c.threads = 2;
  const auto rows = PowerAnalysis(c);
  REQUIRE(rows.size() == 3);
  CHECK(rows[2].mean_auc == 1.0);
  CHECK(rows[2].rejection_rate == 1.0);
  CHECK(rows[0].mean_auc <= rows[1].mean_auc + 0.01);
  CHECK(rows[1].mean_auc <= rows[2].mean_auc + 0.01);
  c.threads = 1;
  const auto serial = PowerAnalysis(c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(serial[i].mean_auc == rows[i].mean_auc);
    CHECK(serial[i].rejection_rate == rows[i].rejection_rate);
  }
  const std::string csv = PowerTableToCsv(rows);
  CHECK(csv.rfind("d,mean_auc,rejection_rate\n0,", 0) == 0);
  CHECK(csv.find("\n2,1,1\n") != std::string::npos);
}

TEST_CASE("power analysis mean AUC is monotone in d") {
  PowerConfig c;
  c.titles = 60;
  c.d_grid = {0.0, 0.05, 0.1, 0.2, 0.3, 0.5};
  c.replications = 40;
  c.seed = 2;
  const auto rows = PowerAnalysis(c);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].mean_auc >= rows[i - 1].mean_auc - 0.01);
  }
}

TEST_CASE("power config parsing") {
  const auto c = PowerConfigFromJson(nlohmann::json::parse(R"({
      "T": 110, "K": 2, "judges": 13, "judge_model": "gaussian",
      "sigma": 0.25, "d_grid": [0, 0.1], "alpha": 0.05,
      "replications": 500, "seed": 7})"));
  CHECK(c.titles == 110);
  CHECK(c.judge_model.sigma == 0.25);
  CHECK(c.d_grid.size() == 2);
  CHECK(c.replications == 500);
  auto bad = [](const char* text) {
    return PowerConfigFromJson(nlohmann::json::parse(text));
  };
  CHECK_THROWS_AS(bad(R"({"d_grid": []})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"d_grid": [-0.1]})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"replications": 0})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"K": 3, "judges": 2})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"alpha": 1.5})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"d_grid": "wide"})"), ValidationError);
}

}  // namespace
}  // namespace proftap
