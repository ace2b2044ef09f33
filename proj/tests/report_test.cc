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

#include "proftap/report.h"

#include "doctest.h"

namespace proftap {
namespace {

TEST_CASE("p-value formatting follows the published table style") {
  CHECK(FormatPValue(0.058) == "0.058");
  CHECK(FormatPValue(1.0) == "1.000");
  CHECK(FormatPValue(0.0012) == "0.001");
  CHECK(FormatPValue(3e-4) == "3e-4");
  CHECK(FormatPValue(8.2e-5) == "8e-5");
  CHECK(FormatPValue(7e-5) == "7e-5");
  CHECK(FormatPValue(2.4e-6) == "2e-6");
  CHECK(FormatPValue(1e-8) == "1e-8");
  CHECK(FormatPValue(9.9e-9) == "<1e-8");
  CHECK(FormatPValue(0.0) == "<1e-8");
}

TEST_CASE("auc formatting") {
  CHECK(FormatAuc(0.5409) == "0.541");
  CHECK(FormatAuc(1.0) == "1.000");
  CHECK(FormatAuc(std::nullopt) == "-");
}

ModelReport Model(std::string id, double auc, double p,
                  std::optional<double> line, std::optional<double> rep,
                  std::optional<double> y5, std::optional<double> y7) {
  ModelReport m;
  m.model_id = std::move(id);
  m.auc = auc;
  m.wilcoxon.p = p;
  m.filtered_auc[FilterCriterion::kLineLength] = line;
  m.filtered_auc[FilterCriterion::kCharRepetition] = rep;
  m.yan_auc[YanClass::kYan5] = y5;
  m.yan_auc[YanClass::kYan7] = y7;
  m.yan_ratio = {{YanClass::kYan5, 0.25}, {YanClass::kYan7, 0.5},
                 {YanClass::kOther, 0.25}};
  return m;
}

AnalysisReport Sample() {
  AnalysisReport r;
  r.models = {Model("Qwen-72B-Poet", 0.541, 0.058, 0.525, 0.563, 0.499, 0.538),
              Model("GPT-4", 0.670, 2e-6, 0.623, std::nullopt, 0.538, 0.663),
              Model("ChatGLM3-6B", 0.913, 1e-12, 0.913, std::nullopt,
                    std::nullopt, 0.764)};
  r.params_labels = {{"Qwen-72B-Poet", "72B"}, {"ChatGLM3-6B", "6B"}};
  r.n_human = 110;
  r.human_yan_ratio = {{YanClass::kYan5, 0.4}, {YanClass::kYan7, 0.6},
                       {YanClass::kOther, 0.0}};
  return r;
}

TEST_CASE("table 1 layout") {
  CHECK(RenderTable1(Sample()) ==
        "| Model         | #Prm |  AUC  | W.T. p |\n"
        "| :------------ | ---: | :---: | -----: |\n"
        "| Qwen-72B-Poet |  72B | 0.541 |  0.058 |\n"
        "| GPT-4         |  N/A | 0.670 |   2e-6 |\n"
        "| ChatGLM3-6B   |   6B | 0.913 |  <1e-8 |\n");
}

TEST_CASE("table 2 marks the direction against the unfiltered AUC") {
  CHECK(RenderTable2(Sample()) ==
        "| Model         | Lin. Len. | Cha. Rep. |\n"
        "| :------------ | :-------: | :-------: |\n"
        "| Qwen-72B-Poet |  0.525 ↓  |  0.563 ↑  |\n"
        "| GPT-4         |  0.623 ↓  |     -     |\n"
        "| ChatGLM3-6B   |   0.913   |     -     |\n");
}

TEST_CASE("table 3 and figure data") {
  CHECK(RenderTable3(Sample()) ==
        "| Model         | 5-yan | 7-yan |\n"
        "| :------------ | :---: | :---: |\n"
        "| Qwen-72B-Poet | 0.499 | 0.538 |\n"
        "| GPT-4         | 0.538 | 0.663 |\n"
        "| ChatGLM3-6B   |   -   | 0.764 |\n");
  CHECK(RenderFigure1Csv(Sample()) ==
        "model,yan5,yan7,other\n"
        "Human,0.4000,0.6000,0.0000\n"
        "Qwen-72B-Poet,0.2500,0.5000,0.2500\n"
        "GPT-4,0.2500,0.5000,0.2500\n"
        "ChatGLM3-6B,0.2500,0.5000,0.2500\n");
}

TEST_CASE("report json keeps absent values as null") {
  const auto j = ReportToJson(Sample());
  CHECK(j["models"].size() == 3);
  CHECK(j["models"][1]["filtered_auc"]["char_repetition"].is_null());
  CHECK(j["models"][0]["params_label"] == "72B");
  CHECK(j["models"][1]["params_label"] == "N/A");
  CHECK(j["options"]["filter_scope"] == "ai-only");
}

ScoredPoem Scored(std::string id, Source src, std::string ref, double q) {
  ScoredPoem s;
  s.poem_id = std::move(id);
  s.source = std::move(src);
  s.title_ref = std::move(ref);
  s.q = q;
  s.features.yan_class = YanClass::kYan5;
  s.features.line_length_patterned = true;
  return s;
}

TEST_CASE("build_analysis orders models by AUC") {
  std::vector<ScoredPoem> scored;
  for (int t = 0; t < 12; ++t) {
    const std::string ref = "h" + std::to_string(t);
    scored.push_back(Scored(ref, Source::Human(), ref, 0.6 + 0.01 * t));
    scored.push_back(Scored("good/" + ref, Source::Model("good"), ref, 0.55 + 0.01 * t));
    scored.push_back(Scored("bad/" + ref, Source::Model("bad"), ref, 0.1));
  }
  const AnalysisReport r = BuildAnalysis(scored, {{"good", "7B"}});
  REQUIRE(r.models.size() == 2);
  CHECK(r.models[0].model_id == "good");
  CHECK(r.models[1].model_id == "bad");
  CHECK(r.models[1].auc == 1.0);
  CHECK(r.n_human == 12);
  CHECK(r.human_yan_ratio.at(YanClass::kYan5) == 1.0);
}

}  // namespace
}  // namespace proftap
