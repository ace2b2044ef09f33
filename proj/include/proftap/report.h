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

#ifndef PROFTAP_REPORT_H_
#define PROFTAP_REPORT_H_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proftap/stats.h"

namespace proftap {

struct AnalysisReport {
  // Sorted by AUC ascending, ties by model id.
  std::vector<ModelReport> models;
  // Model id -> parameter count label; "N/A" when missing.
  std::map<std::string, std::string> params_labels;
  std::map<YanClass, double> human_yan_ratio;
  std::size_t n_human = 0;
  // Pool poems left out for lack of ratings.
  std::vector<std::string> unrated;
  ReportOptions options;
};

// One ModelReport per model source present in `scored`.
AnalysisReport BuildAnalysis(std::span<const ScoredPoem> scored,
                             const std::map<std::string, std::string>& params_labels,
                             const ReportOptions& options = {});

// Three decimals, or "-" when absent.
std::string FormatAuc(std::optional<double> auc);
// "0.058", "3e-4", "<1e-8".
std::string FormatPValue(double p);

// Model | #Prm | AUC | W.T. p
std::string RenderTable1(const AnalysisReport& report);
// Model | Lin. Len. | Cha. Rep., with an arrow against the unfiltered AUC.
std::string RenderTable2(const AnalysisReport& report);
// Model | 5-yan | 7-yan
std::string RenderTable3(const AnalysisReport& report);
// model,yan5,yan7,other; the human row first.
std::string RenderFigure1Csv(const AnalysisReport& report);

nlohmann::json ReportToJson(const AnalysisReport& report);

// Writes report.json, table1.md, table2.md, table3.md and figure1.csv.
void WriteReports(const AnalysisReport& report, const std::filesystem::path& dir);

}  // namespace proftap

#endif  // PROFTAP_REPORT_H_
