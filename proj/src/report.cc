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

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "proftap/records.h"
#include "proftap/utf8.h"

namespace proftap {

namespace {

enum class Align { kLeft, kRight, kCenter };

std::string Pad(const std::string& text, std::size_t width, Align align) {
  const std::size_t len = utf8::Length(text);
  const std::size_t gap = width > len ? width - len : 0;
  switch (align) {
    case Align::kLeft:
      return text + std::string(gap, ' ');
    case Align::kRight:
      return std::string(gap, ' ') + text;
    case Align::kCenter:
      return std::string(gap / 2, ' ') + text + std::string(gap - gap / 2, ' ');
  }
  return text;
}

std::string RenderMarkdown(const std::vector<std::string>& header,
                           const std::vector<Align>& aligns,
                           const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(header.size(), 3);
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = std::max(widths[c], utf8::Length(header[c]));
    for (const auto& row : rows) {
      widths[c] = std::max(widths[c], utf8::Length(row[c]));
    }
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out = "|";
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out += " " + Pad(cells[c], widths[c], aligns[c]) + " |";
    }
    return out + "\n";
  };
  std::string out = line(header);
  out += "|";
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string rule(widths[c], '-');
    if (aligns[c] != Align::kRight) rule.front() = ':';
    if (aligns[c] != Align::kLeft) rule.back() = ':';
    out += " " + rule + " |";
  }
  out += "\n";
  for (const auto& row : rows) out += line(row);
  return out;
}

std::string Arrow(std::optional<double> filtered, double original) {
  if (!filtered) return "-";
  const std::string value = FormatAuc(filtered);
  if (*filtered > original) return value + " ↑";
  if (*filtered < original) return value + " ↓";
  return value;
}

nlohmann::json OptionalJson(std::optional<double> v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json YanRatioJson(const std::map<YanClass, double>& ratio) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [yan, r] : ratio) j[std::string(ToString(yan))] = r;
  return j;
}

}  // namespace

AnalysisReport BuildAnalysis(std::span<const ScoredPoem> scored,
                             const std::map<std::string, std::string>& params_labels,
                             const ReportOptions& options) {
  AnalysisReport report;
  report.options = options;
  report.params_labels = params_labels;
  std::set<std::string> models;
  for (const auto& s : scored) {
    if (s.source.is_human()) {
      ++report.n_human;
    } else {
      models.insert(s.source.model_id);
    }
  }
  if (report.n_human > 0) {
    report.human_yan_ratio = YanRatio(scored, Source::Human());
  }
  for (const auto& model : models) {
    report.models.push_back(BuildModelReport(scored, model, options));
  }
  std::stable_sort(report.models.begin(), report.models.end(),
                   [](const ModelReport& a, const ModelReport& b) {
                     return a.auc < b.auc;
                   });
  return report;
}

std::string FormatAuc(std::optional<double> auc) {
  return auc ? fmt::format("{:.3f}", *auc) : "-";
}

std::string FormatPValue(double p) {
  if (p < 1e-8) return "<1e-8";
  if (fmt::format("{:.3f}", p) != "0.000") return fmt::format("{:.3f}", p);
  // One significant digit, exponent without padding: 3e-4.
  const std::string sci = fmt::format("{:.0e}", p);
  const std::size_t e = sci.find('e');
  const int exponent = std::stoi(sci.substr(e + 1));
  return fmt::format("{}e{}", sci.substr(0, e), exponent);
}

std::string RenderTable1(const AnalysisReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& m : report.models) {
    const auto label = report.params_labels.find(m.model_id);
    rows.push_back({m.model_id,
                    label == report.params_labels.end() ? "N/A" : label->second,
                    FormatAuc(m.auc), FormatPValue(m.wilcoxon.p)});
  }
  return RenderMarkdown({"Model", "#Prm", "AUC", "W.T. p"},
                        {Align::kLeft, Align::kRight, Align::kCenter, Align::kRight},
                        rows);
}

std::string RenderTable2(const AnalysisReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& m : report.models) {
    rows.push_back(
        {m.model_id, Arrow(m.filtered_auc.at(FilterCriterion::kLineLength), m.auc),
         Arrow(m.filtered_auc.at(FilterCriterion::kCharRepetition), m.auc)});
  }
  return RenderMarkdown({"Model", "Lin. Len.", "Cha. Rep."},
                        {Align::kLeft, Align::kCenter, Align::kCenter}, rows);
}

std::string RenderTable3(const AnalysisReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& m : report.models) {
    rows.push_back({m.model_id, FormatAuc(m.yan_auc.at(YanClass::kYan5)),
                    FormatAuc(m.yan_auc.at(YanClass::kYan7))});
  }
  return RenderMarkdown({"Model", "5-yan", "7-yan"},
                        {Align::kLeft, Align::kCenter, Align::kCenter}, rows);
}

std::string RenderFigure1Csv(const AnalysisReport& report) {
  auto row = [](const std::string& name, const std::map<YanClass, double>& r) {
    auto get = [&](YanClass y) {
      const auto it = r.find(y);
      return fmt::format("{:.4f}", it == r.end() ? 0.0 : it->second);
    };
    return fmt::format("{},{},{},{}\n", name, get(YanClass::kYan5),
                       get(YanClass::kYan7), get(YanClass::kOther));
  };
  std::string out = "model,yan5,yan7,other\n";
  if (report.n_human > 0) out += row("Human", report.human_yan_ratio);
  for (const auto& m : report.models) out += row(m.model_id, m.yan_ratio);
  return out;
}

nlohmann::json ReportToJson(const AnalysisReport& report) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : report.models) {
    const auto label = report.params_labels.find(m.model_id);
    nlohmann::json filtered = nlohmann::json::object();
    for (const auto& [c, v] : m.filtered_auc) {
      filtered[std::string(ToString(c))] = OptionalJson(v);
    }
    nlohmann::json yan_auc = nlohmann::json::object();
    for (const auto& [y, v] : m.yan_auc) {
      yan_auc[std::string(ToString(y))] = OptionalJson(v);
    }
    models.push_back({
        {"model_id", m.model_id},
        {"params_label",
         label == report.params_labels.end() ? "N/A" : label->second},
        {"auc", m.auc},
        {"wilcoxon",
         {{"w", m.wilcoxon.w},
          {"w_plus", m.wilcoxon.w_plus},
          {"w_minus", m.wilcoxon.w_minus},
          {"p", m.wilcoxon.p},
          {"n_nonzero", m.wilcoxon.n_nonzero},
          {"n_zero", m.wilcoxon.n_zero},
          {"exact", m.wilcoxon.exact}}},
        {"n_pairs", m.n_pairs},
        {"n_unpaired_titles", m.n_unpaired_titles},
        {"n_human", m.n_human},
        {"n_model", m.n_model},
        {"filtered_auc", filtered},
        {"yan_auc", yan_auc},
        {"yan_ratio", YanRatioJson(m.yan_ratio)},
    });
  }
  return {
      {"models", models},
      {"n_human", report.n_human},
      {"human_yan_ratio", YanRatioJson(report.human_yan_ratio)},
      {"unrated", report.unrated},
      {"options",
       {{"filter_scope", ToString(report.options.filter_scope)},
        {"alternative", ToString(report.options.wilcoxon.alternative)},
        {"exact_threshold", report.options.wilcoxon.exact_threshold},
        {"min_sample", report.options.min_sample}}},
  };
}

void WriteReports(const AnalysisReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WriteFileAtomic(dir / "report.json", ReportToJson(report).dump(2) + "\n");
  WriteFileAtomic(dir / "table1.md", RenderTable1(report));
  WriteFileAtomic(dir / "table2.md", RenderTable2(report));
  WriteFileAtomic(dir / "table3.md", RenderTable3(report));
  WriteFileAtomic(dir / "figure1.csv", RenderFigure1Csv(report));
}

}  // namespace proftap
