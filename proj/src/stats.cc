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

#include "proftap/stats.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "proftap/error.h"

namespace proftap {

namespace {

void RequireFinite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (std::isnan(v)) {
      throw ValidationError(fmt::format("{}: NaN score", what));
    }
  }
}

bool Near(double a, double b, double tolerance) {
  return std::fabs(a - b) <= tolerance * std::max(1.0, std::fabs(a));
}

}  // namespace

AucCounts AucRankCounts(std::span<const double> human,
                        std::span<const double> ai) {
  if (human.empty() || ai.empty()) {
    throw ValidationError("auc: both classes must be non-empty");
  }
  RequireFinite(human, "auc");
  RequireFinite(ai, "auc");

  std::vector<std::pair<double, bool>> pooled;
  pooled.reserve(human.size() + ai.size());
  for (double h : human) pooled.emplace_back(h, true);
  for (double a : ai) pooled.emplace_back(a, false);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  // Doubled 1-based average rank of a tie block [begin, end) is
  // begin + end + 1.
  std::int64_t human_rank_sum_x2 = 0;
  std::size_t begin = 0;
  while (begin < pooled.size()) {
    std::size_t end = begin + 1;
    while (end < pooled.size() && pooled[end].first == pooled[begin].first) {
      ++end;
    }
    const auto rank_x2 = static_cast<std::int64_t>(begin + end + 1);
    for (std::size_t k = begin; k < end; ++k) {
      if (pooled[k].second) human_rank_sum_x2 += rank_x2;
    }
    begin = end;
  }
  const auto n = static_cast<std::int64_t>(human.size());
  const auto m = static_cast<std::int64_t>(ai.size());
  return AucCounts{human_rank_sum_x2 - n * (n + 1), n * m};
}

double Auc(std::span<const double> human, std::span<const double> ai) {
  return AucRankCounts(human, ai).value();
}

std::string_view ToString(Alternative alt) {
  switch (alt) {
    case Alternative::kTwoSided:
      return "two-sided";
    case Alternative::kGreater:
      return "greater";
    case Alternative::kLess:
      return "less";
  }
  return "two-sided";
}

Alternative ParseAlternative(std::string_view text) {
  if (text == "two-sided") return Alternative::kTwoSided;
  if (text == "greater") return Alternative::kGreater;
  if (text == "less") return Alternative::kLess;
  throw ValidationError(fmt::format(
      "unknown alternative '{}' (two-sided|greater|less)", text));
}

std::vector<std::uint64_t> SignedRankNullCounts(
    std::span<const std::int64_t> doubled_ranks) {
  const std::int64_t total =
      std::accumulate(doubled_ranks.begin(), doubled_ranks.end(),
                      std::int64_t{0});
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(total) + 1, 0);
  counts[0] = 1;
  std::int64_t reach = 0;
  for (std::int64_t r : doubled_ranks) {
    for (std::int64_t s = reach; s >= 0; --s) {
      counts[static_cast<std::size_t>(s + r)] +=
          counts[static_cast<std::size_t>(s)];
    }
    reach += r;
  }
  return counts;
}

namespace {

std::vector<double> SignedRankNullProbabilities(
    std::span<const std::int64_t> doubled_ranks) {
  const std::int64_t total =
      std::accumulate(doubled_ranks.begin(), doubled_ranks.end(),
                      std::int64_t{0});
  std::vector<double> probs(static_cast<std::size_t>(total) + 1, 0.0);
  probs[0] = 1.0;
  std::int64_t reach = 0;
  for (std::int64_t r : doubled_ranks) {
    for (std::int64_t s = reach; s >= 0; --s) {
      const double half = 0.5 * probs[static_cast<std::size_t>(s)];
      probs[static_cast<std::size_t>(s + r)] += half;
      probs[static_cast<std::size_t>(s)] = half;
    }
    reach += r;
  }
  return probs;
}

}  // namespace

WilcoxonResult WilcoxonSignedRankDiffs(std::span<const double> differences,
                                       const WilcoxonOptions& options) {
  if (differences.empty()) {
    throw ValidationError("wilcoxon: no pairs");
  }
  RequireFinite(differences, "wilcoxon");

  WilcoxonResult result;
  std::vector<double> nonzero;
  for (double d : differences) {
    if (std::fabs(d) <= options.tie_tolerance) {
      ++result.n_zero;
    } else {
      nonzero.push_back(d);
    }
  }
  const std::size_t n = nonzero.size();
  result.n_nonzero = n;
  if (n == 0) {
    result.p = 1.0;
    return result;
  }

  std::sort(nonzero.begin(), nonzero.end(), [](double a, double b) {
    return std::fabs(a) < std::fabs(b);
  });
  std::vector<std::int64_t> doubled_ranks(n);
  std::vector<std::size_t> tie_sizes;
  std::int64_t w_plus_x2 = 0;
  std::size_t begin = 0;
  while (begin < n) {
    std::size_t end = begin + 1;
    while (end < n && Near(std::fabs(nonzero[begin]), std::fabs(nonzero[end]),
                           options.tie_tolerance)) {
      ++end;
    }
    const auto rank_x2 = static_cast<std::int64_t>(begin + end + 1);
    for (std::size_t k = begin; k < end; ++k) {
      doubled_ranks[k] = rank_x2;
      if (nonzero[k] > 0) w_plus_x2 += rank_x2;
    }
    tie_sizes.push_back(end - begin);
    begin = end;
  }
  const auto total_x2 = static_cast<std::int64_t>(n * (n + 1));
  result.w_plus = static_cast<double>(w_plus_x2) / 2.0;
  result.w_minus = static_cast<double>(total_x2 - w_plus_x2) / 2.0;
  result.w = std::min(result.w_plus, result.w_minus);

  const PMethod method = options.method.value_or(
      n <= options.exact_threshold ? PMethod::kExact : PMethod::kNormal);
  result.exact = method == PMethod::kExact;

  if (method == PMethod::kExact) {
    double p_le = 0.0, p_ge = 0.0;
    if (n <= 63) {
      const auto counts = SignedRankNullCounts(doubled_ranks);
      std::uint64_t le = 0, ge = 0;
      for (std::size_t s = 0; s < counts.size(); ++s) {
        const auto sum = static_cast<std::int64_t>(s);
        if (sum <= w_plus_x2) le += counts[s];
        if (sum >= w_plus_x2) ge += counts[s];
      }
      const double scale = std::ldexp(1.0, -static_cast<int>(n));
      p_le = static_cast<double>(le) * scale;
      p_ge = static_cast<double>(ge) * scale;
    } else {
      // 2^n no longer fits in the counts; carry probabilities instead.
      const auto probs = SignedRankNullProbabilities(doubled_ranks);
      for (std::size_t s = 0; s < probs.size(); ++s) {
        const auto sum = static_cast<std::int64_t>(s);
        if (sum <= w_plus_x2) p_le += probs[s];
        if (sum >= w_plus_x2) p_ge += probs[s];
      }
    }
    switch (options.alternative) {
      case Alternative::kTwoSided:
        result.p = std::min(1.0, 2.0 * std::min(p_le, p_ge));
        break;
      case Alternative::kGreater:
        result.p = p_ge;
        break;
      case Alternative::kLess:
        result.p = p_le;
        break;
    }
    return result;
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  double variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  for (std::size_t t : tie_sizes) {
    const double tt = static_cast<double>(t);
    variance -= (tt * tt * tt - tt) / 48.0;
  }
  const double sd = std::sqrt(variance);
  const double dev = result.w_plus - mean;
  switch (options.alternative) {
    case Alternative::kTwoSided: {
      const double z = std::max(0.0, std::fabs(dev) - 0.5) / sd;
      result.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
      break;
    }
    case Alternative::kGreater: {
      const double z = (dev - 0.5) / sd;
      result.p = 0.5 * std::erfc(z / std::sqrt(2.0));
      break;
    }
    case Alternative::kLess: {
      const double z = (dev + 0.5) / sd;
      result.p = 0.5 * std::erfc(-z / std::sqrt(2.0));
      break;
    }
  }
  return result;
}

WilcoxonResult WilcoxonSignedRank(
    std::span<const std::pair<double, double>> pairs,
    const WilcoxonOptions& options) {
  std::vector<double> differences;
  differences.reserve(pairs.size());
  for (const auto& [human, model] : pairs) differences.push_back(human - model);
  return WilcoxonSignedRankDiffs(differences, options);
}

std::string_view ToString(FilterCriterion criterion) {
  return criterion == FilterCriterion::kLineLength ? "line_length"
                                                   : "char_repetition";
}

std::string_view ToString(FilterScope scope) {
  return scope == FilterScope::kAiOnly ? "ai-only" : "both";
}

FilterScope ParseFilterScope(std::string_view text) {
  if (text == "ai-only") return FilterScope::kAiOnly;
  if (text == "both") return FilterScope::kBoth;
  throw ValidationError(
      fmt::format("unknown filter scope '{}' (ai-only|both)", text));
}

bool Violates(const StructuralFeatures& features, FilterCriterion criterion) {
  switch (criterion) {
    case FilterCriterion::kLineLength:
      return !features.line_length_patterned;
    case FilterCriterion::kCharRepetition:
      return features.has_char_repetition;
  }
  return false;
}

std::optional<double> FilteredAucIf(std::span<const ScoredPoem> scored,
                                    std::string_view model_id,
                                    const ViolationPredicate& violates,
                                    FilterScope scope,
                                    std::size_t min_sample) {
  std::vector<double> human, ai;
  for (const auto& p : scored) {
    if (p.source.is_human()) {
      if (scope == FilterScope::kBoth && violates(p)) continue;
      human.push_back(p.q);
    } else if (p.source.model_id == model_id) {
      if (violates(p)) continue;
      ai.push_back(p.q);
    }
  }
  if (ai.size() < min_sample || ai.empty() || human.empty()) {
    return std::nullopt;
  }
  return Auc(human, ai);
}

std::optional<double> FilteredAuc(std::span<const ScoredPoem> scored,
                                  std::string_view model_id,
                                  FilterCriterion criterion, FilterScope scope,
                                  std::size_t min_sample) {
  return FilteredAucIf(
      scored, model_id,
      [criterion](const ScoredPoem& p) {
        return Violates(p.features, criterion);
      },
      scope, min_sample);
}

std::map<YanClass, double> YanRatio(std::span<const ScoredPoem> scored,
                                    const Source& source) {
  std::map<YanClass, double> ratio{
      {YanClass::kYan5, 0.0}, {YanClass::kYan7, 0.0}, {YanClass::kOther, 0.0}};
  std::size_t total = 0;
  for (const auto& p : scored) {
    if (p.source != source) continue;
    ratio[p.features.yan_class] += 1.0;
    ++total;
  }
  if (total > 0) {
    for (auto& [yan, value] : ratio) value /= static_cast<double>(total);
  }
  return ratio;
}

YanAnalysis AnalyzeYan(std::span<const ScoredPoem> scored,
                       std::string_view model_id, std::size_t min_sample) {
  YanAnalysis out;
  out.ratio = YanRatio(scored, Source::Model(std::string(model_id)));
  for (YanClass yan : {YanClass::kYan5, YanClass::kYan7}) {
    std::vector<double> human, ai;
    for (const auto& p : scored) {
      if (p.features.yan_class != yan) continue;
      if (p.source.is_human()) {
        human.push_back(p.q);
      } else if (p.source.model_id == model_id) {
        ai.push_back(p.q);
      }
    }
    if (ai.size() < min_sample || ai.empty() || human.empty()) {
      out.auc[yan] = std::nullopt;
    } else {
      out.auc[yan] = Auc(human, ai);
    }
  }
  return out;
}

ModelReport BuildModelReport(std::span<const ScoredPoem> scored,
                             std::string_view model_id,
                             const ReportOptions& options) {
  ModelReport report;
  report.model_id = std::string(model_id);

  std::vector<double> human, ai;
  std::unordered_map<std::string, double> human_by_title;
  std::vector<std::pair<std::string, double>> model_by_title;
  std::unordered_set<std::string> model_titles;
  for (const auto& p : scored) {
    if (p.source.is_human()) {
      human.push_back(p.q);
      human_by_title[p.title_ref] = p.q;
    } else if (p.source.model_id == model_id) {
      ai.push_back(p.q);
      if (!model_titles.insert(p.title_ref).second) {
        throw ValidationError(fmt::format(
            "model {} has two poems for title {}", model_id, p.title_ref));
      }
      model_by_title.emplace_back(p.title_ref, p.q);
    }
  }
  if (ai.empty()) {
    throw ValidationError(fmt::format("no poems for model {}", model_id));
  }
  if (human.empty()) {
    throw ValidationError("no human poems to compare against");
  }
  report.n_human = human.size();
  report.n_model = ai.size();
  report.auc = Auc(human, ai);

  std::vector<std::pair<double, double>> pairs;
  for (const auto& [title, q] : model_by_title) {
    auto it = human_by_title.find(title);
    if (it != human_by_title.end()) pairs.emplace_back(it->second, q);
  }
  report.n_pairs = pairs.size();
  report.n_unpaired_titles =
      (human_by_title.size() - pairs.size()) + (model_by_title.size() - pairs.size());
  if (!pairs.empty()) {
    report.wilcoxon = WilcoxonSignedRank(pairs, options.wilcoxon);
  }

  for (auto criterion :
       {FilterCriterion::kLineLength, FilterCriterion::kCharRepetition}) {
    report.filtered_auc[criterion] = FilteredAuc(
        scored, model_id, criterion, options.filter_scope, options.min_sample);
  }
  YanAnalysis yan = AnalyzeYan(scored, model_id, options.min_sample);
  report.yan_ratio = std::move(yan.ratio);
  report.yan_auc = std::move(yan.auc);
  return report;
}

}  // namespace proftap
