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

#ifndef PROFTAP_STATS_H_
#define PROFTAP_STATS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "proftap/corpus.h"

namespace proftap {

// Mann-Whitney statistic as exact integers: twice_u counts 2 for every
// (human, ai) pair with human > ai and 1 for every tie.
struct AucCounts {
  std::int64_t twice_u = 0;
  std::int64_t pairs = 0;

  double value() const {
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pairs));
  }
};

// Tie-aware rank-sum AUC with human poems as the positive class. Throws
// ValidationError on an empty class or a NaN score.
AucCounts AucRankCounts(std::span<const double> human,
                        std::span<const double> ai);
double Auc(std::span<const double> human, std::span<const double> ai);

enum class Alternative {
  kTwoSided,
  kGreater,  // human scores exceed model scores
  kLess,
};

std::string_view ToString(Alternative alt);
Alternative ParseAlternative(std::string_view text);

enum class PMethod { kExact, kNormal };

struct WilcoxonOptions {
  Alternative alternative = Alternative::kTwoSided;
  // Exact null distribution up to and including this many non-zero
  // differences; normal approximation above.
  std::size_t exact_threshold = 20;
  // Overrides the threshold when set.
  std::optional<PMethod> method;
  // Differences within this distance (scaled by magnitude when > 1) are
  // ranked as ties; |d| within it counts as zero. Aggregated judge scores
  // are means of decimal inputs, so mathematically equal differences can
  // differ in the last ulp.
  double tie_tolerance = 1e-12;
};

struct WilcoxonResult {
  double w = 0.0;  // min(w_plus, w_minus)
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p = 1.0;
  std::size_t n_nonzero = 0;
  std::size_t n_zero = 0;
  bool exact = true;
};

// Signed-rank test on differences d_j. Zeros are dropped, tied |d| receive
// average ranks. Throws ValidationError on empty input or NaN.
WilcoxonResult WilcoxonSignedRankDiffs(std::span<const double> differences,
                                       const WilcoxonOptions& options = {});

// Pairs are (q_human, q_model) for one title; d = q_human - q_model.
WilcoxonResult WilcoxonSignedRank(
    std::span<const std::pair<double, double>> pairs,
    const WilcoxonOptions& options = {});

// Exact null distribution of the doubled positive-rank sum: entry s counts
// the sign assignments (out of 2^n) whose doubled W+ equals s. Counts
// overflow beyond n = 63.
std::vector<std::uint64_t> SignedRankNullCounts(
    std::span<const std::int64_t> doubled_ranks);

struct ScoredPoem {
  std::string poem_id;
  Source source;
  std::string title_ref;
  double q = 0.0;
  StructuralFeatures features;
};

enum class FilterCriterion { kLineLength, kCharRepetition };
enum class FilterScope { kAiOnly, kBoth };

std::string_view ToString(FilterCriterion criterion);
std::string_view ToString(FilterScope scope);
FilterScope ParseFilterScope(std::string_view text);

// True when the poem breaks the criterion: unequal line lengths, or any
// repeated character.
bool Violates(const StructuralFeatures& features, FilterCriterion criterion);

// Poems fewer than this in the surviving AI sample yield no AUC.
inline constexpr std::size_t kMinSampleSize = 10;

using ViolationPredicate = std::function<bool(const ScoredPoem&)>;

// AUC after removing violating poems (AI poems only, or both classes).
// nullopt when fewer than `min_sample` AI poems survive or no human poem
// survives.
std::optional<double> FilteredAucIf(std::span<const ScoredPoem> scored,
                                    std::string_view model_id,
                                    const ViolationPredicate& violates,
                                    FilterScope scope,
                                    std::size_t min_sample = kMinSampleSize);
std::optional<double> FilteredAuc(std::span<const ScoredPoem> scored,
                                  std::string_view model_id,
                                  FilterCriterion criterion,
                                  FilterScope scope = FilterScope::kAiOnly,
                                  std::size_t min_sample = kMinSampleSize);

struct YanAnalysis {
  // Fractions for kYan5, kYan7 and kOther; sums to 1.
  std::map<YanClass, double> ratio;
  // Per-class AUC against human poems of the same class, for kYan5 and
  // kYan7 only.
  std::map<YanClass, std::optional<double>> auc;
};

// Ratio of poems from `source` in each yan class. An empty model id
// selects human poems.
std::map<YanClass, double> YanRatio(std::span<const ScoredPoem> scored,
                                    const Source& source);
YanAnalysis AnalyzeYan(std::span<const ScoredPoem> scored,
                       std::string_view model_id,
                       std::size_t min_sample = kMinSampleSize);

struct ReportOptions {
  FilterScope filter_scope = FilterScope::kAiOnly;
  WilcoxonOptions wilcoxon;
  std::size_t min_sample = kMinSampleSize;
};

struct ModelReport {
  std::string model_id;
  double auc = 0.5;
  WilcoxonResult wilcoxon;
  std::size_t n_pairs = 0;
  // Titles present on only one side of the pairing.
  std::size_t n_unpaired_titles = 0;
  std::size_t n_human = 0;
  std::size_t n_model = 0;
  std::map<FilterCriterion, std::optional<double>> filtered_auc;
  std::map<YanClass, std::optional<double>> yan_auc;
  std::map<YanClass, double> yan_ratio;
};

// Throws ValidationError when the model has no poems or there are no human
// poems, or a title is covered twice by the same model.
ModelReport BuildModelReport(std::span<const ScoredPoem> scored,
                             std::string_view model_id,
                             const ReportOptions& options = {});

}  // namespace proftap

#endif  // PROFTAP_STATS_H_
