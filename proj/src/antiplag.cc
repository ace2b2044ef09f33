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

#include "proftap/antiplag.h"

#include <fmt/format.h>

#include "proftap/error.h"

namespace proftap {

std::string_view ToString(MatchMode mode) {
  return mode == MatchMode::kSamePoemConsecutive ? "same-poem" : "any-line";
}

MatchMode ParseMatchMode(std::string_view text) {
  if (text == "same-poem") return MatchMode::kSamePoemConsecutive;
  if (text == "any-line") return MatchMode::kAnyLine;
  throw ValidationError(
      fmt::format("unknown plagiarism mode '{}' (same-poem|any-line)", text));
}

LineIndex LineIndex::Build(const Corpus& database,
                           const SegmentOptions& options) {
  LineIndex index;
  for (const Poem& poem : database.poems) {
    std::vector<std::string> lines;
    try {
      lines = SegmentLines(poem, options).LinesUtf8();
    } catch (const ValidationError&) {
      // Pure-punctuation bodies contribute no lines.
    }
    index.Add(poem.id, std::move(lines));
  }
  return index;
}

void LineIndex::Add(const std::string& poem_id,
                    std::vector<std::string> lines) {
  const auto poem = static_cast<std::uint32_t>(poem_ids_.size());
  if (!poem_index_.emplace(poem_id, poem).second) {
    throw ValidationError(
        fmt::format("line index: duplicate poem id '{}'", poem_id));
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    entries_[lines[i]].push_back({poem, static_cast<std::uint32_t>(i)});
  }
  total_lines_ += lines.size();
  poem_ids_.push_back(poem_id);
  poem_lines_.push_back(std::move(lines));
}

std::span<const LinePosting> LineIndex::Lookup(std::string_view line) const {
  auto it = entries_.find(line);
  if (it == entries_.end()) return {};
  return it->second;
}

std::optional<std::size_t> LineIndex::LineCount(
    const std::string& poem_id) const {
  auto idx = PoemIndex(poem_id);
  if (!idx) return std::nullopt;
  return poem_lines_[*idx].size();
}

std::optional<std::uint32_t> LineIndex::PoemIndex(
    const std::string& poem_id) const {
  auto it = poem_index_.find(poem_id);
  if (it == poem_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<MatchEvidence> FindDuplication(
    std::span<const std::string> query_lines, const LineIndex& index,
    MatchMode mode, const std::optional<std::string>& exclude_id) {
  const std::size_t n = query_lines.size();
  if (n < 2) return std::nullopt;

  std::optional<std::uint32_t> excluded;
  if (exclude_id) excluded = index.PoemIndex(*exclude_id);
  auto first_allowed =
      [&](std::span<const LinePosting> postings) -> const LinePosting* {
    for (const auto& p : postings) {
      if (!excluded || p.poem != *excluded) return &p;
    }
    return nullptr;
  };

  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto postings = index.Lookup(query_lines[i]);
    if (mode == MatchMode::kSamePoemConsecutive) {
      for (const auto& p : postings) {
        if (excluded && p.poem == *excluded) continue;
        const auto& db = index.poem_lines(p.poem);
        std::size_t length = 1;
        while (i + length < n && p.line + length < db.size() &&
               db[p.line + length] == query_lines[i + length]) {
          ++length;
        }
        if (length >= 2) {
          return MatchEvidence{i, index.poem_id(p.poem), p.line, length, mode};
        }
      }
    } else {
      const LinePosting* head = first_allowed(postings);
      if (head == nullptr) continue;
      std::size_t length = 1;
      while (i + length < n &&
             first_allowed(index.Lookup(query_lines[i + length])) != nullptr) {
        ++length;
      }
      if (length >= 2) {
        return MatchEvidence{i, index.poem_id(head->poem), head->line, length,
                             mode};
      }
    }
  }
  return std::nullopt;
}

std::optional<MatchEvidence> FindDuplication(
    const Poem& poem, const LineIndex& index, MatchMode mode,
    const std::optional<std::string>& exclude_id,
    const SegmentOptions& options) {
  std::vector<std::string> lines;
  try {
    lines = SegmentLines(poem, options).LinesUtf8();
  } catch (const ValidationError&) {
    return std::nullopt;
  }
  return FindDuplication(lines, index, mode, exclude_id);
}

}  // namespace proftap
