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

#ifndef PROFTAP_ANTIPLAG_H_
#define PROFTAP_ANTIPLAG_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "proftap/corpus.h"

namespace proftap {

// How two consecutive generated lines must match the database to count as
// duplication.
enum class MatchMode {
  // Both lines appear consecutively, in order, in one database poem.
  kSamePoemConsecutive,
  // Each line appears somewhere in the database, possibly in different
  // poems. Flags a superset of kSamePoemConsecutive.
  kAnyLine,
};

std::string_view ToString(MatchMode mode);
// "same-poem" or "any-line".
MatchMode ParseMatchMode(std::string_view text);

struct LinePosting {
  std::uint32_t poem;  // index into the index's poem table
  std::uint32_t line;  // 0-based line position within that poem
};

// Exact-match multimap from normalized line text to database positions.
// Immutable after construction; lookups are safe from many threads.
class LineIndex {
 public:
  LineIndex() = default;

  static LineIndex Build(const Corpus& database,
                         const SegmentOptions& options = {});

  // Adds one poem given its normalized lines. Ids must be unique.
  void Add(const std::string& poem_id, std::vector<std::string> lines);

  std::span<const LinePosting> Lookup(std::string_view line) const;

  std::size_t poem_count() const { return poem_ids_.size(); }
  // Total number of indexed lines (postings).
  std::size_t size() const { return total_lines_; }
  std::size_t key_count() const { return entries_.size(); }

  const std::string& poem_id(std::uint32_t poem) const {
    return poem_ids_[poem];
  }
  const std::vector<std::string>& poem_lines(std::uint32_t poem) const {
    return poem_lines_[poem];
  }
  // Line count of a database poem by id; nullopt for unknown ids.
  std::optional<std::size_t> LineCount(const std::string& poem_id) const;
  std::optional<std::uint32_t> PoemIndex(const std::string& poem_id) const;

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::unordered_map<std::string, std::vector<LinePosting>, Hash,
                     std::equal_to<>>
      entries_;
  std::unordered_map<std::string, std::uint32_t> poem_index_;
  std::vector<std::string> poem_ids_;
  std::vector<std::vector<std::string>> poem_lines_;
  std::size_t total_lines_ = 0;
};

struct MatchEvidence {
  std::size_t query_line_start = 0;
  std::string db_poem_id;
  std::size_t db_line_start = 0;
  // Number of consecutive query lines in the matched run; always >= 2.
  std::size_t length = 0;
  MatchMode mode = MatchMode::kSamePoemConsecutive;
};

// Returns evidence for the first duplicated pair of consecutive query lines
// (in query order), or nullopt. Postings of `exclude_id` are ignored.
std::optional<MatchEvidence> FindDuplication(
    std::span<const std::string> query_lines, const LineIndex& index,
    MatchMode mode, const std::optional<std::string>& exclude_id = {});

// Segments `poem` first; a poem without line content has no evidence.
std::optional<MatchEvidence> FindDuplication(
    const Poem& poem, const LineIndex& index, MatchMode mode,
    const std::optional<std::string>& exclude_id = {},
    const SegmentOptions& options = {});

}  // namespace proftap

#endif  // PROFTAP_ANTIPLAG_H_
