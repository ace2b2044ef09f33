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

#ifndef PROFTAP_CORPUS_H_
#define PROFTAP_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace proftap {

// Who wrote a poem. An empty model id means a human author.
struct Source {
  std::string model_id;

  static Source Human() { return {}; }
  static Source Model(std::string id) { return Source{std::move(id)}; }
  bool is_human() const { return model_id.empty(); }

  friend bool operator==(const Source&, const Source&) = default;
};

enum class Form { kGufeng, kLushi, kJueju, kOther };

std::string_view ToString(Form form);
// Accepts the pinyin names and the Chinese names (古风, 律诗, 绝句);
// anything else maps to kOther.
Form ParseForm(std::string_view text);

struct Poem {
  std::string id;
  std::string title;
  std::string body;
  Source source;
  std::optional<Form> form_hint;
  // Id of the human poem whose title this poem was written on. A human
  // poem refers to itself; empty when the poem is not part of a run.
  std::string title_ref;
  std::string author;
  std::string dynasty;
};

// Throws ValidationError when title or body is empty or id is missing.
void ValidatePoem(const Poem& poem);

struct PoemLines {
  std::string poem_id;
  // Line text with all punctuation and whitespace removed; never empty.
  std::vector<std::u32string> lines;
  // Delimiter runs consumed around the lines: raw_delimiters[0] precedes the
  // first line, raw_delimiters[i + 1] follows lines[i].
  std::vector<std::u32string> raw_delimiters;

  // Interleaves delimiter runs and lines. Equals the normalized body with
  // every non-delimiter punctuation or whitespace character removed.
  std::u32string Reconstruct() const;
  std::vector<std::size_t> LineLengths() const;
  std::vector<std::string> LinesUtf8() const;
};

enum class YanClass { kYan5, kYan7, kOther };

std::string_view ToString(YanClass yan);

enum class RepetitionScope { kWholePoem, kPerLine };

struct StructuralFeatures {
  std::string poem_id;
  YanClass yan_class = YanClass::kOther;
  bool has_char_repetition = false;
  bool line_length_patterned = false;
  std::vector<std::size_t> line_lengths;
};

struct Corpus {
  std::string source_label;
  std::vector<Poem> poems;

  std::size_t size() const { return poems.size(); }
};

// Single-character substitution table (e.g. traditional to simplified).
// An empty map is the identity.
class CharMap {
 public:
  CharMap() = default;

  // Throws ValidationError when a target character is itself remapped,
  // which would make normalization non-idempotent.
  static CharMap FromPairs(
      const std::vector<std::pair<char32_t, char32_t>>& pairs);
  // Two-column UTF-8 TSV, `from<TAB>to`, one single-character pair per
  // line. Blank lines and lines starting with '#' are ignored.
  static CharMap FromTsv(const std::filesystem::path& path);

  char32_t Apply(char32_t c) const;
  bool empty() const { return map_.empty(); }
  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<char32_t, char32_t> map_;
};

// Applies `map` character-wise, removes ideographic spaces (U+3000) and
// folds CR/CRLF to LF. Idempotent.
std::string NormalizeText(std::string_view text, const CharMap* map = nullptr);

struct SegmentOptions {
  // Line-ending characters. The enumeration comma 、 is deliberately absent.
  std::u32string delimiters = U"，。！？；：\n";
};

// Splits a poem body into lines. Throws ValidationError when no line
// content remains after punctuation removal.
PoemLines SegmentLines(const Poem& poem, const SegmentOptions& options = {});
PoemLines SegmentText(std::string_view body, std::string poem_id,
                      const SegmentOptions& options = {});

YanClass ClassifyYan(const PoemLines& lines);
bool DetectCharRepetition(
    const PoemLines& lines,
    RepetitionScope scope = RepetitionScope::kWholePoem);
StructuralFeatures ComputeFeatures(
    const PoemLines& lines,
    RepetitionScope scope = RepetitionScope::kWholePoem);

enum class CorpusFormat { kJsonLines, kCsv };

// "jsonl" / "json" / "csv". Throws ValidationError otherwise.
CorpusFormat ParseCorpusFormat(std::string_view name);
// Infers the format from the file extension (.csv, otherwise JSON Lines).
CorpusFormat FormatFromPath(const std::filesystem::path& path);

// Reads a corpus file. Records missing a title or body, duplicate ids and
// invalid UTF-8 are rejected with the offending record index. Missing ids
// default to "<label>:<record index>". The optional map is applied to title
// and body.
Corpus IngestCorpus(const std::filesystem::path& path, CorpusFormat format,
                    const CharMap* map = nullptr);
Corpus ParseCorpus(std::istream& in, CorpusFormat format,
                   std::string source_label, const CharMap* map = nullptr);

// Parses RFC 4180 CSV (quoted fields, doubled quotes, embedded newlines).
std::vector<std::vector<std::string>> ParseCsv(std::istream& in);

struct TitleRef {
  std::string title;
  std::string poem_id;

  friend bool operator==(const TitleRef&, const TitleRef&) = default;
};

// Uniform sample without replacement, deterministic in (corpus, count, seed).
std::vector<TitleRef> SampleTitles(const Corpus& corpus, std::size_t count,
                                   std::uint64_t seed);

}  // namespace proftap

#endif  // PROFTAP_CORPUS_H_
