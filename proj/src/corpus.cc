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

#include "proftap/corpus.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "proftap/error.h"
#include "proftap/rng.h"
#include "proftap/utf8.h"

namespace proftap {

namespace {

using nlohmann::json;

std::string OptionalString(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw ValidationError(fmt::format("field '{}' must be a string", key));
}

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\n");
  return s.substr(first, last - first + 1);
}

Poem MakePoem(std::string id, std::string_view title, std::string_view body,
              const CharMap* map) {
  Poem poem;
  poem.id = std::move(id);
  poem.title = Trim(NormalizeText(title, map));
  poem.body = Trim(NormalizeText(body, map));
  return poem;
}

}  // namespace

std::string_view ToString(Form form) {
  switch (form) {
    case Form::kGufeng:
      return "gufeng";
    case Form::kLushi:
      return "lushi";
    case Form::kJueju:
      return "jueju";
    case Form::kOther:
      return "other";
  }
  return "other";
}

Form ParseForm(std::string_view text) {
  if (text == "gufeng" || text == "古风") return Form::kGufeng;
  if (text == "lushi" || text == "律诗") return Form::kLushi;
  if (text == "jueju" || text == "绝句") return Form::kJueju;
  return Form::kOther;
}

std::string_view ToString(YanClass yan) {
  switch (yan) {
    case YanClass::kYan5:
      return "yan5";
    case YanClass::kYan7:
      return "yan7";
    case YanClass::kOther:
      return "other";
  }
  return "other";
}

void ValidatePoem(const Poem& poem) {
  if (poem.id.empty()) throw ValidationError("poem has an empty id");
  if (poem.title.empty()) {
    throw ValidationError(fmt::format("poem {}: empty title", poem.id));
  }
  if (poem.body.empty()) {
    throw ValidationError(fmt::format("poem {}: empty body", poem.id));
  }
}

std::u32string PoemLines::Reconstruct() const {
  std::u32string out;
  if (!raw_delimiters.empty()) out += raw_delimiters.front();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += lines[i];
    if (i + 1 < raw_delimiters.size()) out += raw_delimiters[i + 1];
  }
  return out;
}

std::vector<std::size_t> PoemLines::LineLengths() const {
  std::vector<std::size_t> lengths;
  lengths.reserve(lines.size());
  for (const auto& line : lines) lengths.push_back(line.size());
  return lengths;
}

std::vector<std::string> PoemLines::LinesUtf8() const {
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (const auto& line : lines) out.push_back(utf8::Encode(line));
  return out;
}

CharMap CharMap::FromPairs(
    const std::vector<std::pair<char32_t, char32_t>>& pairs) {
  CharMap map;
  for (const auto& [from, to] : pairs) {
    if (from == to) continue;
    auto [it, inserted] = map.map_.emplace(from, to);
    if (!inserted && it->second != to) {
      throw ValidationError(fmt::format(
          "character map: U+{:04X} mapped twice", static_cast<unsigned>(from)));
    }
  }
  for (const auto& [from, to] : map.map_) {
    if (map.map_.count(to) != 0) {
      throw ValidationError(fmt::format(
          "character map: target U+{:04X} is itself remapped",
          static_cast<unsigned>(to)));
    }
  }
  return map;
}

CharMap CharMap::FromTsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError(
        fmt::format("cannot read character map {}", path.string()));
  }
  std::vector<std::pair<char32_t, char32_t>> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValidationError(fmt::format("{}:{}: expected from<TAB>to",
                                        path.string(), lineno));
    }
    const auto from = utf8::Decode(line.substr(0, tab));
    const auto to = utf8::Decode(line.substr(tab + 1));
    if (from.size() != 1 || to.size() != 1) {
      throw ValidationError(fmt::format(
          "{}:{}: each column must hold exactly one character", path.string(),
          lineno));
    }
    pairs.emplace_back(from[0], to[0]);
  }
  return FromPairs(pairs);
}

char32_t CharMap::Apply(char32_t c) const {
  auto it = map_.find(c);
  return it == map_.end() ? c : it->second;
}

std::string NormalizeText(std::string_view text, const CharMap* map) {
  const std::u32string in = utf8::Decode(text);
  std::u32string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    char32_t c = in[i];
    if (c == 0x3000) continue;
    if (c == U'\r') {
      if (i + 1 < in.size() && in[i + 1] == U'\n') continue;
      c = U'\n';
    }
    if (map != nullptr) c = map->Apply(c);
    out.push_back(c);
  }
  return utf8::Encode(out);
}

PoemLines SegmentText(std::string_view body, std::string poem_id,
                      const SegmentOptions& options) {
  const std::u32string text = utf8::Decode(NormalizeText(body));
  PoemLines result;
  result.poem_id = std::move(poem_id);
  result.raw_delimiters.emplace_back();

  std::u32string segment;
  auto flush = [&] {
    if (!segment.empty()) {
      result.lines.push_back(std::move(segment));
      result.raw_delimiters.emplace_back();
    }
    segment.clear();
  };
  for (char32_t c : text) {
    if (options.delimiters.find(c) != std::u32string::npos) {
      flush();
      result.raw_delimiters.back().push_back(c);
    } else if (!utf8::IsPunctuationOrSpace(c)) {
      segment.push_back(c);
    }
  }
  flush();
  if (result.lines.empty()) {
    throw ValidationError(
        fmt::format("poem {}: no line content after punctuation removal",
                    result.poem_id));
  }
  return result;
}

PoemLines SegmentLines(const Poem& poem, const SegmentOptions& options) {
  return SegmentText(poem.body, poem.id, options);
}

YanClass ClassifyYan(const PoemLines& lines) {
  if (lines.lines.empty()) {
    throw ValidationError("classify_yan: poem has no lines");
  }
  const std::size_t first = lines.lines.front().size();
  const bool uniform =
      std::all_of(lines.lines.begin(), lines.lines.end(),
                  [first](const auto& l) { return l.size() == first; });
  if (uniform && first == 5) return YanClass::kYan5;
  if (uniform && first == 7) return YanClass::kYan7;
  return YanClass::kOther;
}

bool DetectCharRepetition(const PoemLines& lines, RepetitionScope scope) {
  std::unordered_set<char32_t> seen;
  for (const auto& line : lines.lines) {
    if (scope == RepetitionScope::kPerLine) seen.clear();
    for (char32_t c : line) {
      if (!seen.insert(c).second) return true;
    }
  }
  return false;
}

StructuralFeatures ComputeFeatures(const PoemLines& lines,
                                   RepetitionScope scope) {
  StructuralFeatures f;
  f.poem_id = lines.poem_id;
  f.line_lengths = lines.LineLengths();
  f.yan_class = ClassifyYan(lines);
  f.has_char_repetition = DetectCharRepetition(lines, scope);
  f.line_length_patterned =
      std::adjacent_find(f.line_lengths.begin(), f.line_lengths.end(),
                         std::not_equal_to<>()) == f.line_lengths.end();
  return f;
}

CorpusFormat ParseCorpusFormat(std::string_view name) {
  if (name == "jsonl" || name == "json") return CorpusFormat::kJsonLines;
  if (name == "csv") return CorpusFormat::kCsv;
  throw ValidationError(fmt::format("unknown corpus format '{}'", name));
}

CorpusFormat FormatFromPath(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? CorpusFormat::kCsv
                                    : CorpusFormat::kJsonLines;
}

std::vector<std::vector<std::string>> ParseCsv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char c;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) {
          throw ValidationError(
              fmt::format("csv row {}: stray quote inside unquoted field",
                          rows.size() + 1));
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        end_row();
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) {
    throw ValidationError(
        fmt::format("csv row {}: unterminated quoted field", rows.size() + 1));
  }
  if (field_started || !row.empty()) end_row();
  return rows;
}

Corpus ParseCorpus(std::istream& in, CorpusFormat format,
                   std::string source_label, const CharMap* map) {
  Corpus corpus;
  corpus.source_label = std::move(source_label);
  std::unordered_set<std::string> ids;

  auto add = [&](Poem poem, std::size_t record) {
    if (poem.title.empty()) {
      throw ValidationError(fmt::format("record {}: missing or empty title", record));
    }
    if (poem.body.empty()) {
      throw ValidationError(fmt::format("record {}: missing or empty body", record));
    }
    if (!ids.insert(poem.id).second) {
      throw ValidationError(
          fmt::format("record {}: duplicate id '{}'", record, poem.id));
    }
    poem.source = Source::Human();
    poem.title_ref = poem.id;
    corpus.poems.push_back(std::move(poem));
  };
  auto default_id = [&](std::size_t record) {
    return fmt::format("{}:{}", corpus.source_label, record);
  };

  if (format == CorpusFormat::kJsonLines) {
    std::string line;
    std::size_t record = 0;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      ++record;
      json obj;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ValidationError(
            fmt::format("record {}: malformed JSON: {}", record, e.what()));
      }
      if (!obj.is_object()) {
        throw ValidationError(fmt::format("record {}: not a JSON object", record));
      }
      try {
        std::string id = OptionalString(obj, "id");
        Poem poem = MakePoem(id.empty() ? default_id(record) : id,
                             OptionalString(obj, "title"),
                             OptionalString(obj, "body"), map);
        poem.author = OptionalString(obj, "author");
        poem.dynasty = OptionalString(obj, "dynasty");
        if (auto form = OptionalString(obj, "form"); !form.empty()) {
          poem.form_hint = ParseForm(form);
        }
        add(std::move(poem), record);
      } catch (const ValidationError& e) {
        const std::string what = e.what();
        if (what.rfind("record ", 0) == 0) throw;
        throw ValidationError(fmt::format("record {}: {}", record, what));
      }
    }
  } else {
    const auto rows = ParseCsv(in);
    if (rows.empty()) throw ValidationError("csv corpus has no header");
    const auto& header = rows.front();
    auto column = [&](std::string_view name) -> std::optional<std::size_t> {
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
      }
      return std::nullopt;
    };
    const auto id_col = column("id");
    const auto title_col = column("title");
    const auto body_col = column("body");
    if (!title_col || !body_col) {
      throw ValidationError("csv corpus header must contain id,title,body");
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      auto cell = [&](std::optional<std::size_t> col) -> std::string {
        return col && *col < row.size() ? row[*col] : std::string();
      };
      try {
        std::string id = cell(id_col);
        add(MakePoem(id.empty() ? default_id(r) : id, cell(title_col),
                     cell(body_col), map),
            r);
      } catch (const ValidationError& e) {
        const std::string what = e.what();
        if (what.rfind("record ", 0) == 0) throw;
        throw ValidationError(fmt::format("record {}: {}", r, what));
      }
    }
  }
  if (corpus.poems.empty()) {
    throw ValidationError("corpus contains no poems");
  }
  return corpus;
}

Corpus IngestCorpus(const std::filesystem::path& path, CorpusFormat format,
                    const CharMap* map) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError(fmt::format("cannot read corpus {}", path.string()));
  }
  try {
    return ParseCorpus(in, format, path.stem().string(), map);
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<TitleRef> SampleTitles(const Corpus& corpus, std::size_t count,
                                   std::uint64_t seed) {
  const std::size_t n = corpus.poems.size();
  if (count > n) {
    throw ValidationError(fmt::format(
        "cannot sample {} titles from a corpus of {} poems", count, n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::vector<TitleRef> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.UniformIndex(n - i);
    std::swap(order[i], order[j]);
    const Poem& p = corpus.poems[order[i]];
    out.push_back({p.title, p.id});
  }
  return out;
}

}  // namespace proftap
