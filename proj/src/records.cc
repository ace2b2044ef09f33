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

#include "proftap/records.h"

#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "proftap/error.h"

namespace proftap {

using nlohmann::json;

std::string FormatTimestamp(std::int64_t unix_ms) {
  std::int64_t secs = unix_ms / 1000;
  std::int64_t millis = unix_ms % 1000;
  if (millis < 0) {
    millis += 1000;
    --secs;
  }
  const std::time_t t = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  return fmt::format("{}.{:03d}Z", buf, millis);
}

std::int64_t ParseTimestamp(std::string_view text) {
  std::tm tm{};
  int millis = 0;
  const std::string s(text);
  const char* rest = strptime(s.c_str(), "%Y-%m-%dT%H:%M:%S", &tm);
  if (rest == nullptr) {
    throw ValidationError(fmt::format("bad timestamp '{}'", text));
  }
  if (*rest == '.') {
    ++rest;
    int digits = 0;
    while (*rest >= '0' && *rest <= '9') {
      if (digits < 3) millis = millis * 10 + (*rest - '0');
      ++digits;
      ++rest;
    }
    for (; digits < 3; ++digits) millis *= 10;
  }
  if (*rest == 'Z') ++rest;
  if (*rest != '\0') {
    throw ValidationError(fmt::format("bad timestamp '{}'", text));
  }
  return static_cast<std::int64_t>(timegm(&tm)) * 1000 + millis;
}

std::string FormatDouble(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

json PoemToJson(const Poem& poem) {
  json j = {{"id", poem.id},
            {"title", poem.title},
            {"body", poem.body},
            {"source", poem.source.is_human() ? "human" : "model"}};
  if (!poem.source.is_human()) j["model_id"] = poem.source.model_id;
  if (!poem.title_ref.empty()) j["title_ref"] = poem.title_ref;
  if (poem.form_hint) j["form"] = ToString(*poem.form_hint);
  if (!poem.author.empty()) j["author"] = poem.author;
  if (!poem.dynasty.empty()) j["dynasty"] = poem.dynasty;
  return j;
}

Poem PoemFromJson(const json& j) {
  Poem p;
  try {
    p.id = j.at("id").get<std::string>();
    p.title = j.at("title").get<std::string>();
    p.body = j.at("body").get<std::string>();
    const std::string source = j.value("source", "human");
    if (source == "model") {
      p.source = Source::Model(j.at("model_id").get<std::string>());
      if (p.source.model_id.empty()) {
        throw ValidationError("model poem with empty model_id");
      }
    } else if (source != "human") {
      throw ValidationError(fmt::format("unknown source '{}'", source));
    }
    p.title_ref = j.value("title_ref", "");
    if (j.contains("form")) p.form_hint = ParseForm(j["form"].get<std::string>());
    p.author = j.value("author", "");
    p.dynasty = j.value("dynasty", "");
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("bad poem record: {}", e.what()));
  }
  ValidatePoem(p);
  return p;
}

void WritePoemsJsonl(const std::filesystem::path& path,
                     std::span<const Poem> poems) {
  std::string out;
  for (const auto& p : poems) {
    out += PoemToJson(p).dump();
    out += '\n';
  }
  WriteFileAtomic(path, out);
}

std::vector<Poem> ReadPoemsJsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot read {}", path.string()));
  std::vector<Poem> poems;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      poems.push_back(PoemFromJson(json::parse(line)));
    } catch (const std::exception& e) {
      throw ValidationError(
          fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return poems;
}

namespace {

std::string CsvField(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string(s);
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

void WriteRatingsCsv(std::ostream& out,
                     std::span<const RatingRecord> ratings) {
  out << "judge_id,poem_id,probability,submitted_at\n";
  for (const auto& r : ratings) {
    out << CsvField(r.judge_id) << ',' << CsvField(r.poem_id) << ','
        << FormatDouble(r.probability) << ','
        << FormatTimestamp(r.submitted_at_ms) << '\n';
  }
}

std::string RatingsToCsv(std::span<const RatingRecord> ratings) {
  std::ostringstream out;
  WriteRatingsCsv(out, ratings);
  return out.str();
}

std::vector<RatingRecord> ParseRatingsCsv(std::istream& in) {
  const auto rows = ParseCsv(in);
  if (rows.empty()) throw ValidationError("ratings file is empty");
  const auto& header = rows.front();
  auto column = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ValidationError(
        fmt::format("ratings header lacks column '{}'", name));
  };
  const std::size_t judge_col = column("judge_id");
  const std::size_t poem_col = column("poem_id");
  const std::size_t prob_col = column("probability");
  std::optional<std::size_t> time_col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "submitted_at") time_col = i;
  }
  std::vector<RatingRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < header.size()) {
      throw ValidationError(fmt::format("ratings row {}: too few fields", r));
    }
    RatingRecord rec;
    rec.judge_id = row[judge_col];
    rec.poem_id = row[poem_col];
    const std::string& prob = row[prob_col];
    auto [ptr, ec] =
        std::from_chars(prob.data(), prob.data() + prob.size(), rec.probability);
    if (ec != std::errc() || ptr != prob.data() + prob.size()) {
      throw ValidationError(
          fmt::format("ratings row {}: bad probability '{}'", r, prob));
    }
    if (!IsValidProbability(rec.probability)) {
      throw ValidationError(
          fmt::format("ratings row {}: probability {} outside [0,1]", r, prob));
    }
    if (rec.judge_id.empty() || rec.poem_id.empty()) {
      throw ValidationError(fmt::format("ratings row {}: empty id", r));
    }
    if (time_col && !row[*time_col].empty()) {
      rec.submitted_at_ms = ParseTimestamp(row[*time_col]);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<RatingRecord> ReadRatingsCsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot read {}", path.string()));
  try {
    return ParseRatingsCsv(in);
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StageError(fmt::format("cannot write {}", tmp.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw StageError(fmt::format("write failed: {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot read {}", path.string()));
  return std::string(std::istreambuf_iterator<char>(in), {});
}

json ReadJsonFile(const std::filesystem::path& path) {
  const std::string text = ReadFile(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(
        fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
  }
}

}  // namespace proftap
