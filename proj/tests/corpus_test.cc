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

#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "proftap/error.h"
#include "proftap/rng.h"
#include "proftap/utf8.h"
#include "test_util.h"

namespace proftap {
namespace {

Poem MakeTestPoem(std::string body) {
  Poem p;
  p.id = "p1";
  p.title = "t";
  p.body = std::move(body);
  return p;
}

TEST_CASE("ingest a single well-formed JSONL record") {
  std::istringstream in(
      R"({"title": "夜雪", "body": "已觉衾枕冷，转见窗户明。"})"
      "\n");
  const Corpus c = ParseCorpus(in, CorpusFormat::kJsonLines, "db");
  REQUIRE(c.size() == 1);
  CHECK(c.poems[0].title == "夜雪");
  CHECK(c.poems[0].body == "已觉衾枕冷，转见窗户明。");
  CHECK(c.poems[0].id == "db:1");
  CHECK(c.poems[0].source.is_human());
}

TEST_CASE("ingest rejects an empty body with the record index") {
  std::istringstream in(
      "{\"title\": \"a\", \"body\": \"白日依山尽\"}\n"
      "{\"title\": \"b\", \"body\": \"\"}\n");
  try {
    ParseCorpus(in, CorpusFormat::kJsonLines, "db");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("record 2") != std::string::npos);
  }
}

TEST_CASE("ingest rejects a missing title, duplicate ids and bad JSON") {
  std::istringstream missing("{\"body\": \"白日依山尽\"}\n");
  CHECK_THROWS_AS(ParseCorpus(missing, CorpusFormat::kJsonLines, "db"),
                  ValidationError);
  std::istringstream dup(
      "{\"id\": \"x\", \"title\": \"a\", \"body\": \"白日\"}\n"
      "{\"id\": \"x\", \"title\": \"b\", \"body\": \"黄河\"}\n");
  CHECK_THROWS_WITH_AS(ParseCorpus(dup, CorpusFormat::kJsonLines, "db"),
                       doctest::Contains("duplicate id"), ValidationError);
  std::istringstream bad("{\"title\": \n");
  CHECK_THROWS_WITH_AS(ParseCorpus(bad, CorpusFormat::kJsonLines, "db"),
                       doctest::Contains("record 1"), ValidationError);
  std::istringstream empty("");
  CHECK_THROWS_AS(ParseCorpus(empty, CorpusFormat::kJsonLines, "db"),
                  ValidationError);
  CHECK_THROWS_AS(IngestCorpus("/nonexistent/corpus.jsonl",
                               CorpusFormat::kJsonLines),
                  ValidationError);
  CHECK_THROWS_AS(ParseCorpusFormat("xml"), ValidationError);
}

TEST_CASE("ingest CSV with quoted multi-line bodies") {
  std::istringstream in(
      "id,title,body\n"
      "a,登鹳雀楼,\"白日依山尽，\n黄河入海流。\"\n"
      "b,\"题,\"\"名\"\"\",床前明月光\n");
  const Corpus c = ParseCorpus(in, CorpusFormat::kCsv, "db");
  REQUIRE(c.size() == 2);
  CHECK(c.poems[0].body == "白日依山尽，\n黄河入海流。");
  CHECK(c.poems[1].title == "题,\"名\"");
}

TEST_CASE("1,000-record synthetic corpus keeps every id distinct") {
  const auto path = testing::TempDir() / "synthetic.jsonl";
  {
    std::ofstream out(path);
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
      out << R"({"title": ")" << testing::RandomHanzi(rng, 3)
          << R"(", "body": ")" << testing::RandomHanzi(rng, 5) << "，"
          << testing::RandomHanzi(rng, 5) << "。\"}\n";
    }
  }
  const Corpus c = IngestCorpus(path, FormatFromPath(path));
  std::set<std::string> ids;
  for (const auto& p : c.poems) ids.insert(p.id);
  CHECK(c.size() == 1000);
  CHECK(ids.size() == 1000);
}

TEST_CASE("segment_lines splits on the delimiter set") {
  auto lines = SegmentLines(MakeTestPoem("已觉衾枕冷，转见窗户明。"));
  CHECK(lines.LinesUtf8() ==
        std::vector<std::string>{"已觉衾枕冷", "转见窗户明"});

  lines = SegmentLines(MakeTestPoem("白日依山尽。\n黄河入海流。"));
  CHECK(lines.LineLengths() == std::vector<std::size_t>{5, 5});

  CHECK_THROWS_AS(SegmentLines(MakeTestPoem("，。，。")), ValidationError);

  // The enumeration comma stays inside a line and is stripped from it.
  lines = SegmentLines(MakeTestPoem("春、夏、秋、冬，四时。"));
  CHECK(lines.LinesUtf8() == std::vector<std::string>{"春夏秋冬", "四时"});
}

TEST_CASE("segmentation reconstructs the body minus in-line punctuation") {
  Rng rng(11);
  const std::u32string alphabet = U"山水风月花鸟，。！？；：\n、 「」《》·,.a";
  for (int trial = 0; trial < 2000; ++trial) {
    std::u32string body;
    const std::size_t len = 1 + rng.UniformIndex(30);
    for (std::size_t i = 0; i < len; ++i) {
      body.push_back(alphabet[rng.UniformIndex(alphabet.size())]);
    }
    const std::string utf8_body = utf8::Encode(body);
    const SegmentOptions opts;
    std::u32string expected;
    bool has_content = false;
    for (char32_t c : body) {
      const bool delim = opts.delimiters.find(c) != std::u32string::npos;
      if (delim || !utf8::IsPunctuationOrSpace(c)) expected.push_back(c);
      if (!delim && !utf8::IsPunctuationOrSpace(c)) has_content = true;
    }
    if (!has_content) {
      CHECK_THROWS_AS(SegmentText(utf8_body, "x"), ValidationError);
      continue;
    }
    const PoemLines lines = SegmentText(utf8_body, "x");
    REQUIRE(lines.raw_delimiters.size() == lines.lines.size() + 1);
    CHECK(lines.Reconstruct() == expected);
    for (const auto& line : lines.lines) CHECK(!line.empty());
  }
}

TEST_CASE("classify_yan by definition") {
  auto with_lengths = [](std::vector<int> lengths) {
    PoemLines pl;
    for (int n : lengths) pl.lines.emplace_back(n, U'字');
    return pl;
  };
  CHECK(ClassifyYan(with_lengths({5, 5, 5, 5})) == YanClass::kYan5);
  CHECK(ClassifyYan(with_lengths({7, 7, 7, 7, 7, 7, 7, 7})) == YanClass::kYan7);
  CHECK(ClassifyYan(with_lengths({5, 7, 5, 7})) == YanClass::kOther);
  CHECK(ClassifyYan(with_lengths({4, 4})) == YanClass::kOther);
  CHECK_THROWS_AS(ClassifyYan(PoemLines{}), ValidationError);

  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> lengths(1 + rng.UniformIndex(8));
    for (auto& n : lengths) n = 4 + static_cast<int>(rng.UniformIndex(4));
    const auto pl = with_lengths(lengths);
    const auto [lo, hi] = std::minmax_element(lengths.begin(), lengths.end());
    const YanClass expect = (*lo == 5 && *hi == 5)   ? YanClass::kYan5
                            : (*lo == 7 && *hi == 7) ? YanClass::kYan7
                                                     : YanClass::kOther;
    CHECK(ClassifyYan(pl) == expect);
    CHECK(ComputeFeatures(pl).line_length_patterned == (*lo == *hi));
  }
}

TEST_CASE("detect_char_repetition") {
  PoemLines pl;
  pl.lines = {U"山山"};
  CHECK(DetectCharRepetition(pl));
  pl.lines = {U"白日依山尽", U"黄河入海流"};
  CHECK_FALSE(DetectCharRepetition(pl));
  pl.lines = {U"白日依山尽", U"黄河入山流"};
  CHECK(DetectCharRepetition(pl));
  CHECK_FALSE(DetectCharRepetition(pl, RepetitionScope::kPerLine));

  // Histogram oracle: 40 characters over a 20-character alphabet.
  const std::u32string alphabet = U"一二三四五六七八九十甲乙丙丁戊己庚辛壬癸";
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::u32string text;
    const std::size_t len = 1 + rng.UniformIndex(40);
    for (std::size_t i = 0; i < len; ++i) {
      text.push_back(alphabet[rng.UniformIndex(alphabet.size())]);
    }
    std::map<char32_t, int> histogram;
    for (char32_t c : text) ++histogram[c];
    bool repeated = false;
    for (const auto& [c, n] : histogram) repeated |= n >= 2;
    PoemLines lines;
    for (std::size_t i = 0; i < text.size(); i += 5) {
      lines.lines.push_back(text.substr(i, 5));
    }
    CHECK(DetectCharRepetition(lines) == repeated);
  }
}

TEST_CASE("sample_titles") {
  Corpus c;
  for (int i = 0; i < 2000; ++i) {
    Poem p;
    p.id = "p" + std::to_string(i);
    p.title = "题" + std::to_string(i);
    p.body = "白日依山尽";
    c.poems.push_back(p);
  }
  const auto a = SampleTitles(c, 110, 42);
  const auto b = SampleTitles(c, 110, 42);
  CHECK(a.size() == 110);
  CHECK(a == b);
  std::set<std::string> ids;
  for (const auto& t : a) ids.insert(t.poem_id);
  CHECK(ids.size() == 110);
  CHECK(SampleTitles(c, 110, 43) != a);

  const auto all = SampleTitles(c, c.size(), 1);
  std::set<std::string> all_ids;
  for (const auto& t : all) all_ids.insert(t.poem_id);
  CHECK(all_ids.size() == c.size());
  CHECK_THROWS_AS(SampleTitles(c, c.size() + 1, 1), ValidationError);
}

TEST_CASE("normalize_text") {
  CHECK(NormalizeText("雲") == "雲");
  const CharMap map = CharMap::FromPairs({{U'雲', U'云'}});
  CHECK(NormalizeText("白雲", &map) == "白云");
  CHECK(NormalizeText("a\r\nb\rc　d") == "a\nb\ncd");
  CHECK_THROWS_AS(CharMap::FromPairs({{U'a', U'b'}, {U'b', U'c'}}),
                  ValidationError);

  const CharMap variants = CharMap::FromPairs(
      {{U'雲', U'云'}, {U'風', U'风'}, {U'東', U'东'}});
  const std::u32string alphabet = U"雲云風风東东 　\r\n，。a";
  Rng rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    std::u32string s;
    const std::size_t len = rng.UniformIndex(20);
    for (std::size_t i = 0; i < len; ++i) {
      s.push_back(alphabet[rng.UniformIndex(alphabet.size())]);
    }
    const std::string x = utf8::Encode(s);
    for (const CharMap* m : {static_cast<const CharMap*>(nullptr), &variants}) {
      const std::string once = NormalizeText(x, m);
      CHECK(NormalizeText(once, m) == once);
    }
  }
}

TEST_CASE("character map TSV") {
  const auto path = testing::TempDir() / "map.tsv";
  {
    std::ofstream out(path);
    out << "# variants\n雲\t云\n風\t风\n";
  }
  const CharMap map = CharMap::FromTsv(path);
  CHECK(map.size() == 2);
  CHECK(NormalizeText("風雲", &map) == "风云");
  {
    std::ofstream out(path);
    out << "雲云\n";
  }
  CHECK_THROWS_AS(CharMap::FromTsv(path), ValidationError);
}

}  // namespace
}  // namespace proftap
