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

#include "proftap/generation.h"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "proftap/rng.h"
#include "test_util.h"

namespace proftap {
namespace {

constexpr const char* kJingYeSi = "床前明月光，疑是地上霜。\n举头望明月，低头思故乡。";
constexpr const char* kDengGuanQue = "白日依山尽，黄河入海流。\n欲穷千里目，更上一层楼。";
constexpr const char* kClean = "寒江孤影远，落日照苍山。";

Corpus Database() {
  Corpus c;
  c.source_label = "human";
  Poem a;
  a.id = "h1";
  a.title = "静夜思";
  a.body = kJingYeSi;
  a.title_ref = "h1";
  Poem b;
  b.id = "h2";
  b.title = "登鹳雀楼";
  b.body = kDengGuanQue;
  b.title_ref = "h2";
  c.poems = {a, b};
  return c;
}

ModelSpec Spec(std::string id, int max_attempts = 5) {
  ModelSpec spec;
  spec.model_id = std::move(id);
  spec.params.max_attempts = max_attempts;
  spec.backoff = std::chrono::milliseconds(0);
  return spec;
}

const LineIndex& Index() {
  static const LineIndex index = LineIndex::Build(Database());
  return index;
}

TEST_CASE("render_prompt substitutes the title verbatim") {
  CHECK(PromptTemplate("写《{{title}}》").Render("夜雪") == "写《夜雪》");
  const std::string p = PromptTemplate::Default().Render("游三清山");
  CHECK(p.find("《游三清山》") != std::string::npos);
  CHECK(p.find("{{") == std::string::npos);
  CHECK(p.rfind("想象你是一位著名诗人", 0) == 0);
  CHECK_THROWS_AS(PromptTemplate("写一首诗"), ValidationError);
  CHECK_THROWS_AS(PromptTemplate("{{title}}{{title}}"), ValidationError);
}

TEST_CASE("render_prompt is injective in the title") {
  Rng rng(11);
  const PromptTemplate t = PromptTemplate::Default();
  std::map<std::string, std::string> seen;
  for (int i = 0; i < 2000; ++i) {
    const std::string title = testing::RandomHanzi(rng, 1 + rng.UniformIndex(4),
                                                   0x4E00, 40);
    const std::string prompt = t.Render(title);
    auto [it, inserted] = seen.emplace(prompt, title);
    CHECK(it->second == title);
  }
}

TEST_CASE("postprocess examples") {
  CHECK(Postprocess(kJingYeSi, "静夜思") == kJingYeSi);
  CHECK(Postprocess("《夜雪》\n已觉衾枕冷，转见窗户明。\n(This poem depicts...)",
                    "夜雪") == "已觉衾枕冷，转见窗户明。");
  try {
    Postprocess("Sorry, I cannot help.", "夜雪");
    FAIL("expected an error");
  } catch (const GenerationError& e) {
    CHECK(e.failure().kind == FailureKind::kEmptyOutput);
  }
}

TEST_CASE("postprocess strips markdown, fences, labels and titles") {
  const std::string raw =
      "```\n## 《夜雪》\n**诗：** 已觉衾枕冷，  转见窗户明。\n"
      "> 夜深知雪重，时闻折竹声。\n```\n\n"
      "Note: the poem uses a classical five-character form.";
  CHECK(Postprocess(raw, "夜雪") ==
        "已觉衾枕冷，转见窗户明。\n夜深知雪重，时闻折竹声。");
  // A bare title line is dropped too.
  CHECK(Postprocess("夜雪\n已觉衾枕冷，转见窗户明。", "夜雪") ==
        "已觉衾枕冷，转见窗户明。");
  CHECK(Postprocess("Poem: 已觉衾枕冷，转见窗户明。", "夜雪") ==
        "已觉衾枕冷，转见窗户明。");
  // The 30% threshold is inclusive: 3 foreign characters out of 10 stays.
  CHECK(Postprocess("abc春眠不觉晓处处", "x") == "abc春眠不觉晓处处");
  CHECK_THROWS_AS(Postprocess("abcd春眠不觉晓处处", "x"), GenerationError);
  CHECK_THROWS_AS(Postprocess("《夜雪》\n\n  \n", "夜雪"), GenerationError);
}

TEST_CASE("generate_poem takes one attempt on a clean body") {
  auto stub = StubAdapter::Sequence({kClean});
  const auto out = GeneratePoem(Spec("m"), *stub, PromptTemplate::Default(),
                                {"夜雪", "h9"}, Index(),
                                MatchMode::kSamePoemConsecutive);
  CHECK(out.attempts == 1);
  CHECK(out.poem.body == kClean);
  CHECK(out.poem.id == "m/h9");
  CHECK(out.poem.title == "夜雪");
  CHECK(out.poem.title_ref == "h9");
  CHECK(out.poem.source == Source::Model("m"));
}

TEST_CASE("generate_poem regenerates after a recitation") {
  auto stub = StubAdapter::Sequence({kJingYeSi, kClean});
  const auto out = GeneratePoem(Spec("m"), *stub, PromptTemplate::Default(),
                                {"静夜思", "h1"}, Index(),
                                MatchMode::kSamePoemConsecutive);
  CHECK(out.attempts == 2);
  CHECK(out.poem.body == kClean);
}

TEST_CASE("generate_poem passes a fresh nonce each attempt") {
  std::vector<std::uint64_t> nonces;
  std::mutex mu;
  StubAdapter stub([&](const CompletionRequest& r) {
    std::lock_guard lock(mu);
    nonces.push_back(r.nonce);
    CHECK(r.attempt + 1 == nonces.size());
    CHECK(r.temperature == 0.9);
    return r.attempt < 3 ? std::string(kDengGuanQue) : std::string(kClean);
  });
  const auto out = GeneratePoem(Spec("m"), stub, PromptTemplate::Default(),
                                {"登鹳雀楼", "h2"}, Index(), MatchMode::kAnyLine);
  CHECK(out.attempts == 4);
  CHECK(std::set(nonces.begin(), nonces.end()).size() == 4);
}

TEST_CASE("generate_poem reports exhaustion") {
  auto stub = StubAdapter::Sequence({kJingYeSi});
  try {
    GeneratePoem(Spec("m", 3), *stub, PromptTemplate::Default(),
                 {"静夜思", "h1"}, Index(), MatchMode::kSamePoemConsecutive);
    FAIL("expected exhaustion");
  } catch (const GenerationError& e) {
    CHECK(e.failure().kind == FailureKind::kExhausted);
    CHECK(e.failure().attempts == 3);
    CHECK(e.failure().model_id == "m");
    CHECK(e.failure().title_ref == "h1");
    CHECK(e.failure().message.find("h1") != std::string::npos);
  }
  auto chatty = StubAdapter::Sequence({"I am a language model."});
  try {
    GeneratePoem(Spec("m", 2), *chatty, PromptTemplate::Default(),
                 {"静夜思", "h1"}, Index(), MatchMode::kSamePoemConsecutive);
    FAIL("expected exhaustion");
  } catch (const GenerationError& e) {
    CHECK(e.failure().kind == FailureKind::kEmptyOutput);
  }
}

TEST_CASE("transport errors are retried with a bound") {
  std::atomic<int> calls = 0;
  StubAdapter flaky([&](const CompletionRequest&) -> std::string {
    if (++calls <= 2) throw TransportError("connection reset");
    return kClean;
  });
  ModelSpec spec = Spec("m");
  spec.transport_retries = 2;
  const auto out = GeneratePoem(spec, flaky, PromptTemplate::Default(),
                                {"夜雪", "t"}, Index(),
                                MatchMode::kSamePoemConsecutive);
  CHECK(out.attempts == 1);
  CHECK(calls == 3);

  calls = 0;
  StubAdapter down([&](const CompletionRequest&) -> std::string {
    ++calls;
    throw TransportError("connection refused");
  });
  try {
    GeneratePoem(spec, down, PromptTemplate::Default(), {"夜雪", "t"}, Index(),
                 MatchMode::kSamePoemConsecutive);
    FAIL("expected transport failure");
  } catch (const GenerationError& e) {
    CHECK(e.failure().kind == FailureKind::kTransport);
  }
  CHECK(calls == 3);
}

TEST_CASE("emitted poems never carry duplication evidence") {
  Rng rng(5);
  Corpus db;
  for (int i = 0; i < 50; ++i) {
    Poem p;
    p.id = "d" + std::to_string(i);
    p.title = "t";
    p.body = testing::RandomHanzi(rng, 5, 0x5C71, 3) + "，" +
             testing::RandomHanzi(rng, 5, 0x5C71, 3) + "。";
    db.poems.push_back(p);
  }
  const LineIndex index = LineIndex::Build(db);
  for (auto mode : {MatchMode::kSamePoemConsecutive, MatchMode::kAnyLine}) {
    StubAdapter stub([&](const CompletionRequest& r) {
      Rng local(r.nonce);
      return testing::RandomHanzi(local, 5, 0x5C71, 3) + "，" +
             testing::RandomHanzi(local, 5, 0x5C71, 3) + "。";
    });
    int ok = 0;
    for (int i = 0; i < 200; ++i) {
      try {
        const auto out = GeneratePoem(Spec("m", 8), stub,
                                      PromptTemplate::Default(),
                                      {"t", "q" + std::to_string(i)}, index, mode);
        CHECK_FALSE(FindDuplication(out.poem, index, mode).has_value());
        ++ok;
      } catch (const GenerationError& e) {
        CHECK(e.failure().kind == FailureKind::kExhausted);
      }
    }
    CHECK(ok > 0);
  }
}

std::vector<TitleRef> Titles(std::size_t n) {
  std::vector<TitleRef> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"题" + std::to_string(i), "h" + std::to_string(100 + i)});
  }
  return out;
}

TEST_CASE("run_generation yields one poem per pair") {
  std::vector<Contestant> cs = {
      {Spec("a"), StubAdapter::Synthetic({.seed = 1})},
      {Spec("b"), StubAdapter::Synthetic({.seed = 2})}};
  const auto titles = Titles(3);
  const auto run = RunGeneration(cs, titles, PromptTemplate::Default(), Index());
  CHECK(run.Poems().size() == 6);
  CHECK(run.Failures().empty());
  std::set<std::string> ids;
  for (const auto& p : run.Poems()) ids.insert(p.id);
  CHECK(ids.size() == 6);
  CHECK(ids.count("b/h102") == 1);
}

TEST_CASE("run_generation keeps going past a failed pair") {
  auto picky = std::make_shared<StubAdapter>([](const CompletionRequest& r) {
    return r.title == "题1" ? std::string(kJingYeSi) : std::string(kClean);
  });
  std::vector<Contestant> cs = {{Spec("a", 2), picky},
                                {Spec("b"), StubAdapter::Sequence({kClean})}};
  const auto titles = Titles(3);
  const auto run = RunGeneration(cs, titles, PromptTemplate::Default(), Index());
  CHECK(run.Poems().size() == 5);
  const auto failures = run.Failures();
  REQUIRE(failures.size() == 1);
  CHECK(failures[0].model_id == "a");
  CHECK(failures[0].title_ref == "h101");
  CHECK(run.Poems().size() + failures.size() == cs.size() * titles.size());
}

TEST_CASE("run_generation is independent of scheduling") {
  const auto titles = Titles(40);
  auto make = [&](std::size_t concurrency) {
    std::vector<Contestant> cs;
    for (int m = 0; m < 3; ++m) {
      ModelSpec s = Spec("m" + std::to_string(m), 3);
      s.concurrency = concurrency;
      s.stub.seed = m;
      cs.push_back({s, StubAdapter::Synthetic(s.stub)});
    }
    return RunGeneration(cs, titles, PromptTemplate::Default(), Index());
  };
  const auto serial = make(1);
  const auto parallel = make(4);
  REQUIRE(serial.results.size() == parallel.results.size());
  for (std::size_t i = 0; i < serial.results.size(); ++i) {
    REQUIRE(serial.results[i].outcome.has_value());
    REQUIRE(parallel.results[i].outcome.has_value());
    CHECK(serial.results[i].outcome->poem.body ==
          parallel.results[i].outcome->poem.body);
    CHECK(serial.results[i].outcome->attempts ==
          parallel.results[i].outcome->attempts);
  }
}

TEST_CASE("run_generation skips completed pairs") {
  std::atomic<int> calls = 0;
  auto counting = std::make_shared<StubAdapter>([&](const CompletionRequest&) {
    ++calls;
    return std::string(kClean);
  });
  std::vector<Contestant> cs = {{Spec("a"), counting}};
  const auto titles = Titles(4);
  RunGenerationOptions options;
  PairResult done;
  done.model_index = 0;
  done.title_index = 2;
  done.outcome = GenerationOutcome{Poem{.id = "a/h102", .body = "旧"}, 1};
  options.completed = {done};
  int callbacks = 0;
  options.on_complete = [&](const PairResult&) { ++callbacks; };
  const auto run =
      RunGeneration(cs, titles, PromptTemplate::Default(), Index(), options);
  CHECK(calls == 3);
  CHECK(callbacks == 3);
  CHECK(run.results[2].outcome->poem.body == "旧");
}

TEST_CASE("run_generation rejects duplicate model ids") {
  std::vector<Contestant> cs = {{Spec("a"), StubAdapter::Sequence({kClean})},
                                {Spec("a"), StubAdapter::Sequence({kClean})}};
  const auto titles = Titles(1);
  CHECK_THROWS_AS(RunGeneration(cs, titles, PromptTemplate::Default(), Index()),
                  ValidationError);
  CHECK_THROWS_AS(RunGeneration(std::span<const Contestant>(cs).first(1),
                                std::span<const TitleRef>(),
                                PromptTemplate::Default(), Index()),
                  ValidationError);
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

// Attempts needed for replay title i: one extra for i = 2 (mod 5), two extra
// for i = 3 (mod 7).
std::size_t ScheduledAttempts(std::size_t i) {
  return 1 + (i % 5 == 2 ? 1 : 0) + (i % 7 == 3 ? 2 : 0);
}

TEST_CASE("replay adapter over 110 titles") {
  const auto dir = testing::TempDir() / "replay110";
  const ReplayAdapter replay(dir);
  const auto titles = Titles(110);
  Rng rng(99);
  for (std::size_t i = 0; i < titles.size(); ++i) {
    const std::size_t need = ScheduledAttempts(i);
    for (std::size_t a = 0; a + 1 < need; ++a) {
      // Rejected candidates alternate between a recitation and pure chatter.
      WriteText(replay.PathFor("r", titles[i].title, a),
                a % 2 == 0 ? std::string(kDengGuanQue)
                           : std::string("As an AI, I cannot write poems."));
    }
    WriteText(replay.PathFor("r", titles[i].title, need - 1),
              "《" + titles[i].title + "》\n" + testing::RandomHanzi(rng, 5) +
                  "，" + testing::RandomHanzi(rng, 5) + "。\n");
  }
  CHECK(replay.PathFor("r", "夜雪", 0).filename() ==
        ReplayAdapter::TitleHash("夜雪") + ".txt");
  CHECK(replay.PathFor("r", "夜雪", 2).filename() ==
        ReplayAdapter::TitleHash("夜雪") + ".txt.2");

  ModelSpec spec = Spec("r");
  spec.adapter = AdapterKind::kReplayFile;
  spec.replay_dir = dir;
  std::vector<Contestant> cs = {{spec, MakeAdapter(spec)}};
  const auto run = RunGeneration(cs, titles, PromptTemplate::Default(), Index());
  REQUIRE(run.Poems().size() == 110);
  std::map<std::size_t, std::size_t> histogram;
  std::size_t total = 0;
  for (std::size_t i = 0; i < 110; ++i) {
    const auto& r = run.results[i];
    REQUIRE(r.outcome.has_value());
    CHECK(r.outcome->attempts == ScheduledAttempts(i));
    CHECK(r.outcome->poem.body.find("《") == std::string::npos);
    ++histogram[r.outcome->attempts];
    total += r.outcome->attempts;
  }
  // Counted by hand from the schedule.
  CHECK(histogram[1] == 75);
  CHECK(histogram[2] == 19);
  CHECK(histogram[3] == 13);
  CHECK(histogram[4] == 3);
  CHECK(total == 164);

  // A title with no files fails as a per-pair entry.
  const std::vector<TitleRef> missing = {{"无此题", "hx"}};
  const auto miss = RunGeneration(cs, missing, PromptTemplate::Default(), Index());
  REQUIRE(miss.Failures().size() == 1);
  CHECK(miss.Failures()[0].kind == FailureKind::kEmptyOutput);
}

TEST_CASE("ten replay models over 110 titles give 1100 poems") {
  const auto dir = testing::TempDir() / "replay1100";
  const ReplayAdapter replay(dir);
  const auto titles = Titles(110);
  std::vector<Contestant> cs;
  for (int m = 0; m < 10; ++m) {
    ModelSpec s = Spec("model" + std::to_string(m));
    s.adapter = AdapterKind::kReplayFile;
    s.replay_dir = dir;
    StubStyle style{.seed = static_cast<std::uint64_t>(m)};
    for (const auto& t : titles) {
      CompletionRequest r{.model_id = s.model_id, .title = t.title,
                          .nonce = Fnv1a64(t.title)};
      WriteText(replay.PathFor(s.model_id, t.title, 0),
                StubAdapter::Synthetic(style)->Complete(r));
    }
    cs.push_back({s, MakeAdapter(s)});
  }
  const auto run = RunGeneration(cs, titles, PromptTemplate::Default(), Index());
  CHECK(run.Poems().size() == 1100);
  CHECK(run.Failures().empty());
}

TEST_CASE("synthetic stub follows its style") {
  auto stub = StubAdapter::Synthetic({.seed = 3, .yan7_ratio = 1.0,
                                      .irregular_ratio = 0.0,
                                      .chatter_ratio = 1.0});
  for (std::uint64_t n = 0; n < 50; ++n) {
    const std::string raw =
        stub->Complete({.model_id = "m", .title = "夜雪", .nonce = n});
    CHECK(raw.find("《夜雪》") != std::string::npos);
    const std::string body = Postprocess(raw, "夜雪");
    Poem p;
    p.id = "x";
    p.body = body;
    CHECK(ClassifyYan(SegmentLines(p)) == YanClass::kYan7);
  }
}

TEST_CASE("model spec json round trip and validation") {
  ModelSpec s = Spec("qwen-72b");
  s.adapter = AdapterKind::kHttpChat;
  s.endpoint = "http://localhost:1/v1/chat/completions";
  s.params.extra = {{"top_p", 0.8}};
  s.params_label = "72B";
  const ModelSpec back = ModelSpecFromJson(ModelSpecToJson(s));
  CHECK(back.model_id == "qwen-72b");
  CHECK(back.adapter == AdapterKind::kHttpChat);
  CHECK(back.endpoint == s.endpoint);
  CHECK(back.params.extra == s.params.extra);
  CHECK(back.params_label == "72B");
  CHECK(back.params.temperature == 0.9);

  nlohmann::json bad = {{"model_id", "x"}, {"adapter", "http"}};
  CHECK_THROWS_AS(ModelSpecFromJson(bad), ValidationError);
  bad = {{"model_id", "x"}, {"params", {{"max_attempts", 0}}}};
  CHECK_THROWS_AS(ModelSpecFromJson(bad), ValidationError);
  bad = {{"model_id", "x"}, {"params", {{"temperature", -0.1}}}};
  CHECK_THROWS_AS(ModelSpecFromJson(bad), ValidationError);
  bad = {{"model_id", "x"}, {"adapter", "carrier-pigeon"}};
  CHECK_THROWS_AS(ModelSpecFromJson(bad), ValidationError);
  const nlohmann::json rel = {{"model_id", "x"}, {"adapter", "replay"},
                              {"replay_dir", "out"}};
  CHECK(ModelSpecFromJson(rel, "/base").replay_dir == "/base/out");
}

TEST_CASE("http adapter speaks chat completions") {
  CHECK(HttpChatAdapter::KeyVariable("qwen-72b") == "PROFTAP_KEY_QWEN_72B");
  ::setenv("PROFTAP_KEY_MOCK_1", "sekret", 1);

  httplib::Server server;
  std::atomic<int> hits = 0;
  nlohmann::json last_body;
  std::string last_auth;
  std::mutex mu;
  server.Post("/v1/chat/completions",
              [&](const httplib::Request& req, httplib::Response& res) {
                if (++hits == 1) {
                  res.status = 503;
                  return;
                }
                {
                  std::lock_guard lock(mu);
                  last_body = nlohmann::json::parse(req.body);
                  last_auth = req.get_header_value("Authorization");
                }
                nlohmann::json reply = {
                    {"choices",
                     {{{"message", {{"role", "assistant"}, {"content", kClean}}}}}}};
                res.set_content(reply.dump(), "application/json");
              });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ModelSpec s = Spec("mock.1");
  s.adapter = AdapterKind::kHttpChat;
  s.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  s.params.extra = {{"top_p", 0.7}};
  auto adapter = MakeAdapter(s);
  const auto out = GeneratePoem(s, *adapter, PromptTemplate::Default(),
                                {"夜雪", "h"}, Index(),
                                MatchMode::kSamePoemConsecutive);
  server.stop();
  t.join();

  CHECK(out.poem.body == kClean);
  CHECK(hits == 2);
  std::lock_guard lock(mu);
  CHECK(last_auth == "Bearer sekret");
  CHECK(last_body["model"] == "mock.1");
  CHECK(last_body["temperature"] == 0.9);
  CHECK(last_body["top_p"] == 0.7);
  CHECK(last_body["messages"][0]["role"] == "user");
  CHECK(last_body["messages"][0]["content"].get<std::string>().find("《夜雪》") !=
        std::string::npos);
}

TEST_CASE("http adapter failure is a transport failure") {
  ModelSpec s = Spec("down");
  s.adapter = AdapterKind::kHttpChat;
  s.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  s.transport_retries = 1;
  auto adapter = MakeAdapter(s);
  try {
    GeneratePoem(s, *adapter, PromptTemplate::Default(), {"夜雪", "h"}, Index(),
                 MatchMode::kSamePoemConsecutive);
    FAIL("expected failure");
  } catch (const GenerationError& e) {
    CHECK(e.failure().kind == FailureKind::kTransport);
  }
}

}  // namespace
}  // namespace proftap
