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

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include "httplib.h"

#include "proftap/rng.h"
#include "proftap/utf8.h"

namespace proftap {

namespace {

std::u32string TrimU32(std::u32string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && utf8::IsSpace(s[b])) ++b;
  while (e > b && utf8::IsSpace(s[e - 1])) --e;
  return std::u32string(s.substr(b, e - b));
}

bool IsCjk(char32_t c) {
  return utf8::IsCjkIdeograph(c) || utf8::IsCjkPunctuation(c);
}

// Removes markdown heading/quote/list markers and emphasis.
std::u32string StripMarkdown(std::u32string line) {
  line = TrimU32(line);
  for (bool changed = true; changed;) {
    changed = false;
    std::size_t n = 0;
    while (n < line.size() && (line[n] == U'#' || line[n] == U'>')) ++n;
    if (n == 0 && line.size() >= 2 &&
        (line[0] == U'-' || line[0] == U'+') && line[1] == U' ') {
      n = 1;
    }
    if (n > 0) {
      line = TrimU32(std::u32string_view(line).substr(n));
      changed = true;
    }
  }
  std::u32string out;
  out.reserve(line.size());
  for (char32_t c : line) {
    if (c == U'*' || c == U'`' || c == U'_') continue;
    out.push_back(c);
  }
  return TrimU32(out);
}

// Drops whitespace next to CJK text and collapses the remaining runs.
std::u32string NormalizeSpaces(std::u32string_view line) {
  std::u32string out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (!utf8::IsSpace(line[i])) {
      out.push_back(line[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && utf8::IsSpace(line[j])) ++j;
    const bool cjk_before = !out.empty() && IsCjk(out.back());
    const bool cjk_after = j < line.size() && IsCjk(line[j]);
    if (!out.empty() && j < line.size() && !cjk_before && !cjk_after) {
      out.push_back(U' ');
    }
    i = j;
  }
  return out;
}

double NonCjkRatio(std::u32string_view line) {
  std::size_t total = 0;
  std::size_t foreign = 0;
  for (char32_t c : line) {
    if (utf8::IsSpace(c)) continue;
    ++total;
    if (!IsCjk(c)) ++foreign;
  }
  return total == 0 ? 1.0 : static_cast<double>(foreign) / total;
}

std::uint64_t PairSeed(std::string_view model_id, std::string_view title_ref) {
  std::string key(model_id);
  key.push_back('\x1f');
  key.append(title_ref);
  return Fnv1a64(key);
}

constexpr std::u32string_view kStubPool =
    U"山水风月花云雨雪春秋江河天地日星夜光寒烟霜露柳松竹梅兰菊鸟雁莺燕"
    U"鹤马舟帆桥路亭楼台阁城关门窗灯酒茶琴书剑梦心情思愁恨泪歌声影色香"
    U"草木叶枝林溪泉湖海波浪沙石岩峰岭谷野田园村家客乡故人君谁独孤远近"
    U"高低深浅长短新旧古今东西南北来去归飞落开生老晓晚晨暮朝夕年岁时节"
    U"明暗清红白青黄紫绿金玉银朱碧翠苍茫悠空静闲幽寂满半千万几何无见闻"
    U"望看听知忆怀送别离逢迎问醉眠坐卧行立登临渡过还";

std::string SyntheticPoem(const StubStyle& style,
                          const CompletionRequest& request) {
  Rng rng(MixSeed(style.seed, request.nonce));
  const bool irregular = rng.Uniform01() < style.irregular_ratio;
  const std::size_t yan = rng.Uniform01() < style.yan7_ratio ? 7 : 5;
  const std::size_t lines = rng.Uniform01() < 0.5 ? 4 : 8;
  const bool repeats = rng.Uniform01() < style.repetition_ratio;
  std::u32string pool(kStubPool);
  std::size_t drawn = 0;
  auto draw = [&] {
    if (repeats) return pool[rng.UniformIndex(pool.size())];
    // Partial Fisher-Yates: each character at most once per poem.
    const std::size_t j = drawn + rng.UniformIndex(pool.size() - drawn);
    std::swap(pool[drawn], pool[j]);
    return pool[drawn++];
  };
  std::u32string body;
  for (std::size_t i = 0; i < lines; ++i) {
    const std::size_t len = irregular ? 3 + rng.UniformIndex(7) : yan;
    for (std::size_t k = 0; k < len; ++k) body.push_back(draw());
    body.push_back(i % 2 == 0 ? U'，' : U'。');
    if (i % 2 == 1 && i + 1 < lines) body.push_back(U'\n');
  }
  std::string text = utf8::Encode(body);
  if (rng.Uniform01() < style.chatter_ratio) {
    text = fmt::format("《{}》\n诗：{}\n\n(This poem was written in the classical style.)",
                       request.title, text);
  }
  return text;
}

std::string ReadWholeFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NoOutputError("no replay output at " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string CallWithRetries(const ModelSpec& spec, ModelAdapter& adapter,
                            const CompletionRequest& request) {
  for (int retry = 0;; ++retry) {
    try {
      return adapter.Complete(request);
    } catch (const TransportError&) {
      if (retry >= spec.transport_retries) throw;
      std::this_thread::sleep_for(spec.backoff * (1LL << std::min(retry, 16)));
    }
  }
}

}  // namespace

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  const std::size_t first = text_.find(kTitlePlaceholder);
  if (first == std::string::npos) {
    throw ValidationError("prompt template lacks the {{title}} placeholder");
  }
  if (text_.find(kTitlePlaceholder, first + 1) != std::string::npos) {
    throw ValidationError("prompt template has more than one {{title}}");
  }
  placeholder_ = first;
}

std::string PromptTemplate::Render(std::string_view title) const {
  std::string out = text_.substr(0, placeholder_);
  out.append(title);
  out.append(text_, placeholder_ + kTitlePlaceholder.size());
  return out;
}

std::string_view ToString(AdapterKind kind) {
  switch (kind) {
    case AdapterKind::kReplayFile:
      return "replay";
    case AdapterKind::kHttpChat:
      return "http";
    case AdapterKind::kStub:
      return "stub";
  }
  return "?";
}

AdapterKind ParseAdapterKind(std::string_view text) {
  if (text == "replay" || text == "ReplayFile") return AdapterKind::kReplayFile;
  if (text == "http" || text == "HttpChat") return AdapterKind::kHttpChat;
  if (text == "stub" || text == "Stub") return AdapterKind::kStub;
  throw ValidationError(fmt::format("unknown adapter '{}'", text));
}

std::string_view ToString(FailureKind kind) {
  switch (kind) {
    case FailureKind::kTransport:
      return "transport";
    case FailureKind::kExhausted:
      return "exhausted";
    case FailureKind::kEmptyOutput:
      return "empty-output";
  }
  return "?";
}

void ValidateModelSpec(const ModelSpec& spec) {
  if (spec.model_id.empty()) throw ValidationError("model_id is empty");
  if (spec.model_id.find('/') != std::string::npos) {
    throw ValidationError(
        fmt::format("model_id '{}' must not contain '/'", spec.model_id));
  }
  if (spec.adapter == AdapterKind::kHttpChat && spec.endpoint.empty()) {
    throw ValidationError(
        fmt::format("model '{}': http adapter needs an endpoint", spec.model_id));
  }
  if (spec.adapter == AdapterKind::kReplayFile && spec.replay_dir.empty()) {
    throw ValidationError(fmt::format(
        "model '{}': replay adapter needs a directory", spec.model_id));
  }
  if (!(spec.params.temperature >= 0.0)) {
    throw ValidationError(
        fmt::format("model '{}': temperature must be >= 0", spec.model_id));
  }
  if (spec.params.max_attempts < 1) {
    throw ValidationError(
        fmt::format("model '{}': max_attempts must be >= 1", spec.model_id));
  }
  if (spec.transport_retries < 0 || spec.concurrency < 1) {
    throw ValidationError(fmt::format(
        "model '{}': retries must be >= 0 and concurrency >= 1", spec.model_id));
  }
}

ModelSpec ModelSpecFromJson(const nlohmann::json& json,
                            const std::filesystem::path& base_dir) {
  if (!json.is_object()) throw ValidationError("model spec must be an object");
  try {
    ModelSpec spec;
    spec.model_id = json.at("model_id").get<std::string>();
    spec.adapter = ParseAdapterKind(json.value("adapter", std::string("stub")));
    spec.endpoint = json.value("endpoint", std::string());
    if (json.contains("replay_dir")) {
      std::filesystem::path dir = json.at("replay_dir").get<std::string>();
      spec.replay_dir = dir.is_absolute() ? dir : base_dir / dir;
    }
    spec.params_label = json.value("params_label", std::string("N/A"));
    if (json.contains("params")) {
      const auto& p = json.at("params");
      spec.params.temperature = p.value("temperature", spec.params.temperature);
      spec.params.max_attempts = p.value("max_attempts", spec.params.max_attempts);
      if (p.contains("extra")) spec.params.extra = p.at("extra");
    }
    if (json.contains("stub")) {
      const auto& s = json.at("stub");
      spec.stub.seed = s.value("seed", spec.stub.seed);
      spec.stub.yan7_ratio = s.value("yan7_ratio", spec.stub.yan7_ratio);
      spec.stub.irregular_ratio =
          s.value("irregular_ratio", spec.stub.irregular_ratio);
      spec.stub.chatter_ratio = s.value("chatter_ratio", spec.stub.chatter_ratio);
      spec.stub.repetition_ratio =
          s.value("repetition_ratio", spec.stub.repetition_ratio);
    }
    spec.transport_retries = json.value("transport_retries", spec.transport_retries);
    spec.backoff = std::chrono::milliseconds(
        json.value("backoff_ms", static_cast<long long>(spec.backoff.count())));
    spec.concurrency = json.value("concurrency", spec.concurrency);
    ValidateModelSpec(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad model spec: ") + e.what());
  }
}

nlohmann::json ModelSpecToJson(const ModelSpec& spec) {
  nlohmann::json j = {
      {"model_id", spec.model_id},
      {"adapter", ToString(spec.adapter)},
      {"params_label", spec.params_label},
      {"params",
       {{"temperature", spec.params.temperature},
        {"max_attempts", spec.params.max_attempts},
        {"extra", spec.params.extra}}},
      {"transport_retries", spec.transport_retries},
      {"backoff_ms", spec.backoff.count()},
      {"concurrency", spec.concurrency},
  };
  if (!spec.endpoint.empty()) j["endpoint"] = spec.endpoint;
  if (!spec.replay_dir.empty()) j["replay_dir"] = spec.replay_dir.string();
  if (spec.adapter == AdapterKind::kStub) {
    j["stub"] = {{"seed", spec.stub.seed},
                 {"yan7_ratio", spec.stub.yan7_ratio},
                 {"irregular_ratio", spec.stub.irregular_ratio},
                 {"chatter_ratio", spec.stub.chatter_ratio},
                 {"repetition_ratio", spec.stub.repetition_ratio}};
  }
  return j;
}

GenerationError::GenerationError(GenerationFailure failure)
    : StageError(fmt::format("{} on '{}' ({}): {}", failure.model_id,
                             failure.title, ToString(failure.kind),
                             failure.message)),
      failure_(std::move(failure)) {}

std::string Postprocess(std::string_view raw, std::string_view title,
                        const PostprocessRules& rules) {
  const std::string text = NormalizeText(raw);
  const std::u32string bracketed = utf8::Decode(fmt::format("《{}》", title));
  const std::u32string bare = TrimU32(utf8::Decode(title));
  std::vector<std::u32string> prefixes;
  for (const auto& p : rules.label_prefixes) prefixes.push_back(utf8::Decode(p));

  std::vector<std::string> kept;
  std::istringstream in(text);
  std::string raw_line;
  while (std::getline(in, raw_line)) {
    std::u32string line = TrimU32(utf8::Decode(raw_line));
    if (line.compare(0, 3, U"```") == 0) continue;
    line = StripMarkdown(std::move(line));
    if (line.empty()) continue;
    if (line.find(bracketed) != std::u32string::npos) continue;
    if (!bare.empty() && line == bare) continue;
    for (const auto& p : prefixes) {
      if (line.compare(0, p.size(), p) == 0) {
        line = TrimU32(std::u32string_view(line).substr(p.size()));
        break;
      }
    }
    line = NormalizeSpaces(line);
    if (line.empty()) continue;
    if (NonCjkRatio(line) > rules.max_non_cjk_ratio) continue;
    kept.push_back(utf8::Encode(line));
  }
  if (kept.empty()) {
    GenerationFailure f;
    f.title = std::string(title);
    f.kind = FailureKind::kEmptyOutput;
    f.message = "no poem text left after post-processing";
    throw GenerationError(std::move(f));
  }
  std::string out;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += kept[i];
  }
  return out;
}

std::shared_ptr<StubAdapter> StubAdapter::Sequence(
    std::vector<std::string> outputs) {
  if (outputs.empty()) throw ValidationError("stub sequence is empty");
  return std::make_shared<StubAdapter>(
      [outputs = std::move(outputs)](const CompletionRequest& r) {
        return outputs[std::min(r.attempt, outputs.size() - 1)];
      });
}

std::shared_ptr<StubAdapter> StubAdapter::Synthetic(StubStyle style) {
  return std::make_shared<StubAdapter>(
      [style](const CompletionRequest& r) { return SyntheticPoem(style, r); });
}

std::string ReplayAdapter::TitleHash(std::string_view title) {
  return fmt::format("{:016x}", Fnv1a64(title));
}

std::filesystem::path ReplayAdapter::PathFor(std::string_view model_id,
                                             std::string_view title,
                                             std::size_t attempt) const {
  std::string name = TitleHash(title) + ".txt";
  if (attempt > 0) name += "." + std::to_string(attempt);
  return dir_ / std::string(model_id) / name;
}

std::string ReplayAdapter::Complete(const CompletionRequest& request) {
  return ReadWholeFile(PathFor(request.model_id, request.title, request.attempt));
}

HttpChatAdapter::HttpChatAdapter(std::string endpoint,
                                 std::chrono::seconds timeout)
    : timeout_(timeout) {
  const std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    throw ValidationError("endpoint must be an http(s) URL: " + endpoint);
  }
  const std::size_t slash = endpoint.find('/', scheme + 3);
  scheme_host_port_ = endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/v1/chat/completions"
                                     : endpoint.substr(slash);
}

std::string HttpChatAdapter::KeyVariable(std::string_view model_id) {
  std::string name = "PROFTAP_KEY_";
  for (char c : model_id) {
    const auto u = static_cast<unsigned char>(c);
    name.push_back(std::isalnum(u) ? static_cast<char>(std::toupper(u)) : '_');
  }
  return name;
}

nlohmann::json HttpChatAdapter::RequestBody(const CompletionRequest& request) {
  nlohmann::json body = request.extra.is_object() ? request.extra
                                                  : nlohmann::json::object();
  body["model"] = request.model_id;
  body["messages"] = nlohmann::json::array(
      {{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = request.temperature;
  return body;
}

std::string HttpChatAdapter::Complete(const CompletionRequest& request) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  httplib::Headers headers;
  if (const char* key = std::getenv(KeyVariable(request.model_id).c_str())) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = client.Post(path_, headers, RequestBody(request).dump(),
                         "application/json");
  if (!res) {
    throw TransportError(fmt::format("{}: {}", scheme_host_port_,
                                     httplib::to_string(res.error())));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError(fmt::format("{} returned HTTP {}", scheme_host_port_,
                                     res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw StageError(fmt::format("{} returned HTTP {}: {}", scheme_host_port_,
                                 res->status, res->body.substr(0, 200)));
  }
  try {
    const auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw StageError(std::string("malformed chat completion: ") + e.what());
  }
}

std::shared_ptr<ModelAdapter> MakeAdapter(const ModelSpec& spec) {
  switch (spec.adapter) {
    case AdapterKind::kReplayFile:
      return std::make_shared<ReplayAdapter>(spec.replay_dir);
    case AdapterKind::kHttpChat:
      return std::make_shared<HttpChatAdapter>(spec.endpoint);
    case AdapterKind::kStub:
      return StubAdapter::Synthetic(spec.stub);
  }
  throw ValidationError("unknown adapter");
}

std::string GeneratedPoemId(std::string_view model_id,
                            std::string_view title_ref) {
  return fmt::format("{}/{}", model_id, title_ref);
}

GenerationOutcome GeneratePoem(const ModelSpec& spec, ModelAdapter& adapter,
                               const PromptTemplate& prompt,
                               const TitleRef& title, const LineIndex& index,
                               MatchMode mode, const PostprocessRules& rules) {
  GenerationFailure failure;
  failure.model_id = spec.model_id;
  failure.title_ref = title.poem_id;
  failure.title = title.title;

  const std::uint64_t pair_seed = PairSeed(spec.model_id, title.poem_id);
  std::size_t empty_count = 0;
  std::string last_reason;
  const auto attempts = static_cast<std::size_t>(spec.params.max_attempts);
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    CompletionRequest request;
    request.model_id = spec.model_id;
    request.prompt = prompt.Render(title.title);
    request.title = title.title;
    request.temperature = spec.params.temperature;
    request.attempt = attempt;
    request.nonce = MixSeed(pair_seed, attempt);
    request.extra = spec.params.extra;

    std::string raw;
    try {
      raw = CallWithRetries(spec, adapter, request);
    } catch (const NoOutputError& e) {
      failure.kind = attempt > 0 && empty_count < attempt
                         ? FailureKind::kExhausted
                         : FailureKind::kEmptyOutput;
      failure.attempts = attempt;
      failure.message = attempt > 0
                            ? fmt::format("{}; last candidate: {}", e.what(),
                                          last_reason)
                            : e.what();
      throw GenerationError(std::move(failure));
    } catch (const StageError& e) {
      failure.kind = FailureKind::kTransport;
      failure.attempts = attempt + 1;
      failure.message = e.what();
      throw GenerationError(std::move(failure));
    }

    Poem poem;
    poem.id = GeneratedPoemId(spec.model_id, title.poem_id);
    poem.title = title.title;
    poem.source = Source::Model(spec.model_id);
    poem.title_ref = title.poem_id;
    std::optional<MatchEvidence> evidence;
    try {
      poem.body = Postprocess(raw, title.title, rules);
      evidence = FindDuplication(poem, index, mode);
    } catch (const Error&) {
      ++empty_count;
      last_reason = "empty after post-processing";
      continue;
    }
    if (evidence) {
      last_reason = fmt::format(
          "lines {}-{} duplicate '{}' from line {}",
          evidence->query_line_start + 1,
          evidence->query_line_start + evidence->length, evidence->db_poem_id,
          evidence->db_line_start + 1);
      continue;
    }
    return {std::move(poem), attempt + 1};
  }
  failure.kind = empty_count == attempts ? FailureKind::kEmptyOutput
                                         : FailureKind::kExhausted;
  failure.attempts = attempts;
  failure.message = fmt::format("{} attempts rejected; last: {}", attempts,
                                last_reason);
  throw GenerationError(std::move(failure));
}

std::vector<Poem> GenerationRun::Poems() const {
  std::vector<Poem> out;
  for (const auto& r : results) {
    if (r.outcome) out.push_back(r.outcome->poem);
  }
  return out;
}

std::vector<GenerationFailure> GenerationRun::Failures() const {
  std::vector<GenerationFailure> out;
  for (const auto& r : results) {
    if (r.failure) out.push_back(*r.failure);
  }
  return out;
}

GenerationRun RunGeneration(std::span<const Contestant> contestants,
                            std::span<const TitleRef> titles,
                            const PromptTemplate& prompt,
                            const LineIndex& index,
                            const RunGenerationOptions& options) {
  if (titles.empty()) throw ValidationError("no titles to generate for");
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t m = 0; m < contestants.size(); ++m) {
    ValidateModelSpec(contestants[m].spec);
    if (!contestants[m].adapter) {
      throw ValidationError(
          fmt::format("model '{}' has no adapter", contestants[m].spec.model_id));
    }
    if (!seen.emplace(contestants[m].spec.model_id, m).second) {
      throw ValidationError(fmt::format("duplicate model_id '{}'",
                                        contestants[m].spec.model_id));
    }
  }

  const std::size_t t_count = titles.size();
  GenerationRun run;
  run.results.resize(contestants.size() * t_count);
  std::vector<char> done(run.results.size(), 0);
  for (const auto& r : options.completed) {
    if (r.model_index >= contestants.size() || r.title_index >= t_count) {
      throw ValidationError("completed pair out of range");
    }
    const std::size_t slot = r.model_index * t_count + r.title_index;
    run.results[slot] = r;
    done[slot] = 1;
  }

  std::mutex mu;
  std::exception_ptr callback_error;
  std::vector<std::thread> workers;
  std::vector<std::vector<std::size_t>> pending(contestants.size());
  std::vector<std::unique_ptr<std::atomic<std::size_t>>> cursors;
  for (std::size_t m = 0; m < contestants.size(); ++m) {
    for (std::size_t t = 0; t < t_count; ++t) {
      if (!done[m * t_count + t]) pending[m].push_back(t);
    }
    cursors.push_back(std::make_unique<std::atomic<std::size_t>>(0));
  }

  auto work = [&](std::size_t m) {
    const Contestant& c = contestants[m];
    for (;;) {
      const std::size_t k = cursors[m]->fetch_add(1);
      if (k >= pending[m].size()) return;
      PairResult result;
      result.model_index = m;
      result.title_index = pending[m][k];
      const TitleRef& title = titles[result.title_index];
      try {
        result.outcome = GeneratePoem(c.spec, *c.adapter, prompt, title, index,
                                      options.mode, options.rules);
      } catch (const GenerationError& e) {
        result.failure = e.failure();
      } catch (const std::exception& e) {
        GenerationFailure f;
        f.model_id = c.spec.model_id;
        f.title_ref = title.poem_id;
        f.title = title.title;
        f.kind = FailureKind::kTransport;
        f.message = e.what();
        result.failure = std::move(f);
      }
      std::lock_guard lock(mu);
      run.results[m * t_count + result.title_index] = result;
      if (options.on_complete && !callback_error) {
        try {
          options.on_complete(result);
        } catch (...) {
          callback_error = std::current_exception();
        }
      }
    }
  };

  for (std::size_t m = 0; m < contestants.size(); ++m) {
    const std::size_t n =
        std::min(contestants[m].spec.concurrency, pending[m].size());
    for (std::size_t w = 0; w < n; ++w) workers.emplace_back(work, m);
  }
  for (auto& w : workers) w.join();
  if (callback_error) std::rethrow_exception(callback_error);
  return run;
}

}  // namespace proftap
