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

#ifndef PROFTAP_GENERATION_H_
#define PROFTAP_GENERATION_H_

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "proftap/antiplag.h"
#include "proftap/corpus.h"
#include "proftap/error.h"

namespace proftap {

// The stock prompt: asks for a classical poem on the given title and asks
// the model to pass as a human poet.
inline constexpr std::string_view kDefaultPromptTemplate =
    "想象你是一位著名诗人，请你写一首题为《{{title}}》的古诗。"
    "要让别人以为你的诗是真人所作，不要让人看出是机器生成的。";

inline constexpr std::string_view kTitlePlaceholder = "{{title}}";

class PromptTemplate {
 public:
  // Throws ValidationError unless the placeholder occurs exactly once.
  explicit PromptTemplate(std::string text);
  static PromptTemplate Default() {
    return PromptTemplate(std::string(kDefaultPromptTemplate));
  }

  std::string Render(std::string_view title) const;
  const std::string& text() const { return text_; }

 private:
  std::string text_;
  std::size_t placeholder_ = 0;
};

enum class AdapterKind { kReplayFile, kHttpChat, kStub };

std::string_view ToString(AdapterKind kind);
AdapterKind ParseAdapterKind(std::string_view text);

struct GenerationParams {
  double temperature = 0.9;
  // Generations per (model, title) before giving up.
  int max_attempts = 5;
  // Passed through to the adapter untouched (top_p, max_tokens...).
  nlohmann::json extra = nlohmann::json::object();
};

// Knobs for the built-in synthetic stub model.
struct StubStyle {
  std::uint64_t seed = 0;
  double yan7_ratio = 0.5;
  // Fraction of poems with irregular line lengths.
  double irregular_ratio = 0.1;
  // Fraction of outputs wrapped in a bracketed title and an explanation
  // that post-processing must strip.
  double chatter_ratio = 0.3;
  // Fraction of poems allowed to repeat characters; the rest never do.
  double repetition_ratio = 0.3;
};

struct ModelSpec {
  std::string model_id;
  AdapterKind adapter = AdapterKind::kStub;
  std::string endpoint;              // HttpChat
  std::filesystem::path replay_dir;  // ReplayFile
  // Parameter count shown in reports ("72B"); "N/A" when unknown.
  std::string params_label = "N/A";
  GenerationParams params;
  StubStyle stub;
  // Transport-level retries per attempt, with exponential backoff.
  int transport_retries = 3;
  std::chrono::milliseconds backoff{500};
  // Concurrent requests allowed against this model's adapter.
  std::size_t concurrency = 1;
};

// Throws ValidationError on an empty id, an HttpChat spec without endpoint,
// temperature < 0 or max_attempts < 1.
void ValidateModelSpec(const ModelSpec& spec);
ModelSpec ModelSpecFromJson(const nlohmann::json& json,
                            const std::filesystem::path& base_dir = {});
nlohmann::json ModelSpecToJson(const ModelSpec& spec);

// Versioned rule set for turning raw model output into a poem body.
struct PostprocessRules {
  std::string version = "postprocess-v1";
  std::vector<std::string> label_prefixes = {
      "诗：", "诗:", "内容：", "内容:", "正文：", "正文:", "古诗：", "古诗:",
      "Poem:", "poem:", "POEM:"};
  // Lines whose share of non-CJK characters exceeds this are dropped.
  double max_non_cjk_ratio = 0.3;
};

enum class FailureKind { kTransport, kExhausted, kEmptyOutput };

std::string_view ToString(FailureKind kind);

struct GenerationFailure {
  std::string model_id;
  std::string title_ref;
  std::string title;
  FailureKind kind = FailureKind::kExhausted;
  std::size_t attempts = 0;
  std::string message;
};

class GenerationError : public StageError {
 public:
  explicit GenerationError(GenerationFailure failure);
  const GenerationFailure& failure() const { return failure_; }

 private:
  GenerationFailure failure_;
};

// Strips code fences, markdown emphasis, lines naming the bracketed title,
// label prefixes and mostly non-CJK lines; trims and joins the rest with
// newlines. Throws GenerationError(kEmptyOutput) when nothing remains.
std::string Postprocess(std::string_view raw, std::string_view title,
                        const PostprocessRules& rules = {});

struct CompletionRequest {
  std::string model_id;
  std::string prompt;
  std::string title;
  double temperature = 0.9;
  // 0-based regeneration index.
  std::size_t attempt = 0;
  // Fresh per attempt; deterministic in (model, title, attempt).
  std::uint64_t nonce = 0;
  nlohmann::json extra = nlohmann::json::object();
};

// Retryable failure talking to a model (connection error, 429, 5xx).
class TransportError : public StageError {
 public:
  using StageError::StageError;
};

// The adapter has no output for this attempt (replay files ran out).
class NoOutputError : public StageError {
 public:
  using StageError::StageError;
};

// Implementations must be safe to call from several threads.
class ModelAdapter {
 public:
  virtual ~ModelAdapter() = default;
  virtual std::string Complete(const CompletionRequest& request) = 0;
};

class StubAdapter : public ModelAdapter {
 public:
  using Script = std::function<std::string(const CompletionRequest&)>;

  explicit StubAdapter(Script script) : script_(std::move(script)) {}

  // Returns outputs[attempt], repeating the last one.
  static std::shared_ptr<StubAdapter> Sequence(std::vector<std::string> outputs);
  // Deterministic pseudo-poems shaped by `style`.
  static std::shared_ptr<StubAdapter> Synthetic(StubStyle style);

  std::string Complete(const CompletionRequest& request) override {
    return script_(request);
  }

 private:
  Script script_;
};

// Reads <dir>/<model_id>/<title-hash>.txt for the first attempt and
// <title-hash>.txt.<n> for regeneration n.
class ReplayAdapter : public ModelAdapter {
 public:
  explicit ReplayAdapter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static std::string TitleHash(std::string_view title);
  std::filesystem::path PathFor(std::string_view model_id,
                                std::string_view title,
                                std::size_t attempt) const;
  std::string Complete(const CompletionRequest& request) override;

 private:
  std::filesystem::path dir_;
};

// OpenAI-compatible chat-completion client. The API key comes from
// PROFTAP_KEY_<MODEL_ID> (upper-cased, non-alphanumerics as '_').
class HttpChatAdapter : public ModelAdapter {
 public:
  explicit HttpChatAdapter(std::string endpoint,
                           std::chrono::seconds timeout = std::chrono::seconds(120));

  static std::string KeyVariable(std::string_view model_id);
  static nlohmann::json RequestBody(const CompletionRequest& request);
  std::string Complete(const CompletionRequest& request) override;

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::chrono::seconds timeout_;
};

std::shared_ptr<ModelAdapter> MakeAdapter(const ModelSpec& spec);

struct GenerationOutcome {
  Poem poem;
  std::size_t attempts = 0;
};

// Generates until a body survives post-processing and has no duplication
// evidence, up to spec.params.max_attempts. Throws GenerationError on
// transport failure (after retries) or exhaustion.
GenerationOutcome GeneratePoem(const ModelSpec& spec, ModelAdapter& adapter,
                               const PromptTemplate& prompt,
                               const TitleRef& title, const LineIndex& index,
                               MatchMode mode,
                               const PostprocessRules& rules = {});

// Id of the poem a model writes for a given human title.
std::string GeneratedPoemId(std::string_view model_id,
                            std::string_view title_ref);

struct Contestant {
  ModelSpec spec;
  std::shared_ptr<ModelAdapter> adapter;
};

struct PairResult {
  std::size_t model_index = 0;
  std::size_t title_index = 0;
  std::optional<GenerationOutcome> outcome;
  std::optional<GenerationFailure> failure;
};

struct RunGenerationOptions {
  MatchMode mode = MatchMode::kSamePoemConsecutive;
  PostprocessRules rules;
  // Pairs already finished (e.g. restored from a checkpoint); not re-run.
  std::vector<PairResult> completed;
  // Called once per newly finished pair, serialized.
  std::function<void(const PairResult&)> on_complete;
};

struct GenerationRun {
  // Ordered by model, then title, regardless of completion order.
  std::vector<PairResult> results;

  std::vector<Poem> Poems() const;
  std::vector<GenerationFailure> Failures() const;
};

GenerationRun RunGeneration(std::span<const Contestant> contestants,
                            std::span<const TitleRef> titles,
                            const PromptTemplate& prompt,
                            const LineIndex& index,
                            const RunGenerationOptions& options = {});

}  // namespace proftap

#endif  // PROFTAP_GENERATION_H_
