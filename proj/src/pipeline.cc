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

#include "proftap/pipeline.h"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "proftap/error.h"
#include "proftap/judging_server.h"
#include "proftap/records.h"
#include "proftap/rng.h"

namespace proftap {

namespace fs = std::filesystem;

namespace {

constexpr int kRunFormatVersion = 1;
constexpr std::uint64_t kPoolStream = 2;
constexpr std::uint64_t kPlanStream = 3;

fs::path Resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

void Log(const RunHooks& hooks, const std::string& message) {
  if (hooks.log) *hooks.log << message << '\n' << std::flush;
}

std::string Checksum(const fs::path& path) {
  return fmt::format("{:016x}", Fnv1a64(ReadFile(path)));
}

PromptTemplate LoadTemplate(const fs::path& path) {
  if (path.empty()) return PromptTemplate::Default();
  std::string text = ReadFile(path);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
    text.pop_back();
  }
  return PromptTemplate(std::move(text));
}

Corpus LoadCorpus(const fs::path& path, const std::string& label,
                  const CharMap* map) {
  Corpus corpus = IngestCorpus(path, FormatFromPath(path), map);
  corpus.source_label = label;
  return corpus;
}

nlohmann::json TitleToJson(const TitleRef& t) {
  return {{"title", t.title}, {"poem_id", t.poem_id}};
}

nlohmann::json FailureToJson(const GenerationFailure& f) {
  return {{"model_id", f.model_id}, {"title_ref", f.title_ref},
          {"title", f.title},       {"kind", ToString(f.kind)},
          {"attempts", f.attempts}, {"message", f.message}};
}

nlohmann::json CheckpointEntry(const RunConfig& config, const PairResult& r,
                               std::span<const TitleRef> titles) {
  nlohmann::json j = {{"model_id", config.models[r.model_index].model_id},
                      {"title_ref", titles[r.title_index].poem_id}};
  if (r.outcome) {
    j["attempts"] = r.outcome->attempts;
    j["poem"] = PoemToJson(r.outcome->poem);
  } else if (r.failure) {
    j["failure"] = FailureToJson(*r.failure);
  }
  return j;
}

// Reads the successful pairs of a checkpoint and rewrites the file without
// a torn trailing line so later appends start on a clean line.
std::vector<PairResult> RestoreCheckpoint(const fs::path& path,
                                          const RunConfig& config,
                                          std::span<const TitleRef> titles) {
  std::vector<PairResult> out;
  if (!fs::exists(path)) return out;
  std::map<std::string, std::size_t> model_index;
  for (std::size_t m = 0; m < config.models.size(); ++m) {
    model_index[config.models[m].model_id] = m;
  }
  std::map<std::string, std::size_t> title_index;
  for (std::size_t t = 0; t < titles.size(); ++t) {
    title_index[titles[t].poem_id] = t;
  }

  std::istringstream in(ReadFile(path));
  std::string line;
  std::string kept;
  std::size_t lineno = 0;
  std::map<std::pair<std::size_t, std::size_t>, PairResult> latest;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      if (in.peek() == EOF) break;  // torn final write
      throw StageError(fmt::format("{}: line {} is corrupt", path.string(),
                                   lineno));
    }
    kept += line + "\n";
    const auto m = model_index.find(j.value("model_id", ""));
    const auto t = title_index.find(j.value("title_ref", ""));
    if (m == model_index.end() || t == title_index.end()) continue;
    PairResult r;
    r.model_index = m->second;
    r.title_index = t->second;
    if (j.contains("poem")) {
      r.outcome = GenerationOutcome{PoemFromJson(j.at("poem")),
                                    j.value("attempts", std::size_t{1})};
    }
    latest[{r.model_index, r.title_index}] = std::move(r);
  }
  WriteFileAtomic(path, kept);
  for (auto& [key, r] : latest) {
    if (r.outcome) out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json JudgesToJson(std::span<const Judge> judges,
                            const std::string& admin_token) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& j : judges) {
    list.push_back({{"judge_id", j.judge_id},
                    {"access_token", j.access_token},
                    {"display_name", j.display_name}});
  }
  return {{"admin_token", admin_token}, {"judges", list}};
}

std::pair<std::vector<Judge>, std::string> JudgesFromJson(
    const nlohmann::json& j) {
  try {
    std::vector<Judge> judges;
    for (const auto& e : j.at("judges")) {
      judges.push_back({e.at("judge_id").get<std::string>(),
                        e.at("access_token").get<std::string>(),
                        e.value("display_name", std::string())});
    }
    return {judges, j.value("admin_token", std::string())};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad judges file: ") + e.what());
  }
}

// Keeps existing tokens for judges already issued one.
std::pair<std::vector<Judge>, std::string> IssueJudges(
    const fs::path& path, std::span<const std::string> ids) {
  std::map<std::string, Judge> existing;
  std::string admin;
  if (fs::exists(path)) {
    auto [judges, token] = JudgesFromJson(ReadJsonFile(path));
    for (auto& j : judges) existing.emplace(j.judge_id, j);
    admin = token;
  }
  if (admin.empty()) admin = RandomToken();
  std::vector<Judge> out;
  for (const auto& id : ids) {
    const auto it = existing.find(id);
    out.push_back(it != existing.end() ? it->second
                                       : Judge{id, RandomToken(), id});
  }
  return {out, admin};
}

}  // namespace

std::vector<std::string> DefaultJudgeIds(std::size_t count) {
  std::vector<std::string> ids;
  for (std::size_t i = 1; i <= count; ++i) {
    ids.push_back(fmt::format("judge{:02}", i));
  }
  return ids;
}

RunConfig RunConfigFromJson(const nlohmann::json& json, const fs::path& base_dir) {
  if (!json.is_object()) throw ValidationError("run config must be an object");
  try {
    RunConfig c;
    c.corpus_path = Resolve(base_dir, json.at("corpus_path").get<std::string>());
    c.database_path = Resolve(base_dir, json.value("database_path", std::string()));
    c.char_map_path = Resolve(base_dir, json.value("char_map_path", std::string()));
    c.titles_count = json.value("titles_count", c.titles_count);
    c.k_min = json.value("k_min", c.k_min);
    c.seed = json.value("seed", c.seed);
    for (const auto& m : json.at("models")) {
      c.models.push_back(ModelSpecFromJson(m, base_dir));
    }
    c.template_path = Resolve(base_dir, json.value("template_path", std::string()));
    c.plag_mode = ParseMatchMode(json.value("plag_mode", std::string("same-poem")));
    c.filter_scope =
        ParseFilterScope(json.value("filter_scope", std::string("ai-only")));
    c.alternative =
        ParseAlternative(json.value("alternative", std::string("two-sided")));
    const nlohmann::json judges = json.value("judges", nlohmann::json(13));
    if (judges.is_number_unsigned()) {
      c.judges = DefaultJudgeIds(judges.get<std::size_t>());
    } else {
      c.judges = judges.get<std::vector<std::string>>();
    }
    c.output_dir = Resolve(base_dir, json.at("output_dir").get<std::string>());
    ValidateRunConfig(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad run config: ") + e.what());
  }
}

nlohmann::json RunConfigToJson(const RunConfig& c) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : c.models) models.push_back(ModelSpecToJson(m));
  return {
      {"corpus_path", c.corpus_path.string()},
      {"database_path", c.database_path.string()},
      {"char_map_path", c.char_map_path.string()},
      {"titles_count", c.titles_count},
      {"k_min", c.k_min},
      {"seed", c.seed},
      {"models", models},
      {"template_path", c.template_path.string()},
      {"plag_mode", ToString(c.plag_mode)},
      {"filter_scope", ToString(c.filter_scope)},
      {"alternative", ToString(c.alternative)},
      {"judges", c.judges},
      {"output_dir", c.output_dir.string()},
  };
}

RunConfig LoadRunConfig(const fs::path& path) {
  return RunConfigFromJson(ReadJsonFile(path), path.parent_path());
}

void ValidateRunConfig(const RunConfig& c) {
  if (c.corpus_path.empty()) throw ValidationError("corpus_path is required");
  if (c.output_dir.empty()) throw ValidationError("output_dir is required");
  if (c.titles_count < 1) throw ValidationError("titles_count must be >= 1");
  if (c.k_min < 1) throw ValidationError("k_min must be >= 1");
  if (c.models.empty()) throw ValidationError("at least one model is required");
  std::set<std::string> ids;
  for (const auto& m : c.models) {
    ValidateModelSpec(m);
    if (!ids.insert(m.model_id).second) {
      throw ValidationError(fmt::format("duplicate model_id '{}'", m.model_id));
    }
  }
  if (c.judges.size() < c.k_min) {
    throw ValidationError(fmt::format("{} judges cannot give K = {} coverage",
                                      c.judges.size(), c.k_min));
  }
  if (std::set(c.judges.begin(), c.judges.end()).size() != c.judges.size()) {
    throw ValidationError("judge ids repeat");
  }
}

RunSummary CmdRun(const RunConfig& config, const RunHooks& hooks) {
  ValidateRunConfig(config);
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  const nlohmann::json config_json = RunConfigToJson(config);
  const fs::path config_file = dir / run_files::kConfig;
  if (fs::exists(config_file) && ReadJsonFile(config_file) != config_json) {
    throw ValidationError(fmt::format(
        "{} holds a run with a different config; use a fresh output_dir",
        dir.string()));
  }
  WriteFileAtomic(config_file, config_json.dump(2) + "\n");
  RunSummary summary;

  // Titles and their human poems.
  std::optional<CharMap> map;
  if (!config.char_map_path.empty()) map = CharMap::FromTsv(config.char_map_path);
  const CharMap* map_ptr = map ? &*map : nullptr;
  const Corpus corpus = LoadCorpus(config.corpus_path, "human", map_ptr);
  const std::vector<TitleRef> titles =
      SampleTitles(corpus, config.titles_count, config.seed);
  {
    std::string out;
    for (const auto& t : titles) out += TitleToJson(t).dump() + "\n";
    WriteFileAtomic(dir / run_files::kTitles, out);
  }
  std::map<std::string, const Poem*> by_id;
  for (const auto& p : corpus.poems) by_id[p.id] = &p;
  std::vector<Poem> human;
  for (const auto& t : titles) {
    Poem p = *by_id.at(t.poem_id);
    p.source = Source::Human();
    p.title_ref = p.id;
    human.push_back(std::move(p));
  }
  WritePoemsJsonl(dir / run_files::kHuman, human);
  summary.titles = titles.size();
  Log(hooks, fmt::format("sampled {} titles from {} poems", titles.size(),
                         corpus.size()));

  // Anti-plagiarism index over the database plus the corpus itself, so a
  // recitation of the sampled human poem is always caught.
  Corpus database;
  if (!config.database_path.empty()) {
    database = LoadCorpus(config.database_path, "database", map_ptr);
  }
  {
    std::set<std::string> seen;
    for (const auto& p : database.poems) seen.insert(p.id);
    for (const auto& p : corpus.poems) {
      if (seen.insert(p.id).second) database.poems.push_back(p);
    }
  }
  const LineIndex index = LineIndex::Build(database);
  Log(hooks, fmt::format("indexed {} lines from {} poems", index.size(),
                         index.poem_count()));

  // Generation, checkpointed per pair.
  const PromptTemplate prompt = LoadTemplate(config.template_path);
  const fs::path checkpoint = dir / run_files::kCheckpoint;
  RunGenerationOptions options;
  options.mode = config.plag_mode;
  options.completed = RestoreCheckpoint(checkpoint, config, titles);
  summary.resumed = options.completed.size();
  if (summary.resumed > 0) {
    Log(hooks, fmt::format("resuming: {} pairs already generated",
                           summary.resumed));
  }
  std::ofstream log_out(checkpoint, std::ios::binary | std::ios::app);
  if (!log_out) throw StageError("cannot open " + checkpoint.string());
  options.on_complete = [&](const PairResult& r) {
    log_out << CheckpointEntry(config, r, titles).dump() << '\n' << std::flush;
    if (!log_out) throw StageError("cannot append to " + checkpoint.string());
    if (hooks.after_pair) hooks.after_pair(r);
  };
  std::vector<Contestant> contestants;
  for (const auto& spec : config.models) {
    contestants.push_back({spec, hooks.make_adapter(spec)});
  }
  const GenerationRun run =
      RunGeneration(contestants, titles, prompt, index, options);
  log_out.close();

  const std::vector<Poem> generated = run.Poems();
  summary.generated = generated.size();
  summary.failures = run.Failures();
  WritePoemsJsonl(dir / run_files::kGenerated, generated);
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : summary.failures) failures.push_back(FailureToJson(f));
  WriteFileAtomic(dir / run_files::kFailures, failures.dump(2) + "\n");
  Log(hooks, fmt::format("generated {} poems, {} failed pairs",
                         generated.size(), summary.failures.size()));
  for (const auto& f : summary.failures) {
    Log(hooks, fmt::format("  failed: {} / {} ({}): {}", f.model_id,
                           f.title_ref, ToString(f.kind), f.message));
  }

  nlohmann::json manifest = {
      {"format_version", kRunFormatVersion},
      {"seed", config.seed},
      {"postprocess_rules", PostprocessRules().version},
      {"plag_mode", ToString(config.plag_mode)},
      {"prompt_template", prompt.text()},
      {"counts",
       {{"titles", titles.size()},
        {"generated", generated.size()},
        {"failures", summary.failures.size()}}},
  };
  auto record_stage = [&](const char* stage, const char* file) {
    manifest["stages"][stage] = {{"file", file},
                                 {"fnv1a64", Checksum(dir / file)}};
  };
  record_stage("titles", run_files::kTitles);
  record_stage("human", run_files::kHuman);
  record_stage("generation", run_files::kGenerated);
  record_stage("failures", run_files::kFailures);

  if (hooks.stop_after == RunStage::kPlan) {
    // Mixed, shuffled pool and the judge assignment.
    std::vector<Poem> pool = human;
    pool.insert(pool.end(), generated.begin(), generated.end());
    Rng rng(MixSeed(config.seed, kPoolStream));
    rng.Shuffle(pool);
    WritePoemsJsonl(dir / run_files::kPool, pool);
    summary.pool = pool.size();

    std::vector<std::string> ids;
    for (const auto& p : pool) ids.push_back(p.id);
    const AssignmentPlan plan = PlanAssignments(
        ids, config.judges, config.k_min, MixSeed(config.seed, kPlanStream));
    WriteFileAtomic(dir / run_files::kPlan, PlanToJson(plan).dump(2) + "\n");
    const auto [judges, admin] =
        IssueJudges(dir / run_files::kJudges, config.judges);
    WriteFileAtomic(dir / run_files::kJudges,
                    JudgesToJson(judges, admin).dump(2) + "\n");
    fs::permissions(dir / run_files::kJudges,
                    fs::perms::owner_read | fs::perms::owner_write,
                    fs::perm_options::replace);
    summary.judges = judges.size();
    record_stage("pool", run_files::kPool);
    record_stage("plan", run_files::kPlan);
    manifest["counts"]["pool"] = pool.size();
    manifest["counts"]["judges"] = judges.size();
    Log(hooks, fmt::format("pool of {} poems planned over {} judges (K = {})",
                           pool.size(), judges.size(), config.k_min));
  }
  WriteFileAtomic(dir / run_files::kManifest, manifest.dump(2) + "\n");
  return summary;
}

RunArtifacts LoadRun(const fs::path& run_dir) {
  RunArtifacts run;
  const fs::path config_file = run_dir / run_files::kConfig;
  if (!fs::exists(config_file)) {
    throw ValidationError(run_dir.string() + " is not a run directory");
  }
  run.config = RunConfigFromJson(ReadJsonFile(config_file), run_dir);
  run.pool = ReadPoemsJsonl(run_dir / run_files::kPool);
  run.plan = PlanFromJson(ReadJsonFile(run_dir / run_files::kPlan));
  std::tie(run.judges, run.admin_token) =
      JudgesFromJson(ReadJsonFile(run_dir / run_files::kJudges));
  return run;
}

std::shared_ptr<RatingStore> OpenRunStore(const fs::path& run_dir) {
  return std::make_shared<RatingStore>(run_dir / run_files::kRatingsLog,
                                       run_dir / run_files::kRatingsSnapshot);
}

AnalyzeResult CmdAnalyze(const fs::path& run_dir, const AnalyzeOptions& options) {
  const RunArtifacts run = LoadRun(run_dir);
  std::vector<RatingRecord> ratings;
  if (options.ratings_csv) {
    ratings = ReadRatingsCsv(*options.ratings_csv);
  } else {
    ratings = OpenRunStore(run_dir)->Ratings();
  }
  if (ratings.empty()) {
    throw ValidationError("no ratings to analyze");
  }

  AnalyzeResult result;
  std::set<std::string> pool_ids;
  for (const auto& p : run.pool) pool_ids.insert(p.id);
  std::set<std::string> unknown;
  for (const auto& r : ratings) {
    if (!pool_ids.count(r.poem_id)) unknown.insert(r.poem_id);
  }
  for (const auto& id : unknown) {
    result.warnings.push_back(
        fmt::format("ratings for '{}' ignored: not in the pool", id));
  }
  const Aggregation agg = AggregateScores(ratings, run.config.k_min);
  const ScoredPool scored = ScorePool(run.pool, agg);
  for (const auto& id : agg.below_k) {
    if (!pool_ids.count(id)) continue;
    result.warnings.push_back(fmt::format(
        "poem '{}' has {} rating(s), fewer than K = {}", id,
        agg.scores.at(id).n_ratings, run.config.k_min));
  }
  for (const auto& id : scored.unrated) {
    result.warnings.push_back(
        fmt::format("poem '{}' has no ratings; excluded from analysis", id));
  }

  ReportOptions report_options;
  report_options.filter_scope =
      options.filter_scope.value_or(run.config.filter_scope);
  report_options.wilcoxon.alternative =
      options.alternative.value_or(run.config.alternative);
  std::map<std::string, std::string> labels;
  for (const auto& m : run.config.models) labels[m.model_id] = m.params_label;
  result.report = BuildAnalysis(scored.scored, labels, report_options);
  result.report.unrated = scored.unrated;
  result.out_dir =
      options.out_dir.empty() ? run_dir / run_files::kReportDir : options.out_dir;
  WriteReports(result.report, result.out_dir);
  return result;
}

std::vector<RatingRecord> SimulateRunRatings(const RunArtifacts& run,
                                             const JudgeModel& base,
                                             std::uint64_t seed) {
  std::unordered_map<std::string, Authorship> truth;
  for (const auto& p : run.pool) {
    truth[p.id] = p.source.is_human() ? Authorship::kHuman : Authorship::kModel;
  }
  std::vector<std::string> ids;
  for (const auto& j : run.judges) ids.push_back(j.judge_id);
  return SimulateRatings(run.plan, truth, UniformPanel(ids, base, seed));
}

}  // namespace proftap
