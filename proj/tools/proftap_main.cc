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

// proftap: command-line entry point for the evaluation pipeline.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 stage failure.

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "proftap/antiplag.h"
#include "proftap/corpus.h"
#include "proftap/error.h"
#include "proftap/judging.h"
#include "proftap/judging_server.h"
#include "proftap/pipeline.h"
#include "proftap/records.h"
#include "proftap/simjudge.h"

namespace fs = std::filesystem;

namespace proftap {
namespace {

void WriteOut(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    WriteFileAtomic(path, text);
  }
}

int Ingest(const std::string& input, const std::string& format,
           const std::string& label, const std::string& char_map,
           const std::string& out) {
  std::optional<CharMap> map;
  if (!char_map.empty()) map = CharMap::FromTsv(char_map);
  Corpus corpus = IngestCorpus(
      input, format.empty() ? FormatFromPath(input) : ParseCorpusFormat(format),
      map ? &*map : nullptr);
  if (!label.empty()) corpus.source_label = label;
  WritePoemsJsonl(out, corpus.poems);
  std::cerr << fmt::format("ingested {} poems into {}\n", corpus.size(), out);
  return 0;
}

int Sample(const std::string& corpus_path, std::size_t count,
           std::uint64_t seed, const std::string& out) {
  const Corpus corpus = IngestCorpus(corpus_path, FormatFromPath(corpus_path));
  std::string text;
  for (const auto& t : SampleTitles(corpus, count, seed)) {
    text += nlohmann::json{{"title", t.title}, {"poem_id", t.poem_id}}.dump() +
            "\n";
  }
  WriteOut(out, text);
  return 0;
}

int Run(const std::string& config_path, RunStage stop_after) {
  const RunConfig config = LoadRunConfig(config_path);
  RunHooks hooks;
  hooks.log = &std::cerr;
  hooks.stop_after = stop_after;
  const RunSummary s = CmdRun(config, hooks);
  if (!s.failures.empty()) {
    std::cerr << fmt::format(
        "warning: {} (model, title) pairs failed; see {}\n", s.failures.size(),
        (config.output_dir / run_files::kFailures).string());
  }
  if (stop_after == RunStage::kPlan) {
    std::cout << fmt::format(
        "run directory ready: {}\n"
        "start judging with: proftap serve --run {} --port 8080\n"
        "judge access tokens are in {}\n",
        config.output_dir.string(), config.output_dir.string(),
        (config.output_dir / run_files::kJudges).string());
  }
  return 0;
}

int CheckPlagiarism(const std::string& database, const std::string& input,
                    const std::string& mode_name) {
  const MatchMode mode = ParseMatchMode(mode_name);
  const LineIndex index =
      LineIndex::Build(IngestCorpus(database, FormatFromPath(database)));
  const Corpus poems = IngestCorpus(input, FormatFromPath(input));
  std::size_t flagged = 0;
  for (const auto& poem : poems.poems) {
    const auto ev = FindDuplication(poem, index, mode, poem.id);
    if (!ev) continue;
    ++flagged;
    std::cout << nlohmann::json{{"poem_id", poem.id},
                                {"query_line_start", ev->query_line_start},
                                {"db_poem_id", ev->db_poem_id},
                                {"db_line_start", ev->db_line_start},
                                {"length", ev->length},
                                {"mode", ToString(ev->mode)}}
                     .dump()
              << "\n";
  }
  std::cerr << fmt::format("{} of {} poems duplicate the database ({})\n",
                           flagged, poems.size(), ToString(mode));
  return 0;
}

int Plan(const std::string& pool_path, std::size_t judges,
         std::vector<std::string> judge_ids, std::size_t k,
         std::uint64_t seed, const std::string& out) {
  if (judge_ids.empty()) judge_ids = DefaultJudgeIds(judges);
  std::vector<std::string> ids;
  for (const auto& p : ReadPoemsJsonl(pool_path)) ids.push_back(p.id);
  const AssignmentPlan plan = PlanAssignments(ids, judge_ids, k, seed);
  WriteOut(out, PlanToJson(plan).dump(2) + "\n");
  return 0;
}

int Serve(const std::string& run_dir, const std::string& host, int port,
          const std::string& static_dir) {
  // Handle SIGINT/SIGTERM synchronously on this thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  RunArtifacts run = LoadRun(run_dir);
  JudgingService service(std::move(run.pool), std::move(run.plan),
                         std::move(run.judges), OpenRunStore(run_dir));
  ServerOptions options;
  options.host = host;
  options.port = port;
  options.admin_token = run.admin_token;
  options.static_dir = static_dir;
  JudgingServer server(service, options);
  bool ok = true;
  std::thread listener([&] { ok = server.Listen(); });
  server.WaitUntilReady();
  std::cerr << fmt::format(
      "serving {} judges on http://{}:{}/ (admin token in {})\n",
      service.judges().size(), host, port,
      (fs::path(run_dir) / run_files::kJudges).string());
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.Stop();
  });
  listener.join();
  if (!ok) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    throw StageError(fmt::format("cannot listen on {}:{}", host, port));
  }
  waiter.join();
  std::cerr << fmt::format("stopped; {} ratings stored\n",
                           service.Ratings().size());
  return 0;
}

int Analyze(const std::string& run_dir, const std::string& ratings,
            const std::string& out, const std::string& scope,
            const std::string& alternative) {
  AnalyzeOptions options;
  if (!ratings.empty()) options.ratings_csv = ratings;
  options.out_dir = out;
  if (!scope.empty()) options.filter_scope = ParseFilterScope(scope);
  if (!alternative.empty()) options.alternative = ParseAlternative(alternative);
  const AnalyzeResult result = CmdAnalyze(run_dir, options);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << RenderTable1(result.report);
  std::cerr << fmt::format("reports written to {}\n", result.out_dir.string());
  return 0;
}

int SimulatePower(const std::string& config_path, const std::string& out) {
  const PowerConfig config = PowerConfigFromJson(ReadJsonFile(config_path));
  WriteOut(out, PowerTableToCsv(PowerAnalysis(config)));
  return 0;
}

int SimulateRun(const std::string& run_dir, const std::string& kind,
                double d, double sigma, std::uint64_t seed, std::string out) {
  const RunArtifacts run = LoadRun(run_dir);
  JudgeModel model;
  model.kind = ParseJudgeKind(kind);
  model.d = d;
  model.sigma = sigma;
  ValidateJudgeModel(model);
  const auto ratings = SimulateRunRatings(run, model, seed);
  if (out.empty()) out = (fs::path(run_dir) / "ratings.simulated.csv").string();
  WriteOut(out, RatingsToCsv(ratings));
  std::cerr << fmt::format("{} simulated ratings written to {}\n",
                           ratings.size(), out);
  return 0;
}

int Export(const std::string& run_dir, const std::string& out) {
  LoadRun(run_dir);
  WriteOut(out, RatingsToCsv(OpenRunStore(run_dir)->Ratings()));
  return 0;
}

int Main(int argc, char** argv) {
  CLI::App app{"proftap: blind human-vs-machine judging of classical Chinese poetry"};
  app.require_subcommand(1);
  std::function<int()> action;

  auto* ingest = app.add_subcommand("ingest", "normalize a corpus into JSONL");
  std::string in_path, in_format, in_label, in_map, in_out;
  ingest->add_option("--input", in_path, "JSONL or CSV corpus")->required();
  ingest->add_option("--format", in_format, "jsonl|csv (default: by extension)");
  ingest->add_option("--label", in_label, "source label");
  ingest->add_option("--char-map", in_map, "TSV variant-character map");
  ingest->add_option("--out", in_out, "output JSONL")->required();
  ingest->callback([&] {
    action = [&] { return Ingest(in_path, in_format, in_label, in_map, in_out); };
  });

  auto* sample = app.add_subcommand("sample", "sample titles from a corpus");
  std::string s_corpus, s_out;
  std::size_t s_count = 110;
  std::uint64_t s_seed = 0;
  sample->add_option("--corpus", s_corpus)->required();
  sample->add_option("--count", s_count, "number of titles (T)");
  sample->add_option("--seed", s_seed);
  sample->add_option("--out", s_out, "output JSONL (default stdout)");
  sample->callback([&] {
    action = [&] { return Sample(s_corpus, s_count, s_seed, s_out); };
  });

  auto* run = app.add_subcommand("run", "sample, generate, screen, pool and plan");
  std::string run_config;
  run->add_option("--config", run_config, "run config JSON")->required();
  run->callback([&] {
    action = [&] { return Run(run_config, RunStage::kPlan); };
  });

  auto* generate = app.add_subcommand("generate", "run up to generation only");
  std::string gen_config;
  generate->add_option("--config", gen_config, "run config JSON")->required();
  generate->callback([&] {
    action = [&] { return Run(gen_config, RunStage::kGeneration); };
  });

  auto* plag = app.add_subcommand("check-plagiarism",
                                  "report poems duplicating database lines");
  std::string p_db, p_in, p_mode = "same-poem";
  plag->add_option("--database", p_db)->required();
  plag->add_option("--input", p_in, "poems to check")->required();
  plag->add_option("--mode", p_mode, "same-poem|any-line");
  plag->callback([&] {
    action = [&] { return CheckPlagiarism(p_db, p_in, p_mode); };
  });

  auto* plan = app.add_subcommand("plan", "assign pool poems to judges");
  std::string pl_pool, pl_out;
  std::size_t pl_judges = 13, pl_k = 2;
  std::vector<std::string> pl_ids;
  std::uint64_t pl_seed = 0;
  plan->add_option("--pool", pl_pool, "pool JSONL")->required();
  plan->add_option("--judges", pl_judges, "number of judges");
  plan->add_option("--judge-ids", pl_ids, "explicit judge ids")->delimiter(',');
  plan->add_option("--k", pl_k, "minimum judges per poem");
  plan->add_option("--seed", pl_seed);
  plan->add_option("--out", pl_out, "output JSON (default stdout)");
  plan->callback([&] {
    action = [&] { return Plan(pl_pool, pl_judges, pl_ids, pl_k, pl_seed, pl_out); };
  });

  auto* serve = app.add_subcommand("serve", "serve the blind judging API");
  std::string sv_run, sv_host = "127.0.0.1", sv_static;
  int sv_port = 8080;
  serve->add_option("--run", sv_run, "run directory")->required();
  serve->add_option("--port", sv_port);
  serve->add_option("--host", sv_host);
  serve->add_option("--static", sv_static, "judge UI assets to serve at /");
  serve->callback([&] {
    action = [&] { return Serve(sv_run, sv_host, sv_port, sv_static); };
  });

  auto* analyze = app.add_subcommand("analyze", "compute AUC, Wilcoxon and tables");
  std::string an_run, an_ratings, an_out, an_scope, an_alt;
  analyze->add_option("--run", an_run, "run directory")->required();
  analyze->add_option("--ratings", an_ratings, "ratings CSV (default: run store)");
  analyze->add_option("--out", an_out, "report directory (default <run>/report)");
  analyze->add_option("--filter-scope", an_scope, "ai-only|both");
  analyze->add_option("--alternative", an_alt, "two-sided|greater|less");
  analyze->callback([&] {
    action = [&] { return Analyze(an_run, an_ratings, an_out, an_scope, an_alt); };
  });

  auto* simulate = app.add_subcommand(
      "simulate", "power analysis (--config) or synthetic ratings (--run)");
  std::string si_config, si_run, si_kind = "gaussian", si_out;
  double si_d = 0.4, si_sigma = 0.2;
  std::uint64_t si_seed = 0;
  auto* si_config_opt = simulate->add_option("--config", si_config,
                                             "power analysis JSON");
  auto* si_run_opt = simulate->add_option("--run", si_run, "run directory");
  si_config_opt->excludes(si_run_opt);
  simulate->add_option("--judge-model", si_kind, "oracle|random|gaussian");
  simulate->add_option("--d", si_d, "class-mean separation");
  simulate->add_option("--sigma", si_sigma, "judge noise");
  simulate->add_option("--seed", si_seed);
  simulate->add_option("--out", si_out, "output CSV");
  simulate->callback([&] {
    if (si_config.empty() && si_run.empty()) {
      throw CLI::ValidationError("simulate needs --config or --run");
    }
    action = [&] {
      return si_config.empty()
                 ? SimulateRun(si_run, si_kind, si_d, si_sigma, si_seed, si_out)
                 : SimulatePower(si_config, si_out);
    };
  });

  auto* exp = app.add_subcommand("export", "export collected ratings as CSV");
  std::string ex_run, ex_out;
  exp->add_option("--run", ex_run, "run directory")->required();
  exp->add_option("--out", ex_out, "output CSV (default stdout)");
  exp->callback([&] { action = [&] { return Export(ex_run, ex_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action();
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const StageError& e) {
    std::cerr << "stage failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "stage failure: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace
}  // namespace proftap

int main(int argc, char** argv) { return proftap::Main(argc, argv); }
