#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "support.hpp"
#include "tracealign/trace_model.hpp"

using namespace testsupport;

TEST_CASE("two records at steps 0,1 give one run with two entries") {
  auto b = bundle_from({line("r1", 0, "Orchestrator", "instruction", "go"), line("r1", 1, "WebSurfer", "response", "ok")});
  REQUIRE(b.runs.size() == 1);
  CHECK(b.runs[0].run_id == "r1");
  CHECK(b.runs[0].entries.size() == 2);
  CHECK(b.task_description == "test task");
}

TEST_CASE("agent names map to kinds through the alias map") {
  AliasMap m;
  CHECK(m.resolve("WebSurfer") == AgentKind::Web);
  CHECK(m.resolve("FileSurfer") == AgentKind::File);
  CHECK(m.resolve("Coder") == AgentKind::Coder);
  CHECK(m.resolve("ComputerTerminal") == AgentKind::Terminal);
  CHECK(m.resolve("Orchestrator") == AgentKind::Orchestrator);
  CHECK(m.resolve("SomethingElse") == AgentKind::Other);

  auto custom = AliasMap::from_json({{"Planner", "Orchestrator"}});
  CHECK(custom.resolve("Planner") == AgentKind::Orchestrator);
  CHECK(custom.resolve("WebSurfer") == AgentKind::Other);
  CHECK_THROWS_AS(AliasMap::from_json({{"X", "Wizard"}}), DataError);
}

TEST_CASE("non-increasing step names the run and line") {
  std::istringstream in(jsonl({line("r1", 5, "Coder", "response", "a"), line("r1", 3, "Coder", "response", "b")}));
  try {
    ingest_traces(in, TraceFormat::JsonlV1, AliasMap());
    FAIL("expected an error");
  } catch (const IngestError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("r1") != std::string::npos);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("ingestion errors") {
  auto fails_at = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      ingest_traces(in, TraceFormat::JsonlV1, AliasMap());
    } catch (const IngestError& e) {
      return e.line();
    } catch (const DataError&) {
      return 0;
    }
    return static_cast<std::size_t>(-1);
  };
  const auto ok = line("r1", 0, "Coder", "response", "a").dump();
  SUBCASE("duplicate step") { CHECK(fails_at(ok + "\n" + ok + "\n") == 2); }
  SUBCASE("malformed JSON") { CHECK(fails_at(ok + "\n{not json\n") == 2); }
  SUBCASE("missing content") {
    auto j = line("r1", 1, "Coder", "response", "a");
    j.erase("content");
    CHECK(fails_at(ok + "\n" + j.dump() + "\n") == 2);
  }
  SUBCASE("negative step") { CHECK(fails_at(line("r1", -1, "Coder", "response", "a").dump()) == 1); }
  SUBCASE("bad role") { CHECK(fails_at(line("r1", 0, "Coder", "chatter", "a").dump()) == 1); }
  SUBCASE("empty source") { CHECK(fails_at("\n\n") == 0); }
  SUBCASE("empty content is allowed") { CHECK(fails_at(line("r1", 0, "Coder", "response", "").dump()) == static_cast<std::size_t>(-1)); }
}

TEST_CASE("token summaries") {
  auto a = line("r1", 0, "Coder", "response", "x");
  a["token_usage"] = {{"input", 10}, {"output", 5}};
  auto b = line("r1", 1, "Coder", "response", "y");
  b["token_usage"] = {{"input", 0}, {"output", 0}};
  auto s = summarize_tokens(bundle_from({a, b}));
  REQUIRE(s.size() == 1);
  CHECK(s[0].input_total == 10);
  CHECK(s[0].output_total == 5);

  auto none = summarize_tokens(bundle_from({line("r9", 0, "Coder", "response", "x")}));
  CHECK(none[0].input_total == 0);
  CHECK(none[0].output_total == 0);
}

TEST_CASE("three-run fixture summaries match an independent fold over raw lines") {
  std::ifstream in(fixture("three_runs.jsonl"));
  auto bundle = ingest_traces(in, TraceFormat::JsonlV1, AliasMap());
  auto s = summarize_tokens(bundle);
  REQUIRE(s.size() == 3);
  CHECK(s[0].run_id == "a");
  CHECK(s[1].run_id == "b");
  CHECK(s[2].run_id == "c");

  std::map<std::string, std::array<std::uint64_t, 3>> fold;
  for (const auto& r : read_jsonl(fixture("three_runs.jsonl"))) {
    auto& f = fold[r["run_id"].get<std::string>()];
    f[2] += 1;
    if (r.contains("token_usage")) {
      f[0] += r["token_usage"]["input"].get<std::uint64_t>();
      f[1] += r["token_usage"]["output"].get<std::uint64_t>();
    }
  }
  for (const auto& rec : s) {
    CHECK(rec.input_total == fold[rec.run_id][0]);
    CHECK(rec.output_total == fold[rec.run_id][1]);
    CHECK(rec.entry_count == fold[rec.run_id][2]);
  }
  CHECK(s[2].agent_kinds_present == std::vector<AgentKind>{AgentKind::Orchestrator, AgentKind::Coder, AgentKind::Terminal});
}

TEST_CASE("random bundles: token totals equal brute-force sums and steps increase") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<json> recs;
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> expect;
    std::map<std::string, long> next;
    const int n = std::uniform_int_distribution<int>(1, 100)(rng);
    for (int i = 0; i < n; ++i) {
      const std::string run = "r" + std::to_string(rng() % 4);
      next[run] += 1 + static_cast<long>(rng() % 3);
      auto r = line(run, next[run], "Coder", "response", "x");
      if (rng() % 3) {
        const std::uint64_t in = rng() % 1000, out = rng() % 1000;
        r["token_usage"] = {{"input", in}, {"output", out}};
        expect[run].first += in;
        expect[run].second += out;
      } else {
        expect[run];
      }
      recs.push_back(r);
    }
    auto bundle = bundle_from(recs);
    for (const auto& run : bundle.runs)
      for (std::size_t i = 1; i < run.entries.size(); ++i) REQUIRE(run.entries[i - 1].step_index < run.entries[i].step_index);
    for (const auto& rec : summarize_tokens(bundle)) {
      REQUIRE(rec.input_total == expect[rec.run_id].first);
      REQUIRE(rec.output_total == expect[rec.run_id].second);
      REQUIRE(rec.input_total == bundle.find_run(rec.run_id)->token_totals.input);
    }
    CHECK(bundle_from(recs) == bundle);
  }
}

TEST_CASE("declared outcome and metadata") {
  auto a = line("r1", 0, "Coder", "response", "x");
  a["metadata"] = {{"run_outcome", "success"}, {"context", "script"}};
  auto b = bundle_from({a});
  CHECK(b.runs[0].declared_outcome == DeclaredOutcome::Success);
  CHECK(b.runs[0].entries[0].metadata.at("context") == "script");
  CHECK(bundle_from({line("r2", 0, "Coder", "response", "x")}).runs[0].declared_outcome == DeclaredOutcome::Unknown);
}
