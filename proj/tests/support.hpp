#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracealign/session.hpp"

namespace testsupport {

using nlohmann::json;
using namespace tracealign;

inline std::string fixture(const std::string& rel) { return std::string(TRACEALIGN_FIXTURE_DIR) + "/" + rel; }

inline json line(const std::string& run, long step, const std::string& agent, const std::string& role,
                 const std::string& content) {
  return {{"run_id", run}, {"step_index", step}, {"agent_name", agent}, {"role", role}, {"content", content}};
}

inline std::string jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) out += r.dump() + "\n";
  return out;
}

inline TaskBundle bundle_from(const std::vector<json>& records, TaskInfo task = {"t", "test task"}) {
  std::istringstream in(jsonl(records));
  return ingest_traces(in, TraceFormat::JsonlV1, AliasMap(), task);
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  return json::parse(in);
}

inline std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  std::vector<json> out;
  std::string l;
  while (std::getline(in, l))
    if (!l.empty()) out.push_back(json::parse(l));
  return out;
}

// Unique scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  static std::random_device rd;
  auto p = std::filesystem::temp_directory_path() / ("tracealign_" + name + "_" + std::to_string(rd()));
  std::filesystem::create_directories(p);
  return p;
}

inline std::shared_ptr<const Gateway> portfolio_gateway() {
  GatewayConfig cfg;
  cfg.provider = ProviderKind::Stub;
  cfg.stub_fixture_path = fixture("portfolio/stub_fixtures.json");
  return std::make_shared<Gateway>(cfg);
}

inline TaskInfo portfolio_task() {
  auto t = read_json(fixture("portfolio/task.json"));
  return {t.at("task_id").get<std::string>(), t.at("task_description").get<std::string>()};
}

inline AliasMap portfolio_aliases() { return AliasMap::from_json(read_json(fixture("portfolio/alias_map.json"))); }

inline Session portfolio_ingested(const std::string& traces = fixture("portfolio/traces.jsonl")) {
  return Session::create(traces, portfolio_aliases(), portfolio_task(), AnalysisConfig{});
}

// ingest -> extract -> refine (fixture actions) -> infer dependencies -> evaluate
inline Session portfolio_evaluated(const Engine& engine, const std::string& traces = fixture("portfolio/traces.jsonl")) {
  Session s = portfolio_ingested(traces);
  apply_mutation(s, {{"kind", "extract"}}, engine);
  apply_mutation(s, {{"kind", "refine"}, {"actions", read_jsonl(fixture("portfolio/actions.jsonl"))}}, engine);
  apply_mutation(s, {{"kind", "deps_infer_apply"}}, engine);
  apply_mutation(s, {{"kind", "evaluate"}}, engine);
  return s;
}

inline const InformationNode* node_titled(const Session& s, const std::string& title) {
  for (const auto* n : s.nodes.confirmed())
    if (n->title == title) return n;
  return nullptr;
}

}  // namespace testsupport
