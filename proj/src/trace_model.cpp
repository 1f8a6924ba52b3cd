#include "tracealign/trace_model.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <string>
#include <unordered_map>

#include "tracealign/errors.hpp"

namespace tracealign {

namespace {

constexpr std::array<std::string_view, 6> kAgentKindNames = {"Orchestrator", "Web",      "File",
                                                             "Coder",        "Terminal", "Other"};
constexpr std::array<std::string_view, 5> kRoleNames = {"instruction", "response", "tool_call",
                                                        "tool_result", "system"};
constexpr std::array<std::string_view, 3> kOutcomeNames = {"success", "failure", "unknown"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<Enum>(i);
  return std::nullopt;
}

std::uint64_t read_count(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return 0;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw DataError(std::string("token_usage.") + key + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

}  // namespace

std::string_view to_string(AgentKind k) noexcept { return kAgentKindNames[static_cast<int>(k)]; }
std::string_view to_string(Role r) noexcept { return kRoleNames[static_cast<int>(r)]; }
std::string_view to_string(DeclaredOutcome o) noexcept { return kOutcomeNames[static_cast<int>(o)]; }

AgentKind agent_kind_from_string(std::string_view s) {
  if (auto k = lookup<AgentKind>(kAgentKindNames, s)) return *k;
  throw DataError("unknown agent kind '" + std::string(s) + "'");
}

Role role_from_string(std::string_view s) {
  if (auto r = lookup<Role>(kRoleNames, s)) return *r;
  throw DataError("unknown role '" + std::string(s) + "'");
}

DeclaredOutcome outcome_from_string(std::string_view s) {
  if (auto o = lookup<DeclaredOutcome>(kOutcomeNames, s)) return *o;
  throw DataError("unknown outcome '" + std::string(s) + "'");
}

std::vector<const LogEntry*> Run::entries_between(std::int64_t from, std::int64_t to) const {
  std::vector<const LogEntry*> out;
  auto lo = std::lower_bound(entries.begin(), entries.end(), from,
                             [](const LogEntry& e, std::int64_t s) { return e.step_index < s; });
  for (auto it = lo; it != entries.end() && it->step_index <= to; ++it) out.push_back(&*it);
  return out;
}

const Run* TaskBundle::find_run(std::string_view run_id) const {
  auto it = std::lower_bound(runs.begin(), runs.end(), run_id,
                             [](const Run& r, std::string_view id) { return r.run_id < id; });
  if (it != runs.end() && it->run_id == run_id) return &*it;
  // Bundles built by hand in tests may not be sorted.
  for (const auto& r : runs)
    if (r.run_id == run_id) return &r;
  return nullptr;
}

AliasMap::AliasMap() {
  map_ = {{"Orchestrator", AgentKind::Orchestrator}, {"MagenticOneOrchestrator", AgentKind::Orchestrator},
          {"WebSurfer", AgentKind::Web},             {"FileSurfer", AgentKind::File},
          {"Coder", AgentKind::Coder},               {"ComputerTerminal", AgentKind::Terminal}};
}

AliasMap AliasMap::empty() {
  AliasMap m;
  m.map_.clear();
  return m;
}

AliasMap AliasMap::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("alias map must be a JSON object");
  AliasMap m = empty();
  for (const auto& [name, kind] : j.items()) {
    if (!kind.is_string()) throw DataError("alias for '" + name + "' must be a string");
    m.map_[name] = agent_kind_from_string(kind.get<std::string>());
  }
  return m;
}

AgentKind AliasMap::resolve(std::string_view agent_name) const {
  auto it = map_.find(agent_name);
  return it == map_.end() ? AgentKind::Other : it->second;
}

nlohmann::json AliasMap::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, kind] : map_) j[name] = std::string(to_string(kind));
  return j;
}

TaskBundle ingest_traces(std::istream& source, TraceFormat format, const AliasMap& aliases,
                         TaskInfo task) {
  if (format != TraceFormat::JsonlV1) throw DataError("unsupported trace format");

  std::unordered_map<std::string, Run> runs;
  std::unordered_map<std::string, std::set<std::int64_t>> seen_steps;
  std::string line;
  std::size_t line_no = 0;

  auto require_string = [&](const nlohmann::json& rec, const char* key) -> std::string {
    if (!rec.contains(key)) throw IngestError(line_no, std::string("missing required field '") + key + "'");
    if (!rec.at(key).is_string())
      throw IngestError(line_no, std::string("malformed record: '") + key + "' must be a string");
    return rec.at(key).get<std::string>();
  };

  while (std::getline(source, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw IngestError(line_no, std::string("malformed record: ") + e.what());
    }
    if (!rec.is_object()) throw IngestError(line_no, "malformed record: expected a JSON object");

    LogEntry e;
    e.run_id = require_string(rec, "run_id");
    if (!rec.contains("step_index")) throw IngestError(line_no, "missing required field 'step_index'");
    const auto& step = rec.at("step_index");
    if (!step.is_number_integer() || step.get<std::int64_t>() < 0)
      throw IngestError(line_no, "malformed record: 'step_index' must be a non-negative integer");
    e.step_index = step.get<std::int64_t>();
    e.agent_name = require_string(rec, "agent_name");
    e.agent_kind = aliases.resolve(e.agent_name);
    try {
      e.role = role_from_string(require_string(rec, "role"));
    } catch (const IngestError&) {
      throw;
    } catch (const DataError& err) {
      throw IngestError(line_no, std::string("malformed record: ") + err.what());
    }
    e.content = require_string(rec, "content");

    if (auto it = rec.find("timestamp"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) throw IngestError(line_no, "malformed record: 'timestamp' must be a string");
      e.timestamp = it->get<std::string>();
    }
    if (auto it = rec.find("token_usage"); it != rec.end() && !it->is_null()) {
      if (!it->is_object()) throw IngestError(line_no, "malformed record: 'token_usage' must be an object");
      try {
        e.token_usage = TokenUsage{read_count(*it, "input"), read_count(*it, "output")};
      } catch (const DataError& err) {
        throw IngestError(line_no, std::string("malformed record: ") + err.what());
      }
    }
    if (auto it = rec.find("metadata"); it != rec.end() && !it->is_null()) {
      if (!it->is_object()) throw IngestError(line_no, "malformed record: 'metadata' must be an object");
      for (const auto& [k, v] : it->items()) {
        if (!v.is_string()) throw IngestError(line_no, "malformed record: metadata values must be strings");
        e.metadata[k] = v.get<std::string>();
      }
    }

    auto& steps = seen_steps[e.run_id];
    auto& run = runs[e.run_id];
    run.run_id = e.run_id;
    if (steps.contains(e.step_index))
      throw IngestError(line_no, "duplicate step_index " + std::to_string(e.step_index) + " in run '" +
                                     e.run_id + "'");
    if (!run.entries.empty() && e.step_index <= run.entries.back().step_index)
      throw IngestError(line_no, "non-increasing step_index " + std::to_string(e.step_index) +
                                     " in run '" + e.run_id + "' (previous " +
                                     std::to_string(run.entries.back().step_index) + ")");
    steps.insert(e.step_index);

    if (auto it = e.metadata.find("run_outcome"); it != e.metadata.end()) {
      try {
        run.declared_outcome = outcome_from_string(it->second);
      } catch (const DataError& err) {
        throw IngestError(line_no, err.what());
      }
    }
    if (e.token_usage) {
      run.token_totals.input += e.token_usage->input;
      run.token_totals.output += e.token_usage->output;
    }
    run.entries.push_back(std::move(e));
  }

  TaskBundle bundle;
  bundle.task_id = std::move(task.task_id);
  bundle.task_description = std::move(task.task_description);
  bundle.runs.reserve(runs.size());
  for (auto& [id, run] : runs) bundle.runs.push_back(std::move(run));
  std::sort(bundle.runs.begin(), bundle.runs.end(),
            [](const Run& a, const Run& b) { return a.run_id < b.run_id; });
  if (bundle.runs.empty()) throw DataError("trace source contains no runs");
  return bundle;
}

std::vector<RunTokenSummary> summarize_tokens(const TaskBundle& bundle) {
  std::vector<RunTokenSummary> out;
  out.reserve(bundle.runs.size());
  for (const auto& run : bundle.runs) {
    RunTokenSummary s;
    s.run_id = run.run_id;
    s.entry_count = run.entries.size();
    std::array<bool, kAgentKindNames.size()> present{};
    for (const auto& e : run.entries) {
      if (e.token_usage) {
        s.input_total += e.token_usage->input;
        s.output_total += e.token_usage->output;
      }
      present[static_cast<std::size_t>(e.agent_kind)] = true;
    }
    for (std::size_t i = 0; i < present.size(); ++i)
      if (present[i]) s.agent_kinds_present.push_back(static_cast<AgentKind>(i));
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(),
            [](const RunTokenSummary& a, const RunTokenSummary& b) { return a.run_id < b.run_id; });
  return out;
}

void to_json(nlohmann::json& j, const LogEntry& e) {
  j = nlohmann::json{{"run_id", e.run_id},
                     {"step_index", e.step_index},
                     {"agent_name", e.agent_name},
                     {"agent_kind", to_string(e.agent_kind)},
                     {"role", to_string(e.role)},
                     {"content", e.content}};
  if (e.timestamp) j["timestamp"] = *e.timestamp;
  if (e.token_usage) j["token_usage"] = {{"input", e.token_usage->input}, {"output", e.token_usage->output}};
  if (!e.metadata.empty()) j["metadata"] = e.metadata;
}

void to_json(nlohmann::json& j, const RunTokenSummary& s) {
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : s.agent_kinds_present) kinds.push_back(to_string(k));
  j = nlohmann::json{{"run_id", s.run_id},
                     {"input_total", s.input_total},
                     {"output_total", s.output_total},
                     {"entry_count", s.entry_count},
                     {"agent_kinds_present", kinds}};
}

}  // namespace tracealign
