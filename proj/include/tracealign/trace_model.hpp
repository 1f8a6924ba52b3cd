#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace tracealign {

// Inclusive step (or index) interval.
struct Interval {
  std::int64_t from = 0;
  std::int64_t to = 0;
  bool contains(std::int64_t v) const { return from <= v && v <= to; }
  friend auto operator<=>(const Interval&, const Interval&) = default;
};

enum class AgentKind { Orchestrator, Web, File, Coder, Terminal, Other };
enum class Role { Instruction, Response, ToolCall, ToolResult, System };
enum class DeclaredOutcome { Success, Failure, Unknown };

std::string_view to_string(AgentKind k) noexcept;
std::string_view to_string(Role r) noexcept;
std::string_view to_string(DeclaredOutcome o) noexcept;
AgentKind agent_kind_from_string(std::string_view s);  // throws DataError
Role role_from_string(std::string_view s);              // throws DataError
DeclaredOutcome outcome_from_string(std::string_view s);

struct TokenUsage {
  std::uint64_t input = 0;
  std::uint64_t output = 0;
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct LogEntry {
  std::string run_id;
  std::int64_t step_index = 0;
  std::optional<std::string> timestamp;
  std::string agent_name;
  AgentKind agent_kind = AgentKind::Other;
  Role role = Role::Response;
  std::string content;
  std::optional<TokenUsage> token_usage;
  std::map<std::string, std::string> metadata;
  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

struct Run {
  std::string run_id;
  std::vector<LogEntry> entries;
  DeclaredOutcome declared_outcome = DeclaredOutcome::Unknown;
  TokenUsage token_totals;

  std::int64_t first_step() const { return entries.front().step_index; }
  std::int64_t last_step() const { return entries.back().step_index; }
  // Entries with step_index in [from, to], in order.
  std::vector<const LogEntry*> entries_between(std::int64_t from, std::int64_t to) const;
  friend bool operator==(const Run&, const Run&) = default;
};

struct TaskBundle {
  std::string task_id;
  std::string task_description;
  std::vector<Run> runs;  // sorted by run_id

  const Run* find_run(std::string_view run_id) const;
  friend bool operator==(const TaskBundle&, const TaskBundle&) = default;
};

// agent_name -> agent_kind. Case-sensitive exact match on the agent name.
class AliasMap {
 public:
  AliasMap();  // MagenticOne-style defaults
  static AliasMap from_json(const nlohmann::json& j);
  static AliasMap empty();

  AgentKind resolve(std::string_view agent_name) const;
  void set(std::string name, AgentKind kind) { map_[std::move(name)] = kind; }
  nlohmann::json to_json() const;
  friend bool operator==(const AliasMap&, const AliasMap&) = default;

 private:
  std::map<std::string, AgentKind, std::less<>> map_;
};

enum class TraceFormat { JsonlV1 };

struct TaskInfo {
  std::string task_id;
  std::string task_description;
};

// Parses a jsonl-v1 trace stream. Throws IngestError with the 1-based line number.
TaskBundle ingest_traces(std::istream& source, TraceFormat format, const AliasMap& aliases,
                         TaskInfo task = {});

struct RunTokenSummary {
  std::string run_id;
  std::uint64_t input_total = 0;
  std::uint64_t output_total = 0;
  std::size_t entry_count = 0;
  std::vector<AgentKind> agent_kinds_present;  // enum order
  friend bool operator==(const RunTokenSummary&, const RunTokenSummary&) = default;
};

std::vector<RunTokenSummary> summarize_tokens(const TaskBundle& bundle);

void to_json(nlohmann::json& j, const LogEntry& e);
void to_json(nlohmann::json& j, const RunTokenSummary& s);

}  // namespace tracealign
