#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracealign/dependency_graph.hpp"
#include "tracealign/node_evaluation.hpp"

namespace tracealign {

inline constexpr std::string_view kStartNode = "START";
inline constexpr std::string_view kEndNode = "END";

enum class LinkOutcome { Success, Failure, Recovered };
std::string_view to_string(LinkOutcome o) noexcept;
LinkOutcome link_outcome_from_string(std::string_view s);

struct TransitionLink {
  std::string source;  // node id or START
  std::string target;  // node id or END
  LinkOutcome outcome = LinkOutcome::Success;
  std::vector<std::string> run_ids;  // sorted
  bool violates_dependencies = false;

  std::size_t weight() const { return run_ids.size(); }
  // "<source>-><target>#<outcome>"
  std::string id() const;
  // "<source>-><target>", shared by every outcome of the transition
  std::string transition_id() const { return source + "->" + target; }
  friend bool operator==(const TransitionLink&, const TransitionLink&) = default;
};

struct StatusTally {
  std::size_t completed = 0, recovered = 0, failed = 0, not_reached = 0;
  friend bool operator==(const StatusTally&, const StatusTally&) = default;
};

struct SankeyModel {
  std::vector<std::string> columns;                        // START, topological order, END
  std::vector<TransitionLink> links;                       // sorted by id
  std::map<std::string, StatusTally> tallies;              // per node
  std::map<std::string, std::vector<std::string>> paths;   // per run, START first

  const TransitionLink* find_link(std::string_view id) const;
  // Links matching a link id or a transition id.
  std::vector<const TransitionLink*> select(std::string_view id) const;
  friend bool operator==(const SankeyModel&, const SankeyModel&) = default;
};

// Per run: reached nodes ordered by first evidence step become a START-rooted path; a
// Failed last node absorbs the run, otherwise the path ends at END.
SankeyModel build_flow(const JudgmentMatrix& matrix, const DependencyGraph& graph);

struct PathStat {
  std::vector<std::string> path;
  std::string signature;  // nodes joined by '>'
  std::size_t frequency = 0;
  std::vector<std::string> run_ids;
  bool flagged_rare = false;
};

// Distinct full per-run paths, most frequent first (ties by signature).
std::vector<PathStat> path_stats(const SankeyModel& model);

void to_json(nlohmann::json& j, const TransitionLink& l);
void from_json(const nlohmann::json& j, TransitionLink& l);
void to_json(nlohmann::json& j, const SankeyModel& m);
void from_json(const nlohmann::json& j, SankeyModel& m);
void to_json(nlohmann::json& j, const PathStat& p);

}  // namespace tracealign
