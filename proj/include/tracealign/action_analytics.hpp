#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracealign/config.hpp"
#include "tracealign/embedding.hpp"
#include "tracealign/flow.hpp"
#include "tracealign/gateway.hpp"
#include "tracealign/node_evaluation.hpp"
#include "tracealign/trace_model.hpp"

namespace tracealign {

// Maximal span of consecutive same-kind log entries inside a transition window.
struct ActionSegment {
  std::string run_id;
  AgentKind agent_kind = AgentKind::Other;
  Interval step_range;
  std::string text;
  Embedding embedding;

  // "<run_id>:<from>-<to>"
  std::string ref() const;
};

using ActionsByRun = std::map<std::string, std::vector<ActionSegment>>;

// One or more links sharing (source, target). Selecting a transition id gathers every
// outcome; selecting a link id gathers one.
struct TransitionSelection {
  std::string source;
  std::string target;
  std::vector<std::string> run_ids;  // sorted, unique

  static TransitionSelection of(const std::vector<const TransitionLink*>& links);
  std::string id() const { return source + "->" + target; }
};

// Window per run: (last evidence of source, last evidence of target]; START opens at the
// run's beginning, END or evidence-less targets close at the run's end.
Interval transition_window(const Run& run, const JudgmentMatrix& matrix, const TransitionSelection& sel);

// Throws DataError when the selection no longer matches the matrix (stale link).
ActionsByRun collect_transition_actions(const TaskBundle& bundle, const JudgmentMatrix& matrix,
                                        const std::vector<const TransitionLink*>& links,
                                        const EmbeddingProvider& embedder);

// Coalesces consecutive entries of the same agent kind.
std::vector<ActionSegment> coalesce(const std::vector<const LogEntry*>& entries, const EmbeddingProvider& embedder);

struct ContextCluster {
  std::string id;
  std::string label;
  std::vector<std::string> members;  // ActionSegment refs, representative first
  double failure_share = 0.0;
};

// True when the run judged `target` as Failed.
bool run_failed_target(const JudgmentMatrix& matrix, const std::string& run_id, const std::string& target);

std::vector<ContextCluster> cluster_contexts(const ActionsByRun& actions, const JudgmentMatrix& matrix,
                                             const TransitionSelection& sel, const AnalysisConfig& config,
                                             const Gateway* gateway);

struct AlignedBlock {
  AgentKind agent_kind = AgentKind::Other;
  std::string segment_ref;
  std::string cluster_id;
};

using AlignedRows = std::map<std::string, std::vector<AlignedBlock>>;

AlignedRows align_sequences(const ActionsByRun& actions, const std::vector<ContextCluster>& clusters);

struct LoopSpan {
  std::size_t first = 0;  // index into the row
  std::size_t last = 0;
  AgentKind agent_kind = AgentKind::Other;
  std::size_t length = 0;  // worker blocks in the stretch
};

// Stretches of >= loop_k consecutive same-kind worker blocks. Orchestrator blocks between
// worker blocks are transparent, since every worker turn is interleaved with one.
std::vector<LoopSpan> find_loops(const std::vector<AgentKind>& row, int loop_k);

struct ErrorReport {
  std::string error_type;
  std::string description;
  std::vector<std::string> failed_examples;
  std::vector<std::string> successful_examples;
  std::optional<std::string> run_id;
  std::optional<std::string> cluster_id;
};

std::vector<ErrorReport> analyze_errors(const TransitionSelection& sel, const JudgmentMatrix& matrix,
                                        const ActionsByRun& actions, const std::vector<ContextCluster>& clusters,
                                        const AlignedRows& rows, const AnalysisConfig& config,
                                        const Gateway* gateway);

// Rule-based reports only.
std::vector<ErrorReport> detect_errors(const TransitionSelection& sel, const JudgmentMatrix& matrix,
                                       const std::vector<ContextCluster>& clusters, const AlignedRows& rows,
                                       const AnalysisConfig& config);

struct TransitionAnalysis {
  TransitionSelection selection;
  ActionsByRun actions;
  std::vector<ContextCluster> clusters;
  AlignedRows rows;
  std::vector<ErrorReport> reports;
};

TransitionAnalysis analyze_transition(const TaskBundle& bundle, const JudgmentMatrix& matrix,
                                      const std::vector<const TransitionLink*>& links, const AnalysisConfig& config,
                                      const EmbeddingProvider& embedder, const Gateway* gateway);

const ActionSegment* find_action(const ActionsByRun& actions, std::string_view ref);

void to_json(nlohmann::json& j, const ActionSegment& s);
void to_json(nlohmann::json& j, const ContextCluster& c);
void to_json(nlohmann::json& j, const AlignedBlock& b);
void to_json(nlohmann::json& j, const ErrorReport& r);
void to_json(nlohmann::json& j, const TransitionAnalysis& a);

}  // namespace tracealign
