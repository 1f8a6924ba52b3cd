#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracealign/config.hpp"
#include "tracealign/dependency_graph.hpp"
#include "tracealign/gateway.hpp"
#include "tracealign/node_pipeline.hpp"
#include "tracealign/segmentation.hpp"
#include "tracealign/trace_model.hpp"

namespace tracealign {

enum class NodeRunStatus { Completed, Recovered, Failed, NotReached };
std::string_view to_string(NodeRunStatus s) noexcept;
NodeRunStatus status_from_string(std::string_view s);

struct NodeJudgment {
  std::string run_id;
  std::string node_id;
  NodeRunStatus status = NodeRunStatus::NotReached;
  double confidence = 0.0;
  std::vector<Interval> evidence;  // ascending step intervals within the run
  std::string rationale;
  int passes = 1;

  bool reached() const { return status != NodeRunStatus::NotReached; }
  std::optional<std::int64_t> first_evidence_step() const;
  std::optional<std::int64_t> last_evidence_step() const;
  friend bool operator==(const NodeJudgment&, const NodeJudgment&) = default;
};

// Complete map (run, node) -> judgment.
class JudgmentMatrix {
 public:
  JudgmentMatrix() = default;
  JudgmentMatrix(std::vector<std::string> run_ids, std::vector<std::string> node_ids);

  void set(NodeJudgment j);
  const NodeJudgment& at(const std::string& run_id, const std::string& node_id) const;
  const NodeJudgment* find(const std::string& run_id, const std::string& node_id) const;

  const std::vector<std::string>& run_ids() const { return runs_; }
  const std::vector<std::string>& node_ids() const { return nodes_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }
  bool complete() const { return cells_.size() == runs_.size() * nodes_.size(); }
  const std::map<std::pair<std::string, std::string>, NodeJudgment>& cells() const { return cells_; }

  friend bool operator==(const JudgmentMatrix&, const JudgmentMatrix&) = default;
  friend void to_json(nlohmann::json& j, const JudgmentMatrix& m);
  friend void from_json(const nlohmann::json& j, JudgmentMatrix& m);

 private:
  std::vector<std::string> runs_;   // sorted
  std::vector<std::string> nodes_;  // topological order
  std::map<std::pair<std::string, std::string>, NodeJudgment> cells_;
};

struct EvaluationContext {
  std::string task_description;
  const std::map<std::string, NodeJudgment>* prior = nullptr;  // this run, by node id
  const DependencyGraph* graph = nullptr;
};

// Marker rules over the node's member segments from this run. Throws DataError when the
// node title has no keyword tokens.
NodeJudgment rule_based_judgment(const Run& run, const InformationNode& node, const SegmentsByRun& segments,
                                 const AnalysisConfig& config);

// Gateway judge voted over config.voting_m passes; falls back to rule_based_judgment.
NodeJudgment evaluate_node(const Run& run, const InformationNode& node, const EvaluationContext& ctx,
                           const SegmentsByRun& segments, const AnalysisConfig& config, const Gateway* gateway);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

JudgmentMatrix evaluate_all(const TaskBundle& bundle, const std::vector<const InformationNode*>& confirmed,
                            const DependencyGraph& graph, const SegmentsByRun& segments,
                            const AnalysisConfig& config, const Gateway* gateway, const ProgressFn& progress = {});

void to_json(nlohmann::json& j, const NodeJudgment& n);
void from_json(const nlohmann::json& j, NodeJudgment& n);

}  // namespace tracealign
