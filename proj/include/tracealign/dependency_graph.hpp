#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracealign/errors.hpp"
#include "tracealign/gateway.hpp"
#include "tracealign/node_pipeline.hpp"

namespace tracealign {

enum class EdgeOrigin { Inferred, Manual, Imported };
std::string_view to_string(EdgeOrigin o) noexcept;
EdgeOrigin edge_origin_from_string(std::string_view s);

struct DependencyEdge {
  std::string from;  // prerequisite
  std::string to;    // dependent
  EdgeOrigin origin = EdgeOrigin::Manual;
  friend bool operator==(const DependencyEdge&, const DependencyEdge&) = default;
};

class CycleError : public DataError {
 public:
  using DataError::DataError;
};

// Prerequisite DAG over confirmed node ids. Every mutation keeps it acyclic or throws
// without changing anything.
class DependencyGraph {
 public:
  DependencyGraph() = default;
  explicit DependencyGraph(std::set<std::string> node_ids) : nodes_(std::move(node_ids)) {}

  const std::set<std::string>& node_ids() const { return nodes_; }
  std::vector<DependencyEdge> edges() const;
  bool has_edge(const std::string& from, const std::string& to) const { return edges_.contains({from, to}); }

  // Restricts the node set; edges touching dropped ids are removed.
  void set_nodes(std::set<std::string> node_ids);

  void add_edge(const std::string& from, const std::string& to, EdgeOrigin origin = EdgeOrigin::Manual);
  // Idempotent; returns whether an edge was removed.
  bool remove_edge(const std::string& from, const std::string& to);
  void clear_edges() { edges_.clear(); }

  bool reaches(const std::string& from, const std::string& to) const;
  std::vector<std::string> predecessors(const std::string& id) const;

  // Kahn's algorithm, ties broken by ascending id.
  std::vector<std::string> topological_order() const;

  friend bool operator==(const DependencyGraph&, const DependencyGraph&) = default;
  friend void to_json(nlohmann::json& j, const DependencyGraph& g);
  friend void from_json(const nlohmann::json& j, DependencyGraph& g);

 private:
  void require_node(const std::string& id) const;

  std::set<std::string> nodes_;
  std::map<std::pair<std::string, std::string>, EdgeOrigin> edges_;
};

struct DependencyProposal {
  std::vector<DependencyEdge> edges;
  std::vector<std::string> warnings;
  bool from_fallback = false;
};

// Gateway proposal filtered for unknown ids and cycles (first-come wins); offline
// fallback chains nodes by ascending median first-evidence step across runs.
DependencyProposal infer_dependencies(const std::string& task_description,
                                      const std::vector<const InformationNode*>& confirmed,
                                      const SegmentsByRun& segments, const Gateway* gateway);

// Offline chain only.
DependencyProposal chain_by_median_first_step(const std::vector<const InformationNode*>& confirmed,
                                              const SegmentsByRun& segments);

// Flow file: {"nodes": [{"id","title"}], "edges": [{"from","to"}]}. References resolve by
// confirmed node id, then by title (directly or through the file's own node list).
DependencyGraph import_flow(const nlohmann::json& flow, const std::vector<const InformationNode*>& confirmed);
nlohmann::json export_flow(const DependencyGraph& graph, const std::vector<const InformationNode*>& confirmed);

}  // namespace tracealign
