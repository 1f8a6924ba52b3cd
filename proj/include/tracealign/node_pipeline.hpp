#pragma once

#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracealign/config.hpp"
#include "tracealign/embedding.hpp"
#include "tracealign/gateway.hpp"
#include "tracealign/segmentation.hpp"

namespace tracealign {

// ---- greedy representative-based agglomeration -------------------------------------

struct AttachEvent {
  std::size_t item = 0;
  std::size_t group = 0;
  double similarity = 0.0;  // to the group representative, at attach time
};

struct Grouping {
  std::vector<std::vector<std::size_t>> groups;  // groups[g][0] is the representative
  std::vector<AttachEvent> attaches;
};

// Visits items in `order`; each joins the first existing group whose representative has
// similarity >= threshold, otherwise opens a new group.
Grouping greedy_groups(std::span<const std::size_t> order,
                       const std::function<double(std::size_t, std::size_t)>& similarity,
                       double threshold);

// ---- candidates -------------------------------------------------------------------

struct CandidateNode {
  std::string id;
  std::string summary;
  Embedding summary_embedding;
  std::vector<SegmentRef> members;
  std::int64_t earliest_step = 0;

  std::size_t support() const;
};

std::size_t distinct_runs(const std::vector<SegmentRef>& members);

// Extractive fallback: first sentence plus the sentence closest to the centroid.
std::string extractive_summary(const Segment& segment, const EmbeddingProvider& embedder);

// Gateway summary when available, else extractive_summary. Throws DataError on empty text.
std::string summarize_segment(const Segment& segment, const EmbeddingProvider& embedder,
                              const Gateway* gateway);

// Candidates ordered by (support desc, earliest step asc, id asc) are grouped at
// theta_merge; each group keeps its representative's id and summary.
std::vector<CandidateNode> consolidate(std::vector<CandidateNode> candidates,
                                       const AnalysisConfig& config);

// One candidate per segment (id "<run>#<index>"), consolidated, ordered by support desc
// then id. Segments in `exclude` are skipped.
std::vector<CandidateNode> extract_candidates(const SegmentsByRun& segments, const AnalysisConfig& config,
                                              const EmbeddingProvider& embedder, const Gateway* gateway,
                                              const std::set<SegmentRef>& exclude = {});

// ---- node set & refinement --------------------------------------------------------

enum class NodeState { Candidate, Confirmed, Discarded };
enum class NodeOrigin { Auto, Manual, Merge, Split };

struct InformationNode {
  std::string id;
  std::string title;
  std::string description;
  std::vector<SegmentRef> members;
  NodeState state = NodeState::Candidate;
  NodeOrigin origin = NodeOrigin::Auto;
  std::vector<std::string> parent_ids;

  std::size_t support() const { return distinct_runs(members); }
  bool live() const { return state != NodeState::Discarded; }
  friend bool operator==(const InformationNode&, const InformationNode&) = default;
};

struct RefineAction {
  enum class Kind { Confirm, Rename, Merge, Split, Add, Remove, Refresh };
  Kind kind = Kind::Confirm;
  std::string id;
  std::vector<std::string> ids;                   // merge
  std::optional<std::string> title;               // rename / merge / add
  std::optional<std::string> description;         // rename / add
  std::vector<std::vector<SegmentRef>> partition; // split
  std::vector<SegmentRef> members;                // add

  static RefineAction confirm(std::string id);
  static RefineAction rename(std::string id, std::string title);
  static RefineAction merge(std::vector<std::string> ids);
  static RefineAction split(std::string id, std::vector<std::vector<SegmentRef>> partition);
  static RefineAction add(std::string title, std::string description, std::vector<SegmentRef> members = {});
  static RefineAction remove(std::string id);
  static RefineAction refresh();
  friend bool operator==(const RefineAction&, const RefineAction&) = default;
};

struct RefineContext {
  const SegmentsByRun* segments = nullptr;
  const AnalysisConfig* config = nullptr;
  const EmbeddingProvider* embedder = nullptr;
  const Gateway* gateway = nullptr;
};

// Each segment is owned by at most one live node.
class NodeSet {
 public:
  const std::vector<InformationNode>& nodes() const { return nodes_; }
  const InformationNode* find(std::string_view id) const;
  std::vector<const InformationNode*> confirmed() const;  // id order
  std::vector<const InformationNode*> live() const;

  // Replaces nothing; appends candidates with fresh ids "n<k>".
  void adopt(const std::vector<CandidateNode>& candidates);

  // Applies one action atomically; returns ids of nodes it created.
  std::vector<std::string> apply(const RefineAction& action, const RefineContext& ctx);

  // Segments not owned by any live node.
  std::vector<SegmentRef> uncovered(const SegmentsByRun& segments) const;

  long next_counter() const { return next_; }
  friend bool operator==(const NodeSet&, const NodeSet&) = default;

  friend void to_json(nlohmann::json& j, const NodeSet& s);
  friend void from_json(const nlohmann::json& j, NodeSet& s);

 private:
  InformationNode& get(std::string_view id);
  std::string fresh_id();
  std::set<SegmentRef> owned_by_live(std::string_view except_id = {}) const;

  std::vector<InformationNode> nodes_;
  long next_ = 1;
};

std::string_view to_string(NodeState s) noexcept;
std::string_view to_string(NodeOrigin o) noexcept;

void to_json(nlohmann::json& j, const InformationNode& n);
void from_json(const nlohmann::json& j, InformationNode& n);
void to_json(nlohmann::json& j, const RefineAction& a);
void from_json(const nlohmann::json& j, RefineAction& a);
void to_json(nlohmann::json& j, const CandidateNode& c);

}  // namespace tracealign
