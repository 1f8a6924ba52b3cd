#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracealign/config.hpp"
#include "tracealign/embedding.hpp"
#include "tracealign/trace_model.hpp"

namespace tracealign {

struct OrchestratorMessage {
  std::string run_id;
  std::int64_t source_step = 0;
  std::string content;
  Embedding embedding;
};

struct Segment {
  std::string run_id;
  std::size_t index = 0;    // position among this run's segments
  Interval message_range;   // over the run's orchestrator messages
  Interval step_range;      // over underlying source steps
  std::string text;         // member contents joined by '\n'
  Embedding centroid;
  friend bool operator==(const Segment& a, const Segment& b) {
    return a.run_id == b.run_id && a.index == b.index && a.message_range == b.message_range &&
           a.step_range == b.step_range && a.text == b.text && a.centroid.size() == b.centroid.size() &&
           a.centroid == b.centroid;
  }
};

// Identity of a segment across the session.
struct SegmentRef {
  std::string run_id;
  std::size_t index = 0;
  std::string key() const { return run_id + "#" + std::to_string(index); }
  friend auto operator<=>(const SegmentRef&, const SegmentRef&) = default;
};

using SegmentsByRun = std::map<std::string, std::vector<Segment>>;

// Orchestrator entries with role instruction or system, in step order, embedded.
std::vector<OrchestratorMessage> extract_orchestrator_trace(const Run& run,
                                                            const EmbeddingProvider& provider);

// Positions i such that a boundary falls between element i and i+1: sims(i) < threshold.
template <typename Derived>
std::vector<Eigen::Index> boundary_positions(const Eigen::MatrixBase<Derived>& adjacent_sims,
                                             typename Derived::Scalar threshold) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < adjacent_sims.size(); ++i)
    if (adjacent_sims(i) < threshold) out.push_back(i);
  return out;
}

std::vector<Segment> segment(const std::vector<OrchestratorMessage>& messages,
                             const AnalysisConfig& config);

SegmentsByRun segment_bundle(const TaskBundle& bundle, const EmbeddingProvider& provider,
                             const AnalysisConfig& config);

const Segment* find_segment(const SegmentsByRun& segments, const SegmentRef& ref);

void to_json(nlohmann::json& j, const Segment& s);
void from_json(const nlohmann::json& j, Segment& s);
void to_json(nlohmann::json& j, const SegmentRef& r);
void from_json(const nlohmann::json& j, SegmentRef& r);

}  // namespace tracealign
