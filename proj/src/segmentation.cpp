#include "tracealign/segmentation.hpp"

namespace tracealign {

std::vector<OrchestratorMessage> extract_orchestrator_trace(const Run& run,
                                                            const EmbeddingProvider& provider) {
  std::vector<OrchestratorMessage> out;
  for (const auto& e : run.entries) {
    if (e.agent_kind != AgentKind::Orchestrator) continue;
    if (e.role != Role::Instruction && e.role != Role::System) continue;
    out.push_back({run.run_id, e.step_index, e.content, provider.embed(e.content)});
  }
  return out;
}

std::vector<Segment> segment(const std::vector<OrchestratorMessage>& messages,
                             const AnalysisConfig& config) {
  std::vector<Segment> out;
  if (messages.empty()) return out;

  const auto n = static_cast<Eigen::Index>(messages.size());
  EmbeddingMatrix cols(messages.front().embedding.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) cols.col(i) = messages[static_cast<std::size_t>(i)].embedding;

  const Embedding sims = adjacent_similarities(cols);
  std::vector<Eigen::Index> cuts = boundary_positions(sims, config.theta_seg);
  cuts.push_back(n - 1);

  Eigen::Index begin = 0;
  for (Eigen::Index end : cuts) {
    Segment s;
    s.run_id = messages.front().run_id;
    s.index = out.size();
    s.message_range = {begin, end};
    s.step_range = {messages[static_cast<std::size_t>(begin)].source_step,
                    messages[static_cast<std::size_t>(end)].source_step};
    for (Eigen::Index i = begin; i <= end; ++i) {
      if (i > begin) s.text += '\n';
      s.text += messages[static_cast<std::size_t>(i)].content;
    }
    s.centroid = normalized_mean(cols.middleCols(begin, end - begin + 1));
    out.push_back(std::move(s));
    begin = end + 1;
  }
  return out;
}

SegmentsByRun segment_bundle(const TaskBundle& bundle, const EmbeddingProvider& provider,
                             const AnalysisConfig& config) {
  SegmentsByRun out;
  for (const auto& run : bundle.runs)
    out[run.run_id] = segment(extract_orchestrator_trace(run, provider), config);
  return out;
}

const Segment* find_segment(const SegmentsByRun& segments, const SegmentRef& ref) {
  auto it = segments.find(ref.run_id);
  if (it == segments.end() || ref.index >= it->second.size()) return nullptr;
  return &it->second[ref.index];
}

void to_json(nlohmann::json& j, const Segment& s) {
  j = nlohmann::json{{"run_id", s.run_id},
                     {"index", s.index},
                     {"message_range", {s.message_range.from, s.message_range.to}},
                     {"step_range", {s.step_range.from, s.step_range.to}},
                     {"text", s.text},
                     {"centroid", std::vector<double>(s.centroid.data(), s.centroid.data() + s.centroid.size())}};
}

void from_json(const nlohmann::json& j, Segment& s) {
  s.run_id = j.at("run_id").get<std::string>();
  s.index = j.at("index").get<std::size_t>();
  s.message_range = {j.at("message_range").at(0).get<std::int64_t>(), j.at("message_range").at(1).get<std::int64_t>()};
  s.step_range = {j.at("step_range").at(0).get<std::int64_t>(), j.at("step_range").at(1).get<std::int64_t>()};
  s.text = j.at("text").get<std::string>();
  auto c = j.at("centroid").get<std::vector<double>>();
  s.centroid = Eigen::Map<const Embedding>(c.data(), static_cast<Eigen::Index>(c.size()));
}

void to_json(nlohmann::json& j, const SegmentRef& r) { j = nlohmann::json{{"run_id", r.run_id}, {"index", r.index}}; }

void from_json(const nlohmann::json& j, SegmentRef& r) {
  r.run_id = j.at("run_id").get<std::string>();
  r.index = j.at("index").get<std::size_t>();
}

}  // namespace tracealign
