#include "tracealign/node_evaluation.hpp"

#include <algorithm>
#include <future>
#include <mutex>
#include <sstream>

#include "tracealign/errors.hpp"
#include "tracealign/text.hpp"

namespace tracealign {

std::string_view to_string(NodeRunStatus s) noexcept {
  switch (s) {
    case NodeRunStatus::Completed: return "Completed";
    case NodeRunStatus::Recovered: return "Recovered";
    case NodeRunStatus::Failed: return "Failed";
    case NodeRunStatus::NotReached: return "NotReached";
  }
  return "NotReached";
}

NodeRunStatus status_from_string(std::string_view s) {
  if (s == "Completed") return NodeRunStatus::Completed;
  if (s == "Recovered") return NodeRunStatus::Recovered;
  if (s == "Failed") return NodeRunStatus::Failed;
  if (s == "NotReached") return NodeRunStatus::NotReached;
  throw DataError("unknown status '" + std::string(s) + "'");
}

std::optional<std::int64_t> NodeJudgment::first_evidence_step() const {
  if (evidence.empty()) return std::nullopt;
  return std::min_element(evidence.begin(), evidence.end())->from;
}

std::optional<std::int64_t> NodeJudgment::last_evidence_step() const {
  if (evidence.empty()) return std::nullopt;
  std::int64_t last = evidence.front().to;
  for (const auto& iv : evidence) last = std::max(last, iv.to);
  return last;
}

JudgmentMatrix::JudgmentMatrix(std::vector<std::string> run_ids, std::vector<std::string> node_ids)
    : runs_(std::move(run_ids)), nodes_(std::move(node_ids)) {
  std::sort(runs_.begin(), runs_.end());
}

void JudgmentMatrix::set(NodeJudgment j) {
  auto key = std::make_pair(j.run_id, j.node_id);
  cells_[std::move(key)] = std::move(j);
}

const NodeJudgment* JudgmentMatrix::find(const std::string& run_id, const std::string& node_id) const {
  auto it = cells_.find({run_id, node_id});
  return it == cells_.end() ? nullptr : &it->second;
}

const NodeJudgment& JudgmentMatrix::at(const std::string& run_id, const std::string& node_id) const {
  if (const auto* j = find(run_id, node_id)) return *j;
  throw DataError("no judgment for run '" + run_id + "', node '" + node_id + "'");
}

namespace {

struct SegmentVerdict {
  Interval steps;
  bool failure = false;
  bool success = false;
};

bool any_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrases) {
  return std::any_of(phrases.begin(), phrases.end(), [&](const std::string& p) { return text::contains_phrase(tokens, p); });
}

std::string render_run_log(const Run& run) {
  std::ostringstream out;
  for (const auto& e : run.entries) out << e.step_index << ": " << e.agent_name << ": " << e.content << '\n';
  return out.str();
}

// Throws GatewayError(SchemaInvalid) when the judge's answer breaks the judgment invariants.
NodeJudgment judgment_from_gateway(const nlohmann::json& v, const Run& run, const InformationNode& node) {
  NodeJudgment j;
  j.run_id = run.run_id;
  j.node_id = node.id;
  j.status = status_from_string(v.at("status").get<std::string>());
  j.confidence = v.at("confidence").get<double>();
  j.rationale = v.at("rationale").get<std::string>();
  for (const auto& iv : v.at("evidence")) {
    Interval i{iv.at(0).get<std::int64_t>(), iv.at(1).get<std::int64_t>()};
    if (i.from > i.to || i.from < run.first_step() || i.to > run.last_step())
      throw GatewayError(GatewayErrorKind::SchemaInvalid, "evidence interval outside the run's steps");
    j.evidence.push_back(i);
  }
  std::sort(j.evidence.begin(), j.evidence.end());
  if (j.status == NodeRunStatus::NotReached) j.evidence.clear();
  if (j.status == NodeRunStatus::Recovered && j.evidence.size() < 2)
    throw GatewayError(GatewayErrorKind::SchemaInvalid, "Recovered needs failure and success evidence");
  return j;
}

}  // namespace

NodeJudgment rule_based_judgment(const Run& run, const InformationNode& node, const SegmentsByRun& segments,
                                 const AnalysisConfig& config) {
  const auto keywords = text::content_tokens(node.title);
  if (keywords.empty()) throw DataError("node '" + node.id + "' title has no keyword tokens");

  std::vector<const Segment*> members;
  for (const auto& m : node.members)
    if (m.run_id == run.run_id)
      if (const auto* s = find_segment(segments, m)) members.push_back(s);
  std::sort(members.begin(), members.end(),
            [](const Segment* a, const Segment* b) { return a->step_range < b->step_range; });

  NodeJudgment j;
  j.run_id = run.run_id;
  j.node_id = node.id;
  j.passes = 1;
  if (members.empty()) {
    j.status = NodeRunStatus::NotReached;
    j.confidence = 1.0;
    j.rationale = "rule-based: no member segments in this run";
    return j;
  }

  std::vector<SegmentVerdict> verdicts;
  for (const auto* s : members) {
    const auto tokens = text::tokenize(s->text);
    SegmentVerdict v{s->step_range};
    v.failure = any_phrase(tokens, config.failure_markers);
    v.success = !v.failure && (any_phrase(tokens, config.success_markers) || any_phrase(tokens, keywords));
    verdicts.push_back(v);
    j.evidence.push_back(s->step_range);
  }

  std::optional<std::size_t> first_failure, last_failure, last_success;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (verdicts[i].failure) {
      if (!first_failure) first_failure = i;
      last_failure = i;
    }
    if (verdicts[i].success) last_success = i;
  }

  j.confidence = 0.5;
  if (!first_failure && last_success) {
    j.status = NodeRunStatus::Completed;
    j.rationale = "rule-based: keyword match without failure markers";
  } else if (first_failure && last_success && *last_success > *last_failure) {
    j.status = NodeRunStatus::Recovered;
    j.rationale = "rule-based: failure marker followed by later success";
  } else if (first_failure) {
    j.status = NodeRunStatus::Failed;
    j.rationale = "rule-based: failure marker with no later success";
  } else {
    j.status = NodeRunStatus::Failed;
    j.rationale = "rule-based: attempts without completion evidence";
  }
  return j;
}

NodeJudgment evaluate_node(const Run& run, const InformationNode& node, const EvaluationContext& ctx,
                           const SegmentsByRun& segments, const AnalysisConfig& config, const Gateway* gateway) {
  if (node.state != NodeState::Confirmed) throw DataError("node '" + node.id + "' is not confirmed");
  nlohmann::json prior = nlohmann::json::array();
  if (ctx.graph) {
    for (const auto& pred : ctx.graph->predecessors(node.id)) {
      if (!ctx.prior || !ctx.prior->contains(pred))
        throw DataError("missing judgment of predecessor '" + pred + "' for node '" + node.id + "' in run '" +
                        run.run_id + "'");
    }
  }
  if (ctx.prior)
    for (const auto& [id, pj] : *ctx.prior) prior.push_back({{"node_id", id}, {"status", to_string(pj.status)}});

  if (gateway) {
    nlohmann::json deps = nlohmann::json::array();
    if (ctx.graph)
      for (const auto& e : ctx.graph->edges()) deps.push_back({{"from", e.from}, {"to", e.to}});
    nlohmann::json bindings = {{"task_description", ctx.task_description},
                               {"run_id", run.run_id},
                               {"node", {{"id", node.id}, {"title", node.title}, {"description", node.description}}},
                               {"dependencies", deps},
                               {"prior_judgments", prior},
                               {"run_log", render_run_log(run)}};
    try {
      std::vector<NodeJudgment> passes;
      for (int p = 0; p < config.voting_m; ++p) {
        bindings["pass"] = p;
        passes.push_back(judgment_from_gateway(gateway->complete(templates::kNodeJudgment, bindings).value, run, node));
      }
      // Plurality vote; ties go to the status seen first.
      std::map<NodeRunStatus, int> votes;
      for (const auto& pj : passes) ++votes[pj.status];
      NodeRunStatus winner = passes.front().status;
      for (const auto& pj : passes)
        if (votes[pj.status] > votes[winner]) winner = pj.status;
      NodeJudgment out;
      double conf = 0.0;
      int agreeing = 0;
      for (const auto& pj : passes) {
        if (pj.status != winner) continue;
        if (agreeing == 0) out = pj;
        conf += pj.confidence;
        ++agreeing;
      }
      out.confidence = conf / agreeing;
      out.passes = config.voting_m;
      return out;
    } catch (const GatewayError&) {
    }
  }
  return rule_based_judgment(run, node, segments, config);
}

JudgmentMatrix evaluate_all(const TaskBundle& bundle, const std::vector<const InformationNode*>& confirmed,
                            const DependencyGraph& graph, const SegmentsByRun& segments,
                            const AnalysisConfig& config, const Gateway* gateway, const ProgressFn& progress) {
  if (confirmed.empty()) throw DataError("evaluation needs a non-empty confirmed node set");

  std::set<std::string> ids;
  std::map<std::string, const InformationNode*> by_id;
  for (const auto* n : confirmed) {
    ids.insert(n->id);
    by_id[n->id] = n;
  }
  DependencyGraph g = graph;
  if (g.node_ids() != ids) g.set_nodes(ids);
  const auto order = g.topological_order();

  std::vector<std::string> run_ids;
  for (const auto& r : bundle.runs) run_ids.push_back(r.run_id);
  JudgmentMatrix matrix(run_ids, order);

  const std::size_t total = bundle.runs.size() * order.size();
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;

  auto judge_run = [&](const Run& run) {
    std::map<std::string, NodeJudgment> prior;
    for (const auto& id : order) {
      NodeJudgment j;
      try {
        EvaluationContext ctx{bundle.task_description, &prior, &g};
        j = evaluate_node(run, *by_id.at(id), ctx, segments, config, gateway);
      } catch (const std::exception& e) {
        j = NodeJudgment{run.run_id, id, NodeRunStatus::NotReached, 0.0, {}, std::string("evaluation-error: ") + e.what(), 1};
      }
      prior[id] = j;
      const auto n = ++done;
      if (progress) {
        std::lock_guard lock(progress_mu);
        progress(n, total);
      }
    }
    return prior;
  };

  std::vector<std::future<std::map<std::string, NodeJudgment>>> futures;
  for (const auto& run : bundle.runs) futures.push_back(std::async(std::launch::async, judge_run, std::cref(run)));
  for (auto& f : futures)
    for (auto& [id, j] : f.get()) matrix.set(std::move(j));
  return matrix;
}

void to_json(nlohmann::json& j, const NodeJudgment& n) {
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& iv : n.evidence) ev.push_back({iv.from, iv.to});
  j = nlohmann::json{{"run_id", n.run_id},     {"node_id", n.node_id},     {"status", to_string(n.status)},
                     {"confidence", n.confidence}, {"evidence", ev}, {"rationale", n.rationale},
                     {"passes", n.passes}};
}

void from_json(const nlohmann::json& j, NodeJudgment& n) {
  n.run_id = j.at("run_id").get<std::string>();
  n.node_id = j.at("node_id").get<std::string>();
  n.status = status_from_string(j.at("status").get<std::string>());
  n.confidence = j.at("confidence").get<double>();
  n.evidence.clear();
  for (const auto& iv : j.at("evidence")) n.evidence.push_back({iv.at(0).get<std::int64_t>(), iv.at(1).get<std::int64_t>()});
  n.rationale = j.at("rationale").get<std::string>();
  n.passes = j.at("passes").get<int>();
}

void to_json(nlohmann::json& j, const JudgmentMatrix& m) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [key, cell] : m.cells_) cells.push_back(cell);
  j = nlohmann::json{{"run_ids", m.runs_}, {"node_ids", m.nodes_}, {"cells", cells}};
}

void from_json(const nlohmann::json& j, JudgmentMatrix& m) {
  m = JudgmentMatrix(j.at("run_ids").get<std::vector<std::string>>(), j.at("node_ids").get<std::vector<std::string>>());
  for (const auto& c : j.at("cells")) m.set(c.get<NodeJudgment>());
}

}  // namespace tracealign
