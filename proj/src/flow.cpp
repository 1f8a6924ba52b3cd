#include "tracealign/flow.hpp"

#include <algorithm>
#include <set>

namespace tracealign {

std::string_view to_string(LinkOutcome o) noexcept {
  switch (o) {
    case LinkOutcome::Success: return "success";
    case LinkOutcome::Failure: return "failure";
    case LinkOutcome::Recovered: return "recovered";
  }
  return "success";
}

LinkOutcome link_outcome_from_string(std::string_view s) {
  if (s == "success") return LinkOutcome::Success;
  if (s == "failure") return LinkOutcome::Failure;
  if (s == "recovered") return LinkOutcome::Recovered;
  throw DataError("unknown link outcome '" + std::string(s) + "'");
}

std::string TransitionLink::id() const { return transition_id() + "#" + std::string(to_string(outcome)); }

const TransitionLink* SankeyModel::find_link(std::string_view id) const {
  for (const auto& l : links)
    if (l.id() == id) return &l;
  return nullptr;
}

std::vector<const TransitionLink*> SankeyModel::select(std::string_view id) const {
  std::vector<const TransitionLink*> out;
  for (const auto& l : links)
    if (l.id() == id || l.transition_id() == id) out.push_back(&l);
  return out;
}

namespace {

LinkOutcome outcome_for(NodeRunStatus s) {
  switch (s) {
    case NodeRunStatus::Completed: return LinkOutcome::Success;
    case NodeRunStatus::Recovered: return LinkOutcome::Recovered;
    default: return LinkOutcome::Failure;
  }
}

}  // namespace

SankeyModel build_flow(const JudgmentMatrix& matrix, const DependencyGraph& graph) {
  if (matrix.empty()) throw DataError("cannot build a flow from an empty judgment matrix");

  const std::set<std::string> node_set(matrix.node_ids().begin(), matrix.node_ids().end());
  DependencyGraph g = graph;
  g.set_nodes(node_set);
  const auto topo = g.topological_order();
  std::map<std::string, std::size_t> topo_index;
  for (std::size_t i = 0; i < topo.size(); ++i) topo_index[topo[i]] = i;
  const auto edges = g.edges();

  SankeyModel model;
  model.columns.emplace_back(kStartNode);
  model.columns.insert(model.columns.end(), topo.begin(), topo.end());
  model.columns.emplace_back(kEndNode);
  for (const auto& id : topo) model.tallies[id];

  struct Key {
    std::string source, target;
    LinkOutcome outcome;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, TransitionLink> aggregated;

  for (const auto& run_id : matrix.run_ids()) {
    std::vector<const NodeJudgment*> reached;
    for (const auto& node_id : topo) {
      const auto& j = matrix.at(run_id, node_id);
      auto& t = model.tallies[node_id];
      switch (j.status) {
        case NodeRunStatus::Completed: ++t.completed; break;
        case NodeRunStatus::Recovered: ++t.recovered; break;
        case NodeRunStatus::Failed: ++t.failed; break;
        case NodeRunStatus::NotReached: ++t.not_reached; break;
      }
      if (j.reached()) reached.push_back(&j);
    }
    std::stable_sort(reached.begin(), reached.end(), [&](const NodeJudgment* a, const NodeJudgment* b) {
      auto fa = a->first_evidence_step(), fb = b->first_evidence_step();
      if (fa.has_value() != fb.has_value()) return fa.has_value();
      if (fa && *fa != *fb) return *fa < *fb;
      return topo_index[a->node_id] < topo_index[b->node_id];
    });

    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < reached.size(); ++i) pos[reached[i]->node_id] = i;
    // Nodes this run reached before one of their prerequisites.
    std::set<std::string> early;
    for (const auto& e : edges) {
      auto pf = pos.find(e.from), pt = pos.find(e.to);
      if (pf != pos.end() && pt != pos.end() && pt->second < pf->second) early.insert(e.to);
    }

    auto& path = model.paths[run_id];
    path.emplace_back(kStartNode);
    auto add_link = [&](const std::string& src, const std::string& dst, LinkOutcome outcome, bool violates) {
      auto& link = aggregated[{src, dst, outcome}];
      link.source = src;
      link.target = dst;
      link.outcome = outcome;
      link.run_ids.push_back(run_id);
      link.violates_dependencies = link.violates_dependencies || violates;
    };
    std::string prev(kStartNode);
    for (const auto* j : reached) {
      add_link(prev, j->node_id, outcome_for(j->status), early.contains(j->node_id));
      path.push_back(j->node_id);
      prev = j->node_id;
    }
    if (!reached.empty() && reached.back()->status != NodeRunStatus::Failed) {
      add_link(prev, std::string(kEndNode), LinkOutcome::Success, false);
      path.emplace_back(kEndNode);
    }
  }

  for (auto& [key, link] : aggregated) {
    std::sort(link.run_ids.begin(), link.run_ids.end());
    model.links.push_back(std::move(link));
  }
  std::sort(model.links.begin(), model.links.end(),
            [](const TransitionLink& a, const TransitionLink& b) { return a.id() < b.id(); });
  return model;
}

std::vector<PathStat> path_stats(const SankeyModel& model) {
  std::map<std::vector<std::string>, PathStat> by_path;
  for (const auto& [run_id, path] : model.paths) {
    auto& s = by_path[path];
    s.path = path;
    ++s.frequency;
    s.run_ids.push_back(run_id);
  }
  std::vector<PathStat> out;
  for (auto& [path, s] : by_path) {
    for (std::size_t i = 0; i < path.size(); ++i) s.signature += (i ? ">" : "") + path[i];
    out.push_back(std::move(s));
  }
  const bool several = out.size() >= 2;
  for (auto& s : out) s.flagged_rare = several && s.frequency == 1;
  std::sort(out.begin(), out.end(), [](const PathStat& a, const PathStat& b) {
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return a.signature < b.signature;
  });
  return out;
}

void to_json(nlohmann::json& j, const TransitionLink& l) {
  j = nlohmann::json{{"id", l.id()},
                     {"transition_id", l.transition_id()},
                     {"source", l.source},
                     {"target", l.target},
                     {"outcome", to_string(l.outcome)},
                     {"weight", l.weight()},
                     {"run_ids", l.run_ids},
                     {"violates_dependencies", l.violates_dependencies}};
}

void from_json(const nlohmann::json& j, TransitionLink& l) {
  l.source = j.at("source").get<std::string>();
  l.target = j.at("target").get<std::string>();
  l.outcome = link_outcome_from_string(j.at("outcome").get<std::string>());
  l.run_ids = j.at("run_ids").get<std::vector<std::string>>();
  l.violates_dependencies = j.at("violates_dependencies").get<bool>();
}

void to_json(nlohmann::json& j, const SankeyModel& m) {
  nlohmann::json tallies = nlohmann::json::object();
  for (const auto& [id, t] : m.tallies)
    tallies[id] = {{"Completed", t.completed}, {"Recovered", t.recovered}, {"Failed", t.failed}, {"NotReached", t.not_reached}};
  j = nlohmann::json{{"columns", m.columns}, {"links", m.links}, {"tallies", tallies}, {"paths", m.paths}};
}

void from_json(const nlohmann::json& j, SankeyModel& m) {
  m.columns = j.at("columns").get<std::vector<std::string>>();
  m.links = j.at("links").get<std::vector<TransitionLink>>();
  m.tallies.clear();
  for (const auto& [id, t] : j.at("tallies").items())
    m.tallies[id] = {t.at("Completed").get<std::size_t>(), t.at("Recovered").get<std::size_t>(),
                     t.at("Failed").get<std::size_t>(), t.at("NotReached").get<std::size_t>()};
  m.paths = j.at("paths").get<std::map<std::string, std::vector<std::string>>>();
}

void to_json(nlohmann::json& j, const PathStat& p) {
  j = nlohmann::json{{"signature", p.signature},
                     {"path", p.path},
                     {"frequency", p.frequency},
                     {"run_ids", p.run_ids},
                     {"flagged_rare", p.flagged_rare}};
}

}  // namespace tracealign
