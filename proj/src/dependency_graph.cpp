#include "tracealign/dependency_graph.hpp"

#include <algorithm>
#include <queue>

namespace tracealign {

std::string_view to_string(EdgeOrigin o) noexcept {
  switch (o) {
    case EdgeOrigin::Inferred: return "inferred";
    case EdgeOrigin::Manual: return "manual";
    case EdgeOrigin::Imported: return "imported";
  }
  return "manual";
}

EdgeOrigin edge_origin_from_string(std::string_view s) {
  if (s == "inferred") return EdgeOrigin::Inferred;
  if (s == "manual") return EdgeOrigin::Manual;
  if (s == "imported") return EdgeOrigin::Imported;
  throw DataError("unknown edge origin '" + std::string(s) + "'");
}

std::vector<DependencyEdge> DependencyGraph::edges() const {
  std::vector<DependencyEdge> out;
  for (const auto& [key, origin] : edges_) out.push_back({key.first, key.second, origin});
  return out;
}

void DependencyGraph::set_nodes(std::set<std::string> node_ids) {
  nodes_ = std::move(node_ids);
  std::erase_if(edges_, [&](const auto& kv) {
    return !nodes_.contains(kv.first.first) || !nodes_.contains(kv.first.second);
  });
}

void DependencyGraph::require_node(const std::string& id) const {
  if (!nodes_.contains(id)) throw DataError("unknown node id '" + id + "' in dependency graph");
}

bool DependencyGraph::reaches(const std::string& from, const std::string& to) const {
  std::vector<std::string> stack{from};
  std::set<std::string> seen{from};
  while (!stack.empty()) {
    auto cur = std::move(stack.back());
    stack.pop_back();
    if (cur == to) return true;
    for (auto it = edges_.lower_bound({cur, std::string()}); it != edges_.end() && it->first.first == cur; ++it)
      if (seen.insert(it->first.second).second) stack.push_back(it->first.second);
  }
  return false;
}

void DependencyGraph::add_edge(const std::string& from, const std::string& to, EdgeOrigin origin) {
  require_node(from);
  require_node(to);
  if (from == to) throw CycleError("self-edge on '" + from + "' rejected");
  if (reaches(to, from)) throw CycleError("edge " + from + " -> " + to + " would close a cycle");
  edges_[{from, to}] = origin;
}

bool DependencyGraph::remove_edge(const std::string& from, const std::string& to) {
  require_node(from);
  require_node(to);
  return edges_.erase({from, to}) > 0;
}

std::vector<std::string> DependencyGraph::predecessors(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& [key, origin] : edges_)
    if (key.second == id) out.push_back(key.first);
  return out;
}

std::vector<std::string> DependencyGraph::topological_order() const {
  std::map<std::string, int> indegree;
  for (const auto& id : nodes_) indegree[id] = 0;
  for (const auto& [key, origin] : edges_) ++indegree[key.second];
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, deg] : indegree)
    if (deg == 0) ready.push(id);
  std::vector<std::string> out;
  while (!ready.empty()) {
    auto cur = ready.top();
    ready.pop();
    out.push_back(cur);
    for (auto it = edges_.lower_bound({cur, std::string()}); it != edges_.end() && it->first.first == cur; ++it)
      if (--indegree[it->first.second] == 0) ready.push(it->first.second);
  }
  if (out.size() != nodes_.size()) throw CycleError("dependency graph contains a cycle");
  return out;
}

void to_json(nlohmann::json& j, const DependencyGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges()) edges.push_back({{"from", e.from}, {"to", e.to}, {"origin", to_string(e.origin)}});
  j = nlohmann::json{{"node_ids", g.nodes_}, {"edges", edges}};
}

void from_json(const nlohmann::json& j, DependencyGraph& g) {
  DependencyGraph tmp(j.at("node_ids").get<std::set<std::string>>());
  for (const auto& e : j.at("edges"))
    tmp.add_edge(e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                 edge_origin_from_string(e.value("origin", std::string("manual"))));
  g = std::move(tmp);
}

DependencyProposal chain_by_median_first_step(const std::vector<const InformationNode*>& confirmed,
                                              const SegmentsByRun& segments) {
  struct Keyed {
    std::string id;
    bool has_evidence = false;
    double median = 0.0;
  };
  std::vector<Keyed> keyed;
  for (const auto* n : confirmed) {
    std::map<std::string, std::int64_t> first_by_run;
    for (const auto& m : n->members) {
      const Segment* s = find_segment(segments, m);
      if (!s) continue;
      auto [it, inserted] = first_by_run.emplace(m.run_id, s->step_range.from);
      if (!inserted) it->second = std::min(it->second, s->step_range.from);
    }
    Keyed k{n->id};
    if (!first_by_run.empty()) {
      std::vector<std::int64_t> firsts;
      for (const auto& [run, step] : first_by_run) firsts.push_back(step);
      std::sort(firsts.begin(), firsts.end());
      const auto sz = firsts.size();
      k.median = sz % 2 ? static_cast<double>(firsts[sz / 2])
                        : (static_cast<double>(firsts[sz / 2 - 1]) + static_cast<double>(firsts[sz / 2])) / 2.0;
      k.has_evidence = true;
    }
    keyed.push_back(std::move(k));
  }
  if (!confirmed.empty() && std::none_of(keyed.begin(), keyed.end(), [](const Keyed& k) { return k.has_evidence; }))
    throw DataError("cannot infer dependencies: no confirmed node has evidence in any run");
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.has_evidence != b.has_evidence) return a.has_evidence;
    if (a.median != b.median) return a.median < b.median;
    return a.id < b.id;
  });
  DependencyProposal p;
  p.from_fallback = true;
  for (std::size_t i = 1; i < keyed.size(); ++i) p.edges.push_back({keyed[i - 1].id, keyed[i].id, EdgeOrigin::Inferred});
  return p;
}

DependencyProposal infer_dependencies(const std::string& task_description,
                                      const std::vector<const InformationNode*>& confirmed,
                                      const SegmentsByRun& segments, const Gateway* gateway) {
  if (confirmed.empty()) throw DataError("dependency inference needs at least one confirmed node");
  if (confirmed.size() == 1) return {};

  if (gateway) {
    nlohmann::json nodes = nlohmann::json::array();
    std::set<std::string> ids;
    for (const auto* n : confirmed) {
      nodes.push_back({{"id", n->id}, {"title", n->title}, {"description", n->description}});
      ids.insert(n->id);
    }
    try {
      auto c = gateway->complete(templates::kDependencyInference,
                                 {{"task_description", task_description}, {"nodes", nodes}});
      DependencyProposal p;
      DependencyGraph scratch(ids);
      for (const auto& e : c.value.at("edges")) {
        const auto from = e.at("from").get<std::string>();
        const auto to = e.at("to").get<std::string>();
        if (!ids.contains(from) || !ids.contains(to)) {
          p.warnings.push_back("dropped " + from + " -> " + to + ": unknown node id");
          continue;
        }
        try {
          scratch.add_edge(from, to, EdgeOrigin::Inferred);
          p.edges.push_back({from, to, EdgeOrigin::Inferred});
        } catch (const CycleError&) {
          p.warnings.push_back("dropped " + from + " -> " + to + ": would create a cycle");
        }
      }
      return p;
    } catch (const GatewayError&) {
    }
  }
  return chain_by_median_first_step(confirmed, segments);
}

DependencyGraph import_flow(const nlohmann::json& flow, const std::vector<const InformationNode*>& confirmed) {
  if (!flow.is_object() || !flow.contains("edges") || !flow["edges"].is_array())
    throw DataError("flow file must be an object with an 'edges' array");

  std::map<std::string, std::string> file_titles;  // file-local id -> title
  if (auto it = flow.find("nodes"); it != flow.end()) {
    for (const auto& n : *it)
      if (n.contains("id") && n.contains("title"))
        file_titles[n["id"].get<std::string>()] = n["title"].get<std::string>();
  }
  std::set<std::string> ids;
  std::map<std::string, std::vector<std::string>> by_title;
  for (const auto* n : confirmed) {
    ids.insert(n->id);
    by_title[n->title].push_back(n->id);
  }
  auto resolve_title = [&](const std::string& title) -> std::optional<std::string> {
    auto it = by_title.find(title);
    if (it == by_title.end()) return std::nullopt;
    if (it->second.size() > 1) throw DataError("ambiguous node title '" + title + "' in flow file");
    return it->second.front();
  };
  auto resolve = [&](const std::string& ref) -> std::string {
    if (auto ft = file_titles.find(ref); ft != file_titles.end()) {
      if (auto id = resolve_title(ft->second)) return *id;
      if (ids.contains(ft->second)) return ft->second;
    }
    if (ids.contains(ref)) return ref;
    if (auto id = resolve_title(ref)) return *id;
    throw DataError("unresolved node reference '" + ref + "' in flow file");
  };

  DependencyGraph g(ids);
  for (const auto& e : flow["edges"]) {
    if (!e.is_object() || !e.contains("from") || !e.contains("to")) throw DataError("flow edge needs 'from' and 'to'");
    g.add_edge(resolve(e["from"].get<std::string>()), resolve(e["to"].get<std::string>()), EdgeOrigin::Imported);
  }
  return g;
}

nlohmann::json export_flow(const DependencyGraph& graph, const std::vector<const InformationNode*>& confirmed) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto* n : confirmed) nodes.push_back({{"id", n->id}, {"title", n->title}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : graph.edges()) edges.push_back({{"from", e.from}, {"to", e.to}});
  return {{"nodes", nodes}, {"edges", edges}};
}

}  // namespace tracealign
