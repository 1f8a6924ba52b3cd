#include "tracealign/node_pipeline.hpp"

#include <algorithm>
#include <map>

#include "tracealign/errors.hpp"
#include "tracealign/text.hpp"

namespace tracealign {

Grouping greedy_groups(std::span<const std::size_t> order,
                       const std::function<double(std::size_t, std::size_t)>& similarity,
                       double threshold) {
  Grouping out;
  for (std::size_t item : order) {
    bool attached = false;
    for (std::size_t g = 0; g < out.groups.size(); ++g) {
      const double s = similarity(item, out.groups[g].front());
      if (s >= threshold) {
        out.groups[g].push_back(item);
        out.attaches.push_back({item, g, s});
        attached = true;
        break;
      }
    }
    if (!attached) out.groups.push_back({item});
  }
  return out;
}

std::size_t distinct_runs(const std::vector<SegmentRef>& members) {
  std::set<std::string_view> runs;
  for (const auto& m : members) runs.insert(m.run_id);
  return runs.size();
}

std::size_t CandidateNode::support() const { return distinct_runs(members); }

std::string extractive_summary(const Segment& segment, const EmbeddingProvider& embedder) {
  auto sentences = text::split_sentences(segment.text);
  if (sentences.empty()) throw DataError("segment " + segment.run_id + "#" + std::to_string(segment.index) + " has empty text");
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const double s = cosine(embedder.embed(sentences[i]), segment.centroid);
    if (s > best_sim) {
      best_sim = s;
      best = i;
    }
  }
  if (best == 0 || sentences[best] == sentences[0]) return sentences[0];
  return sentences[0] + " " + sentences[best];
}

std::string summarize_segment(const Segment& segment, const EmbeddingProvider& embedder, const Gateway* gateway) {
  if (text::trim(segment.text).empty())
    throw DataError("segment " + segment.run_id + "#" + std::to_string(segment.index) + " has empty text");
  if (gateway) {
    try {
      auto c = gateway->complete(templates::kSegmentSummary, {{"segment_text", segment.text}});
      return c.value.at("summary").get<std::string>();
    } catch (const GatewayError&) {
    }
  }
  return extractive_summary(segment, embedder);
}

namespace {

bool candidate_before(const CandidateNode& a, const CandidateNode& b) {
  const auto sa = a.support(), sb = b.support();
  if (sa != sb) return sa > sb;
  if (a.earliest_step != b.earliest_step) return a.earliest_step < b.earliest_step;
  return a.id < b.id;
}

}  // namespace

std::vector<CandidateNode> consolidate(std::vector<CandidateNode> candidates, const AnalysisConfig& config) {
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return candidate_before(candidates[a], candidates[b]); });

  auto grouping = greedy_groups(
      order,
      [&](std::size_t i, std::size_t j) { return cosine(candidates[i].summary_embedding, candidates[j].summary_embedding); },
      config.theta_merge);

  std::vector<CandidateNode> out;
  out.reserve(grouping.groups.size());
  for (const auto& group : grouping.groups) {
    CandidateNode merged = candidates[group.front()];
    std::set<SegmentRef> seen(merged.members.begin(), merged.members.end());
    for (std::size_t k = 1; k < group.size(); ++k) {
      const auto& c = candidates[group[k]];
      for (const auto& m : c.members)
        if (seen.insert(m).second) merged.members.push_back(m);
      merged.earliest_step = std::min(merged.earliest_step, c.earliest_step);
    }
    out.push_back(std::move(merged));
  }
  return out;
}

std::vector<CandidateNode> extract_candidates(const SegmentsByRun& segments, const AnalysisConfig& config,
                                              const EmbeddingProvider& embedder, const Gateway* gateway,
                                              const std::set<SegmentRef>& exclude) {
  std::vector<CandidateNode> raw;
  for (const auto& [run_id, segs] : segments) {
    for (const auto& s : segs) {
      SegmentRef ref{run_id, s.index};
      if (exclude.contains(ref)) continue;
      if (text::trim(s.text).empty()) continue;
      CandidateNode c;
      c.id = ref.key();
      c.summary = summarize_segment(s, embedder, gateway);
      c.summary_embedding = embedder.embed(c.summary);
      c.members = {ref};
      c.earliest_step = s.step_range.from;
      raw.push_back(std::move(c));
    }
  }
  auto out = consolidate(std::move(raw), config);
  std::stable_sort(out.begin(), out.end(), [](const CandidateNode& a, const CandidateNode& b) {
    if (a.support() != b.support()) return a.support() > b.support();
    return a.id < b.id;
  });
  return out;
}

// ---- refinement -------------------------------------------------------------------

RefineAction RefineAction::confirm(std::string id) {
  RefineAction a;
  a.kind = Kind::Confirm;
  a.id = std::move(id);
  return a;
}
RefineAction RefineAction::rename(std::string id, std::string title) {
  RefineAction a;
  a.kind = Kind::Rename;
  a.id = std::move(id);
  a.title = std::move(title);
  return a;
}
RefineAction RefineAction::merge(std::vector<std::string> ids) {
  RefineAction a;
  a.kind = Kind::Merge;
  a.ids = std::move(ids);
  return a;
}
RefineAction RefineAction::split(std::string id, std::vector<std::vector<SegmentRef>> partition) {
  RefineAction a;
  a.kind = Kind::Split;
  a.id = std::move(id);
  a.partition = std::move(partition);
  return a;
}
RefineAction RefineAction::add(std::string title, std::string description, std::vector<SegmentRef> members) {
  RefineAction a;
  a.kind = Kind::Add;
  a.title = std::move(title);
  a.description = std::move(description);
  a.members = std::move(members);
  return a;
}
RefineAction RefineAction::remove(std::string id) {
  RefineAction a;
  a.kind = Kind::Remove;
  a.id = std::move(id);
  return a;
}
RefineAction RefineAction::refresh() {
  RefineAction a;
  a.kind = Kind::Refresh;
  return a;
}

namespace {

std::string short_title(const std::string& summary) {
  auto sentences = text::split_sentences(summary);
  std::string first = sentences.empty() ? summary : sentences.front();
  std::vector<std::string> words;
  std::size_t pos = 0;
  while (pos < first.size() && words.size() < 12) {
    auto next = first.find(' ', pos);
    if (next == std::string::npos) next = first.size();
    if (next > pos) words.push_back(first.substr(pos, next - pos));
    pos = next + 1;
  }
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  while (!out.empty() && (out.back() == '.' || out.back() == ',')) out.pop_back();
  return out;
}

}  // namespace

const InformationNode* NodeSet::find(std::string_view id) const {
  for (const auto& n : nodes_)
    if (n.id == id) return &n;
  return nullptr;
}

InformationNode& NodeSet::get(std::string_view id) {
  for (auto& n : nodes_)
    if (n.id == id) return n;
  throw DataError("unknown node id '" + std::string(id) + "'");
}

std::vector<const InformationNode*> NodeSet::confirmed() const {
  std::vector<const InformationNode*> out;
  for (const auto& n : nodes_)
    if (n.state == NodeState::Confirmed) out.push_back(&n);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
  return out;
}

std::vector<const InformationNode*> NodeSet::live() const {
  std::vector<const InformationNode*> out;
  for (const auto& n : nodes_)
    if (n.live()) out.push_back(&n);
  return out;
}

std::string NodeSet::fresh_id() { return "n" + std::to_string(next_++); }

std::set<SegmentRef> NodeSet::owned_by_live(std::string_view except_id) const {
  std::set<SegmentRef> out;
  for (const auto& n : nodes_)
    if (n.live() && n.id != except_id) out.insert(n.members.begin(), n.members.end());
  return out;
}

void NodeSet::adopt(const std::vector<CandidateNode>& candidates) {
  for (const auto& c : candidates) {
    InformationNode n;
    n.id = fresh_id();
    n.title = short_title(c.summary);
    n.description = c.summary;
    n.members = c.members;
    n.state = NodeState::Candidate;
    n.origin = NodeOrigin::Auto;
    nodes_.push_back(std::move(n));
  }
}

std::vector<SegmentRef> NodeSet::uncovered(const SegmentsByRun& segments) const {
  const auto owned = owned_by_live();
  std::vector<SegmentRef> out;
  for (const auto& [run_id, segs] : segments)
    for (const auto& s : segs)
      if (SegmentRef ref{run_id, s.index}; !owned.contains(ref)) out.push_back(ref);
  return out;
}

std::vector<std::string> NodeSet::apply(const RefineAction& a, const RefineContext& ctx) {
  using K = RefineAction::Kind;
  auto require_live = [&](std::string_view id) -> InformationNode& {
    auto& n = get(id);
    if (!n.live()) throw DataError("node '" + std::string(id) + "' was discarded");
    return n;
  };

  switch (a.kind) {
    case K::Confirm:
      require_live(a.id).state = NodeState::Confirmed;
      return {};

    case K::Rename: {
      auto& n = require_live(a.id);
      if (!a.title && !a.description) throw DataError("rename needs a title or description");
      if (a.title) {
        if (text::trim(*a.title).empty()) throw DataError("title must not be empty");
        n.title = *a.title;
      }
      if (a.description) n.description = *a.description;
      return {};
    }

    case K::Merge: {
      std::set<std::string> unique(a.ids.begin(), a.ids.end());
      if (unique.size() < 2 || unique.size() != a.ids.size())
        throw DataError("merge needs at least two distinct node ids");
      InformationNode merged;
      std::set<SegmentRef> seen;
      bool any_confirmed = false;
      for (const auto& id : a.ids) {
        const auto& parent = require_live(id);
        for (const auto& m : parent.members)
          if (seen.insert(m).second) merged.members.push_back(m);
        any_confirmed = any_confirmed || parent.state == NodeState::Confirmed;
        if (!merged.description.empty()) merged.description += " ";
        merged.description += parent.description;
      }
      merged.title = a.title ? *a.title : get(a.ids.front()).title;
      merged.state = any_confirmed ? NodeState::Confirmed : NodeState::Candidate;
      merged.origin = NodeOrigin::Merge;
      merged.parent_ids = a.ids;
      for (const auto& id : a.ids) get(id).state = NodeState::Discarded;
      merged.id = fresh_id();
      nodes_.push_back(merged);
      return {merged.id};
    }

    case K::Split: {
      const auto& parent = require_live(a.id);
      if (a.partition.size() < 2) throw DataError("invalid partition: split needs at least two parts");
      std::multiset<SegmentRef> given;
      for (const auto& part : a.partition) {
        if (part.empty()) throw DataError("invalid partition: empty part");
        given.insert(part.begin(), part.end());
      }
      std::multiset<SegmentRef> expected(parent.members.begin(), parent.members.end());
      if (given != expected)
        throw DataError("invalid partition: parts must cover the node's members exactly once");
      std::vector<InformationNode> parts;
      for (std::size_t k = 0; k < a.partition.size(); ++k) {
        InformationNode n;
        n.title = parent.title + " (part " + std::to_string(k + 1) + ")";
        n.description = parent.description;
        n.members = a.partition[k];
        n.state = parent.state;
        n.origin = NodeOrigin::Split;
        n.parent_ids = {parent.id};
        parts.push_back(std::move(n));
      }
      get(a.id).state = NodeState::Discarded;
      std::vector<std::string> created;
      for (auto& n : parts) {
        n.id = fresh_id();
        created.push_back(n.id);
        nodes_.push_back(std::move(n));
      }
      return created;
    }

    case K::Add: {
      if (!a.title || text::trim(*a.title).empty()) throw DataError("add needs a non-empty title");
      const auto owned = owned_by_live();
      std::set<SegmentRef> seen;
      for (const auto& m : a.members) {
        if (ctx.segments && !find_segment(*ctx.segments, m)) throw DataError("unknown segment " + m.key());
        if (owned.contains(m)) throw DataError("segment " + m.key() + " already belongs to a live node");
        if (!seen.insert(m).second) throw DataError("duplicate member " + m.key());
      }
      InformationNode n;
      n.id = fresh_id();
      n.title = *a.title;
      n.description = a.description.value_or("");
      n.members = a.members;
      n.state = NodeState::Candidate;
      n.origin = NodeOrigin::Manual;
      nodes_.push_back(n);
      return {n.id};
    }

    case K::Remove:
      require_live(a.id).state = NodeState::Discarded;
      return {};

    case K::Refresh: {
      if (!ctx.segments || !ctx.config || !ctx.embedder) throw DataError("refresh needs segments and an embedder");
      std::set<SegmentRef> claimed;
      for (const auto* n : confirmed()) claimed.insert(n->members.begin(), n->members.end());
      auto fresh = extract_candidates(*ctx.segments, *ctx.config, *ctx.embedder, ctx.gateway, claimed);
      for (auto& n : nodes_)
        if (n.state == NodeState::Candidate) n.state = NodeState::Discarded;
      const auto before = nodes_.size();
      adopt(fresh);
      std::vector<std::string> created;
      for (auto i = before; i < nodes_.size(); ++i) created.push_back(nodes_[i].id);
      return created;
    }
  }
  return {};
}

// ---- JSON -------------------------------------------------------------------------

std::string_view to_string(NodeState s) noexcept {
  switch (s) {
    case NodeState::Candidate: return "candidate";
    case NodeState::Confirmed: return "confirmed";
    case NodeState::Discarded: return "discarded";
  }
  return "candidate";
}

std::string_view to_string(NodeOrigin o) noexcept {
  switch (o) {
    case NodeOrigin::Auto: return "auto";
    case NodeOrigin::Manual: return "manual";
    case NodeOrigin::Merge: return "merge";
    case NodeOrigin::Split: return "split";
  }
  return "auto";
}

namespace {

NodeState state_from(const std::string& s) {
  if (s == "candidate") return NodeState::Candidate;
  if (s == "confirmed") return NodeState::Confirmed;
  if (s == "discarded") return NodeState::Discarded;
  throw DataError("unknown node state '" + s + "'");
}

NodeOrigin origin_from(const std::string& s) {
  if (s == "auto") return NodeOrigin::Auto;
  if (s == "manual") return NodeOrigin::Manual;
  if (s == "merge") return NodeOrigin::Merge;
  if (s == "split") return NodeOrigin::Split;
  throw DataError("unknown node origin '" + s + "'");
}

constexpr std::pair<RefineAction::Kind, std::string_view> kActionNames[] = {
    {RefineAction::Kind::Confirm, "confirm"}, {RefineAction::Kind::Rename, "rename"},
    {RefineAction::Kind::Merge, "merge"},     {RefineAction::Kind::Split, "split"},
    {RefineAction::Kind::Add, "add"},         {RefineAction::Kind::Remove, "remove"},
    {RefineAction::Kind::Refresh, "refresh"},
};

}  // namespace

void to_json(nlohmann::json& j, const InformationNode& n) {
  j = nlohmann::json{{"id", n.id},
                     {"title", n.title},
                     {"description", n.description},
                     {"members", n.members},
                     {"support", n.support()},
                     {"state", to_string(n.state)},
                     {"provenance", {{"origin", to_string(n.origin)}, {"parent_ids", n.parent_ids}}}};
}

void from_json(const nlohmann::json& j, InformationNode& n) {
  n.id = j.at("id").get<std::string>();
  n.title = j.at("title").get<std::string>();
  n.description = j.at("description").get<std::string>();
  n.members = j.at("members").get<std::vector<SegmentRef>>();
  n.state = state_from(j.at("state").get<std::string>());
  n.origin = origin_from(j.at("provenance").at("origin").get<std::string>());
  n.parent_ids = j.at("provenance").at("parent_ids").get<std::vector<std::string>>();
}

void to_json(nlohmann::json& j, const NodeSet& s) {
  j = nlohmann::json{{"next_id", s.next_}, {"nodes", s.nodes_}};
}

void from_json(const nlohmann::json& j, NodeSet& s) {
  s.next_ = j.at("next_id").get<long>();
  s.nodes_ = j.at("nodes").get<std::vector<InformationNode>>();
}

void to_json(nlohmann::json& j, const RefineAction& a) {
  for (const auto& [k, name] : kActionNames)
    if (k == a.kind) j = nlohmann::json{{"type", name}};
  if (!a.id.empty()) j["id"] = a.id;
  if (!a.ids.empty()) j["ids"] = a.ids;
  if (a.title) j["title"] = *a.title;
  if (a.description) j["description"] = *a.description;
  if (!a.partition.empty()) j["partition"] = a.partition;
  if (!a.members.empty()) j["members"] = a.members;
}

void from_json(const nlohmann::json& j, RefineAction& a) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) throw DataError("refine action needs a 'type'");
  const auto type = j["type"].get<std::string>();
  bool found = false;
  for (const auto& [k, name] : kActionNames)
    if (name == type) {
      a.kind = k;
      found = true;
    }
  if (!found) throw DataError("unknown refine action '" + type + "'");
  try {
    a.id = j.value("id", std::string());
    a.ids = j.value("ids", std::vector<std::string>());
    if (j.contains("title")) a.title = j["title"].get<std::string>();
    if (j.contains("description")) a.description = j["description"].get<std::string>();
    if (j.contains("partition")) a.partition = j["partition"].get<std::vector<std::vector<SegmentRef>>>();
    if (j.contains("members")) a.members = j["members"].get<std::vector<SegmentRef>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed refine action: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const CandidateNode& c) {
  j = nlohmann::json{{"id", c.id}, {"summary", c.summary}, {"members", c.members}, {"support", c.support()}};
}

}  // namespace tracealign
