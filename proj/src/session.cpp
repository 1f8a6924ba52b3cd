#include "tracealign/session.hpp"

#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "tracealign/action_analytics.hpp"
#include "tracealign/text.hpp"

namespace tracealign {

using nlohmann::json;

Engine Engine::local(std::shared_ptr<const Gateway> gateway) {
  struct Cache {
    std::mutex mu;
    std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const EmbeddingProvider>> by_shape;
  };
  auto cache = std::make_shared<Cache>();
  Engine e;
  e.embedder_for = [cache](const AnalysisConfig& c) -> std::shared_ptr<const EmbeddingProvider> {
    std::lock_guard lock(cache->mu);
    auto& slot = cache->by_shape[{c.d, c.max_chars}];
    if (!slot) slot = std::make_shared<MemoEmbedder>(std::make_shared<HashingEmbedder>(c.d, c.max_chars));
    return slot;
  };
  e.gateway = std::move(gateway);
  return e;
}

std::pair<std::shared_ptr<const TaskBundle>, std::string> load_bundle(const std::string& path, const AliasMap& aliases,
                                                                      const TaskInfo& task) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open trace file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  std::istringstream src(bytes);
  auto bundle = std::make_shared<const TaskBundle>(ingest_traces(src, TraceFormat::JsonlV1, aliases, task));
  return {bundle, text::sha256_hex(bytes)};
}

Session Session::create(const std::string& bundle_path, AliasMap aliases, TaskInfo task, AnalysisConfig config) {
  config.validate();
  Session s;
  s.aliases = std::move(aliases);
  s.task = std::move(task);
  auto [bundle, digest] = load_bundle(bundle_path, s.aliases, s.task);
  s.bundle = bundle;
  s.bundle_ref = {bundle_path, digest};
  s.initial_config = config;
  s.config = config;
  return s;
}

const TaskBundle& Session::require_bundle() const {
  if (!bundle) throw DataError("session has no loaded trace bundle");
  return *bundle;
}

bool operator==(const Session& a, const Session& b) {
  return a.schema_version == b.schema_version && a.bundle_ref == b.bundle_ref && a.aliases == b.aliases &&
         a.task.task_id == b.task.task_id && a.task.task_description == b.task.task_description &&
         a.initial_config == b.initial_config && a.config == b.config && a.revision == b.revision &&
         a.segments == b.segments && a.nodes == b.nodes && a.graph == b.graph && a.matrix == b.matrix &&
         a.flow == b.flow && a.link_analytics == b.link_analytics && a.audit == b.audit;
}

namespace {

std::set<std::string> confirmed_ids(const NodeSet& nodes) {
  std::set<std::string> ids;
  for (const auto* n : nodes.confirmed()) ids.insert(n->id);
  return ids;
}

void clear_derived(Session& s) {
  s.matrix = JudgmentMatrix();
  s.flow.reset();
  s.link_analytics.clear();
}

void sync_graph(Session& s) {
  auto ids = confirmed_ids(s.nodes);
  if (s.graph.node_ids() != ids) s.graph.set_nodes(std::move(ids));
}

RefineContext context_for(const Session& s, const EmbeddingProvider& embedder, const Engine& engine) {
  return {&s.segments, &s.config, &embedder, engine.gateway.get()};
}

void run_extract(Session& s, const Engine& engine) {
  const auto embedder = engine.embedder_for(s.config);
  const auto& bundle = s.require_bundle();
  if (s.segments.empty() || s.nodes.confirmed().empty()) {
    s.segments = segment_bundle(bundle, *embedder, s.config);
    NodeSet fresh;
    fresh.adopt(extract_candidates(s.segments, s.config, *embedder, engine.gateway.get()));
    s.nodes = std::move(fresh);
  } else {
    s.nodes.apply(RefineAction::refresh(), context_for(s, *embedder, engine));
  }
}

void compute_link_analytics(Session& s, const Engine& engine) {
  const auto embedder = engine.embedder_for(s.config);
  std::set<std::string> ids;
  for (const auto& l : s.flow->links) {
    ids.insert(l.id());
    ids.insert(l.transition_id());
  }
  for (const auto& id : ids) {
    auto a = analyze_transition(s.require_bundle(), s.matrix, s.flow->select(id), s.config, *embedder,
                                engine.gateway.get());
    s.link_analytics[id] = a;
  }
}

void run_evaluate(Session& s, const Engine& engine) {
  auto confirmed = s.nodes.confirmed();
  if (confirmed.empty()) throw DataError("no confirmed information nodes; confirm nodes before evaluating");
  sync_graph(s);
  s.matrix = evaluate_all(s.require_bundle(), confirmed, s.graph, s.segments, s.config, engine.gateway.get(),
                          engine.progress);
  s.flow = build_flow(s.matrix, s.graph);
  s.link_analytics.clear();
  compute_link_analytics(s, engine);
}

void apply_in_place(Session& s, const json& m, const Engine& engine) {
  if (!m.is_object() || !m.contains("kind") || !m["kind"].is_string()) throw DataError("mutation needs a string 'kind'");
  const auto kind = m["kind"].get<std::string>();
  if (kind == "set_config") {
    AnalysisConfig c = m.at("config").get<AnalysisConfig>();
    c.validate();
    const bool resegment = c.d != s.config.d || c.max_chars != s.config.max_chars || c.theta_seg != s.config.theta_seg;
    s.config = c;
    if (resegment && s.nodes.confirmed().empty()) s.segments.clear();
    clear_derived(s);
  } else if (kind == "extract") {
    run_extract(s, engine);
    sync_graph(s);
    clear_derived(s);
  } else if (kind == "refine") {
    if (s.segments.empty()) throw DataError("no segments; run extract first");
    const auto embedder = engine.embedder_for(s.config);
    const auto& actions = m.at("actions");
    if (!actions.is_array() || actions.empty()) throw DataError("refine needs a non-empty 'actions' array");
    for (const auto& a : actions) s.nodes.apply(a.get<RefineAction>(), context_for(s, *embedder, engine));
    sync_graph(s);
    clear_derived(s);
  } else if (kind == "deps_edit") {
    sync_graph(s);
    const auto op = m.at("op").get<std::string>();
    const auto from = m.at("from").get<std::string>(), to = m.at("to").get<std::string>();
    if (op == "add") s.graph.add_edge(from, to, EdgeOrigin::Manual);
    else if (op == "remove") s.graph.remove_edge(from, to);
    else throw DataError("deps_edit op must be 'add' or 'remove'");
    clear_derived(s);
  } else if (kind == "deps_put") {
    DependencyGraph g(confirmed_ids(s.nodes));
    for (const auto& e : m.at("edges")) {
      EdgeOrigin origin = EdgeOrigin::Manual;
      if (e.contains("origin")) origin = edge_origin_from_string(e["origin"].get<std::string>());
      g.add_edge(e.at("from").get<std::string>(), e.at("to").get<std::string>(), origin);
    }
    s.graph = std::move(g);
    clear_derived(s);
  } else if (kind == "deps_import") {
    s.graph = import_flow(m.at("document"), s.nodes.confirmed());
    clear_derived(s);
  } else if (kind == "deps_infer_apply") {
    auto confirmed = s.nodes.confirmed();
    if (confirmed.empty()) throw DataError("no confirmed information nodes");
    auto proposal = infer_dependencies(s.task.task_description, confirmed, s.segments, engine.gateway.get());
    DependencyGraph g(confirmed_ids(s.nodes));
    for (const auto& e : s.graph.edges())
      if (e.origin != EdgeOrigin::Inferred && g.node_ids().contains(e.from) && g.node_ids().contains(e.to))
        g.add_edge(e.from, e.to, e.origin);
    for (const auto& e : proposal.edges) {
      if (g.has_edge(e.from, e.to) || g.reaches(e.to, e.from)) continue;
      g.add_edge(e.from, e.to, EdgeOrigin::Inferred);
    }
    s.graph = std::move(g);
    clear_derived(s);
  } else if (kind == "evaluate") {
    run_evaluate(s, engine);
  } else {
    throw DataError("unknown mutation kind '" + kind + "'");
  }
}

}  // namespace

long apply_mutation(Session& s, const json& mutation, const Engine& engine) {
  Session next = s;
  apply_in_place(next, mutation, engine);
  next.revision = s.revision + 1;
  next.audit.push_back({next.revision, mutation});
  s = std::move(next);
  return s.revision;
}

Session replay(const Session& s, const Engine& engine) {
  Session r;
  r.bundle_ref = s.bundle_ref;
  r.aliases = s.aliases;
  r.task = s.task;
  r.initial_config = s.initial_config;
  r.config = s.initial_config;
  r.bundle = s.bundle;
  r.stale = s.stale;
  for (const auto& rec : s.audit) apply_mutation(r, rec.mutation, engine);
  return r;
}

json session_to_json(const Session& s) {
  json segs = json::object();
  for (const auto& [run, list] : s.segments) segs[run] = list;
  json audit = json::array();
  for (const auto& a : s.audit) audit.push_back({{"revision", a.revision}, {"mutation", a.mutation}});
  json analytics = json::object();
  for (const auto& [id, a] : s.link_analytics) analytics[id] = a;
  return json{{"schema_version", s.schema_version},
              {"bundle", {{"path", s.bundle_ref.path}, {"digest", s.bundle_ref.digest}}},
              {"aliases", s.aliases.to_json()},
              {"task", {{"task_id", s.task.task_id}, {"task_description", s.task.task_description}}},
              {"initial_config", s.initial_config},
              {"config", s.config},
              {"revision", s.revision},
              {"segments", segs},
              {"nodes", s.nodes},
              {"graph", s.graph},
              {"matrix", s.matrix},
              {"flow", s.flow ? json(*s.flow) : json(nullptr)},
              {"link_analytics", analytics},
              {"audit", audit}};
}

Session session_from_json(const json& j) {
  if (!j.is_object() || !j.contains("schema_version")) throw DataError("corrupt session file: missing schema_version");
  const int v = j["schema_version"].get<int>();
  if (v != kSessionSchemaVersion)
    throw SessionVersionError("session schema_version " + std::to_string(v) + " is not supported (expected " +
                              std::to_string(kSessionSchemaVersion) +
                              "); migrate the file with a matching tracealign release or rebuild it with 'ingest'");
  try {
    Session s;
    s.schema_version = v;
    s.bundle_ref = {j.at("bundle").at("path").get<std::string>(), j.at("bundle").at("digest").get<std::string>()};
    s.aliases = AliasMap::from_json(j.at("aliases"));
    s.task = {j.at("task").at("task_id").get<std::string>(), j.at("task").at("task_description").get<std::string>()};
    s.initial_config = j.at("initial_config").get<AnalysisConfig>();
    s.config = j.at("config").get<AnalysisConfig>();
    s.revision = j.at("revision").get<long>();
    for (const auto& [run, list] : j.at("segments").items()) s.segments[run] = list.get<std::vector<Segment>>();
    s.nodes = j.at("nodes").get<NodeSet>();
    s.graph = j.at("graph").get<DependencyGraph>();
    s.matrix = j.at("matrix").get<JudgmentMatrix>();
    if (!j.at("flow").is_null()) s.flow = j["flow"].get<SankeyModel>();
    for (const auto& [id, a] : j.at("link_analytics").items()) s.link_analytics[id] = a;
    for (const auto& a : j.at("audit")) s.audit.push_back({a.at("revision").get<long>(), a.at("mutation")});
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt session file: ") + e.what());
  }
}

void save_session(const Session& s, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write session file '" + path + "'");
    out << session_to_json(s).dump(2) << '\n';
    if (!out) throw DataError("failed writing session file '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw DataError("cannot replace session file '" + path + "'");
}

Session load_session(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open session file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("corrupt session file: ") + e.what());
  }
  Session s = session_from_json(j);
  auto [bundle, digest] = load_bundle(s.bundle_ref.path, s.aliases, s.task);
  s.bundle = bundle;
  s.stale = digest != s.bundle_ref.digest;
  return s;
}

json link_analysis(const Session& s, const std::string& id, const Engine& engine) {
  if (!s.flow) throw DataError("no flow model; run evaluate first");
  if (auto it = s.link_analytics.find(id); it != s.link_analytics.end()) return it->second;
  auto links = s.flow->select(id);
  if (links.empty()) throw DataError("unknown link '" + id + "'");
  const auto embedder = engine.embedder_for(s.config);
  return analyze_transition(s.require_bundle(), s.matrix, links, s.config, *embedder, engine.gateway.get());
}

}  // namespace tracealign
