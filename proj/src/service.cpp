#include "tracealign/service.hpp"

#include <httplib.h>

#include <charconv>

#include "tracealign/action_analytics.hpp"
#include "tracealign/errors.hpp"

namespace tracealign {

using nlohmann::json;

void to_json(json& j, const EvaluationStatus& s) {
  j = json{{"state", s.state}, {"done", s.done}, {"total", s.total}, {"base_revision", s.base_revision}};
  j["result_revision"] = s.result_revision ? json(*s.result_revision) : json(nullptr);
  if (!s.error.empty()) j["error"] = s.error;
}

SessionService::SessionService(Session session, Engine engine, std::optional<std::string> save_path)
    : engine_(std::move(engine)),
      save_path_(std::move(save_path)),
      current_(std::make_shared<const Session>(std::move(session))) {}

SessionService::~SessionService() { join_evaluation(); }

void SessionService::join_evaluation() {
  if (worker_.joinable()) worker_.join();
}

std::shared_ptr<const Session> SessionService::snapshot() const {
  std::lock_guard lock(snap_mu_);
  return current_;
}

void SessionService::publish(std::shared_ptr<const Session> s) {
  if (save_path_) save_session(*s, *save_path_);
  std::lock_guard lock(snap_mu_);
  current_ = std::move(s);
}

long SessionService::mutate(const json& mutation, std::optional<long> base_revision) {
  std::lock_guard lock(write_mu_);
  auto cur = snapshot();
  if (base_revision && *base_revision != cur->revision)
    throw ConflictError(cur->revision, "base revision " + std::to_string(*base_revision) + " is not current");
  auto next = std::make_shared<Session>(*cur);
  const long rev = apply_mutation(*next, mutation, engine_);
  publish(std::move(next));
  return rev;
}

EvaluationStatus SessionService::evaluation_status() const {
  std::lock_guard lock(status_mu_);
  return status_;
}

EvaluationStatus SessionService::evaluate(std::optional<long> base_revision, bool wait) {
  {
    std::lock_guard lock(status_mu_);
    if (status_.state == "running") throw ConflictError(snapshot()->revision, "an evaluation is already running");
  }
  auto cur = snapshot();
  if (base_revision && *base_revision != cur->revision)
    throw ConflictError(cur->revision, "base revision " + std::to_string(*base_revision) + " is not current");
  if (cur->nodes.confirmed().empty())
    throw DataError("no confirmed information nodes; confirm nodes before evaluating");
  join_evaluation();
  {
    std::lock_guard lock(status_mu_);
    status_ = EvaluationStatus{"running", 0, cur->require_bundle().runs.size() * cur->nodes.confirmed().size(),
                               cur->revision, std::nullopt, ""};
  }

  auto job = [this, cur] {
    Engine engine = engine_;
    engine.progress = [this](std::size_t done, std::size_t total) {
      std::lock_guard lock(status_mu_);
      status_.done = done;
      status_.total = total;
    };
    try {
      auto next = std::make_shared<Session>(*cur);
      const long rev = apply_mutation(*next, json{{"kind", "evaluate"}}, engine);
      std::lock_guard wlock(write_mu_);
      const long now = snapshot()->revision;
      if (now != cur->revision) throw ConflictError(now, "session changed during evaluation (now at revision " +
                                                             std::to_string(now) + ")");
      publish(std::move(next));
      std::lock_guard lock(status_mu_);
      status_.state = "done";
      status_.done = status_.total;
      status_.result_revision = rev;
    } catch (const std::exception& e) {
      std::lock_guard lock(status_mu_);
      status_.state = "failed";
      status_.error = e.what();
    }
  };

  if (wait) {
    job();
    auto st = evaluation_status();
    if (st.state == "failed") throw DataError("evaluation failed: " + st.error);
    return st;
  }
  worker_ = std::thread(job);
  return evaluation_status();
}

// ---------------------------------------------------------------------------------------

namespace {

struct HttpError : std::runtime_error {
  HttpError(int status, const std::string& msg) : std::runtime_error(msg), status(status) {}
  int status;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw HttpError(400, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw HttpError(400, std::string("invalid JSON body: ") + e.what());
  }
}

std::optional<long> parse_long(const std::string& s, const char* what) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw HttpError(400, std::string("invalid ") + what + " '" + s + "'");
  return v;
}

std::optional<long> base_revision(const httplib::Request& req, const json& body) {
  if (body.contains("base_revision")) {
    if (!body["base_revision"].is_number_integer()) throw HttpError(400, "base_revision must be an integer");
    return body["base_revision"].get<long>();
  }
  if (req.has_param("base_revision")) return parse_long(req.get_param_value("base_revision"), "base_revision");
  return std::nullopt;
}

const InformationNode& require_node(const Session& s, const std::string& id) {
  const auto* n = s.nodes.find(id);
  if (!n || !n->live()) throw HttpError(404, "unknown node '" + id + "'");
  return *n;
}

json node_list(const Session& s) {
  json nodes = json::array();
  for (const auto& n : s.nodes.nodes()) nodes.push_back(n);
  return nodes;
}

json dependencies_doc(const Session& s) {
  json nodes = json::array();
  for (const auto* n : s.nodes.confirmed()) nodes.push_back({{"id", n->id}, {"title", n->title}});
  DependencyGraph g = s.graph;
  std::set<std::string> ids;
  for (const auto* n : s.nodes.confirmed()) ids.insert(n->id);
  if (g.node_ids() != ids) g.set_nodes(ids);
  return {{"revision", s.revision}, {"nodes", nodes}, {"edges", json(g).at("edges")}, {"order", g.topological_order()}};
}

const SankeyModel& require_flow(const Session& s) {
  if (!s.flow) throw HttpError(404, "session has not been evaluated");
  return *s.flow;
}

}  // namespace

struct HttpServer::Impl {
  std::shared_ptr<SessionService> svc;
  httplib::Server server;
  std::thread thread;
  bool bound = false;

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  Handler guard(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const HttpError& e) {
        send_json(res, e.status, {{"error", e.what()}});
      } catch (const ConflictError& e) {
        send_json(res, 409, {{"error", e.what()}, {"current_revision", e.current_revision()}});
      } catch (const GatewayError& e) {
        send_json(res, 502, {{"error", e.what()}, {"kind", to_string(e.kind())}});
      } catch (const DataError& e) {
        send_json(res, 400, {{"error", e.what()}});
      } catch (const ConfigError& e) {
        send_json(res, 400, {{"error", e.what()}});
      } catch (const json::exception& e) {
        send_json(res, 400, {{"error", std::string("invalid request: ") + e.what()}});
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", e.what()}});
      }
    };
  }

  void mutation_reply(httplib::Response& res, long rev, const json& extra = json::object()) {
    json body = extra;
    body["revision"] = rev;
    send_json(res, 200, body);
  }

  void routes() {
    auto& S = server;

    S.Get("/summary", guard([this](const httplib::Request&, httplib::Response& res) {
      auto s = svc->snapshot();
      const auto& b = s->require_bundle();
      json runs = json::array();
      for (const auto& t : summarize_tokens(b)) {
        json r = t;
        r["declared_outcome"] = to_string(b.find_run(t.run_id)->declared_outcome);
        runs.push_back(std::move(r));
      }
      std::size_t seg_count = 0;
      for (const auto& [_, v] : s->segments) seg_count += v.size();
      std::size_t candidates = 0, confirmed = 0;
      for (const auto& n : s->nodes.nodes()) {
        if (n.state == NodeState::Candidate) ++candidates;
        if (n.state == NodeState::Confirmed) ++confirmed;
      }
      send_json(res, 200,
                {{"revision", s->revision},
                 {"task_id", s->task.task_id},
                 {"task_description", s->task.task_description},
                 {"stale", s->stale},
                 {"bundle", {{"path", s->bundle_ref.path}, {"digest", s->bundle_ref.digest}}},
                 {"config", s->config},
                 {"runs", runs},
                 {"counts", {{"segments", seg_count}, {"candidates", candidates}, {"confirmed", confirmed}}},
                 {"evaluated", s->evaluated()}});
    }));

    S.Get("/runs", guard([this](const httplib::Request&, httplib::Response& res) {
      auto s = svc->snapshot();
      json runs = json::array();
      for (const auto& r : s->require_bundle().runs)
        runs.push_back({{"run_id", r.run_id},
                        {"entry_count", r.entries.size()},
                        {"first_step", r.first_step()},
                        {"last_step", r.last_step()},
                        {"declared_outcome", to_string(r.declared_outcome)}});
      send_json(res, 200, {{"revision", s->revision}, {"runs", runs}});
    }));

    S.Get(R"(/runs/([^/]+)/log)", guard([this](const httplib::Request& req, httplib::Response& res) {
      auto s = svc->snapshot();
      const std::string id = req.matches[1];
      const Run* run = s->require_bundle().find_run(id);
      if (!run) throw HttpError(404, "unknown run '" + id + "'");
      long from = run->first_step(), to = run->last_step();
      if (req.has_param("from")) from = *parse_long(req.get_param_value("from"), "from");
      if (req.has_param("to")) to = *parse_long(req.get_param_value("to"), "to");
      if (from > to) throw HttpError(400, "from must not exceed to");
      json entries = json::array();
      for (const auto* e : run->entries_between(from, to)) entries.push_back(*e);
      send_json(res, 200, {{"run_id", id}, {"from", from}, {"to", to}, {"entries", entries}});
    }));

    S.Post("/nodes/extract", guard([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      long rev = svc->mutate({{"kind", "extract"}}, base_revision(req, body));
      mutation_reply(res, rev, {{"nodes", node_list(*svc->snapshot())}});
    }));

    S.Get("/nodes", guard([this](const httplib::Request&, httplib::Response& res) {
      auto s = svc->snapshot();
      send_json(res, 200, {{"revision", s->revision}, {"nodes", node_list(*s)}, {"uncovered", s->nodes.uncovered(s->segments)}});
    }));

    S.Patch(R"(/nodes/([^/]+))", guard([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      const std::string id = req.matches[1];
      require_node(*svc->snapshot(), id);
      json actions = json::array();
      if (body.contains("title") || body.contains("description")) {
        RefineAction a;
        a.kind = RefineAction::Kind::Rename;
        a.id = id;
        if (body.contains("title")) a.title = body["title"].get<std::string>();
        if (body.contains("description")) a.description = body["description"].get<std::string>();
        actions.push_back(a);
      }
      if (body.contains("state")) {
        const auto st = body["state"].get<std::string>();
        if (st == "confirmed") actions.push_back(RefineAction::confirm(id));
        else if (st == "discarded") actions.push_back(RefineAction::remove(id));
        else throw HttpError(400, "state must be 'confirmed' or 'discarded'");
      }
      if (actions.empty()) throw HttpError(400, "nothing to change: give title, description or state");
      long rev = svc->mutate({{"kind", "refine"}, {"actions", actions}}, base_revision(req, body));
      auto s = svc->snapshot();
      mutation_reply(res, rev, {{"node", *s->nodes.find(id)}});
    }));

    S.Post("/nodes/merge", guard([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      if (!body.contains("ids") || !body["ids"].is_array()) throw HttpError(400, "merge needs an 'ids' array");
      auto a = RefineAction::merge(body["ids"].get<std::vector<std::string>>());
      if (body.contains("title")) a.title = body["title"].get<std::string>();
      auto before = svc->snapshot()->nodes.next_counter();
      long rev = svc->mutate({{"kind", "refine"}, {"actions", json::array({a})}}, base_revision(req, body));
      auto s = svc->snapshot();
      json created = json::array();
      for (long k = before; k < s->nodes.next_counter(); ++k) created.push_back("n" + std::to_string(k));
      mutation_reply(res, rev, {{"created", created}});
    }));

    S.Post(R"(/nodes/([^/]+)/split)", guard([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      const std::string id = req.matches[1];
      require_node(*svc->snapshot(), id);
      if (!body.contains("partition")) throw HttpError(400, "split needs a 'partition'");
      auto a = RefineAction::split(id, body["partition"].get<std::vector<std::vector<SegmentRef>>>());
      auto before = svc->snapshot()->nodes.next_counter();
      long rev = svc->mutate({{"kind", "refine"}, {"actions", json::array({a})}}, base_revision(req, body));
      auto s = svc->snapshot();
      json created = json::array();
      for (long k = before; k < s->nodes.next_counter(); ++k) created.push_back("n" + std::to_string(k));
      mutation_reply(res, rev, {{"created", created}});
    }));

    S.Delete(R"(/nodes/([^/]+))", guard([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      const std::string id = req.matches[1];
      require_node(*svc->snapshot(), id);
      long rev = svc->mutate({{"kind", "refine"}, {"actions", json::array({RefineAction::remove(id)})}},
                             base_revision(req, body));
      mutation_reply(res, rev);
    }));

    S.Get("/dependencies", guard([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, dependencies_doc(*svc->snapshot()));
    }));

    S.Put("/dependencies", guard([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      if (!body.contains("edges") || !body["edges"].is_array()) throw HttpError(400, "body needs an 'edges' array");
      json m = body.contains("nodes") ? json{{"kind", "deps_import"}, {"document", {{"nodes", body["nodes"]}, {"edges", body["edges"]}}}}
                                      : json{{"kind", "deps_put"}, {"edges", body["edges"]}};
      long rev = svc->mutate(m, base_revision(req, body));
      auto doc = dependencies_doc(*svc->snapshot());
      doc["revision"] = rev;
      send_json(res, 200, doc);
    }));

    S.Post("/dependencies/infer", guard([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      long rev = svc->mutate({{"kind", "deps_infer_apply"}}, base_revision(req, body));
      auto doc = dependencies_doc(*svc->snapshot());
      doc["revision"] = rev;
      send_json(res, 200, doc);
    }));

    S.Post("/evaluate", guard([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      const bool wait = req.has_param("wait") && req.get_param_value("wait") == "true";
      auto st = svc->evaluate(base_revision(req, body), wait);
      json out = {{"status", st}, {"revision", svc->snapshot()->revision}};
      send_json(res, wait ? 200 : 202, out);
    }));

    S.Get("/evaluate/status", guard([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", svc->evaluation_status()}, {"revision", svc->snapshot()->revision}});
    }));

    S.Get("/matrix", guard([this](const httplib::Request&, httplib::Response& res) {
      auto s = svc->snapshot();
      require_flow(*s);
      json m = s->matrix;
      m["revision"] = s->revision;
      send_json(res, 200, m);
    }));

    S.Get("/flow", guard([this](const httplib::Request&, httplib::Response& res) {
      auto s = svc->snapshot();
      json f = require_flow(*s);
      json nodes = json::array();
      for (const auto& id : s->flow->columns) {
        json n = {{"id", id}};
        if (const auto* node = s->nodes.find(id)) n["title"] = node->title;
        else n["title"] = id;
        if (f.at("tallies").contains(id)) n["tally"] = f["tallies"][id];
        nodes.push_back(std::move(n));
      }
      f["nodes"] = nodes;
      f["revision"] = s->revision;
      send_json(res, 200, f);
    }));

    S.Get("/flow/paths", guard([this](const httplib::Request&, httplib::Response& res) {
      auto s = svc->snapshot();
      send_json(res, 200, {{"revision", s->revision}, {"paths", path_stats(require_flow(*s))}});
    }));

    auto link_route = [this](const char* part) {
      return guard([this, part](const httplib::Request& req, httplib::Response& res) {
        auto s = svc->snapshot();
        const auto& flow = require_flow(*s);
        if (req.has_param("revision") && *parse_long(req.get_param_value("revision"), "revision") != s->revision)
          throw ConflictError(s->revision, "stale link: the session moved to revision " + std::to_string(s->revision));
        const std::string id = req.matches[1];
        if (flow.select(id).empty()) throw HttpError(404, "unknown or stale link '" + id + "'");
        json a = link_analysis(*s, id, svc->engine());
        json out = {{"revision", s->revision}, {"link", id}};
        if (std::string_view(part) == "actions") {
          out["clusters"] = a.at("clusters");
          out["rows"] = a.at("rows");
          out["segments"] = a.at("segments");
          out["run_ids"] = a.at("run_ids");
        } else {
          out["reports"] = a.at("reports");
        }
        send_json(res, 200, out);
      });
    };
    S.Get(R"(/flow/links/(.+)/actions)", link_route("actions"));
    S.Get(R"(/flow/links/(.+)/errors)", link_route("errors"));
  }
};

HttpServer::HttpServer(std::shared_ptr<SessionService> service) : impl_(std::make_unique<Impl>()) {
  impl_->svc = std::move(service);
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = 0;
  if (port == 0) bound = impl_->server.bind_to_any_port(host);
  else bound = impl_->server.bind_to_port(host, port) ? port : -1;
  if (bound <= 0) throw DataError("cannot bind " + host + ":" + std::to_string(port));
  impl_->bound = true;
  return bound;
}

void HttpServer::listen() {
  if (!impl_->bound) throw DataError("server is not bound");
  impl_->server.listen_after_bind();
}

void HttpServer::start() {
  if (!impl_->bound) throw DataError("server is not bound");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace tracealign
